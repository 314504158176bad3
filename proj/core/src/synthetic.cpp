#include "gop/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "gop/errors.hpp"
#include "gop/random.hpp"

namespace gop {

namespace {

Dataset with_classes(Matrix X, std::vector<std::size_t> y, std::size_t classes) {
  Dataset ds;
  ds.X = std::move(X);
  ds.y = std::move(y);
  ds.num_classes = classes;
  for (std::size_t c = 0; c < classes; ++c) ds.class_names.push_back(std::to_string(c));
  for (Eigen::Index j = 0; j < ds.X.cols(); ++j) ds.feature_names.push_back("x" + std::to_string(j));
  return ds;
}

}  // namespace

Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 2) throw EmptyInput("two moons needs at least 2 samples");
  Rng rng(seed);
  Matrix X(static_cast<Eigen::Index>(n), 2);
  std::vector<std::size_t> y(n);
  const std::size_t outer = n / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (i < outer) {
      const double t = std::numbers::pi * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(outer - 1, 1));
      X(r, 0) = std::cos(t);
      X(r, 1) = std::sin(t);
      y[i] = 0;
    } else {
      const std::size_t inner = n - outer;
      const double t =
          std::numbers::pi * static_cast<double>(i - outer) / static_cast<double>(std::max<std::size_t>(inner - 1, 1));
      X(r, 0) = 1.0 - std::cos(t);
      X(r, 1) = 0.5 - std::sin(t);
      y[i] = 1;
    }
    X(r, 0) += noise * rng.normal();
    X(r, 1) += noise * rng.normal();
  }
  return with_classes(std::move(X), std::move(y), 2);
}

Dataset make_xor_blobs(std::size_t n, double stddev, std::uint64_t seed) {
  if (n < 4) throw EmptyInput("xor blobs needs at least 4 samples");
  Rng rng(seed);
  Matrix X(static_cast<Eigen::Index>(n), 2);
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t corner = i % 4;
    const double cx = (corner & 1) ? 1.0 : -1.0;
    const double cy = (corner & 2) ? 1.0 : -1.0;
    const auto r = static_cast<Eigen::Index>(i);
    X(r, 0) = cx + stddev * rng.normal();
    X(r, 1) = cy + stddev * rng.normal();
    y[i] = (cx * cy > 0) ? 0 : 1;
  }
  return with_classes(std::move(X), std::move(y), 2);
}

Dataset make_gaussian_blobs(std::size_t n, std::size_t classes, std::size_t dim, double separation,
                            double stddev, std::uint64_t seed) {
  if (classes < 2 || dim == 0 || n < classes) throw ConfigError("gaussian blobs need n >= classes >= 2, dim >= 1");
  Rng rng(seed);
  Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    y[i] = c;
    for (std::size_t j = 0; j < dim; ++j) {
      const double centre = (j == c % dim) ? separation * static_cast<double>(1 + c / dim) : 0.0;
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = centre + stddev * rng.normal();
    }
  }
  return with_classes(std::move(X), std::move(y), classes);
}

Dataset make_noise(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed) {
  if (classes < 2 || dim == 0 || n < classes) throw ConfigError("noise data needs n >= classes >= 2, dim >= 1");
  Rng rng(seed);
  Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index j = 0; j < X.size(); ++j) X.data()[j] = rng.normal();
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i < classes ? i : static_cast<std::size_t>(rng.below(classes));
  return with_classes(std::move(X), std::move(y), classes);
}

LabeledSet make_planted_teacher(std::size_t n, std::size_t dim, std::size_t width, std::size_t outputs,
                                const OperatorSet& op_set, std::uint64_t seed) {
  if (n == 0 || dim == 0 || width == 0 || outputs == 0) throw ConfigError("planted teacher needs positive sizes");
  Rng rng(seed);
  LabeledSet s;
  s.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index j = 0; j < s.X.size(); ++j) s.X.data()[j] = rng.normal();
  NeuronBlock teacher{op_set, Matrix(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(width)),
                      Vector(static_cast<Eigen::Index>(width))};
  for (Eigen::Index j = 0; j < teacher.weights.size(); ++j) teacher.weights.data()[j] = rng.uniform(-1.0, 1.0);
  for (Eigen::Index j = 0; j < teacher.bias.size(); ++j) teacher.bias[j] = rng.uniform(-1.0, 1.0);
  Matrix V(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(outputs));
  for (Eigen::Index j = 0; j < V.size(); ++j) V.data()[j] = rng.normal();
  s.Y = block_forward(teacher, s.X) * V;
  return s;
}

}  // namespace gop
