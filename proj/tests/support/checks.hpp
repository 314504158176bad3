#pragma once

// Numerical checks shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gop/network.hpp"
#include "gop/operators.hpp"
#include "gop/random.hpp"
#include "gop/ridge.hpp"
#include "gop/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace checks {

struct GradientCheck {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // kink-adjacent evaluations
  std::size_t failures = 0;
  double worst = 0.0;       // largest relative error among checked values

  void record(double analytic, double numeric, double tol, double floor = 1e-6) {
    const double err = oracle::relative_error(analytic, numeric, floor);
    ++checked;
    worst = std::max(worst, err);
    if (!(err < tol)) ++failures;
  }
};

inline constexpr double kFdStep = 1e-5;
inline constexpr double kKinkMargin = 1e-3;

/// Operator-level finite-difference checks: `points` random evaluations per
/// operator in [-2, 2]. Nodal operators check both partials.
inline std::vector<GradientCheck> operator_gradient_checks(std::uint64_t seed, std::size_t points = 100,
                                                           double tol = 1e-4) {
  std::vector<GradientCheck> out;
  gop::Rng rng(seed);
  for (gop::NodalOp op : gop::kAllNodal) {
    GradientCheck c{"nodal:" + std::string(gop::to_token(op))};
    for (std::size_t i = 0; i < points; ++i) {
      const double w = rng.uniform(-2.0, 2.0);
      const double y = rng.uniform(-2.0, 2.0);
      const gop::NodalGrad g = gop::nodal_grad(op, w, y);
      c.record(g.dz_dw, oracle::central_difference([&](double t) { return gop::nodal_forward(op, t, y); }, w, kFdStep),
               tol);
      c.record(g.dz_dy, oracle::central_difference([&](double t) { return gop::nodal_forward(op, w, t); }, y, kFdStep),
               tol);
    }
    out.push_back(c);
  }
  for (gop::PoolOp op : gop::kAllPool) {
    GradientCheck c{"pool:" + std::string(gop::to_token(op))};
    for (std::size_t i = 0; i < points; ++i) {
      std::vector<double> z(5);
      for (auto& v : z) v = rng.uniform(-2.0, 2.0);
      if (op == gop::PoolOp::Maximum) {
        std::vector<double> s = z;
        std::sort(s.begin(), s.end());
        if (s[4] - s[3] < kKinkMargin) {
          ++c.skipped;
          continue;
        }
      }
      const std::vector<double> g = gop::pool_grad(op, z);
      for (std::size_t k = 0; k < z.size(); ++k) {
        auto f = [&](double t) {
          std::vector<double> p = z;
          p[k] = t;
          return gop::pool_forward(op, p);
        };
        c.record(g[k], oracle::central_difference(f, z[k], kFdStep), tol);
      }
    }
    out.push_back(c);
  }
  for (gop::ActivationOp op : gop::kAllActivation) {
    GradientCheck c{"activation:" + std::string(gop::to_token(op))};
    const bool kinked = op == gop::ActivationOp::ReLU || op == gop::ActivationOp::ELU;
    for (std::size_t i = 0; i < points; ++i) {
      const double x = rng.uniform(-2.0, 2.0);
      if (kinked && std::abs(x) < kKinkMargin) {
        ++c.skipped;
        continue;
      }
      c.record(gop::activation_grad(op, x),
               oracle::central_difference([&](double t) { return gop::activation_forward(op, t); }, x, kFdStep), tol);
    }
    out.push_back(c);
  }
  return out;
}

/// Addresses of every selected scalar, in the order of `flatten(gradients)`.
inline std::vector<double*> parameter_slots(gop::GopNetwork& net, const gop::Gradients& g) {
  std::vector<double*> slots;
  for (const auto& bg : g.blocks) {
    auto& layer = net.layer(bg.ref.layer);
    auto& block = layer.blocks.at(bg.ref.block);
    for (Eigen::Index j = 0; j < block.weights.size(); ++j) slots.push_back(block.weights.data() + j);
    for (Eigen::Index j = 0; j < block.bias.size(); ++j) slots.push_back(block.bias.data() + j);
    const auto off = static_cast<Eigen::Index>(layer.block_offset(bg.ref.block));
    for (Eigen::Index j = 0; j < bg.d_scale.size(); ++j) slots.push_back(layer.norm.scale.data() + off + j);
    for (Eigen::Index j = 0; j < bg.d_shift.size(); ++j) slots.push_back(layer.norm.shift.data() + off + j);
  }
  if (g.d_output_weights)
    for (Eigen::Index j = 0; j < net.output_weights().size(); ++j) slots.push_back(net.output_weights().data() + j);
  if (g.d_output_bias)
    for (Eigen::Index j = 0; j < net.output_bias().size(); ++j) slots.push_back(net.output_bias().data() + j);
  return slots;
}

inline std::vector<double> flatten(const gop::Gradients& g) {
  std::vector<double> v;
  auto append = [&](const auto& m) {
    for (Eigen::Index j = 0; j < m.size(); ++j) v.push_back(m.data()[j]);
  };
  for (const auto& bg : g.blocks) {
    append(bg.d_weights);
    append(bg.d_bias);
    append(bg.d_scale);
    append(bg.d_shift);
  }
  if (g.d_output_weights) append(*g.d_output_weights);
  if (g.d_output_bias) append(*g.d_output_bias);
  return v;
}

/// Compares `backward` with central differences of `batch_loss` on `coords`
/// random selected scalars. A coordinate whose difference quotient changes
/// when the step is halved sits next to a kink and is replaced by another.
inline GradientCheck network_gradient_check(gop::GopNetwork net, const gop::Matrix& X, const gop::Matrix& Y,
                                            const gop::TrainableSelection& sel, gop::LossKind loss,
                                            std::size_t coords, std::uint64_t seed, double tol = 1e-4,
                                            const gop::PassMode& mode = {}) {
  GradientCheck c{"network"};
  const gop::Gradients g = gop::backward(net, X, Y, sel, loss, mode);
  const std::vector<double> grad = flatten(g);
  std::vector<double*> slots = parameter_slots(net, g);
  gop::Rng rng(seed);
  std::size_t attempts = 0;
  while (c.checked < coords && attempts < coords * 20 && !slots.empty()) {
    ++attempts;
    const auto k = static_cast<std::size_t>(rng.below(slots.size()));
    double* p = slots[k];
    const double orig = *p;
    auto f = [&](double t) {
      *p = t;
      const double l = gop::batch_loss(net, X, Y, sel, loss, mode);
      *p = orig;
      return l;
    };
    const double fd = oracle::central_difference(f, orig, kFdStep);
    const double fd_half = oracle::central_difference(f, orig, kFdStep / 2);
    if (oracle::relative_error(fd, fd_half, 1e-6) > tol) {
      ++c.skipped;
      continue;
    }
    c.record(grad[k], fd, tol);
  }
  return c;
}

/// Max-abs difference between a perceptron-set GOP block and the dense
/// sigmoid oracle on `samples` random inputs.
inline double perceptron_equivalence_error(std::uint64_t seed, Eigen::Index samples, Eigen::Index fan_in,
                                           Eigen::Index width) {
  gop::Rng rng(seed);
  const gop::NeuronBlock block = testutil::random_block(rng, gop::kPerceptronSet, fan_in, width, 2.0);
  const gop::Matrix X = testutil::random_matrix(rng, samples, fan_in, -3.0, 3.0);
  const gop::Matrix got = gop::block_forward(block, X);
  std::vector<double> b(static_cast<std::size_t>(width));
  for (Eigen::Index j = 0; j < width; ++j) b[static_cast<std::size_t>(j)] = block.bias[j];
  const oracle::Dense want = oracle::dense_sigmoid_layer(testutil::to_dense(X), testutil::to_dense(block.weights), b);
  return (got - testutil::from_dense(want)).cwiseAbs().maxCoeff();
}

/// Max-abs difference between solve_ridge and the Gauss-Jordan normal-equation
/// oracle on one random instance.
inline double ridge_oracle_error(gop::Rng& rng, Eigen::Index n, Eigen::Index d, Eigen::Index classes, double c) {
  const gop::Matrix H = testutil::random_matrix(rng, n, d);
  const gop::Matrix Y = testutil::random_matrix(rng, n, classes);
  const gop::Matrix got = gop::solve_ridge(H, Y, c);
  const gop::Matrix want = testutil::from_dense(oracle::ridge_normal_equations(testutil::to_dense(H),
                                                                                testutil::to_dense(Y), c));
  return (got - want).cwiseAbs().maxCoeff();
}

}  // namespace checks
