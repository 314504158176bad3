#pragma once

// Reference implementations that share no code with the library. Tests
// compare the library against these.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

/// Row-major dense matrix on plain vectors.
struct Dense {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Dense() = default;
  Dense(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

inline Dense transpose(const Dense& a) {
  Dense t(a.cols, a.rows);
  for (std::size_t r = 0; r < a.rows; ++r)
    for (std::size_t c = 0; c < a.cols; ++c) t(c, r) = a(r, c);
  return t;
}

inline Dense matmul(const Dense& a, const Dense& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul shape");
  Dense out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

/// Solves A X = B by Gauss-Jordan elimination with partial pivoting.
inline Dense gauss_jordan_solve(Dense a, Dense b) {
  const std::size_t n = a.rows;
  if (a.cols != n || b.rows != n) throw std::invalid_argument("solve shape");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    if (a(pivot, col) == 0.0) throw std::runtime_error("singular");
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(pivot, c));
      for (std::size_t c = 0; c < b.cols; ++c) std::swap(b(col, c), b(pivot, c));
    }
    const double d = a(col, col);
    for (std::size_t c = 0; c < n; ++c) a(col, c) /= d;
    for (std::size_t c = 0; c < b.cols; ++c) b(col, c) /= d;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) a(r, c) -= f * a(col, c);
      for (std::size_t c = 0; c < b.cols; ++c) b(r, c) -= f * b(col, c);
    }
  }
  return b;
}

/// Ridge solution through the normal equations (H^T H + cI) B = H^T Y,
/// regardless of the shape of H.
inline Dense ridge_normal_equations(const Dense& h, const Dense& y, double c) {
  const Dense ht = transpose(h);
  Dense g = matmul(ht, h);
  for (std::size_t i = 0; i < g.rows; ++i) g(i, i) += c;
  return gauss_jordan_solve(g, matmul(ht, y));
}

/// Central difference (f(x + h) - f(x - h)) / 2h.
inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// One dense sigmoid layer, out[n][j] = 1 / (1 + exp(-(sum_k x[n][k] w[k][j] + b[j]))).
inline Dense dense_sigmoid_layer(const Dense& x, const Dense& w, const std::vector<double>& b) {
  Dense out(x.rows, w.cols);
  for (std::size_t n = 0; n < x.rows; ++n)
    for (std::size_t j = 0; j < w.cols; ++j) {
      double acc = b[j];
      for (std::size_t k = 0; k < x.cols; ++k) acc += x(n, k) * w(k, j);
      out(n, j) = 1.0 / (1.0 + std::exp(-acc));
    }
  return out;
}

}  // namespace oracle
