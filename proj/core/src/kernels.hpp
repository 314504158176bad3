#pragma once

// Inner loops shared by inference (network.cpp) and backpropagation
// (trainer.cpp). Inputs are passed transposed (fan_in x N, column-major) so
// that each sample is contiguous.

#include <span>

#include "gop/network.hpp"

namespace gop::detail {

using Array = Eigen::ArrayXXd;

inline bool is_linear(const OperatorSet& op) noexcept {
  return op.nodal == NodalOp::Multiplication && op.pool == PoolOp::Summation;
}

/// Z(k, n) = nodal(w_k, Y(k, n)) for one neuron; Y2 = Y^2 (only read by the
/// operators that need it).
template <NodalOp Op>
inline void nodal_array(const Eigen::ArrayXd& w, const Array& Y, const Array& Y2, Array& Z) {
  if constexpr (Op == NodalOp::Multiplication) {
    Z = Y.colwise() * w;
  } else if constexpr (Op == NodalOp::Exponential) {
    Z = (Y.colwise() * w).max(-kExponentialClamp).min(kExponentialClamp).exp() - 1.0;
  } else if constexpr (Op == NodalOp::Harmonic) {
    Z = (Y.colwise() * w).sin();
  } else if constexpr (Op == NodalOp::Quadratic) {
    Z = Y2.colwise() * w;
  } else if constexpr (Op == NodalOp::Gaussian) {
    Z = (-(Y2.colwise() * w)).exp().colwise() * w;
  } else {
    Z = (Y.colwise() * w) * (-(Y2.colwise() * w)).exp();
  }
}

/// Partial derivatives of Z with respect to the weight (DW) and input (DY).
template <NodalOp Op>
inline void nodal_grad_array(const Eigen::ArrayXd& w, const Array& Y, const Array& Y2, Array& DW, Array& DY) {
  if constexpr (Op == NodalOp::Multiplication) {
    DW = Y;
    DY = w.replicate(1, Y.cols());
  } else if constexpr (Op == NodalOp::Exponential) {
    const Array A = Y.colwise() * w;
    // Outside the clamp the forward value is constant.
    const Array E = (A.abs() <= kExponentialClamp).select(A.exp(), 0.0);
    DW = Y * E;
    DY = E.colwise() * w;
  } else if constexpr (Op == NodalOp::Harmonic) {
    const Array C = (Y.colwise() * w).cos();
    DW = Y * C;
    DY = C.colwise() * w;
  } else if constexpr (Op == NodalOp::Quadratic) {
    DW = Y2;
    DY = 2.0 * (Y.colwise() * w);
  } else if constexpr (Op == NodalOp::Gaussian) {
    const Array A = Y2.colwise() * w;
    const Array E = (-A).exp();
    DW = E * (1.0 - A);
    DY = -2.0 * ((Y * E).colwise() * (w * w));
  } else {
    const Array A = Y2.colwise() * w;
    const Array E = (-A).exp();
    DW = Y * E * (1.0 - A);
    DY = (E * (1.0 - 2.0 * A)).colwise() * w;
  }
}

constexpr bool needs_squares(NodalOp op) noexcept {
  return op == NodalOp::Quadratic || op == NodalOp::Gaussian || op == NodalOp::DoG;
}

/// Column-wise pool of Z (fan_in x N) into a row of N values.
inline Eigen::RowVectorXd pool_columns(PoolOp op, const Array& Z) {
  const auto n = Z.rows();
  switch (op) {
    case PoolOp::Summation:
      return Z.colwise().sum().matrix();
    case PoolOp::Correlation1:
      if (n < 2) return Eigen::RowVectorXd::Zero(Z.cols());
      return (Z.topRows(n - 1) * Z.bottomRows(n - 1)).colwise().sum().matrix();
    case PoolOp::Correlation2:
      if (n < 3) return Eigen::RowVectorXd::Zero(Z.cols());
      return (Z.topRows(n - 2) * Z.middleRows(1, n - 2) * Z.bottomRows(n - 2)).colwise().sum().matrix();
    case PoolOp::Maximum:
      break;
  }
  return Z.colwise().maxCoeff().matrix();
}

/// pre(n, i) = pool_k nodal(w_ki, y_nk) + b_i and out = activation(pre).
inline void block_forward_kernel(const NeuronBlock& block, const Matrix& inputs_t, Matrix& pre,
                                 Matrix& out) {
  const auto width = static_cast<Eigen::Index>(block.width());
  const auto samples = inputs_t.cols();
  pre.resize(samples, width);
  out.resize(samples, width);

  if (is_linear(block.op_set)) {
    pre.noalias() = inputs_t.transpose() * block.weights;
    pre.rowwise() += block.bias.transpose();
  } else {
    const Array Y = inputs_t.array();
    Array Y2;
    if (needs_squares(block.op_set.nodal)) Y2 = Y.square();
    Array Z;
    dispatch(block.op_set.nodal, [&](auto nodal_kind) {
      constexpr NodalOp kNodal = decltype(nodal_kind)::value;
      for (Eigen::Index i = 0; i < width; ++i) {
        nodal_array<kNodal>(block.weights.col(i).array(), Y, Y2, Z);
        pre.col(i) = pool_columns(block.op_set.pool, Z).transpose().array() + block.bias[i];
      }
    });
  }

  dispatch(block.op_set.activation, [&](auto act_kind) {
    constexpr ActivationOp kAct = decltype(act_kind)::value;
    const double* p = pre.data();
    double* o = out.data();
    for (Eigen::Index j = 0; j < pre.size(); ++j) o[j] = activation_eval<kAct>(p[j]);
  });
}

/// Given d loss / d out (N x width), accumulates d loss / d weights and
/// d loss / d bias into `d_weights` / `d_bias`, and, when `d_inputs_t` is non-null,
/// d loss / d inputs (transposed, fan_in x N) into it.
inline void block_backward_kernel(const NeuronBlock& block, const Matrix& inputs_t, const Matrix& pre,
                                  const Matrix& d_out, Matrix& d_weights, Vector& d_bias,
                                  Matrix* d_inputs_t) {
  const auto fan_in = inputs_t.rows();
  const auto width = static_cast<Eigen::Index>(block.width());
  const auto samples = inputs_t.cols();
  const PoolOp pool = block.op_set.pool;

  Matrix d_pre(samples, width);
  dispatch(block.op_set.activation, [&](auto act_kind) {
    constexpr ActivationOp kAct = decltype(act_kind)::value;
    for (Eigen::Index j = 0; j < pre.size(); ++j)
      d_pre.data()[j] = d_out.data()[j] * activation_derivative<kAct>(pre.data()[j]);
  });
  d_bias += d_pre.colwise().sum().transpose();

  if (is_linear(block.op_set)) {
    d_weights.noalias() += inputs_t * d_pre;
    if (d_inputs_t) d_inputs_t->noalias() += block.weights * d_pre.transpose();
    return;
  }

  const Array Y = inputs_t.array();
  Array Y2;
  if (needs_squares(block.op_set.nodal)) Y2 = Y.square();
  Array Z, G(fan_in, samples), DW, DY, Dz;
  dispatch(block.op_set.nodal, [&](auto nodal_kind) {
    constexpr NodalOp kNodal = decltype(nodal_kind)::value;
    for (Eigen::Index i = 0; i < width; ++i) {
      if (d_pre.col(i).isZero(0.0)) continue;
      const Eigen::ArrayXd w = block.weights.col(i).array();
      const auto dp = d_pre.col(i).transpose().array();
      if (pool == PoolOp::Summation) {
        Dz = dp.replicate(fan_in, 1);
      } else {
        nodal_array<kNodal>(w, Y, Y2, Z);
        for (Eigen::Index n = 0; n < samples; ++n)
          pool_grad_into(pool, std::span<const double>(&Z(0, n), static_cast<std::size_t>(fan_in)),
                         std::span<double>(&G(0, n), static_cast<std::size_t>(fan_in)));
        Dz = G.rowwise() * dp;
      }
      nodal_grad_array<kNodal>(w, Y, Y2, DW, DY);
      d_weights.col(i) += (Dz * DW).rowwise().sum().matrix();
      if (d_inputs_t) d_inputs_t->array() += Dz * DY;
    }
  });
}

}  // namespace gop::detail
