#pragma once

// The fixed GOP operator library: 6 nodal, 4 pooling and 6 activation
// operators, their forward values and analytic derivatives.
//
// A neuron with weights w_k and inputs y_k computes
//   z_k = nodal(y_k, w_k),  x = pool(z_1..z_n) + b,  out = activation(x).
//
// Enumeration order of every operator kind is part of the model format and
// must not change.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "gop/errors.hpp"

namespace gop {

enum class NodalOp : std::uint8_t { Multiplication, Exponential, Harmonic, Quadratic, Gaussian, DoG };
enum class PoolOp : std::uint8_t { Summation, Correlation1, Correlation2, Maximum };
enum class ActivationOp : std::uint8_t { Sigmoid, Tanh, ReLU, Softplus, InverseAbsolute, ELU };

inline constexpr std::size_t kNumNodal = 6;
inline constexpr std::size_t kNumPool = 4;
inline constexpr std::size_t kNumActivation = 6;
inline constexpr std::size_t kNumOperatorSets = kNumNodal * kNumPool * kNumActivation;

inline constexpr std::array<NodalOp, kNumNodal> kAllNodal = {
    NodalOp::Multiplication, NodalOp::Exponential, NodalOp::Harmonic,
    NodalOp::Quadratic,      NodalOp::Gaussian,    NodalOp::DoG};
inline constexpr std::array<PoolOp, kNumPool> kAllPool = {
    PoolOp::Summation, PoolOp::Correlation1, PoolOp::Correlation2, PoolOp::Maximum};
inline constexpr std::array<ActivationOp, kNumActivation> kAllActivation = {
    ActivationOp::Sigmoid,  ActivationOp::Tanh,            ActivationOp::ReLU,
    ActivationOp::Softplus, ActivationOp::InverseAbsolute, ActivationOp::ELU};

/// Bound applied to the argument of the Exponential nodal operator.
inline constexpr double kExponentialClamp = 50.0;

struct OperatorSet {
  NodalOp nodal = NodalOp::Multiplication;
  PoolOp pool = PoolOp::Summation;
  ActivationOp activation = ActivationOp::Sigmoid;

  /// Position in the lexicographic (nodal, pool, activation) enumeration.
  constexpr std::size_t index() const noexcept {
    return static_cast<std::size_t>(nodal) * (kNumPool * kNumActivation) +
           static_cast<std::size_t>(pool) * kNumActivation + static_cast<std::size_t>(activation);
  }

  static constexpr OperatorSet from_index(std::size_t index) {
    if (index >= kNumOperatorSets) throw ConfigError("operator set index out of range");
    return OperatorSet{static_cast<NodalOp>(index / (kNumPool * kNumActivation)),
                       static_cast<PoolOp>((index / kNumActivation) % kNumPool),
                       static_cast<ActivationOp>(index % kNumActivation)};
  }

  friend constexpr bool operator==(const OperatorSet&, const OperatorSet&) = default;
};

/// The classical McCulloch-Pitts perceptron expressed as an operator set.
inline constexpr OperatorSet kPerceptronSet{NodalOp::Multiplication, PoolOp::Summation,
                                            ActivationOp::Sigmoid};

/// All 144 operator sets in lexicographic order.
std::vector<OperatorSet> enumerate_operator_sets();

// ---------------------------------------------------------------------------
// Scalar forward / derivative kernels. Templated versions are used inside hot
// loops where the operator kind is fixed per neuron.

struct NodalGrad {
  double dz_dw;
  double dz_dy;
};

template <NodalOp Op>
inline double nodal_eval(double w, double y) noexcept {
  if constexpr (Op == NodalOp::Multiplication) {
    return w * y;
  } else if constexpr (Op == NodalOp::Exponential) {
    return std::exp(std::clamp(w * y, -kExponentialClamp, kExponentialClamp)) - 1.0;
  } else if constexpr (Op == NodalOp::Harmonic) {
    return std::sin(w * y);
  } else if constexpr (Op == NodalOp::Quadratic) {
    return w * y * y;
  } else if constexpr (Op == NodalOp::Gaussian) {
    return w * std::exp(-w * y * y);
  } else {
    return w * y * std::exp(-w * y * y);
  }
}

template <NodalOp Op>
inline NodalGrad nodal_derivative(double w, double y) noexcept {
  if constexpr (Op == NodalOp::Multiplication) {
    return {y, w};
  } else if constexpr (Op == NodalOp::Exponential) {
    const double a = w * y;
    // Outside the clamp the forward value is constant.
    if (a < -kExponentialClamp || a > kExponentialClamp) return {0.0, 0.0};
    const double e = std::exp(a);
    return {y * e, w * e};
  } else if constexpr (Op == NodalOp::Harmonic) {
    const double c = std::cos(w * y);
    return {y * c, w * c};
  } else if constexpr (Op == NodalOp::Quadratic) {
    return {y * y, 2.0 * w * y};
  } else if constexpr (Op == NodalOp::Gaussian) {
    const double y2 = y * y;
    const double e = std::exp(-w * y2);
    return {e * (1.0 - w * y2), -2.0 * w * w * y * e};
  } else {
    const double y2 = y * y;
    const double e = std::exp(-w * y2);
    return {y * e * (1.0 - w * y2), w * e * (1.0 - 2.0 * w * y2)};
  }
}

template <ActivationOp Op>
inline double activation_eval(double x) noexcept {
  if constexpr (Op == ActivationOp::Sigmoid) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  } else if constexpr (Op == ActivationOp::Tanh) {
    return std::tanh(x);
  } else if constexpr (Op == ActivationOp::ReLU) {
    return x > 0.0 ? x : 0.0;
  } else if constexpr (Op == ActivationOp::Softplus) {
    // log(1 + exp(-x)), evaluated without overflow.
    return std::max(-x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  } else if constexpr (Op == ActivationOp::InverseAbsolute) {
    return x / (1.0 + std::abs(x));
  } else {
    return x >= 0.0 ? x : std::exp(x);
  }
}

template <ActivationOp Op>
inline double activation_derivative(double x) noexcept {
  if constexpr (Op == ActivationOp::Sigmoid) {
    const double s = activation_eval<ActivationOp::Sigmoid>(x);
    return s * (1.0 - s);
  } else if constexpr (Op == ActivationOp::Tanh) {
    const double t = std::tanh(x);
    return 1.0 - t * t;
  } else if constexpr (Op == ActivationOp::ReLU) {
    return x > 0.0 ? 1.0 : 0.0;
  } else if constexpr (Op == ActivationOp::Softplus) {
    return -activation_eval<ActivationOp::Sigmoid>(-x);
  } else if constexpr (Op == ActivationOp::InverseAbsolute) {
    const double d = 1.0 + std::abs(x);
    return 1.0 / (d * d);
  } else {
    return x >= 0.0 ? 1.0 : std::exp(x);
  }
}

/// Calls `f(std::integral_constant<NodalOp, op>{})` with the runtime kind
/// lifted to a compile-time constant.
template <class F>
decltype(auto) dispatch(NodalOp op, F&& f) {
  switch (op) {
    case NodalOp::Multiplication: return f(std::integral_constant<NodalOp, NodalOp::Multiplication>{});
    case NodalOp::Exponential: return f(std::integral_constant<NodalOp, NodalOp::Exponential>{});
    case NodalOp::Harmonic: return f(std::integral_constant<NodalOp, NodalOp::Harmonic>{});
    case NodalOp::Quadratic: return f(std::integral_constant<NodalOp, NodalOp::Quadratic>{});
    case NodalOp::Gaussian: return f(std::integral_constant<NodalOp, NodalOp::Gaussian>{});
    case NodalOp::DoG: break;
  }
  return f(std::integral_constant<NodalOp, NodalOp::DoG>{});
}

template <class F>
decltype(auto) dispatch(ActivationOp op, F&& f) {
  switch (op) {
    case ActivationOp::Sigmoid: return f(std::integral_constant<ActivationOp, ActivationOp::Sigmoid>{});
    case ActivationOp::Tanh: return f(std::integral_constant<ActivationOp, ActivationOp::Tanh>{});
    case ActivationOp::ReLU: return f(std::integral_constant<ActivationOp, ActivationOp::ReLU>{});
    case ActivationOp::Softplus: return f(std::integral_constant<ActivationOp, ActivationOp::Softplus>{});
    case ActivationOp::InverseAbsolute:
      return f(std::integral_constant<ActivationOp, ActivationOp::InverseAbsolute>{});
    case ActivationOp::ELU: break;
  }
  return f(std::integral_constant<ActivationOp, ActivationOp::ELU>{});
}

// ---------------------------------------------------------------------------
// Runtime-dispatched scalar API.

double nodal_forward(NodalOp op, double w, double y);
NodalGrad nodal_grad(NodalOp op, double w, double y);

/// Throws EmptyInput when `z` is empty. Correlation sums over an empty index
/// range are 0.
double pool_forward(PoolOp op, std::span<const double> z);
std::vector<double> pool_grad(PoolOp op, std::span<const double> z);
/// Non-allocating variant: writes d pool / d z_k into `out` (same length as z).
void pool_grad_into(PoolOp op, std::span<const double> z, std::span<double> out);

double activation_forward(ActivationOp op, double x);
double activation_grad(ActivationOp op, double x);

// ---------------------------------------------------------------------------
// Per-sample inference cost, using add/mul/compare = 1 and
// exp/log/sin/tanh/division = 4. Sigmoid, tanh and softplus are each counted
// as one special-function evaluation.

std::uint64_t nodal_flops(NodalOp op);
std::uint64_t pool_flops(PoolOp op, std::size_t fan_in);
std::uint64_t activation_flops(ActivationOp op);

// ---------------------------------------------------------------------------
// Serialization tokens ("multiplication", "1-correlation", "inverse-absolute", ...).

std::string_view to_token(NodalOp op);
std::string_view to_token(PoolOp op);
std::string_view to_token(ActivationOp op);

std::optional<NodalOp> parse_nodal(std::string_view token);
std::optional<PoolOp> parse_pool(std::string_view token);
std::optional<ActivationOp> parse_activation(std::string_view token);

/// "multiplication/summation/sigmoid".
std::string to_string(const OperatorSet& set);

}  // namespace gop
