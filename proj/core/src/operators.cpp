#include "gop/operators.hpp"


namespace gop {

std::vector<OperatorSet> enumerate_operator_sets() {
  std::vector<OperatorSet> sets;
  sets.reserve(kNumOperatorSets);
  for (auto n : kAllNodal)
    for (auto p : kAllPool)
      for (auto a : kAllActivation) sets.push_back({n, p, a});
  return sets;
}

double nodal_forward(NodalOp op, double w, double y) {
  return dispatch(op, [&](auto k) { return nodal_eval<decltype(k)::value>(w, y); });
}

NodalGrad nodal_grad(NodalOp op, double w, double y) {
  return dispatch(op, [&](auto k) { return nodal_derivative<decltype(k)::value>(w, y); });
}

double pool_forward(PoolOp op, std::span<const double> z) {
  if (z.empty()) throw EmptyInput("pool_forward: empty input");
  const std::size_t n = z.size();
  double acc = 0.0;
  switch (op) {
    case PoolOp::Summation:
      for (double v : z) acc += v;
      return acc;
    case PoolOp::Correlation1:
      for (std::size_t k = 0; k + 1 < n; ++k) acc += z[k] * z[k + 1];
      return acc;
    case PoolOp::Correlation2:
      for (std::size_t k = 0; k + 2 < n; ++k) acc += z[k] * z[k + 1] * z[k + 2];
      return acc;
    case PoolOp::Maximum:
      return *std::max_element(z.begin(), z.end());
  }
  return acc;
}

void pool_grad_into(PoolOp op, std::span<const double> z, std::span<double> out) {
  if (z.empty()) throw EmptyInput("pool_grad: empty input");
  if (out.size() != z.size()) throw DimensionMismatch("pool_grad: output length differs from input");
  const std::size_t n = z.size();
  switch (op) {
    case PoolOp::Summation:
      std::fill(out.begin(), out.end(), 1.0);
      return;
    case PoolOp::Correlation1:
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t k = 0; k + 1 < n; ++k) {
        out[k] += z[k + 1];
        out[k + 1] += z[k];
      }
      return;
    case PoolOp::Correlation2:
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t k = 0; k + 2 < n; ++k) {
        out[k] += z[k + 1] * z[k + 2];
        out[k + 1] += z[k] * z[k + 2];
        out[k + 2] += z[k] * z[k + 1];
      }
      return;
    case PoolOp::Maximum: {
      std::fill(out.begin(), out.end(), 0.0);
      // max_element returns the first maximal entry, which is the tie rule.
      out[static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin())] = 1.0;
      return;
    }
  }
}

std::vector<double> pool_grad(PoolOp op, std::span<const double> z) {
  std::vector<double> out(z.size());
  pool_grad_into(op, z, out);
  return out;
}

double activation_forward(ActivationOp op, double x) {
  return dispatch(op, [&](auto k) { return activation_eval<decltype(k)::value>(x); });
}

double activation_grad(ActivationOp op, double x) {
  return dispatch(op, [&](auto k) { return activation_derivative<decltype(k)::value>(x); });
}

std::uint64_t nodal_flops(NodalOp op) {
  switch (op) {
    case NodalOp::Multiplication: return 1;  // w*y
    case NodalOp::Exponential: return 6;     // w*y, exp, -1
    case NodalOp::Harmonic: return 5;        // w*y, sin
    case NodalOp::Quadratic: return 2;       // y*y, w*
    case NodalOp::Gaussian: return 7;        // y*y, w*, exp, w*
    case NodalOp::DoG: return 8;             // y*y, w*, exp, w*y, *
  }
  return 0;
}

std::uint64_t pool_flops(PoolOp op, std::size_t fan_in) {
  const std::uint64_t n = fan_in;
  switch (op) {
    case PoolOp::Summation:
    case PoolOp::Maximum:
      return n > 0 ? n - 1 : 0;
    case PoolOp::Correlation1: {
      const std::uint64_t pairs = n > 1 ? n - 1 : 0;
      return pairs + (pairs > 0 ? pairs - 1 : 0);
    }
    case PoolOp::Correlation2: {
      const std::uint64_t triples = n > 2 ? n - 2 : 0;
      return 2 * triples + (triples > 0 ? triples - 1 : 0);
    }
  }
  return 0;
}

std::uint64_t activation_flops(ActivationOp op) {
  switch (op) {
    case ActivationOp::Sigmoid:
    case ActivationOp::Tanh:
    case ActivationOp::Softplus:
      return 4;
    case ActivationOp::ReLU: return 1;
    case ActivationOp::InverseAbsolute: return 6;  // |x|, +1, division
    case ActivationOp::ELU: return 5;              // compare, exp
  }
  return 0;
}

namespace {

constexpr std::array<std::string_view, kNumNodal> kNodalTokens = {
    "multiplication", "exponential", "harmonic", "quadratic", "gaussian", "dog"};
constexpr std::array<std::string_view, kNumPool> kPoolTokens = {
    "summation", "1-correlation", "2-correlation", "maximum"};
constexpr std::array<std::string_view, kNumActivation> kActivationTokens = {
    "sigmoid", "tanh", "relu", "softplus", "inverse-absolute", "elu"};

template <class Enum, std::size_t N>
std::optional<Enum> parse_token(const std::array<std::string_view, N>& table, std::string_view token) {
  for (std::size_t i = 0; i < N; ++i)
    if (table[i] == token) return static_cast<Enum>(i);
  return std::nullopt;
}

}  // namespace

std::string_view to_token(NodalOp op) { return kNodalTokens[static_cast<std::size_t>(op)]; }
std::string_view to_token(PoolOp op) { return kPoolTokens[static_cast<std::size_t>(op)]; }
std::string_view to_token(ActivationOp op) { return kActivationTokens[static_cast<std::size_t>(op)]; }

std::optional<NodalOp> parse_nodal(std::string_view token) {
  return parse_token<NodalOp>(kNodalTokens, token);
}
std::optional<PoolOp> parse_pool(std::string_view token) {
  return parse_token<PoolOp>(kPoolTokens, token);
}
std::optional<ActivationOp> parse_activation(std::string_view token) {
  return parse_token<ActivationOp>(kActivationTokens, token);
}

std::string to_string(const OperatorSet& set) {
  std::string s{to_token(set.nodal)};
  s += '/';
  s += to_token(set.pool);
  s += '/';
  s += to_token(set.activation);
  return s;
}

}  // namespace gop
