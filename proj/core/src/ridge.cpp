#include "gop/ridge.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gop {

namespace {

void check_problem(const Matrix& H, const Matrix& Y, double c) {
  if (H.rows() == 0 || H.cols() == 0 || Y.cols() == 0)
    throw DimensionMismatch("ridge problem needs N, d, C >= 1");
  if (H.rows() != Y.rows())
    throw DimensionMismatch("ridge problem: H has " + std::to_string(H.rows()) + " rows, Y has " +
                            std::to_string(Y.rows()));
  if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("ridge coefficient must be finite and >= 0");
  if (!H.allFinite() || !Y.allFinite()) throw SingularSystem("ridge problem has non-finite entries");
}

}  // namespace

RidgeSystem::RidgeSystem(const Matrix& H, const Matrix& Y) : H_(H), Y_(Y), dual_(H.cols() >= H.rows()) {
  check_problem(H, Y, 0.0);
  if (dual_) {
    gram_ = H * H.transpose();
    rhs_ = Y;
  } else {
    gram_ = H.transpose() * H;
    rhs_ = H.transpose() * Y;
  }
}

Matrix RidgeSystem::solve(double c) const {
  if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("ridge coefficient must be finite and >= 0");
  if (c == 0.0) return solve_pinv();
  Matrix A = gram_;
  A.diagonal().array() += c;
  Eigen::LLT<Matrix> llt(A);
  Matrix x;
  if (llt.info() == Eigen::Success) {
    x = llt.solve(rhs_);
  } else {
    x = A.ldlt().solve(rhs_);
  }
  if (!x.allFinite()) throw SingularSystem("ridge solve produced non-finite weights");
  return dual_ ? Matrix(H_.transpose() * x) : x;
}

Matrix RidgeSystem::solve_pinv() const {
  Eigen::BDCSVD<Matrix> svd(H_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  const double tol = kPinvTolerance * smax;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (!(s[i] > tol))
      throw SingularSystem("rank-deficient hidden representation (singular value " +
                           std::to_string(s[i]) + " <= " + std::to_string(tol) + "); use c > 0");
  }
  Vector inv = s.cwiseInverse();
  return svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * Y_);
}

Matrix solve_ridge(const Matrix& H, const Matrix& Y, double c) {
  check_problem(H, Y, c);
  return RidgeSystem(H, Y).solve(c);
}

Matrix solve_augmented(const Matrix& H_existing, const Matrix& H_new, const Matrix& Y, double c) {
  if (H_existing.cols() == 0) return solve_ridge(H_new, Y, c);
  if (H_new.cols() == 0) return solve_ridge(H_existing, Y, c);
  if (H_existing.rows() != H_new.rows())
    throw DimensionMismatch("solve_augmented: row counts differ (" + std::to_string(H_existing.rows()) +
                            " vs " + std::to_string(H_new.rows()) + ")");
  Matrix H(H_existing.rows(), H_existing.cols() + H_new.cols());
  H << H_existing, H_new;
  return solve_ridge(H, Y, c);
}

CandidateEvaluation evaluate_candidate(const Matrix& H, const Matrix& Y, const CandidateOptions& options,
                                       const std::optional<ScoringSet>& scoring) {
  if (options.c_grid.empty()) throw ConfigError("empty ridge coefficient grid");
  check_problem(H, Y, 0.0);

  Vector bias = Vector::Zero(Y.cols());
  Matrix centred;
  if (options.fit_intercept) {
    bias = Y.colwise().mean().transpose();
    centred = Y.rowwise() - bias.transpose();
  }
  const Matrix& targets = options.fit_intercept ? centred : Y;

  const Matrix& eval_H = scoring ? scoring->H : H;
  const Matrix& eval_Y = scoring ? scoring->Y : Y;
  if (eval_H.cols() != H.cols() || eval_Y.cols() != Y.cols() || eval_H.rows() != eval_Y.rows())
    throw DimensionMismatch("scoring split shape differs from training split");

  RidgeSystem system(H, targets);
  CandidateEvaluation best;
  bool found = false;
  std::string last_error = "no coefficient succeeded";
  for (double c : options.c_grid) {
    Matrix B;
    try {
      B = system.solve(c);
    } catch (const SingularSystem& e) {
      last_error = e.what();
      continue;
    }
    Matrix pred = eval_H * B;
    pred.rowwise() += bias.transpose();
    if (!pred.allFinite()) {
      last_error = "non-finite predictions";
      continue;
    }
    const double loss = mse(pred, eval_Y);
    const double acc = accuracy(pred, eval_Y);
    const double score = options.metric == CandidateMetric::MSE ? -loss : acc;
    if (!found || score > best.score || (score == best.score && c > best.best_c)) {
      best.score = score;
      best.loss = loss;
      best.accuracy = acc;
      best.best_c = c;
      best.B = std::move(B);
      best.bias = bias;
      found = true;
    }
  }
  if (!found) throw SingularSystem("all ridge coefficients failed: " + last_error);
  return best;
}

}  // namespace gop
