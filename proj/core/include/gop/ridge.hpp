#pragma once

// Closed-form least-squares / ridge solutions for the linear output map.

#include <optional>
#include <vector>

#include "gop/network.hpp"

namespace gop {

/// Relative singular-value cutoff used by c = 0 solves.
inline constexpr double kPinvTolerance = 1e-10;

/// B = (H^T H + cI)^-1 H^T Y when d < N, B = H^T (H H^T + cI)^-1 Y when d >= N.
/// With c = 0 the solve goes through an SVD and throws SingularSystem if any
/// singular value falls below kPinvTolerance * sigma_max.
Matrix solve_ridge(const Matrix& H, const Matrix& Y, double c);

/// solve_ridge on the column concatenation [H_existing, H_new]. Either block
/// may have zero columns.
Matrix solve_augmented(const Matrix& H_existing, const Matrix& H_new, const Matrix& Y, double c);

/// Factors the Gram matrix of H once so several ridge coefficients can be
/// solved cheaply.
class RidgeSystem {
 public:
  RidgeSystem(const Matrix& H, const Matrix& Y);
  Matrix solve(double c) const;

 private:
  Matrix solve_pinv() const;

  const Matrix& H_;
  const Matrix& Y_;
  bool dual_;
  Matrix gram_;  // H^T H (primal) or H H^T (dual)
  Matrix rhs_;   // H^T Y (primal) or Y (dual)
};

enum class CandidateMetric { MSE, Accuracy };

struct CandidateOptions {
  std::vector<double> c_grid{0.1, 1.0, 10.0};
  CandidateMetric metric = CandidateMetric::MSE;
  /// Solve on targets centred by their training mean and use that mean as the
  /// output bias (an unpenalized intercept for standardized features).
  bool fit_intercept = true;
};

/// Hidden representation and targets of the split used for scoring.
struct ScoringSet {
  const Matrix& H;
  const Matrix& Y;
};

struct CandidateEvaluation {
  /// Higher is better: -MSE for the MSE metric, accuracy otherwise.
  double score = 0.0;
  double loss = 0.0;      // MSE on the scoring split
  double accuracy = 0.0;  // on the scoring split
  double best_c = 0.0;
  Matrix B;
  Vector bias;
};

/// Solves for every c in the grid on (H, Y) and scores each solution on
/// `scoring` (or on the training data when absent). Ties go to the larger c.
/// Throws SingularSystem only if every grid value fails.
CandidateEvaluation evaluate_candidate(const Matrix& H, const Matrix& Y, const CandidateOptions& options,
                                       const std::optional<ScoringSet>& scoring = std::nullopt);

}  // namespace gop
