#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cohortbayes/survival.hpp"

namespace cohortbayes {

enum class WeightKind { full, prentice, ipw, post_strat };

// Weighting scheme for the comparator estimators. The subcohort mask (over
// cohort indices) is needed to reconstruct Prentice risk sets exactly; when
// it is empty, selected non-cases are taken as the subcohort and every case
// enters only at its own failure time.
struct WeightScheme {
  WeightKind kind = WeightKind::full;
  double sampling_prob = 1.0;          // design p, required for ipw
  std::vector<std::uint8_t> subcohort; // optional, length n when present
};

// Flattened analysis view: members, weights and covariates (z then w).
// Members without full risk history contribute to denominators only at their
// own failure time.
struct WeightedView {
  Eigen::MatrixXd covariates;  // m x d
  Eigen::VectorXd time;
  std::vector<std::uint8_t> event;
  Eigen::VectorXd weight;
  std::vector<std::uint8_t> full_history;
  std::vector<int> cohort_index;

  int m() const { return static_cast<int>(time.size()); }
  int d() const { return static_cast<int>(covariates.cols()); }
};

struct WeightedFit {
  Eigen::VectorXd beta_hat;
  Eigen::VectorXd robust_se;
  Eigen::MatrixXd robust_cov;
  bool converged = false;
  int iterations = 0;
  int step_halvings = 0;
};

WeightedView build_weighted_view(const CohortData& cohort,
                                 const WeightScheme& scheme);

double weighted_log_pl(const WeightedView& view, const Eigen::VectorXd& beta);

// Analytic score and Hessian of the weighted Breslow log partial likelihood.
void weighted_score_hessian(const WeightedView& view, const Eigen::VectorXd& beta,
                            Eigen::VectorXd* score, Eigen::MatrixXd* hessian);

// Sandwich covariance A^-1 B A^-1 with A the observed information and B the
// outer product of per-subject weighted score residuals.
Eigen::MatrixXd robust_covariance(const WeightedView& view,
                                  const Eigen::VectorXd& beta);

// Damped Newton ascent of the weighted log partial likelihood; halves the
// step while the objective decreases. Non-convergence is reported, not
// thrown.
WeightedFit newton_solve(const WeightedView& view, const Eigen::VectorXd& init,
                         double tol = 1e-8, int max_iter = 50);

// Max relative error of the analytic score and Hessian against central
// finite differences.
double analytic_gradient_check(const WeightedView& view,
                               const Eigen::VectorXd& beta);

}  // namespace cohortbayes
