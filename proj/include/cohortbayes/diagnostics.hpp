#pragma once

#include <vector>

#include <Eigen/Dense>

namespace cohortbayes {

struct PosteriorSummary {
  double hr_mean = 0.0;
  double hr_ci_low = 0.0;
  double hr_ci_high = 0.0;
  double p_hr_le_1 = 0.0;
};

// Type-7 (linear interpolation) empirical quantile.
double quantile_type7(std::vector<double> values, double p);

// Classic potential scale reduction over whole chains (no splitting):
// sqrt(((L-1)/L W + B/L) / W).
double gelman_rubin(const std::vector<Eigen::VectorXd>& chains);

// Initial-positive-sequence autocorrelation estimate of the effective sample
// size, clipped to [1, length].
double ess(const Eigen::VectorXd& draws);

// Hazard-ratio summary of one beta component after burn-in removal.
PosteriorSummary summarize(const Eigen::VectorXd& draws, long burn_in);

}  // namespace cohortbayes
