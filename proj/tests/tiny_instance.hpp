#pragma once

// Tiny discrete case-cohort instance with brute-force marginal-posterior
// targets. Six subjects, two missing expensive covariates, four observed
// support points carrying three distinct values. Small enough that the
// averaged likelihood can be computed exactly (bootstrap model) or by plain
// Monte Carlo (conjugate model) on a grid of beta values.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "cohortbayes/imputation.hpp"
#include "cohortbayes/rng.hpp"
#include "cohortbayes/samplers.hpp"
#include "cohortbayes/survival.hpp"

namespace tiny {

// Both failures carry the middle covariate value while observed subjects at
// +1 and -1 stay at risk past them, so the completed-data likelihood decays
// in both beta directions for every imputation configuration and the flat
// prior still yields a proper marginal posterior.
inline cohortbayes::CohortData make_cohort() {
  using cohortbayes::SubjectRecord;
  auto rec = [](double t, bool ev, bool sel, double z) {
    SubjectRecord r;
    r.time = t;
    r.event = ev;
    r.selected = sel;
    if (sel) r.z = Eigen::VectorXd::Constant(1, z);
    r.w = Eigen::VectorXd(0);
    r.x = Eigen::VectorXd(0);
    return r;
  };
  return cohortbayes::build_cohort({rec(1.0, true, true, 0.0),
                                    rec(2.0, true, true, 0.0),
                                    rec(3.0, false, true, 1.0),
                                    rec(2.5, false, true, -1.0),
                                    rec(1.5, false, false, 0.0),
                                    rec(2.2, false, false, 0.0)});
}

inline Eigen::VectorXd beta_grid(int points = 41, double lo = -4.0,
                                 double hi = 4.0) {
  return Eigen::VectorXd::LinSpaced(points, lo, hi);
}

inline double completed_pl(const cohortbayes::CohortData& cohort, double beta,
                           double z4, double z5) {
  Eigen::MatrixXd z = cohort.z;
  z(4, 0) = z4;
  z(5, 0) = z5;
  cohortbayes::LogHazardRatio b{Eigen::VectorXd::Constant(1, beta),
                                Eigen::VectorXd(0)};
  return std::exp(cohortbayes::log_partial_likelihood(cohort, b, z));
}

// Exact grid target under the bootstrap model with B = 1. Integrating the
// Dirichlet(1,...,1) weights gives the exchangeable pair law
// P(draws = (s_i, s_l)) = (1 + delta_il) / (m (m+1)).
inline Eigen::VectorXd bootstrap_grid_target(
    const cohortbayes::CohortData& cohort,
    const cohortbayes::BayesianBootstrapModel& model,
    const Eigen::VectorXd& grid) {
  const int m = static_cast<int>(model.support.rows());
  Eigen::VectorXd target(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    double eh = 0.0;
    for (int i = 0; i < m; ++i) {
      for (int l = 0; l < m; ++l) {
        const double prob = (i == l ? 2.0 : 1.0) /
                            (static_cast<double>(m) * (m + 1.0));
        eh += prob * completed_pl(cohort, grid[g], model.support(i, 0),
                                  model.support(l, 0));
      }
    }
    target[g] = eh;
  }
  return target / target.sum();
}

// Monte Carlo grid target under the conjugate model with B = 1: average the
// completed-data partial likelihood over fresh predictive draws.
inline Eigen::VectorXd conjugate_grid_target(
    const cohortbayes::CohortData& cohort,
    const cohortbayes::RestrictedPosterior& post, const Eigen::VectorXd& grid,
    int draws_per_point, cohortbayes::RngStream& rng) {
  cohortbayes::ConjugatePredictive predictive(post, cohort);
  Eigen::VectorXd target = Eigen::VectorXd::Zero(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    double eh = 0.0;
    for (int d = 0; d < draws_per_point; ++d) {
      Eigen::MatrixXd zmis = predictive.draw_copy(2, rng);
      eh += completed_pl(cohort, grid[g], zmis(0, 0), zmis(1, 0));
    }
    target[g] = eh / draws_per_point;
  }
  return target / target.sum();
}

// Histogram of chain draws over bins centered at the grid points. Draws
// outside the grid range are counted separately.
struct GridHistogram {
  Eigen::VectorXd probs;
  double fraction_outside = 0.0;
};

inline GridHistogram grid_histogram(const Eigen::VectorXd& draws,
                                    const Eigen::VectorXd& grid, long burn_in) {
  const double step = grid[1] - grid[0];
  const double lo = grid[0] - 0.5 * step;
  GridHistogram h;
  h.probs = Eigen::VectorXd::Zero(grid.size());
  long outside = 0, total = 0;
  for (Eigen::Index i = burn_in; i < draws.size(); ++i) {
    ++total;
    const auto bin = static_cast<long>(std::floor((draws[i] - lo) / step));
    if (bin < 0 || bin >= grid.size()) {
      ++outside;
    } else {
      h.probs[bin] += 1.0;
    }
  }
  h.probs /= h.probs.sum();
  h.fraction_outside = static_cast<double>(outside) / static_cast<double>(total);
  return h;
}

}  // namespace tiny
