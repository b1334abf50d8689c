#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace cohortbayes {

// One individual's observed data: follow-up time, event status, whether the
// expensive covariates were measured, and the covariate blocks. z is present
// exactly when the subject was selected.
struct SubjectRecord {
  double time = 0.0;
  bool event = false;
  bool selected = false;
  std::optional<Eigen::VectorXd> z;  // expensive covariates, length d_z
  Eigen::VectorXd w;                 // confounders, length d_w
  Eigen::VectorXd x;                 // auxiliary covariates, length d_x
};

// Immutable column-oriented cohort. Orderings are stable with respect to
// input order so tied times accumulate deterministically.
struct CohortData {
  Eigen::VectorXd time;
  std::vector<std::uint8_t> event;
  std::vector<std::uint8_t> selected;
  Eigen::MatrixXd z;  // n x d_z; rows meaningful only for selected subjects
  Eigen::MatrixXd w;  // n x d_w
  Eigen::MatrixXd x;  // n x d_x

  std::vector<int> event_order;  // event indices by ascending time
  std::vector<int> risk_order;   // all indices by descending time
  std::vector<int> s_set;        // selected subject indices
  std::vector<int> s_bar;        // unselected subject indices

  int n() const { return static_cast<int>(time.size()); }
  int dz() const { return static_cast<int>(z.cols()); }
  int dw() const { return static_cast<int>(w.cols()); }
  int dx() const { return static_cast<int>(x.cols()); }
  int n_events() const { return static_cast<int>(event_order.size()); }
};

struct LogHazardRatio {
  Eigen::VectorXd beta1;  // expensive-covariate coefficients, length d_z
  Eigen::VectorXd beta2;  // confounder coefficients, length d_w

  Eigen::VectorXd stacked() const {
    Eigen::VectorXd out(beta1.size() + beta2.size());
    out << beta1, beta2;
    return out;
  }
  static LogHazardRatio from_stacked(const Eigen::VectorXd& v, int dz) {
    LogHazardRatio b;
    b.beta1 = v.head(dz);
    b.beta2 = v.tail(v.size() - dz);
    return b;
  }
};

// B completed copies of the missing expensive-covariate block, each
// |s_bar| x d_z, rows in s_bar order.
struct ImputationDraw {
  std::vector<Eigen::MatrixXd> copies;

  int b() const { return static_cast<int>(copies.size()); }
};

CohortData build_cohort(const std::vector<SubjectRecord>& records);

// Design rows (1, w', x') for the given subjects, one row per index.
Eigen::MatrixXd design_matrix(const CohortData& cohort,
                              const std::vector<int>& indices);

// Breslow-form log partial likelihood with z supplied for every subject.
// Risk-set denominators come from one descending-time sweep with a running
// (max-shifted) log-sum-exp accumulator.
double log_partial_likelihood(const CohortData& cohort,
                              const LogHazardRatio& beta,
                              const Eigen::MatrixXd& z_full);

// Same likelihood evaluated from a precomputed linear predictor.
double log_partial_likelihood_eta(const CohortData& cohort,
                                  const Eigen::VectorXd& eta);

// log of the averaged likelihood estimator: log(B^-1 sum_b exp(l_b)) where
// l_b is the log partial likelihood of the b-th completed dataset. Copies are
// reduced in fixed order; `workers` > 1 evaluates copies in parallel without
// changing the reduction order.
double log_h(const CohortData& cohort, const LogHazardRatio& beta,
             const ImputationDraw& draw, int workers = 1);

}  // namespace cohortbayes
