#include "cohortbayes/survival.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cohortbayes {

namespace {

// Running log-sum-exp: holds m = max so far and s = sum exp(x - m), so
// exp() arguments never exceed zero and the sum cannot overflow.
struct RunningLogSumExp {
  double m = 0.0;
  double s = 0.0;
  bool empty = true;

  void add(double x) {
    if (empty) {
      m = x;
      s = 1.0;
      empty = false;
    } else if (x <= m) {
      s += std::exp(x - m);
    } else {
      s = s * std::exp(m - x) + 1.0;
      m = x;
    }
  }
  double value() const { return m + std::log(s); }
};

}  // namespace

CohortData build_cohort(const std::vector<SubjectRecord>& records) {
  if (records.empty()) throw std::invalid_argument("build_cohort: empty record list");

  const int n = static_cast<int>(records.size());
  const int dw = static_cast<int>(records.front().w.size());
  const int dx = static_cast<int>(records.front().x.size());
  int dz = -1;
  for (const auto& r : records) {
    if (r.selected) {
      if (!r.z) throw std::invalid_argument("build_cohort: selected subject without z");
      dz = static_cast<int>(r.z->size());
      break;
    }
  }
  if (dz < 0) dz = 0;  // nobody selected: z dimension unknowable, treat as 0

  CohortData c;
  c.time.resize(n);
  c.event.resize(n);
  c.selected.resize(n);
  c.z = Eigen::MatrixXd::Zero(n, dz);
  c.w.resize(n, dw);
  c.x.resize(n, dx);

  for (int i = 0; i < n; ++i) {
    const auto& r = records[i];
    if (!(r.time >= 0.0)) {
      std::ostringstream os;
      os << "build_cohort: negative or NaN time at record " << i;
      throw std::invalid_argument(os.str());
    }
    if (r.selected && !r.z)
      throw std::invalid_argument("build_cohort: selected subject without z");
    if (!r.selected && r.z)
      throw std::invalid_argument("build_cohort: unselected subject carries z");
    if (r.z && static_cast<int>(r.z->size()) != dz)
      throw std::invalid_argument("build_cohort: z dimension mismatch");
    if (static_cast<int>(r.w.size()) != dw || static_cast<int>(r.x.size()) != dx)
      throw std::invalid_argument("build_cohort: w/x dimension mismatch");

    c.time[i] = r.time;
    c.event[i] = r.event ? 1 : 0;
    c.selected[i] = r.selected ? 1 : 0;
    if (r.z) c.z.row(i) = r.z->transpose();
    if (dw > 0) c.w.row(i) = r.w.transpose();
    if (dx > 0) c.x.row(i) = r.x.transpose();
  }

  for (int i = 0; i < n; ++i) {
    (c.selected[i] ? c.s_set : c.s_bar).push_back(i);
    if (c.event[i]) c.event_order.push_back(i);
  }
  std::stable_sort(c.event_order.begin(), c.event_order.end(),
                   [&](int a, int b) { return c.time[a] < c.time[b]; });

  c.risk_order.resize(n);
  std::iota(c.risk_order.begin(), c.risk_order.end(), 0);
  std::stable_sort(c.risk_order.begin(), c.risk_order.end(),
                   [&](int a, int b) { return c.time[a] > c.time[b]; });
  return c;
}

Eigen::MatrixXd design_matrix(const CohortData& cohort,
                              const std::vector<int>& indices) {
  const int dv = 1 + cohort.dw() + cohort.dx();
  Eigen::MatrixXd v(indices.size(), dv);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    int i = indices[r];
    v(r, 0) = 1.0;
    if (cohort.dw() > 0) v.row(r).segment(1, cohort.dw()) = cohort.w.row(i);
    if (cohort.dx() > 0) v.row(r).tail(cohort.dx()) = cohort.x.row(i);
  }
  return v;
}

double log_partial_likelihood_eta(const CohortData& cohort,
                                  const Eigen::VectorXd& eta) {
  const int n = cohort.n();
  if (eta.size() != n)
    throw std::invalid_argument("log_partial_likelihood: eta length mismatch");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(eta[i]))
      throw std::domain_error("log_partial_likelihood: non-finite linear predictor");
  }

  // Descending-time sweep; ties join the accumulator before any of their
  // events are scored, so tied failures share one Breslow denominator.
  double logpl = 0.0;
  RunningLogSumExp acc;
  const auto& order = cohort.risk_order;
  int i = 0;
  while (i < n) {
    const double t = cohort.time[order[i]];
    int j = i;
    while (j < n && cohort.time[order[j]] == t) {
      acc.add(eta[order[j]]);
      ++j;
    }
    const double log_denom = acc.value();
    for (int k = i; k < j; ++k) {
      if (cohort.event[order[k]]) logpl += eta[order[k]] - log_denom;
    }
    i = j;
  }
  return logpl;
}

double log_partial_likelihood(const CohortData& cohort,
                              const LogHazardRatio& beta,
                              const Eigen::MatrixXd& z_full) {
  if (z_full.rows() != cohort.n() || z_full.cols() != cohort.dz())
    throw std::invalid_argument("log_partial_likelihood: z_full shape mismatch");
  if (beta.beta1.size() != cohort.dz() || beta.beta2.size() != cohort.dw())
    throw std::invalid_argument("log_partial_likelihood: beta dimension mismatch");

  Eigen::VectorXd eta = z_full * beta.beta1;
  if (cohort.dw() > 0) eta += cohort.w * beta.beta2;
  return log_partial_likelihood_eta(cohort, eta);
}

namespace {

double copy_log_pl(const CohortData& cohort, const LogHazardRatio& beta,
                   const Eigen::VectorXd& eta_base,
                   const Eigen::MatrixXd& z_mis) {
  Eigen::VectorXd eta = eta_base;
  for (std::size_t r = 0; r < cohort.s_bar.size(); ++r) {
    eta[cohort.s_bar[r]] += z_mis.row(r).dot(beta.beta1);
  }
  return log_partial_likelihood_eta(cohort, eta);
}

}  // namespace

double log_h(const CohortData& cohort, const LogHazardRatio& beta,
             const ImputationDraw& draw, int workers) {
  const int b = draw.b();
  if (b < 1) throw std::invalid_argument("log_h: draw needs at least one copy");
  for (const auto& copy : draw.copies) {
    if (copy.rows() != static_cast<Eigen::Index>(cohort.s_bar.size()) ||
        copy.cols() != cohort.dz())
      throw std::invalid_argument("log_h: copy shape mismatch");
  }

  // Linear predictor contributions shared by all copies: confounders plus
  // the observed expensive covariates.
  Eigen::VectorXd eta_base = Eigen::VectorXd::Zero(cohort.n());
  if (cohort.dw() > 0) eta_base = cohort.w * beta.beta2;
  for (int i : cohort.s_set) eta_base[i] += cohort.z.row(i).dot(beta.beta1);

  std::vector<double> logpl(b);
  if (workers > 1 && b > 1) {
    std::vector<std::future<double>> futs;
    futs.reserve(b);
    for (int k = 0; k < b; ++k) {
      futs.push_back(std::async(std::launch::async, [&, k] {
        return copy_log_pl(cohort, beta, eta_base, draw.copies[k]);
      }));
    }
    for (int k = 0; k < b; ++k) logpl[k] = futs[k].get();
  } else {
    for (int k = 0; k < b; ++k)
      logpl[k] = copy_log_pl(cohort, beta, eta_base, draw.copies[k]);
  }

  // Fixed-order reduction: log(mean exp(l_k)) = m + log(sum exp(l_k - m) / B).
  // With equal copies the ratio is exactly one, so B copies of one dataset
  // reproduce the B=1 value bit for bit.
  double m = *std::max_element(logpl.begin(), logpl.end());
  double s = 0.0;
  for (int k = 0; k < b; ++k) s += std::exp(logpl[k] - m);
  return m + std::log(s / static_cast<double>(b));
}

}  // namespace cohortbayes
