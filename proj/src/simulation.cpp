#include "cohortbayes/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "cohortbayes/diagnostics.hpp"

namespace cohortbayes {

namespace {

constexpr double kWald975 = 1.959963984540054;

void validate(const SimConfig& cfg) {
  if (cfg.n < 1 || cfg.replicates < 1)
    throw std::invalid_argument("sim config: n and replicates must be >= 1");
  if (!(cfg.eta > 0.0) || !(cfg.nu > 0.0))
    throw std::invalid_argument("sim config: eta and nu must be > 0");
  if (!(cfg.subcohort_p > 0.0 && cfg.subcohort_p <= 1.0))
    throw std::invalid_argument("sim config: subcohort_p must lie in (0,1]");
  if (!(cfg.censor_point > 0.0) ||
      !(cfg.censor_point_prob >= 0.0 && cfg.censor_point_prob <= 1.0))
    throw std::invalid_argument("sim config: invalid censoring settings");
}

GeneratedCohort assemble_views(std::vector<SubjectRecord> records,
                               std::vector<std::uint8_t> subcohort,
                               const std::vector<std::uint8_t>& selected) {
  GeneratedCohort out;
  out.subcohort = std::move(subcohort);

  std::vector<SubjectRecord> complete = records;
  for (auto& r : complete) r.selected = true;
  out.complete = build_cohort(complete);

  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].selected = selected[i] != 0;
    if (!records[i].selected) records[i].z.reset();
  }
  out.case_cohort = build_cohort(records);
  return out;
}

}  // namespace

GeneratedCohort gen_cohort_full(const SimConfig& cfg, RngStream& rng) {
  validate(cfg);
  std::vector<SubjectRecord> records(cfg.n);
  std::vector<std::uint8_t> subcohort(cfg.n), selected(cfg.n);

  for (int i = 0; i < cfg.n; ++i) {
    const double z = rng.normal();
    // Inverse transform of the Weibull survival function
    // S(t) = exp(-eta exp(beta0 z) t^nu).
    const double t = std::pow(-std::log(rng.uniform()) /
                                  (cfg.eta * std::exp(cfg.beta0 * z)),
                              1.0 / cfg.nu);
    const double c = rng.uniform() < cfg.censor_point_prob
                         ? cfg.censor_point
                         : rng.uniform(0.0, cfg.censor_point);
    SubjectRecord& r = records[i];
    r.time = std::min(t, c);
    r.event = t <= c;
    r.z = Eigen::VectorXd::Constant(1, z);
    r.w = Eigen::VectorXd(0);
    r.x = Eigen::VectorXd(0);

    subcohort[i] = rng.uniform() < cfg.subcohort_p ? 1 : 0;
    selected[i] = (r.event || subcohort[i]) ? 1 : 0;
  }
  return assemble_views(std::move(records), std::move(subcohort), selected);
}

CohortData gen_cohort(const SimConfig& cfg, RngStream& rng) {
  return gen_cohort_full(cfg, rng).case_cohort;
}

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::full: return "full";
    case EstimatorKind::prentice: return "prentice";
    case EstimatorKind::ipw: return "ipw";
    case EstimatorKind::post_strat: return "post_strat";
    case EstimatorKind::bayes: return "bayes";
  }
  throw std::logic_error("unknown estimator");
}

namespace {

struct IntervalEstimate {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct ReplicateResult {
  bool ok = false;
  std::vector<IntervalEstimate> by_estimator;
};

IntervalEstimate wald_estimate(const WeightedFit& fit) {
  if (!fit.converged) throw std::runtime_error("weighted fit did not converge");
  IntervalEstimate e;
  e.estimate = fit.beta_hat[0];
  const double half = kWald975 * fit.robust_se[0];
  e.lo = e.estimate - half;
  e.hi = e.estimate + half;
  return e;
}

ReplicateResult run_replicate(const SimConfig& cfg,
                              const std::vector<EstimatorKind>& estimators,
                              const ChainConfig& chain_cfg, int replicate) {
  RngStream rng(cfg.seed, static_cast<std::uint64_t>(replicate));
  ReplicateResult res;
  res.by_estimator.resize(estimators.size());
  try {
    GeneratedCohort gen = gen_cohort_full(cfg, rng);

    WeightScheme ps_scheme{WeightKind::post_strat, cfg.subcohort_p, gen.subcohort};
    WeightedView ps_view = build_weighted_view(gen.case_cohort, ps_scheme);
    WeightedFit ps_fit = newton_solve(ps_view, Eigen::VectorXd());

    bool need_bayes = false;
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      switch (estimators[e]) {
        case EstimatorKind::full: {
          WeightedView view =
              build_weighted_view(gen.complete, WeightScheme{WeightKind::full});
          res.by_estimator[e] = wald_estimate(newton_solve(view, Eigen::VectorXd()));
          break;
        }
        case EstimatorKind::prentice: {
          WeightScheme s{WeightKind::prentice, cfg.subcohort_p, gen.subcohort};
          WeightedView view = build_weighted_view(gen.case_cohort, s);
          res.by_estimator[e] = wald_estimate(newton_solve(view, Eigen::VectorXd()));
          break;
        }
        case EstimatorKind::ipw: {
          WeightScheme s{WeightKind::ipw, cfg.subcohort_p, gen.subcohort};
          WeightedView view = build_weighted_view(gen.case_cohort, s);
          res.by_estimator[e] = wald_estimate(newton_solve(view, Eigen::VectorXd()));
          break;
        }
        case EstimatorKind::post_strat:
          res.by_estimator[e] = wald_estimate(ps_fit);
          break;
        case EstimatorKind::bayes:
          need_bayes = true;
          break;
      }
    }

    if (need_bayes) {
      ChainConfig cc = chain_cfg;
      cc.algorithm = Algorithm::alg1;
      cc.seed = cfg.seed ^ static_cast<std::uint64_t>(replicate);
      if (cc.proposal_cov.size() == 0) {
        if (ps_fit.converged && ps_fit.robust_cov.allFinite()) {
          cc.proposal_cov = 4.0 * ps_fit.robust_cov;
        } else {
          // Fall back to the complete-data observed information.
          WeightedView full_view =
              build_weighted_view(gen.complete, WeightScheme{WeightKind::full});
          WeightedFit full_fit = newton_solve(full_view, Eigen::VectorXd());
          Eigen::MatrixXd hess(1, 1);
          weighted_score_hessian(full_view, full_fit.beta_hat, nullptr, &hess);
          cc.proposal_cov = 4.0 * (-hess).inverse();
        }
      }
      if (cc.init_beta.size() == 0 && ps_fit.converged) {
        cc.init_beta = ps_fit.beta_hat;
      }

      BootstrapPredictive model(make_bootstrap_model(gen.case_cohort));
      ChainOutput chain = run_alg1(gen.case_cohort, model, cc, rng);

      const Eigen::Index kept = cc.n_iters - cc.burn_in;
      std::vector<double> draws(kept);
      double sum = 0.0;
      for (Eigen::Index i = 0; i < kept; ++i) {
        draws[i] = chain.draws(cc.burn_in + i, 0);
        sum += draws[i];
      }
      IntervalEstimate bayes;
      bayes.estimate = sum / static_cast<double>(kept);
      bayes.lo = quantile_type7(draws, 0.025);
      bayes.hi = quantile_type7(std::move(draws), 0.975);
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        if (estimators[e] == EstimatorKind::bayes) res.by_estimator[e] = bayes;
      }
    }
    res.ok = true;
  } catch (const std::exception&) {
    res.ok = false;
  }
  return res;
}

}  // namespace

ReplicationTable run_study(const SimConfig& cfg,
                           const std::vector<EstimatorKind>& estimators,
                           const ChainConfig& chain_cfg, int workers) {
  validate(cfg);
  if (estimators.empty())
    throw std::invalid_argument("run_study: at least one estimator required");

  std::vector<ReplicateResult> results(cfg.replicates);
  if (workers <= 1) {
    for (int r = 0; r < cfg.replicates; ++r)
      results[r] = run_replicate(cfg, estimators, chain_cfg, r);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= cfg.replicates) return;
        results[r] = run_replicate(cfg, estimators, chain_cfg, r);
      }
    };
    std::vector<std::thread> pool;
    const int k = std::min(workers, cfg.replicates);
    pool.reserve(k);
    for (int t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ReplicationTable table;
  table.config = cfg;
  table.replicates_requested = cfg.replicates;

  std::vector<int> used;
  for (int r = 0; r < cfg.replicates; ++r) {
    if (results[r].ok) used.push_back(r);
  }
  table.replicates_failed = cfg.replicates - static_cast<int>(used.size());
  if (used.empty()) throw std::runtime_error("run_study: every replicate failed");

  const double nr = static_cast<double>(used.size());
  double rmse2_full = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t e = 0; e < estimators.size(); ++e) {
    double sum = 0.0, sum_sq_err = 0.0;
    int covered = 0;
    for (int r : used) {
      const IntervalEstimate& ie = results[r].by_estimator[e];
      sum += ie.estimate;
      const double err = ie.estimate - cfg.beta0;
      sum_sq_err += err * err;
      if (ie.lo <= cfg.beta0 && cfg.beta0 <= ie.hi) ++covered;
    }
    const double mean = sum / nr;
    double ss = 0.0;
    for (int r : used) {
      const double dev = results[r].by_estimator[e].estimate - mean;
      ss += dev * dev;
    }
    EstimatorSummary row;
    row.estimator = estimator_name(estimators[e]);
    row.bias = mean - cfg.beta0;
    row.esd = used.size() > 1 ? std::sqrt(ss / (nr - 1.0)) : 0.0;
    row.rmse = std::sqrt(sum_sq_err / nr);
    row.coverage = static_cast<double>(covered) / nr;
    row.replicates = static_cast<int>(used.size());
    if (estimators[e] == EstimatorKind::full) rmse2_full = row.rmse * row.rmse;
    table.rows.push_back(std::move(row));
  }
  for (auto& row : table.rows) {
    row.re = rmse2_full / (row.rmse * row.rmse);
  }
  return table;
}

GeneratedCohort gen_app_analogue(const AppAnalogueConfig& cfg, RngStream& rng) {
  if (cfg.n < 1) throw std::invalid_argument("app analogue: n must be >= 1");
  if (!(cfg.subcohort_p > 0.0 && cfg.subcohort_p <= 1.0))
    throw std::invalid_argument("app analogue: subcohort_p must lie in (0,1]");

  constexpr int dz = 9, dw = 7, dx = 5;
  const int dv = 1 + dw + dx;

  // Fixed true parameters: regression coefficients and an AR(1)-correlated
  // residual covariance with heterogeneous scales.
  Eigen::MatrixXd xi(dv, dz);
  for (int j = 0; j < dv; ++j)
    for (int k = 0; k < dz; ++k)
      xi(j, k) = j == 0 ? 0.3 * std::sin(1.0 + k)
                        : 0.08 * std::cos(0.7 * j + 1.3 * k);
  Eigen::VectorXd sigma_sd(dz);
  for (int k = 0; k < dz; ++k) sigma_sd[k] = 0.25 + 0.05 * k;
  Eigen::MatrixXd sigma(dz, dz);
  for (int a = 0; a < dz; ++a)
    for (int b = 0; b < dz; ++b)
      sigma(a, b) = sigma_sd[a] * sigma_sd[b] * std::pow(0.3, std::abs(a - b));
  Eigen::MatrixXd l_sigma = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();

  Eigen::VectorXd beta1(dz), beta2(dw);
  for (int k = 0; k < dz; ++k) beta1[k] = 0.25 * std::sin(2.0 + 1.1 * k);
  for (int j = 0; j < dw; ++j) beta2[j] = 0.12 * std::cos(1.0 + 0.9 * j);

  std::vector<SubjectRecord> records(cfg.n);
  std::vector<std::uint8_t> subcohort(cfg.n), selected(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    SubjectRecord& r = records[i];
    r.w.resize(dw);
    r.w[0] = rng.normal();
    r.w[1] = rng.normal();
    r.w[2] = rng.normal();
    r.w[3] = rng.uniform() < 0.5 ? 1.0 : 0.0;  // sex
    const double cat = rng.uniform();
    r.w[4] = cat < 0.25 ? 1.0 : 0.0;  // activity dummies, last level reference
    r.w[5] = cat >= 0.25 && cat < 0.5 ? 1.0 : 0.0;
    r.w[6] = cat >= 0.5 && cat < 0.75 ? 1.0 : 0.0;

    r.x.resize(dx);
    for (int j = 0; j < dx; ++j) r.x[j] = std::log1p(20.0 * rng.gamma(2.0));

    Eigen::VectorXd v(dv);
    v[0] = 1.0;
    v.segment(1, dw) = r.w;
    v.tail(dx) = r.x;
    Eigen::VectorXd z = xi.transpose() * v + l_sigma * rng.normal_vector(dz);
    r.z = z;

    const double lp = beta1.dot(z) + beta2.dot(r.w);
    const double t = std::pow(-std::log(rng.uniform()) / (cfg.eta * std::exp(lp)),
                              1.0 / cfg.nu);
    const double c = rng.uniform(cfg.admin_censor_lo, cfg.admin_censor_hi);
    r.time = std::min(t, c);
    r.event = t <= c;

    subcohort[i] = rng.uniform() < cfg.subcohort_p ? 1 : 0;
    selected[i] = (r.event || subcohort[i]) ? 1 : 0;
  }
  return assemble_views(std::move(records), std::move(subcohort), selected);
}

}  // namespace cohortbayes
