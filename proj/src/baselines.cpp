#include "cohortbayes/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cohortbayes {

namespace {

struct SweepBuffers {
  std::vector<int> order_desc;   // members by descending time
  std::vector<int> order_asc;    // members by ascending time
};

SweepBuffers make_orders(const WeightedView& view) {
  SweepBuffers b;
  b.order_desc.resize(view.m());
  std::iota(b.order_desc.begin(), b.order_desc.end(), 0);
  std::stable_sort(b.order_desc.begin(), b.order_desc.end(),
                   [&](int a, int c) { return view.time[a] > view.time[c]; });
  b.order_asc.assign(b.order_desc.rbegin(), b.order_desc.rend());
  return b;
}

}  // namespace

WeightedView build_weighted_view(const CohortData& cohort,
                                 const WeightScheme& scheme) {
  if (cohort.s_set.empty())
    throw std::invalid_argument("build_weighted_view: no selected subjects");
  if (!scheme.subcohort.empty() &&
      scheme.subcohort.size() != static_cast<std::size_t>(cohort.n()))
    throw std::invalid_argument("build_weighted_view: subcohort mask length mismatch");

  std::vector<int> members;
  if (scheme.kind == WeightKind::full) {
    if (cohort.s_set.size() != static_cast<std::size_t>(cohort.n()))
      throw std::invalid_argument(
          "build_weighted_view: full scheme needs complete covariate data");
    members.resize(cohort.n());
    std::iota(members.begin(), members.end(), 0);
  } else {
    members = cohort.s_set;
  }

  double control_weight = 1.0;
  if (scheme.kind == WeightKind::ipw) {
    if (!(scheme.sampling_prob > 0.0 && scheme.sampling_prob <= 1.0))
      throw std::invalid_argument("build_weighted_view: ipw needs sampling_prob in (0,1]");
    control_weight = 1.0 / scheme.sampling_prob;
  } else if (scheme.kind == WeightKind::post_strat) {
    int cohort_noncases = 0, sampled_noncases = 0;
    for (int i = 0; i < cohort.n(); ++i) {
      if (!cohort.event[i]) {
        ++cohort_noncases;
        if (cohort.selected[i]) ++sampled_noncases;
      }
    }
    if (sampled_noncases == 0)
      throw std::runtime_error(
          "build_weighted_view: post-stratified weights undefined with no sampled non-cases");
    control_weight = static_cast<double>(cohort_noncases) /
                     static_cast<double>(sampled_noncases);
  }

  const int m = static_cast<int>(members.size());
  const int d = cohort.dz() + cohort.dw();
  WeightedView view;
  view.covariates.resize(m, d);
  view.time.resize(m);
  view.event.resize(m);
  view.weight.resize(m);
  view.full_history.resize(m);
  view.cohort_index = members;

  for (int r = 0; r < m; ++r) {
    const int i = members[r];
    view.time[r] = cohort.time[i];
    view.event[r] = cohort.event[i];
    if (cohort.dz() > 0) view.covariates.row(r).head(cohort.dz()) = cohort.z.row(i);
    if (cohort.dw() > 0) view.covariates.row(r).tail(cohort.dw()) = cohort.w.row(i);

    bool weighted_control = !cohort.event[i] &&
                            (scheme.kind == WeightKind::ipw ||
                             scheme.kind == WeightKind::post_strat);
    view.weight[r] = weighted_control ? control_weight : 1.0;

    if (scheme.kind == WeightKind::prentice) {
      if (!scheme.subcohort.empty()) {
        view.full_history[r] = scheme.subcohort[i];
      } else if (scheme.sampling_prob >= 1.0) {
        view.full_history[r] = 1;  // certain sampling: everyone is subcohort
      } else {
        // without a subcohort record, only selected non-cases are certainly
        // subcohort members; cases enter at their own failure time
        view.full_history[r] = static_cast<std::uint8_t>(!cohort.event[i]);
      }
    } else {
      view.full_history[r] = 1;
    }
  }
  return view;
}

namespace {

// Per-failure denominators of the weighted Breslow likelihood. One
// descending-time sweep accumulates full-history members; members without
// full history contribute a self term at their own failure only. All exp()
// terms carry a common max shift.
struct FailureStats {
  std::vector<int> member;        // failure member index, ascending time
  std::vector<double> s0;         // shifted denominators
  Eigen::MatrixXd s1;             // one row per failure
  std::vector<Eigen::MatrixXd> s2;  // filled only when needed
  double shift = 0.0;
};

FailureStats failure_stats(const WeightedView& view, const Eigen::VectorXd& eta,
                           const Eigen::VectorXd& e, const SweepBuffers& ord,
                           bool with_s2) {
  const int m = view.m();
  const int d = view.d();
  FailureStats fs;
  double s0c = 0.0;
  Eigen::VectorXd s1c = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd s2c = Eigen::MatrixXd::Zero(d, d);

  std::vector<int> desc_failures;
  std::vector<double> desc_s0;
  std::vector<Eigen::VectorXd> desc_s1;
  std::vector<Eigen::MatrixXd> desc_s2;

  int i = 0;
  while (i < m) {
    const double t = view.time[ord.order_desc[i]];
    int j = i;
    while (j < m && view.time[ord.order_desc[j]] == t) {
      const int r = ord.order_desc[j];
      if (view.full_history[r]) {
        const double we = view.weight[r] * e[r];
        s0c += we;
        s1c += we * view.covariates.row(r).transpose();
        if (with_s2) s2c += we * view.covariates.row(r).transpose() *
                            view.covariates.row(r);
      }
      ++j;
    }
    for (int k = i; k < j; ++k) {
      const int r = ord.order_desc[k];
      if (!view.event[r]) continue;
      double s0 = s0c;
      Eigen::VectorXd s1 = s1c;
      Eigen::MatrixXd s2;
      if (with_s2) s2 = s2c;
      if (!view.full_history[r]) {
        const double we = view.weight[r] * e[r];
        s0 += we;
        s1 += we * view.covariates.row(r).transpose();
        if (with_s2) s2 += we * view.covariates.row(r).transpose() *
                           view.covariates.row(r);
      }
      desc_failures.push_back(r);
      desc_s0.push_back(s0);
      desc_s1.push_back(std::move(s1));
      if (with_s2) desc_s2.push_back(std::move(s2));
    }
    i = j;
  }

  const int nf = static_cast<int>(desc_failures.size());
  fs.member.resize(nf);
  fs.s0.resize(nf);
  fs.s1.resize(nf, d);
  if (with_s2) fs.s2.resize(nf);
  for (int k = 0; k < nf; ++k) {
    const int src = nf - 1 - k;  // reverse into ascending time
    fs.member[k] = desc_failures[src];
    fs.s0[k] = desc_s0[src];
    fs.s1.row(k) = desc_s1[src].transpose();
    if (with_s2) fs.s2[k] = desc_s2[src];
  }
  return fs;
}

Eigen::VectorXd shifted_exp(const WeightedView& view, const Eigen::VectorXd& beta,
                            Eigen::VectorXd* eta_out, double* shift_out) {
  Eigen::VectorXd eta = view.covariates * beta;
  for (int r = 0; r < view.m(); ++r) {
    if (!std::isfinite(eta[r]))
      throw std::domain_error("weighted partial likelihood: non-finite linear predictor");
  }
  const double shift = view.m() > 0 ? eta.maxCoeff() : 0.0;
  Eigen::VectorXd e = (eta.array() - shift).exp();
  if (eta_out) *eta_out = std::move(eta);
  if (shift_out) *shift_out = shift;
  return e;
}

}  // namespace

double weighted_log_pl(const WeightedView& view, const Eigen::VectorXd& beta) {
  if (beta.size() != view.d())
    throw std::invalid_argument("weighted_log_pl: beta dimension mismatch");
  SweepBuffers ord = make_orders(view);
  Eigen::VectorXd eta;
  double shift = 0.0;
  Eigen::VectorXd e = shifted_exp(view, beta, &eta, &shift);
  FailureStats fs = failure_stats(view, eta, e, ord, false);

  double logpl = 0.0;
  for (std::size_t k = 0; k < fs.member.size(); ++k) {
    const int r = fs.member[k];
    logpl += view.weight[r] * (eta[r] - (std::log(fs.s0[k]) + shift));
  }
  return logpl;
}

void weighted_score_hessian(const WeightedView& view, const Eigen::VectorXd& beta,
                            Eigen::VectorXd* score, Eigen::MatrixXd* hessian) {
  const int d = view.d();
  SweepBuffers ord = make_orders(view);
  Eigen::VectorXd eta;
  double shift = 0.0;
  Eigen::VectorXd e = shifted_exp(view, beta, &eta, &shift);
  FailureStats fs = failure_stats(view, eta, e, ord, hessian != nullptr);

  if (score) score->setZero(d);
  if (hessian) hessian->setZero(d, d);
  for (std::size_t k = 0; k < fs.member.size(); ++k) {
    const int r = fs.member[k];
    const double wk = view.weight[r];
    Eigen::VectorXd mean = fs.s1.row(k).transpose() / fs.s0[k];
    if (score) *score += wk * (view.covariates.row(r).transpose() - mean);
    if (hessian)
      *hessian -= wk * (fs.s2[k] / fs.s0[k] - mean * mean.transpose());
  }
}

Eigen::MatrixXd robust_covariance(const WeightedView& view,
                                  const Eigen::VectorXd& beta) {
  const int m = view.m();
  const int d = view.d();
  SweepBuffers ord = make_orders(view);
  Eigen::VectorXd eta;
  double shift = 0.0;
  Eigen::VectorXd e = shifted_exp(view, beta, &eta, &shift);
  FailureStats fs = failure_stats(view, eta, e, ord, true);
  const int nf = static_cast<int>(fs.member.size());

  // Per-failure hazard increments d_k = w_k / S0_k and risk-set means m_k,
  // consumed as prefix sums over ascending failure times.
  std::vector<double> dk(nf);
  Eigen::MatrixXd mk(nf, d);
  std::vector<int> own_failure(m, -1);
  for (int k = 0; k < nf; ++k) {
    const int r = fs.member[k];
    dk[k] = view.weight[r] / fs.s0[k];
    mk.row(k) = fs.s1.row(k) / fs.s0[k];
    own_failure[r] = k;
  }

  Eigen::MatrixXd info;
  weighted_score_hessian(view, beta, nullptr, &info);
  info = -info;

  Eigen::MatrixXd b_mat = Eigen::MatrixXd::Zero(d, d);
  double g0 = 0.0;
  Eigen::VectorXd g1 = Eigen::VectorXd::Zero(d);
  int fk = 0;
  int i = 0;
  while (i < m) {
    const double t = view.time[ord.order_asc[i]];
    while (fk < nf && view.time[fs.member[fk]] <= t) {
      g0 += dk[fk];
      g1 += dk[fk] * mk.row(fk).transpose();
      ++fk;
    }
    int j = i;
    while (j < m && view.time[ord.order_asc[j]] == t) {
      const int r = ord.order_asc[j];
      Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
      const Eigen::VectorXd xr = view.covariates.row(r).transpose();
      if (view.event[r]) {
        const int k = own_failure[r];
        u += view.weight[r] * (xr - mk.row(k).transpose());
      }
      const double we = view.weight[r] * e[r];
      if (view.full_history[r]) {
        u -= we * (g0 * xr - g1);
      } else if (view.event[r]) {
        const int k = own_failure[r];
        u -= we * dk[k] * (xr - mk.row(k).transpose());
      }
      b_mat += u * u.transpose();
      ++j;
    }
    i = j;
  }

  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("robust_covariance: singular information matrix");
  Eigen::MatrixXd ainv_b = llt.solve(b_mat);
  return llt.solve(ainv_b.transpose()).transpose();
}

WeightedFit newton_solve(const WeightedView& view, const Eigen::VectorXd& init,
                         double tol, int max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("newton_solve: tol must be > 0");
  const int d = view.d();
  Eigen::VectorXd beta =
      init.size() == d ? init : Eigen::VectorXd::Zero(d);
  double obj = weighted_log_pl(view, beta);

  WeightedFit fit;
  fit.beta_hat = beta;
  Eigen::VectorXd score(d);
  Eigen::MatrixXd hess(d, d);

  for (int it = 0; it < max_iter; ++it) {
    weighted_score_hessian(view, beta, &score, &hess);
    if (score.lpNorm<Eigen::Infinity>() < tol) {
      fit.converged = true;
      break;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(-hess);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("newton_solve: singular information matrix");
    Eigen::VectorXd step = llt.solve(score);

    double t = 1.0;
    double cand = weighted_log_pl(view, beta + t * step);
    int halvings = 0;
    while (cand < obj && halvings < 40) {
      t *= 0.5;
      cand = weighted_log_pl(view, beta + t * step);
      ++halvings;
      ++fit.step_halvings;
    }
    if (cand < obj) break;  // no ascent direction found

    beta += t * step;
    obj = cand;
    fit.iterations = it + 1;
  }

  if (!fit.converged) {
    weighted_score_hessian(view, beta, &score, nullptr);
    fit.converged = score.lpNorm<Eigen::Infinity>() < tol;
  }
  fit.beta_hat = beta;
  fit.robust_cov = robust_covariance(view, beta);
  fit.robust_se = fit.robust_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

double analytic_gradient_check(const WeightedView& view,
                               const Eigen::VectorXd& beta) {
  const int d = view.d();
  Eigen::VectorXd score(d);
  Eigen::MatrixXd hess(d, d);
  weighted_score_hessian(view, beta, &score, &hess);

  auto rel_err = [](double a, double f) {
    return std::abs(a - f) / std::max({1.0, std::abs(a), std::abs(f)});
  };

  double worst = 0.0;
  for (int j = 0; j < d; ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(beta[j]));
    Eigen::VectorXd bp = beta, bm = beta;
    bp[j] += h;
    bm[j] -= h;
    double fd = (weighted_log_pl(view, bp) - weighted_log_pl(view, bm)) / (2 * h);
    worst = std::max(worst, rel_err(score[j], fd));

    Eigen::VectorXd sp(d), sm(d);
    weighted_score_hessian(view, bp, &sp, nullptr);
    weighted_score_hessian(view, bm, &sm, nullptr);
    Eigen::VectorXd fd_col = (sp - sm) / (2 * h);
    for (int i = 0; i < d; ++i)
      worst = std::max(worst, rel_err(hess(i, j), fd_col[i]));
  }
  return worst;
}

}  // namespace cohortbayes
