#include "cohortbayes/samplers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cohortbayes {

namespace {

void validate_config(const ChainConfig& c, Algorithm expected) {
  if (c.algorithm != expected)
    throw std::invalid_argument("chain config targets a different algorithm");
  if (c.n_iters <= c.burn_in || c.burn_in < 0)
    throw std::invalid_argument("chain config requires n_iters > burn_in >= 0");
  if (c.b_copies < 1) throw std::invalid_argument("chain config requires B >= 1");
  if (std::abs(c.rho_xi) >= 1.0 || std::abs(c.rho_z) >= 1.0)
    throw std::invalid_argument("chain config requires |rho| < 1");
}

Eigen::VectorXd initial_beta(const ChainConfig& c, int dim) {
  if (c.init_beta.size() == 0) return Eigen::VectorXd::Zero(dim);
  if (c.init_beta.size() != dim)
    throw std::invalid_argument("init_beta dimension mismatch");
  return c.init_beta;
}

double finite_or_throw(double log_alpha) {
  if (!std::isfinite(log_alpha) && !(log_alpha == -std::numeric_limits<double>::infinity()))
    throw std::runtime_error("non-finite acceptance ratio");
  return log_alpha;
}

// Shared Metropolis-Hastings bookkeeping: the proposal's log target term is
// compared against the cached one; rejected iterations leave every piece of
// chain state untouched.
struct ChainRecorder {
  explicit ChainRecorder(long n, int dim)
      : draws(n, dim), accepted(n, 0), log_h_trace(n) {}
  Eigen::MatrixXd draws;
  std::vector<std::uint8_t> accepted;
  Eigen::VectorXd log_h_trace;
  long accept_count = 0;

  void record(long r, const Eigen::VectorXd& beta, bool acc, double lh) {
    draws.row(r) = beta.transpose();
    accepted[r] = acc ? 1 : 0;
    log_h_trace[r] = lh;
    if (acc) ++accept_count;
  }

  ChainOutput finish(const ChainConfig& config) {
    ChainOutput out;
    out.draws = std::move(draws);
    out.accepted = std::move(accepted);
    out.log_h_trace = std::move(log_h_trace);
    out.acceptance_rate =
        static_cast<double>(accept_count) / static_cast<double>(out.accepted.size());
    out.seed = config.seed;
    out.config = config;
    return out;
  }
};

double log_normal_density(const Eigen::VectorXd& v, const Eigen::VectorXd& mean,
                          double variance) {
  const Eigen::Index m = v.size();
  // Compensated summation keeps the quadratic form accurate enough for the
  // detailed-balance identity at |rho| near one.
  double q = 0.0, comp = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    double d = v[i] - mean[i];
    double term = d * d - comp;
    double t = q + term;
    comp = (t - q) - term;
    q = t;
  }
  return -0.5 * (static_cast<double>(m) * std::log(2.0 * M_PI * variance) +
                 q / variance);
}

}  // namespace

Eigen::MatrixXd ConjugatePredictive::draw_copy(int count, RngStream& rng) const {
  GammaDraw gamma = sample_gamma(post_, rng);
  if (count == 0) return Eigen::MatrixXd(0, post_.dz());
  Eigen::MatrixXd u = rng.normal_matrix(count, post_.dz());
  return phi_z(u, gamma, v_rows_);
}

double log_prior(const Eigen::VectorXd& beta, const PriorSpec& spec) {
  if (spec.kind == PriorKind::improper_uniform) return 0.0;
  if (spec.scale.size() != beta.size())
    throw std::invalid_argument("student_t prior: scale dimension mismatch");
  if (spec.df <= 0.0) throw std::invalid_argument("student_t prior: df must be > 0");
  Eigen::VectorXd center = spec.center.size() == beta.size()
                               ? spec.center
                               : Eigen::VectorXd::Zero(beta.size());
  const double df = spec.df;
  const double norm = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                      0.5 * std::log(df * M_PI);
  double lp = 0.0;
  for (Eigen::Index i = 0; i < beta.size(); ++i) {
    if (!(spec.scale[i] > 0.0))
      throw std::invalid_argument("student_t prior: scale must be > 0");
    double t = (beta[i] - center[i]) / spec.scale[i];
    lp += norm - std::log(spec.scale[i]) -
          0.5 * (df + 1.0) * std::log1p(t * t / df);
  }
  return lp;
}

Eigen::VectorXd propose_beta(const Eigen::VectorXd& beta,
                             const Eigen::MatrixXd& proposal_cov,
                             RngStream& rng) {
  Eigen::MatrixXd l = lower_cholesky(proposal_cov, "propose_beta (proposal_cov)");
  return beta + l * rng.normal_vector(beta.size());
}

ChainOutput run_alg1(const CohortData& cohort, const PredictiveModel& model,
                     const ChainConfig& config, RngStream& rng) {
  validate_config(config, Algorithm::alg1);
  const int dim = cohort.dz() + cohort.dw();
  const int n_mis = static_cast<int>(cohort.s_bar.size());
  Eigen::MatrixXd l_prop =
      lower_cholesky(config.proposal_cov, "run_alg1 (proposal_cov)");

  Eigen::VectorXd beta = initial_beta(config, dim);
  auto draw_zmis = [&](RngStream& r) {
    ImputationDraw d;
    d.copies.reserve(config.b_copies);
    for (int b = 0; b < config.b_copies; ++b)
      d.copies.push_back(model.draw_copy(n_mis, r));
    return d;
  };

  LogHazardRatio b_cur = LogHazardRatio::from_stacked(beta, cohort.dz());
  double lh_cur = log_h(cohort, b_cur, draw_zmis(rng), config.workers);
  double lp_cur = log_prior(beta, config.prior);

  ChainRecorder rec(config.n_iters, dim);
  for (long r = 0; r < config.n_iters; ++r) {
    Eigen::VectorXd beta_prop = beta + l_prop * rng.normal_vector(dim);
    LogHazardRatio b_prop = LogHazardRatio::from_stacked(beta_prop, cohort.dz());
    double lh_prop = log_h(cohort, b_prop, draw_zmis(rng), config.workers);
    double lp_prop = log_prior(beta_prop, config.prior);

    double log_alpha = finite_or_throw((lp_prop + lh_prop) - (lp_cur + lh_cur));
    bool acc = std::log(rng.uniform()) < log_alpha;
    if (acc) {
      beta = beta_prop;
      lh_cur = lh_prop;
      lp_cur = lp_prop;
    }
    rec.record(r, beta, acc, lh_cur);
  }
  return rec.finish(config);
}

ChainOutput run_alg2(const CohortData& cohort, const RestrictedPosterior& post,
                     const ChainConfig& config, RngStream& rng) {
  validate_config(config, Algorithm::alg2);
  const int dim = cohort.dz() + cohort.dw();
  const int n_mis = static_cast<int>(cohort.s_bar.size());
  const int dz = cohort.dz();
  const double rho = config.rho_z;
  const double rho_c = std::sqrt(1.0 - rho * rho);
  Eigen::MatrixXd l_prop =
      lower_cholesky(config.proposal_cov, "run_alg2 (proposal_cov)");
  Eigen::MatrixXd v_sbar = design_matrix(cohort, cohort.s_bar);

  Eigen::VectorXd beta = initial_beta(config, dim);
  std::vector<Eigen::MatrixXd> u(config.b_copies);
  ImputationDraw z;
  z.copies.resize(config.b_copies);
  for (int b = 0; b < config.b_copies; ++b) {
    GammaDraw gamma = sample_gamma(post, rng);
    u[b] = rng.normal_matrix(n_mis, dz);
    z.copies[b] = phi_z(u[b], gamma, v_sbar);
  }
  double lh_cur = log_h(cohort, LogHazardRatio::from_stacked(beta, dz), z,
                        config.workers);
  double lp_cur = log_prior(beta, config.prior);

  std::vector<Eigen::MatrixXd> u_prop(config.b_copies);
  ChainRecorder rec(config.n_iters, dim);
  for (long r = 0; r < config.n_iters; ++r) {
    Eigen::VectorXd beta_prop = beta + l_prop * rng.normal_vector(dim);
    ImputationDraw z_prop;
    z_prop.copies.resize(config.b_copies);
    for (int b = 0; b < config.b_copies; ++b) {
      GammaDraw gamma = sample_gamma(post, rng);  // fresh gamma each proposal
      u_prop[b] = rho * u[b] + rho_c * rng.normal_matrix(n_mis, dz);
      z_prop.copies[b] = phi_z(u_prop[b], gamma, v_sbar);
    }
    double lh_prop = log_h(cohort, LogHazardRatio::from_stacked(beta_prop, dz),
                           z_prop, config.workers);
    double lp_prop = log_prior(beta_prop, config.prior);

    double log_alpha = finite_or_throw((lp_prop + lh_prop) - (lp_cur + lh_cur));
    bool acc = std::log(rng.uniform()) < log_alpha;
    if (acc) {
      beta = beta_prop;
      u.swap(u_prop);
      lh_cur = lh_prop;
      lp_cur = lp_prop;
    }
    rec.record(r, beta, acc, lh_cur);
  }
  return rec.finish(config);
}

ChainOutput run_alg3(const CohortData& cohort, const RestrictedPosterior& post,
                     const ChainConfig& config, RngStream& rng) {
  validate_config(config, Algorithm::alg3);
  if (config.b_copies != 1)
    throw std::invalid_argument("run_alg3: B must be 1");
  const int dim = cohort.dz() + cohort.dw();
  const int n_mis = static_cast<int>(cohort.s_bar.size());
  const int dz = cohort.dz();
  const double rz = config.rho_z, rx = config.rho_xi;
  const double rz_c = std::sqrt(1.0 - rz * rz);
  const double rx_c = std::sqrt(1.0 - rx * rx);
  Eigen::MatrixXd l_prop =
      lower_cholesky(config.proposal_cov, "run_alg3 (proposal_cov)");
  Eigen::MatrixXd v_sbar = design_matrix(cohort, cohort.s_bar);

  auto complete = [&](const Eigen::MatrixXd& u_xi, const Eigen::MatrixXd& u_z,
                      const Eigen::MatrixXd& sigma) {
    GammaDraw gamma;
    gamma.sigma = sigma;
    gamma.sigma_chol = lower_cholesky(sigma, "run_alg3 (Sigma)");
    gamma.xi = post.xi_hat + post.c_chol * u_xi * gamma.sigma_chol.transpose();
    ImputationDraw d;
    d.copies.push_back(phi_z(u_z, gamma, v_sbar));
    return d;
  };

  Eigen::VectorXd beta = initial_beta(config, dim);
  Eigen::MatrixXd u_xi = rng.normal_matrix(post.dv(), dz);
  Eigen::MatrixXd u_z = rng.normal_matrix(n_mis, dz);
  Eigen::MatrixXd sigma0 = sample_sigma(post, rng);
  double lh_cur = log_h(cohort, LogHazardRatio::from_stacked(beta, dz),
                        complete(u_xi, u_z, sigma0), config.workers);
  double lp_cur = log_prior(beta, config.prior);

  ChainRecorder rec(config.n_iters, dim);
  for (long r = 0; r < config.n_iters; ++r) {
    Eigen::VectorXd beta_prop = beta + l_prop * rng.normal_vector(dim);
    Eigen::MatrixXd sigma = sample_sigma(post, rng);
    Eigen::MatrixXd u_xi_prop = rx * u_xi + rx_c * rng.normal_matrix(post.dv(), dz);
    Eigen::MatrixXd u_z_prop = rz * u_z + rz_c * rng.normal_matrix(n_mis, dz);
    double lh_prop = log_h(cohort, LogHazardRatio::from_stacked(beta_prop, dz),
                           complete(u_xi_prop, u_z_prop, sigma), config.workers);
    double lp_prop = log_prior(beta_prop, config.prior);

    double log_alpha = finite_or_throw((lp_prop + lh_prop) - (lp_cur + lh_cur));
    bool acc = std::log(rng.uniform()) < log_alpha;
    if (acc) {
      beta = beta_prop;
      u_xi = std::move(u_xi_prop);
      u_z = std::move(u_z_prop);
      lh_cur = lh_prop;
      lp_cur = lp_prop;
    }
    rec.record(r, beta, acc, lh_cur);
  }
  return rec.finish(config);
}

double detailed_balance_residual(const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& u_tilde, double rho) {
  if (std::abs(rho) >= 1.0)
    throw std::invalid_argument("detailed_balance_residual: |rho| must be < 1");
  if (u.size() != u_tilde.size())
    throw std::invalid_argument("detailed_balance_residual: size mismatch");
  const double var = (1.0 - rho) * (1.0 + rho);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(u.size());
  double forward = log_normal_density(u, zero, 1.0) +
                   log_normal_density(u_tilde, rho * u, var);
  double backward = log_normal_density(u_tilde, zero, 1.0) +
                    log_normal_density(u, rho * u_tilde, var);
  return std::abs(forward - backward);
}

}  // namespace cohortbayes
