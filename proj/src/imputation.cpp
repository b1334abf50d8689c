#include "cohortbayes/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cohortbayes {

Eigen::MatrixXd lower_cholesky(const Eigen::MatrixXd& spd, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(spd);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error(std::string(what) + ": matrix not positive definite");
  }
  return llt.matrixL();
}

namespace {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

}  // namespace

BayesianBootstrapModel make_bootstrap_model(const CohortData& cohort) {
  if (cohort.s_set.empty())
    throw std::invalid_argument("make_bootstrap_model: no selected subjects");
  BayesianBootstrapModel m;
  m.support.resize(cohort.s_set.size(), cohort.dz());
  for (std::size_t r = 0; r < cohort.s_set.size(); ++r)
    m.support.row(r) = cohort.z.row(cohort.s_set[r]);
  return m;
}

Eigen::MatrixXd bb_draw(const BayesianBootstrapModel& model, int count,
                        RngStream& rng) {
  const Eigen::Index ns = model.support.rows();
  if (ns == 0) throw std::invalid_argument("bb_draw: empty support");
  if (count < 0) throw std::invalid_argument("bb_draw: negative count");

  Eigen::MatrixXd out(count, model.support.cols());
  if (count == 0) return out;

  Eigen::VectorXd w = rng.dirichlet_uniform(ns);
  Eigen::VectorXd cum(ns);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < ns; ++i) {
    acc += w[i];
    cum[i] = acc;
  }
  cum[ns - 1] = 1.0;  // guard against rounding in the final bin

  for (int r = 0; r < count; ++r) {
    double u = rng.uniform();
    const double* begin = cum.data();
    Eigen::Index idx = std::lower_bound(begin, begin + ns, u) - begin;
    out.row(r) = model.support.row(idx);
  }
  return out;
}

RestrictedPosterior fit_restricted_posterior(const CohortData& cohort) {
  const int dv = 1 + cohort.dw() + cohort.dx();
  const int dz = cohort.dz();
  const int ns = static_cast<int>(cohort.s_set.size());
  if (ns < dv + dz + 2)
    throw std::invalid_argument(
        "fit_restricted_posterior: too few selected subjects for a proper posterior");

  Eigen::MatrixXd v = design_matrix(cohort, cohort.s_set);
  Eigen::MatrixXd zs(ns, dz);
  for (int r = 0; r < ns; ++r) zs.row(r) = cohort.z.row(cohort.s_set[r]);

  Eigen::MatrixXd vtv = symmetrize(v.transpose() * v);
  Eigen::LLT<Eigen::MatrixXd> llt(vtv);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("fit_restricted_posterior: rank-deficient design");

  RestrictedPosterior post;
  post.n_s = ns;
  post.xi_hat = llt.solve(v.transpose() * zs);
  post.c_matrix = symmetrize(llt.solve(Eigen::MatrixXd::Identity(dv, dv)));
  post.c_chol = lower_cholesky(post.c_matrix, "fit_restricted_posterior (C)");

  Eigen::MatrixXd resid = zs - v * post.xi_hat;
  post.psi = symmetrize(resid.transpose() * resid);
  // Z exactly linear in V leaves only rounding noise in the residuals; treat
  // that as a degenerate (non-SPD) Psi.
  if (post.psi.trace() <= 1e-12 * std::max(zs.squaredNorm(), 1e-300))
    throw std::runtime_error("fit_restricted_posterior: degenerate residuals, Psi not SPD");
  lower_cholesky(post.psi, "fit_restricted_posterior (Psi)");
  return post;
}

Eigen::MatrixXd sample_sigma(const RestrictedPosterior& post, RngStream& rng) {
  const int d = post.dz();
  if (post.n_s <= d + 1)
    throw std::invalid_argument("sample_sigma: n_s must exceed d_z + 1");

  Eigen::MatrixXd l_psi = lower_cholesky(post.psi, "sample_sigma (Psi)");
  Eigen::MatrixXd psi_inv = symmetrize(
      l_psi.transpose().triangularView<Eigen::Upper>().solve(
          l_psi.triangularView<Eigen::Lower>().solve(
              Eigen::MatrixXd::Identity(d, d))));
  Eigen::MatrixXd l = lower_cholesky(psi_inv, "sample_sigma (Psi^-1)");

  // Bartlett factor for Wishart(Psi^-1, n_s): chi-square diagonal, standard
  // normal strict lower triangle.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) a(i, i) = std::sqrt(rng.chisq(post.n_s - i));
  for (int j = 0; j < d; ++j)
    for (int i = j + 1; i < d; ++i) a(i, j) = rng.normal();

  // Sigma^-1 = (L A)(L A)';  Sigma = M^-T M^-1 with M = L A lower triangular.
  Eigen::MatrixXd m = l.triangularView<Eigen::Lower>() * a;
  Eigen::MatrixXd m_inv = m.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(d, d));
  return symmetrize(m_inv.transpose() * m_inv);
}

Eigen::MatrixXd phi_xi(const Eigen::MatrixXd& u_xi, const Eigen::MatrixXd& sigma,
                       const RestrictedPosterior& post) {
  if (u_xi.rows() != post.dv() || u_xi.cols() != post.dz())
    throw std::invalid_argument("phi_xi: u_xi shape mismatch");
  Eigen::MatrixXd l_sigma = lower_cholesky(sigma, "phi_xi (Sigma)");
  return post.xi_hat + post.c_chol * u_xi * l_sigma.transpose();
}

Eigen::MatrixXd phi_z(const Eigen::MatrixXd& u_z, const GammaDraw& gamma,
                      const Eigen::MatrixXd& v_rows) {
  if (u_z.rows() != v_rows.rows() || u_z.cols() != gamma.sigma_chol.rows())
    throw std::invalid_argument("phi_z: u_z shape mismatch");
  return v_rows * gamma.xi + u_z * gamma.sigma_chol.transpose();
}

Eigen::MatrixXd phi_z(const Eigen::MatrixXd& u_z, const GammaDraw& gamma,
                      const CohortData& cohort) {
  return phi_z(u_z, gamma, design_matrix(cohort, cohort.s_bar));
}

GammaDraw sample_gamma(const RestrictedPosterior& post, RngStream& rng) {
  GammaDraw g;
  g.sigma = sample_sigma(post, rng);
  g.sigma_chol = lower_cholesky(g.sigma, "sample_gamma (Sigma)");
  Eigen::MatrixXd u = rng.normal_matrix(post.dv(), post.dz());
  g.xi = post.xi_hat + post.c_chol * u * g.sigma_chol.transpose();
  return g;
}

}  // namespace cohortbayes
