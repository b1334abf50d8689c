#pragma once

#include <Eigen/Dense>

#include "cohortbayes/rng.hpp"
#include "cohortbayes/survival.hpp"

namespace cohortbayes {

// Nonparametric model for Z: the observed expensive-covariate vectors of the
// selected subjects are the support, and the restricted posterior places
// Dirichlet(1,...,1) weights on them.
struct BayesianBootstrapModel {
  Eigen::MatrixXd support;  // n_S x d_z
};

BayesianBootstrapModel make_bootstrap_model(const CohortData& cohort);

// One Dirichlet(1,...,1) weight vector over the support, then `count`
// conditionally i.i.d. draws from the weighted support. Every returned row is
// an exact copy of a support row.
Eigen::MatrixXd bb_draw(const BayesianBootstrapModel& model, int count,
                        RngStream& rng);

// Sufficient statistics of the conjugate multivariate-normal regression
// posterior fitted to the selected subjects: xi | Sigma is matrix normal
// (xi_hat, C, Sigma) and Sigma is inverse Wishart (Psi, n_s).
struct RestrictedPosterior {
  Eigen::MatrixXd xi_hat;    // d_v x d_z least squares estimator
  Eigen::MatrixXd c_matrix;  // (V'V)^-1, d_v x d_v SPD
  Eigen::MatrixXd c_chol;    // lower Cholesky factor of c_matrix
  Eigen::MatrixXd psi;       // residual sum of squares, d_z x d_z SPD
  int n_s = 0;

  int dv() const { return static_cast<int>(xi_hat.rows()); }
  int dz() const { return static_cast<int>(xi_hat.cols()); }
};

// One draw of the regression-model parameter: coefficients and residual
// covariance, with the covariance factor cached for reuse.
struct GammaDraw {
  Eigen::MatrixXd xi;          // d_v x d_z
  Eigen::MatrixXd sigma;       // d_z x d_z SPD
  Eigen::MatrixXd sigma_chol;  // lower Cholesky factor of sigma
};

// Standard-normal auxiliaries behind the deterministic inversion maps.
struct AuxiliaryNormals {
  Eigen::MatrixXd u_xi;               // d_v x d_z
  std::vector<Eigen::MatrixXd> u_z;   // per copy: |s_bar| x d_z
};

RestrictedPosterior fit_restricted_posterior(const CohortData& cohort);

// Inverse-Wishart (Psi, n_s) draw via the Bartlett decomposition.
Eigen::MatrixXd sample_sigma(const RestrictedPosterior& post, RngStream& rng);

// xi_hat + L_C u L_Sigma'; distributed as the matrix-normal posterior of
// xi given sigma.
Eigen::MatrixXd phi_xi(const Eigen::MatrixXd& u_xi, const Eigen::MatrixXd& sigma,
                       const RestrictedPosterior& post);

// Row j = xi' v_j + L_Sigma u_j over the given design rows.
Eigen::MatrixXd phi_z(const Eigen::MatrixXd& u_z, const GammaDraw& gamma,
                      const Eigen::MatrixXd& v_rows);
Eigen::MatrixXd phi_z(const Eigen::MatrixXd& u_z, const GammaDraw& gamma,
                      const CohortData& cohort);

// Fresh gamma = (xi, Sigma): Sigma from the inverse-Wishart posterior, xi via
// phi_xi with fresh internal normals.
GammaDraw sample_gamma(const RestrictedPosterior& post, RngStream& rng);

Eigen::MatrixXd lower_cholesky(const Eigen::MatrixXd& spd, const char* what);

}  // namespace cohortbayes
