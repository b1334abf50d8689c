#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "cohortbayes/imputation.hpp"
#include "cohortbayes/rng.hpp"
#include "cohortbayes/survival.hpp"

namespace cohortbayes {

enum class PriorKind { improper_uniform, student_t };

struct PriorSpec {
  PriorKind kind = PriorKind::improper_uniform;
  double df = 3.0;
  Eigen::VectorXd center;  // defaults to zero when empty
  Eigen::VectorXd scale;   // required for student_t
};

enum class Algorithm { alg1, alg2, alg3 };

struct ChainConfig {
  long n_iters = 0;
  long burn_in = 0;
  int b_copies = 1;
  double rho_xi = 0.0;  // coefficient-auxiliary correlation (alg3)
  double rho_z = 0.0;   // covariate-auxiliary correlation (alg2, alg3)
  Eigen::MatrixXd proposal_cov;  // SPD random-walk covariance over stacked beta
  PriorSpec prior;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::alg1;
  Eigen::VectorXd init_beta;  // empty: start at zero
  int workers = 1;            // parallelism for the B likelihood copies
};

struct ChainOutput {
  Eigen::MatrixXd draws;              // n_iters x dim(beta)
  std::vector<std::uint8_t> accepted;
  Eigen::VectorXd log_h_trace;
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;
  ChainConfig config;
};

// Restricted-posterior predictive sampler for the missing block: one call
// draws a fresh model parameter, then `count` covariate rows from it.
class PredictiveModel {
 public:
  virtual ~PredictiveModel() = default;
  virtual int dz() const = 0;
  virtual Eigen::MatrixXd draw_copy(int count, RngStream& rng) const = 0;
};

class BootstrapPredictive final : public PredictiveModel {
 public:
  explicit BootstrapPredictive(BayesianBootstrapModel model)
      : model_(std::move(model)) {}
  int dz() const override { return static_cast<int>(model_.support.cols()); }
  Eigen::MatrixXd draw_copy(int count, RngStream& rng) const override {
    return bb_draw(model_, count, rng);
  }
  const BayesianBootstrapModel& model() const { return model_; }

 private:
  BayesianBootstrapModel model_;
};

class ConjugatePredictive final : public PredictiveModel {
 public:
  ConjugatePredictive(RestrictedPosterior post, Eigen::MatrixXd v_rows)
      : post_(std::move(post)), v_rows_(std::move(v_rows)) {}
  ConjugatePredictive(RestrictedPosterior post, const CohortData& cohort)
      : ConjugatePredictive(std::move(post),
                            design_matrix(cohort, cohort.s_bar)) {}
  int dz() const override { return post_.dz(); }
  Eigen::MatrixXd draw_copy(int count, RngStream& rng) const override;
  const RestrictedPosterior& posterior() const { return post_; }

 private:
  RestrictedPosterior post_;
  Eigen::MatrixXd v_rows_;
};

double log_prior(const Eigen::VectorXd& beta, const PriorSpec& spec);

// Symmetric normal random walk step beta + L eps.
Eigen::VectorXd propose_beta(const Eigen::VectorXd& beta,
                             const Eigen::MatrixXd& proposal_cov,
                             RngStream& rng);

// Pseudo-marginal Metropolis-Hastings with fresh imputations each iteration.
ChainOutput run_alg1(const CohortData& cohort, const PredictiveModel& model,
                     const ChainConfig& config, RngStream& rng);

// Correlated variant: the covariate auxiliaries follow an autoregressive
// update with parameter rho_z while the model parameters are redrawn fresh.
ChainOutput run_alg2(const CohortData& cohort, const RestrictedPosterior& post,
                     const ChainConfig& config, RngStream& rng);

// Application variant (B = 1): both the coefficient auxiliaries (rho_xi) and
// the covariate auxiliaries (rho_z) are correlated; Sigma is fresh each
// iteration.
ChainOutput run_alg3(const CohortData& cohort, const RestrictedPosterior& post,
                     const ChainConfig& config, RngStream& rng);

// |log phi(u;0,I) + log phi(u~;rho u,(1-rho^2)I)
//  - log phi(u~;0,I) - log phi(u;rho u~,(1-rho^2)I)|; identically zero in
// exact arithmetic for |rho| < 1.
double detailed_balance_residual(const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& u_tilde, double rho);

}  // namespace cohortbayes
