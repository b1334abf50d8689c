#include <doctest.h>

#include <cmath>
#include <set>

#include "cohortbayes/baselines.hpp"
#include "cohortbayes/rng.hpp"
#include "cohortbayes/simulation.hpp"
#include "oracles.hpp"

using namespace cohortbayes;

namespace {

std::vector<SubjectRecord> random_complete(RngStream& rng, int n, int dz,
                                           int dw) {
  std::vector<SubjectRecord> records(n);
  for (auto& r : records) {
    r.time = rng.uniform(0.05, 3.0);
    r.event = rng.uniform() < 0.4;
    r.selected = true;
    r.z = rng.normal_vector(dz);
    r.w = rng.normal_vector(dw);
    r.x = Eigen::VectorXd(0);
  }
  return records;
}

// Case-cohort records with an explicit subcohort mask.
struct MaskedCohort {
  CohortData cohort;
  std::vector<std::uint8_t> subcohort;
};

MaskedCohort random_case_cohort(RngStream& rng, int n, double p) {
  std::vector<SubjectRecord> records = random_complete(rng, n, 1, 0);
  std::vector<std::uint8_t> subcohort(n);
  for (int i = 0; i < n; ++i) {
    subcohort[i] = rng.uniform() < p ? 1 : 0;
    records[i].selected = records[i].event || subcohort[i];
    if (!records[i].selected) records[i].z.reset();
  }
  return {build_cohort(records), subcohort};
}

}  // namespace

TEST_CASE("post-stratified control weight is the non-case ratio") {
  RngStream rng(21);
  // 1040 subjects: 40 cases (all selected), 1000 non-cases of which 40 sampled
  std::vector<SubjectRecord> records;
  std::vector<std::uint8_t> subcohort;
  for (int i = 0; i < 1040; ++i) {
    SubjectRecord r;
    r.time = rng.uniform(0.1, 2.0);
    r.event = i < 40;
    bool sampled = !r.event && i < 80;  // 40 non-cases sampled
    r.selected = r.event || sampled;
    if (r.selected) r.z = rng.normal_vector(1);
    r.w = Eigen::VectorXd(0);
    r.x = Eigen::VectorXd(0);
    records.push_back(std::move(r));
    subcohort.push_back(sampled ? 1 : 0);
  }
  auto cohort = build_cohort(records);
  WeightedView view =
      build_weighted_view(cohort, {WeightKind::post_strat, 0.04, subcohort});
  for (int r = 0; r < view.m(); ++r) {
    CHECK(view.weight[r] == (view.event[r] ? 1.0 : 25.0));
  }
}

TEST_CASE("ipw requires a sampling probability and weights controls by 1/p") {
  RngStream rng(22);
  auto mc = random_case_cohort(rng, 200, 0.2);
  CHECK_THROWS_AS(
      build_weighted_view(mc.cohort, {WeightKind::ipw, 0.0, mc.subcohort}),
      std::invalid_argument);
  WeightedView view =
      build_weighted_view(mc.cohort, {WeightKind::ipw, 0.2, mc.subcohort});
  for (int r = 0; r < view.m(); ++r)
    CHECK(view.weight[r] == (view.event[r] ? 1.0 : 5.0));
}

TEST_CASE("prentice risk sets: subcohort history plus the failing case") {
  RngStream rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    auto mc = random_case_cohort(rng, 10, 0.4);
    const CohortData& c = mc.cohort;
    WeightedView view =
        build_weighted_view(c, {WeightKind::prentice, 0.4, mc.subcohort});
    Eigen::VectorXd beta = rng.normal_vector(1);

    // independent reconstruction straight from the cohort data
    double expected = 0.0;
    std::vector<int> appearances(c.n(), 0);
    for (int k = 0; k < c.n(); ++k) {
      if (!c.event[k]) continue;
      double denom = 0.0;
      for (int l = 0; l < c.n(); ++l) {
        const bool in_set =
            (c.selected[l] && mc.subcohort[l] && c.time[l] >= c.time[k]) ||
            l == k;
        if (in_set) {
          denom += std::exp(c.z(l, 0) * beta[0]);
          ++appearances[l];
        }
      }
      expected += c.z(k, 0) * beta[0] - std::log(denom);
    }
    CHECK(weighted_log_pl(view, beta) == doctest::Approx(expected).epsilon(1e-12));

    // a non-subcohort case appears in exactly one risk set: its own
    for (int l = 0; l < c.n(); ++l) {
      if (c.event[l] && !mc.subcohort[l]) CHECK(appearances[l] == 1);
    }
  }
}

TEST_CASE("all four schemes coincide under the degenerate design") {
  RngStream rng(24);
  std::vector<SubjectRecord> records = random_complete(rng, 150, 1, 0);
  auto cohort = build_cohort(records);
  std::vector<std::uint8_t> all_subcohort(150, 1);  // p = 1: everyone sampled

  Eigen::VectorXd init;
  auto fit_full = newton_solve(
      build_weighted_view(cohort, {WeightKind::full, 1.0, {}}), init);
  auto fit_prentice = newton_solve(
      build_weighted_view(cohort, {WeightKind::prentice, 1.0, all_subcohort}),
      init);
  auto fit_ipw =
      newton_solve(build_weighted_view(cohort, {WeightKind::ipw, 1.0, {}}), init);
  auto fit_ps = newton_solve(
      build_weighted_view(cohort, {WeightKind::post_strat, 1.0, {}}), init);

  REQUIRE(fit_full.converged);
  CHECK(std::abs(fit_full.beta_hat[0] - fit_prentice.beta_hat[0]) < 1e-8);
  CHECK(std::abs(fit_full.beta_hat[0] - fit_ipw.beta_hat[0]) < 1e-8);
  CHECK(std::abs(fit_full.beta_hat[0] - fit_ps.beta_hat[0]) < 1e-8);
}

TEST_CASE("newton solve matches an independent one-dimensional maximizer") {
  RngStream rng(25);
  SimConfig cfg;
  cfg.n = 200;
  cfg.beta0 = 0.4;
  cfg.eta = 0.15;
  cfg.nu = 1.5;
  cfg.subcohort_p = 1.0;
  auto gen = gen_cohort_full(cfg, rng);
  WeightedView view =
      build_weighted_view(gen.complete, {WeightKind::full, 1.0, {}});

  WeightedFit fit = newton_solve(view, Eigen::VectorXd());
  REQUIRE(fit.converged);

  // golden-section search on the naive likelihood
  auto f = [&](double b) {
    return oracle::naive_weighted_log_pl(view, Eigen::VectorXd::Constant(1, b));
  };
  double lo = -3.0, hi = 3.0;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
  double fa = f(a), fb = f(b);
  while (hi - lo > 1e-10) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + phi * (hi - lo);
      fb = f(b);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - phi * (hi - lo);
      fa = f(a);
    }
  }
  CHECK(fit.beta_hat[0] == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-6));

  Eigen::VectorXd score(1);
  weighted_score_hessian(view, fit.beta_hat, &score, nullptr);
  CHECK(std::abs(score[0]) < 1e-8);
  CHECK(fit.robust_se[0] >= 0.0);
  CHECK(std::isfinite(fit.robust_se[0]));
}

TEST_CASE("constant covariate makes the information singular") {
  RngStream rng(26);
  std::vector<SubjectRecord> records = random_complete(rng, 40, 1, 0);
  for (auto& r : records) r.z = Eigen::VectorXd::Constant(1, 1.0);
  auto cohort = build_cohort(records);
  WeightedView view = build_weighted_view(cohort, {WeightKind::full, 1.0, {}});
  CHECK_THROWS_AS(newton_solve(view, Eigen::VectorXd()), std::runtime_error);
}

TEST_CASE("weighted likelihood matches the explicit oracle on all schemes") {
  RngStream rng(27);
  for (int rep = 0; rep < 20; ++rep) {
    auto mc = random_case_cohort(rng, 30, 0.3);
    for (auto kind : {WeightKind::prentice, WeightKind::ipw, WeightKind::post_strat}) {
      WeightedView view =
          build_weighted_view(mc.cohort, {kind, 0.3, mc.subcohort});
      Eigen::VectorXd beta = rng.normal_vector(1);
      CHECK(weighted_log_pl(view, beta) ==
            doctest::Approx(oracle::naive_weighted_log_pl(view, beta))
                .epsilon(1e-11));
    }
  }
}

TEST_CASE("analytic score and Hessian match finite differences") {
  RngStream rng(28);
  auto mc = random_case_cohort(rng, 30, 0.5);
  WeightedView view =
      build_weighted_view(mc.cohort, {WeightKind::post_strat, 0.5, mc.subcohort});

  CHECK(analytic_gradient_check(view, Eigen::VectorXd::Zero(1)) < 1e-6);
  for (int rep = 0; rep < 10; ++rep) {
    CHECK(analytic_gradient_check(view, rng.normal_vector(1)) < 1e-5);
  }
}

TEST_CASE("zero-event data has identically zero score") {
  RngStream rng(29);
  std::vector<SubjectRecord> records = random_complete(rng, 25, 1, 1);
  for (auto& r : records) r.event = false;
  auto cohort = build_cohort(records);
  WeightedView view = build_weighted_view(cohort, {WeightKind::full, 1.0, {}});

  Eigen::VectorXd score(2);
  weighted_score_hessian(view, rng.normal_vector(2), &score, nullptr);
  CHECK(score.cwiseAbs().maxCoeff() == 0.0);
  CHECK(weighted_log_pl(view, rng.normal_vector(2)) == 0.0);
  CHECK(analytic_gradient_check(view, rng.normal_vector(2)) == 0.0);
}

TEST_CASE("rescaling all weights leaves the maximizer unchanged") {
  RngStream rng(30);
  auto mc = random_case_cohort(rng, 120, 0.25);
  WeightedView view =
      build_weighted_view(mc.cohort, {WeightKind::post_strat, 0.25, mc.subcohort});
  WeightedFit base = newton_solve(view, Eigen::VectorXd());
  REQUIRE(base.converged);

  WeightedView scaled = view;
  scaled.weight *= 7.3;
  WeightedFit fit = newton_solve(scaled, Eigen::VectorXd());
  REQUIRE(fit.converged);
  CHECK(std::abs(base.beta_hat[0] - fit.beta_hat[0]) < 1e-8);
}

TEST_CASE("rescaling the covariate rescales the maximizer inversely") {
  RngStream rng(31);
  std::vector<SubjectRecord> records = random_complete(rng, 120, 1, 0);
  auto cohort = build_cohort(records);
  WeightedView view = build_weighted_view(cohort, {WeightKind::full, 1.0, {}});
  WeightedFit base = newton_solve(view, Eigen::VectorXd());
  REQUIRE(base.converged);

  const double c = 4.0;
  WeightedView scaled = view;
  scaled.covariates *= c;
  WeightedFit fit = newton_solve(scaled, Eigen::VectorXd());
  REQUIRE(fit.converged);
  CHECK(fit.beta_hat[0] == doctest::Approx(base.beta_hat[0] / c).epsilon(1e-6));
}
