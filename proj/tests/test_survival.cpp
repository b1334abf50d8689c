#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cohortbayes/imputation.hpp"
#include "cohortbayes/rng.hpp"
#include "cohortbayes/survival.hpp"
#include "oracles.hpp"

using namespace cohortbayes;

namespace {

SubjectRecord subject(double time, bool event, double z) {
  SubjectRecord r;
  r.time = time;
  r.event = event;
  r.selected = true;
  r.z = Eigen::VectorXd::Constant(1, z);
  r.w = Eigen::VectorXd(0);
  r.x = Eigen::VectorXd(0);
  return r;
}

std::vector<SubjectRecord> random_cohort(RngStream& rng, int n, int dz, int dw) {
  std::vector<SubjectRecord> records(n);
  for (auto& r : records) {
    r.time = rng.uniform(0.0, 3.0);
    r.event = rng.uniform() < 0.4;
    r.selected = true;
    r.z = rng.normal_vector(dz);
    r.w = rng.normal_vector(dw);
    r.x = Eigen::VectorXd(0);
  }
  return records;
}

}  // namespace

TEST_CASE("build_cohort orders events by ascending time") {
  auto cohort = build_cohort({subject(2, true, 0.1), subject(1, true, 0.2),
                              subject(3, false, 0.3)});
  REQUIRE(cohort.event_order == std::vector<int>{1, 0});
  REQUIRE(cohort.s_set.size() == 3);
  REQUIRE(cohort.s_bar.empty());
}

TEST_CASE("build_cohort with no events has empty event order") {
  auto cohort = build_cohort({subject(2, false, 0.0), subject(1, false, 0.0)});
  CHECK(cohort.event_order.empty());
  CHECK(cohort.n_events() == 0);
}

TEST_CASE("build_cohort keeps tied events stable by input order") {
  RngStream rng(41);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<SubjectRecord> records;
    const int n = 2 + static_cast<int>(rng.uniform() * 20);
    for (int i = 0; i < n; ++i) {
      // coarse grid forces plenty of ties
      double t = std::floor(rng.uniform() * 4.0);
      records.push_back(subject(t, rng.uniform() < 0.6, rng.normal()));
    }
    auto cohort = build_cohort(records);
    CHECK(cohort.event_order ==
          oracle::naive_event_order(cohort.time, cohort.event));
  }
}

TEST_CASE("build_cohort rejects malformed input") {
  CHECK_THROWS_AS(build_cohort({}), std::invalid_argument);
  CHECK_THROWS_AS(build_cohort({subject(-1.0, true, 0.0)}), std::invalid_argument);

  SubjectRecord missing_z = subject(1.0, true, 0.0);
  missing_z.z.reset();
  CHECK_THROWS_AS(build_cohort({missing_z}), std::invalid_argument);

  auto a = subject(1.0, true, 0.0);
  auto b = subject(2.0, false, 0.0);
  b.z = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(build_cohort({a, b}), std::invalid_argument);
}

TEST_CASE("log partial likelihood at beta zero is a log rank count") {
  auto cohort = build_cohort({subject(1, true, 0.5), subject(2, true, -0.5),
                              subject(3, false, 1.0)});
  LogHazardRatio beta{Eigen::VectorXd::Zero(1), Eigen::VectorXd(0)};
  double value = log_partial_likelihood(cohort, beta, cohort.z);
  CHECK(value == doctest::Approx(-std::log(6.0)).epsilon(1e-14));
}

TEST_CASE("log partial likelihood matches the explicit product") {
  auto cohort = build_cohort({subject(1, true, 1.0), subject(2, true, 0.0),
                              subject(3, false, -1.0)});
  LogHazardRatio beta{Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd(0)};
  double value = log_partial_likelihood(cohort, beta, cohort.z);
  CHECK(value ==
        doctest::Approx(oracle::naive_log_pl(cohort, beta, cohort.z)).epsilon(1e-13));
}

TEST_CASE("tied failure times share one Breslow denominator") {
  auto cohort = build_cohort({subject(1, true, 0.3), subject(1, true, -0.2),
                              subject(2, false, 0.7)});
  LogHazardRatio beta{Eigen::VectorXd::Constant(1, 0.8), Eigen::VectorXd(0)};
  double value = log_partial_likelihood(cohort, beta, cohort.z);
  double expected = oracle::naive_log_pl(cohort, beta, cohort.z);
  CHECK(value == doctest::Approx(expected).epsilon(1e-13));

  // both failures see the full three-member denominator
  double denom = std::exp(0.8 * 0.3) + std::exp(-0.8 * 0.2) + std::exp(0.8 * 0.7);
  double direct = 0.8 * 0.3 - std::log(denom) + (-0.8 * 0.2) - std::log(denom);
  CHECK(value == doctest::Approx(direct).epsilon(1e-13));
}

TEST_CASE("non-finite linear predictor is rejected") {
  auto cohort = build_cohort({subject(1, true, 1.0), subject(2, false, 0.0)});
  LogHazardRatio beta{Eigen::VectorXd::Constant(1,
                          std::numeric_limits<double>::infinity()),
                      Eigen::VectorXd(0)};
  CHECK_THROWS_AS(log_partial_likelihood(cohort, beta, cohort.z),
                  std::domain_error);
}

TEST_CASE("cumulative risk-set sweep agrees with explicit summation") {
  RngStream rng(42);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 3 + static_cast<int>(rng.uniform() * 47);
    auto cohort = build_cohort(random_cohort(rng, n, 2, 1));
    LogHazardRatio beta{rng.normal_vector(2), rng.normal_vector(1)};
    double fast = log_partial_likelihood(cohort, beta, cohort.z);
    double slow = oracle::naive_log_pl(cohort, beta, cohort.z);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-10));
  }
}

TEST_CASE("likelihood is invariant to record permutation") {
  RngStream rng(43);
  auto records = random_cohort(rng, 30, 2, 1);
  auto cohort = build_cohort(records);
  LogHazardRatio beta{rng.normal_vector(2), rng.normal_vector(1)};
  double reference = log_partial_likelihood(cohort, beta, cohort.z);

  std::mt19937 shuffler(7);
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(records.begin(), records.end(), shuffler);
    auto shuffled = build_cohort(records);
    double value = log_partial_likelihood(shuffled, beta, shuffled.z);
    CHECK(value == doctest::Approx(reference).epsilon(1e-12));
  }
}

TEST_CASE("log_h reduces exactly for single and identical copies") {
  RngStream rng(44);
  std::vector<SubjectRecord> records = random_cohort(rng, 12, 1, 0);
  for (int i = 4; i < 12; ++i) {
    records[i].selected = false;
    records[i].z.reset();
  }
  auto cohort = build_cohort(records);
  LogHazardRatio beta{Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd(0)};

  Eigen::MatrixXd copy = rng.normal_matrix(8, 1);
  ImputationDraw single{{copy}};
  Eigen::MatrixXd z_full = cohort.z;
  for (int r = 0; r < 8; ++r) z_full.row(cohort.s_bar[r]) = copy.row(r);

  CHECK(log_h(cohort, beta, single) ==
        log_partial_likelihood(cohort, beta, z_full));

  ImputationDraw four{{copy, copy, copy, copy}};
  CHECK(log_h(cohort, beta, four) == log_h(cohort, beta, single));
}

TEST_CASE("log_h of two copies matches the probability-domain mean") {
  RngStream rng(45);
  std::vector<SubjectRecord> records = random_cohort(rng, 8, 1, 0);
  for (int i = 5; i < 8; ++i) {
    records[i].selected = false;
    records[i].z.reset();
  }
  auto cohort = build_cohort(records);
  LogHazardRatio beta{Eigen::VectorXd::Constant(1, -0.4), Eigen::VectorXd(0)};

  Eigen::MatrixXd c1 = rng.normal_matrix(3, 1);
  Eigen::MatrixXd c2 = rng.normal_matrix(3, 1);
  ImputationDraw draw{{c1, c2}};

  auto complete = [&](const Eigen::MatrixXd& zm) {
    Eigen::MatrixXd z = cohort.z;
    for (int r = 0; r < 3; ++r) z.row(cohort.s_bar[r]) = zm.row(r);
    return std::exp(log_partial_likelihood(cohort, beta, z));
  };
  double expected = std::log(0.5 * (complete(c1) + complete(c2)));
  CHECK(log_h(cohort, beta, draw) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("log_h is invariant to copy permutation and worker count") {
  RngStream rng(46);
  std::vector<SubjectRecord> records = random_cohort(rng, 10, 1, 0);
  for (int i = 6; i < 10; ++i) {
    records[i].selected = false;
    records[i].z.reset();
  }
  auto cohort = build_cohort(records);
  LogHazardRatio beta{Eigen::VectorXd::Constant(1, 0.2), Eigen::VectorXd(0)};

  std::vector<Eigen::MatrixXd> copies;
  for (int b = 0; b < 4; ++b) copies.push_back(rng.normal_matrix(4, 1));
  ImputationDraw draw{copies};
  double reference = log_h(cohort, beta, draw);

  std::reverse(copies.begin(), copies.end());
  ImputationDraw reversed{copies};
  CHECK(log_h(cohort, beta, reversed) == doctest::Approx(reference).epsilon(1e-12));
  CHECK(log_h(cohort, beta, draw, 4) == reference);
}

TEST_CASE("exp(log_h) is an unbiased estimator regardless of B") {
  RngStream rng(47);
  std::vector<SubjectRecord> records = random_cohort(rng, 10, 1, 0);
  for (int i = 6; i < 10; ++i) {
    records[i].selected = false;
    records[i].z.reset();
  }
  auto cohort = build_cohort(records);
  auto model = make_bootstrap_model(cohort);
  LogHazardRatio beta{Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd(0)};
  const int n_mis = static_cast<int>(cohort.s_bar.size());

  auto estimate = [&](int b_copies, int draws) {
    std::vector<double> values(draws);
    for (int d = 0; d < draws; ++d) {
      ImputationDraw draw;
      for (int b = 0; b < b_copies; ++b)
        draw.copies.push_back(bb_draw(model, n_mis, rng));
      values[d] = std::exp(log_h(cohort, beta, draw));
    }
    return oracle::sample_stats(values);
  };

  auto one = estimate(1, 20000);
  auto five = estimate(5, 20000);
  double se = std::hypot(one.sd / std::sqrt(one.n), five.sd / std::sqrt(five.n));
  CHECK(std::abs(one.mean - five.mean) < 3.0 * se);
}
