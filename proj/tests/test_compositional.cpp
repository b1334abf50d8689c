#include <doctest.h>

#include <cmath>

#include "cohortbayes/compositional.hpp"
#include "cohortbayes/rng.hpp"

using namespace cohortbayes;

namespace {

Eigen::VectorXd random_composition(RngStream& rng, int parts) {
  Eigen::VectorXd p(parts);
  for (int i = 0; i < parts; ++i) p[i] = rng.uniform(0.05, 1.0);
  return close_composition(p);
}

}  // namespace

TEST_CASE("zero replacement substitutes the half detection limit") {
  Eigen::VectorXd parts(3);
  parts << 0.0, 0.3, 0.7;
  Eigen::VectorXd out = zero_replace(parts, 0.005);
  CHECK(out[0] == doctest::Approx(0.005 / 1.005).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(0.3 / 1.005).epsilon(1e-14));
  CHECK(out.sum() == doctest::Approx(1.0).epsilon(1e-14));

  Eigen::VectorXd clean(2);
  clean << 0.4, 0.6;
  CHECK((zero_replace(clean, 0.005) - clean).cwiseAbs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(zero_replace(Eigen::VectorXd::Zero(3), 0.005),
                  std::invalid_argument);
  Eigen::VectorXd negative(2);
  negative << -0.1, 1.1;
  CHECK_THROWS_AS(zero_replace(negative, 0.005), std::invalid_argument);
}

TEST_CASE("zero replacement is idempotent") {
  RngStream rng(81);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd parts = random_composition(rng, 5);
    parts[rep % 5] = 0.0;
    Eigen::VectorXd once = zero_replace(parts, 0.00005);
    Eigen::VectorXd twice = zero_replace(once, 0.00005);
    CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("alr of equal parts is the zero vector") {
  Eigen::VectorXd parts = Eigen::VectorXd::Constant(4, 0.25);
  CHECK(alr(parts).cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd p(3);
  p << 0.2, 0.2, 0.6;
  Eigen::VectorXd coords = alr(p);
  CHECK(coords[0] == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));
  CHECK(coords[1] == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("alr round trips through its closed-form inverse") {
  RngStream rng(82);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXd parts = random_composition(rng, 6);
    Eigen::VectorXd back = alr_inverse(alr(parts));
    CHECK((back - parts).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("alr is scale invariant") {
  RngStream rng(83);
  for (double c : {1e-6, 0.5, 3.0, 1e6}) {
    Eigen::VectorXd parts = random_composition(rng, 5);
    Eigen::VectorXd scaled = c * parts;
    CHECK((alr(scaled) - alr(parts)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("alr_inverse handles extreme coordinates without overflow") {
  Eigen::VectorXd coords(3);
  coords << 700.0, -700.0, 0.0;
  Eigen::VectorXd parts = alr_inverse(coords);
  CHECK(parts.allFinite());
  CHECK(parts.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(parts[0] > 0.999);

  CHECK((alr_inverse(Eigen::VectorXd::Zero(3)) -
         Eigen::VectorXd::Constant(4, 0.25))
            .cwiseAbs()
            .maxCoeff() < 1e-15);
}

TEST_CASE("perturbing one part moves exactly one alr coordinate by delta") {
  RngStream rng(84);
  const double delta = 0.37;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd parts = random_composition(rng, 6);
    const int k = rep % 5;  // never the reference part
    Eigen::VectorXd bumped = parts;
    bumped[k] *= std::exp(delta);
    bumped = close_composition(bumped);

    Eigen::VectorXd d = alr(bumped) - alr(parts);
    for (int j = 0; j < d.size(); ++j) {
      if (j == k) {
        CHECK(d[j] == doctest::Approx(delta).epsilon(1e-12));
      } else {
        CHECK(std::abs(d[j]) < 1e-12);
      }
    }
  }
}

TEST_CASE("standardize scales reference columns to unit variance") {
  RngStream rng(85);
  Eigen::MatrixXd m = rng.normal_matrix(40, 3);
  m.col(1) *= 4.2;
  std::vector<int> reference;
  for (int r = 0; r < 25; ++r) reference.push_back(r);

  Eigen::VectorXd sds;
  Eigen::MatrixXd scaled = standardize(m, reference, &sds);

  for (int c = 0; c < 3; ++c) {
    // two-pass variance oracle over the reference subset
    double mean = 0.0;
    for (int r : reference) mean += m(r, c);
    mean /= reference.size();
    double ss = 0.0;
    for (int r : reference) ss += (m(r, c) - mean) * (m(r, c) - mean);
    const double sd = std::sqrt(ss / (reference.size() - 1.0));
    CHECK(sds[c] == doctest::Approx(sd).epsilon(1e-12));

    double mean_s = 0.0;
    for (int r : reference) mean_s += scaled(r, c);
    mean_s /= reference.size();
    double ss_s = 0.0;
    for (int r : reference) ss_s += (scaled(r, c) - mean_s) * (scaled(r, c) - mean_s);
    CHECK(std::sqrt(ss_s / (reference.size() - 1.0)) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }

  Eigen::MatrixXd constant = Eigen::MatrixXd::Ones(10, 2);
  std::vector<int> rows{0, 1, 2};
  CHECK_THROWS_AS(standardize(constant, rows, nullptr), std::invalid_argument);
  CHECK_THROWS_AS(standardize(m, {0}, nullptr), std::invalid_argument);
}

TEST_CASE("composition shift factor reproduces the worked example") {
  Eigen::VectorXd hr(8), sd(8);
  hr << 0.97, 0.86, 1.18, 1.39, 0.91, 1.11, 0.99, 0.78;
  sd << 0.27, 0.26, 0.26, 0.07, 0.31, 0.24, 0.70, 0.26;
  const double factor = composition_shift_hr(hr, sd, 0.025);
  CHECK(std::abs(factor - 1.10) < 0.005);

  CHECK(composition_shift_hr(hr, sd, 0.0) == 1.0);

  Eigen::VectorXd one_hr = Eigen::VectorXd::Constant(1, 2.0);
  Eigen::VectorXd one_sd = Eigen::VectorXd::Ones(1);
  CHECK(composition_shift_hr(one_hr, one_sd, 1.0) ==
        doctest::Approx(2.0).epsilon(1e-14));

  // excluding the changed component equals omitting it from the vectors
  Eigen::VectorXd hr9(9), sd9(9);
  hr9 << 0.97, 0.86, 1.18, 1.39, 0.99, 0.91, 1.11, 0.99, 0.78;
  sd9 << 0.27, 0.26, 0.26, 0.07, 0.11, 0.31, 0.24, 0.70, 0.26;
  CHECK(composition_shift_hr(hr9, sd9, 0.025, 4) ==
        doctest::Approx(factor).epsilon(1e-14));

  Eigen::VectorXd bad_hr = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd ok_sd = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(composition_shift_hr(bad_hr, ok_sd, 0.1),
                  std::invalid_argument);
}
