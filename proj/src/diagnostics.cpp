#include "cohortbayes/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cohortbayes {

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile_type7: empty sample");
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("quantile_type7: p outside [0,1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double gelman_rubin(const std::vector<Eigen::VectorXd>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw std::invalid_argument("gelman_rubin: need at least two chains");
  const Eigen::Index len = chains.front().size();
  if (len < 10) throw std::invalid_argument("gelman_rubin: chains too short");
  for (const auto& c : chains) {
    if (c.size() != len)
      throw std::invalid_argument("gelman_rubin: chains must have equal length");
  }

  const double dl = static_cast<double>(len);
  Eigen::VectorXd means(m);
  double w = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = chains[c].mean();
    w += (chains[c].array() - means[c]).square().sum() / (dl - 1.0);
  }
  w /= static_cast<double>(m);
  if (w <= 0.0) throw std::invalid_argument("gelman_rubin: zero within-chain variance");

  const double grand = means.mean();
  // B/L = variance of the chain means.
  const double b_over_l =
      (means.array() - grand).square().sum() / static_cast<double>(m - 1);
  const double v_hat = (dl - 1.0) / dl * w + b_over_l;
  return std::sqrt(v_hat / w);
}

double ess(const Eigen::VectorXd& draws) {
  const Eigen::Index n = draws.size();
  if (n < 100) throw std::invalid_argument("ess: need at least 100 draws");
  const double mean = draws.mean();
  Eigen::VectorXd centered = draws.array() - mean;
  const double c0 = centered.squaredNorm() / static_cast<double>(n);
  if (c0 <= 0.0) return 1.0;

  auto acov = [&](Eigen::Index lag) {
    return centered.head(n - lag).dot(centered.tail(n - lag)) /
           static_cast<double>(n);
  };

  // Geyer initial positive sequence: accumulate paired autocorrelations while
  // the pair sums stay positive.
  double tau = 0.0;
  for (Eigen::Index k = 0;; ++k) {
    const Eigen::Index l1 = 2 * k, l2 = 2 * k + 1;
    if (l2 >= n - 1) break;
    const double rho1 = (l1 == 0) ? 1.0 : acov(l1) / c0;
    const double rho2 = acov(l2) / c0;
    const double pair = rho1 + rho2;
    if (pair <= 0.0) break;
    tau += pair;
  }
  tau = 2.0 * tau - 1.0;
  const double dn = static_cast<double>(n);
  if (tau < 1.0) return dn;  // antithetic chains clip to length
  return std::min(dn, dn / tau);
}

PosteriorSummary summarize(const Eigen::VectorXd& draws, long burn_in) {
  if (burn_in < 0 || draws.size() <= burn_in)
    throw std::invalid_argument("summarize: empty post-burn-in window");
  const Eigen::Index kept = draws.size() - burn_in;
  std::vector<double> hr(kept);
  double sum = 0.0;
  long le_one = 0;
  for (Eigen::Index i = 0; i < kept; ++i) {
    hr[i] = std::exp(draws[burn_in + i]);
    sum += hr[i];
    if (hr[i] <= 1.0) ++le_one;
  }
  PosteriorSummary s;
  s.hr_mean = sum / static_cast<double>(kept);
  s.hr_ci_low = quantile_type7(hr, 0.025);
  s.hr_ci_high = quantile_type7(std::move(hr), 0.975);
  s.p_hr_le_1 = static_cast<double>(le_one) / static_cast<double>(kept);
  return s;
}

}  // namespace cohortbayes
