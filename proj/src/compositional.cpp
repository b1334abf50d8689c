#include "cohortbayes/compositional.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cohortbayes {

Eigen::VectorXd close_composition(const Eigen::VectorXd& parts) {
  if (parts.size() == 0) throw std::invalid_argument("composition: empty parts");
  if ((parts.array() < 0.0).any())
    throw std::invalid_argument("composition: negative part");
  const double total = parts.sum();
  if (!(total > 0.0)) throw std::invalid_argument("composition: all parts zero");
  return parts / total;
}

Eigen::VectorXd zero_replace(const Eigen::VectorXd& parts, double detection_half) {
  if (!(detection_half > 0.0))
    throw std::invalid_argument("zero_replace: detection_half must be > 0");
  Eigen::VectorXd out = close_composition(parts);
  bool changed = false;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out[i] == 0.0) {
      out[i] = detection_half;
      changed = true;
    }
  }
  return changed ? close_composition(out) : out;
}

Eigen::VectorXd alr(const Eigen::VectorXd& parts) {
  if (parts.size() < 2) throw std::invalid_argument("alr: need at least two parts");
  if ((parts.array() <= 0.0).any())
    throw std::invalid_argument("alr: nonpositive part");
  const Eigen::Index k = parts.size() - 1;
  const double log_ref = std::log(parts[k]);
  Eigen::VectorXd coords(k);
  for (Eigen::Index i = 0; i < k; ++i) coords[i] = std::log(parts[i]) - log_ref;
  return coords;
}

Eigen::VectorXd alr_inverse(const Eigen::VectorXd& coords) {
  for (Eigen::Index i = 0; i < coords.size(); ++i) {
    if (!std::isfinite(coords[i]))
      throw std::invalid_argument("alr_inverse: non-finite coordinate");
  }
  const double shift = coords.size() > 0 ? std::max(coords.maxCoeff(), 0.0) : 0.0;
  Eigen::VectorXd parts(coords.size() + 1);
  double total = 0.0;
  for (Eigen::Index i = 0; i < coords.size(); ++i) {
    parts[i] = std::exp(coords[i] - shift);
    total += parts[i];
  }
  parts[coords.size()] = std::exp(-shift);
  total += parts[coords.size()];
  return parts / total;
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& alr_matrix,
                            const std::vector<int>& reference_rows,
                            Eigen::VectorXd* sds) {
  if (reference_rows.size() < 2)
    throw std::invalid_argument("standardize: reference subset needs >= 2 rows");
  const double nr = static_cast<double>(reference_rows.size());
  Eigen::VectorXd sd(alr_matrix.cols());
  for (Eigen::Index c = 0; c < alr_matrix.cols(); ++c) {
    double mean = 0.0;
    for (int r : reference_rows) mean += alr_matrix(r, c);
    mean /= nr;
    double ss = 0.0;
    for (int r : reference_rows) {
      const double d = alr_matrix(r, c) - mean;
      ss += d * d;
    }
    const double var = ss / (nr - 1.0);
    if (!(var > 0.0))
      throw std::invalid_argument("standardize: zero-variance column");
    sd[c] = std::sqrt(var);
  }
  Eigen::MatrixXd out = alr_matrix * sd.cwiseInverse().asDiagonal();
  if (sds) *sds = std::move(sd);
  return out;
}

double composition_shift_hr(const Eigen::VectorXd& hr, const Eigen::VectorXd& sd,
                            double log_shift, int changed_index) {
  if (hr.size() != sd.size())
    throw std::invalid_argument("composition_shift_hr: hr/sd size mismatch");
  double log_factor = 0.0;
  for (Eigen::Index k = 0; k < hr.size(); ++k) {
    if (k == changed_index) continue;
    if (!(hr[k] > 0.0))
      throw std::invalid_argument("composition_shift_hr: nonpositive hazard ratio");
    if (!(sd[k] > 0.0))
      throw std::invalid_argument("composition_shift_hr: nonpositive sd");
    log_factor += log_shift / sd[k] * std::log(hr[k]);
  }
  return std::exp(log_factor);
}

}  // namespace cohortbayes
