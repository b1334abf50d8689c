#pragma once

#include <vector>

#include <Eigen/Dense>

namespace cohortbayes {

// Compositions are handled as fractions that sum to one; the last part is
// the remainder category serving as the logratio reference.

// Renormalize a nonnegative part vector to sum one.
Eigen::VectorXd close_composition(const Eigen::VectorXd& parts);

// Replace zero parts by the half-detection-limit value, then re-close.
Eigen::VectorXd zero_replace(const Eigen::VectorXd& parts, double detection_half);

// Additive logratio image: component k is log(parts_k / parts_last).
Eigen::VectorXd alr(const Eigen::VectorXd& parts);

// Closed-form inverse: parts proportional to (exp(coords), 1), max-shifted so
// large coordinates cannot overflow.
Eigen::VectorXd alr_inverse(const Eigen::VectorXd& coords);

// Divide each column by its sample standard deviation (denominator n-1) over
// the reference row subset; returns the standard deviations used.
Eigen::MatrixXd standardize(const Eigen::MatrixXd& alr_matrix,
                            const std::vector<int>& reference_rows,
                            Eigen::VectorXd* sds);

// Induced hazard factor when every logratio except changed_index rises by
// log_shift: product over k != changed_index of hr_k^(log_shift / sd_k).
// A negative changed_index excludes nothing.
double composition_shift_hr(const Eigen::VectorXd& hr, const Eigen::VectorXd& sd,
                            double log_shift, int changed_index = -1);

}  // namespace cohortbayes
