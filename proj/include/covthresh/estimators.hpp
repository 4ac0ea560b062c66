#pragma once

#include "covthresh/matrix.hpp"

#include <string>

namespace covthresh {

enum class ThresholdRule { hard, soft, adaptive_lasso };

/// How the eigenvalue guard reads its admissibility window [1/L, L],
/// L = max(log n, log p).
enum class GuardReading {
    both_extremes,  ///< 1/L <= lambda_min and lambda_max <= L (default)
    min_only,       ///< 1/L <= lambda_min <= L, exactly as displayed
};

struct EstimatorSpec {
    ThresholdRule rule = ThresholdRule::hard;
    double gamma = 2.0;  ///< threshold constant: t = gamma sqrt(log p / n)
    double eta = 3.0;    ///< adaptive-lasso exponent, >= 1
    bool psd_project = false;
    bool bregman_guard = false;
    bool keep_diagonal = false;  ///< off: the rule is applied to every entry
    GuardReading guard_reading = GuardReading::both_extremes;

    void validate() const;
    /// Compact label, e.g. "hard", "soft+psd-project", "alasso+bregman-guard".
    std::string label() const;
    bool operator==(const EstimatorSpec&) const = default;
};

std::string to_string(ThresholdRule rule);
ThresholdRule rule_from_string(const std::string& name);
EstimatorSpec estimator_from_label(const std::string& label, double gamma);

/// gamma sqrt(log p / n).
double threshold_level(double gamma, Index p, Index n);

/// Entrywise rule on the sample covariance; corrections are not applied.
SymmetricMatrix threshold_estimate(const SymmetricMatrix& sigma_star, const EstimatorSpec& spec,
                                   Index n);

/// sum_i max(lambda_i, 0) v_i v_i^T, the Frobenius projection onto the PSD cone.
SymmetricMatrix psd_project(const SymmetricMatrix& sigma_hat);

/// Returns sigma_hat when its spectrum passes the [1/L, L] window and I_p
/// otherwise. Requires n >= 2.
SymmetricMatrix bregman_guard(const SymmetricMatrix& sigma_hat, Index n,
                              GuardReading reading = GuardReading::both_extremes);

/// threshold_estimate followed by the enabled corrections (projection first).
SymmetricMatrix apply_estimator(const SymmetricMatrix& sigma_star, const EstimatorSpec& spec,
                                Index n);

}  // namespace covthresh
