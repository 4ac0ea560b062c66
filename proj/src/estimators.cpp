#include "covthresh/estimators.hpp"

#include "covthresh/errors.hpp"

#include <cmath>

namespace covthresh {

void EstimatorSpec::validate() const {
    if (!(gamma > 0.0)) throw InputError("EstimatorSpec: gamma must be positive");
    if (rule == ThresholdRule::adaptive_lasso && !(eta >= 1.0)) {
        throw InputError("EstimatorSpec: adaptive-lasso exponent eta must be >= 1");
    }
}

std::string to_string(ThresholdRule rule) {
    switch (rule) {
        case ThresholdRule::hard: return "hard";
        case ThresholdRule::soft: return "soft";
        case ThresholdRule::adaptive_lasso: return "alasso";
    }
    return "?";
}

ThresholdRule rule_from_string(const std::string& name) {
    if (name == "hard") return ThresholdRule::hard;
    if (name == "soft") return ThresholdRule::soft;
    if (name == "alasso" || name == "adaptive-lasso") return ThresholdRule::adaptive_lasso;
    throw InputError("unknown threshold rule '" + name + "' (expected hard, soft or alasso)");
}

std::string EstimatorSpec::label() const {
    std::string out = to_string(rule);
    if (keep_diagonal) out += "+keep-diagonal";
    if (psd_project) out += "+psd-project";
    if (bregman_guard) out += "+bregman-guard";
    return out;
}

EstimatorSpec estimator_from_label(const std::string& label, double gamma) {
    EstimatorSpec spec;
    spec.gamma = gamma;
    std::size_t start = 0;
    bool first = true;
    while (start <= label.size()) {
        const auto pos = label.find('+', start);
        const std::string part = label.substr(start, pos - start);
        if (first) {
            spec.rule = rule_from_string(part);
            first = false;
        } else if (part == "psd-project") {
            spec.psd_project = true;
        } else if (part == "bregman-guard") {
            spec.bregman_guard = true;
        } else if (part == "keep-diagonal") {
            spec.keep_diagonal = true;
        } else {
            throw InputError("unknown estimator correction '" + part + "'");
        }
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return spec;
}

double threshold_level(double gamma, Index p, Index n) {
    return gamma * std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
}

SymmetricMatrix threshold_estimate(const SymmetricMatrix& sigma_star, const EstimatorSpec& spec,
                                   Index n) {
    spec.validate();
    const Index p = sigma_star.dim();
    if (n < 1) throw InputError("threshold_estimate: n must be >= 1");
    if (p < 2) throw InputError("threshold_estimate: dimension must be >= 2");
    const double t = threshold_level(spec.gamma, p, n);

    Eigen::MatrixXd out(p, p);
    for (Index j = 0; j < p; ++j) {
        for (Index i = j; i < p; ++i) {
            const double x = sigma_star(i, j);
            double y = 0.0;
            if (i == j && spec.keep_diagonal) {
                y = x;
            } else {
                switch (spec.rule) {
                    case ThresholdRule::hard:
                        y = std::abs(x) >= t ? x : 0.0;
                        break;
                    case ThresholdRule::soft:
                        y = std::copysign(std::max(std::abs(x) - t, 0.0), x);
                        break;
                    case ThresholdRule::adaptive_lasso:
                        y = x == 0.0 ? 0.0 : x * std::max(1.0 - std::pow(std::abs(t / x), spec.eta), 0.0);
                        break;
                }
            }
            out(i, j) = y;
        }
    }
    return SymmetricMatrix::from_lower(std::move(out));
}

SymmetricMatrix psd_project(const SymmetricMatrix& sigma_hat) {
    return matrix_function(sym_eigen(sigma_hat), [](double l) { return std::max(l, 0.0); });
}

SymmetricMatrix bregman_guard(const SymmetricMatrix& sigma_hat, Index n, GuardReading reading) {
    if (n < 2) throw InputError("bregman_guard: n must be >= 2 so that log n > 0");
    const Index p = sigma_hat.dim();
    const double window = std::max(std::log(static_cast<double>(n)), std::log(static_cast<double>(p)));
    const Eigen::VectorXd ev = sym_eigenvalues(sigma_hat);
    const double lmax = ev(0);
    const double lmin = ev(p - 1);
    const bool admissible = reading == GuardReading::both_extremes
                                ? (1.0 / window <= lmin && lmax <= window)
                                : (1.0 / window <= lmin && lmin <= window);
    return admissible ? sigma_hat : SymmetricMatrix::identity(p);
}

SymmetricMatrix apply_estimator(const SymmetricMatrix& sigma_star, const EstimatorSpec& spec,
                                Index n) {
    SymmetricMatrix est = threshold_estimate(sigma_star, spec, n);
    if (spec.psd_project) est = psd_project(est);
    if (spec.bregman_guard) est = bregman_guard(est, n, spec.guard_reading);
    return est;
}

}  // namespace covthresh
