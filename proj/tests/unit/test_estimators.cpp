#include "covthresh/errors.hpp"
#include "covthresh/estimators.hpp"
#include "covthresh/sampling.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace covthresh;
using covthresh::testing::max_abs;

namespace {

/// Spec with gamma chosen so that t = gamma sqrt(log p / n) equals `t`.
EstimatorSpec with_threshold(ThresholdRule rule, double t, Index p, Index n) {
    EstimatorSpec spec;
    spec.rule = rule;
    spec.gamma = t / std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
    return spec;
}

}  // namespace

TEST_CASE("threshold_estimate examples") {
    CHECK(threshold_estimate(SymmetricMatrix::identity(5), EstimatorSpec{}, 400) == SymmetricMatrix::identity(5));
    CHECK(threshold_level(2.0, 100, 400) == doctest::Approx(0.21460).epsilon(1e-4));

    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
    a(0, 1) = a(1, 0) = 0.05;
    a(0, 2) = a(2, 0) = -0.05;
    const SymmetricMatrix s(a);
    const auto hard01 = threshold_estimate(s, with_threshold(ThresholdRule::hard, 0.1, 3, 50), 50);
    CHECK(hard01(0, 1) == 0.0);
    const auto hard001 = threshold_estimate(s, with_threshold(ThresholdRule::hard, 0.01, 3, 50), 50);
    CHECK(hard001(0, 2) == -0.05);
}

TEST_CASE("diagonal is thresholded unless keep_diagonal") {
    const auto d = SymmetricMatrix::diagonal(Eigen::Vector3d(0.01, 1, 1));
    auto spec = with_threshold(ThresholdRule::hard, 0.1, 3, 50);
    CHECK(threshold_estimate(d, spec, 50)(0, 0) == 0.0);
    spec.keep_diagonal = true;
    CHECK(threshold_estimate(d, spec, 50)(0, 0) == 0.01);
}

TEST_CASE("rule properties on random sample covariances") {
    StreamRng rng({31, 0});
    for (int trial = 0; trial < 30; ++trial) {
        const auto s = mle_covariance(sample_gaussian(SymmetricMatrix::identity(8), 20, {31, static_cast<std::uint64_t>(trial)}));
        const double t = 0.05 + 0.4 * rng.uniform();
        for (auto rule : {ThresholdRule::hard, ThresholdRule::soft, ThresholdRule::adaptive_lasso}) {
            const auto spec = with_threshold(rule, t, 8, 20);
            const auto out = threshold_estimate(s, spec, 20);
            for (Index i = 0; i < 8; ++i) {
                for (Index j = 0; j < 8; ++j) {
                    const double x = s(i, j);
                    const double y = out(i, j);
                    CHECK(y == out(j, i));
                    if (rule == ThresholdRule::hard) {
                        CHECK((y == 0.0 || y == x));
                    } else {
                        CHECK(std::abs(y) <= std::abs(x));
                    }
                    if (y != 0.0 || rule == ThresholdRule::soft) CHECK(std::abs(y - x) <= t + 1e-15);
                }
            }
            if (rule == ThresholdRule::hard) CHECK(threshold_estimate(out, spec, 20) == out);
        }
    }
}

TEST_CASE("EstimatorSpec validation and labels") {
    EstimatorSpec bad;
    bad.gamma = 0.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    EstimatorSpec alasso;
    alasso.rule = ThresholdRule::adaptive_lasso;
    alasso.eta = 0.5;
    CHECK_THROWS_AS(alasso.validate(), InputError);

    EstimatorSpec spec;
    spec.rule = ThresholdRule::soft;
    spec.psd_project = true;
    spec.bregman_guard = true;
    CHECK(spec.label() == "soft+psd-project+bregman-guard");
    CHECK(estimator_from_label(spec.label(), spec.gamma) == spec);
    CHECK_THROWS_AS(estimator_from_label("hard+sparkle", 2.0), InputError);
}

TEST_CASE("psd_project examples and contract") {
    const auto p = psd_project(SymmetricMatrix::diagonal(Eigen::Vector2d(2, -1)));
    CHECK(max_abs(p.dense() - Eigen::Vector2d(2, 0).asDiagonal().toDenseMatrix()) <= 1e-14);

    StreamRng rng({32, 0});
    for (int trial = 0; trial < 100; ++trial) {
        const auto psd = covthresh::testing::random_spd(6, 0.0, 3.0, rng);
        CHECK(max_abs(psd_project(psd).dense() - psd.dense()) <= 1e-10);

        const auto hat = covthresh::testing::random_symmetric(6, rng);
        const auto plus = psd_project(hat);
        CHECK(sym_eigenvalues(plus).minCoeff() >= -1e-12 * operator_norm(hat, 2));
        CHECK(max_abs(psd_project(plus).dense() - plus.dense()) <= 1e-10);
        CHECK(operator_norm(plus - psd, 2) <= 2 * operator_norm(hat - psd, 2) + 1e-10);
        CHECK(frobenius_norm(plus - psd) <= frobenius_norm(hat - psd) + 1e-10);
    }
}

TEST_CASE("bregman_guard examples") {
    CHECK(bregman_guard(SymmetricMatrix::identity(50), 100) == SymmetricMatrix::identity(50));
    CHECK(bregman_guard(SymmetricMatrix::diagonal(Eigen::Vector3d(1, 1, -0.1)), 100) ==
          SymmetricMatrix::identity(3));
    const double window = std::max(std::log(100.0), std::log(3.0));
    const auto big = (2 * window) * SymmetricMatrix::identity(3);
    CHECK(bregman_guard(big, 100) == SymmetricMatrix::identity(3));
    CHECK(bregman_guard(big, 100, GuardReading::min_only) == SymmetricMatrix::identity(3));
    const auto wide = SymmetricMatrix::diagonal(Eigen::Vector3d(2 * window, 1, 1));
    CHECK(bregman_guard(wide, 100) == SymmetricMatrix::identity(3));
    CHECK(bregman_guard(wide, 100, GuardReading::min_only) == wide);
    CHECK_THROWS_AS(bregman_guard(SymmetricMatrix::identity(3), 1), InputError);
}

TEST_CASE("event A_ij frequency exceeds 95%") {
    // Banded truth with entries both above and below the threshold scale.
    const Index p = 50;
    const Index n = 200;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(p, p);
    for (Index i = 0; i + 1 < p; ++i) a(i, i + 1) = a(i + 1, i) = (i % 2 == 0) ? 0.3 : 0.02;
    const SymmetricMatrix sigma(a);
    const GaussianSampler sampler(sigma);
    EstimatorSpec spec;
    const double t = threshold_level(spec.gamma, p, n);
    double hits = 0.0;
    double total = 0.0;
    for (std::uint64_t rep = 0; rep < 40; ++rep) {
        const auto est = threshold_estimate(mle_covariance(sampler.draw(n, RngSeed{33, 0}.child(rep))), spec, n);
        for (Index i = 0; i < p; ++i) {
            for (Index j = 0; j < p; ++j) {
                const double bound = 4 * std::min(std::abs(a(i, j)), t);
                hits += std::abs(est(i, j) - a(i, j)) <= bound ? 1.0 : 0.0;
                total += 1.0;
            }
        }
    }
    CHECK(hits / total > 0.95);
}
