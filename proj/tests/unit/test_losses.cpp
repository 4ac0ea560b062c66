#include "covthresh/errors.hpp"
#include "covthresh/losses.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace covthresh;
using covthresh::testing::random_orthogonal;
using covthresh::testing::random_spd;

TEST_CASE("operator_loss examples") {
    StreamRng rng({41, 0});
    const auto a = random_spd(4, 0.5, 2, rng);
    CHECK(operator_loss(a, a, 2) == 0.0);
    const auto d = SymmetricMatrix::diagonal(Eigen::Vector3d::Constant(0.3));
    CHECK(operator_loss(d, SymmetricMatrix::zero(3), 2) == doctest::Approx(0.09));
    Eigen::MatrixXd off = Eigen::MatrixXd::Zero(2, 2);
    off(0, 1) = off(1, 0) = 0.2;
    CHECK(operator_loss(SymmetricMatrix(off), SymmetricMatrix::zero(2), 1) == doctest::Approx(0.04));
    CHECK_THROWS_AS(operator_loss(a, SymmetricMatrix::zero(3), 2), InputError);
}

TEST_CASE("bregman_divergence examples") {
    StreamRng rng({42, 0});
    const auto x = random_spd(5, 0.5, 4, rng);
    for (auto phi : {Phi::stein(), Phi::von_neumann(), Phi::squared_frobenius()}) {
        CHECK(std::abs(bregman_divergence(x, x, phi)) <= 1e-9);
    }
    const auto y = random_spd(5, 0.5, 4, rng);
    CHECK(bregman_divergence(x, y, Phi::squared_frobenius()) ==
          doctest::Approx(std::pow(frobenius_norm(x - y), 2)).epsilon(1e-9));
    const Index p = 6;
    const auto two = 2.0 * SymmetricMatrix::identity(p);
    CHECK(bregman_divergence(two, SymmetricMatrix::identity(p), Phi::stein()) ==
          doctest::Approx(p * (1 - std::log(2.0))));
}

TEST_CASE("domain errors name the eigenvalue and kind") {
    const auto sing = SymmetricMatrix::diagonal(Eigen::Vector2d(1.0, 0.0));
    CHECK_THROWS_WITH_AS(bregman_divergence(sing, SymmetricMatrix::identity(2), Phi::stein()),
                         doctest::Contains("stein"), DomainError);
    CHECK_THROWS_WITH_AS(bregman_divergence(SymmetricMatrix::identity(2), sing, Phi::von_neumann()),
                         doctest::Contains("eigenvalue 0"), DomainError);
    const auto tiny = SymmetricMatrix::diagonal(Eigen::Vector2d(1.0, 1e-13));
    CHECK_THROWS_AS(bregman_divergence(tiny, SymmetricMatrix::identity(2), Phi::stein()), DomainError);
    CHECK_THROWS_AS(closed_form_divergence(sing, SymmetricMatrix::identity(2), PhiKind::stein), NotPsdError);
    CHECK_NOTHROW(bregman_divergence(sing, SymmetricMatrix::identity(2), Phi::squared_frobenius()));
}

TEST_CASE("closed_form_divergence examples") {
    StreamRng rng({43, 0});
    const auto x = random_spd(4, 0.5, 4, rng);
    CHECK(std::abs(closed_form_divergence(x, x, PhiKind::stein)) <= 1e-12);
    const auto d = SymmetricMatrix::diagonal(Eigen::Vector2d(std::numbers::e, 1.0));
    CHECK(closed_form_divergence(d, SymmetricMatrix::identity(2), PhiKind::von_neumann) ==
          doctest::Approx(1.0).epsilon(1e-12));
    Eigen::MatrixXd off = Eigen::MatrixXd::Zero(2, 2);
    off(0, 1) = off(1, 0) = 1.0;
    CHECK(closed_form_divergence(SymmetricMatrix(off), SymmetricMatrix::zero(2), PhiKind::squared_frobenius) == 2.0);
}

TEST_CASE("normalized_loss examples") {
    for (Index p : {2, 5, 17}) {
        const auto two = 2.0 * SymmetricMatrix::identity(p);
        CHECK(normalized_loss(two, SymmetricMatrix::identity(p), LossSpec::bregman(PhiKind::stein, true)) ==
              doctest::Approx(1 - std::log(2.0)));
    }
    const auto d = SymmetricMatrix::diagonal(Eigen::Vector3d(1.3, 1, 1));
    auto op = LossSpec::op(2);
    const double raw = normalized_loss(d, SymmetricMatrix::identity(3), op);
    op.normalized = true;
    CHECK(normalized_loss(d, SymmetricMatrix::identity(3), op) == raw);

    const double eps = 0.2;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(4, 4);
    a(0, 3) = a(3, 0) = eps;
    CHECK(normalized_loss(SymmetricMatrix(a), SymmetricMatrix::identity(4), LossSpec::frobenius(true)) ==
          doctest::Approx(2 * eps * eps / 4));
}

TEST_CASE("bregman oracle equivalence on seeded SPD pairs") {
    StreamRng rng({44, 0});
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Index p = 2 + static_cast<Index>(rng.below(7));
        const auto x = random_spd(p, 0.5, 4, rng);
        const auto y = random_spd(p, 0.5, 4, rng);
        for (auto kind : {PhiKind::stein, PhiKind::von_neumann, PhiKind::squared_frobenius}) {
            const Phi phi = kind == PhiKind::stein        ? Phi::stein()
                            : kind == PhiKind::von_neumann ? Phi::von_neumann()
                                                           : Phi::squared_frobenius();
            const double a = bregman_divergence(x, y, phi);
            const double b = closed_form_divergence(x, y, kind);
            worst = std::max(worst, std::abs(a - b) / std::abs(b));
        }
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("Frobenius sandwich on [0.5, 4]") {
    struct Case {
        Phi phi;
        double c1;
        double c2;
    };
    // c1 = min phi''/2 and c2 = max phi''/2 over [0.5, 4].
    const std::vector<Case> cases{
        {Phi::stein(), 1.0 / 32.0, 2.0},
        {Phi::von_neumann(), 1.0 / 8.0, 1.0},
        {Phi::squared_frobenius(), 1.0, 1.0},
    };
    StreamRng rng({45, 0});
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = random_spd(5, 0.5, 4, rng);
        const auto y = random_spd(5, 0.5, 4, rng);
        const double fro2 = std::pow(frobenius_norm(x - y), 2);
        for (const auto& c : cases) {
            const double d = bregman_divergence(x, y, c.phi);
            CHECK(d >= c.c1 * fro2 - 1e-9);
            CHECK(d <= c.c2 * fro2 + 1e-9);
        }
    }
}

TEST_CASE("basis invariance and nonnegativity") {
    StreamRng rng({46, 0});
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_spd(5, 0.5, 4, rng);
        const auto y = random_spd(5, 0.5, 4, rng);
        const Eigen::MatrixXd q = random_orthogonal(5, rng);
        const SymmetricMatrix qx(Eigen::MatrixXd(q * x.dense() * q.transpose()));
        const SymmetricMatrix qy(Eigen::MatrixXd(q * y.dense() * q.transpose()));
        for (auto phi : {Phi::stein(), Phi::von_neumann(), Phi::squared_frobenius()}) {
            const double d = bregman_divergence(x, y, phi);
            CHECK(d >= 0.0);
            CHECK(std::abs(bregman_divergence(qx, qy, phi) - d) <= 1e-9);
        }
    }
}

TEST_CASE("custom phi") {
    auto exp_phi = make_custom_phi({"exp", [](double l) { return std::exp(l); },
                                    [](double l) { return std::exp(l); }, -10.0, 10.0});
    StreamRng rng({47, 0});
    const auto x = random_spd(4, 0.5, 4, rng);
    const auto y = random_spd(4, 0.5, 4, rng);
    const double d = bregman_divergence(x, y, Phi::custom(exp_phi));
    CHECK(d > 0.0);
    CHECK(std::abs(bregman_divergence(x, x, Phi::custom(exp_phi))) <= 1e-9);
    // A custom phi equal to lambda^2 reproduces the squared Frobenius divergence.
    auto square = make_custom_phi({"square", [](double l) { return l * l; }, [](double l) { return 2 * l; }});
    CHECK(bregman_divergence(x, y, Phi::custom(square)) ==
          doctest::Approx(closed_form_divergence(x, y, PhiKind::squared_frobenius)).epsilon(1e-9));

    CHECK_THROWS_AS(make_custom_phi({"concave", [](double l) { return -l * l; },
                                     [](double l) { return -2 * l; }, -1.0, 1.0}),
                    InputError);
    CHECK_THROWS_AS(make_custom_phi({"linear", [](double l) { return l; }, [](double) { return 1.0; }, 0.0, 1.0}),
                    InputError);
    CHECK_THROWS_AS(make_custom_phi({"mismatch", [](double l) { return l * l; },
                                     [](double l) { return 3 * l; }, 0.0, 2.0}),
                    InputError);
}

TEST_CASE("LossSpec names") {
    for (const char* name : {"op1", "op2", "opinf", "fro", "stein", "vn", "bregman-fro"}) {
        CHECK(loss_from_name(name, false).short_name() == name);
    }
    CHECK_THROWS_AS(loss_from_name("op3", false), InputError);
    CHECK_THROWS_AS(LossSpec::op(1.5), InputError);
}
