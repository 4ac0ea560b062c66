#include "covthresh/errors.hpp"
#include "covthresh/matrix.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace covthresh;
using covthresh::testing::random_symmetric;

TEST_CASE("SymmetricMatrix construction") {
    SUBCASE("small asymmetry is averaged away") {
        Eigen::MatrixXd a(2, 2);
        a << 1.0, 2.0, 2.0 + 1e-14, 1.0;
        const SymmetricMatrix s(a);
        CHECK(s(0, 1) == s(1, 0));
    }
    SUBCASE("large asymmetry is rejected") {
        Eigen::MatrixXd a(2, 2);
        a << 1.0, 2.0, 2.1, 1.0;
        CHECK_THROWS_AS(SymmetricMatrix{a}, InputError);
    }
    SUBCASE("non-square, empty and non-finite input") {
        CHECK_THROWS_AS(SymmetricMatrix{Eigen::MatrixXd(2, 3)}, InputError);
        CHECK_THROWS_AS(SymmetricMatrix{Eigen::MatrixXd(0, 0)}, InputError);
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
        a(0, 0) = std::nan("");
        CHECK_THROWS_AS(SymmetricMatrix{a}, InputError);
    }
    SUBCASE("from_lower mirrors exactly") {
        Eigen::MatrixXd a(2, 2);
        a << 1.0, 99.0, 3.0, 4.0;
        const auto s = SymmetricMatrix::from_lower(a);
        CHECK(s(0, 1) == 3.0);
    }
}

TEST_CASE("sym_eigen examples") {
    const auto e3 = sym_eigen(SymmetricMatrix::identity(3));
    for (Index i = 0; i < 3; ++i) CHECK(e3.eigenvalues(i) == doctest::Approx(1.0));

    const std::vector<double> entries{2, 1, 1, 2};
    const auto e2 = sym_eigen(SymmetricMatrix::from_row_major(2, entries));
    CHECK(e2.eigenvalues(0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(e2.eigenvalues(1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sym_eigen reconstruction and orthonormality") {
    StreamRng rng({11, 0});
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_symmetric(6, rng);
        const auto eig = sym_eigen(a);
        for (Index i = 1; i < 6; ++i) CHECK(eig.eigenvalues(i - 1) >= eig.eigenvalues(i));
        const Eigen::MatrixXd rebuilt =
            eig.eigenvectors * eig.eigenvalues.asDiagonal() * eig.eigenvectors.transpose();
        CHECK((rebuilt - a.dense()).norm() <= 1e-10 * a.dense().norm());
        const Eigen::MatrixXd gram = eig.eigenvectors.transpose() * eig.eigenvectors;
        CHECK(covthresh::testing::max_abs(gram - Eigen::MatrixXd::Identity(6, 6)) <= 1e-10);
        CHECK((sym_eigenvalues(a) - eig.eigenvalues).cwiseAbs().maxCoeff() <= 1e-12 * (1 + a.dense().norm()));
    }
}

TEST_CASE("operator_norm examples") {
    CHECK(operator_norm(SymmetricMatrix::diagonal(Eigen::Vector2d(3, -4)), 2) == doctest::Approx(4.0));
    const std::vector<double> e{1, 2, 2, 1};
    const auto a = SymmetricMatrix::from_row_major(2, e);
    CHECK(operator_norm(a, 1) == 3.0);
    const auto id = SymmetricMatrix::identity(5);
    CHECK(operator_norm(id, 1) == 1.0);
    CHECK(operator_norm(id, 2) == doctest::Approx(1.0));
    CHECK(operator_norm(id, kInfNorm) == 1.0);
    CHECK_THROWS_AS(operator_norm(id, 1.5), InputError);
}

TEST_CASE("operator_norm_bound examples") {
    const std::vector<double> e{1, 2, 2, 1};
    CHECK(operator_norm_bound(SymmetricMatrix::identity(4), 1.5) == doctest::Approx(1.0));
    CHECK(operator_norm_bound(SymmetricMatrix::from_row_major(2, e), 1.5) == doctest::Approx(3.0));
    CHECK(operator_norm_bound(SymmetricMatrix::diagonal(Eigen::VectorXd::Constant(1, 5.0)), 7) ==
          doctest::Approx(5.0));
    CHECK_THROWS_AS(operator_norm_bound(SymmetricMatrix::identity(2), 0.5), InputError);
}

TEST_CASE("frobenius_norm examples") {
    CHECK(frobenius_norm(SymmetricMatrix::zero(3)) == 0.0);
    CHECK(frobenius_norm(SymmetricMatrix::identity(4)) == doctest::Approx(2.0));
    const std::vector<double> e{0, 3, 3, 0};
    CHECK(frobenius_norm(SymmetricMatrix::from_row_major(2, e)) == doctest::Approx(std::sqrt(18.0)));
}

TEST_CASE("matrix_function examples") {
    const std::vector<double> e{2, 1, 1, 2};
    const auto a = SymmetricMatrix::from_row_major(2, e);
    CHECK(covthresh::testing::max_abs(matrix_function(a, [](double x) { return x; }).dense() - a.dense()) <= 1e-10);
    CHECK(covthresh::testing::max_abs(matrix_function(a, [](double x) { return x * x; }).dense() -
                                      a.dense() * a.dense()) <= 1e-10);
    const auto d = SymmetricMatrix::diagonal(Eigen::Vector2d(1.0, std::numbers::e));
    const auto lg = matrix_function(d, [](double x) { return std::log(x); });
    CHECK(lg(0, 0) == doctest::Approx(0.0));
    CHECK(lg(1, 1) == doctest::Approx(1.0));
    const auto neg = SymmetricMatrix::diagonal(Eigen::Vector2d(1.0, -0.5));
    CHECK_THROWS_WITH_AS(matrix_function(neg, [](double x) { return std::log(x); }),
                         doctest::Contains("-0.5"), DomainError);
}

TEST_CASE("matrix_core properties on random instances") {
    StreamRng rng({12, 0});
    for (int trial = 0; trial < 50; ++trial) {
        const Index p = 2 + static_cast<Index>(rng.below(19));
        const auto a = random_symmetric(p, rng);
        const double n1 = operator_norm(a, 1);
        CHECK(n1 == operator_norm(a, kInfNorm));
        CHECK(operator_norm(a, 2) <= n1 + 1e-12 * (1 + n1));
        const double fro2 = std::pow(frobenius_norm(a), 2);
        CHECK(std::abs(fro2 - sym_eigenvalues(a).squaredNorm()) <= 1e-10 * fro2);
        CHECK(covthresh::testing::max_abs(matrix_function(a, [](double x) { return x; }).dense() - a.dense()) <=
              1e-10 * (1 + n1));
    }
}

TEST_CASE("spectral norm agrees with power iteration on 20x20") {
    StreamRng rng({13, 0});
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_symmetric(20, rng);
        // Power iteration on A^2 converges to the largest |lambda|.
        const Eigen::MatrixXd a2 = a.dense() * a.dense();
        Eigen::VectorXd v = Eigen::VectorXd::Ones(20);
        double estimate = 0.0;
        for (int it = 0; it < 20000; ++it) {
            Eigen::VectorXd w = a2 * v;
            estimate = std::sqrt(w.norm() / v.norm());
            v = w.normalized();
        }
        CHECK(std::abs(estimate - operator_norm(a, 2)) <= 1e-8 * operator_norm(a, 2));
    }
}

TEST_CASE("symmetric csv round trip") {
    StreamRng rng({14, 0});
    const auto a = random_symmetric(5, rng);
    const auto path = std::filesystem::temp_directory_path() / "covthresh_matrix_rt.csv";
    save_symmetric_csv(a, path.string());
    CHECK(load_symmetric_csv(path.string()) == a);
    std::filesystem::remove(path);
}
