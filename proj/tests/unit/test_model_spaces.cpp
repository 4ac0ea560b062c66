#include "covthresh/errors.hpp"
#include "covthresh/model_spaces.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

using namespace covthresh;

TEST_CASE("weak_lq_radius examples") {
    const std::vector<double> a{1, 0, 0};
    CHECK(weak_lq_radius(a, 0.5) == 1.0);
    const std::vector<double> z{0, 0, 0};
    CHECK(weak_lq_radius(z, 0.5) == 0.0);
    CHECK(weak_lq_radius(z, 0.0) == 0.0);
    const std::vector<double> b{1, 1};
    CHECK(weak_lq_radius(b, 0.5) == 2.0);
    const std::vector<double> c{0.3, 0, -0.2};
    CHECK(weak_lq_radius(c, 0.0) == 2.0);
}

TEST_CASE("weak_lq_radius scales by t^q") {
    StreamRng rng({21, 0});
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(10), scaled(10);
        for (auto& x : v) x = rng.normal();
        const double t = 1.0 + 3.0 * rng.uniform();
        for (std::size_t i = 0; i < v.size(); ++i) scaled[i] = t * v[i];
        const double q = 0.1 + 0.8 * rng.uniform();
        CHECK(weak_lq_radius(scaled, q) == doctest::Approx(std::pow(t, q) * weak_lq_radius(v, q)).epsilon(1e-12));
    }
}

TEST_CASE("class_membership examples") {
    CHECK(class_membership(SymmetricMatrix::identity(5), {0.5, 0.1, SparsityKind::weak}).member);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(4, 4);
    a(1, 3) = a(3, 1) = 1.0;
    const auto m = class_membership(SymmetricMatrix(a), {0.5, 0.5, SparsityKind::weak});
    CHECK_FALSE(m.member);
    REQUIRE(m.violating_column.has_value());
    CHECK(*m.violating_column == 1);
    CHECK(m.max_column_radius == 1.0);
}

TEST_CASE("build_config examples") {
    CHECK(build_config(9, 100, 0.0, 4.0, 0.1).r == 4);
    CHECK(build_config(100, 20, 0.0, 2.0, 0.1).epsilon == doctest::Approx(0.1 * std::sqrt(std::log(100.0) / 20)));
    CHECK(build_config(100, 20, 0.0, 2.0, 0.1).epsilon == doctest::Approx(0.04800).epsilon(1e-4));
    CHECK(build_config(50, 100, 0.0, 4.0, 0.1).k == 1);
    CHECK(build_config(50, 100, 0.0, 1.5, 0.1).k == 0);
    CHECK_THROWS_AS(build_config(50, 10, 0.0, 40.0, 0.5), ConfigError);
    CHECK_THROWS_AS(build_config(1, 10, 0.0, 4.0, 0.1), InputError);
    const auto with_m = build_config(50, 100, 0.0, 4.0, 0.1, 10.0);
    REQUIRE(with_m.condc_holds.has_value());
    CHECK(*with_m.condc_holds == (4.0 <= 10.0 * std::sqrt(100.0) * std::pow(std::log(50.0), -1.5)));
}

TEST_CASE("materialize_sigma examples") {
    const auto cfg = build_config(8, 64, 0.0, 4.0, 0.1);
    ThetaIndex zero{std::vector<std::uint8_t>(4, 0), {{4}, {5}, {6}, {7}}};
    CHECK(materialize_sigma(cfg, zero) == SymmetricMatrix::identity(8));

    const auto small = build_config(4, 64, 0.0, 4.0, 0.1);
    REQUIRE(small.r == 2);
    ThetaIndex t{{1, 0}, {{3}, {2}}};
    const auto s = materialize_sigma(small, t);
    Eigen::MatrixXd expect = Eigen::MatrixXd::Identity(4, 4);
    expect(0, 3) = expect(3, 0) = small.epsilon;
    CHECK(s.dense() == expect);

    ThetaIndex bad{{1, 0}, {{1}, {2}}};
    CHECK_THROWS_AS(materialize_sigma(small, bad), StructureError);
}

TEST_CASE("enumerate_theta at p=8, k=1") {
    const auto cfg = build_config(8, 64, 0.0, 4.0, 0.1);
    REQUIRE(cfg.k == 1);
    const auto all = enumerate_theta(cfg);
    CHECK(std::to_string(all.size()) == theta_count(cfg));
    std::set<std::pair<std::vector<std::uint8_t>, std::vector<std::vector<Index>>>> seen;
    for (const auto& th : all) {
        seen.insert({th.gamma, th.lambda});
        std::vector<int> usage(4, 0);
        for (const auto& row : th.lambda) {
            for (Index j : row) ++usage[static_cast<std::size_t>(j - 4)];
        }
        for (int u : usage) CHECK(u <= 2);
        const auto s = materialize_sigma(cfg, th);
        CHECK(operator_norm(s, 1) <= 1 + 2 * cfg.k * cfg.epsilon + 1e-15);
        CHECK(sym_eigenvalues(s).minCoeff() > 0.0);
        CHECK(class_membership(s, {cfg.q, cfg.c, SparsityKind::weak}).member);
        CHECK(class_membership(s, {cfg.q, cfg.c, SparsityKind::strong}).member);
    }
    CHECK(seen.size() == all.size());
    CHECK(enumerate_theta(cfg) == all);
}

TEST_CASE("theta count matches brute force on small cases") {
    // 4 columns, 4 rows, k=1: 4^4 tuples minus those with a column used 3+ times.
    // Tuples with some column used >= 3 times: 4 * (C(4,3)*3 + 1) = 52.
    CHECK(count_row_tuples(4, 4, 1) == "204");
    CHECK(count_row_tuples(5, 3, 0) == "1");
    for (Index k = 1; k <= 2; ++k) {
        for (Index r = 2; r <= 4; ++r) {
            LeastFavorableConfig cfg;
            cfg.p = 2 * r;
            cfg.r = r;
            cfg.k = k;
            if (k > r) continue;
            std::uint64_t visited = 0;
            for_each_row_tuple(cfg, r, [&](const auto&, const auto&) { ++visited; });
            CHECK(std::to_string(visited) == count_row_tuples(r, r, k));
        }
    }
}

TEST_CASE("enumerate_theta budget and k = 0") {
    const auto cfg = build_config(8, 64, 0.0, 4.0, 0.1);
    try {
        enumerate_theta(cfg, 10);
        FAIL("expected BudgetError");
    } catch (const BudgetError& e) {
        CHECK(e.count() == theta_count(cfg));
        CHECK(e.exact());
    }
    const auto k0 = build_config(8, 64, 0.0, 1.0, 0.1);
    REQUIRE(k0.k == 0);
    const auto all = enumerate_theta(k0);
    CHECK(all.size() == 16);
    for (const auto& th : all) CHECK(materialize_sigma(k0, th) == SymmetricMatrix::identity(8));
}

TEST_CASE("sample_theta is deterministic, valid and uniform") {
    const auto cfg = build_config(6, 64, 0.0, 4.0, 0.1);
    REQUIRE(cfg.r == 3);
    CHECK(sample_theta(cfg, {5, 1}) == sample_theta(cfg, {5, 1}));
    const auto all = enumerate_theta(cfg);
    std::map<std::pair<std::vector<std::uint8_t>, std::vector<std::vector<Index>>>, int> hits;
    const int draws = 200 * static_cast<int>(all.size());
    for (int i = 0; i < draws; ++i) {
        const auto th = sample_theta(cfg, RngSeed{77, 0}.child(static_cast<std::uint64_t>(i)));
        validate_theta(cfg, th);
        ++hits[{th.gamma, th.lambda}];
    }
    CHECK(hits.size() == all.size());
    // Chi-square goodness of fit against the uniform law.
    double chi2 = 0.0;
    for (const auto& [key, h] : hits) chi2 += (h - 200.0) * (h - 200.0) / 200.0;
    const double dof = static_cast<double>(all.size() - 1);
    CHECK(chi2 < dof + 5.0 * std::sqrt(2.0 * dof));
}
