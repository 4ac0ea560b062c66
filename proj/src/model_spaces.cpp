#include "covthresh/model_spaces.hpp"

#include "covthresh/errors.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace covthresh {

using BigInt = boost::multiprecision::cpp_int;

void SparsityClassSpec::validate() const {
    if (!(q >= 0.0 && q < 1.0)) throw InputError("SparsityClassSpec: q must lie in [0, 1)");
    if (!(radius > 0.0)) throw InputError("SparsityClassSpec: radius must be positive");
}

double weak_lq_radius(std::span<const double> v, double q) {
    if (!(q >= 0.0 && q < 1.0)) throw InputError("weak_lq_radius: q must lie in [0, 1)");
    std::vector<double> mags;
    mags.reserve(v.size());
    for (double x : v) {
        if (x != 0.0) mags.push_back(std::abs(x));
    }
    if (q == 0.0) return static_cast<double>(mags.size());
    std::sort(mags.begin(), mags.end(), std::greater<>());
    double radius = 0.0;
    for (std::size_t k = 0; k < mags.size(); ++k) {
        radius = std::max(radius, static_cast<double>(k + 1) * std::pow(mags[k], q));
    }
    return radius;
}

double strong_lq_radius(std::span<const double> v, double q) {
    if (!(q >= 0.0 && q < 1.0)) throw InputError("strong_lq_radius: q must lie in [0, 1)");
    double total = 0.0;
    for (double x : v) {
        if (x == 0.0) continue;
        total += q == 0.0 ? 1.0 : std::pow(std::abs(x), q);
    }
    return total;
}

Membership class_membership(const SymmetricMatrix& s, const SparsityClassSpec& spec) {
    spec.validate();
    const Index p = s.dim();
    if (p < 2) throw InputError("class_membership: dimension must be >= 2");
    Membership out;
    std::vector<double> column(static_cast<std::size_t>(p - 1));
    for (Index j = 0; j < p; ++j) {
        std::size_t pos = 0;
        for (Index i = 0; i < p; ++i) {
            if (i != j) column[pos++] = s(i, j);
        }
        const double radius = spec.kind == SparsityKind::weak ? weak_lq_radius(column, spec.q)
                                                              : strong_lq_radius(column, spec.q);
        out.max_column_radius = std::max(out.max_column_radius, radius);
        if (out.member && radius > spec.radius * (1.0 + 1e-12)) {
            out.member = false;
            out.violating_column = j;
        }
    }
    return out;
}

LeastFavorableConfig build_config(Index p, Index n, double q, double c, double upsilon,
                                  std::optional<double> condc_m) {
    if (p < 2) throw InputError("build_config: p must be >= 2");
    if (n < 1) throw InputError("build_config: n must be >= 1");
    if (!(q >= 0.0 && q < 1.0)) throw InputError("build_config: q must lie in [0, 1)");
    if (!(c > 0.0)) throw InputError("build_config: c must be positive");
    if (!(upsilon > 0.0)) throw InputError("build_config: upsilon must be positive");

    LeastFavorableConfig cfg;
    cfg.p = p;
    cfg.n = n;
    cfg.q = q;
    cfg.c = c;
    cfg.upsilon = upsilon;
    cfg.r = p / 2;
    const double log_p = std::log(static_cast<double>(p));
    cfg.epsilon = upsilon * std::sqrt(log_p / static_cast<double>(n));
    const double half_count = 0.5 * c * std::pow(cfg.epsilon, -q);
    cfg.k = std::max<Index>(static_cast<Index>(std::ceil(half_count)) - 1, 0);

    const double product = 2.0 * static_cast<double>(cfg.k) * cfg.epsilon;
    if (!(product < 1.0 / 3.0)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "build_config: 2*k*eps = 2*" << cfg.k << "*" << cfg.epsilon << " = " << product
            << " is not below 1/3; family members would not be diagonally dominant";
        throw ConfigError(msg.str());
    }
    if (cfg.k > cfg.r) {
        throw ConfigError("build_config: k = " + std::to_string(cfg.k) +
                          " exceeds the column block size r = " + std::to_string(cfg.r));
    }
    if (condc_m) {
        cfg.condc_m = condc_m;
        cfg.condc_holds = c <= *condc_m * std::pow(static_cast<double>(n), (1.0 - q) / 2.0) *
                                   std::pow(log_p, -(3.0 - q) / 2.0);
    }
    return cfg;
}

UpsilonCheck check_upsilon(const LeastFavorableConfig& cfg, double m, double tau, double beta) {
    if (!(m > 0.0) || !(tau > 1.0) || !(beta > 1.0)) {
        throw InputError("check_upsilon: need M > 0, tau > 1, beta > 1");
    }
    UpsilonCheck out;
    out.dominance_cap = std::pow(std::min(1.0 / 3.0, tau - 1.0) / m, 1.0 / (1.0 - cfg.q));
    out.beta_cap = std::sqrt((beta - 1.0) / (54.0 * beta));
    out.below_dominance_cap = cfg.upsilon < out.dominance_cap;
    out.below_beta_cap = cfg.upsilon < out.beta_cap;
    return out;
}

void validate_theta(const LeastFavorableConfig& cfg, const ThetaIndex& theta) {
    const auto r = static_cast<std::size_t>(cfg.r);
    if (theta.gamma.size() != r) {
        throw StructureError("theta: gamma has " + std::to_string(theta.gamma.size()) +
                             " bits, expected r = " + std::to_string(r));
    }
    if (theta.lambda.size() != r) {
        throw StructureError("theta: lambda has " + std::to_string(theta.lambda.size()) +
                             " rows, expected r = " + std::to_string(r));
    }
    std::vector<int> usage(r, 0);
    for (std::size_t m = 0; m < r; ++m) {
        if (theta.gamma[m] > 1) throw StructureError("theta: gamma entries must be 0 or 1");
        const auto& row = theta.lambda[m];
        if (static_cast<Index>(row.size()) != cfg.k) {
            throw StructureError("theta: row " + std::to_string(m) + " has " +
                                 std::to_string(row.size()) + " indices, expected k = " +
                                 std::to_string(cfg.k));
        }
        for (std::size_t t = 0; t < row.size(); ++t) {
            if (row[t] < cfg.first_column() || row[t] >= cfg.p) {
                throw StructureError("theta: row " + std::to_string(m) + " column " +
                                     std::to_string(row[t]) + " outside [" +
                                     std::to_string(cfg.first_column()) + ", " +
                                     std::to_string(cfg.p) + ")");
            }
            if (t > 0 && row[t] <= row[t - 1]) {
                throw StructureError("theta: row " + std::to_string(m) +
                                     " indices must be strictly increasing");
            }
            ++usage[static_cast<std::size_t>(row[t] - cfg.first_column())];
        }
    }
    for (std::size_t col = 0; col < r; ++col) {
        if (usage[col] > 2 * cfg.k) {
            throw StructureError("theta: column " + std::to_string(cfg.first_column() + col) +
                                 " used " + std::to_string(usage[col]) +
                                 " times, exceeding the column-sum limit 2k = " +
                                 std::to_string(2 * cfg.k));
        }
    }
}

SymmetricMatrix materialize_sigma(const LeastFavorableConfig& cfg, const ThetaIndex& theta) {
    validate_theta(cfg, theta);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(cfg.p, cfg.p);
    for (Index m = 0; m < cfg.r; ++m) {
        if (!theta.gamma[static_cast<std::size_t>(m)]) continue;
        for (Index j : theta.lambda[static_cast<std::size_t>(m)]) {
            a(m, j) = cfg.epsilon;
            a(j, m) = cfg.epsilon;
        }
    }
    return SymmetricMatrix(a);
}

std::vector<RowPattern> k_subsets(Index first, Index count, Index k) {
    std::vector<RowPattern> out;
    if (k < 0 || k > count) return out;
    RowPattern idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), Index{0});
    while (true) {
        RowPattern pattern(idx);
        for (auto& x : pattern) x += first;
        out.push_back(std::move(pattern));
        Index pos = k - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == count - k + pos) --pos;
        if (pos < 0) break;
        ++idx[static_cast<std::size_t>(pos)];
        for (Index t = pos + 1; t < k; ++t) {
            idx[static_cast<std::size_t>(t)] = idx[static_cast<std::size_t>(t - 1)] + 1;
        }
    }
    return out;
}

namespace {

BigInt binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    BigInt out = 1;
    for (int i = 1; i <= k; ++i) {
        out *= n - k + i;
        out /= i;
    }
    return out;
}

BigInt count_row_tuples_big(Index columns, Index rows, Index k) {
    if (k == 0) return 1;
    if (k > columns) return 0;
    constexpr std::size_t kStateLimit = 200'000;
    const int levels = static_cast<int>(2 * k + 1);
    // Histogram of columns by current usage; column identities do not matter.
    std::map<std::vector<int>, BigInt> states;
    std::vector<int> start(static_cast<std::size_t>(levels), 0);
    start[0] = static_cast<int>(columns);
    states[start] = 1;
    for (Index row = 0; row < rows; ++row) {
        std::map<std::vector<int>, BigInt> next;
        for (const auto& [hist, ways] : states) {
            // Distribute k picks over levels 0..2k-1.
            std::vector<int> picks(static_cast<std::size_t>(levels - 1), 0);
            std::function<void(int, int, BigInt)> assign = [&](int level, int left, BigInt mult) {
                if (level == levels - 1) {
                    if (left != 0) return;
                    std::vector<int> h = hist;
                    for (int l = 0; l < levels - 1; ++l) {
                        h[static_cast<std::size_t>(l)] -= picks[static_cast<std::size_t>(l)];
                        h[static_cast<std::size_t>(l + 1)] += picks[static_cast<std::size_t>(l)];
                    }
                    next[h] += ways * mult;
                    return;
                }
                const int avail = hist[static_cast<std::size_t>(level)];
                for (int a = 0; a <= std::min(avail, left); ++a) {
                    picks[static_cast<std::size_t>(level)] = a;
                    assign(level + 1, left - a, mult * binomial(avail, a));
                }
                picks[static_cast<std::size_t>(level)] = 0;
            };
            assign(0, static_cast<int>(k), BigInt(1));
        }
        states = std::move(next);
        if (states.size() > kStateLimit) {
            throw BudgetError("count_row_tuples: counting state space exceeds " +
                                  std::to_string(kStateLimit) + " histograms",
                              "unknown", false);
        }
    }
    BigInt total = 0;
    for (const auto& [hist, ways] : states) total += ways;
    return total;
}

}  // namespace

std::string count_row_tuples(Index columns, Index rows, Index k) {
    return count_row_tuples_big(columns, rows, k).str();
}

std::string theta_count(const LeastFavorableConfig& cfg) {
    BigInt total = count_row_tuples_big(cfg.r, cfg.r, cfg.k);
    total <<= static_cast<unsigned>(cfg.r);
    return total.str();
}

void for_each_row_tuple(const LeastFavorableConfig& cfg, Index rows,
                        const std::function<void(const std::vector<RowPattern>&,
                                                 const std::vector<int>&)>& visit) {
    const auto patterns = k_subsets(cfg.first_column(), cfg.r, cfg.k);
    std::vector<RowPattern> tuple;
    tuple.reserve(static_cast<std::size_t>(rows));
    std::vector<int> usage(static_cast<std::size_t>(cfg.r), 0);
    const int cap = static_cast<int>(2 * cfg.k);
    std::function<void()> recurse = [&] {
        if (static_cast<Index>(tuple.size()) == rows) {
            visit(tuple, usage);
            return;
        }
        for (const auto& pattern : patterns) {
            bool fits = true;
            for (Index j : pattern) {
                if (usage[static_cast<std::size_t>(j - cfg.first_column())] >= cap) {
                    fits = false;
                    break;
                }
            }
            if (!fits) continue;
            for (Index j : pattern) ++usage[static_cast<std::size_t>(j - cfg.first_column())];
            tuple.push_back(pattern);
            recurse();
            tuple.pop_back();
            for (Index j : pattern) --usage[static_cast<std::size_t>(j - cfg.first_column())];
        }
    };
    recurse();
}

std::vector<ThetaIndex> enumerate_theta(const LeastFavorableConfig& cfg, std::uint64_t budget) {
    const std::string count = theta_count(cfg);
    if (BigInt(count) > BigInt(budget)) {
        throw BudgetError("enumerate_theta: |Theta| = " + count + " exceeds budget " +
                              std::to_string(budget),
                          count);
    }
    std::vector<std::vector<RowPattern>> lambdas;
    for_each_row_tuple(cfg, cfg.r, [&](const std::vector<RowPattern>& tuple, const std::vector<int>&) {
        lambdas.push_back(tuple);
    });
    std::vector<ThetaIndex> out;
    out.reserve(static_cast<std::size_t>(std::stoull(count)));
    const auto r = static_cast<std::size_t>(cfg.r);
    for (std::uint64_t word = 0; word < (std::uint64_t{1} << r); ++word) {
        std::vector<std::uint8_t> gamma(r);
        for (std::size_t m = 0; m < r; ++m) {
            gamma[m] = static_cast<std::uint8_t>((word >> (r - 1 - m)) & 1U);
        }
        for (const auto& lambda : lambdas) out.push_back({gamma, lambda});
    }
    return out;
}

ThetaIndex sample_theta(const LeastFavorableConfig& cfg, RngSeed seed, std::uint64_t max_attempts) {
    StreamRng rng(seed);
    const auto r = static_cast<std::size_t>(cfg.r);
    const auto k = static_cast<std::size_t>(cfg.k);
    ThetaIndex theta;
    theta.gamma.resize(r);
    for (auto& bit : theta.gamma) bit = static_cast<std::uint8_t>(rng() >> 63);

    std::vector<Index> pool(r);
    std::vector<int> usage(r);
    for (std::uint64_t attempt = 0; attempt < max_attempts; ++attempt) {
        theta.lambda.assign(r, {});
        std::fill(usage.begin(), usage.end(), 0);
        bool ok = true;
        for (std::size_t m = 0; m < r; ++m) {
            std::iota(pool.begin(), pool.end(), Index{0});
            // Partial Fisher-Yates: the first k slots become a uniform k-subset.
            for (std::size_t t = 0; t < k; ++t) {
                const auto pick = t + static_cast<std::size_t>(rng.below(r - t));
                std::swap(pool[t], pool[pick]);
            }
            RowPattern row(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
            std::sort(row.begin(), row.end());
            for (auto& j : row) {
                if (++usage[static_cast<std::size_t>(j)] > static_cast<int>(2 * k)) ok = false;
                j += cfg.first_column();
            }
            theta.lambda[m] = std::move(row);
        }
        if (ok) return theta;
    }
    throw BudgetError("sample_theta: no valid lambda after " + std::to_string(max_attempts) +
                          " rejection rounds",
                      std::to_string(max_attempts));
}

}  // namespace covthresh
