#include "covthresh/lower_bound.hpp"

#include "covthresh/errors.hpp"
#include "covthresh/parallel.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace covthresh {

using BigInt = boost::multiprecision::cpp_int;

namespace {

std::string format_value(double x) {
    std::ostringstream out;
    out.precision(17);
    out << x;
    return out.str();
}

Eigen::LLT<Eigen::MatrixXd> spd_factor(const SymmetricMatrix& a, const char* who) {
    Eigen::LLT<Eigen::MatrixXd> llt(a.dense());
    if (llt.info() != Eigen::Success) {
        const double min_ev = sym_eigenvalues(a).minCoeff();
        throw NotPsdError(std::string(who) + ": matrix is not positive definite (min eigenvalue " +
                              format_value(min_ev) + ")",
                          min_ev);
    }
    return llt;
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

/// Key identifying Sigma(theta): gamma plus the patterns of active rows.
using MemberKey = std::pair<std::vector<std::uint8_t>, std::vector<RowPattern>>;

MemberKey member_key(const std::vector<std::uint8_t>& gamma, const std::vector<RowPattern>& lambda) {
    std::vector<RowPattern> active(lambda.size());
    for (std::size_t m = 0; m < lambda.size(); ++m) {
        if (gamma[m]) active[m] = lambda[m];
    }
    return {gamma, std::move(active)};
}

Eigen::MatrixXd member_matrix(const LeastFavorableConfig& cfg, const MemberKey& key) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(cfg.p, cfg.p);
    for (std::size_t m = 0; m < key.first.size(); ++m) {
        if (!key.first[m]) continue;
        for (Index j : key.second[m]) {
            a(static_cast<Index>(m), j) = cfg.epsilon;
            a(j, static_cast<Index>(m)) = cfg.epsilon;
        }
    }
    return a;
}

void require_budget(const LeastFavorableConfig& cfg, std::uint64_t budget, const char* who) {
    const std::string count = theta_count(cfg);
    if (BigInt(count) > BigInt(budget)) {
        throw BudgetError(std::string(who) + ": |Theta| = " + count + " exceeds budget " +
                              std::to_string(budget),
                          count);
    }
}

/// Distinct members of the family with their multiplicity in Theta.
std::map<MemberKey, std::uint64_t> distinct_members(const LeastFavorableConfig& cfg) {
    std::map<MemberKey, std::uint64_t> out;
    const auto r = static_cast<std::size_t>(cfg.r);
    for_each_row_tuple(cfg, cfg.r, [&](const std::vector<RowPattern>& lambda, const std::vector<int>&) {
        std::vector<std::uint8_t> gamma(r);
        for (std::uint64_t word = 0; word < (std::uint64_t{1} << r); ++word) {
            for (std::size_t m = 0; m < r; ++m) {
                gamma[m] = static_cast<std::uint8_t>((word >> (r - 1 - m)) & 1U);
            }
            ++out[member_key(gamma, lambda)];
        }
    });
    return out;
}

}  // namespace

AlphaResult per_comparison_alpha(const LeastFavorableConfig& cfg, std::uint64_t exact_budget) {
    AlphaResult out;
    const double ke = static_cast<double>(cfg.k) * cfg.epsilon;
    out.bound = ke * ke / static_cast<double>(cfg.p);

    const std::string count = theta_count(cfg);
    if (BigInt(count) > BigInt(exact_budget)) {
        out.budget_exceeded = true;
        out.pair_count = "at least " + count;
        return out;
    }
    const auto members = distinct_members(cfg);
    std::vector<const MemberKey*> keys;
    keys.reserve(members.size());
    for (const auto& [key, mult] : members) keys.push_back(&key);

    BigInt pairs = 0;
    for (std::size_t a = 0; a < keys.size(); ++a) {
        for (std::size_t b = a + 1; b < keys.size(); ++b) {
            if (keys[a]->first != keys[b]->first) ++pairs;
        }
    }
    out.pair_count = pairs.str();
    if (pairs > BigInt(exact_budget)) {
        out.budget_exceeded = true;
        return out;
    }
    std::vector<Eigen::MatrixXd> mats;
    mats.reserve(keys.size());
    for (const auto* key : keys) mats.push_back(member_matrix(cfg, *key));

    double best = kInfNorm;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    for (std::size_t a = 0; a < keys.size(); ++a) {
        for (std::size_t b = a + 1; b < keys.size(); ++b) {
            int hamming = 0;
            for (std::size_t m = 0; m < keys[a]->first.size(); ++m) {
                hamming += keys[a]->first[m] != keys[b]->first[m];
            }
            if (hamming == 0) continue;
            solver.compute(mats[a] - mats[b], Eigen::EigenvaluesOnly);
            const double norm = solver.eigenvalues().cwiseAbs().maxCoeff();
            best = std::min(best, norm * norm / hamming);
        }
    }
    if (std::isfinite(best)) out.exact = best;
    return out;
}

double log_cross_product_integral(const SymmetricMatrix& s0, const SymmetricMatrix& s1,
                                  const SymmetricMatrix& s2) {
    if (s0.dim() != s1.dim() || s0.dim() != s2.dim()) {
        throw InputError("cross_product_integral: dimension mismatch");
    }
    const auto l0 = spd_factor(s0, "cross_product_integral (S0)");
    const auto l1 = spd_factor(s1, "cross_product_integral (S1)");
    const auto l2 = spd_factor(s2, "cross_product_integral (S2)");
    const Index p = s0.dim();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(p, p);
    Eigen::MatrixXd k = l1.solve(id) + l2.solve(id) - l0.solve(id);
    k = 0.5 * (k + k.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> lk(k);
    if (lk.info() != Eigen::Success) {
        const double min_ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k, Eigen::EigenvaluesOnly)
                                  .eigenvalues()
                                  .minCoeff();
        throw DivergenceError("cross_product_integral: S1^-1 + S2^-1 - S0^-1 has eigenvalue " +
                              format_value(min_ev) + " <= 0; the integral is infinite");
    }
    return 0.5 * (log_det(l0) - log_det(l1) - log_det(l2) - log_det(lk));
}

double cross_product_integral(const SymmetricMatrix& s0, const SymmetricMatrix& s1,
                              const SymmetricMatrix& s2) {
    return std::exp(log_cross_product_integral(s0, s1, s2));
}

MonteCarloValue cross_product_integral_mc(const SymmetricMatrix& s0, const SymmetricMatrix& s1,
                                          const SymmetricMatrix& s2, std::uint64_t samples,
                                          RngSeed seed) {
    if (samples < 2) throw InputError("cross_product_integral_mc: need at least 2 samples");
    const auto l0 = spd_factor(s0, "cross_product_integral_mc (S0)");
    const auto l1 = spd_factor(s1, "cross_product_integral_mc (S1)");
    const auto l2 = spd_factor(s2, "cross_product_integral_mc (S2)");
    const Index p = s0.dim();
    const double log_scale = 0.5 * (2.0 * log_det(l0) - log_det(l1) - log_det(l2));
    const Eigen::MatrixXd lower = l0.matrixL();
    StreamRng rng(seed);
    Eigen::VectorXd z(p);
    double mean = 0.0;
    double m2 = 0.0;
    for (std::uint64_t i = 0; i < samples; ++i) {
        for (Index a = 0; a < p; ++a) z(a) = rng.normal();
        const Eigen::VectorXd x = lower * z;
        // log(g1 g2 / g0^2) = log_scale - (x'S1^-1x + x'S2^-1x - 2 x'S0^-1x) / 2
        const double q = x.dot(l1.solve(x)) + x.dot(l2.solve(x)) - 2.0 * z.squaredNorm();
        const double v = std::exp(log_scale - 0.5 * q);
        const double delta = v - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (v - mean);
    }
    const auto count = static_cast<double>(samples);
    return {mean, std::sqrt(m2 / (count - 1.0) / count)};
}

OverlapStructure overlap_structure(const SymmetricMatrix& s0, const SymmetricMatrix& s1,
                                   const SymmetricMatrix& s2) {
    const Index p = s0.dim();
    if (p < 2 || s1.dim() != p || s2.dim() != p) {
        throw StructureError("overlap_structure: need three matrices of a common dimension >= 2");
    }
    for (Index j = 1; j < p; ++j) {
        if (s0(0, j) != 0.0) {
            throw StructureError("overlap_structure: S0 has a nonzero first-row entry at column " +
                                 std::to_string(j));
        }
    }
    const Eigen::MatrixXd d1 = s1.dense() - s0.dense();
    const Eigen::MatrixXd d2 = s2.dense() - s0.dense();
    OverlapStructure out;
    std::vector<Index> cols1;
    std::vector<Index> cols2;
    for (const auto* d : {&d1, &d2}) {
        if (d->bottomRightCorner(p - 1, p - 1).cwiseAbs().maxCoeff() != 0.0 || (*d)(0, 0) != 0.0) {
            throw StructureError("overlap_structure: S1 and S2 must agree with S0 off the first row and column");
        }
        auto& cols = d == &d1 ? cols1 : cols2;
        for (Index j = 1; j < p; ++j) {
            const double v = (*d)(0, j);
            if (v == 0.0) continue;
            if (out.epsilon == 0.0) out.epsilon = v;
            if (v != out.epsilon || !(v > 0.0)) {
                throw StructureError("overlap_structure: first-row perturbations must all equal a common eps > 0");
            }
            cols.push_back(j);
        }
    }
    if (cols1.size() != cols2.size()) {
        throw StructureError("overlap_structure: S1 and S2 carry different numbers of eps entries");
    }
    out.k = static_cast<Index>(cols1.size());
    for (Index a : cols1) out.j += std::count(cols2.begin(), cols2.end(), a);

    const Eigen::MatrixXd q = (s0.dense() - s1.dense()) * (s0.dense() - s2.dense());
    const double scale = q.norm();
    if (scale > 0.0) {
        Eigen::EigenSolver<Eigen::MatrixXd> solver(q, false);
        for (Index i = 0; i < p; ++i) {
            const auto ev = solver.eigenvalues()(i);
            if (std::abs(ev) > 1e-6 * scale) out.nonzero_eigenvalues.push_back(ev.real());
        }
        std::sort(out.nonzero_eigenvalues.begin(), out.nonzero_eigenvalues.end(), std::greater<>());
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(q);
        for (Index i = 0; i < svd.singularValues().size(); ++i) {
            if (svd.singularValues()(i) > 1e-12 * scale) ++out.rank;
        }
    }
    const double expected = static_cast<double>(out.j) * out.epsilon * out.epsilon;
    if (out.j > 0) {
        out.lemma_holds = out.nonzero_eigenvalues.size() == 2 && out.rank <= 2 &&
                          std::abs(out.nonzero_eigenvalues[0] - expected) <= 1e-10 &&
                          std::abs(out.nonzero_eigenvalues[1] - expected) <= 1e-10;
    } else {
        out.lemma_holds = out.nonzero_eigenvalues.empty() && out.rank <= 2 && q(0, 0) == 0.0;
    }
    return out;
}

std::vector<double> overlap_distribution(Index k, Index p_lambda) {
    if (k < 0 || p_lambda < k) {
        throw InputError("overlap_distribution: need 0 <= k <= p_lambda, got k = " + std::to_string(k) +
                         ", p_lambda = " + std::to_string(p_lambda));
    }
    std::vector<double> out(static_cast<std::size_t>(k + 1), 0.0);
    const Index j0 = std::max<Index>(0, 2 * k - p_lambda);
    // log P(j) up to a constant, by P(j+1)/P(j) = (k-j)^2 / ((j+1)(p_lambda-2k+j+1)).
    std::vector<double> logw(static_cast<std::size_t>(k + 1), -kInfNorm);
    logw[static_cast<std::size_t>(j0)] = 0.0;
    double peak = 0.0;
    for (Index j = j0; j < k; ++j) {
        const double kj = static_cast<double>(k - j);
        const double ratio = kj * kj / (static_cast<double>(j + 1) * static_cast<double>(p_lambda - 2 * k + j + 1));
        logw[static_cast<std::size_t>(j + 1)] = logw[static_cast<std::size_t>(j)] + std::log(ratio);
        peak = std::max(peak, logw[static_cast<std::size_t>(j + 1)]);
    }
    double total = 0.0;
    for (Index j = j0; j <= k; ++j) {
        out[static_cast<std::size_t>(j)] = std::exp(logw[static_cast<std::size_t>(j)] - peak);
        total += out[static_cast<std::size_t>(j)];
    }
    for (auto& x : out) x /= total;
    return out;
}

EnvelopeReport chi_square_mixture_bound(const LeastFavorableConfig& cfg) {
    EnvelopeReport out;
    if (cfg.k == 0) {
        out.value = 0.5;
        out.below_target = true;
        return out;
    }
    const double kk = static_cast<double>(cfg.k);
    const double denom = static_cast<double>(cfg.p) / 4.0 - 1.0 - kk;
    if (!(denom > 0.0)) {
        out.ratio = kInfNorm;
        out.divergent = true;
        return out;
    }
    out.ratio = kk * kk / denom *
                std::exp(2.0 * cfg.upsilon * cfg.upsilon * std::log(static_cast<double>(cfg.p)));
    if (!(out.ratio < 1.0)) {
        out.divergent = true;
        return out;
    }
    constexpr std::size_t kMaxTerms = 10'000;
    double sum = 0.0;
    double term = 1.0;
    out.truncated_at_cap = true;
    for (std::size_t j = 1; j <= kMaxTerms; ++j) {
        term *= out.ratio;
        if (term < 1e-15) {
            out.truncated_at_cap = false;
            break;
        }
        sum += term;
        out.terms = j;
    }
    out.value = 0.5 + 1.5 * sum;
    out.below_target = *out.value < out.target;
    return out;
}

double exact_chi_square_small(const LeastFavorableConfig& cfg, Index n, std::uint64_t budget) {
    if (n < 0) throw InputError("exact_chi_square_small: n must be >= 0");
    if (cfg.k == 0 || n == 0) return 0.0;
    require_budget(cfg, budget, "exact_chi_square_small");

    const auto r = static_cast<std::size_t>(cfg.r);
    const Index first = cfg.first_column();
    const auto patterns = k_subsets(first, cfg.r, cfg.k);
    const int cap = static_cast<int>(2 * cfg.k);
    const double theta_total = std::stod(theta_count(cfg));
    const double nn = static_cast<double>(n);

    double chi2 = 0.0;
    std::vector<RowPattern> lambda(r);
    for_each_row_tuple(cfg, cfg.r - 1, [&](const std::vector<RowPattern>& tail, const std::vector<int>& usage) {
        std::vector<const RowPattern*> choices;
        for (const auto& pattern : patterns) {
            bool fits = true;
            for (Index j : pattern) fits = fits && usage[static_cast<std::size_t>(j - first)] < cap;
            if (fits) choices.push_back(&pattern);
        }
        if (choices.empty()) return;
        std::copy(tail.begin(), tail.end(), lambda.begin() + 1);
        lambda[0] = *choices.front();
        // Each (gamma_-1, lambda_-1) carries |Lambda_1| members of Theta.
        const double weight = static_cast<double>(choices.size()) / theta_total;
        std::vector<std::uint8_t> gamma(r);
        for (std::uint64_t word = 0; word < (std::uint64_t{1} << (r - 1)); ++word) {
            gamma[0] = 0;
            for (std::size_t m = 1; m < r; ++m) {
                gamma[m] = static_cast<std::uint8_t>((word >> (r - 1 - m)) & 1U);
            }
            const SymmetricMatrix s0(member_matrix(cfg, member_key(gamma, lambda)));
            std::vector<SymmetricMatrix> alt;
            alt.reserve(choices.size());
            gamma[0] = 1;
            for (const auto* choice : choices) {
                lambda[0] = *choice;
                alt.emplace_back(member_matrix(cfg, member_key(gamma, lambda)));
            }
            double mean = 0.0;
            for (std::size_t a = 0; a < alt.size(); ++a) {
                for (std::size_t b = 0; b < alt.size(); ++b) {
                    mean += std::exp(nn * log_cross_product_integral(s0, alt[a], alt[b]));
                }
            }
            mean /= static_cast<double>(alt.size() * alt.size());
            chi2 += weight * (mean - 1.0);
        }
    });
    return chi2;
}

void MixtureSpec::validate() const {
    if (components.empty()) throw InputError("MixtureSpec: no components");
    if (n < 1) throw InputError("MixtureSpec: n must be >= 1");
    const Index p = components.front().covariance.dim();
    double total = 0.0;
    for (const auto& c : components) {
        if (c.covariance.dim() != p) throw InputError("MixtureSpec: components differ in dimension");
        if (!(c.weight >= 0.0)) throw InputError("MixtureSpec: negative weight");
        if (c.mean && c.mean->size() != p) throw InputError("MixtureSpec: mean has the wrong dimension");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw InputError("MixtureSpec: weights sum to " + format_value(total) + ", not 1");
    }
}

Index MixtureSpec::dim() const { return components.front().covariance.dim(); }

namespace {

struct PreparedComponent {
    double log_weight;
    double log_norm;            ///< -(n/2)(p log 2 pi + log det)
    Eigen::MatrixXd precision;
    Eigen::MatrixXd chol;       ///< lower factor for sampling
    Eigen::VectorXd mean;
    Eigen::VectorXd precision_mean;
    double mean_quad;           ///< mu^T Sigma^-1 mu
};

struct PreparedMixture {
    std::vector<PreparedComponent> comps;
    std::vector<double> cumulative;
};

PreparedMixture prepare(const MixtureSpec& spec) {
    spec.validate();
    PreparedMixture out;
    const Index p = spec.dim();
    const double nn = static_cast<double>(spec.n);
    double running = 0.0;
    for (const auto& c : spec.components) {
        const auto llt = spd_factor(c.covariance, "tv_affinity_mc");
        PreparedComponent pc;
        pc.log_weight = std::log(c.weight);
        pc.log_norm = -0.5 * nn * (static_cast<double>(p) * std::log(2.0 * std::numbers::pi) + log_det(llt));
        pc.precision = llt.solve(Eigen::MatrixXd::Identity(p, p));
        pc.chol = llt.matrixL();
        pc.mean = c.mean ? *c.mean : Eigen::VectorXd::Zero(p);
        pc.precision_mean = pc.precision * pc.mean;
        pc.mean_quad = pc.mean.dot(pc.precision_mean);
        out.comps.push_back(std::move(pc));
        running += c.weight;
        out.cumulative.push_back(running);
    }
    return out;
}

/// log density of the n-fold product mixture given scatter S = sum x x^T and
/// sum vector s = sum x.
double mixture_log_density(const PreparedMixture& mix, const Eigen::MatrixXd& scatter,
                           const Eigen::VectorXd& sum, double n) {
    double peak = -kInfNorm;
    std::vector<double> terms(mix.comps.size());
    for (std::size_t c = 0; c < mix.comps.size(); ++c) {
        const auto& pc = mix.comps[c];
        if (!std::isfinite(pc.log_weight)) {
            terms[c] = -kInfNorm;
            continue;
        }
        const double quad = pc.precision.cwiseProduct(scatter).sum() - 2.0 * pc.precision_mean.dot(sum) +
                            n * pc.mean_quad;
        terms[c] = pc.log_weight + pc.log_norm - 0.5 * quad;
        peak = std::max(peak, terms[c]);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - peak);
    return peak + std::log(acc);
}

std::size_t pick_component(const PreparedMixture& mix, double u) {
    const auto it = std::lower_bound(mix.cumulative.begin(), mix.cumulative.end(), u * mix.cumulative.back());
    return std::min<std::size_t>(static_cast<std::size_t>(it - mix.cumulative.begin()), mix.comps.size() - 1);
}

}  // namespace

AffinityEstimate tv_affinity_mc(const MixtureSpec& p, const MixtureSpec& q, std::uint64_t samples,
                                RngSeed seed, unsigned threads) {
    if (samples < 1000) throw InputError("tv_affinity_mc: need at least 1000 samples");
    if (p.n != q.n) throw InputError("tv_affinity_mc: mixtures differ in n");
    const PreparedMixture mp = prepare(p);
    const PreparedMixture mq = prepare(q);
    if (p.dim() != q.dim()) throw InputError("tv_affinity_mc: mixtures differ in dimension");
    const Index dim = p.dim();
    const Index n = p.n;

    std::vector<double> values(samples);
    parallel_for(samples, threads, [&](std::size_t i) {
        StreamRng rng(seed.child(i));
        const bool from_p = rng.uniform() < 0.5;
        const PreparedMixture& src = from_p ? mp : mq;
        const auto& comp = src.comps[pick_component(src, rng.uniform())];
        Eigen::MatrixXd z(dim, n);
        rng.fill_normal(std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
        const Eigen::MatrixXd x = (comp.chol * z).colwise() + comp.mean;
        const Eigen::MatrixXd scatter = x * x.transpose();
        const Eigen::VectorXd sum = x.rowwise().sum();
        const double lp = mixture_log_density(mp, scatter, sum, static_cast<double>(n));
        const double lq = mixture_log_density(mq, scatter, sum, static_cast<double>(n));
        if (!std::isfinite(lp) || !std::isfinite(lq)) {
            throw DomainError("tv_affinity_mc: non-finite log density at sample " + std::to_string(i));
        }
        values[i] = 2.0 / (1.0 + std::exp(std::abs(lp - lq)));
    });

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(samples);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    AffinityEstimate out;
    out.value = std::clamp(mean, 0.0, 1.0);
    out.std_error = std::sqrt(ss / static_cast<double>(samples - 1) / static_cast<double>(samples));
    out.samples = samples;
    out.seed = seed;
    return out;
}

MixtureSpec gamma_mixture(const LeastFavorableConfig& cfg, Index row, bool active, std::uint64_t budget) {
    if (row < 0 || row >= cfg.r) throw InputError("gamma_mixture: row outside [0, r)");
    MixtureSpec out;
    out.n = cfg.n;
    if (cfg.k == 0 || cfg.r == 0) {
        out.components.push_back({1.0, SymmetricMatrix::identity(cfg.p), std::nullopt});
        return out;
    }
    require_budget(cfg, budget, "gamma_mixture");
    std::map<MemberKey, std::uint64_t> members;
    for (const auto& [key, mult] : distinct_members(cfg)) {
        if ((key.first[static_cast<std::size_t>(row)] != 0) == active) members[key] += mult;
    }
    std::uint64_t total = 0;
    for (const auto& [key, mult] : members) total += mult;
    for (const auto& [key, mult] : members) {
        out.components.push_back({static_cast<double>(mult) / static_cast<double>(total),
                                  SymmetricMatrix(member_matrix(cfg, key)), std::nullopt});
    }
    return out;
}

LowerBoundAssembly assemble_lower_bound(const LeastFavorableConfig& cfg, double affinity) {
    if (!(affinity >= 0.0 && affinity <= 1.0)) {
        throw InputError("assemble_lower_bound: affinity must lie in [0, 1]");
    }
    LowerBoundAssembly out;
    const double ke = static_cast<double>(cfg.k) * cfg.epsilon;
    out.alpha_bound = ke * ke / static_cast<double>(cfg.p);
    out.affinity = affinity;
    out.lower_bound = 0.25 * out.alpha_bound * (static_cast<double>(cfg.r) / 2.0) * affinity;
    out.rate_target = cfg.c * cfg.c *
                      std::pow(std::log(static_cast<double>(cfg.p)) / static_cast<double>(cfg.n), 1.0 - cfg.q);
    return out;
}

}  // namespace covthresh
