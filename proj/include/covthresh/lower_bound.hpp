#pragma once

#include "covthresh/matrix.hpp"
#include "covthresh/model_spaces.hpp"
#include "covthresh/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace covthresh {

// ---------------------------------------------------------------------------
// Per-comparison loss
// ---------------------------------------------------------------------------

struct AlphaResult {
    double bound = 0.0;                ///< (k eps)^2 / p
    std::optional<double> exact;       ///< min |||S(t) - S(t')|||_2^2 / H(g, g')
    std::string pair_count;            ///< distinct pairs compared, or the count that broke the budget
    bool budget_exceeded = false;
};

/// The exact value is the minimum over distinct members with H(gamma, gamma')
/// >= 1. Members are deduplicated by (gamma, patterns of active rows); the
/// exact value is skipped when |Theta| or the pair count exceeds the budget.
AlphaResult per_comparison_alpha(const LeastFavorableConfig& cfg, std::uint64_t exact_budget);

// ---------------------------------------------------------------------------
// Gaussian cross-product integrals and the overlap structure
// ---------------------------------------------------------------------------

/// log of the integral of g1 g2 / g0 over R^p for g_i the N(0, S_i) density:
/// (1/2) log det S0 - (1/2) log det S1 - (1/2) log det S2 - (1/2) log det K,
/// K = S1^-1 + S2^-1 - S0^-1. Equivalently
/// -(1/2) log det(I - S0^-1 (S1 - S0) S0^-1 (S2 - S0)).
/// Throws NotPsdError unless all three are SPD and DivergenceError unless K is
/// positive definite (the integral is infinite there).
double log_cross_product_integral(const SymmetricMatrix& s0, const SymmetricMatrix& s1,
                                  const SymmetricMatrix& s2);

double cross_product_integral(const SymmetricMatrix& s0, const SymmetricMatrix& s1,
                              const SymmetricMatrix& s2);

/// Monte Carlo oracle: mean of g1 g2 / g0^2 over `samples` draws from g0,
/// with standard error. Finite variance needs 2 S1^-1 + 2 S2^-1 - 3 S0^-1 > 0.
struct MonteCarloValue {
    double value = 0.0;
    double std_error = 0.0;
};
MonteCarloValue cross_product_integral_mc(const SymmetricMatrix& s0, const SymmetricMatrix& s1,
                                          const SymmetricMatrix& s2, std::uint64_t samples,
                                          RngSeed seed);

struct OverlapStructure {
    Index j = 0;            ///< shared eps positions in the first rows of S1 and S2
    Index k = 0;            ///< eps positions per first row
    double epsilon = 0.0;
    /// Eigenvalues of (S0 - S1)(S0 - S2) with modulus above 1e-6 |||Q|||_F,
    /// real parts, sorted descending.
    std::vector<double> nonzero_eigenvalues;
    Index rank = 0;         ///< numerical rank of Q via singular values
    bool lemma_holds = false;  ///< J > 0: exactly two eigenvalues equal to J eps^2 (1e-10); J = 0: none
};

/// S0 must have a unit first row (e_1) and S1, S2 must agree with S0 off the
/// first row and column, with exactly k entries equal to a common eps > 0 in
/// their first rows. Throws StructureError otherwise.
OverlapStructure overlap_structure(const SymmetricMatrix& s0, const SymmetricMatrix& s1,
                                   const SymmetricMatrix& s2);

/// P(J = j), j = 0..k, for the overlap of two independent uniform k-subsets of
/// a p_lambda-set: C(k,j) C(p_lambda-k, k-j) / C(p_lambda, k). Computed by the
/// ratio recursion in log space and normalized. Throws InputError unless
/// 0 <= k <= p_lambda.
std::vector<double> overlap_distribution(Index k, Index p_lambda);

// ---------------------------------------------------------------------------
// Chi-square distances
// ---------------------------------------------------------------------------

struct EnvelopeReport {
    std::optional<double> value;   ///< empty when the series diverges
    double ratio = 0.0;            ///< k^2/(p/4-1-k) exp(2 upsilon^2 log p); inf if p/4-1-k <= 0
    bool divergent = false;
    bool truncated_at_cap = false; ///< 10^4 terms summed without reaching 1e-15
    std::size_t terms = 0;
    double target = 0.75;          ///< c_2^2
    bool below_target = false;
};

/// 1/2 + (3/2) sum_{j>=1} (k^2 / (p/4 - 1 - k))^j exp(2 j upsilon^2 log p).
EnvelopeReport chi_square_mixture_bound(const LeastFavorableConfig& cfg);

/// Average over (gamma_-1, lambda_-1) of the chi-square distance between the
/// n-fold mixture over first rows lambda_1 in Lambda_1(lambda_-1) with
/// gamma_1 = 1 and the single law with gamma_1 = 0. (gamma_-1, lambda_-1) is
/// weighted by its share of Theta, i.e. theta is uniform. Each pair term is
/// (integral g1 g2 / g0)^n. Throws BudgetError when |Theta| > budget.
double exact_chi_square_small(const LeastFavorableConfig& cfg, Index n,
                              std::uint64_t budget = 1'000'000);

// ---------------------------------------------------------------------------
// Total-variation affinity
// ---------------------------------------------------------------------------

struct MixtureComponent {
    double weight = 0.0;
    SymmetricMatrix covariance;
    std::optional<Eigen::VectorXd> mean;  ///< zero when empty
};

/// sum_c w_c N(mu_c, Sigma_c)^{(x) n}: each component is the law of n i.i.d.
/// draws. Weights must sum to 1 within 1e-12 and covariances must be SPD and
/// share a dimension; validate() throws InputError otherwise.
struct MixtureSpec {
    std::vector<MixtureComponent> components;
    Index n = 1;

    void validate() const;
    Index dim() const;
};

struct AffinityEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t samples = 0;
    RngSeed seed;
};

/// ||P ^ Q|| estimated by sampling from (P + Q)/2 and averaging
/// min(p, q) / m = 2 / (1 + exp|log p - log q|). Sample i uses seed.child(i),
/// so the value does not depend on `threads`. Requires samples >= 1000.
AffinityEstimate tv_affinity_mc(const MixtureSpec& p, const MixtureSpec& q, std::uint64_t samples,
                                RngSeed seed, unsigned threads = 1);

/// P-bar_{row, a}: uniform mixture over theta with gamma_row = a, merged over
/// identical covariance matrices. Throws BudgetError when |Theta| > budget.
MixtureSpec gamma_mixture(const LeastFavorableConfig& cfg, Index row, bool active,
                          std::uint64_t budget = 1'000'000);

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

struct LowerBoundAssembly {
    double alpha_bound = 0.0;
    double affinity = 0.0;
    double lower_bound = 0.0;  ///< (1/4) alpha (r/2) affinity
    double rate_target = 0.0;  ///< c^2 (log p / n)^{1-q}
};

/// Throws InputError unless affinity lies in [0, 1].
LowerBoundAssembly assemble_lower_bound(const LeastFavorableConfig& cfg, double affinity);

/// 1 - sqrt(3)/2, the affinity floor implied by c_2^2 = 3/4.
constexpr double kAffinityFloor = 0.1339745962155614;

}  // namespace covthresh
