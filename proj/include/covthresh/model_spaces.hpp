#pragma once

#include "covthresh/matrix.hpp"
#include "covthresh/rng.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace covthresh {

// ---------------------------------------------------------------------------
// Sparsity classes
// ---------------------------------------------------------------------------

enum class SparsityKind {
    weak,    ///< every off-diagonal column lies in a weak l_q ball
    strong,  ///< max_j sum_{i != j} |sigma_ij|^q bounded (uniformity class)
};

struct SparsityClassSpec {
    double q = 0.0;       ///< in [0, 1)
    double radius = 1.0;  ///< c_{n,p} > 0
    SparsityKind kind = SparsityKind::weak;

    void validate() const;
};

/// Smallest c with v in the weak l_q ball B_q(c): max_k k |v|_(k)^q for
/// q > 0, the number of nonzero entries for q = 0.
double weak_lq_radius(std::span<const double> v, double q);

/// sum_i |v_i|^q for q > 0, the number of nonzero entries for q = 0.
double strong_lq_radius(std::span<const double> v, double q);

struct Membership {
    bool member = true;
    std::optional<Index> violating_column;  ///< first column over the radius
    double max_column_radius = 0.0;
};

/// Column-wise membership test with each column's diagonal entry removed.
/// Radii are compared with a relative slack of 1e-12.
Membership class_membership(const SymmetricMatrix& s, const SparsityClassSpec& spec);

// ---------------------------------------------------------------------------
// Least-favorable family
// ---------------------------------------------------------------------------

/// Parameters of the finite family Sigma(theta) = I + eps * sum_m gamma_m A_m(lambda_m).
///
/// Rows 0..r-1 may carry perturbations; their entries sit in the column block
/// [p - r, p). Use build_config to obtain a validated instance; the struct is
/// a plain aggregate so diagnostics can inspect and copy it.
struct LeastFavorableConfig {
    Index p = 0;
    Index n = 0;
    double q = 0.0;
    double c = 0.0;
    double upsilon = 0.0;
    Index r = 0;           ///< floor(p / 2)
    Index k = 0;           ///< max(ceil(c eps^-q / 2) - 1, 0)
    double epsilon = 0.0;  ///< upsilon sqrt(log p / n)
    /// c <= M n^{(1-q)/2} (log p)^{-(3-q)/2}, recorded only when M is supplied.
    std::optional<double> condc_m;
    std::optional<bool> condc_holds;

    Index first_column() const noexcept { return p - r; }
};

/// Derives r, k and eps; throws ConfigError if 2 k eps >= 1/3 and
/// InputError on out-of-range arguments.
LeastFavorableConfig build_config(Index p, Index n, double q, double c, double upsilon,
                                  std::optional<double> condc_m = std::nullopt);

/// Report on the two upsilon restrictions that make the family least
/// favorable: upsilon^{1-q} < min(1/3, tau - 1) / M and
/// upsilon^2 < (beta - 1) / (54 beta). Checked, never enforced.
struct UpsilonCheck {
    double dominance_cap = 0.0;  ///< (min(1/3, tau-1)/M)^{1/(1-q)}
    double beta_cap = 0.0;       ///< sqrt((beta-1)/(54 beta))
    bool below_dominance_cap = false;
    bool below_beta_cap = false;
};
UpsilonCheck check_upsilon(const LeastFavorableConfig& cfg, double m, double tau, double beta);

/// theta = (gamma, lambda). gamma has r bits; lambda has r row patterns,
/// each a sorted set of exactly k zero-based column indices in [p - r, p).
struct ThetaIndex {
    std::vector<std::uint8_t> gamma;
    std::vector<std::vector<Index>> lambda;

    bool operator==(const ThetaIndex&) const = default;
};

using RowPattern = std::vector<Index>;

/// Throws StructureError naming the violated constraint.
void validate_theta(const LeastFavorableConfig& cfg, const ThetaIndex& theta);

SymmetricMatrix materialize_sigma(const LeastFavorableConfig& cfg, const ThetaIndex& theta);

/// All k-subsets of [first, first + count) in lexicographic order.
std::vector<RowPattern> k_subsets(Index first, Index count, Index k);

/// Exact number of `rows`-tuples of k-subsets of `columns` columns with every
/// column used at most 2k times, as a decimal string. Throws BudgetError
/// (with a lower bound) when the counting state space itself is too large.
std::string count_row_tuples(Index columns, Index rows, Index k);

/// Exact |Theta| = 2^r |Lambda| as a decimal string.
std::string theta_count(const LeastFavorableConfig& cfg);

/// Visit every `rows`-tuple of patterns (drawn from `patterns`, each over
/// the column block of `cfg`) whose column sums stay <= 2k, in
/// lexicographic order of pattern indices. The visitor receives the tuple
/// and the per-column usage counts (indexed relative to the block).
void for_each_row_tuple(const LeastFavorableConfig& cfg, Index rows,
                        const std::function<void(const std::vector<RowPattern>&,
                                                 const std::vector<int>&)>& visit);

/// Every theta in lexicographic order (gamma as an r-bit word with bit 0
/// most significant, then lambda). Throws BudgetError with the exact count if
/// 2^r |Lambda| > budget.
std::vector<ThetaIndex> enumerate_theta(const LeastFavorableConfig& cfg,
                                        std::uint64_t budget = 1'000'000);

/// Uniform draw from Theta. gamma bits are fair coins; lambda rows are
/// independent uniform k-subsets, re-drawn as a whole tuple until the column
/// constraint holds. Throws BudgetError after `max_attempts` rejections.
ThetaIndex sample_theta(const LeastFavorableConfig& cfg, RngSeed seed,
                        std::uint64_t max_attempts = 1'000'000);

}  // namespace covthresh
