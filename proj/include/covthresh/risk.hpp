#pragma once

#include "covthresh/estimators.hpp"
#include "covthresh/losses.hpp"
#include "covthresh/matrix.hpp"
#include "covthresh/rng.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace covthresh {

// ---------------------------------------------------------------------------
// Truth matrices
// ---------------------------------------------------------------------------

enum class TruthKind {
    explicit_matrix,   ///< a fixed matrix; p must match
    banded,            ///< value on the first `bandwidth` off-diagonals, optionally within blocks
    polynomial_decay,  ///< scale (d + u_i)^{-1/q} at distance d <= bandwidth
    family_member,     ///< a uniform draw from the least-favorable family
};

struct TruthSpec {
    TruthKind kind = TruthKind::banded;
    Index bandwidth = 1;
    Index block = 0;      ///< banded: nonzero entries stay inside consecutive blocks of this size; 0 = no blocks
    double value = 0.4;   ///< banded entry
    double q = 0.0;       ///< polynomial_decay exponent, family_member q
    double scale = 0.3;   ///< polynomial_decay leading entry
    double c = 4.0;       ///< family_member radius
    double upsilon = 0.1; ///< family_member upsilon
    std::shared_ptr<const SymmetricMatrix> matrix;  ///< explicit_matrix
    std::string source;   ///< explicit_matrix path, for the record

    /// Short descriptor, e.g. "banded(b=4,v=0.6,block=5)".
    std::string label() const;
    /// Builds the p x p truth for sample size n. Family members are drawn with
    /// `seed`; the other kinds ignore it.
    SymmetricMatrix build(Index p, Index n, RngSeed seed) const;
    /// (q, c) of the sparsity class the truth belongs to: q = 0 with the
    /// largest off-diagonal column count for banded and explicit truths,
    /// the weak l_q radius bound 2 scale^q for polynomial decay, (q, c) for
    /// family members.
    std::pair<double, double> sparsity_class(const SymmetricMatrix& built) const;
};

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct RiskRecord {
    std::uint64_t cell_id = 0;
    std::string truth;     ///< TruthSpec::label()
    double q = 0.0;
    double c = 0.0;
    EstimatorSpec estimator;
    LossSpec loss;
    Index n = 0;
    Index p = 0;
    Index replicates = 0;
    Index failures = 0;    ///< replicates whose loss raised a domain error
    double mean_risk = 0.0;
    double std_error = 0.0;
    double median_risk = 0.0;
    RngSeed seed;
    double wall_time = 0.0;  ///< seconds
};

/// One Monte Carlo cell: replicate r draws n observations from N(0, truth)
/// with seed.child(r), thresholds their MLE covariance and evaluates the loss
/// against the truth. Replicates with a DomainError from the loss are counted
/// in `failures` and left out of the averages; more than 1% of failures
/// throws DomainError. Throws InputError if replicates < 1.
RiskRecord run_risk_cell(const SymmetricMatrix& truth, const EstimatorSpec& est, const LossSpec& loss,
                         Index n, Index replicates, RngSeed seed, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

enum class Pairing {
    product,  ///< every (n, p) combination
    zip,      ///< n[i] with p[i]
};

struct GridConfig {
    std::vector<TruthSpec> truths;
    std::vector<Index> n;
    std::vector<Index> p;
    Pairing pairing = Pairing::product;
    std::vector<EstimatorSpec> estimators;
    std::vector<LossSpec> losses;
    Index replicates = 100;
    std::uint64_t seed = 0;

    /// Throws InputError on an empty grid or invalid entries.
    void validate() const;
};

/// Runs every (truth, n, p) data cell. Within a data cell, replicate r uses
/// RngSeed{seed, 0}.child(cell).child(r) for its sample, shared by all
/// estimators and losses, so cells can be compared pairwise. Stein and von
/// Neumann losses force the Bregman guard on. Records come back in
/// (data cell, estimator, loss) order whatever `threads` is.
std::vector<RiskRecord> run_grid(const GridConfig& grid, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Rate fits
// ---------------------------------------------------------------------------

struct RateFit {
    std::vector<std::uint64_t> cells;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::optional<double> target_exponent;  ///< 1-q (operator), 1-q/2 (normalized Bregman or Frobenius)
};

/// Least squares of log(mean_risk) on log(log p / n). Requires >= 3 records
/// sharing (q, c, estimator, loss), positive risks, and a factor of at
/// least 4 between the extreme regressor values (InputError otherwise).
RateFit rate_fit(const std::vector<RiskRecord>& records);

/// Fits every (truth, q, c, estimator, loss) group in `records`; groups
/// that cannot be fitted are reported with the reason.
struct GroupFit {
    std::string truth;
    EstimatorSpec estimator;
    LossSpec loss;
    std::optional<RateFit> fit;
    std::string error;
};
std::vector<GroupFit> rate_fits_by_group(const std::vector<RiskRecord>& records);

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// CSV columns: cell_id, n, p, q, c, rule, gamma, loss_kind, w_or_phi,
/// replicates, mean_risk, std_error, seed, wall_time. All records must share
/// one LossSpec (InputError otherwise). wall_time is left empty unless
/// `with_timing` is set, so the bytes depend only on the inputs and seed.
void export_csv(const std::vector<RiskRecord>& records, const std::string& path, bool with_timing = false);
std::string to_csv(const std::vector<RiskRecord>& records, bool with_timing = false);
std::vector<RiskRecord> import_csv(const std::string& path);

void export_json(const std::vector<RiskRecord>& records, const std::string& path);
std::vector<RiskRecord> import_json(const std::string& path);

}  // namespace covthresh
