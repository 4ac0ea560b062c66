#pragma once

#include "covthresh/matrix.hpp"
#include "covthresh/rng.hpp"

#include <string>

namespace covthresh {

/// n observations of a p-variate vector, one observation per row.
class DataMatrix {
public:
    explicit DataMatrix(Eigen::MatrixXd rows);

    Index n() const noexcept { return x_.rows(); }
    Index p() const noexcept { return x_.cols(); }
    const Eigen::MatrixXd& rows() const noexcept { return x_; }

    bool operator==(const DataMatrix& other) const { return x_ == other.x_; }

private:
    Eigen::MatrixXd x_;
};

/// Draws from N(0, Sigma) through the symmetric square root Sigma^{1/2}, so
/// rank-deficient PSD matrices work without pivoting. Construction performs
/// the eigendecomposition once; draws are then cheap and reentrant.
class GaussianSampler {
public:
    /// Eigenvalues down to -1e-10 |||Sigma|||_2 are clamped to zero; anything
    /// more negative throws NotPsdError.
    explicit GaussianSampler(const SymmetricMatrix& sigma);

    Index dim() const noexcept { return root_.rows(); }
    const Eigen::MatrixXd& root() const noexcept { return root_; }

    /// Row l is Sigma^{1/2} z_l with z_l the l-th block of p normals from the
    /// stream. Bit-identical for identical (n, seed).
    DataMatrix draw(Index n, RngSeed seed) const;

private:
    Eigen::MatrixXd root_;
};

DataMatrix sample_gaussian(const SymmetricMatrix& sigma, Index n, RngSeed seed);

/// (1/n) sum_l (X_l - mean)(X_l - mean)^T. Always centered, divisor n.
SymmetricMatrix mle_covariance(const DataMatrix& x);

/// Per-entry fraction of replicates with |sigma*_ij - sigma_ij| > t, where
/// replicate r uses seed.child(r).
Eigen::MatrixXd tail_probe(const SymmetricMatrix& sigma, Index n, double t, Index replicates,
                           RngSeed seed);

DataMatrix load_data_csv(const std::string& path);
void save_data_csv(const DataMatrix& x, const std::string& path);

}  // namespace covthresh
