#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <span>
#include <string>

namespace covthresh {

using Index = Eigen::Index;

/// Dense real symmetric p x p matrix. Immutable after construction.
///
/// Every constructor guarantees entries(i, j) == entries(j, i) bit-for-bit.
/// Input whose asymmetry is within 1e-12 * (1 + max|entry|) is replaced by
/// (A + A^T) / 2; anything larger is rejected with an InputError, as are
/// non-square, empty, or non-finite inputs.
class SymmetricMatrix {
public:
    explicit SymmetricMatrix(const Eigen::MatrixXd& a);

    /// Mirror the lower triangle onto the upper one without any check.
    /// Used for results that are symmetric by construction (Gram matrices).
    static SymmetricMatrix from_lower(Eigen::MatrixXd a);
    static SymmetricMatrix from_row_major(Index p, std::span<const double> entries);
    static SymmetricMatrix identity(Index p);
    static SymmetricMatrix zero(Index p);
    static SymmetricMatrix diagonal(const Eigen::VectorXd& d);

    Index dim() const noexcept { return a_.rows(); }
    double operator()(Index i, Index j) const { return a_(i, j); }
    const Eigen::MatrixXd& dense() const noexcept { return a_; }

    friend SymmetricMatrix operator+(const SymmetricMatrix& x, const SymmetricMatrix& y);
    friend SymmetricMatrix operator-(const SymmetricMatrix& x, const SymmetricMatrix& y);
    friend SymmetricMatrix operator*(double s, const SymmetricMatrix& x);

    bool operator==(const SymmetricMatrix& other) const { return a_ == other.a_; }

private:
    struct Trusted {};
    SymmetricMatrix(Eigen::MatrixXd a, Trusted) : a_(std::move(a)) {}

    Eigen::MatrixXd a_;
};

/// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
struct EigenDecomposition {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
};

/// Householder tridiagonalization followed by implicit symmetric QR.
/// Throws ConvergenceError (carrying the residual) if QR stalls.
EigenDecomposition sym_eigen(const SymmetricMatrix& a);

/// Eigenvalues only, sorted descending; skips the eigenvector accumulation.
Eigen::VectorXd sym_eigenvalues(const SymmetricMatrix& a);

constexpr double kInfNorm = std::numeric_limits<double>::infinity();

/// Exact matrix l_w operator norm for w in {1, 2, inf}. For symmetric
/// input the 1- and inf-norms coincide (max absolute column sum); w = 2 is
/// the largest eigenvalue magnitude. Any other w throws InputError; use
/// operator_norm_bound for those.
double operator_norm(const SymmetricMatrix& a, double w);

/// Upper bound on |||A|||_w for any w in [1, inf]:
/// max(|||A|||_1, |||A|||_2, |||A|||_inf). This is an interpolation bound,
/// not the exact norm, and it does not depend on w beyond the range check.
double operator_norm_bound(const SymmetricMatrix& a, double w);

double frobenius_norm(const SymmetricMatrix& a);

/// V diag(f(lambda)) V^T. Throws DomainError naming the eigenvalue if f
/// returns a non-finite value there (log at lambda <= 0, for instance).
SymmetricMatrix matrix_function(const SymmetricMatrix& a,
                                const std::function<double(double)>& f);

/// Same, reusing an existing decomposition of A.
SymmetricMatrix matrix_function(const EigenDecomposition& eig,
                                const std::function<double(double)>& f);

/// CSV, one row per matrix row, 17 significant digits.
SymmetricMatrix load_symmetric_csv(const std::string& path);
void save_symmetric_csv(const SymmetricMatrix& a, const std::string& path);

}  // namespace covthresh
