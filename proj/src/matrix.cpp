#include "covthresh/matrix.hpp"

#include "covthresh/csv.hpp"
#include "covthresh/errors.hpp"

#include <cmath>
#include <sstream>

namespace covthresh {

namespace {

constexpr double kAsymmetryTolerance = 1e-12;

void require_square_finite(const Eigen::MatrixXd& a, const char* who) {
    if (a.rows() < 1 || a.rows() != a.cols()) {
        std::ostringstream msg;
        msg << who << ": expected a non-empty square matrix, got " << a.rows() << "x" << a.cols();
        throw InputError(msg.str());
    }
    if (!a.allFinite()) throw InputError(std::string(who) + ": non-finite entry");
}

EigenDecomposition sorted_descending(const Eigen::VectorXd& ascending_values,
                                     const Eigen::MatrixXd& ascending_vectors) {
    EigenDecomposition out;
    out.eigenvalues = ascending_values.reverse();
    out.eigenvectors = ascending_vectors.rowwise().reverse();
    return out;
}

}  // namespace

SymmetricMatrix::SymmetricMatrix(const Eigen::MatrixXd& a) {
    require_square_finite(a, "SymmetricMatrix");
    const double scale = a.cwiseAbs().maxCoeff();
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > kAsymmetryTolerance * (1.0 + scale)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "SymmetricMatrix: asymmetry " << asym << " exceeds tolerance "
            << kAsymmetryTolerance * (1.0 + scale);
        throw InputError(msg.str());
    }
    a_ = 0.5 * (a + a.transpose());
}

SymmetricMatrix SymmetricMatrix::from_lower(Eigen::MatrixXd a) {
    require_square_finite(a, "SymmetricMatrix::from_lower");
    a.triangularView<Eigen::StrictlyUpper>() = a.transpose().triangularView<Eigen::StrictlyUpper>();
    return SymmetricMatrix(std::move(a), Trusted{});
}

SymmetricMatrix SymmetricMatrix::from_row_major(Index p, std::span<const double> entries) {
    if (p < 1 || entries.size() != static_cast<std::size_t>(p * p)) {
        throw InputError("SymmetricMatrix::from_row_major: need p*p entries");
    }
    Eigen::MatrixXd a(p, p);
    for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < p; ++j) a(i, j) = entries[static_cast<std::size_t>(i * p + j)];
    }
    return SymmetricMatrix(a);
}

SymmetricMatrix SymmetricMatrix::identity(Index p) {
    if (p < 1) throw InputError("SymmetricMatrix::identity: p must be >= 1");
    return SymmetricMatrix(Eigen::MatrixXd::Identity(p, p), Trusted{});
}

SymmetricMatrix SymmetricMatrix::zero(Index p) {
    if (p < 1) throw InputError("SymmetricMatrix::zero: p must be >= 1");
    return SymmetricMatrix(Eigen::MatrixXd::Zero(p, p), Trusted{});
}

SymmetricMatrix SymmetricMatrix::diagonal(const Eigen::VectorXd& d) {
    if (d.size() < 1 || !d.allFinite()) throw InputError("SymmetricMatrix::diagonal: bad diagonal");
    return SymmetricMatrix(Eigen::MatrixXd(d.asDiagonal()), Trusted{});
}

SymmetricMatrix operator+(const SymmetricMatrix& x, const SymmetricMatrix& y) {
    if (x.dim() != y.dim()) throw InputError("SymmetricMatrix +: dimension mismatch");
    return SymmetricMatrix(x.a_ + y.a_, SymmetricMatrix::Trusted{});
}

SymmetricMatrix operator-(const SymmetricMatrix& x, const SymmetricMatrix& y) {
    if (x.dim() != y.dim()) throw InputError("SymmetricMatrix -: dimension mismatch");
    return SymmetricMatrix(x.a_ - y.a_, SymmetricMatrix::Trusted{});
}

SymmetricMatrix operator*(double s, const SymmetricMatrix& x) {
    return SymmetricMatrix(s * x.a_, SymmetricMatrix::Trusted{});
}

EigenDecomposition sym_eigen(const SymmetricMatrix& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.dense(), Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) {
        const Eigen::MatrixXd& v = solver.eigenvectors();
        const double residual =
            (a.dense() * v - v * solver.eigenvalues().asDiagonal()).norm();
        throw ConvergenceError("sym_eigen: QR iteration did not converge", residual);
    }
    return sorted_descending(solver.eigenvalues(), solver.eigenvectors());
}

Eigen::VectorXd sym_eigenvalues(const SymmetricMatrix& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.dense(), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        // No eigenvectors to form a residual from; recompute with them.
        return sym_eigen(a).eigenvalues;
    }
    return solver.eigenvalues().reverse();
}

double operator_norm(const SymmetricMatrix& a, double w) {
    if (w == 1.0 || w == kInfNorm) {
        return a.dense().cwiseAbs().colwise().sum().maxCoeff();
    }
    if (w == 2.0) {
        const Eigen::VectorXd ev = sym_eigenvalues(a);
        return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    }
    std::ostringstream msg;
    msg << "operator_norm: w = " << w
        << " is not exactly computable; use operator_norm_bound for w outside {1, 2, inf}";
    throw InputError(msg.str());
}

double operator_norm_bound(const SymmetricMatrix& a, double w) {
    if (!(w >= 1.0)) throw InputError("operator_norm_bound: w must lie in [1, inf]");
    // |||A|||_1 == |||A|||_inf for symmetric A.
    return std::max(operator_norm(a, 1.0), operator_norm(a, 2.0));
}

double frobenius_norm(const SymmetricMatrix& a) { return a.dense().norm(); }

SymmetricMatrix matrix_function(const EigenDecomposition& eig,
                                const std::function<double(double)>& f) {
    const Index p = eig.eigenvalues.size();
    Eigen::VectorXd fv(p);
    for (Index i = 0; i < p; ++i) {
        const double lambda = eig.eigenvalues(i);
        fv(i) = f(lambda);
        if (!std::isfinite(fv(i))) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "matrix_function: f is undefined at eigenvalue " << lambda;
            throw DomainError(msg.str());
        }
    }
    const Eigen::MatrixXd& v = eig.eigenvectors;
    Eigen::MatrixXd out = v * fv.asDiagonal() * v.transpose();
    return SymmetricMatrix::from_lower(std::move(out));
}

SymmetricMatrix matrix_function(const SymmetricMatrix& a, const std::function<double(double)>& f) {
    return matrix_function(sym_eigen(a), f);
}

SymmetricMatrix load_symmetric_csv(const std::string& path) {
    return SymmetricMatrix(csv::read_matrix(path));
}

void save_symmetric_csv(const SymmetricMatrix& a, const std::string& path) {
    csv::write_matrix(a.dense(), path);
}

}  // namespace covthresh
