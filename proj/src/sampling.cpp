#include "covthresh/sampling.hpp"

#include "covthresh/csv.hpp"
#include "covthresh/errors.hpp"

#include <cmath>
#include <sstream>

namespace covthresh {

DataMatrix::DataMatrix(Eigen::MatrixXd rows) : x_(std::move(rows)) {
    if (x_.rows() < 1 || x_.cols() < 1) throw InputError("DataMatrix: need n >= 1 and p >= 1");
    if (!x_.allFinite()) throw InputError("DataMatrix: non-finite observation");
}

GaussianSampler::GaussianSampler(const SymmetricMatrix& sigma) {
    const EigenDecomposition eig = sym_eigen(sigma);
    const double spectral = std::max(std::abs(eig.eigenvalues(0)),
                                     std::abs(eig.eigenvalues(eig.eigenvalues.size() - 1)));
    const double floor = -1e-10 * spectral;
    const double min_ev = eig.eigenvalues.minCoeff();
    if (min_ev < floor) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "GaussianSampler: covariance is not PSD (min eigenvalue " << min_ev << ")";
        throw NotPsdError(msg.str(), min_ev);
    }
    const Eigen::VectorXd roots = eig.eigenvalues.cwiseMax(0.0).cwiseSqrt();
    root_ = eig.eigenvectors * roots.asDiagonal() * eig.eigenvectors.transpose();
    root_ = (0.5 * (root_ + root_.transpose())).eval();
}

DataMatrix GaussianSampler::draw(Index n, RngSeed seed) const {
    if (n < 1) throw InputError("GaussianSampler::draw: n must be >= 1");
    StreamRng rng(seed);
    // Column-major n x p storage; fill the transpose so each observation's
    // p normals are consecutive in the stream.
    Eigen::MatrixXd z(dim(), n);
    rng.fill_normal(std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
    Eigen::MatrixXd x = z.transpose() * root_;
    return DataMatrix(std::move(x));
}

DataMatrix sample_gaussian(const SymmetricMatrix& sigma, Index n, RngSeed seed) {
    return GaussianSampler(sigma).draw(n, seed);
}

SymmetricMatrix mle_covariance(const DataMatrix& x) {
    const Eigen::RowVectorXd mean = x.rows().colwise().mean();
    const Eigen::MatrixXd centered = x.rows().rowwise() - mean;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(x.p(), x.p());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
    gram /= static_cast<double>(x.n());
    return SymmetricMatrix::from_lower(std::move(gram));
}

Eigen::MatrixXd tail_probe(const SymmetricMatrix& sigma, Index n, double t, Index replicates,
                           RngSeed seed) {
    if (!(t > 0.0)) throw InputError("tail_probe: t must be positive");
    if (replicates < 1) throw InputError("tail_probe: replicates = 0 leaves nothing to average");
    const GaussianSampler sampler(sigma);
    Eigen::MatrixXd exceed = Eigen::MatrixXd::Zero(sigma.dim(), sigma.dim());
    for (Index r = 0; r < replicates; ++r) {
        const SymmetricMatrix est = mle_covariance(sampler.draw(n, seed.child(static_cast<std::uint64_t>(r))));
        exceed += ((est.dense() - sigma.dense()).cwiseAbs().array() > t).cast<double>().matrix();
    }
    return exceed / static_cast<double>(replicates);
}

DataMatrix load_data_csv(const std::string& path) { return DataMatrix(csv::read_matrix(path)); }

void save_data_csv(const DataMatrix& x, const std::string& path) {
    csv::write_matrix(x.rows(), path);
}

}  // namespace covthresh
