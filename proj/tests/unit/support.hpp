#pragma once

#include "covthresh/matrix.hpp"
#include "covthresh/rng.hpp"

#include <Eigen/QR>

namespace covthresh::testing {

inline Eigen::MatrixXd random_orthogonal(Index p, StreamRng& rng) {
    Eigen::MatrixXd g(p, p);
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < p; ++i) g(i, j) = rng.normal();
    }
    return Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
}

inline SymmetricMatrix random_symmetric(Index p, StreamRng& rng) {
    Eigen::MatrixXd g(p, p);
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < p; ++i) g(i, j) = rng.normal();
    }
    return SymmetricMatrix(0.5 * (g + g.transpose()));
}

/// Q diag(lambda) Q^T with lambda uniform on [lo, hi].
inline SymmetricMatrix random_spd(Index p, double lo, double hi, StreamRng& rng) {
    const Eigen::MatrixXd q = random_orthogonal(p, rng);
    Eigen::VectorXd lambda(p);
    for (Index i = 0; i < p; ++i) lambda(i) = lo + (hi - lo) * rng.uniform();
    const Eigen::MatrixXd a = q * lambda.asDiagonal() * q.transpose();
    return SymmetricMatrix(0.5 * (a + a.transpose()));
}

inline double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace covthresh::testing
