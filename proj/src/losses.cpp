#include "covthresh/losses.hpp"

#include "covthresh/errors.hpp"

#include <cmath>
#include <sstream>

namespace covthresh {

namespace {

constexpr double kSpectralFloor = 1e-12;

void require_same_dim(const SymmetricMatrix& a, const SymmetricMatrix& b, const char* who) {
    if (a.dim() != b.dim()) {
        throw InputError(std::string(who) + ": dimension mismatch (" + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()) + ")");
    }
}

std::string format_value(double x) {
    std::ostringstream out;
    out.precision(17);
    out << x;
    return out.str();
}

/// log det of an SPD matrix through its Cholesky factor.
double spd_log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Eigen::LLT<Eigen::MatrixXd> require_spd(const SymmetricMatrix& a, const char* who) {
    Eigen::LLT<Eigen::MatrixXd> llt(a.dense());
    if (llt.info() != Eigen::Success) {
        const double min_ev = sym_eigenvalues(a).minCoeff();
        throw NotPsdError(std::string(who) + ": argument is not positive definite (min eigenvalue " +
                              format_value(min_ev) + ")",
                          min_ev);
    }
    return llt;
}

}  // namespace

std::shared_ptr<const CustomPhi> make_custom_phi(CustomPhi spec) {
    if (!spec.phi || !spec.dphi) throw InputError("custom phi: phi and dphi are both required");
    if (spec.name.empty()) throw InputError("custom phi: a name is required");
    if (!(spec.lower < spec.upper)) throw InputError("custom phi: empty domain interval");
    // Probe a bounded stand-in for infinite ends.
    const double lo = std::isfinite(spec.lower) ? spec.lower : std::min(-1e3, spec.upper - 1e3);
    const double hi = std::isfinite(spec.upper) ? spec.upper : std::max(1e3, lo + 1e3);
    constexpr int kGrid = 257;
    double previous = -kInfNorm;
    for (int i = 1; i < kGrid - 1; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / (kGrid - 1);
        const double d = spec.dphi(x);
        if (!std::isfinite(d) || !std::isfinite(spec.phi(x))) {
            throw InputError("custom phi '" + spec.name + "': non-finite value at " + format_value(x));
        }
        if (!(d > previous)) {
            throw InputError("custom phi '" + spec.name + "': derivative not strictly increasing near " +
                             format_value(x) + "; phi is not strictly convex");
        }
        previous = d;
        const double h = 1e-5 * std::max(1.0, std::abs(x));
        if (x - h > lo && x + h < hi) {
            const double fd = (spec.phi(x + h) - spec.phi(x - h)) / (2.0 * h);
            if (std::abs(fd - d) > 1e-4 * std::max(1.0, std::abs(d))) {
                throw InputError("custom phi '" + spec.name + "': dphi disagrees with phi at " +
                                 format_value(x));
            }
        }
    }
    return std::make_shared<const CustomPhi>(std::move(spec));
}

Phi Phi::custom(std::shared_ptr<const CustomPhi> c) {
    if (!c) throw InputError("Phi::custom: null generator");
    return Phi(PhiKind::custom, std::move(c));
}

std::string Phi::name() const {
    return kind_ == PhiKind::custom ? custom_->name : to_string(kind_);
}

void Phi::check_domain(double lambda) const {
    bool ok = std::isfinite(lambda);
    switch (kind_) {
        case PhiKind::stein:
        case PhiKind::von_neumann:
            ok = ok && lambda >= kSpectralFloor;
            break;
        case PhiKind::squared_frobenius:
            break;
        case PhiKind::custom:
            ok = ok && lambda > custom_->lower && lambda < custom_->upper;
            break;
    }
    if (!ok) {
        throw DomainError("bregman divergence (" + name() + "): eigenvalue " + format_value(lambda) +
                          " lies outside the domain of phi");
    }
}

double Phi::value(double lambda) const {
    switch (kind_) {
        case PhiKind::stein: return -std::log(lambda);
        case PhiKind::von_neumann: return lambda * std::log(lambda) - lambda;
        case PhiKind::squared_frobenius: return lambda * lambda;
        case PhiKind::custom: return custom_->phi(lambda);
    }
    return 0.0;
}

double Phi::derivative(double lambda) const {
    switch (kind_) {
        case PhiKind::stein: return -1.0 / lambda;
        case PhiKind::von_neumann: return std::log(lambda);
        case PhiKind::squared_frobenius: return 2.0 * lambda;
        case PhiKind::custom: return custom_->dphi(lambda);
    }
    return 0.0;
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::operator_norm: return "operator";
        case LossKind::frobenius_squared: return "frobenius-squared";
        case LossKind::bregman: return "bregman";
    }
    return "?";
}

std::string to_string(PhiKind kind) {
    switch (kind) {
        case PhiKind::stein: return "stein";
        case PhiKind::von_neumann: return "von-neumann";
        case PhiKind::squared_frobenius: return "squared-frobenius";
        case PhiKind::custom: return "custom";
    }
    return "?";
}

LossSpec LossSpec::op(double w) {
    LossSpec s;
    s.kind = LossKind::operator_norm;
    s.w = w;
    s.validate();
    return s;
}

LossSpec LossSpec::frobenius(bool normalized) {
    LossSpec s;
    s.kind = LossKind::frobenius_squared;
    s.normalized = normalized;
    return s;
}

LossSpec LossSpec::bregman(PhiKind phi, bool normalized) {
    if (phi == PhiKind::custom) throw InputError("LossSpec::bregman: custom phi needs a generator");
    LossSpec s;
    s.kind = LossKind::bregman;
    s.phi = phi;
    s.normalized = normalized;
    return s;
}

void LossSpec::validate() const {
    if (kind == LossKind::operator_norm && !(w == 1.0 || w == 2.0 || w == kInfNorm)) {
        throw InputError("LossSpec: operator loss needs w in {1, 2, inf}");
    }
    if (kind == LossKind::bregman && phi == PhiKind::custom && !custom) {
        throw InputError("LossSpec: custom phi without a generator");
    }
}

Phi LossSpec::generator() const {
    if (kind != LossKind::bregman) throw InputError("LossSpec::generator: not a Bregman loss");
    switch (phi) {
        case PhiKind::stein: return Phi::stein();
        case PhiKind::von_neumann: return Phi::von_neumann();
        case PhiKind::squared_frobenius: return Phi::squared_frobenius();
        case PhiKind::custom: return Phi::custom(custom);
    }
    return Phi::stein();
}

std::string LossSpec::short_name() const {
    switch (kind) {
        case LossKind::operator_norm:
            return w == 1.0 ? "op1" : w == 2.0 ? "op2" : "opinf";
        case LossKind::frobenius_squared:
            return "fro";
        case LossKind::bregman:
            switch (phi) {
                case PhiKind::stein: return "stein";
                case PhiKind::von_neumann: return "vn";
                case PhiKind::squared_frobenius: return "bregman-fro";
                case PhiKind::custom: return custom ? custom->name : "custom";
            }
    }
    return "?";
}

bool LossSpec::operator==(const LossSpec& other) const {
    if (kind != other.kind || normalized != other.normalized) return false;
    if (kind == LossKind::operator_norm) return w == other.w;
    if (kind == LossKind::bregman) {
        if (phi != other.phi) return false;
        if (phi == PhiKind::custom) return custom == other.custom;
    }
    return true;
}

LossSpec loss_from_name(const std::string& name, bool normalized) {
    LossSpec s;
    if (name == "op1") s = LossSpec::op(1.0);
    else if (name == "op2") s = LossSpec::op(2.0);
    else if (name == "opinf") s = LossSpec::op(kInfNorm);
    else if (name == "fro") s = LossSpec::frobenius();
    else if (name == "stein") s = LossSpec::bregman(PhiKind::stein);
    else if (name == "vn") s = LossSpec::bregman(PhiKind::von_neumann);
    else if (name == "bregman-fro") s = LossSpec::bregman(PhiKind::squared_frobenius);
    else throw InputError("unknown loss '" + name + "' (expected op1, op2, opinf, fro, stein, vn)");
    s.normalized = normalized;
    return s;
}

double operator_loss(const SymmetricMatrix& a, const SymmetricMatrix& b, double w) {
    require_same_dim(a, b, "operator_loss");
    if (!(w == 1.0 || w == 2.0 || w == kInfNorm)) {
        throw InputError("operator_loss: w must be 1, 2 or inf");
    }
    const double norm = operator_norm(a - b, w);
    return norm * norm;
}

double bregman_divergence(const SymmetricMatrix& x, const SymmetricMatrix& y, const Phi& phi) {
    require_same_dim(x, y, "bregman_divergence");
    const EigenDecomposition ex = sym_eigen(x);
    const EigenDecomposition ey = sym_eigen(y);
    const Index p = x.dim();
    for (Index i = 0; i < p; ++i) {
        phi.check_domain(ex.eigenvalues(i));
        phi.check_domain(ey.eigenvalues(i));
    }
    const Eigen::MatrixXd overlap = (ex.eigenvectors.transpose() * ey.eigenvectors).cwiseAbs2();
    double total = 0.0;
    for (Index j = 0; j < p; ++j) {
        const double g = ey.eigenvalues(j);
        const double fg = phi.value(g);
        const double dg = phi.derivative(g);
        for (Index i = 0; i < p; ++i) {
            const double l = ex.eigenvalues(i);
            total += overlap(i, j) * (phi.value(l) - fg - dg * (l - g));
        }
    }
    return total;
}

double closed_form_divergence(const SymmetricMatrix& x, const SymmetricMatrix& y, PhiKind kind) {
    require_same_dim(x, y, "closed_form_divergence");
    const auto p = static_cast<double>(x.dim());
    switch (kind) {
        case PhiKind::stein: {
            const auto lx = require_spd(x, "stein divergence");
            const auto ly = require_spd(y, "stein divergence");
            const double trace = ly.solve(x.dense()).trace();
            return trace - (spd_log_det(lx) - spd_log_det(ly)) - p;
        }
        case PhiKind::von_neumann: {
            require_spd(x, "von Neumann divergence");
            require_spd(y, "von Neumann divergence");
            auto safe_log = [](double l) { return std::log(l); };
            const Eigen::MatrixXd log_x = matrix_function(x, safe_log).dense();
            const Eigen::MatrixXd log_y = matrix_function(y, safe_log).dense();
            return (x.dense() * (log_x - log_y)).trace() - x.dense().trace() + y.dense().trace();
        }
        case PhiKind::squared_frobenius:
            return (x.dense() - y.dense()).squaredNorm();
        case PhiKind::custom:
            break;
    }
    throw InputError("closed_form_divergence: no closed form for a custom phi");
}

double normalized_loss(const SymmetricMatrix& estimate, const SymmetricMatrix& truth,
                       const LossSpec& spec) {
    spec.validate();
    require_same_dim(estimate, truth, "normalized_loss");
    const double scale = spec.normalized ? 1.0 / static_cast<double>(truth.dim()) : 1.0;
    switch (spec.kind) {
        case LossKind::operator_norm:
            return operator_loss(estimate, truth, spec.w);
        case LossKind::frobenius_squared:
            return scale * (estimate.dense() - truth.dense()).squaredNorm();
        case LossKind::bregman:
            return scale * bregman_divergence(estimate, truth, spec.generator());
    }
    return 0.0;
}

}  // namespace covthresh
