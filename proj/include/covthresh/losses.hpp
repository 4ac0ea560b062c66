#pragma once

#include "covthresh/matrix.hpp"

#include <functional>
#include <memory>
#include <string>

namespace covthresh {

enum class PhiKind { stein, von_neumann, squared_frobenius, custom };

/// User-supplied spectral generator phi with derivative dphi, strictly convex
/// on the open interval (lower, upper).
struct CustomPhi {
    std::string name;
    std::function<double(double)> phi;
    std::function<double(double)> dphi;
    double lower = -kInfNorm;
    double upper = kInfNorm;
};

/// Checks that dphi is finite and strictly increasing on a 257-point grid of
/// the declared interval and that it matches a central difference of phi to
/// 1e-4 relative. Throws InputError otherwise.
std::shared_ptr<const CustomPhi> make_custom_phi(CustomPhi spec);

/// A spectral generator phi from the eigen-separable family.
class Phi {
public:
    static Phi stein() { return Phi(PhiKind::stein, nullptr); }
    static Phi von_neumann() { return Phi(PhiKind::von_neumann, nullptr); }
    static Phi squared_frobenius() { return Phi(PhiKind::squared_frobenius, nullptr); }
    static Phi custom(std::shared_ptr<const CustomPhi> c);

    PhiKind kind() const noexcept { return kind_; }
    std::string name() const;

    /// Throws DomainError naming the eigenvalue and the divergence kind when
    /// lambda lies outside the domain. Stein and von Neumann need
    /// lambda >= 1e-12; no clamping is done.
    void check_domain(double lambda) const;
    double value(double lambda) const;
    double derivative(double lambda) const;

private:
    Phi(PhiKind kind, std::shared_ptr<const CustomPhi> c) : kind_(kind), custom_(std::move(c)) {}

    PhiKind kind_;
    std::shared_ptr<const CustomPhi> custom_;
};

enum class LossKind { operator_norm, frobenius_squared, bregman };

struct LossSpec {
    LossKind kind = LossKind::operator_norm;
    double w = 2.0;            ///< operator_norm only: 1, 2 or inf
    PhiKind phi = PhiKind::stein;  ///< bregman only
    std::shared_ptr<const CustomPhi> custom;  ///< bregman with phi == custom
    bool normalized = false;   ///< divide by p; ignored by operator losses

    static LossSpec op(double w);
    static LossSpec frobenius(bool normalized = false);
    static LossSpec bregman(PhiKind phi, bool normalized = false);

    void validate() const;
    Phi generator() const;
    /// CLI name: op1, op2, opinf, fro, stein, vn, bregman-fro or the custom name.
    std::string short_name() const;
    bool operator==(const LossSpec& other) const;
};

/// Parses a CLI loss name (op1, op2, opinf, fro, stein, vn, bregman-fro).
LossSpec loss_from_name(const std::string& name, bool normalized);

std::string to_string(LossKind kind);
std::string to_string(PhiKind kind);

/// |||A - B|||_w^2 for w in {1, 2, inf}.
double operator_loss(const SymmetricMatrix& a, const SymmetricMatrix& b, double w);

/// sum_{i,j} (v_i^T u_j)^2 [phi(lambda_i) - phi(g_j) - phi'(g_j)(lambda_i - g_j)]
/// over the eigenpairs (lambda_i, v_i) of X and (g_j, u_j) of Y.
double bregman_divergence(const SymmetricMatrix& x, const SymmetricMatrix& y, const Phi& phi);

/// Independent evaluation for the built-in generators:
/// stein tr(X Y^-1) - log det(X Y^-1) - p through Cholesky factors,
/// von Neumann tr(X log X - X log Y - X + Y) through matrix logarithms,
/// squared Frobenius as the entrywise sum of squares.
double closed_form_divergence(const SymmetricMatrix& x, const SymmetricMatrix& y, PhiKind kind);

/// Loss of `estimate` against `truth` per `spec`: operator losses as-is,
/// Frobenius and Bregman losses divided by p when normalized is set.
double normalized_loss(const SymmetricMatrix& estimate, const SymmetricMatrix& truth,
                       const LossSpec& spec);

}  // namespace covthresh
