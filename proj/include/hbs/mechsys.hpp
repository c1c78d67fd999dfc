// Mechanical systems defined by a mass-matrix field and a potential:
// Lagrangian/Hamiltonian evaluation, Legendre transforms and Hamilton's
// equations on T*Q.
#pragma once

#include "hbs/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace hbs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Configuration coordinates q^i.
using ChartPoint = Vector;

/// Phase point (q, q̇) on TQ.
struct VelocityState {
    ChartPoint q;
    Vector v;
};

/// Phase point (q, p) on T*Q.
struct MomentumState {
    ChartPoint q;
    Vector p;
};

/// Right-hand side of Hamilton's equations at a phase point.
struct PhaseVelocity {
    Vector q_dot;
    Vector p_dot;
};

/// Named scalar parameters of a system (ordered, so serialisation is stable).
using Parameters = std::map<std::string, double>;

namespace detail {

/// Central-difference step scaled with the magnitude of the coordinate.
inline double fd_step(double x) { return 1e-6 * std::max(1.0, std::abs(x)); }

inline void require_finite(const Vector& x, const char* what) {
    if (!x.allFinite()) {
        throw Error(ErrorKind::NonFiniteInput, std::string(what) + " contains non-finite entries");
    }
}

inline void require_size(const Vector& x, Eigen::Index n, const char* what) {
    if (x.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, std::string(what) + " has size " +
                                                      std::to_string(x.size()) + ", expected " +
                                                      std::to_string(n));
    }
}

} // namespace detail

/// A simple mechanical system L = ½ q̇ᵀM(q)q̇ − V(q).
///
/// The mass matrix, potential and (optionally) their derivatives are plain
/// callables, so systems are registered programmatically. Missing
/// derivatives fall back to central differences with step
/// 1e-6·max(1, |q^i|). Instances are immutable once built.
class MechanicalSystem {
public:
    using MassMatrixFn = std::function<Matrix(const Vector&)>;
    using PotentialFn = std::function<double(const Vector&)>;
    using GradientFn = std::function<Vector(const Vector&)>;
    /// Returns the n partial derivatives ∂M/∂q^i.
    using MassDerivativeFn = std::function<std::vector<Matrix>(const Vector&)>;

    MechanicalSystem(std::string name, Eigen::Index dimension, MassMatrixFn mass_matrix,
                     PotentialFn potential, Parameters parameters = {},
                     std::vector<std::string> coordinate_names = {})
        : name_(std::move(name)), n_(dimension), mass_matrix_(std::move(mass_matrix)),
          potential_(std::move(potential)), parameters_(std::move(parameters)),
          coordinate_names_(std::move(coordinate_names)) {
        if (n_ < 1) {
            throw Error(ErrorKind::ValidationError, "system dimension must be at least 1");
        }
        if (!mass_matrix_ || !potential_) {
            throw Error(ErrorKind::ValidationError, "mass matrix and potential are required");
        }
        if (coordinate_names_.empty()) {
            for (Eigen::Index i = 0; i < n_; ++i) {
                coordinate_names_.push_back("q" + std::to_string(i + 1));
            }
        }
        if (static_cast<Eigen::Index>(coordinate_names_.size()) != n_) {
            throw Error(ErrorKind::ValidationError, "one coordinate name per dimension required");
        }
    }

    MechanicalSystem with_potential_gradient(GradientFn gradient) const {
        MechanicalSystem copy = *this;
        copy.potential_gradient_ = std::move(gradient);
        return copy;
    }

    MechanicalSystem with_mass_matrix_derivative(MassDerivativeFn derivative) const {
        MechanicalSystem copy = *this;
        copy.mass_derivative_ = std::move(derivative);
        return copy;
    }

    const std::string& name() const { return name_; }
    Eigen::Index dimension() const { return n_; }
    const Parameters& parameters() const { return parameters_; }
    const std::vector<std::string>& coordinate_names() const { return coordinate_names_; }
    bool has_analytic_potential_gradient() const { return static_cast<bool>(potential_gradient_); }
    bool has_analytic_mass_derivative() const { return static_cast<bool>(mass_derivative_); }

    /// Raw M(q) as supplied, checked for shape, finiteness and symmetry.
    Matrix raw_mass_matrix(const ChartPoint& q) const {
        detail::require_size(q, n_, "configuration");
        detail::require_finite(q, "configuration");
        Matrix m = mass_matrix_(q);
        if (m.rows() != n_ || m.cols() != n_) {
            throw Error(ErrorKind::DimensionMismatch, "mass matrix has wrong shape");
        }
        if (!m.allFinite()) {
            throw Error(ErrorKind::NonFiniteInput, "mass matrix contains non-finite entries");
        }
        const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
        if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw Error(ErrorKind::NotPositiveDefinite, "mass matrix is not symmetric");
        }
        return m;
    }

    double potential(const ChartPoint& q) const {
        detail::require_size(q, n_, "configuration");
        detail::require_finite(q, "configuration");
        const double value = potential_(q);
        if (!std::isfinite(value)) {
            throw Error(ErrorKind::NonFiniteInput, "potential is not finite");
        }
        return value;
    }

    Vector potential_gradient(const ChartPoint& q) const {
        detail::require_size(q, n_, "configuration");
        detail::require_finite(q, "configuration");
        if (potential_gradient_) {
            Vector g = potential_gradient_(q);
            detail::require_size(g, n_, "potential gradient");
            return g;
        }
        Vector g(n_);
        for (Eigen::Index i = 0; i < n_; ++i) {
            const double h = detail::fd_step(q[i]);
            Vector plus = q, minus = q;
            plus[i] += h;
            minus[i] -= h;
            g[i] = (potential_(plus) - potential_(minus)) / (2.0 * h);
        }
        return g;
    }

    std::vector<Matrix> mass_matrix_derivative(const ChartPoint& q) const {
        detail::require_size(q, n_, "configuration");
        if (mass_derivative_) {
            auto d = mass_derivative_(q);
            if (static_cast<Eigen::Index>(d.size()) != n_) {
                throw Error(ErrorKind::DimensionMismatch, "need one ∂M/∂q^i per coordinate");
            }
            return d;
        }
        std::vector<Matrix> d;
        d.reserve(static_cast<std::size_t>(n_));
        for (Eigen::Index i = 0; i < n_; ++i) {
            const double h = detail::fd_step(q[i]);
            Vector plus = q, minus = q;
            plus[i] += h;
            minus[i] -= h;
            d.push_back((mass_matrix_(plus) - mass_matrix_(minus)) / (2.0 * h));
        }
        return d;
    }

private:
    std::string name_;
    Eigen::Index n_;
    MassMatrixFn mass_matrix_;
    PotentialFn potential_;
    GradientFn potential_gradient_;
    MassDerivativeFn mass_derivative_;
    Parameters parameters_;
    std::vector<std::string> coordinate_names_;
};

/// Cholesky factor of M(q); throws NotPositiveDefinite when it fails.
inline Eigen::LLT<Matrix> factor_mass_matrix(const MechanicalSystem& sys, const ChartPoint& q) {
    Eigen::LLT<Matrix> llt(sys.raw_mass_matrix(q));
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::NotPositiveDefinite, "Cholesky factorisation of M(q) failed");
    }
    return llt;
}

inline Matrix mass_matrix(const MechanicalSystem& sys, const ChartPoint& q) {
    Matrix m = sys.raw_mass_matrix(q);
    if (Eigen::LLT<Matrix>(m).info() != Eigen::Success) {
        throw Error(ErrorKind::NotPositiveDefinite, "Cholesky factorisation of M(q) failed");
    }
    return m;
}

inline void validate(const MechanicalSystem& sys, const VelocityState& s) {
    detail::require_size(s.q, sys.dimension(), "configuration");
    detail::require_size(s.v, sys.dimension(), "velocity");
    detail::require_finite(s.q, "configuration");
    detail::require_finite(s.v, "velocity");
}

inline void validate(const MechanicalSystem& sys, const MomentumState& s) {
    detail::require_size(s.q, sys.dimension(), "configuration");
    detail::require_size(s.p, sys.dimension(), "momentum");
    detail::require_finite(s.q, "configuration");
    detail::require_finite(s.p, "momentum");
}

inline double kinetic_energy(const MechanicalSystem& sys, const VelocityState& s) {
    validate(sys, s);
    return 0.5 * s.v.dot(mass_matrix(sys, s.q) * s.v);
}

inline double lagrangian(const MechanicalSystem& sys, const VelocityState& s) {
    return kinetic_energy(sys, s) - sys.potential(s.q);
}

/// H(q, p) = ½ pᵀM(q)⁻¹p + V(q).
inline double hamiltonian(const MechanicalSystem& sys, const MomentumState& s) {
    validate(sys, s);
    const auto llt = factor_mass_matrix(sys, s.q);
    return 0.5 * s.p.dot(llt.solve(s.p)) + sys.potential(s.q);
}

/// Fiber derivative p = M(q) q̇.
inline MomentumState legendre_to_momentum(const MechanicalSystem& sys, const VelocityState& s) {
    validate(sys, s);
    return {s.q, sys.raw_mass_matrix(s.q) * s.v};
}

/// Inverse fiber derivative q̇ = M(q)⁻¹ p.
inline VelocityState legendre_to_velocity(const MechanicalSystem& sys, const MomentumState& s) {
    validate(sys, s);
    return {s.q, factor_mass_matrix(sys, s.q).solve(s.p)};
}

/// Hamilton's equations q̇ = M⁻¹p, ṗ_i = ½ q̇ᵀ(∂M/∂q^i)q̇ − ∂V/∂q^i.
///
/// The kinetic term uses ∂M⁻¹/∂q^i = −M⁻¹(∂M/∂q^i)M⁻¹.
inline PhaseVelocity hamiltonian_vector_field(const MechanicalSystem& sys, const MomentumState& s) {
    validate(sys, s);
    const auto llt = factor_mass_matrix(sys, s.q);
    Vector q_dot = llt.solve(s.p);
    const auto dM = sys.mass_matrix_derivative(s.q);
    Vector p_dot = -sys.potential_gradient(s.q);
    for (Eigen::Index i = 0; i < sys.dimension(); ++i) {
        p_dot[i] += 0.5 * q_dot.dot(dM[static_cast<std::size_t>(i)] * q_dot);
    }
    return {std::move(q_dot), std::move(p_dot)};
}

// -----------------------------------------------------------------------------
// Built-in systems
// -----------------------------------------------------------------------------

namespace detail {

inline double require_parameter(const Parameters& params, const std::string& key) {
    const auto it = params.find(key);
    if (it == params.end()) {
        throw Error(ErrorKind::ValidationError, "missing parameter '" + key + "'");
    }
    if (!std::isfinite(it->second)) {
        throw Error(ErrorKind::ValidationError, "parameter '" + key + "' is not finite");
    }
    return it->second;
}

} // namespace detail

/// Pendulum of mass m and length l hanging from a cart of mass M.
/// Coordinates (θ, x); V(θ) = −m l g cos θ.
inline MechanicalSystem pendulum_cart(double m, double M, double l, double gravity) {
    if (!(m > 0.0) || !(M > 0.0) || !(l > 0.0) || !std::isfinite(gravity)) {
        throw Error(ErrorKind::ValidationError, "pendulum-cart needs m, M, l > 0 and finite gravity");
    }
    auto mass = [=](const Vector& q) {
        const double c = std::cos(q[0]);
        Matrix out(2, 2);
        out << m * l * l, m * l * c, m * l * c, M + m;
        return out;
    };
    auto potential = [=](const Vector& q) { return -m * l * gravity * std::cos(q[0]); };
    auto gradient = [=](const Vector& q) {
        Vector g(2);
        g << m * l * gravity * std::sin(q[0]), 0.0;
        return g;
    };
    auto derivative = [=](const Vector& q) {
        const double s = std::sin(q[0]);
        Matrix d_theta(2, 2);
        d_theta << 0.0, -m * l * s, -m * l * s, 0.0;
        return std::vector<Matrix>{d_theta, Matrix::Zero(2, 2)};
    };
    return MechanicalSystem("pendulum-cart", 2, mass, potential,
                            {{"m", m}, {"M", M}, {"l", l}, {"gravity", gravity}},
                            {"theta", "x"})
        .with_potential_gradient(gradient)
        .with_mass_matrix_derivative(derivative);
}

inline MechanicalSystem pendulum_cart(const Parameters& params) {
    return pendulum_cart(detail::require_parameter(params, "m"),
                         detail::require_parameter(params, "M"),
                         detail::require_parameter(params, "l"),
                         detail::require_parameter(params, "gravity"));
}

/// Unit-mass free particle in the plane (identity metric, V = 0).
inline MechanicalSystem free_particle_2d() {
    return MechanicalSystem(
               "free-particle-2d", 2, [](const Vector&) -> Matrix { return Matrix::Identity(2, 2); },
               [](const Vector&) { return 0.0; }, {}, {"x1", "x2"})
        .with_potential_gradient([](const Vector&) -> Vector { return Vector::Zero(2); })
        .with_mass_matrix_derivative([](const Vector&) {
            return std::vector<Matrix>{Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
        });
}

struct SystemEntry {
    std::string name;
    std::string description;
    Parameters defaults;
    std::vector<std::string> coordinates;
    std::function<MechanicalSystem(const Parameters&)> make;
};

inline const std::vector<SystemEntry>& system_registry() {
    static const std::vector<SystemEntry> registry = {
        {"free-particle-2d", "unit-mass particle in the plane, identity metric, no potential", {},
         {"x1", "x2"}, [](const Parameters&) { return free_particle_2d(); }},
        {"pendulum-cart", "pendulum (m, l) on a cart (M) under gravity; coordinates (theta, x)",
         {{"m", 1.0}, {"M", 1.0}, {"l", 1.0}, {"gravity", 9.8}},
         {"theta", "x"}, [](const Parameters& p) { return pendulum_cart(p); }},
    };
    return registry;
}

inline const SystemEntry& find_system(const std::string& name) {
    for (const auto& entry : system_registry()) {
        if (entry.name == name) {
            return entry;
        }
    }
    throw Error(ErrorKind::ValidationError, "unknown system '" + name + "'");
}

/// Builds a registered system; unspecified parameters take their defaults.
inline MechanicalSystem make_system(const std::string& name, const Parameters& overrides = {}) {
    const auto& entry = find_system(name);
    Parameters params = entry.defaults;
    for (const auto& [key, value] : overrides) {
        if (!entry.defaults.contains(key)) {
            throw Error(ErrorKind::ValidationError,
                        "system '" + name + "' has no parameter '" + key + "'");
        }
        params[key] = value;
    }
    return entry.make(params);
}

} // namespace hbs
