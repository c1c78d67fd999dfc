// Abelian symmetry actions on Q: momentum map, locked inertia tensor,
// mechanical connection and the horizontal/vertical splitting of TQ.
#pragma once

#include "hbs/mechsys.hpp"

#include <optional>

namespace hbs {

/// Element of the Lie algebra g ≅ R^k, in the generator basis.
struct LieAlgebraVector {
    Vector xi;
};

/// Value of the momentum map in g* ≅ R^k.
struct MomentumValue {
    Vector mu;
};

/// Infinitesimal generators ξ_a(q), a = 1..k, of a free abelian action.
///
/// When every generator is a coordinate field ∂/∂q^i the action also knows
/// its fiber coordinates, and the shape projection Tπ simply drops them.
class SymmetryAction {
public:
    using GeneratorFn = std::function<Vector(const Vector&)>;

    SymmetryAction(Eigen::Index dimension, std::vector<GeneratorFn> generators,
                   std::optional<std::vector<Eigen::Index>> coordinate_indices = std::nullopt)
        : n_(dimension), generators_(std::move(generators)),
          coordinate_indices_(std::move(coordinate_indices)) {
        const auto k = static_cast<Eigen::Index>(generators_.size());
        if (k < 1 || k > n_) {
            throw Error(ErrorKind::ValidationError, "symmetry algebra dimension must satisfy 1 <= k <= n");
        }
        if (coordinate_indices_) {
            if (static_cast<Eigen::Index>(coordinate_indices_->size()) != k) {
                throw Error(ErrorKind::ValidationError, "one coordinate index per generator required");
            }
            for (auto i : *coordinate_indices_) {
                if (i < 0 || i >= n_) {
                    throw Error(ErrorKind::ValidationError, "generator coordinate index out of range");
                }
            }
        }
    }

    /// Translations along the listed coordinates.
    static SymmetryAction coordinate(Eigen::Index dimension, std::vector<Eigen::Index> indices) {
        std::vector<GeneratorFn> gens;
        for (auto i : indices) {
            if (i < 0 || i >= dimension) {
                throw Error(ErrorKind::ValidationError, "generator coordinate index out of range");
            }
            gens.push_back([dimension, i](const Vector&) -> Vector {
                return Vector::Unit(dimension, i);
            });
        }
        std::vector<Eigen::Index> sorted = indices;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw Error(ErrorKind::ValidationError, "duplicate generator coordinate");
        }
        return SymmetryAction(dimension, std::move(gens), std::move(indices));
    }

    Eigen::Index dimension() const { return n_; }
    Eigen::Index algebra_dimension() const { return static_cast<Eigen::Index>(generators_.size()); }
    const std::optional<std::vector<Eigen::Index>>& coordinate_indices() const {
        return coordinate_indices_;
    }

    Vector generator(Eigen::Index a, const ChartPoint& q) const {
        Vector xi = generators_.at(static_cast<std::size_t>(a))(q);
        detail::require_size(xi, n_, "generator");
        detail::require_finite(xi, "generator");
        return xi;
    }

    /// n×k matrix whose columns are ξ_a(q).
    Matrix generator_matrix(const ChartPoint& q) const {
        detail::require_size(q, n_, "configuration");
        detail::require_finite(q, "configuration");
        Matrix xi(n_, algebra_dimension());
        for (Eigen::Index a = 0; a < algebra_dimension(); ++a) {
            xi.col(a) = generator(a, q);
        }
        return xi;
    }

    /// Complement of the fiber coordinates; only defined for coordinate actions.
    std::vector<Eigen::Index> shape_indices() const {
        if (!coordinate_indices_) {
            throw Error(ErrorKind::ShapeProjectionUnavailable,
                        "shape projection needs coordinate generators");
        }
        std::vector<Eigen::Index> shape;
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (std::find(coordinate_indices_->begin(), coordinate_indices_->end(), i) ==
                coordinate_indices_->end()) {
                shape.push_back(i);
            }
        }
        return shape;
    }

    /// Tπ(v): the shape components of a velocity.
    Vector shape_projection(const Vector& v) const {
        const auto shape = shape_indices();
        Vector out(static_cast<Eigen::Index>(shape.size()));
        for (std::size_t j = 0; j < shape.size(); ++j) {
            out[static_cast<Eigen::Index>(j)] = v[shape[j]];
        }
        return out;
    }

    /// Directional derivative Dξ_a(q)·w by central differences.
    Vector generator_derivative(Eigen::Index a, const ChartPoint& q, const Vector& w) const {
        const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
        const double norm = w.norm();
        if (norm == 0.0) {
            return Vector::Zero(n_);
        }
        const double h = 1e-6 * scale / norm;
        return (generator(a, q + h * w) - generator(a, q - h * w)) / (2.0 * h);
    }

private:
    Eigen::Index n_;
    std::vector<GeneratorFn> generators_;
    std::optional<std::vector<Eigen::Index>> coordinate_indices_;
};

namespace detail {

inline void require_compatible(const MechanicalSystem& sys, const SymmetryAction& action) {
    if (sys.dimension() != action.dimension()) {
        throw Error(ErrorKind::DimensionMismatch, "symmetry action and system dimensions differ");
    }
}

inline Eigen::LLT<Matrix> factor_spd(const Matrix& m, const char* what) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::NotPositiveDefinite, std::string(what) + " is not positive-definite");
    }
    return llt;
}

} // namespace detail

/// Cotangent-lift momentum map J_a(q, p) = ⟨p, ξ_a(q)⟩.
///
/// This is the equivariant momentum map of the lifted action, i.e. the one
/// whose Hamiltonian vector fields reproduce the infinitesimal generators on
/// T*Q.
inline MomentumValue momentum_map(const SymmetryAction& action, const MomentumState& s) {
    detail::require_size(s.p, action.dimension(), "momentum");
    detail::require_finite(s.p, "momentum");
    return {action.generator_matrix(s.q).transpose() * s.p};
}

/// 𝕀_ab(q) = ξ_a(q)ᵀ M(q) ξ_b(q).
inline Matrix locked_inertia(const MechanicalSystem& sys, const SymmetryAction& action,
                             const ChartPoint& q) {
    detail::require_compatible(sys, action);
    const Matrix xi = action.generator_matrix(q);
    Matrix inertia = xi.transpose() * mass_matrix(sys, q) * xi;
    inertia = 0.5 * (inertia + inertia.transpose()).eval();
    detail::factor_spd(inertia, "locked inertia tensor");
    return inertia;
}

/// 𝒜(q, v) = 𝕀(q)⁻¹ J(q, M(q)v), the locked angular velocity.
inline LieAlgebraVector mechanical_connection(const MechanicalSystem& sys,
                                              const SymmetryAction& action,
                                              const VelocityState& s) {
    detail::require_compatible(sys, action);
    validate(sys, s);
    const Matrix xi = action.generator_matrix(s.q);
    const Matrix m = mass_matrix(sys, s.q);
    Matrix inertia = xi.transpose() * m * xi;
    inertia = 0.5 * (inertia + inertia.transpose()).eval();
    const auto llt = detail::factor_spd(inertia, "locked inertia tensor");
    return {llt.solve(xi.transpose() * (m * s.v))};
}

struct VelocitySplit {
    Vector horizontal;
    Vector vertical;
};

/// v = v_hor + v_ver with v_ver = Σ 𝒜_a ξ_a and J(q, M v_hor) = 0.
inline VelocitySplit horizontal_vertical_split(const MechanicalSystem& sys,
                                               const SymmetryAction& action,
                                               const VelocityState& s) {
    const auto connection = mechanical_connection(sys, action, s);
    Vector vertical = action.generator_matrix(s.q) * connection.xi;
    Vector horizontal = s.v - vertical;
    return {std::move(horizontal), std::move(vertical)};
}

struct InvarianceReport {
    /// Largest |d/dε L(Φ_ε(q), TΦ_ε v)| at ε = 0 over samples and generators.
    double max_derivative = 0.0;
    std::size_t worst_sample = 0;
    Eigen::Index worst_generator = 0;
};

/// Derivative of L along the tangent-lifted flow of each generator, by
/// central differences. Near zero for a genuine symmetry.
inline InvarianceReport check_lagrangian_invariance(const MechanicalSystem& sys,
                                                    const SymmetryAction& action,
                                                    const std::vector<VelocityState>& samples) {
    detail::require_compatible(sys, action);
    if (samples.empty()) {
        throw Error(ErrorKind::ValidationError, "invariance check needs at least one sample");
    }
    InvarianceReport report;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        validate(sys, s);
        for (Eigen::Index a = 0; a < action.algebra_dimension(); ++a) {
            // To second order the lifted flow is (q + εξ, v + ε Dξ·v); the ε²
            // terms cancel in the central difference.
            const Vector xi = action.generator(a, s.q);
            const Vector dxi_v = action.generator_derivative(a, s.q, s.v);
            const double eps = 1e-6 * std::max(1.0, s.q.cwiseAbs().maxCoeff());
            const double plus = lagrangian(sys, {s.q + eps * xi, s.v + eps * dxi_v});
            const double minus = lagrangian(sys, {s.q - eps * xi, s.v - eps * dxi_v});
            const double derivative = std::abs((plus - minus) / (2.0 * eps));
            if (derivative > report.max_derivative) {
                report.max_derivative = derivative;
                report.worst_sample = i;
                report.worst_generator = a;
            }
        }
    }
    return report;
}

/// max_{a,b} |[ξ_a, ξ_b](q)| with the bracket Dξ_b·ξ_a − Dξ_a·ξ_b taken by
/// central differences. Opt-in diagnostic for abelian-ness.
inline double generator_commutator_residual(const SymmetryAction& action, const ChartPoint& q) {
    double worst = 0.0;
    for (Eigen::Index a = 0; a < action.algebra_dimension(); ++a) {
        for (Eigen::Index b = a + 1; b < action.algebra_dimension(); ++b) {
            const Vector bracket = action.generator_derivative(b, q, action.generator(a, q)) -
                                   action.generator_derivative(a, q, action.generator(b, q));
            worst = std::max(worst, bracket.cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

/// Smallest singular value of the generator matrix relative to the largest;
/// zero means the generators are linearly dependent at q.
inline double generator_independence(const SymmetryAction& action, const ChartPoint& q) {
    Eigen::JacobiSVD<Matrix> svd(action.generator_matrix(q));
    const auto& sv = svd.singularValues();
    return sv[0] > 0.0 ? sv[sv.size() - 1] / sv[0] : 0.0;
}

} // namespace hbs
