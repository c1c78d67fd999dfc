// Guard surfaces S = {h(q) = 0}, elastic impacts from the corner
// conditions, and vertical/horizontal classification of guards.
#pragma once

#include "hbs/bundle.hpp"

#include <random>

namespace hbs {

/// Which sign change of h along the flow counts as an impact.
enum class Crossing { Decreasing, Increasing, Both };

inline std::string_view to_string(Crossing c) {
    switch (c) {
    case Crossing::Decreasing: return "decreasing";
    case Crossing::Increasing: return "increasing";
    case Crossing::Both: return "both";
    }
    return "both";
}

inline Crossing parse_crossing(std::string_view text) {
    if (text == "decreasing") return Crossing::Decreasing;
    if (text == "increasing") return Crossing::Increasing;
    if (text == "both") return Crossing::Both;
    throw Error(ErrorKind::ValidationError, "unknown crossing direction '" + std::string(text) + "'");
}

/// Switching surface given as the zero set of a scalar function on Q.
class Guard {
public:
    using ValueFn = std::function<double(const Vector&)>;
    using GradientFn = std::function<Vector(const Vector&)>;
    /// Returns `count` deterministic points on the surface.
    using SamplerFn = std::function<std::vector<ChartPoint>(std::size_t count)>;

    Guard(std::string label, Eigen::Index dimension, ValueFn value, GradientFn gradient = {},
          Crossing crossing = Crossing::Both)
        : label_(std::move(label)), n_(dimension), value_(std::move(value)),
          gradient_(std::move(gradient)), crossing_(crossing) {
        if (!value_) {
            throw Error(ErrorKind::ValidationError, "guard needs a level-set function");
        }
    }

    /// h(q) = q^index − value.
    static Guard coordinate(Eigen::Index dimension, Eigen::Index index, double value,
                            Crossing crossing, std::string label) {
        if (index < 0 || index >= dimension) {
            throw Error(ErrorKind::ValidationError,
                        "guard coordinate index " + std::to_string(index) + " out of range");
        }
        Guard g(
            std::move(label), dimension, [index, value](const Vector& q) { return q[index] - value; },
            [dimension, index](const Vector&) -> Vector { return Vector::Unit(dimension, index); },
            crossing);
        g.sampler_ = [dimension, index, value](std::size_t count) {
            std::vector<ChartPoint> points;
            for (std::size_t j = 0; j < count; ++j) {
                ChartPoint q(dimension);
                for (Eigen::Index i = 0; i < dimension; ++i) {
                    // Uniform grid on [-π, π), each free coordinate phase-shifted.
                    const double u = std::fmod((static_cast<double>(j) + 0.5) / static_cast<double>(count) +
                                                   0.618033988749895 * static_cast<double>(i),
                                               1.0);
                    q[i] = -M_PI + 2.0 * M_PI * u;
                }
                q[index] = value;
                points.push_back(q);
            }
            return points;
        };
        return g;
    }

    /// h(q) = normal·q − offset.
    static Guard affine(Vector normal, double offset, Crossing crossing, std::string label) {
        if (!normal.allFinite() || normal.norm() == 0.0) {
            throw Error(ErrorKind::DegenerateGradient, "affine guard needs a nonzero finite normal");
        }
        const auto n = normal.size();
        return Guard(
            std::move(label), n, [normal, offset](const Vector& q) { return normal.dot(q) - offset; },
            [normal](const Vector&) -> Vector { return normal; }, crossing);
    }

    Guard with_sampler(SamplerFn sampler) const {
        Guard copy = *this;
        copy.sampler_ = std::move(sampler);
        return copy;
    }

    /// Declares whether π(S) covers the whole shape space. Not inferable from
    /// samples, so it is carried as metadata.
    Guard with_exterior(bool exterior) const {
        Guard copy = *this;
        copy.exterior_ = exterior;
        return copy;
    }

    const std::string& label() const { return label_; }
    Eigen::Index dimension() const { return n_; }
    Crossing crossing() const { return crossing_; }
    std::optional<bool> exterior() const { return exterior_; }
    bool has_sampler() const { return static_cast<bool>(sampler_); }

    double value(const ChartPoint& q) const {
        detail::require_size(q, n_, "configuration");
        const double h = value_(q);
        if (!std::isfinite(h)) {
            throw Error(ErrorKind::NonFiniteInput, "guard '" + label_ + "' value is not finite");
        }
        return h;
    }

    Vector gradient(const ChartPoint& q) const {
        detail::require_size(q, n_, "configuration");
        if (gradient_) {
            Vector g = gradient_(q);
            detail::require_size(g, n_, "guard gradient");
            return g;
        }
        Vector g(n_);
        for (Eigen::Index i = 0; i < n_; ++i) {
            const double h = detail::fd_step(q[i]);
            Vector plus = q, minus = q;
            plus[i] += h;
            minus[i] -= h;
            g[i] = (value_(plus) - value_(minus)) / (2.0 * h);
        }
        return g;
    }

    /// Points on S for classification. Uses the attached sampler, otherwise
    /// seeded random points pulled onto S by Newton steps along ∇h.
    std::vector<ChartPoint> surface_samples(std::size_t count, unsigned seed = 7) const {
        if (sampler_) {
            return sampler_(count);
        }
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> dist(-2.0, 2.0);
        std::vector<ChartPoint> points;
        for (std::size_t j = 0; j < count; ++j) {
            ChartPoint q(n_);
            for (Eigen::Index i = 0; i < n_; ++i) {
                q[i] = dist(rng);
            }
            points.push_back(project_onto_surface(q));
        }
        return points;
    }

    /// Newton iteration q ← q − h ∇h/|∇h|² until |h| ≤ 1e-13.
    ChartPoint project_onto_surface(ChartPoint q) const {
        for (int it = 0; it < 100; ++it) {
            const double h = value(q);
            if (std::abs(h) <= 1e-13) {
                return q;
            }
            const Vector g = gradient(q);
            const double g2 = g.squaredNorm();
            if (g2 < 1e-20) {
                throw Error(ErrorKind::DegenerateGradient, "cannot project onto guard '" + label_ + "'");
            }
            q -= (h / g2) * g;
        }
        throw Error(ErrorKind::OffSurface, "projection onto guard '" + label_ + "' did not converge");
    }

private:
    std::string label_;
    Eigen::Index n_;
    ValueFn value_;
    GradientFn gradient_;
    Crossing crossing_;
    SamplerFn sampler_;
    std::optional<bool> exterior_;
};

/// Level set of f(θ, x) = (m l/(M+m)) sin θ + x − c for the pendulum on a cart.
/// f is the integral of the mechanical connection, so its metric normal is
/// vertical.
inline Guard pendulum_cart_horizontal_guard(double m, double M, double l, double c,
                                            Crossing crossing = Crossing::Both,
                                            std::string label = "horizontal") {
    const double k = m * l / (M + m);
    Guard g(
        std::move(label), 2, [k, c](const Vector& q) { return k * std::sin(q[0]) + q[1] - c; },
        [k](const Vector& q) -> Vector {
            Vector grad(2);
            grad << k * std::cos(q[0]), 1.0;
            return grad;
        },
        crossing);
    return g
        .with_sampler([k, c](std::size_t count) {
            std::vector<ChartPoint> points;
            for (std::size_t j = 0; j < count; ++j) {
                const double theta =
                    -M_PI + 2.0 * M_PI * (static_cast<double>(j) + 0.5) / static_cast<double>(count);
                ChartPoint q(2);
                q << theta, c - k * std::sin(theta);
                points.push_back(q);
            }
            return points;
        })
        .with_exterior(true);
}

struct ImpactTolerances {
    /// Maximum |h(q)| accepted as "on the surface".
    double event_tol = 1e-10;
    /// Minimum |∇hᵀM⁻¹p| / (‖∇h‖‖p‖) for a transversal impact.
    double grazing_tol = 1e-8;
};

struct ImpactOutcome {
    double alpha = 0.0;
    MomentumState pre;
    MomentumState post;
    double energy_pre = 0.0;
    double energy_post = 0.0;
};

/// Elastic impact p⁺ = p⁻ + α∇h with H⁺ = H⁻ at fixed q.
///
/// Energy conservation is the quadratic
///   α (∇hᵀM⁻¹p⁻) + ½ α² (∇hᵀM⁻¹∇h) = 0,
/// whose roots are α = 0 (no impact) and
///   α = −2 (∇hᵀM⁻¹p⁻) / (∇hᵀM⁻¹∇h).
/// The nonzero root is taken; it reverses the normal velocity ∇hᵀq̇.
inline ImpactOutcome resolve_impact_momentum(const MechanicalSystem& sys, const Guard& guard,
                                             const MomentumState& s,
                                             const ImpactTolerances& tol = {}) {
    validate(sys, s);
    if (guard.dimension() != sys.dimension()) {
        throw Error(ErrorKind::DimensionMismatch, "guard and system dimensions differ");
    }
    const double h = guard.value(s.q);
    if (std::abs(h) > tol.event_tol) {
        throw Error(ErrorKind::OffSurface, "|h| = " + std::to_string(std::abs(h)) + " on guard '" +
                                               guard.label() + "' exceeds event tolerance");
    }
    const Vector grad = guard.gradient(s.q);
    const double grad_norm = grad.norm();
    if (!(grad_norm >= 1e-10)) {
        throw Error(ErrorKind::DegenerateGradient, "∇h vanishes on guard '" + guard.label() + "'");
    }
    const auto llt = factor_mass_matrix(sys, s.q);
    const Vector metric_normal = llt.solve(grad);
    const double normal_rate = metric_normal.dot(s.p);
    if (!(std::abs(normal_rate) >= tol.grazing_tol * grad_norm * s.p.norm()) || s.p.norm() == 0.0) {
        throw Error(ErrorKind::GrazingImpact, "trajectory is tangent to guard '" + guard.label() + "'");
    }
    const double alpha = -2.0 * normal_rate / metric_normal.dot(grad);

    ImpactOutcome out;
    out.alpha = alpha;
    out.pre = s;
    out.post = {s.q, s.p + alpha * grad};
    out.energy_pre = hamiltonian(sys, out.pre);
    out.energy_post = hamiltonian(sys, out.post);
    return out;
}

struct VelocityImpact {
    VelocityState post;
    double alpha = 0.0;
};

/// The impact map on TQ: FL⁻¹ ∘ (momentum impact) ∘ FL.
inline VelocityImpact resolve_impact_velocity(const MechanicalSystem& sys, const Guard& guard,
                                              const VelocityState& s,
                                              const ImpactTolerances& tol = {}) {
    const auto outcome = resolve_impact_momentum(sys, guard, legendre_to_momentum(sys, s), tol);
    return {legendre_to_velocity(sys, outcome.post), outcome.alpha};
}

enum class GuardKind { Vertical, Horizontal, Neither };

inline std::string_view to_string(GuardKind k) {
    switch (k) {
    case GuardKind::Vertical: return "Vertical";
    case GuardKind::Horizontal: return "Horizontal";
    case GuardKind::Neither: return "Neither";
    }
    return "Neither";
}

struct GuardSampleDiagnostics {
    ChartPoint q;
    /// max_a |dh(ξ_a)| / (‖∇h‖‖ξ_a‖)
    double vertical_residual = 0.0;
    /// ‖w − Π_span(ξ) w‖ / ‖w‖ with w = M⁻¹∇h
    double horizontal_residual = 0.0;
    bool vertical = false;
    bool horizontal = false;
};

struct GuardClass {
    GuardKind kind = GuardKind::Neither;
    /// False when the per-sample verdicts disagree (the surface is then Neither).
    bool consistent = true;
    double max_vertical_residual = 0.0;
    double max_horizontal_residual = 0.0;
    std::vector<GuardSampleDiagnostics> samples;
};

/// Vertical: dh annihilates every generator (infinitesimal G-invariance).
/// Horizontal: the metric gradient M⁻¹∇h lies in span{ξ_a}.
inline GuardClass classify_guard(const MechanicalSystem& sys, const SymmetryAction& action,
                                 const Guard& guard, const std::vector<ChartPoint>& samples,
                                 double class_tol = 1e-8) {
    detail::require_compatible(sys, action);
    if (samples.empty()) {
        throw Error(ErrorKind::ValidationError, "classification needs at least one sample");
    }
    GuardClass out;
    std::size_t n_vertical = 0, n_horizontal = 0;
    for (const auto& q : samples) {
        if (std::abs(guard.value(q)) > 1e-8) {
            throw Error(ErrorKind::OffSurface, "classification sample is not on guard '" + guard.label() + "'");
        }
        const Vector grad = guard.gradient(q);
        const double grad_norm = grad.norm();
        if (!(grad_norm >= 1e-10)) {
            throw Error(ErrorKind::DegenerateGradient, "∇h vanishes on guard '" + guard.label() + "'");
        }
        const Matrix xi = action.generator_matrix(q);

        GuardSampleDiagnostics d;
        d.q = q;
        for (Eigen::Index a = 0; a < xi.cols(); ++a) {
            const double r = std::abs(grad.dot(xi.col(a))) / (grad_norm * xi.col(a).norm());
            d.vertical_residual = std::max(d.vertical_residual, r);
        }
        const Vector w = factor_mass_matrix(sys, q).solve(grad);
        const Vector coeffs = xi.colPivHouseholderQr().solve(w);
        d.horizontal_residual = (w - xi * coeffs).norm() / w.norm();
        d.vertical = d.vertical_residual <= class_tol;
        d.horizontal = d.horizontal_residual <= class_tol;
        if (d.vertical && d.horizontal) {
            throw Error(ErrorKind::InconsistentSamples,
                        "guard '" + guard.label() + "' tests both vertical and horizontal");
        }
        n_vertical += d.vertical ? 1 : 0;
        n_horizontal += d.horizontal ? 1 : 0;
        out.max_vertical_residual = std::max(out.max_vertical_residual, d.vertical_residual);
        out.max_horizontal_residual = std::max(out.max_horizontal_residual, d.horizontal_residual);
        out.samples.push_back(std::move(d));
    }
    if (n_vertical == samples.size()) {
        out.kind = GuardKind::Vertical;
    } else if (n_horizontal == samples.size()) {
        out.kind = GuardKind::Horizontal;
    } else {
        out.kind = GuardKind::Neither;
        out.consistent = n_vertical == 0 && n_horizontal == 0;
    }
    return out;
}

} // namespace hbs
