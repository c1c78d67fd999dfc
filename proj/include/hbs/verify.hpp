// Numerical checks of the structural results on impacts: hybrid Noether,
// preservation/reversal of the mechanical connection, invariance of shape
// velocities and the symplectic pull-back under the impact map.
#pragma once

#include "hbs/hybridflow.hpp"

namespace hbs {

enum class ConnectionVerdict { Preserved, Reversed, Other };

inline std::string_view to_string(ConnectionVerdict v) {
    switch (v) {
    case ConnectionVerdict::Preserved: return "Preserved";
    case ConnectionVerdict::Reversed: return "Reversed";
    case ConnectionVerdict::Other: return "Other";
    }
    return "Other";
}

/// Preserved if ‖𝒜⁺ − 𝒜⁻‖ ≤ vtol, Reversed if ‖𝒜⁺ + 𝒜⁻‖ ≤ vtol, with
/// vtol = rel_tol·max(1, ‖𝒜⁻‖). A zero connection counts as Preserved.
inline ConnectionVerdict connection_verdict(const Vector& before, const Vector& after,
                                            double rel_tol = 1e-9) {
    const double vtol = rel_tol * std::max(1.0, before.norm());
    if ((after - before).norm() <= vtol) return ConnectionVerdict::Preserved;
    if ((after + before).norm() <= vtol) return ConnectionVerdict::Reversed;
    return ConnectionVerdict::Other;
}

struct CornerResiduals {
    /// |H⁺ − H⁻| / max(1, |H⁻|)
    double energy_jump = 0.0;
    /// Euclidean component of p⁺ − p⁻ orthogonal to ∇h, over max(‖p⁺ − p⁻‖, tiny).
    double perpendicular_residual = 0.0;
};

/// Literal check of p⁺ = p⁻ + α dh, H⁺ = H⁻ for one resolved impact.
inline CornerResiduals corner_residuals(const MechanicalSystem& sys, const Guard& guard,
                                        const ImpactOutcome& outcome) {
    CornerResiduals r;
    const double h_pre = hamiltonian(sys, outcome.pre);
    const double h_post = hamiltonian(sys, outcome.post);
    r.energy_jump = std::abs(h_post - h_pre) / std::max(1.0, std::abs(h_pre));
    const Vector dp = outcome.post.p - outcome.pre.p;
    const Vector normal = guard.gradient(outcome.pre.q).normalized();
    const Vector off = dp - dp.dot(normal) * normal;
    r.perpendicular_residual = off.norm() / std::max(dp.norm(), std::numeric_limits<double>::min());
    return r;
}

struct EventInvariants {
    double t_star = 0.0;
    std::string guard_label;
    double alpha = 0.0;
    double energy_jump = 0.0;
    Vector momentum_jump;
    Vector connection_pre;
    Vector connection_post;
    ConnectionVerdict verdict = ConnectionVerdict::Other;
    std::optional<double> shape_velocity_delta;
    std::optional<CornerResiduals> corner;
};

struct ImpactInvariantReport {
    std::vector<EventInvariants> events;
};

/// max |Tπ(v⁺) − Tπ(v⁻)| across one impact.
inline double shape_velocity_check(const ImpactEvent& event, const MechanicalSystem& sys,
                                   const SymmetryAction& action) {
    const Vector before = action.shape_projection(legendre_to_velocity(sys, event.outcome.pre).v);
    const Vector after = action.shape_projection(legendre_to_velocity(sys, event.outcome.post).v);
    return before.size() == 0 ? 0.0 : (after - before).cwiseAbs().maxCoeff();
}

/// Per-event energy jump, momentum-map jump and connection verdict. When
/// the guards of the run are supplied the corner-condition residuals are
/// filled in as well.
inline ImpactInvariantReport impact_invariants(const HybridTrajectory& traj,
                                               const MechanicalSystem& sys,
                                               const SymmetryAction& action,
                                               const std::vector<Guard>* guards = nullptr,
                                               double verdict_tol = 1e-9) {
    ImpactInvariantReport report;
    for (const auto& ev : traj.events) {
        EventInvariants e;
        e.t_star = ev.t_star;
        e.guard_label = ev.guard_label;
        e.alpha = ev.outcome.alpha;
        e.energy_jump = hamiltonian(sys, ev.outcome.post) - hamiltonian(sys, ev.outcome.pre);
        e.momentum_jump = momentum_map(action, ev.outcome.post).mu - momentum_map(action, ev.outcome.pre).mu;
        e.connection_pre = mechanical_connection(sys, action, legendre_to_velocity(sys, ev.outcome.pre)).xi;
        e.connection_post = mechanical_connection(sys, action, legendre_to_velocity(sys, ev.outcome.post)).xi;
        e.verdict = connection_verdict(e.connection_pre, e.connection_post, verdict_tol);
        if (action.coordinate_indices()) {
            e.shape_velocity_delta = shape_velocity_check(ev, sys, action);
        }
        if (guards != nullptr) {
            e.corner = corner_residuals(sys, guards->at(ev.guard_index), ev.outcome);
        }
        report.events.push_back(std::move(e));
    }
    return report;
}

struct NoetherReport {
    /// max over segments and samples of ‖μ(t) − μ(segment start)‖_∞
    double max_segment_drift = 0.0;
    /// μ⁺ − μ⁻ at each event
    std::vector<Vector> event_jumps;

    double max_event_jump() const {
        double worst = 0.0;
        for (const auto& j : event_jumps) {
            worst = std::max(worst, j.cwiseAbs().maxCoeff());
        }
        return worst;
    }
};

inline NoetherReport noether_report(const HybridTrajectory& traj, const MechanicalSystem& sys,
                                    const SymmetryAction& action) {
    detail::require_compatible(sys, action);
    NoetherReport report;
    for (const auto& seg : traj.segments) {
        if (seg.samples.empty()) continue;
        const Vector start = momentum_map(action, seg.samples.front().state).mu;
        for (const auto& sample : seg.samples) {
            const Vector mu = momentum_map(action, sample.state).mu;
            report.max_segment_drift = std::max(report.max_segment_drift, (mu - start).cwiseAbs().maxCoeff());
        }
    }
    for (const auto& ev : traj.events) {
        report.event_jumps.push_back(momentum_map(action, ev.outcome.post).mu -
                                     momentum_map(action, ev.outcome.pre).mu);
    }
    return report;
}

struct PullbackReport {
    /// Names of the adapted coordinates: s1..s_{n-1} on S, then p1..pn.
    std::vector<std::string> coordinate_labels;
    /// Central-difference Jacobian of (s, p) ↦ (q(s), p⁺), 2n × (2n−1).
    Matrix impact_jacobian;
    /// max |(Δ*ω − ω|_S)_ij| in the adapted coordinates.
    double form_deviation = 0.0;
    /// |K⁺ − K⁻| / max(1, K⁻) at the base point.
    double kinetic_energy_deviation = 0.0;
    /// max |T_jᵀ(p⁺ − p⁻)| over the tangent frame T of S.
    double tangential_momentum_change = 0.0;
};

namespace detail {

/// Orthonormal basis of ∇h^⊥, completed from the standard basis in order.
inline Matrix tangent_frame(const Vector& normal) {
    const auto n = normal.size();
    std::vector<Vector> basis{normal.normalized()};
    for (Eigen::Index i = 0; i < n && static_cast<Eigen::Index>(basis.size()) < n; ++i) {
        Vector e = Vector::Unit(n, i);
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) {
                e -= e.dot(b) * b;
            }
        }
        if (e.norm() > 1e-8) {
            basis.push_back(e.normalized());
        }
    }
    Matrix frame(n, n - 1);
    for (Eigen::Index j = 1; j < n; ++j) {
        frame.col(j - 1) = basis[static_cast<std::size_t>(j)];
    }
    return frame;
}

/// Point of S reached from base + tangent·s by moving along the unit normal.
inline ChartPoint surface_chart(const Guard& guard, const ChartPoint& base, const Vector& unit_normal,
                                const Matrix& tangent, const Vector& s) {
    ChartPoint q = base + tangent * s;
    for (int it = 0; it < 60; ++it) {
        const double h = guard.value(q);
        const double slope = guard.gradient(q).dot(unit_normal);
        if (std::abs(slope) < 1e-14) {
            throw Error(ErrorKind::DegenerateGradient, "surface chart lost transversality");
        }
        const double step = h / slope;
        q -= step * unit_normal;
        if (std::abs(step) <= 1e-16 * std::max(1.0, q.cwiseAbs().maxCoeff())) {
            break;
        }
    }
    return q;
}

} // namespace detail

/// Finite-difference check that the momentum impact map pulls the canonical
/// two-form on T*Q|_S back to itself, together with kinetic-energy
/// (metric) preservation.
inline PullbackReport symplectic_pullback_check(const MechanicalSystem& sys, const Guard& guard,
                                                const ChartPoint& q, const Vector& p, double fd_step,
                                                const ImpactTolerances& tol = {}) {
    const MomentumState base{q, p};
    validate(sys, base);
    if (!(fd_step > 0.0)) {
        throw Error(ErrorKind::ValidationError, "fd_step must be positive");
    }
    const auto reference = resolve_impact_momentum(sys, guard, base, tol);

    const auto n = sys.dimension();
    const Vector grad = guard.gradient(q);
    const Vector unit_normal = grad.normalized();
    const Matrix tangent = detail::tangent_frame(grad);
    // Off-base points are on S only up to the chart's Newton tolerance.
    const ImpactTolerances loose{1e-9, tol.grazing_tol};

    const Eigen::Index dim = 2 * n - 1;
    auto embed = [&](const Vector& u, bool apply_impact) {
        const ChartPoint qs = detail::surface_chart(guard, q, unit_normal, tangent, u.head(n - 1));
        Vector ps = u.tail(n);
        if (apply_impact) {
            ps = resolve_impact_momentum(sys, guard, {qs, ps}, loose).post.p;
        }
        Vector z(2 * n);
        z << qs, ps;
        return z;
    };

    Vector u0 = Vector::Zero(dim);
    u0.tail(n) = p;
    Matrix jac_pre(2 * n, dim), jac_post(2 * n, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
        Vector up = u0, um = u0;
        up[j] += fd_step;
        um[j] -= fd_step;
        jac_pre.col(j) = (embed(up, false) - embed(um, false)) / (2.0 * fd_step);
        jac_post.col(j) = (embed(up, true) - embed(um, true)) / (2.0 * fd_step);
    }

    Matrix canonical = Matrix::Zero(2 * n, 2 * n);
    canonical.topRightCorner(n, n) = Matrix::Identity(n, n);
    canonical.bottomLeftCorner(n, n) = -Matrix::Identity(n, n);
    const Matrix form_pre = jac_pre.transpose() * canonical * jac_pre;
    const Matrix form_post = jac_post.transpose() * canonical * jac_post;

    PullbackReport report;
    for (Eigen::Index j = 1; j < n; ++j) report.coordinate_labels.push_back("s" + std::to_string(j));
    for (Eigen::Index j = 1; j <= n; ++j) report.coordinate_labels.push_back("p" + std::to_string(j));
    report.impact_jacobian = jac_post;
    report.form_deviation = (form_post - form_pre).cwiseAbs().maxCoeff();

    const auto llt = factor_mass_matrix(sys, q);
    const double k_pre = 0.5 * p.dot(llt.solve(p));
    const double k_post = 0.5 * reference.post.p.dot(llt.solve(reference.post.p));
    report.kinetic_energy_deviation = std::abs(k_post - k_pre) / std::max(1.0, k_pre);
    report.tangential_momentum_change =
        (tangent.transpose() * (reference.post.p - p)).cwiseAbs().maxCoeff();
    return report;
}

} // namespace hbs
