// Hybrid executor: fixed-step RK4 on Hamilton's equations, bisection
// localisation of guard crossings, elastic resets and a Zeno safeguard.
#pragma once

#include "hbs/impact.hpp"

#include <limits>

namespace hbs {

struct IntegratorConfig {
    double dt = 1e-3;
    double t_end = 1.0;
    /// |h| accepted at a localised crossing.
    double event_tol = 1e-10;
    std::size_t max_impacts = 10000;
    double min_impact_separation = 1e-9;
    /// Record every `sample_stride`-th step (segment ends are always kept).
    std::size_t sample_stride = 1;
    double grazing_tol = 1e-8;
    int max_bisections = 40;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) {
            throw Error(ErrorKind::ValidationError, "dt must be positive");
        }
        if (!(t_end > 0.0) || !std::isfinite(t_end)) {
            throw Error(ErrorKind::ValidationError, "t_end must be positive");
        }
        if (!(event_tol > 0.0) || !(min_impact_separation > 0.0) || !(grazing_tol > 0.0)) {
            throw Error(ErrorKind::ValidationError, "tolerances must be positive");
        }
        if (sample_stride == 0 || max_impacts == 0 || max_bisections < 1) {
            throw Error(ErrorKind::ValidationError,
                        "sample_stride, max_impacts and max_bisections must be positive");
        }
    }

    ImpactTolerances impact_tolerances() const { return {event_tol, grazing_tol}; }
};

struct TimedState {
    double t = 0.0;
    MomentumState state;
};

struct GuardCrossing {
    double t_star = 0.0;
    MomentumState state;
    std::size_t guard_index = 0;
};

struct SegmentResult {
    std::vector<TimedState> samples;
    std::optional<GuardCrossing> crossing;
};

/// One classical fourth-order Runge–Kutta step of Hamilton's equations.
inline MomentumState rk4_step(const MechanicalSystem& sys, const MomentumState& s, double h) {
    const auto k1 = hamiltonian_vector_field(sys, s);
    const auto k2 = hamiltonian_vector_field(sys, {s.q + 0.5 * h * k1.q_dot, s.p + 0.5 * h * k1.p_dot});
    const auto k3 = hamiltonian_vector_field(sys, {s.q + 0.5 * h * k2.q_dot, s.p + 0.5 * h * k2.p_dot});
    const auto k4 = hamiltonian_vector_field(sys, {s.q + h * k3.q_dot, s.p + h * k3.p_dot});
    MomentumState out{s.q + (h / 6.0) * (k1.q_dot + 2.0 * k2.q_dot + 2.0 * k3.q_dot + k4.q_dot),
                      s.p + (h / 6.0) * (k1.p_dot + 2.0 * k2.p_dot + 2.0 * k3.p_dot + k4.p_dot)};
    if (!out.q.allFinite() || !out.p.allFinite()) {
        throw Error(ErrorKind::StepFailure, "integration produced a non-finite state");
    }
    return out;
}

namespace detail {

inline int sign(double x) { return (x > 0.0) - (x < 0.0); }

/// Side of the guard the state is on. On the surface itself the side is the
/// one the flow is heading towards.
inline int guard_side(const MechanicalSystem& sys, const Guard& guard, const MomentumState& s,
                      double event_tol) {
    const double h = guard.value(s.q);
    if (std::abs(h) > event_tol) {
        return sign(h);
    }
    const Vector q_dot = legendre_to_velocity(sys, s).v;
    return sign(guard.gradient(s.q).dot(q_dot));
}

inline bool triggers(Crossing crossing, int side_before, double h_after) {
    const bool downward = side_before > 0 && h_after <= 0.0;
    const bool upward = side_before < 0 && h_after >= 0.0;
    switch (crossing) {
    case Crossing::Decreasing: return downward;
    case Crossing::Increasing: return upward;
    case Crossing::Both: return downward || upward;
    }
    return false;
}

/// Next multiple of dt strictly after t (treating t within 1e-9·dt of a
/// grid point as on it).
inline double next_grid_time(double t, double dt) {
    const double ratio = t / dt;
    const double nearest = std::round(ratio);
    const double base = std::abs(ratio - nearest) <= 1e-9 ? nearest : std::floor(ratio);
    return (base + 1.0) * dt;
}

} // namespace detail

/// Integrates from (t0, s0) until config.t_end or the first admissible guard
/// crossing. A crossing is localised by bisection on the step length,
/// re-integrating one RK4 step from the bracketing grid point, until
/// |h| ≤ event_tol; the localised state ends the sample list.
inline SegmentResult flow_segment(const MechanicalSystem& sys, const std::vector<Guard>& guards,
                                  const MomentumState& s0, double t0, const IntegratorConfig& config) {
    config.validate();
    validate(sys, s0);
    for (const auto& g : guards) {
        if (g.dimension() != sys.dimension()) {
            throw Error(ErrorKind::DimensionMismatch, "guard '" + g.label() + "' has wrong dimension");
        }
    }

    SegmentResult out;
    out.samples.push_back({t0, s0});
    std::vector<int> sides(guards.size());
    for (std::size_t i = 0; i < guards.size(); ++i) {
        sides[i] = detail::guard_side(sys, guards[i], s0, config.event_tol);
    }

    double t = t0;
    MomentumState s = s0;
    std::size_t step = 0;
    while (t < config.t_end) {
        const double t_next = std::min(detail::next_grid_time(t, config.dt), config.t_end);
        const double h = t_next - t;
        const MomentumState s1 = rk4_step(sys, s, h);
        ++step;

        std::vector<GuardCrossing> hits;
        for (std::size_t i = 0; i < guards.size(); ++i) {
            const double h1 = guards[i].value(s1.q);
            if (sides[i] != 0 && detail::triggers(guards[i].crossing(), sides[i], h1)) {
                // Bisection on the step length from the bracketing grid state.
                double lo = 0.0, hi = h;
                MomentumState best = s1;
                double best_tau = h;
                double best_abs = std::abs(h1);
                for (int it = 0; it < config.max_bisections && best_abs > config.event_tol; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const MomentumState sm = rk4_step(sys, s, mid);
                    const double hm = guards[i].value(sm.q);
                    if (std::abs(hm) <= best_abs) {
                        best = sm;
                        best_tau = mid;
                        best_abs = std::abs(hm);
                    }
                    if (detail::sign(hm) == sides[i]) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hits.push_back({t + best_tau, best, i});
            }
            const int side1 = detail::sign(h1);
            if (side1 != 0 && std::abs(h1) > config.event_tol) {
                sides[i] = side1;
            }
        }

        if (!hits.empty()) {
            std::sort(hits.begin(), hits.end(),
                      [](const auto& a, const auto& b) { return a.t_star < b.t_star; });
            if (hits.size() > 1 && hits[1].t_star - hits[0].t_star <= config.event_tol) {
                throw Error(ErrorKind::AmbiguousCrossing,
                            "guards '" + guards[hits[0].guard_index].label() + "' and '" +
                                guards[hits[1].guard_index].label() + "' cross simultaneously");
            }
            out.samples.push_back({hits[0].t_star, hits[0].state});
            out.crossing = hits[0];
            return out;
        }

        t = t_next;
        s = s1;
        if (step % config.sample_stride == 0 || t >= config.t_end) {
            out.samples.push_back({t, s});
        }
    }
    return out;
}

enum class Termination { TimeEnd, ZenoSuspected, Error };

inline std::string_view to_string(Termination t) {
    switch (t) {
    case Termination::TimeEnd: return "TimeEnd";
    case Termination::ZenoSuspected: return "ZenoSuspected";
    case Termination::Error: return "Error";
    }
    return "Error";
}

struct ImpactEvent {
    double t_star = 0.0;
    ImpactOutcome outcome;
    std::size_t guard_index = 0;
    std::string guard_label;
    std::optional<MomentumValue> momentum_pre;
    std::optional<MomentumValue> momentum_post;
    std::optional<LieAlgebraVector> connection_pre;
    std::optional<LieAlgebraVector> connection_post;
};

struct Segment {
    std::vector<TimedState> samples;
};

struct HybridTrajectory {
    std::vector<Segment> segments;
    std::vector<ImpactEvent> events;
    Termination termination = Termination::TimeEnd;
    /// Diagnostics for ZenoSuspected / Error terminations.
    std::string message;
};

/// Runs the hybrid flow: continuous segments separated by elastic impacts.
///
/// Stops at t_end, or with ZenoSuspected once max_impacts events have
/// happened or two consecutive impacts are closer than
/// min_impact_separation. Grazing contacts and post-impact states that do
/// not leave the surface end the run with status Error.
inline HybridTrajectory simulate_hybrid(const MechanicalSystem& sys,
                                        const std::optional<SymmetryAction>& action,
                                        const std::vector<Guard>& guards, const MomentumState& s0,
                                        const IntegratorConfig& config) {
    config.validate();
    if (action) {
        detail::require_compatible(sys, *action);
    }
    HybridTrajectory traj;
    double t = 0.0;
    MomentumState s = s0;
    while (true) {
        auto seg = flow_segment(sys, guards, s, t, config);
        traj.segments.push_back({std::move(seg.samples)});
        if (!seg.crossing) {
            traj.termination = Termination::TimeEnd;
            return traj;
        }

        const auto& crossing = *seg.crossing;
        const Guard& guard = guards[crossing.guard_index];
        ImpactEvent event;
        event.t_star = crossing.t_star;
        event.guard_index = crossing.guard_index;
        event.guard_label = guard.label();
        try {
            event.outcome = resolve_impact_momentum(sys, guard, crossing.state, config.impact_tolerances());
            // The reset must send the state back to the side it came from.
            const Vector grad = guard.gradient(crossing.state.q);
            const double rate_pre = grad.dot(legendre_to_velocity(sys, event.outcome.pre).v);
            const double rate_post = grad.dot(legendre_to_velocity(sys, event.outcome.post).v);
            if (!(detail::sign(rate_post) == -detail::sign(rate_pre) && rate_pre != 0.0)) {
                throw Error(ErrorKind::GrazingImpact,
                            "post-impact state does not leave guard '" + guard.label() + "'");
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::GrazingImpact && e.kind() != ErrorKind::OffSurface &&
                e.kind() != ErrorKind::DegenerateGradient) {
                throw;
            }
            traj.termination = Termination::Error;
            traj.message = std::string(e.what()) + " at t = " + std::to_string(crossing.t_star);
            return traj;
        }
        if (action) {
            event.momentum_pre = momentum_map(*action, event.outcome.pre);
            event.momentum_post = momentum_map(*action, event.outcome.post);
            event.connection_pre =
                mechanical_connection(sys, *action, legendre_to_velocity(sys, event.outcome.pre));
            event.connection_post =
                mechanical_connection(sys, *action, legendre_to_velocity(sys, event.outcome.post));
        }

        const bool too_close = !traj.events.empty() &&
                               event.t_star - traj.events.back().t_star < config.min_impact_separation;
        traj.events.push_back(event);
        t = event.t_star;
        s = event.outcome.post;

        if (too_close || traj.events.size() >= config.max_impacts) {
            traj.segments.push_back({{{t, s}}});
            traj.termination = Termination::ZenoSuspected;
            traj.message = too_close ? "consecutive impacts closer than min_impact_separation"
                                     : "max_impacts reached";
            return traj;
        }
        if (t >= config.t_end) {
            traj.segments.push_back({{{t, s}}});
            traj.termination = Termination::TimeEnd;
            return traj;
        }
    }
}

} // namespace hbs
