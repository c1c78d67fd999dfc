// Executes a parsed configuration: simulation, guard classification and the
// verification suite, with trajectory CSV and report JSON output.
#pragma once

#include "hbs/cli/config.hpp"
#include "hbs/verify.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace hbs::cli {

inline constexpr int kReportSchemaVersion = 1;

using Json = nlohmann::ordered_json;

namespace detail {

inline Json to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline void append_number(std::string& out, double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out += buf;
}

} // namespace detail

/// Columns: t, q_1..q_n, p_1..p_n, H, mu_1..mu_k, A_1..A_k, segment_id.
/// An impact shows up as two consecutive rows with the same t.
inline std::string trajectory_csv(const Scenario& sc, const HybridTrajectory& traj) {
    const auto n = sc.system.dimension();
    const Eigen::Index k = sc.action ? sc.action->algebra_dimension() : 0;
    std::string out = "t";
    for (Eigen::Index i = 1; i <= n; ++i) out += ",q_" + std::to_string(i);
    for (Eigen::Index i = 1; i <= n; ++i) out += ",p_" + std::to_string(i);
    out += ",H";
    for (Eigen::Index a = 1; a <= k; ++a) out += ",mu_" + std::to_string(a);
    for (Eigen::Index a = 1; a <= k; ++a) out += ",A_" + std::to_string(a);
    out += ",segment_id\n";

    for (std::size_t seg = 0; seg < traj.segments.size(); ++seg) {
        for (const auto& sample : traj.segments[seg].samples) {
            const auto& s = sample.state;
            detail::append_number(out, sample.t);
            for (Eigen::Index i = 0; i < n; ++i) { out += ','; detail::append_number(out, s.q[i]); }
            for (Eigen::Index i = 0; i < n; ++i) { out += ','; detail::append_number(out, s.p[i]); }
            out += ',';
            detail::append_number(out, hamiltonian(sc.system, s));
            if (sc.action) {
                const Vector mu = momentum_map(*sc.action, s).mu;
                const Vector conn = mechanical_connection(sc.system, *sc.action, legendre_to_velocity(sc.system, s)).xi;
                for (Eigen::Index a = 0; a < k; ++a) { out += ','; detail::append_number(out, mu[a]); }
                for (Eigen::Index a = 0; a < k; ++a) { out += ','; detail::append_number(out, conn[a]); }
            }
            out += ',' + std::to_string(seg) + '\n';
        }
    }
    return out;
}

inline Json classification_json(const Guard& guard, const GuardClass& gc) {
    Json j;
    j["guard"] = guard.label();
    j["class"] = std::string(to_string(gc.kind));
    j["consistent"] = gc.consistent;
    if (guard.exterior()) j["exterior"] = *guard.exterior();
    j["samples"] = gc.samples.size();
    j["max_vertical_residual"] = gc.max_vertical_residual;
    j["max_horizontal_residual"] = gc.max_horizontal_residual;
    return j;
}

inline std::vector<GuardClass> classify_guards(const Scenario& sc, const RunConfig& cfg) {
    std::vector<GuardClass> out;
    if (!sc.action) return out;
    for (const auto& g : sc.guards) {
        out.push_back(classify_guard(sc.system, *sc.action, g, g.surface_samples(cfg.classify_samples), cfg.class_tol));
    }
    return out;
}

struct SuiteCheck {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
};

/// Property checks on a simulated trajectory: corner conditions at every
/// impact, event localisation and ordering, hybrid Noether, and the
/// connection verdict implied by each guard's class.
inline std::vector<SuiteCheck> verification_suite(const Scenario& sc, const RunConfig& cfg,
                                                  const HybridTrajectory& traj,
                                                  const std::vector<GuardClass>& classes) {
    std::vector<SuiteCheck> checks;
    auto add = [&](std::string name, double value, double threshold) {
        checks.push_back({std::move(name), value <= threshold, value, threshold});
    };

    add("termination_not_error", traj.termination == Termination::Error ? 1.0 : 0.0, 0.0);
    add("has_impacts", traj.events.empty() ? 1.0 : 0.0, 0.0);

    double energy = 0.0, perpendicular = 0.0, localisation = 0.0, tangential = 0.0;
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < traj.events.size(); ++i) {
        const auto& ev = traj.events[i];
        const auto& guard = sc.guards[ev.guard_index];
        const auto r = corner_residuals(sc.system, guard, ev.outcome);
        energy = std::max(energy, r.energy_jump);
        perpendicular = std::max(perpendicular, r.perpendicular_residual);
        localisation = std::max(localisation, std::abs(guard.value(ev.outcome.pre.q)));
        if (i > 0) min_gap = std::min(min_gap, ev.t_star - traj.events[i - 1].t_star);
    }
    add("corner_energy_conservation", energy, 1e-10);
    add("corner_momentum_perpendicular", perpendicular, 1e-10);
    add("event_localisation", localisation, cfg.integrator.event_tol);
    if (traj.events.size() > 1 && traj.termination != Termination::ZenoSuspected) {
        add("event_separation", cfg.integrator.min_impact_separation - min_gap, 0.0);
    }

    // Pull-back of the canonical form at (up to 20) impact states.
    double form = 0.0, kinetic = 0.0;
    const std::size_t pullback_events = std::min<std::size_t>(traj.events.size(), 20);
    for (std::size_t i = 0; i < pullback_events; ++i) {
        const auto& ev = traj.events[i];
        const auto rep = symplectic_pullback_check(sc.system, sc.guards[ev.guard_index], ev.outcome.pre.q,
                                                   ev.outcome.pre.p, 1e-5, cfg.integrator.impact_tolerances());
        form = std::max(form, rep.form_deviation);
        kinetic = std::max(kinetic, rep.kinetic_energy_deviation);
        tangential = std::max(tangential, rep.tangential_momentum_change /
                                              std::max(1.0, ev.outcome.pre.p.cwiseAbs().maxCoeff()));
    }
    add("symplectic_pullback", form, 1e-6);
    add("metric_pullback", kinetic, 1e-10);
    add("tangential_momentum_preserved", tangential, 1e-10);

    if (!sc.action) return checks;
    const auto& action = *sc.action;

    std::vector<VelocityState> samples;
    for (const auto& ev : traj.events) samples.push_back(legendre_to_velocity(sc.system, ev.outcome.pre));
    if (samples.empty()) samples.push_back(legendre_to_velocity(sc.system, sc.initial));
    const double invariance = check_lagrangian_invariance(sc.system, action, samples).max_derivative;
    add("lagrangian_invariance", invariance, 1e-8);

    const auto noether = noether_report(traj, sc.system, action);
    if (invariance <= 1e-8) {
        add("momentum_segment_drift", noether.max_segment_drift, 1e-9);
    }

    const auto inv = impact_invariants(traj, sc.system, action);
    for (std::size_t g = 0; g < sc.guards.size(); ++g) {
        const auto kind = classes.at(g).kind;
        double vertical_fail = 0.0, momentum_jump = 0.0, reversed_fail = 0.0, shape = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < traj.events.size(); ++i) {
            if (traj.events[i].guard_index != g) continue;
            ++count;
            const auto& e = inv.events[i];
            const double mu_scale = std::max(1.0, momentum_map(action, traj.events[i].outcome.pre).mu.norm());
            momentum_jump = std::max(momentum_jump, e.momentum_jump.norm() / mu_scale);
            vertical_fail += e.verdict == ConnectionVerdict::Preserved ? 0.0 : 1.0;
            reversed_fail += e.verdict == ConnectionVerdict::Reversed ? 0.0 : 1.0;
            if (e.shape_velocity_delta) shape = std::max(shape, *e.shape_velocity_delta);
        }
        if (count == 0) continue;
        const std::string prefix = "guard_" + sc.guards[g].label() + "_";
        if (kind == GuardKind::Vertical) {
            add(prefix + "connection_preserved", vertical_fail, 0.0);
            add(prefix + "momentum_map_preserved", momentum_jump, 1e-9);
        } else if (kind == GuardKind::Horizontal && action.algebra_dimension() == 1) {
            add(prefix + "connection_reversed", reversed_fail, 0.0);
            if (action.coordinate_indices()) add(prefix + "shape_velocity_preserved", shape, 1e-9);
        }
    }
    return checks;
}

struct ExecutionResult {
    int exit_code = 0;
    std::vector<std::filesystem::path> files;
    std::string message;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw Error(ErrorKind::IoError, "cannot create directory " + path.parent_path().string());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

inline Json event_json(const ImpactEvent& ev, const EventInvariants* inv) {
    Json j;
    j["t_star"] = ev.t_star;
    j["guard"] = ev.guard_label;
    j["alpha"] = ev.outcome.alpha;
    j["energy_jump"] = ev.outcome.energy_post - ev.outcome.energy_pre;
    j["q"] = to_json(ev.outcome.pre.q);
    j["p_pre"] = to_json(ev.outcome.pre.p);
    j["p_post"] = to_json(ev.outcome.post.p);
    if (ev.momentum_pre) {
        j["mu_pre"] = to_json(ev.momentum_pre->mu);
        j["mu_post"] = to_json(ev.momentum_post->mu);
        j["momentum_jump"] = to_json(ev.momentum_post->mu - ev.momentum_pre->mu);
    }
    if (ev.connection_pre) {
        j["connection_pre"] = to_json(ev.connection_pre->xi);
        j["connection_post"] = to_json(ev.connection_post->xi);
    }
    if (inv) {
        j["verdict"] = std::string(to_string(inv->verdict));
        if (inv->shape_velocity_delta) j["shape_velocity_delta"] = *inv->shape_velocity_delta;
    }
    return j;
}

} // namespace detail

/// Runs one configuration and writes its outputs under `out_dir`.
/// Exit codes: 0 success, 1 error, 2 verification failure.
inline ExecutionResult execute(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    ExecutionResult result;
    Json report;
    report["schema_version"] = kReportSchemaVersion;
    report["mode"] = std::string(to_string(cfg.mode));
    report["system"] = {{"name", cfg.system}};
    const Scenario sc = build_scenario(cfg);
    report["system"]["parameters"] = Json(sc.system.parameters());

    const auto classes = classify_guards(sc, cfg);
    Json class_list = Json::array();
    for (std::size_t i = 0; i < classes.size(); ++i) {
        class_list.push_back(classification_json(sc.guards[i], classes[i]));
    }
    report["classifications"] = class_list;

    if (cfg.mode != Mode::Classify) {
        const auto traj = simulate_hybrid(sc.system, sc.action, sc.guards, sc.initial, cfg.integrator);
        std::optional<ImpactInvariantReport> inv;
        if (sc.action) inv = impact_invariants(traj, sc.system, *sc.action);

        report["termination"] = std::string(to_string(traj.termination));
        if (!traj.message.empty()) report["message"] = traj.message;
        std::size_t rows = 0;
        for (const auto& s : traj.segments) rows += s.samples.size();
        report["segments"] = traj.segments.size();
        report["samples"] = rows;
        Json events = Json::array();
        for (std::size_t i = 0; i < traj.events.size(); ++i) {
            events.push_back(detail::event_json(traj.events[i], inv ? &inv->events[i] : nullptr));
        }
        report["events"] = events;

        if (cfg.mode == Mode::Run) {
            const auto csv_path = out_dir / cfg.trajectory_file;
            detail::write_file(csv_path, trajectory_csv(sc, traj));
            result.files.push_back(csv_path);
            result.exit_code = traj.termination == Termination::Error ? 1 : 0;
        } else {
            const auto checks = verification_suite(sc, cfg, traj, classes);
            Json list = Json::array();
            bool all = true;
            for (const auto& c : checks) {
                list.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"threshold", c.threshold}});
                all = all && c.passed;
            }
            report["suite"] = {{"passed", all}, {"checks", list}};
            result.exit_code = all ? 0 : 2;
        }
        result.message = std::string(to_string(traj.termination));
    }

    const auto report_path = out_dir / cfg.report_file;
    detail::write_file(report_path, report.dump(2) + "\n");
    result.files.push_back(report_path);
    return result;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

} // namespace hbs::cli
