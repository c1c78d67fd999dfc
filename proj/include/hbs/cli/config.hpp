// Run configuration: a small sectioned key/value text format and its
// translation into systems, symmetry actions, guards and initial states.
//
//   # comment
//   mode = "verify"            (optional; the subcommand wins)
//   [system]
//   name = "pendulum-cart"
//   gravity = 9.8              (every other numeric key is a parameter)
//   [symmetry]
//   generators = ["x"]         (coordinate names, or "none")
//   [[guard]]                  (repeatable)
//   kind = "coordinate"        (coordinate | affine | pendulum-cart-horizontal | builtin)
//   coordinate = "theta"       (or index = 0)
//   value = 0.3
//   crossing = "increasing"    (decreasing | increasing | both)
//   [initial]
//   q = [-0.5, 0.0]
//   v = [0.0, 0.0]             (exactly one of v / p)
//   [integrator]
//   dt = 1e-3
//   t_end = 5.0
//   [classify]
//   samples = 16
//   [output]
//   trajectory = "trajectory.csv"
//   report = "report.json"
#pragma once

#include "hbs/hybridflow.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>
#include <variant>

namespace hbs::cli {

using ConfigValue = std::variant<double, bool, std::string, std::vector<double>, std::vector<std::string>>;

struct ConfigEntry {
    std::string key;
    ConfigValue value;
    int line = 0;
};

struct ConfigSection {
    std::string name;
    bool repeated = false;
    int line = 0;
    std::vector<ConfigEntry> entries;
};

namespace detail {

[[noreturn]] inline void parse_fail(int line, const std::string& what) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + what);
}

[[noreturn]] inline void invalid(int line, const std::string& key, const std::string& what) {
    throw Error(ErrorKind::ValidationError,
                "line " + std::to_string(line) + ", key '" + key + "': " + what);
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

/// Strips a trailing comment that is not inside a string literal.
inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

inline std::optional<double> parse_number(const std::string& text) {
    if (text.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) return std::nullopt;
    return v;
}

inline std::string parse_string(const std::string& text, int line) {
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
        const std::string inner = text.substr(1, text.size() - 2);
        if (inner.find('"') != std::string::npos) parse_fail(line, "unexpected quote in string");
        return inner;
    }
    // Bare words are accepted for identifiers.
    for (char c : text) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) {
            parse_fail(line, "cannot parse value '" + text + "'");
        }
    }
    return text;
}

inline ConfigValue parse_value(const std::string& text, int line) {
    if (text.empty()) parse_fail(line, "missing value");
    if (text == "true") return true;
    if (text == "false") return false;
    if (text.front() == '[') {
        if (text.back() != ']') parse_fail(line, "unterminated array");
        const std::string body = trim(std::string_view(text).substr(1, text.size() - 2));
        std::vector<std::string> items;
        if (!body.empty()) {
            std::stringstream ss(body);
            std::string item;
            while (std::getline(ss, item, ',')) {
                items.push_back(trim(item));
                if (items.back().empty()) parse_fail(line, "empty array element");
            }
        }
        if (items.empty()) return std::vector<double>{};
        if (parse_number(items.front())) {
            std::vector<double> numbers;
            for (const auto& it : items) {
                const auto v = parse_number(it);
                if (!v) parse_fail(line, "mixed or malformed numeric array element '" + it + "'");
                numbers.push_back(*v);
            }
            return numbers;
        }
        std::vector<std::string> strings;
        for (const auto& it : items) strings.push_back(parse_string(it, line));
        return strings;
    }
    if (const auto v = parse_number(text)) return *v;
    return parse_string(text, line);
}

} // namespace detail

/// Splits the text into sections. The unnamed root section comes first.
inline std::vector<ConfigSection> parse_document(std::string_view text) {
    std::vector<ConfigSection> sections{{"", false, 0, {}}};
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string content = detail::trim(detail::strip_comment(raw));
        if (content.empty()) continue;
        if (content.front() == '[') {
            const bool repeated = content.rfind("[[", 0) == 0;
            const std::size_t open = repeated ? 2 : 1;
            if (content.size() < 2 * open + 1 || content.substr(content.size() - open) != std::string(open, ']')) {
                detail::parse_fail(line, "malformed section header");
            }
            const std::string name = detail::trim(content.substr(open, content.size() - 2 * open));
            if (name.empty()) detail::parse_fail(line, "empty section name");
            if (!repeated) {
                for (const auto& s : sections) {
                    if (s.name == name) detail::parse_fail(line, "duplicate section [" + name + "]");
                }
            }
            sections.push_back({name, repeated, line, {}});
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string::npos) detail::parse_fail(line, "expected 'key = value'");
        const std::string key = detail::trim(content.substr(0, eq));
        if (key.empty()) detail::parse_fail(line, "empty key");
        auto& section = sections.back();
        for (const auto& e : section.entries) {
            if (e.key == key) detail::parse_fail(line, "duplicate key '" + key + "'");
        }
        section.entries.push_back({key, detail::parse_value(detail::trim(content.substr(eq + 1)), line), line});
    }
    return sections;
}

enum class Mode { Run, Classify, Verify };

inline std::string_view to_string(Mode m) {
    switch (m) {
    case Mode::Run: return "run";
    case Mode::Classify: return "classify";
    case Mode::Verify: return "verify";
    }
    return "run";
}

struct GuardSpec {
    std::string kind;
    std::string label;
    Eigen::Index index = -1;
    double value = 0.0;
    Vector normal;
    std::string builtin;
    Crossing crossing = Crossing::Both;
    std::optional<bool> exterior;
    int line = 0;
};

struct RunConfig {
    Mode mode = Mode::Run;
    std::string system;
    Parameters parameters;
    /// Generator coordinate indices; empty means no symmetry.
    std::vector<Eigen::Index> generators;
    std::vector<GuardSpec> guards;
    Vector q;
    std::optional<Vector> v;
    std::optional<Vector> p;
    IntegratorConfig integrator;
    std::size_t classify_samples = 16;
    double class_tol = 1e-8;
    std::string trajectory_file = "trajectory.csv";
    std::string report_file = "report.json";
};

namespace detail {

class SectionReader {
public:
    explicit SectionReader(const ConfigSection& section) : section_(section) {}

    const ConfigEntry* find(const std::string& key) {
        for (const auto& e : section_.entries) {
            if (e.key == key) {
                used_.push_back(key);
                return &e;
            }
        }
        return nullptr;
    }

    std::optional<double> number(const std::string& key) {
        const auto* e = find(key);
        if (!e) return std::nullopt;
        if (const auto* d = std::get_if<double>(&e->value)) return *d;
        invalid(e->line, key, "expected a number");
    }

    std::optional<std::size_t> count(const std::string& key) {
        const auto* e = find(key);
        if (!e) return std::nullopt;
        const auto* d = std::get_if<double>(&e->value);
        if (!d || *d < 1 || std::floor(*d) != *d) invalid(e->line, key, "expected a positive integer");
        return static_cast<std::size_t>(*d);
    }

    std::optional<std::string> text(const std::string& key) {
        const auto* e = find(key);
        if (!e) return std::nullopt;
        if (const auto* s = std::get_if<std::string>(&e->value)) return *s;
        invalid(e->line, key, "expected a string");
    }

    std::optional<bool> flag(const std::string& key) {
        const auto* e = find(key);
        if (!e) return std::nullopt;
        if (const auto* b = std::get_if<bool>(&e->value)) return *b;
        invalid(e->line, key, "expected true or false");
    }

    std::optional<Vector> vector(const std::string& key) {
        const auto* e = find(key);
        if (!e) return std::nullopt;
        const auto* arr = std::get_if<std::vector<double>>(&e->value);
        if (!arr) invalid(e->line, key, "expected a numeric array");
        return Eigen::Map<const Vector>(arr->data(), static_cast<Eigen::Index>(arr->size()));
    }

    int line_of(const std::string& key) const {
        for (const auto& e : section_.entries) {
            if (e.key == key) return e.line;
        }
        return section_.line;
    }

    /// Entries not consumed by any accessor.
    std::vector<const ConfigEntry*> leftovers() const {
        std::vector<const ConfigEntry*> out;
        for (const auto& e : section_.entries) {
            if (std::find(used_.begin(), used_.end(), e.key) == used_.end()) out.push_back(&e);
        }
        return out;
    }

    void reject_leftovers() const {
        for (const auto* e : leftovers()) {
            invalid(e->line, e->key, "unknown key in section [" + section_.name + "]");
        }
    }

private:
    const ConfigSection& section_;
    std::vector<std::string> used_;
};

inline Eigen::Index coordinate_index(const std::vector<std::string>& names, const std::string& name,
                                     int line, const std::string& key) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) invalid(line, key, "unknown coordinate '" + name + "'");
    return static_cast<Eigen::Index>(it - names.begin());
}

inline Mode parse_mode(const std::string& s, int line) {
    if (s == "run") return Mode::Run;
    if (s == "classify") return Mode::Classify;
    if (s == "verify") return Mode::Verify;
    invalid(line, "mode", "expected run, classify or verify");
}

} // namespace detail

/// Parses and validates a run configuration.
inline RunConfig parse_config(std::string_view text) {
    const auto sections = parse_document(text);
    RunConfig cfg;

    const ConfigSection* system = nullptr;
    for (const auto& s : sections) {
        if (s.name == "system") system = &s;
    }
    if (!system) {
        throw Error(ErrorKind::ValidationError, "missing [system] section");
    }

    // The system has to be known before coordinate names can be resolved.
    detail::SectionReader sys_reader(*system);
    const auto name = sys_reader.text("name");
    if (!name) detail::invalid(system->line, "name", "system name is required");
    cfg.system = *name;
    const SystemEntry* entry = nullptr;
    try {
        entry = &find_system(cfg.system);
    } catch (const Error&) {
        detail::invalid(sys_reader.line_of("name"), "name", "unknown system '" + cfg.system + "'");
    }
    for (const auto* e : sys_reader.leftovers()) {
        const auto* d = std::get_if<double>(&e->value);
        if (!d) detail::invalid(e->line, e->key, "system parameters must be numbers");
        if (!entry->defaults.contains(e->key)) {
            detail::invalid(e->line, e->key, "system '" + cfg.system + "' has no such parameter");
        }
        cfg.parameters[e->key] = *d;
    }
    const auto& coords = entry->coordinates;
    const auto n = static_cast<Eigen::Index>(coords.size());

    bool have_initial = false;
    for (const auto& section : sections) {
        detail::SectionReader r(section);
        if (section.name.empty()) {
            if (const auto m = r.text("mode")) cfg.mode = detail::parse_mode(*m, r.line_of("mode"));
            r.reject_leftovers();
        } else if (section.name == "system") {
            continue;
        } else if (section.name == "symmetry" && !section.repeated) {
            if (const auto* e = r.find("generators")) {
                if (const auto* s = std::get_if<std::string>(&e->value)) {
                    if (*s != "none") {
                        cfg.generators.push_back(detail::coordinate_index(coords, *s, e->line, "generators"));
                    }
                } else if (const auto* list = std::get_if<std::vector<std::string>>(&e->value)) {
                    for (const auto& g : *list) {
                        cfg.generators.push_back(detail::coordinate_index(coords, g, e->line, "generators"));
                    }
                } else {
                    detail::invalid(e->line, "generators", "expected coordinate names or \"none\"");
                }
                if (static_cast<Eigen::Index>(cfg.generators.size()) > n) {
                    detail::invalid(e->line, "generators", "more generators than coordinates");
                }
            }
            r.reject_leftovers();
        } else if (section.name == "guard" && section.repeated) {
            GuardSpec g;
            g.line = section.line;
            g.kind = r.text("kind").value_or("coordinate");
            g.label = r.text("label").value_or("guard" + std::to_string(cfg.guards.size() + 1));
            if (const auto c = r.text("crossing")) {
                try {
                    g.crossing = parse_crossing(*c);
                } catch (const Error& e) {
                    detail::invalid(r.line_of("crossing"), "crossing", e.what());
                }
            }
            g.exterior = r.flag("exterior");
            g.value = r.number("value").value_or(0.0);
            if (g.kind == "coordinate") {
                if (const auto c = r.text("coordinate")) {
                    g.index = detail::coordinate_index(coords, *c, r.line_of("coordinate"), "coordinate");
                } else if (const auto i = r.number("index")) {
                    if (*i != std::floor(*i) || *i < 0 || *i >= static_cast<double>(n)) {
                        detail::invalid(r.line_of("index"), "index", "guard index out of range");
                    }
                    g.index = static_cast<Eigen::Index>(*i);
                } else {
                    detail::invalid(section.line, "coordinate", "coordinate guard needs 'coordinate' or 'index'");
                }
            } else if (g.kind == "affine") {
                const auto normal = r.vector("normal");
                if (!normal || normal->size() != n) {
                    detail::invalid(r.line_of("normal"), "normal", "affine guard needs a normal of length " + std::to_string(n));
                }
                g.normal = *normal;
                g.value = r.number("offset").value_or(g.value);
            } else if (g.kind == "pendulum-cart-horizontal") {
                if (cfg.system != "pendulum-cart") {
                    detail::invalid(section.line, "kind", "pendulum-cart-horizontal guard needs the pendulum-cart system");
                }
            } else if (g.kind == "builtin") {
                const auto b = r.text("builtin");
                if (!b || cfg.system != "pendulum-cart" ||
                    (*b != "interior" && *b != "exterior" && *b != "horizontal")) {
                    detail::invalid(r.line_of("builtin"), "builtin",
                                    "builtin guards are interior, exterior, horizontal (pendulum-cart)");
                }
                g.builtin = *b;
            } else {
                detail::invalid(r.line_of("kind"), "kind", "unknown guard kind '" + g.kind + "'");
            }
            r.reject_leftovers();
            cfg.guards.push_back(std::move(g));
        } else if (section.name == "initial" && !section.repeated) {
            have_initial = true;
            const auto q = r.vector("q");
            if (!q) detail::invalid(section.line, "q", "initial configuration required");
            if (q->size() != n) detail::invalid(r.line_of("q"), "q", "expected " + std::to_string(n) + " entries");
            cfg.q = *q;
            cfg.v = r.vector("v");
            cfg.p = r.vector("p");
            if (cfg.v.has_value() == cfg.p.has_value()) {
                detail::invalid(section.line, "v/p", "give exactly one of v or p");
            }
            const Vector& other = cfg.v ? *cfg.v : *cfg.p;
            if (other.size() != n) {
                detail::invalid(r.line_of(cfg.v ? "v" : "p"), cfg.v ? "v" : "p",
                                "expected " + std::to_string(n) + " entries");
            }
            r.reject_leftovers();
        } else if (section.name == "integrator" && !section.repeated) {
            auto& ic = cfg.integrator;
            ic.dt = r.number("dt").value_or(ic.dt);
            ic.t_end = r.number("t_end").value_or(ic.t_end);
            ic.event_tol = r.number("event_tol").value_or(ic.event_tol);
            ic.max_impacts = r.count("max_impacts").value_or(ic.max_impacts);
            ic.min_impact_separation = r.number("min_impact_separation").value_or(ic.min_impact_separation);
            ic.sample_stride = r.count("sample_stride").value_or(ic.sample_stride);
            ic.grazing_tol = r.number("grazing_tol").value_or(ic.grazing_tol);
            if (!(ic.dt > 0.0)) detail::invalid(r.line_of("dt"), "dt", "must be positive");
            if (!(ic.t_end > 0.0)) detail::invalid(r.line_of("t_end"), "t_end", "must be positive");
            try {
                ic.validate();
            } catch (const Error& e) {
                detail::invalid(section.line, "integrator", e.what());
            }
            r.reject_leftovers();
        } else if (section.name == "classify" && !section.repeated) {
            cfg.classify_samples = r.count("samples").value_or(cfg.classify_samples);
            cfg.class_tol = r.number("class_tol").value_or(cfg.class_tol);
            if (!(cfg.class_tol > 0.0)) detail::invalid(r.line_of("class_tol"), "class_tol", "must be positive");
            r.reject_leftovers();
        } else if (section.name == "output" && !section.repeated) {
            cfg.trajectory_file = r.text("trajectory").value_or(cfg.trajectory_file);
            cfg.report_file = r.text("report").value_or(cfg.report_file);
            r.reject_leftovers();
        } else {
            throw Error(ErrorKind::ValidationError,
                        "line " + std::to_string(section.line) + ": unknown section [" + section.name + "]");
        }
    }
    if (!have_initial) {
        throw Error(ErrorKind::ValidationError, "missing [initial] section");
    }
    // Building the system validates the parameter values.
    try {
        make_system(cfg.system, cfg.parameters);
    } catch (const Error& e) {
        throw Error(ErrorKind::ValidationError, std::string("[system]: ") + e.what());
    }
    return cfg;
}

/// Everything a run needs, built from a validated configuration.
struct Scenario {
    MechanicalSystem system;
    std::optional<SymmetryAction> action;
    std::vector<Guard> guards;
    MomentumState initial;
};

/// The three pendulum-cart guards: θ = value (interior), x = value
/// (exterior) and the horizontal level set through value.
inline Guard pendulum_cart_builtin_guard(const Parameters& params, const std::string& which,
                                         double value, Crossing crossing, const std::string& label) {
    const double m = params.at("m"), M = params.at("M"), l = params.at("l");
    if (which == "interior") {
        return Guard::coordinate(2, 0, value, crossing, label).with_exterior(false);
    }
    if (which == "exterior") {
        return Guard::coordinate(2, 1, value, crossing, label).with_exterior(true);
    }
    if (which == "horizontal") {
        return pendulum_cart_horizontal_guard(m, M, l, value, crossing, label);
    }
    throw Error(ErrorKind::ValidationError, "unknown pendulum-cart guard '" + which + "'");
}

inline Scenario build_scenario(const RunConfig& cfg) {
    MechanicalSystem sys = make_system(cfg.system, cfg.parameters);
    const auto n = sys.dimension();
    std::optional<SymmetryAction> action;
    if (!cfg.generators.empty()) {
        action = SymmetryAction::coordinate(n, cfg.generators);
    }
    std::vector<Guard> guards;
    for (const auto& g : cfg.guards) {
        if (g.kind == "coordinate") {
            auto guard = Guard::coordinate(n, g.index, g.value, g.crossing, g.label);
            guards.push_back(g.exterior ? guard.with_exterior(*g.exterior) : guard);
        } else if (g.kind == "affine") {
            auto guard = Guard::affine(g.normal, g.value, g.crossing, g.label);
            guards.push_back(g.exterior ? guard.with_exterior(*g.exterior) : guard);
        } else if (g.kind == "pendulum-cart-horizontal") {
            guards.push_back(pendulum_cart_builtin_guard(sys.parameters(), "horizontal", g.value, g.crossing, g.label));
        } else {
            guards.push_back(pendulum_cart_builtin_guard(sys.parameters(), g.builtin, g.value, g.crossing, g.label));
        }
    }
    MomentumState initial = cfg.p ? MomentumState{cfg.q, *cfg.p}
                                  : legendre_to_momentum(sys, VelocityState{cfg.q, *cfg.v});
    return {std::move(sys), std::move(action), std::move(guards), std::move(initial)};
}

} // namespace hbs::cli
