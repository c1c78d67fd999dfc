// hbs: simulate and verify hybrid mechanical systems with symmetry.
//
//   hbs run|classify|verify <config-path> [--out DIR]
//   hbs list-systems
//
// A directory passed as <config-path> is run as a batch: every *.cfg file in
// it is executed concurrently, each into its own subdirectory of --out.

#include "hbs/cli/runner.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <future>
#include <iostream>

namespace {

namespace fs = std::filesystem;
using hbs::cli::Mode;

void configure_logging() {
    const char* level = std::getenv("HBS_LOG");
    spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

hbs::cli::ExecutionResult run_one(const fs::path& config_path, Mode mode, const fs::path& out_dir) {
    try {
        auto cfg = hbs::cli::parse_config(hbs::cli::read_text_file(config_path));
        cfg.mode = mode;
        spdlog::info("{}: {} mode, system {}", config_path.string(), hbs::cli::to_string(mode), cfg.system);
        auto result = hbs::cli::execute(cfg, out_dir);
        for (const auto& f : result.files) {
            spdlog::info("wrote {}", f.string());
        }
        return result;
    } catch (const hbs::Error& e) {
        return {1, {}, config_path.string() + ": " + e.what()};
    } catch (const std::exception& e) {
        return {1, {}, config_path.string() + ": " + e.what()};
    }
}

int run_command(const fs::path& path, Mode mode, const fs::path& out_dir) {
    if (!fs::is_directory(path)) {
        const auto result = run_one(path, mode, out_dir);
        if (!result.message.empty() && result.exit_code == 1) {
            spdlog::error("{}", result.message);
        }
        std::cout << path.string() << ": exit " << result.exit_code;
        if (!result.message.empty() && result.exit_code != 1) std::cout << " (" << result.message << ")";
        std::cout << '\n';
        return result.exit_code;
    }

    std::vector<fs::path> configs;
    for (const auto& entry : fs::directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".cfg") configs.push_back(entry.path());
    }
    std::sort(configs.begin(), configs.end());
    std::vector<std::future<hbs::cli::ExecutionResult>> jobs;
    for (const auto& cfg : configs) {
        jobs.push_back(std::async(std::launch::async, run_one, cfg, mode, out_dir / cfg.stem()));
    }
    int worst = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto result = jobs[i].get();
        if (result.exit_code == 1) spdlog::error("{}", result.message);
        std::cout << configs[i].string() << ": exit " << result.exit_code << '\n';
        // Errors outrank verification failures.
        if (result.exit_code == 1) {
            worst = 1;
        } else if (result.exit_code == 2 && worst == 0) {
            worst = 2;
        }
    }
    return worst;
}

int list_systems() {
    for (const auto& entry : hbs::system_registry()) {
        std::cout << entry.name << "  (";
        for (std::size_t i = 0; i < entry.coordinates.size(); ++i) {
            std::cout << (i ? ", " : "") << entry.coordinates[i];
        }
        std::cout << ")\n    " << entry.description << '\n';
        for (const auto& [key, value] : entry.defaults) {
            std::cout << "    " << key << " = " << value << '\n';
        }
        if (entry.name == "pendulum-cart") {
            std::cout << "    builtin guards: interior (theta = value), exterior (x = value), "
                         "horizontal (m l/(M+m) sin theta + x = value)\n";
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"Simulate and verify hybrid mechanical systems with symmetry"};
    app.require_subcommand(1);

    fs::path config_path;
    fs::path out_dir = ".";
    struct Sub {
        const char* name;
        const char* help;
        Mode mode;
    };
    const Sub subs[] = {
        {"run", "simulate and write trajectory CSV plus report JSON", Mode::Run},
        {"classify", "classify every guard as Vertical / Horizontal / Neither", Mode::Classify},
        {"verify", "simulate and run the verification suite (exit 2 on failure)", Mode::Verify},
    };
    std::vector<std::pair<CLI::App*, Mode>> mode_commands;
    for (const auto& s : subs) {
        auto* cmd = app.add_subcommand(s.name, s.help);
        cmd->add_option("config", config_path, "config file, or directory of *.cfg files")->required();
        cmd->add_option("--out", out_dir, "output directory");
        mode_commands.emplace_back(cmd, s.mode);
    }
    auto* list_cmd = app.add_subcommand("list-systems", "list the registered mechanical systems");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (list_cmd->parsed()) return list_systems();
    for (const auto& [cmd, mode] : mode_commands) {
        if (cmd->parsed()) return run_command(config_path, mode, out_dir);
    }
    return 1;
}
