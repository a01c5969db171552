#include "kickns_app/app.hpp"

#include <kickns/error.hpp>
#include <kickns/parallel.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>

namespace kickns::app {

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App cli{"Kicked Navier-Stokes chain experiments"};
    cli.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
    for (const auto& name : subcommands()) {
        CLI::App* sub = cli.add_subcommand(name);
        sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
        sub->add_option("--seed", seed, "Override the config seed");
        sub->add_option("--threads", threads, "Worker cap (default: all cores)");
        sub->add_option("--out", out_dir, "Output directory");
    }
    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostream& s = e.get_exit_code() == 0 ? out : err;
        s << (e.get_exit_code() == 0 ? cli.help() : std::string(e.what()) + "\n");
        return e.get_exit_code() == 0 ? exit_ok : exit_config;
    }
    const std::string name = cli.get_subcommands().front()->get_name();

    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path, seed.has_value());
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return exit_config;
    }
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    std::string dir = cfg.output_dir;
    if (const char* env = std::getenv("KICKNS_OUT"); env && *env) dir = env;
    if (out_dir) dir = *out_dir;
    set_default_threads(cfg.threads);

    try {
        Report report(std::filesystem::path(dir) / name, cfg.hash(), name, cfg.seed);
        const int code = run_command(name, cfg, report, out);
        out << name << ": wrote " << report.dir().string() << " (config_hash=" << cfg.hash() << ")\n";
        return code;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const Error& e) {
        err << name << " failed [" << e.category() << "]: " << e.what() << '\n';
        return exit_runtime;
    } catch (const std::exception& e) {
        err << name << " failed: " << e.what() << '\n';
        return exit_runtime;
    }
}

}  // namespace kickns::app
