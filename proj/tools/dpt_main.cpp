// dpt: run echo / rate-function scenarios and write CSV + summary.json

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dpt/cli_runner.hpp"

namespace {

// one machine-readable line on stderr
int fail(const std::string& kind, const std::string& msg) {
    nlohmann::json j;
    j["error"] = kind;
    j["message"] = msg;
    std::cerr << j.dump() << '\n';
    return kind == "config" ? 2 : 1;
}

int execute(const dpt::ScenarioConfig& cfg, const dpt::RunOptions& opt) {
    const dpt::ScenarioResult res = dpt::run_scenario(cfg, opt);
    for (const auto& f : res.files) std::cout << f.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Loschmidt echo and dynamical phase transition scenarios"};
    app.set_version_flag("--version", std::string("dpt ") + dpt::kVersion);
    app.require_subcommand(1);

    dpt::RunOptions opt;
    std::string out = "out";
    std::uint64_t seed = 0;
    auto add_run_flags = [&](CLI::App* sc) {
        sc->add_option("--out", out, "output directory")->capture_default_str();
        sc->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
        sc->add_option("--seed", seed, "seed for multi-start shuffling (overrides config)");
    };

    std::string config_path, scenario_name;
    auto* run = app.add_subcommand("run", "run a scenario from a config file");
    run->add_option("config", config_path, "config file")->required();
    add_run_flags(run);

    auto* scen = app.add_subcommand("scenario", "run a builtin scenario");
    scen->add_option("name", scenario_name, "builtin scenario name")->required();
    add_run_flags(scen);
    bool print_only = false;
    scen->add_flag("--print", print_only, "print the scenario config instead of running it");

    auto* list = app.add_subcommand("list-scenarios", "list builtin scenarios");

    auto* val = app.add_subcommand("validate", "parse and validate a config file");
    val->add_option("config", config_path, "config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return fail("usage", e.what());
    }

    auto finish_opts = [&](CLI::App* sc) {
        opt.out_dir = out;
        if (sc->count("--seed")) opt.seed = seed;
    };

    try {
        if (*list) {
            for (const auto& n : dpt::builtin_scenario_names()) std::cout << n << '\n';
            return 0;
        }
        if (*val) {
            const dpt::ScenarioConfig cfg = dpt::load_config(config_path);
            dpt::validate_config(cfg);
            std::cout << "ok " << cfg.name << '\n';
            return 0;
        }
        if (*scen) {
            if (print_only) {
                std::cout << dpt::builtin_scenario_text(scenario_name);
                return 0;
            }
            finish_opts(scen);
            return execute(dpt::builtin_scenario(scenario_name), opt);
        }
        finish_opts(run);
        return execute(dpt::load_config(config_path), opt);
    } catch (const dpt::ConfigError& e) {
        return fail("config", e.what());
    } catch (const dpt::ScenarioError& e) {
        return fail("scenario", e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
}
