#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "erdlab/errors.hpp"
#include "erdlab/harness/report.hpp"
#include "erdlab/harness/runner.hpp"

namespace {

erdlab::harness::ParamMap parse_overrides(const std::vector<std::string>& items) {
    erdlab::harness::ParamMap out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw erdlab::SpecError("--set expects key=value, got '" + item + "'");
        out.set(erdlab::harness::trim(item.substr(0, eq)), erdlab::harness::trim(item.substr(eq + 1)));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace erdlab::harness;
    CLI::App app{"Excess-risk decomposition experiments"};
    app.require_subcommand(1);

    std::string target;
    int trials = 0;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    bool svg = false;
    int threads = 1;
    std::vector<std::string> sets;
    auto* run = app.add_subcommand("run", "Run a preset or a key=value config file");
    run->add_option("target", target, "Preset name or config file")->required();
    auto* trials_opt = run->add_option("--trials", trials, "Number of trials")->check(CLI::PositiveNumber);
    auto* seed_opt = run->add_option("--seed", seed, "Master seed");
    run->add_option("--out", out_dir, "Output root directory")->capture_default_str();
    run->add_flag("--svg", svg, "Also write SVG charts");
    run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    run->add_option("--set", sets, "Parameter override key=value (repeatable)");

    auto* list = app.add_subcommand("list-presets", "List registered presets");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Summarize a result directory");
    report->add_option("dir", report_dir, "Run directory or output root")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ExperimentConfig cfg = config_from_target(target);
            cfg.overrides.merge(parse_overrides(sets), true);
            if (*trials_opt) cfg.trials = trials;
            if (*seed_opt) cfg.master_seed = seed;
            cfg.out_dir = out_dir;
            cfg.emit_svg = svg;
            cfg.threads = threads;
            const ResultTable table = run_experiment(cfg);
            const auto dir = write_outputs(table, cfg.out_dir, cfg.emit_svg);
            std::cout << summarize_table(table) << "results written to " << dir.string() << "\n";
        } else if (*list) {
            for (const auto& p : preset_registry())
                std::cout << p.name << "  [" << p.family << ", " << p.defaults.str("trials") << " trials]  "
                          << p.description << "\n";
        } else if (*report) {
            std::cout << emit_report(load_tables(report_dir));
        }
    } catch (const erdlab::SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
