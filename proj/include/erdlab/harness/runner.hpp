#pragma once

// Runs a preset across trials on a small thread pool and writes the result
// directory: trials.csv, scalars.csv, aggregates.csv, metadata.txt,
// summary.txt and optional SVG charts.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "erdlab/errors.hpp"
#include "erdlab/harness/config.hpp"
#include "erdlab/harness/presets.hpp"
#include "erdlab/harness/report.hpp"
#include "erdlab/harness/results.hpp"
#include "erdlab/harness/svg.hpp"

namespace erdlab::harness {

struct ExperimentConfig {
    std::string preset;
    ParamMap overrides;  ///< applied on top of the preset defaults; unknown keys are rejected
    std::optional<int> trials;
    std::optional<std::uint64_t> master_seed;
    std::string out_dir = "out";
    bool emit_svg = false;
    int threads = 1;
};

/// `target` is either a registered preset name or a config file whose `preset`
/// key names one; the remaining keys become overrides.
inline ExperimentConfig config_from_target(const std::string& target) {
    ExperimentConfig cfg;
    if (std::filesystem::is_regular_file(target)) {
        const ParamMap file = load_config(target);
        for (const auto& [k, v] : file.entries()) {
            if (k == "preset") cfg.preset = v;
            else cfg.overrides.set(k, v);
        }
        if (cfg.preset.empty()) throw SpecError("config file '" + target + "' has no 'preset' key");
    } else {
        cfg.preset = target;
    }
    return cfg;
}

/// Preset defaults, then overrides, then the explicit trials/seed fields.
inline ParamMap resolve_params(const Preset& preset, const ExperimentConfig& cfg) {
    ParamMap p = preset.defaults;
    p.merge(cfg.overrides, false);
    if (cfg.trials) p.set("trials", std::to_string(*cfg.trials));
    if (cfg.master_seed) p.set("seed", std::to_string(*cfg.master_seed));
    if (p.integer("trials") < 1) throw SpecError("trials must be >= 1");
    return p;
}

inline ResultTable run_experiment(const ExperimentConfig& cfg) {
    const Preset& preset = find_preset(cfg.preset);
    const ParamMap params = resolve_params(preset, cfg);
    const int trials = params.integer("trials");
    const std::uint64_t master = params.u64("seed");
    if (cfg.threads < 1) throw SpecError("threads must be >= 1");

    std::vector<TrialOutput> outputs(static_cast<std::size_t>(trials));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(trials));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < trials; i = next++) {
            try {
                outputs[i] = preset.run(params, i, trial_seed(master, i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int nthreads = std::min(cfg.threads, trials);
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < nthreads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    ResultTable table;
    table.experiment = preset.name;
    for (int i = 0; i < trials; ++i) {
        for (auto row : outputs[i].series) {
            row.experiment = preset.name;
            row.trial = i;
            table.series.push_back(std::move(row));
        }
        for (auto row : outputs[i].scalars) {
            row.experiment = preset.name;
            row.trial = i;
            table.scalars.push_back(std::move(row));
        }
    }
    table.metadata.emplace_back("experiment", preset.name);
    table.metadata.emplace_back("family", preset.family);
    table.metadata.emplace_back("description", preset.description);
    table.metadata.emplace_back("space", preset.family == "mlp" ? "function" : "parameter");
    for (const auto& [k, v] : params.entries()) table.metadata.emplace_back(k, v);
    return table;
}

namespace detail {

inline std::vector<ChartSeries> mean_series(const std::vector<AggregateRow>& agg,
                                            const std::vector<std::string>& metrics) {
    std::vector<ChartSeries> out;
    for (const auto& m : metrics) {
        ChartSeries s;
        s.name = m;
        for (const auto& a : agg) {
            if (a.metric != m) continue;
            s.x.push_back(a.t);
            s.y.push_back(a.mean);
        }
        if (!s.x.empty()) out.push_back(std::move(s));
    }
    return out;
}

}  // namespace detail

inline std::string metadata_text(const ResultTable& table) {
    std::string out;
    for (const auto& [k, v] : table.metadata) out += k + "=" + v + "\n";
    return out;
}

/// Writes the run directory for one table and returns its path.
inline std::filesystem::path write_outputs(const ResultTable& table, const std::filesystem::path& root, bool svg) {
    namespace fs = std::filesystem;
    const fs::path dir = root / table.experiment;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw SpecError("cannot create output directory '" + dir.string() + "': " + ec.message());

    const auto agg = compute_aggregates(table.series);
    write_file((dir / "trials.csv").string(), series_csv(table.series));
    write_file((dir / "scalars.csv").string(), scalars_csv(table.scalars));
    write_file((dir / "aggregates.csv").string(), aggregates_csv(agg));
    write_file((dir / "metadata.txt").string(), metadata_text(table));
    write_file((dir / "summary.txt").string(), summarize_table(table));

    if (svg) {
        const std::string x_label = table.meta("family") == "mlp" ? "epoch" : "t";
        auto risks = detail::mean_series(agg, {"er", "ver", "ber", "thm3_bound"});
        if (!risks.empty()) {
            ChartOptions opt;
            opt.title = table.experiment + ": mean excess risks";
            opt.x_label = table.scalar_values("rate_slope").empty() ? x_label : "n";
            opt.log_y = true;
            write_file((dir / "risks.svg").string(), line_chart_svg(risks, opt));
        }
        auto ddc = detail::mean_series(agg, {"param_dist", "ddc_rhs"});
        if (ddc.size() == 2) {
            ddc[1].dashed = true;
            ChartOptions opt;
            opt.title = table.experiment + ": DDC left vs right side";
            opt.x_label = x_label;
            opt.log_y = true;
            write_file((dir / "ddc.svg").string(), line_chart_svg(ddc, opt));
        }
    }
    return dir;
}

}  // namespace erdlab::harness
