#pragma once

// Plain-text summaries computed from result tables alone, so a finished run
// directory can be re-summarized without rerunning anything.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "erdlab/bounds.hpp"
#include "erdlab/harness/config.hpp"
#include "erdlab/harness/results.hpp"

namespace erdlab::harness {

namespace detail {

inline std::string g6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline int count_true(const std::vector<double>& v) {
    return static_cast<int>(std::count_if(v.begin(), v.end(), [](double x) { return x > 0.5; }));
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace detail

/// Slope of log(mean metric) against log(t) over the aggregate rows.
inline double aggregate_rate_slope(const ResultTable& table, const std::string& metric) {
    std::map<double, double> pts;
    for (const auto& a : compute_aggregates(table.series))
        if (a.metric == metric) pts[a.t] = a.mean;
    return rate_probe(pts);
}

inline std::string summarize_table(const ResultTable& table) {
    using detail::count_true;
    using detail::g6;
    std::ostringstream os;
    const std::string trials = table.meta("trials", "?");
    os << "== " << table.experiment << " (" << trials << " trials) ==\n";
    const std::string desc = table.meta("description");
    if (!desc.empty()) os << desc << "\n";

    const auto holds = table.scalar_values("ddc_holds");
    if (!holds.empty()) {
        const int ok = count_true(holds);
        os << "DDC (a=" << table.meta("ddc_a") << ", C=" << table.meta("ddc_C") << ", C'=" << table.meta("ddc_Cp")
           << ", " << table.meta("space", "parameter") << " space): ";
        if (ok == static_cast<int>(holds.size())) {
            os << "DDC holds at all recorded times\n";
        } else {
            os << "holds at all recorded times in " << ok << "/" << holds.size() << " trials\n";
            const auto first = table.scalar_values("ddc_first_violation_t");
            for (std::size_t i = 0; i < first.size(); ++i)
                if (!std::isnan(first[i])) os << "  trial " << i << ": first violation at t=" << g6(first[i]) << "\n";
        }
        const auto ratio = table.scalar_values("ddc_max_ratio");
        if (!ratio.empty())
            os << "max LHS/RHS ratio: " << g6(*std::max_element(ratio.begin(), ratio.end())) << "\n";
    }
    const auto min_a = table.scalar_values("min_a");
    if (!min_a.empty()) {
        os << "fitted min a: mean " << g6(detail::mean(min_a)) << ", range ["
           << g6(*std::min_element(min_a.begin(), min_a.end())) << ", "
           << g6(*std::max_element(min_a.begin(), min_a.end())) << "]";
        const std::string pa = table.meta("paper_a");
        if (!pa.empty()) os << " (paper reports a=" << pa << ")";
        os << "\n";
    }
    const std::string paper_cp = table.meta("paper_c_prime");
    const auto min_cp = table.scalar_values("min_c_prime");
    if (!paper_cp.empty() && !min_cp.empty()) {
        const double target = std::stod(paper_cp);
        const int below = static_cast<int>(
            std::count_if(min_cp.begin(), min_cp.end(), [&](double c) { return c <= target; }));
        os << "fitted C' (a=" << table.meta("ddc_a") << ", C=" << table.meta("ddc_C") << "): mean "
           << g6(detail::mean(min_cp)) << ", max " << g6(*std::max_element(min_cp.begin(), min_cp.end()))
           << "; <= " << paper_cp << " (paper) in " << below << "/" << min_cp.size() << " trials\n";
    }
    const auto eq4 = table.scalar_values("eq4_holds");
    if (!eq4.empty()) {
        const auto viol = table.scalar_values("eq4_violations");
        const auto checked = table.scalar_values("eq4_checked");
        double v = 0, c = 0;
        for (double x : viol) v += x;
        for (double x : checked) c += x;
        os << "decomposition inequality ER <= RHS: " << count_true(eq4) << "/" << eq4.size() << " trials, "
           << static_cast<long>(v) << " violations over " << static_cast<long>(c) << " checked points\n";
    }
    const auto early = table.scalar_values("early_bias_phase");
    const auto late = table.scalar_values("late_variance_phase");
    if (!early.empty()) {
        os << "ER closer to BER early: " << count_true(early) << "/" << early.size()
           << " trials; closer to VER late: " << count_true(late) << "/" << late.size() << " trials\n";
    }
    const auto lemma = table.scalar_values("lemma1_max_deviation");
    if (!lemma.empty())
        os << "max |theta - theta_v - theta_b|: " << g6(*std::max_element(lemma.begin(), lemma.end())) << "\n";

    const std::string window = table.meta("rate_window");
    if (!table.scalar_values("rate_slope").empty()) {
        const double slope = aggregate_rate_slope(table, "er");
        os << "rate slope of mean ER vs n: " << g6(slope);
        if (!window.empty()) {
            const auto w = parse_config_string("w=" + window).list("w");
            const bool inside = w.size() == 2 && slope >= w[0] && slope <= w[1];
            os << " (window [" << g6(w[0]) << ", " << g6(w[1]) << "]: " << (inside ? "inside" : "outside") << ")";
        }
        os << "\n";
        const auto per_trial = table.scalar_values("rate_slope");
        os << "per-trial slopes: mean " << g6(detail::mean(per_trial)) << "\n";
        if (!table.scalar_values("bound_slope").empty())
            os << "rate slope of mean bound vs n: " << g6(aggregate_rate_slope(table, "thm3_bound")) << "\n";
    }
    const auto bless = table.scalar_values("B_less_than_B_prime");
    if (!bless.empty()) {
        os << "B < B' in " << count_true(bless) << "/" << bless.size() << " trials (mean B "
           << g6(detail::mean(table.scalar_values("B"))) << ", mean B' "
           << g6(detail::mean(table.scalar_values("B_prime"))) << ")\n";
        const auto wins = table.scalar_values("decomposition_wins");
        os << "decomposition bound < stability baseline in " << count_true(wins) << "/" << wins.size()
           << " trials (mean " << g6(detail::mean(table.scalar_values("thm1_bound"))) << " vs "
           << g6(detail::mean(table.scalar_values("baseline_bound"))) << ")\n";
        os << "theta* scaled by " << table.meta("scale_factor") << ": mean B "
           << g6(detail::mean(table.scalar_values("scaled_B"))) << ", mean B' "
           << g6(detail::mean(table.scalar_values("scaled_B_prime"))) << ", mean baseline "
           << g6(detail::mean(table.scalar_values("scaled_baseline_bound"))) << "\n";
    }
    const auto gstd = table.scalar_values("grad_norm_standard");
    if (!gstd.empty()) {
        os << "mean gradient norm at init: standard " << g6(detail::mean(gstd)) << ", variance "
           << g6(detail::mean(table.scalar_values("grad_norm_variance"))) << ", bias "
           << g6(detail::mean(table.scalar_values("grad_norm_bias"))) << "; 2||theta*|| = "
           << g6(detail::mean(table.scalar_values("two_theta_norm"))) << "\n";
    }
    return os.str();
}

inline std::string emit_report(const std::vector<ResultTable>& tables) {
    std::string out;
    for (const auto& t : tables) {
        if (!out.empty()) out += "\n";
        out += summarize_table(t);
    }
    return out;
}

/// Rebuilds a table from a run directory written by the runner.
inline ResultTable load_table(const std::filesystem::path& dir) {
    ResultTable t;
    t.series = parse_series_csv(read_file((dir / "trials.csv").string()));
    t.scalars = parse_scalars_csv(read_file((dir / "scalars.csv").string()));
    const ParamMap meta = load_config((dir / "metadata.txt").string());
    for (const auto& [k, v] : meta.entries()) t.metadata.emplace_back(k, v);
    t.experiment = t.meta("experiment", dir.filename().string());
    return t;
}

/// Every immediate subdirectory holding a metadata.txt, or `root` itself.
inline std::vector<ResultTable> load_tables(const std::filesystem::path& root) {
    std::vector<ResultTable> out;
    if (std::filesystem::exists(root / "metadata.txt")) {
        out.push_back(load_table(root));
        return out;
    }
    std::vector<std::filesystem::path> dirs;
    for (const auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory() && std::filesystem::exists(e.path() / "metadata.txt")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) out.push_back(load_table(d));
    if (out.empty()) throw SpecError("no result directories under '" + root.string() + "'");
    return out;
}

}  // namespace erdlab::harness
