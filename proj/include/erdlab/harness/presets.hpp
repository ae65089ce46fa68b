#pragma once

// Named experiment presets. Every preset owns a flat parameter map of
// defaults; a trial function turns (params, trial index, trial seed) into
// long-format rows.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "erdlab/bounds.hpp"
#include "erdlab/decomp.hpp"
#include "erdlab/harness/config.hpp"
#include "erdlab/harness/results.hpp"
#include "erdlab/linreg.hpp"
#include "erdlab/matrec.hpp"
#include "erdlab/nn.hpp"
#include "erdlab/problem_gen.hpp"
#include "erdlab/rng.hpp"

namespace erdlab::harness {

struct TrialOutput {
    std::vector<SeriesRow> series;
    std::vector<ScalarRow> scalars;

    void add(double t, const std::string& metric, double value) { series.push_back({"", 0, t, metric, value}); }
    void scalar(const std::string& metric, double value) { scalars.push_back({"", 0, metric, value}); }
};

using TrialFn = std::function<TrialOutput(const ParamMap&, int trial, std::uint64_t trial_seed)>;

struct Preset {
    std::string name;
    std::string family;
    std::string description;
    ParamMap defaults;
    TrialFn run;
};

inline std::uint64_t trial_seed(std::uint64_t master, int trial) {
    return derive_seed(master, "trial", static_cast<std::uint64_t>(trial));
}

namespace presets {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline DdcParams ddc_params(const ParamMap& p, Space space) {
    return {p.num("ddc_a"), p.num("ddc_C"), p.num("ddc_Cp"), space};
}

/// Series and verdict scalars shared by every family that yields a
/// decomposition trace.
inline void emit_decomposition(TrialOutput& out, const DecompositionTrace& tr, const DdcParams& ddc, int stride = 1) {
    const DdcReport rep = check_ddc(tr, ddc, tr.n);
    const Eq4Result eq4 = eq4_rhs_and_check(tr, ddc, tr.sharpness, tr.n);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (stride > 1 && i % static_cast<std::size_t>(stride) != 0 && i + 1 != tr.size()) continue;
        const double t = tr.t[i];
        out.add(t, "er", tr.er[i]);
        out.add(t, "ver", tr.ver[i]);
        out.add(t, "ber", tr.ber[i]);
        out.add(t, "param_dist", tr.param_dist[i]);
        out.add(t, "var_dist", tr.var_dist[i]);
        out.add(t, "bias_dist", tr.bias_dist[i]);
        double rhs = kNaN;
        if (!(ddc.C > 0.0 && t <= 0.0)) {
            rhs = ddc.a * (tr.var_dist[i] + tr.bias_dist[i]) + ddc.C_prime / std::sqrt(static_cast<double>(tr.n));
            if (ddc.C > 0.0) rhs += ddc.C / std::sqrt(t);
        }
        out.add(t, "ddc_rhs", rhs);
        out.add(t, "eq4_rhs", eq4.rhs[i]);
        if (tr.has_se()) {
            out.add(t, "er_se", tr.er_se[i]);
            out.add(t, "ver_se", tr.ver_se[i]);
            out.add(t, "ber_se", tr.ber_se[i]);
        }
    }
    int checked = 0;
    for (char c : eq4.checked) checked += c;
    out.scalar("ddc_holds", rep.holds_everywhere ? 1.0 : 0.0);
    out.scalar("ddc_violations", rep.violations);
    out.scalar("ddc_first_violation_t", rep.first_violation_time.value_or(kNaN));
    out.scalar("ddc_max_ratio", rep.max_ratio);
    out.scalar("min_a", rep.min_feasible_a);
    out.scalar("min_c_prime", fit_min_c_prime(tr, ddc.a, ddc.C, tr.n));
    out.scalar("eq4_holds", eq4.holds ? 1.0 : 0.0);
    out.scalar("eq4_violations", eq4.violations);
    out.scalar("eq4_checked", checked);
    out.scalar("sharpness_exact", tr.sharpness_exact ? 1.0 : 0.0);

    // Early phase: ER tracks BER; late phase: ER tracks VER.
    std::size_t first = 0;
    while (first < tr.size() && tr.t[first] <= 0.0) ++first;
    if (first < tr.size()) {
        const std::size_t last = tr.size() - 1;
        auto closer_to_bias = [&](std::size_t i) {
            return std::abs(tr.er[i] - tr.ber[i]) < std::abs(tr.er[i] - tr.ver[i]);
        };
        out.scalar("early_bias_phase", closer_to_bias(first) ? 1.0 : 0.0);
        out.scalar("late_variance_phase", closer_to_bias(last) ? 0.0 : 1.0);
    }
}

inline LinearProblemSpec linear_spec(const ParamMap& p, std::uint64_t seed) {
    LinearProblemSpec spec;
    spec.d = p.integer("d");
    spec.n = p.integer("n");
    spec.seed = seed;
    const std::string cov = p.str("covariance");
    if (cov == "identity") spec.covariance = IdentityCovariance{};
    else if (cov == "scaled") spec.covariance = DiagonalCovariance{Vec::Constant(spec.d, p.num("cov_scale"))};
    else if (cov == "powerlaw") spec.covariance = DiagonalCovariance{power_law_diagonal(spec.d, p.num("cov_exponent"))};
    else throw SpecError("unknown covariance '" + cov + "'");
    const std::string th = p.str("theta");
    if (th == "dense") spec.theta_star = DenseRandomTheta{p.num("theta_norm")};
    else if (th == "sparse") spec.theta_star = SparseTheta{p.integer("theta_support"), p.num("theta_norm")};
    else if (th == "powerlaw") spec.theta_star = ExplicitTheta{power_law_diagonal(spec.d, 0.5) * p.num("theta_norm")};
    else throw SpecError("unknown theta descriptor '" + th + "'");
    const std::string nz = p.str("noise");
    if (nz == "gaussian") spec.noise = GaussianNoise{p.num("noise_std"), p.num("noise_bound")};
    else if (nz == "uniform") spec.noise = UniformNoise{p.num("noise_bound")};
    else throw SpecError("unknown noise law '" + nz + "'");
    return spec;
}

inline ParamMap linear_defaults() {
    return {{"covariance", "identity"}, {"cov_scale", "1"},     {"cov_exponent", "1"},  {"theta", "dense"},
            {"theta_norm", "1"},        {"theta_support", "5"}, {"noise", "gaussian"}, {"noise_std", "1"},
            {"noise_bound", "0"}};
}

inline ParamMap with(ParamMap base, const ParamMap& extra) {
    base.merge(extra, true);
    return base;
}

inline ParamMap common_defaults(int trials) {
    return {{"trials", std::to_string(trials)}, {"seed", "1"}};
}

// ----------------------------------------------------------------------------

inline TrialOutput run_fig1(const ParamMap& p, int, std::uint64_t seed) {
    const LinearProblemSpec spec = linear_spec(p, seed);
    const RegressionDataset ds = gen_linear_dataset(spec);
    const double n = ds.n();
    // Gradient of (1/n)||y - X theta||^2 at theta = 0 is -(2/n) X^T y.
    TrialOutput out;
    out.scalar("grad_norm_standard", (2.0 / n * (ds.X.transpose() * ds.y_noisy)).norm());
    out.scalar("grad_norm_bias", (2.0 / n * (ds.X.transpose() * ds.y_clean)).norm());
    out.scalar("grad_norm_variance", (2.0 / n * (ds.X.transpose() * ds.eps)).norm());
    out.scalar("two_theta_norm", 2.0 * ds.theta_star.norm());
    return out;
}

inline TrialOutput run_linreg_fig3(const ParamMap& p, int, std::uint64_t seed) {
    LinregFamily fam;
    fam.spec = linear_spec(p, seed);
    fam.gd.stepsize = p.num("lambda");
    fam.gd.steps = p.integer("steps");
    fam.gd.record_every = p.integer("record_every");
    const DecompositionRun run = run_decomposition_full(FamilySpec{fam});
    TrialOutput out;
    emit_decomposition(out, run.trace, ddc_params(p, Space::Parameter));
    out.scalar("lemma1_max_deviation", check_lemma1_additivity(run));
    const SupNorms sup = sup_param_norms(run.linreg->std_trace, run.linreg->var_trace);
    out.scalar("B", sup.B);
    out.scalar("B_prime", sup.B_prime);
    out.scalar("admissibility_warnings", static_cast<double>(run.linreg->std_trace.warnings.size()));
    return out;
}

inline GeneralRecoverySpec general_spec(const ParamMap& p, std::uint64_t seed) {
    GeneralRecoverySpec spec;
    spec.d = p.integer("d");
    const std::vector<double> sig = p.list("sigma_star");
    spec.r = static_cast<int>(sig.size());
    spec.sigma_star = Eigen::Map<const Vec>(sig.data(), spec.r);
    spec.n = p.integer("n");
    spec.noise_std = p.num("noise_std");
    spec.alpha = p.num("alpha");
    spec.stepsize = p.num("eta");
    spec.seed = seed;
    spec.factor_seed = derive_seed(seed, "factor");
    return spec;
}

inline TrialOutput run_matrec_fig3(const ParamMap& p, int, std::uint64_t seed) {
    GeneralFamily fam;
    fam.spec = general_spec(p, seed);
    fam.options.steps = p.integer("steps");
    const DecompositionRun run = run_decomposition_full(FamilySpec{fam});
    TrialOutput out;
    emit_decomposition(out, run.trace, ddc_params(p, Space::Parameter));
    const auto& g = *run.general;
    for (std::size_t k = 0; k < g.steps.size(); ++k) out.add(g.steps[k], "train_loss", g.loss_std[k]);
    bool monotone = true;
    for (std::size_t k = 1; k < g.loss_std.size(); ++k)
        if (g.loss_std[k] > g.loss_std[k - 1] * (1.0 + 1e-12)) monotone = false;
    out.scalar("train_loss_nonincreasing", monotone ? 1.0 : 0.0);
    return out;
}

inline OptimizerConfig optimizer_from(const ParamMap& p) {
    const std::string name = p.str("optimizer");
    if (name == "sgd") return SgdConfig{p.num("eta")};
    if (name == "adam") return AdamConfig{p.num("eta"), p.num("adam_beta1"), p.num("adam_beta2"), p.num("adam_eps")};
    if (name == "rprop")
        return RpropConfig{p.num("eta"), p.num("rprop_eta_minus"), p.num("rprop_eta_plus"), p.num("rprop_step_min"),
                           p.num("rprop_step_max")};
    throw SpecError("unknown optimizer '" + name + "'");
}

inline TrialOutput run_nn(const ParamMap& p, int, std::uint64_t seed) {
    MlpFamily fam;
    fam.data = linear_spec(p, seed);
    fam.arch = make_arch(fam.data.d, p.integer("depth"), p.integer("width"), p.num("init_std"));
    fam.arch.fan_in_init = p.str("init") == "fan_in";
    if (!fam.arch.fan_in_init && p.str("init") != "gaussian") throw SpecError("init must be 'gaussian' or 'fan_in'");
    fam.optimizer = optimizer_from(p);
    fam.train.epochs = p.integer("epochs");
    fam.train.batch_size = p.integer("batch_size");
    fam.train.record_every = p.integer("record_every");
    fam.train.n_mc = p.integer("n_mc");
    const DecompositionTrace tr = run_decomposition(FamilySpec{fam});
    TrialOutput out;
    emit_decomposition(out, tr, ddc_params(p, Space::Function));
    return out;
}

inline TrialOutput run_rate_linreg(const ParamMap& p, int, std::uint64_t seed) {
    TrialOutput out;
    std::map<double, double> risks;
    for (double nd : p.list("ns")) {
        ParamMap q = p;
        q.set("n", std::to_string(static_cast<int>(nd)));
        const LinearProblemSpec spec = linear_spec(q, derive_seed(seed, "n", static_cast<std::uint64_t>(nd)));
        const RegressionDataset ds = gen_linear_dataset(spec);
        GdConfig cfg;
        cfg.stepsize = p.num("lambda");
        cfg.steps = static_cast<int>(std::ceil(std::pow(nd, p.num("T_exponent"))));
        cfg.record_every = cfg.steps > 0 ? cfg.steps : 1;
        const ParamTrace tr = gd_run(ds, cfg);
        const double er = quadratic_excess_risk(tr.final_params(), ds.theta_star, covariance_diagonal(spec));
        out.add(nd, "er", er);
        out.add(nd, "T", cfg.steps);
        risks[nd] = er;
    }
    out.scalar("rate_slope", rate_probe(risks));
    return out;
}

inline TrialOutput run_rate_diag(const ParamMap& p, int, std::uint64_t seed) {
    TrialOutput out;
    std::map<double, double> risks;
    std::map<double, double> bounds;
    const std::vector<double> sig = p.list("sigma_star");
    for (double nd : p.list("ns")) {
        DiagonalRecoverySpec spec;
        spec.d = p.integer("d");
        spec.r = static_cast<int>(sig.size());
        spec.sigma_star = Eigen::Map<const Vec>(sig.data(), spec.r);
        spec.n = static_cast<int>(nd);
        spec.noise_std = p.num("noise_std");
        spec.noise_bound = p.num("noise_bound");
        spec.alpha = std::pow(static_cast<double>(spec.d) * spec.d * nd, -0.25) * p.num("alpha_mult");
        spec.seed = derive_seed(seed, "n", static_cast<std::uint64_t>(nd));
        const double sigma_r = sig.back();
        // Recommended stopping time in the closed-form clock, mapped to flow time.
        const double tau = p.num("t_mult") * std::log(spec.d * nd * sigma_r) / sigma_r;
        FlowConfig flow;
        flow.alpha = spec.alpha;
        flow.time_scale = p.num("kappa");
        flow.t_grid = {0.0, tau / flow.time_scale};
        const DiagonalMeasurements m = gen_diagonal_measurements(spec);
        const RiskSeries rs = diag_excess_risks(diag_flow_trace(m, flow), m.sigma_star_full);
        BoundInputs b;
        b.n = nd;
        b.delta = p.num("delta");
        b.d = spec.d;
        b.r = spec.r;
        b.alpha = spec.alpha;
        b.sigma_star = spec.sigma_star;
        b.sigma_r = sigma_r;
        b.V = p.num("bound_V");
        b.nu = spec.noise_std;
        const double bound = thm3_bound(b, tau);
        out.add(nd, "er", rs.er.back());
        out.add(nd, "ver", rs.ver.back());
        out.add(nd, "ber", rs.ber.back());
        out.add(nd, "thm3_bound", bound);
        risks[nd] = rs.er.back();
        bounds[nd] = bound;
    }
    out.scalar("rate_slope", rate_probe(risks));
    out.scalar("bound_slope", rate_probe(bounds));
    return out;
}

inline TrialOutput run_bound_compare(const ParamMap& p, int, std::uint64_t seed) {
    TrialOutput out;
    const double n = p.integer("n");
    const int T = static_cast<int>(std::ceil(std::pow(n, p.num("T_exponent"))));
    auto measure = [&](double theta_scale) {
        ParamMap q = p;
        q.set("theta_norm", fmt17(p.num("theta_norm") * theta_scale));
        const LinearProblemSpec spec = linear_spec(q, seed);
        const RegressionDataset ds = gen_linear_dataset(spec);
        const SignalNoiseSplit split = split_signal_noise(ds);
        GdConfig cfg;
        cfg.stepsize = p.num("lambda");
        cfg.steps = T;
        const ParamTrace ts = gd_run(ds, cfg);
        const ParamTrace tv = gd_run(split.variance, cfg);
        const SupNorms sup = sup_param_norms(ts, tv);
        const Vec cov = covariance_diagonal(spec);
        BoundInputs b;
        b.n = n;
        b.T = T;
        b.lambda = cfg.stepsize;
        b.delta = p.num("delta");
        b.V = ds.noise_bound.value_or(0.0);
        b.B = sup.B;
        b.B_prime = sup.B_prime;
        b.sigma_w = p.num("sigma_w");
        b.theta_star_energy = (ds.theta_star.array().square() * cov.array()).sum();
        b.theta_star_norm_sq = ds.theta_star.squaredNorm();
        struct M {
            double B, B_prime, thm1, baseline, er;
        };
        return M{sup.B, sup.B_prime, thm1_bound(b), stability_baseline_bound(b),
                 quadratic_excess_risk(ts.final_params(), ds.theta_star, cov)};
    };
    const auto base = measure(1.0);
    const auto scaled = measure(p.num("scale_factor"));
    out.scalar("T", T);
    out.scalar("B", base.B);
    out.scalar("B_prime", base.B_prime);
    out.scalar("thm1_bound", base.thm1);
    out.scalar("baseline_bound", base.baseline);
    out.scalar("er_final", base.er);
    out.scalar("B_less_than_B_prime", base.B < base.B_prime ? 1.0 : 0.0);
    out.scalar("decomposition_wins", base.thm1 < base.baseline ? 1.0 : 0.0);
    out.scalar("scaled_B", scaled.B);
    out.scalar("scaled_B_prime", scaled.B_prime);
    out.scalar("scaled_thm1_bound", scaled.thm1);
    out.scalar("scaled_baseline_bound", scaled.baseline);
    return out;
}

inline ParamMap nn_defaults() {
    return with(linear_defaults(),
                {{"d", "30"},
                 {"n", "500"},
                 {"theta", "sparse"},
                 {"theta_support", "5"},
                 {"theta_norm", "1"},
                 {"noise_std", "1.5"},
                 {"depth", "2"},
                 {"width", "64"},
                 {"init", "gaussian"},
                 {"init_std", "0.001"},
                 {"optimizer", "sgd"},
                 {"eta", "0.01"},
                 {"adam_beta1", "0.9"},
                 {"adam_beta2", "0.999"},
                 {"adam_eps", "1e-8"},
                 {"rprop_eta_minus", "0.5"},
                 {"rprop_eta_plus", "1.2"},
                 {"rprop_step_min", "1e-6"},
                 {"rprop_step_max", "50"},
                 {"epochs", "200"},
                 {"batch_size", "32"},
                 {"record_every", "5"},
                 {"n_mc", "10000"},
                 {"ddc_a", "1"},
                 {"ddc_C", "0"},
                 {"ddc_Cp", "0"}});
}

inline Preset nn_preset(const std::string& name, const std::string& desc, const ParamMap& overrides, int trials) {
    ParamMap p = with(with(common_defaults(trials), nn_defaults()), overrides);
    return {name, "mlp", desc, p, run_nn};
}

}  // namespace presets

inline const std::vector<Preset>& preset_registry() {
    using namespace presets;
    static const std::vector<Preset> registry = [] {
        std::vector<Preset> r;

        r.push_back({"fig1-landscape", "linreg",
                     "gradient norm at zero initialization: standard vs variance training",
                     with(with(common_defaults(5), linear_defaults()), {{"d", "100"}, {"n", "2000"}}), run_fig1});

        const ParamMap fig3_lin = with(with(common_defaults(5), linear_defaults()),
                                       {{"d", "500"},
                                        {"noise_std", "2"},
                                        {"lambda", "0.01"},
                                        {"steps", "3000"},
                                        {"record_every", "10"},
                                        {"ddc_a", "1"},
                                        {"ddc_C", "0"},
                                        {"ddc_Cp", "0"}});
        for (int n : {300, 800}) {
            r.push_back({"fig3-linreg-n" + std::to_string(n), "linreg",
                         "linear regression decomposition trace (d=500, sigma=2, lambda=0.01)",
                         with(fig3_lin, {{"n", std::to_string(n)}}), run_linreg_fig3});
        }

        const ParamMap fig3_mat = with(common_defaults(5), {{"d", "20"},
                                                            {"sigma_star", "5,3,1"},
                                                            {"noise_std", "1"},
                                                            {"alpha", "0.01"},
                                                            {"eta", "0.1"},
                                                            {"steps", "400"},
                                                            {"ddc_a", "1"},
                                                            {"ddc_C", "0"},
                                                            {"ddc_Cp", "8.5"},
                                                            {"paper_c_prime", "8.5"}});
        for (int n : {200, 600}) {
            r.push_back({"fig3-matrec-n" + std::to_string(n), "general-recovery",
                         "general symmetric matrix recovery by gradient descent (d=20, r=3)",
                         with(fig3_mat, {{"n", std::to_string(n)}}), run_matrec_fig3});
        }

        const ParamMap fig_nn = {{"depth", "3"},        {"init", "fan_in"}, {"eta", "0.001"},
                                 {"epochs", "200"},     {"record_every", "5"}};
        r.push_back(nn_preset("fig2a-nn", "3-layer ReLU network on a sparse linear target, SGD", fig_nn, 3));
        for (int n : {500, 1500}) {
            r.push_back(nn_preset("fig4-nn-n" + std::to_string(n), "ReLU network decomposition trace, SGD eta=1e-3",
                                  with(fig_nn, {{"n", std::to_string(n)}}), 3));
        }

        const char* depth_a[] = {"1.3", "2.0", "2.3"};
        for (int depth : {2, 3, 4}) {
            r.push_back(nn_preset("appA-depth-" + std::to_string(depth), "depth sweep, width 64, SGD",
                                  {{"depth", std::to_string(depth)}, {"paper_a", depth_a[depth - 2]}}, 5));
        }
        const std::pair<int, const char*> widths[] = {{64, "1.3"}, {256, "1.0"}, {512, "1.0"}};
        for (const auto& [w, a] : widths) {
            r.push_back(nn_preset("appA-width-" + std::to_string(w), "width sweep, depth 2, SGD",
                                  {{"width", std::to_string(w)}, {"paper_a", a}}, 5));
        }
        r.push_back(nn_preset("appA-opt-sgd", "optimizer sweep: SGD", {{"paper_a", "1.3"}}, 5));
        r.push_back(nn_preset("appA-opt-adam", "optimizer sweep: Adam",
                              {{"optimizer", "adam"}, {"eta", "0.002"}, {"paper_a", "1.2"}}, 5));
        r.push_back(nn_preset("appA-opt-rprop", "optimizer sweep: Rprop",
                              {{"optimizer", "rprop"}, {"eta", "0.0005"}, {"paper_a", "1.1"}}, 5));

        r.push_back({"rate-probe-linreg", "linreg", "excess risk at T = ceil(sqrt(n)) across sample sizes",
                     with(with(common_defaults(10), linear_defaults()),
                          {{"d", "400"},
                           {"n", "100"},
                           {"covariance", "powerlaw"},
                           {"cov_exponent", "1"},
                           {"theta", "powerlaw"},
                           {"noise_std", "1"},
                           {"lambda", "0.5"},
                           {"T_exponent", "0.5"},
                           {"ns", "100,200,400,800,1600,3200"},
                           {"rate_window", "-0.7,-0.3"}}),
                     run_rate_linreg});

        r.push_back({"rate-probe-diag", "diag-recovery",
                     "diagonal recovery at the recommended alpha and stopping time across sample sizes",
                     with(common_defaults(10), {{"d", "20"},
                                                {"sigma_star", "5,3,1"},
                                                {"noise_std", "1"},
                                                {"noise_bound", "0"},
                                                {"bound_V", "1"},
                                                {"alpha_mult", "1"},
                                                {"t_mult", "1"},
                                                {"kappa", "4"},
                                                {"delta", "0.05"},
                                                {"ns", "200,400,800,1600,3200,6400"}}),
                     run_rate_diag});

        r.push_back({"bound-compare-highsnr", "linreg",
                     "decomposition bound vs stability baseline at high signal-to-noise ratio",
                     with(with(common_defaults(10), linear_defaults()),
                          {{"d", "8"},
                           {"n", "256"},
                           {"covariance", "scaled"},
                           {"cov_scale", "0.125"},
                           {"theta_norm", "10"},
                           {"noise", "uniform"},
                           {"noise_bound", "1"},
                           {"lambda", "1"},
                           {"T_exponent", "0.75"},
                           {"delta", "0.05"},
                           {"sigma_w", "1"},
                           {"scale_factor", "10"}}),
                     run_bound_compare});
        return r;
    }();
    return registry;
}

inline const Preset& find_preset(const std::string& name) {
    for (const auto& p : preset_registry())
        if (p.name == name) return p;
    throw SpecError("unknown preset '" + name + "' (see list-presets)");
}

}  // namespace erdlab::harness
