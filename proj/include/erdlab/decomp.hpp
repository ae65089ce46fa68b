#pragma once

// Runs standard/bias/variance training for any problem family, assembles the
// ER/VER/BER trace, and checks the dynamics decomposition condition and the
// resulting excess-risk inequality.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "erdlab/errors.hpp"
#include "erdlab/linreg.hpp"
#include "erdlab/matrec.hpp"
#include "erdlab/nn.hpp"
#include "erdlab/problem_gen.hpp"

namespace erdlab {

enum class Space { Parameter, Function };

inline const char* to_string(Space s) { return s == Space::Parameter ? "parameter" : "function"; }

/// ER(u) / dist(u)^s is bounded between m_u and M_u.
struct SharpnessSpec {
    double s = 2.0;
    double m_u = 1.0;
    double M_u = 1.0;
};

inline void validate(const SharpnessSpec& sp) {
    if (!(sp.s > 0.0)) throw SpecError("sharpness factor must be > 0");
    if (!(sp.m_u > 0.0 && sp.m_u <= sp.M_u)) throw SpecError("need 0 < m_u <= M_u");
}

struct DecompositionTrace {
    std::string family;
    Space space = Space::Parameter;
    int n = 1;
    std::vector<double> t;
    std::vector<double> er, ver, ber;
    std::vector<double> param_dist, var_dist, bias_dist;
    /// Monte Carlo standard errors (function space only; empty otherwise).
    std::vector<double> er_se, ver_se, ber_se;
    std::vector<double> param_dist_se, var_dist_se, bias_dist_se;
    SharpnessSpec sharpness;
    bool sharpness_exact = false;

    std::size_t size() const { return t.size(); }
    bool has_se() const { return !param_dist_se.empty(); }
};

struct DdcParams {
    double a = 1.0;
    double C = 0.0;
    double C_prime = 0.0;
    Space space = Space::Parameter;
};

struct DdcReport {
    bool holds_everywhere = true;
    std::optional<double> first_violation_time;
    double max_ratio = 0.0;
    double min_feasible_a = 0.0;
    std::optional<double> first_checked_time;
    int violations = 0;
    std::vector<char> checked;  ///< per trace index
    std::vector<char> holds;    ///< per trace index (meaningful where checked)
};

inline constexpr double kInequalityTolerance = 1e-9;

namespace detail {

inline void check_trace(const DecompositionTrace& tr) {
    const std::size_t k = tr.t.size();
    if (tr.er.size() != k || tr.ver.size() != k || tr.ber.size() != k || tr.param_dist.size() != k ||
        tr.var_dist.size() != k || tr.bias_dist.size() != k)
        throw ContractError("decomposition trace has ragged columns");
}

inline bool skip_time(double t, double C) { return C > 0.0 && t <= 0.0; }

inline double offset(double t, double C, double C_prime, int n) {
    double off = C_prime / std::sqrt(static_cast<double>(n));
    if (C > 0.0) off += C / std::sqrt(t);
    return off;
}

}  // namespace detail

/// Slack allowed at index i: 1e-9 plus three Monte Carlo standard errors of
/// the combined left-minus-right side when the trace carries them.
inline double ddc_tolerance(const DecompositionTrace& tr, std::size_t i, double a) {
    if (!tr.has_se()) return kInequalityTolerance;
    const double se = std::sqrt(tr.param_dist_se[i] * tr.param_dist_se[i] +
                                a * a * (tr.var_dist_se[i] * tr.var_dist_se[i] +
                                         tr.bias_dist_se[i] * tr.bias_dist_se[i]));
    return kInequalityTolerance + 3.0 * se;
}

inline double fit_min_a(const DecompositionTrace& tr, double C, double C_prime, int n) {
    detail::check_trace(tr);
    double best = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (detail::skip_time(tr.t[i], C)) continue;
        const double denom = tr.var_dist[i] + tr.bias_dist[i];
        if (denom < 1e-12) continue;
        any = true;
        const double num = std::max(0.0, tr.param_dist[i] - detail::offset(tr.t[i], C, C_prime, n));
        best = std::max(best, num / denom);
    }
    if (!any) throw NumericalError("fit_min_a: every denominator is degenerate, a is undefined");
    return best;
}

/// Smallest C' making the condition hold with the given a and C.
inline double fit_min_c_prime(const DecompositionTrace& tr, double a, double C, int n) {
    detail::check_trace(tr);
    double best = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (detail::skip_time(tr.t[i], C)) continue;
        const double slack = tr.param_dist[i] - a * (tr.var_dist[i] + tr.bias_dist[i]) - detail::offset(tr.t[i], C, 0.0, n);
        best = std::max(best, slack * std::sqrt(static_cast<double>(n)));
    }
    return best;
}

inline DdcReport check_ddc(const DecompositionTrace& tr, const DdcParams& p, int n) {
    detail::check_trace(tr);
    if (tr.space != p.space) throw ContractError("check_ddc: trace and parameters live in different spaces");
    if (p.a < 0.0 || p.C < 0.0 || p.C_prime < 0.0) throw SpecError("DDC constants must be >= 0");
    DdcReport rep;
    rep.checked.assign(tr.size(), 0);
    rep.holds.assign(tr.size(), 0);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (detail::skip_time(tr.t[i], p.C)) continue;
        rep.checked[i] = 1;
        if (!rep.first_checked_time) rep.first_checked_time = tr.t[i];
        const double lhs = tr.param_dist[i];
        const double rhs = p.a * (tr.var_dist[i] + tr.bias_dist[i]) + detail::offset(tr.t[i], p.C, p.C_prime, n);
        const bool ok = lhs <= rhs + ddc_tolerance(tr, i, p.a);
        rep.holds[i] = ok ? 1 : 0;
        double ratio;
        if (rhs > 0.0) ratio = lhs / rhs;
        else ratio = lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        rep.max_ratio = std::max(rep.max_ratio, ratio);
        if (!ok) {
            ++rep.violations;
            if (rep.holds_everywhere) rep.first_violation_time = tr.t[i];
            rep.holds_everywhere = false;
        }
    }
    try {
        rep.min_feasible_a = fit_min_a(tr, p.C, p.C_prime, n);
    } catch (const NumericalError&) {
        rep.min_feasible_a = 0.0;
    }
    return rep;
}

struct Eq4Result {
    std::vector<double> rhs;
    std::vector<char> checked;
    bool holds = true;
    int violations = 0;
    std::optional<double> first_violation_time;
};

/// RHS(t) = (4a)^s (M_u/m_u)(VER + BER) + M_u (4C/sqrt t)^s + M_u (4C'/sqrt n)^s,
/// compared with ER(t) wherever the decomposition condition holds.
inline Eq4Result eq4_rhs_and_check(const DecompositionTrace& tr, const DdcParams& p, const SharpnessSpec& sharp,
                                   int n) {
    validate(sharp);
    const DdcReport ddc = check_ddc(tr, p, n);
    Eq4Result out;
    out.rhs.assign(tr.size(), std::numeric_limits<double>::quiet_NaN());
    out.checked.assign(tr.size(), 0);
    const double s = sharp.s;
    const double cp = sharp.M_u * std::pow(4.0 * p.C_prime / std::sqrt(static_cast<double>(n)), s);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (detail::skip_time(tr.t[i], p.C)) continue;
        double r = std::pow(4.0 * p.a, s) * (sharp.M_u / sharp.m_u) * (tr.ver[i] + tr.ber[i]) + cp;
        if (p.C > 0.0) r += sharp.M_u * std::pow(4.0 * p.C / std::sqrt(tr.t[i]), s);
        out.rhs[i] = r;
        if (!ddc.holds[i]) continue;
        out.checked[i] = 1;
        double tol = kInequalityTolerance;
        if (!tr.er_se.empty()) tol += 3.0 * tr.er_se[i];
        if (tr.er[i] > r + tol) {
            ++out.violations;
            if (out.holds) out.first_violation_time = tr.t[i];
            out.holds = false;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

struct LinregFamily {
    LinearProblemSpec spec;
    GdConfig gd;  ///< gd.theta0 is the standard-training init (shared by default)
    std::optional<Vec> theta0_bias;
    std::optional<Vec> theta0_var;
};

struct DiagFamily {
    DiagonalRecoverySpec spec;
    FlowConfig flow;
    DiagSolver solver = DiagSolver::ClosedForm;
};

struct GeneralFamily {
    GeneralRecoverySpec spec;
    GeneralRecoveryOptions options;
};

struct MlpFamily {
    LinearProblemSpec data;  ///< linear ground truth f*(x) = <theta*, x>
    MlpArch arch;
    OptimizerConfig optimizer = SgdConfig{};
    NnTrainOptions train;
};

using FamilySpec = std::variant<LinregFamily, DiagFamily, GeneralFamily, MlpFamily>;

struct LinregInternals {
    RegressionDataset dataset;
    ParamTrace std_trace, bias_trace, var_trace;
};

struct DecompositionRun {
    DecompositionTrace trace;
    std::optional<LinregInternals> linreg;
    std::optional<GeneralRecoveryTrace> general;
};

namespace detail {

inline DecompositionRun run_linreg(const LinregFamily& fam) {
    DecompositionRun run;
    LinregInternals in;
    in.dataset = gen_linear_dataset(fam.spec);
    const SignalNoiseSplit split = split_signal_noise(in.dataset);
    GdConfig cfg_b = fam.gd, cfg_v = fam.gd;
    if (fam.theta0_bias) cfg_b.theta0 = fam.theta0_bias;
    if (fam.theta0_var) cfg_v.theta0 = fam.theta0_var;
    in.std_trace = gd_run(in.dataset, fam.gd);
    in.bias_trace = gd_run(split.bias, cfg_b);
    in.var_trace = gd_run(split.variance, cfg_v);

    const Vec cov = covariance_diagonal(fam.spec);
    const Vec& ts = in.dataset.theta_star;
    DecompositionTrace& tr = run.trace;
    tr.family = "linreg";
    tr.space = Space::Parameter;
    tr.n = fam.spec.n;
    tr.sharpness = {2.0, cov.minCoeff(), cov.maxCoeff()};
    tr.sharpness_exact = true;
    const Vec zero = Vec::Zero(ts.size());
    for (std::size_t k = 0; k < in.std_trace.times.size(); ++k) {
        const Vec& th = in.std_trace.params[k];
        const Vec& tb = in.bias_trace.params[k];
        const Vec& tv = in.var_trace.params[k];
        tr.t.push_back(in.std_trace.times[k]);
        tr.er.push_back(quadratic_excess_risk(th, ts, cov));
        tr.ver.push_back(quadratic_excess_risk(tv, zero, cov));
        tr.ber.push_back(quadratic_excess_risk(tb, ts, cov));
        tr.param_dist.push_back((th - ts).norm());
        tr.var_dist.push_back(tv.norm());
        tr.bias_dist.push_back((tb - ts).norm());
    }
    run.linreg = std::move(in);
    return run;
}

inline DecompositionRun run_diag(const DiagFamily& fam) {
    const DiagonalMeasurements m = gen_diagonal_measurements(fam.spec);
    FlowConfig flow = fam.flow;
    flow.alpha = fam.spec.alpha;
    const SquaredFactorTrace sq = diag_flow_trace(m, flow, fam.solver);
    const RiskSeries rs = diag_excess_risks(sq, m.sigma_star_full);
    DecompositionRun run;
    DecompositionTrace& tr = run.trace;
    tr.family = "diag-recovery";
    tr.space = Space::Parameter;
    tr.n = fam.spec.n;
    tr.sharpness = {2.0, 1.0, 1.0};
    tr.sharpness_exact = true;
    tr.t = sq.times;
    tr.er = rs.er;
    tr.ver = rs.ver;
    tr.ber = rs.ber;
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        tr.param_dist.push_back(std::sqrt(rs.er[k]));
        tr.var_dist.push_back(std::sqrt(rs.ver[k]));
        tr.bias_dist.push_back(std::sqrt(rs.ber[k]));
    }
    return run;
}

inline DecompositionRun run_general(const GeneralFamily& fam) {
    const GeneralMeasurements m = gen_general_measurements(fam.spec);
    GeneralRecoveryTrace g = general_recovery_gd(fam.spec, m, fam.options);
    DecompositionRun run;
    DecompositionTrace& tr = run.trace;
    tr.family = "general-recovery";
    tr.space = Space::Parameter;
    tr.n = fam.spec.n;
    tr.sharpness = {2.0, 1.0, 1.0};
    tr.sharpness_exact = true;
    for (std::size_t k = 0; k < g.steps.size(); ++k) {
        tr.t.push_back(g.steps[k]);
        tr.param_dist.push_back(g.dist_std[k]);
        tr.bias_dist.push_back(g.dist_bias[k]);
        tr.var_dist.push_back(g.norm_var[k]);
        tr.er.push_back(g.dist_std[k] * g.dist_std[k]);
        tr.ber.push_back(g.dist_bias[k] * g.dist_bias[k]);
        tr.ver.push_back(g.norm_var[k] * g.norm_var[k]);
    }
    run.general = g;
    return run;
}

inline DecompositionRun run_mlp(const MlpFamily& fam) {
    const RegressionDataset ds = gen_linear_dataset(fam.data);
    const TripletData data = triplet_data(ds, covariance_diagonal(fam.data));
    const TripletResult res = train_triplet(fam.arch, fam.optimizer, data, fam.train, fam.data.seed);
    DecompositionRun run;
    DecompositionTrace& tr = run.trace;
    tr.family = "mlp";
    tr.space = Space::Function;
    tr.n = fam.data.n;
    tr.sharpness = {2.0, 1.0, 1.0};
    tr.sharpness_exact = true;
    auto dist_se = [](const McEstimate& e) { return e.value > 0.0 ? e.se / (2.0 * std::sqrt(e.value)) : e.se; };
    for (const auto& r : res.records) {
        tr.t.push_back(r.epoch);
        tr.er.push_back(r.er.value);
        tr.ver.push_back(r.ver.value);
        tr.ber.push_back(r.ber.value);
        tr.er_se.push_back(r.er.se);
        tr.ver_se.push_back(r.ver.se);
        tr.ber_se.push_back(r.ber.se);
        tr.param_dist.push_back(std::sqrt(r.er.value));
        tr.var_dist.push_back(std::sqrt(r.ver.value));
        tr.bias_dist.push_back(std::sqrt(r.ber.value));
        tr.param_dist_se.push_back(dist_se(r.er));
        tr.var_dist_se.push_back(dist_se(r.ver));
        tr.bias_dist_se.push_back(dist_se(r.ber));
    }
    return run;
}

}  // namespace detail

inline DecompositionRun run_decomposition_full(const FamilySpec& family) {
    return std::visit(
        [](const auto& fam) -> DecompositionRun {
            using T = std::decay_t<decltype(fam)>;
            if constexpr (std::is_same_v<T, LinregFamily>) return detail::run_linreg(fam);
            else if constexpr (std::is_same_v<T, DiagFamily>) return detail::run_diag(fam);
            else if constexpr (std::is_same_v<T, GeneralFamily>) return detail::run_general(fam);
            else return detail::run_mlp(fam);
        },
        family);
}

inline DecompositionTrace run_decomposition(const FamilySpec& family) {
    return run_decomposition_full(family).trace;
}

/// max_t ||theta_t - theta_v,t - theta_b,t|| over the recorded grid.
inline double check_lemma1_additivity(const DecompositionRun& run) {
    if (!run.linreg) throw ContractError("check_lemma1_additivity: only defined for the linear family");
    const auto& in = *run.linreg;
    double worst = 0.0;
    for (std::size_t k = 0; k < in.std_trace.params.size(); ++k) {
        worst = std::max(worst, (in.std_trace.params[k] - in.var_trace.params[k] - in.bias_trace.params[k]).norm());
    }
    return worst;
}

}  // namespace erdlab
