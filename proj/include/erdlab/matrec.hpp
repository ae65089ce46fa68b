#pragma once

// Diagonal matrix recovery under gradient flow (closed forms plus an RK4
// oracle) and gradient descent for general symmetric low-rank recovery.

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "erdlab/errors.hpp"
#include "erdlab/problem_gen.hpp"

namespace erdlab {

enum class TrainingMode { Standard, Bias, Variance };

inline const char* to_string(TrainingMode m) {
    switch (m) {
        case TrainingMode::Standard: return "standard";
        case TrainingMode::Bias: return "bias";
        case TrainingMode::Variance: return "variance";
    }
    return "?";
}

enum class BranchKind {
    SignalPositive,  ///< standard training, s_emp > 0
    SignalNegative,  ///< standard training, s_emp < 0 (only possible when sigma* = 0)
    BiasPositive,    ///< bias training, s_b > 0
    NoisePositive,   ///< variance training, s_v > 0
    NoiseNegative,   ///< variance training, s_v < 0
    ZeroSignalBias,  ///< target numerically zero (sigma* = 0 in bias training, or a degenerate s)
};

inline constexpr double kZeroTarget = 1e-14;

/// Linear coefficient of the per-coordinate flow, i.e. (1/n) sum a_i y_i for
/// the mode's responses.
inline double mode_target(const CoordinateStats& st, TrainingMode mode) {
    switch (mode) {
        case TrainingMode::Standard: return st.s_emp;
        case TrainingMode::Bias: return st.s_b;
        case TrainingMode::Variance: return st.s_v;
    }
    return 0.0;
}

inline BranchKind select_branch(const CoordinateStats& st, TrainingMode mode) {
    const double s = mode_target(st, mode);
    if (std::abs(s) < kZeroTarget) return BranchKind::ZeroSignalBias;
    switch (mode) {
        case TrainingMode::Standard: return s > 0 ? BranchKind::SignalPositive : BranchKind::SignalNegative;
        case TrainingMode::Bias:
            if (s < 0) throw ContractError("bias target cannot be negative");
            return BranchKind::BiasPositive;
        case TrainingMode::Variance: return s > 0 ? BranchKind::NoisePositive : BranchKind::NoiseNegative;
    }
    return BranchKind::ZeroSignalBias;
}

/// `time_scale` maps flow time of the per-coordinate loss
/// (1/n) sum (y_i - a_i u^2)^2 onto the clock tau = kappa * t of the closed
/// forms, whose exponents read exp(2 s tau). For that loss kappa = 4.
struct FlowConfig {
    double alpha = 0.01;
    std::vector<double> t_grid;
    double time_scale = 4.0;
};

inline void validate(const FlowConfig& cfg) {
    if (!(cfg.alpha >= 0.0)) throw SpecError("alpha must be >= 0");
    if (!(cfg.time_scale > 0.0)) throw SpecError("time_scale must be > 0");
    for (std::size_t i = 0; i < cfg.t_grid.size(); ++i) {
        if (cfg.t_grid[i] < 0.0) throw SpecError("time grid must be nonnegative");
        if (i > 0 && !(cfg.t_grid[i] > cfg.t_grid[i - 1])) throw SpecError("time grid must be strictly increasing");
    }
}

namespace detail {

inline double closed_form_w(double s, double xi, double a2, double tau) {
    if (std::abs(s) < kZeroTarget) return a2 / (2.0 * xi * a2 * tau + 1.0);
    if (s > 0) {
        const double e = std::exp(-2.0 * s * tau);
        return s * a2 / ((s - xi * a2) * e + xi * a2);
    }
    const double m = -s;
    const double e = std::exp(-2.0 * m * tau);
    return m * a2 * e / ((m + xi * a2) - xi * a2 * e);
}

}  // namespace detail

inline double closed_form_u2(const CoordinateStats& st, TrainingMode mode, const FlowConfig& cfg, double t) {
    if (t < 0.0) throw SpecError("closed_form_u2: t must be >= 0");
    select_branch(st, mode);
    return detail::closed_form_w(mode_target(st, mode), st.xi, cfg.alpha * cfg.alpha, cfg.time_scale * t);
}

inline std::vector<double> closed_form_u2(const CoordinateStats& st, TrainingMode mode, const FlowConfig& cfg) {
    std::vector<double> out;
    out.reserve(cfg.t_grid.size());
    for (double t : cfg.t_grid) out.push_back(closed_form_u2(st, mode, cfg, t));
    return out;
}

// ---------------------------------------------------------------------------
// RK4 oracle
// ---------------------------------------------------------------------------

/// Right-hand side of u' = -flow_scale * d/du (1/n) sum (y_i - a_i u^2)^2
/// = flow_scale * 4 u (s - xi u^2).
struct CoordinateFlow {
    double s = 0.0;
    double xi = 1.0;
    double flow_scale = 1.0;

    double operator()(double u) const { return flow_scale * 4.0 * u * (s - xi * u * u); }
};

/// Fixed-step RK4 with `steps_per_unit` steps per unit time (at least one step
/// per grid interval). Returns u^2 at each grid point.
inline std::vector<double> rk4_u2(const CoordinateFlow& f, double u0, const std::vector<double>& t_grid,
                                  double steps_per_unit) {
    std::vector<double> out;
    out.reserve(t_grid.size());
    double u = u0;
    double t = 0.0;
    for (double target : t_grid) {
        const double span = target - t;
        if (span > 0.0) {
            const long steps = std::max(1L, static_cast<long>(std::ceil(span * steps_per_unit)));
            const double h = span / static_cast<double>(steps);
            for (long k = 0; k < steps; ++k) {
                const double k1 = f(u);
                const double k2 = f(u + 0.5 * h * k1);
                const double k3 = f(u + 0.5 * h * k2);
                const double k4 = f(u + h * k3);
                u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
        t = target;
        out.push_back(u * u);
    }
    return out;
}

inline double max_relative_difference(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max(std::abs(a[i]), std::abs(b[i]));
        if (scale == 0.0) continue;
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

struct OdeOptions {
    double flow_scale = 1.0;
    double initial_steps_per_unit = 64.0;
    double tolerance = 1e-8;
    double max_steps_per_unit = 1e8;
};

/// Integrates the mode's flow, halving the step until successive solutions
/// agree to `tolerance` (relative) at every grid point.
inline std::vector<double> ode_oracle(const CoordinateStats& st, TrainingMode mode, const FlowConfig& cfg,
                                      const std::vector<double>& t_grid, const OdeOptions& opt = {}) {
    if (!(opt.initial_steps_per_unit > 0.0)) throw SpecError("ode_oracle: step count must be positive");
    const CoordinateFlow f{mode_target(st, mode), st.xi, opt.flow_scale};
    // The step has to resolve the fastest local rate of the flow.
    const double horizon = t_grid.empty() ? 0.0 : t_grid.back();
    const double rate = opt.flow_scale * 4.0 * (std::abs(f.s) + f.xi * cfg.alpha * cfg.alpha) * 2.0;
    double spu = std::max(opt.initial_steps_per_unit, 8.0 * rate);
    std::vector<double> prev = rk4_u2(f, cfg.alpha, t_grid, spu);
    while (true) {
        spu *= 2.0;
        if (spu > opt.max_steps_per_unit || spu * horizon > 1e10)
            throw NumericalError("ode_oracle: step size underflow before reaching tolerance");
        std::vector<double> next = rk4_u2(f, cfg.alpha, t_grid, spu);
        if (max_relative_difference(prev, next) <= opt.tolerance) return next;
        prev = std::move(next);
    }
}

// ---------------------------------------------------------------------------
// Time-scale calibration
// ---------------------------------------------------------------------------

struct CalibrationResult {
    double kappa = 0.0;
    double residual = 0.0;  ///< RMS relative deviation at the fitted kappa
    int coordinates_used = 0;
};

struct CalibrationSample {
    CoordinateStats stats;
    TrainingMode mode = TrainingMode::Standard;
};

/// Least-squares fit of kappa so the closed forms track the oracle
/// trajectories (relative residuals, positive-branch samples only).
inline CalibrationResult calibrate_time_scale(const std::vector<CalibrationSample>& samples, const FlowConfig& cfg,
                                              const OdeOptions& opt = {}) {
    validate(cfg);
    struct Track {
        CoordinateStats st;
        TrainingMode mode;
        std::vector<double> ode;
    };
    std::vector<Track> tracks;
    for (const auto& smp : samples) {
        const BranchKind b = select_branch(smp.stats, smp.mode);
        if (b == BranchKind::SignalPositive || b == BranchKind::BiasPositive || b == BranchKind::NoisePositive)
            tracks.push_back({smp.stats, smp.mode, ode_oracle(smp.stats, smp.mode, cfg, cfg.t_grid, opt)});
    }
    if (tracks.empty()) throw SpecError("calibrate_time_scale: no positive-branch coordinate available");

    auto objective = [&](double log_kappa) {
        FlowConfig trial = cfg;
        trial.time_scale = std::exp(log_kappa);
        double acc = 0.0;
        std::size_t count = 0;
        for (const auto& tr : tracks) {
            for (std::size_t i = 0; i < cfg.t_grid.size(); ++i) {
                const double cf = closed_form_u2(tr.st, tr.mode, trial, cfg.t_grid[i]);
                const double r = (cf - tr.ode[i]) / tr.ode[i];
                acc += r * r;
                ++count;
            }
        }
        return acc / static_cast<double>(std::max<std::size_t>(count, 1));
    };
    // Coarse scan to land in the right basin, then Brent on the bracket.
    double best = -8.0;
    double best_val = objective(best);
    for (double lk = -8.0; lk <= 8.0; lk += 0.05) {
        const double v = objective(lk);
        if (v < best_val) {
            best_val = v;
            best = lk;
        }
    }
    const auto [lk, val] = boost::math::tools::brent_find_minima(objective, best - 0.05, best + 0.05,
                                                                 std::numeric_limits<double>::digits);
    return {std::exp(lk), std::sqrt(val), static_cast<int>(tracks.size())};
}

// ---------------------------------------------------------------------------
// Diagonal traces and risks
// ---------------------------------------------------------------------------

/// Indexed [coordinate][time].
struct SquaredFactorTrace {
    std::vector<double> times;
    std::vector<std::vector<double>> u2;
    std::vector<std::vector<double>> u2_bias;
    std::vector<std::vector<double>> u2_var;
};

enum class DiagSolver { ClosedForm, Ode };

inline SquaredFactorTrace diag_flow_trace(const DiagonalMeasurements& m, const FlowConfig& cfg,
                                          DiagSolver solver = DiagSolver::ClosedForm, const OdeOptions& opt = {}) {
    validate(cfg);
    SquaredFactorTrace tr;
    tr.times = cfg.t_grid;
    auto run = [&](const CoordinateStats& st, TrainingMode mode) {
        if (solver == DiagSolver::ClosedForm) return closed_form_u2(st, mode, cfg);
        return ode_oracle(st, mode, cfg, cfg.t_grid, opt);
    };
    for (int j = 0; j < m.d(); ++j) {
        const CoordinateStats st = coordinate_stats(m, j);
        tr.u2.push_back(run(st, TrainingMode::Standard));
        tr.u2_bias.push_back(run(st, TrainingMode::Bias));
        tr.u2_var.push_back(run(st, TrainingMode::Variance));
    }
    return tr;
}

struct RiskSeries {
    std::vector<double> er;
    std::vector<double> ver;
    std::vector<double> ber;
};

inline RiskSeries diag_excess_risks(const SquaredFactorTrace& tr, const Vec& sigma_star_full) {
    const std::size_t d = tr.u2.size();
    if (static_cast<Eigen::Index>(d) != sigma_star_full.size())
        throw ContractError("diag_excess_risks: trace and spec disagree on d");
    RiskSeries out;
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        double er = 0.0, ver = 0.0, ber = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double s = sigma_star_full(static_cast<Eigen::Index>(j));
            er += (tr.u2[j][k] - s) * (tr.u2[j][k] - s);
            ver += tr.u2_var[j][k] * tr.u2_var[j][k];
            ber += (tr.u2_bias[j][k] - s) * (tr.u2_bias[j][k] - s);
        }
        out.er.push_back(er);
        out.ver.push_back(ver);
        out.ber.push_back(ber);
    }
    return out;
}

inline RiskSeries diag_excess_risks(const SquaredFactorTrace& tr, const DiagonalRecoverySpec& spec) {
    Vec full = Vec::Zero(spec.d);
    full.head(spec.r) = spec.sigma_star;
    return diag_excess_risks(tr, full);
}

// ---------------------------------------------------------------------------
// General recovery by gradient descent
// ---------------------------------------------------------------------------

struct GeneralRecoveryOptions {
    int steps = 300;
    bool keep_matrices = false;
    double divergence_threshold = 1e12;
};

struct GeneralRecoveryTrace {
    std::vector<int> steps;
    std::vector<double> dist_std;   ///< ||X_t - X*||_F
    std::vector<double> dist_bias;  ///< ||X_t^b - X*||_F
    std::vector<double> norm_var;   ///< ||X_t^v||_F
    std::vector<double> loss_std;
    std::vector<double> loss_bias;
    std::vector<double> loss_var;
    std::vector<Mat> X_std, X_bias, X_var;
};

/// Three runs from U_0 = alpha I with update U <- U + eta * sym(G) U,
/// G = (1/n) sum_i r_i A_i, r_i the residual of the mode's responses; this is
/// gradient descent on (1/(4n)) sum_i r_i^2. Losses are reported as
/// (1/n) sum_i r_i^2.
inline GeneralRecoveryTrace general_recovery_gd(const GeneralRecoverySpec& spec, const GeneralMeasurements& m,
                                                const GeneralRecoveryOptions& opt = {}) {
    validate(spec);
    if (m.d() != spec.d || m.n() != spec.n) throw ContractError("general_recovery_gd: measurements do not match spec");
    if (opt.steps < 0) throw SpecError("general_recovery_gd: steps must be >= 0");
    const int d = spec.d;
    const int dd = d * d;
    const double n = spec.n;
    const Vec* responses[3] = {&m.y, &m.y_clean, &m.eps};
    Mat U[3];
    for (auto& u : U) u = spec.alpha * Mat::Identity(d, d);

    GeneralRecoveryTrace tr;
    Vec resid(spec.n);
    Vec gvec(dd);
    for (int t = 0; t <= opt.steps; ++t) {
        Mat X[3];
        double loss[3];
        for (int k = 0; k < 3; ++k) {
            X[k] = U[k] * U[k].transpose();
            resid.noalias() = *responses[k] - m.A * Eigen::Map<const Vec>(X[k].data(), dd);
            loss[k] = resid.squaredNorm() / n;
            if (!std::isfinite(loss[k]) || loss[k] > opt.divergence_threshold) {
                throw NumericalError("general_recovery_gd: " + std::string(to_string(static_cast<TrainingMode>(k))) +
                                     " run diverged at step " + std::to_string(t) + " (loss " +
                                     std::to_string(loss[k]) + ")");
            }
            if (t < opt.steps) {
                gvec.noalias() = m.A.transpose() * resid;
                const Eigen::Map<const Mat> G(gvec.data(), d, d);
                const Mat sym = (G + G.transpose()) * (0.5 / n);
                U[k] += spec.stepsize * sym * U[k];
            }
        }
        tr.steps.push_back(t);
        tr.dist_std.push_back((X[0] - m.X_star).norm());
        tr.dist_bias.push_back((X[1] - m.X_star).norm());
        tr.norm_var.push_back(X[2].norm());
        tr.loss_std.push_back(loss[0]);
        tr.loss_bias.push_back(loss[1]);
        tr.loss_var.push_back(loss[2]);
        if (opt.keep_matrices) {
            tr.X_std.push_back(X[0]);
            tr.X_bias.push_back(X[1]);
            tr.X_var.push_back(X[2]);
        }
    }
    return tr;
}

}  // namespace erdlab
