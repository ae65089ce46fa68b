#pragma once

// Gradient descent on the square loss for linear regression, its closed-form
// trajectory, and the population risk quantities built on top of it.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "erdlab/errors.hpp"
#include "erdlab/problem_gen.hpp"

namespace erdlab {

struct GdConfig {
    double stepsize = 0.01;
    int steps = 0;
    std::optional<Vec> theta0;  ///< zero when unset
    int record_every = 0;       ///< 0 picks 1 for steps <= 1000 and 10 otherwise
    bool check_admissible = true;
};

struct ParamTrace {
    std::vector<int> times;
    std::vector<Vec> params;
    double final_sup_norm = 0.0;  ///< max ||theta|| over every step, not only recorded ones
    std::vector<std::string> warnings;

    bool empty() const { return times.empty(); }
    const Vec& final_params() const { return params.back(); }
};

inline int effective_stride(const GdConfig& cfg) {
    if (cfg.record_every > 0) return cfg.record_every;
    return cfg.steps > 1000 ? 10 : 1;
}

/// Recorded step indices: 0, k, 2k, ... and always the final step.
inline std::vector<int> record_grid(int steps, int stride) {
    std::vector<int> grid;
    for (int t = 0; t <= steps; t += stride) grid.push_back(t);
    if (grid.back() != steps) grid.push_back(steps);
    return grid;
}

/// Largest eigenvalue of (1/n) X^T X, from the smaller of the two Gram matrices.
inline double gram_lambda_max(const Mat& X) {
    if (X.size() == 0) return 0.0;
    const Mat gram = X.rows() >= X.cols() ? Mat(X.transpose() * X) : Mat(X * X.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(gram, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff() / static_cast<double>(X.rows());
}

inline std::optional<std::string> admissibility_warning(const Mat& X, double stepsize) {
    const double lmax = gram_lambda_max(X);
    if (stepsize * lmax >= 1.0) {
        return "stepsize " + std::to_string(stepsize) + " times lambda_max " + std::to_string(lmax) +
               " is >= 1; gradient descent may not converge";
    }
    return std::nullopt;
}

inline ParamTrace gd_run(const Mat& X, const Vec& y, const GdConfig& cfg) {
    if (X.rows() != y.size()) throw SpecError("gd_run: X has " + std::to_string(X.rows()) + " rows but y has " +
                                              std::to_string(y.size()) + " entries");
    if (cfg.steps < 0) throw SpecError("gd_run: steps must be >= 0");
    if (!(cfg.stepsize > 0.0)) throw SpecError("gd_run: stepsize must be > 0");
    const Eigen::Index d = X.cols();
    Vec theta = cfg.theta0.value_or(Vec::Zero(d));
    if (theta.size() != d) throw SpecError("gd_run: theta0 has wrong dimension");

    ParamTrace trace;
    if (cfg.check_admissible) {
        if (auto w = admissibility_warning(X, cfg.stepsize)) trace.warnings.push_back(*w);
    }
    const int stride = effective_stride(cfg);
    const double scale = cfg.stepsize / static_cast<double>(X.rows());

    trace.times.push_back(0);
    trace.params.push_back(theta);
    trace.final_sup_norm = theta.norm();
    Vec residual(X.rows());
    for (int t = 1; t <= cfg.steps; ++t) {
        residual.noalias() = y - X * theta;
        theta.noalias() += scale * (X.transpose() * residual);
        trace.final_sup_norm = std::max(trace.final_sup_norm, theta.norm());
        if (t % stride == 0 || t == cfg.steps) {
            trace.times.push_back(t);
            trace.params.push_back(theta);
        }
    }
    return trace;
}

inline ParamTrace gd_run(const RegressionDataset& ds, const GdConfig& cfg) { return gd_run(ds.X, ds.y_noisy, cfg); }

/// Thin SVD of X with singular values under max(n, d) * s_max * 1e-12 dropped.
struct TruncatedSvd {
    Mat U;
    Vec s;
    Mat V;

    explicit TruncatedSvd(const Mat& X) {
        Eigen::BDCSVD<Mat> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success) throw NumericalError("SVD of the design matrix failed");
        const Vec& sv = svd.singularValues();
        const double smax = sv.size() > 0 ? sv(0) : 0.0;
        const double cutoff = static_cast<double>(std::max(X.rows(), X.cols())) * smax * 1e-12;
        Eigen::Index rank = 0;
        while (rank < sv.size() && sv(rank) > cutoff) ++rank;
        U = svd.matrixU().leftCols(rank);
        s = sv.head(rank);
        V = svd.matrixV().leftCols(rank);
    }

    Eigen::Index rank() const { return s.size(); }
    Vec pinv_apply(const Vec& y) const { return V * (s.cwiseInverse().asDiagonal() * (U.transpose() * y)); }
};

inline Vec min_norm_solution(const Mat& X, const Vec& Y) {
    if (X.rows() != Y.size()) throw SpecError("min_norm_solution: dimension mismatch");
    return TruncatedSvd(X).pinv_apply(Y);
}

/// theta_t = (I - (lambda/n) X^T X)^t (theta0 - X^+ Y) + X^+ Y, evaluated in the
/// right singular basis of X so any t costs O(d * rank).
class GdClosedForm {
public:
    GdClosedForm(const Mat& X, const Vec& y, double stepsize, const Vec& theta0)
        : svd_(X), stepsize_(stepsize), n_(static_cast<double>(X.rows())) {
        if (X.rows() != y.size() || theta0.size() != X.cols())
            throw SpecError("closed form: dimension mismatch");
        theta_dagger_ = svd_.pinv_apply(y);
        const Vec coef0 = svd_.V.transpose() * theta0;
        null_part_ = theta0 - svd_.V * coef0;
        range_coef_ = coef0 - svd_.V.transpose() * theta_dagger_;
        factor_ = (1.0 - stepsize_ * svd_.s.array().square() / n_).matrix();
    }

    Vec at(int t) const {
        if (t < 0) throw SpecError("closed form: t must be >= 0");
        Vec decay(factor_.size());
        for (Eigen::Index i = 0; i < factor_.size(); ++i) decay(i) = std::pow(factor_(i), t) * range_coef_(i);
        return theta_dagger_ + null_part_ + svd_.V * decay;
    }

    const Vec& limit() const { return theta_dagger_; }

private:
    TruncatedSvd svd_;
    double stepsize_;
    double n_;
    Vec theta_dagger_;
    Vec null_part_;
    Vec range_coef_;
    Vec factor_;
};

inline Vec closed_form_params(const Mat& X, const Vec& y, const GdConfig& cfg, int t) {
    const Vec theta0 = cfg.theta0.value_or(Vec::Zero(X.cols()));
    return GdClosedForm(X, y, cfg.stepsize, theta0).at(t);
}

inline Vec closed_form_params(const RegressionDataset& ds, const GdConfig& cfg, int t) {
    return closed_form_params(ds.X, ds.y_noisy, cfg, t);
}

/// (theta* - theta)^T diag(cov) (theta* - theta)
inline double quadratic_excess_risk(const Vec& theta, const Vec& theta_star, const Vec& cov_diag) {
    if (theta.size() != theta_star.size() || theta.size() != cov_diag.size())
        throw SpecError("excess risk: dimension mismatch");
    return ((theta_star - theta).array().square() * cov_diag.array()).sum();
}

inline double linreg_excess_risk(const Vec& theta, const LinearProblemSpec& spec, const Vec& theta_star) {
    return quadratic_excess_risk(theta, theta_star, covariance_diagonal(spec));
}

inline double linreg_excess_risk(const Vec& theta, const LinearProblemSpec& spec) {
    return linreg_excess_risk(theta, spec, realize_theta_star(spec));
}

/// Population minus empirical loss of the variance-training iterates, one value
/// per recorded step.
inline std::vector<double> variance_generalization_gap(const ParamTrace& trace, const RegressionDataset& ds,
                                                       const LinearProblemSpec& spec) {
    const Vec cov = covariance_diagonal(spec);
    const double n = ds.n();
    std::vector<double> gap;
    gap.reserve(trace.params.size());
    for (const Vec& theta : trace.params) {
        const double population = (theta.array().square() * cov.array()).sum() + ds.noise_second_moment;
        const double empirical = (ds.eps - ds.X * theta).squaredNorm() / n;
        gap.push_back(population - empirical);
    }
    return gap;
}

struct SupNorms {
    double B_prime = 0.0;  ///< standard training
    double B = 0.0;        ///< variance training
};

inline SupNorms sup_param_norms(const ParamTrace& trace_std, const ParamTrace& trace_var) {
    if (trace_std.empty() || trace_var.empty()) throw ContractError("sup_param_norms: empty trace");
    if (trace_std.times != trace_var.times) throw ContractError("sup_param_norms: traces use different step grids");
    return {trace_std.final_sup_norm, trace_var.final_sup_norm};
}

}  // namespace erdlab
