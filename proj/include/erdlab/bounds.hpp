#pragma once

// Closed-form generalization bounds: uniform stability, the decomposition
// bound for linear regression, the plain stability baseline, the diagonal
// recovery bound, and a log-log rate probe.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>

#include "erdlab/errors.hpp"
#include "erdlab/problem_gen.hpp"

namespace erdlab {

/// Scalars feeding the bound formulas. Unused fields may stay at defaults.
struct BoundInputs {
    double n = 1;
    double T = 1;
    double lambda = 1.0;
    double delta = 0.05;
    double V = 0.0;        ///< noise bound
    double B = 0.0;        ///< sup norm of the variance-training iterates
    double B_prime = 0.0;  ///< sup norm of the standard-training iterates
    double sigma_w = 1.0;  ///< subGaussian norm of the normalized signal projection
    double theta_star_energy = 0.0;   ///< theta*^T Sigma theta*
    double theta_star_norm_sq = 0.0;  ///< ||theta*||^2
    int d = 1;
    int r = 1;
    double alpha = 0.01;
    double nu = 0.0;
    Vec sigma_star;  ///< nonzero singular values of X*, length r
    double sigma_r = 1.0;
    double const_mult = 1.0;
    double exp_const = 1.0;  ///< constant inside exp(c sigma_j t)
};

namespace detail {

inline void check_common(double n, double delta) {
    if (!(n >= 1.0)) throw SpecError("bounds need n >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw SpecError("delta must lie in (0, 1)");
}

}  // namespace detail

/// Generalization bound of an eps-uniformly-stable algorithm.
inline double prop1_bound(double eps_stab, double n, double delta, double const_mult = 1.0) {
    detail::check_common(n, delta);
    if (eps_stab < 0.0) throw SpecError("stability constant must be >= 0");
    return const_mult * (eps_stab * std::log(n) * std::log(n / delta) + std::sqrt(std::log(1.0 / delta) / n));
}

/// Uniform stability of T steps of GD on the variance problem: 4 T lambda (V+B)^2 / n.
inline double linreg_stability_constant(const BoundInputs& b) {
    return 4.0 * b.T * b.lambda * (b.V + b.B) * (b.V + b.B) / b.n;
}

inline double thm1_bound(const BoundInputs& b) {
    detail::check_common(b.n, b.delta);
    if (!(b.T > 0.0 && b.lambda > 0.0)) throw SpecError("thm1_bound needs T > 0 and lambda > 0");
    const double vb2 = (b.V + b.B) * (b.V + b.B);
    const double lead = std::max({1.0, b.theta_star_energy * b.sigma_w * b.sigma_w, vb2});
    return b.const_mult * (lead * std::sqrt(std::log(4.0 / b.delta) / b.n) + b.theta_star_norm_sq / (b.lambda * b.T) +
                           b.T * b.lambda * vb2 * std::log(b.n) * std::log(b.n / b.delta) / b.n);
}

inline double stability_baseline_bound(const BoundInputs& b) {
    detail::check_common(b.n, b.delta);
    const double vb2 = (b.V + b.B_prime) * (b.V + b.B_prime);
    return b.const_mult *
           (std::max(1.0, vb2) * std::sqrt(std::log(2.0 / b.delta) / (2.0 * b.n)) + b.T * b.lambda * vb2 / b.n);
}

/// Diagonal-recovery bound at flow time t: sum of the six terms.
inline double thm3_bound(const BoundInputs& b, double t) {
    detail::check_common(b.n, b.delta);
    if (!(t > 0.0)) throw SpecError("thm3_bound needs t > 0");
    if (!(b.alpha > 0.0)) throw SpecError("thm3_bound needs alpha > 0");
    if (b.sigma_star.size() != b.r) throw SpecError("thm3_bound: sigma_star must have r entries");
    const double d = b.d;
    const double a2 = b.alpha * b.alpha;
    const double a4 = a2 * a2;
    const double frob2 = b.sigma_star.squaredNorm();
    double bias = 0.0;
    for (Eigen::Index j = 0; j < b.sigma_star.size(); ++j) {
        const double s = b.sigma_star(j);
        const double s2 = s * s;
        bias += s2 * s2 / (s2 + a4 * std::exp(b.exp_const * s * t));
    }
    const double log_a = std::log(1.0 / a2);
    const double sum = (frob2 + d * b.V * b.V + d * a4) * std::sqrt(std::log(d / b.delta) / b.n) + bias +
                       a2 * d / t +
                       d * b.V * b.V * (t + 1.0) * std::log(b.n) * std::log(2.0 * d * b.n / b.delta) / b.n +
                       d * a2 + log_a * log_a * b.r * b.nu * b.nu * std::log(b.r / b.delta) / b.n;
    return b.const_mult * sum;
}

/// Least-squares slope of log(risk) against log(n).
inline double rate_probe(const std::map<double, double>& risks) {
    if (risks.size() < 4) throw SpecError("rate_probe needs at least 4 points");
    Eigen::MatrixXd A(risks.size(), 2);
    Vec y(risks.size());
    Eigen::Index i = 0;
    for (const auto& [n, er] : risks) {
        if (!(n > 0.0) || !(er > 0.0)) throw SpecError("rate_probe: sizes and risks must be positive");
        A(i, 0) = std::log(n);
        A(i, 1) = 1.0;
        y(i) = std::log(er);
        ++i;
    }
    const Vec coef = A.colPivHouseholderQr().solve(y);
    return coef(0);
}

}  // namespace erdlab
