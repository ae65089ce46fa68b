#pragma once

// Synthetic problem instances for the three problem families and the
// signal/noise split that defines bias and variance training.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "erdlab/errors.hpp"
#include "erdlab/rng.hpp"

namespace erdlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Linear regression family
// ---------------------------------------------------------------------------

struct IdentityCovariance {};
struct DiagonalCovariance {
    Vec diag;
};
using CovarianceSpec = std::variant<IdentityCovariance, DiagonalCovariance>;

struct DenseRandomTheta {
    double norm = 1.0;
};
struct SparseTheta {
    int support = 1;
    double norm = 1.0;
};
struct ExplicitTheta {
    Vec values;
};
using ThetaSpec = std::variant<DenseRandomTheta, SparseTheta, ExplicitTheta>;

/// Gaussian noise with standard deviation `stddev`. When `clip_bound > 0` draws are
/// clipped to [-clip_bound, clip_bound].
struct GaussianNoise {
    double stddev = 1.0;
    double clip_bound = 0.0;
};
/// Uniform noise on [-bound, bound].
struct UniformNoise {
    double bound = 1.0;
};
using NoiseSpec = std::variant<GaussianNoise, UniformNoise>;

struct LinearProblemSpec {
    int d = 1;
    int n = 1;
    CovarianceSpec covariance = IdentityCovariance{};
    ThetaSpec theta_star = DenseRandomTheta{};
    NoiseSpec noise = GaussianNoise{};
    std::uint64_t seed = 0;
};

struct RegressionDataset {
    Mat X;
    Vec y_noisy;
    Vec y_clean;
    Vec eps;
    Vec theta_star;
    /// Almost-sure bound on |eps| when the noise law has one.
    std::optional<double> noise_bound;
    /// E[eps^2] under the generating law (not the sample average).
    double noise_second_moment = 0.0;

    int n() const { return static_cast<int>(X.rows()); }
    int d() const { return static_cast<int>(X.cols()); }
};

inline void validate(const LinearProblemSpec& spec) {
    if (spec.d < 1 || spec.n < 1) {
        throw SpecError("linear problem needs d >= 1 and n >= 1");
    }
    if (const auto* diag = std::get_if<DiagonalCovariance>(&spec.covariance)) {
        if (diag->diag.size() != spec.d) throw SpecError("covariance diagonal has wrong length");
        if ((diag->diag.array() <= 0.0).any()) throw SpecError("covariance entries must be > 0");
    }
    std::visit(
        [&](const auto& t) {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, DenseRandomTheta>) {
                if (t.norm < 0.0) throw SpecError("theta* norm must be >= 0");
            } else if constexpr (std::is_same_v<T, SparseTheta>) {
                if (t.support < 1 || t.support > spec.d) throw SpecError("sparse support out of range");
                if (t.norm < 0.0) throw SpecError("theta* norm must be >= 0");
            } else {
                if (t.values.size() != spec.d) throw SpecError("explicit theta* has wrong length");
            }
        },
        spec.theta_star);
    std::visit(
        [](const auto& nz) {
            using T = std::decay_t<decltype(nz)>;
            if constexpr (std::is_same_v<T, GaussianNoise>) {
                if (nz.stddev < 0.0 || nz.clip_bound < 0.0) throw SpecError("noise parameters must be >= 0");
            } else {
                if (nz.bound < 0.0) throw SpecError("noise bound must be >= 0");
            }
        },
        spec.noise);
}

inline Vec covariance_diagonal(const LinearProblemSpec& spec) {
    if (const auto* diag = std::get_if<DiagonalCovariance>(&spec.covariance)) return diag->diag;
    return Vec::Ones(spec.d);
}

/// Power-law spectrum 1, 1/2^p, 1/3^p, ...
inline Vec power_law_diagonal(int d, double exponent) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v(i) = std::pow(static_cast<double>(i + 1), -exponent);
    return v;
}

inline std::optional<double> noise_bound(const NoiseSpec& noise) {
    if (const auto* g = std::get_if<GaussianNoise>(&noise)) {
        if (g->clip_bound > 0.0) return g->clip_bound;
        if (g->stddev == 0.0) return 0.0;
        return std::nullopt;
    }
    return std::get<UniformNoise>(noise).bound;
}

/// E[eps^2] for the noise law, including the effect of clipping.
inline double noise_second_moment(const NoiseSpec& noise) {
    if (const auto* u = std::get_if<UniformNoise>(&noise)) return u->bound * u->bound / 3.0;
    const auto& g = std::get<GaussianNoise>(noise);
    const double s2 = g.stddev * g.stddev;
    if (g.clip_bound <= 0.0 || g.stddev == 0.0) return s2;
    const double c = g.clip_bound / g.stddev;
    const double pdf = std::exp(-0.5 * c * c) / std::sqrt(2.0 * M_PI);
    const double tail = 0.5 * std::erfc(c / std::sqrt(2.0));  // P(Z > c)
    return s2 * ((1.0 - 2.0 * tail) - 2.0 * c * pdf) + 2.0 * g.clip_bound * g.clip_bound * tail;
}

namespace detail {

inline double draw_noise(const NoiseSpec& noise, Rng& rng) {
    if (const auto* u = std::get_if<UniformNoise>(&noise)) {
        if (u->bound == 0.0) return 0.0;
        std::uniform_real_distribution<double> dist(-u->bound, u->bound);
        return dist(rng);
    }
    const auto& g = std::get<GaussianNoise>(noise);
    if (g.stddev == 0.0) return 0.0;
    std::normal_distribution<double> dist(0.0, g.stddev);
    double e = dist(rng);
    if (g.clip_bound > 0.0) e = std::clamp(e, -g.clip_bound, g.clip_bound);
    return e;
}

inline Vec gaussian_vector(int size, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Vec v(size);
    for (int i = 0; i < size; ++i) v(i) = dist(rng);
    return v;
}

}  // namespace detail

/// Ground-truth parameter. Drawn from its own sub-stream, so changing only the
/// target norm rescales theta* without touching X or eps.
inline Vec realize_theta_star(const LinearProblemSpec& spec) {
    validate(spec);
    Rng rng = make_rng(spec.seed, "theta");
    return std::visit(
        [&](const auto& t) -> Vec {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, ExplicitTheta>) {
                return t.values;
            } else if constexpr (std::is_same_v<T, DenseRandomTheta>) {
                Vec v = detail::gaussian_vector(spec.d, rng);
                return v * (t.norm / v.norm());
            } else {
                std::vector<int> idx(spec.d);
                for (int i = 0; i < spec.d; ++i) idx[i] = i;
                // partial Fisher-Yates
                for (int i = 0; i < t.support; ++i) {
                    std::uniform_int_distribution<int> pick(i, spec.d - 1);
                    std::swap(idx[i], idx[pick(rng)]);
                }
                Vec v = Vec::Zero(spec.d);
                std::normal_distribution<double> dist(0.0, 1.0);
                for (int i = 0; i < t.support; ++i) v(idx[i]) = dist(rng);
                return v * (t.norm / v.norm());
            }
        },
        spec.theta_star);
}

/// Draws inputs x ~ N(0, Sigma) with Sigma diagonal, one row per sample.
inline Mat sample_inputs(const Vec& cov_diag, int rows, Rng& rng) {
    const Vec scale = cov_diag.cwiseSqrt();
    std::normal_distribution<double> dist(0.0, 1.0);
    Mat X(rows, cov_diag.size());
    for (int i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cov_diag.size(); ++j) X(i, j) = scale(j) * dist(rng);
    return X;
}

inline RegressionDataset gen_linear_dataset(const LinearProblemSpec& spec) {
    validate(spec);
    RegressionDataset ds;
    ds.theta_star = realize_theta_star(spec);
    Rng design_rng = make_rng(spec.seed, "design");
    ds.X = sample_inputs(covariance_diagonal(spec), spec.n, design_rng);
    ds.y_clean = ds.X * ds.theta_star;
    Rng noise_rng = make_rng(spec.seed, "noise");
    ds.eps.resize(spec.n);
    for (int i = 0; i < spec.n; ++i) ds.eps(i) = detail::draw_noise(spec.noise, noise_rng);
    ds.y_noisy = ds.y_clean + ds.eps;
    ds.noise_bound = noise_bound(spec.noise);
    ds.noise_second_moment = noise_second_moment(spec.noise);
    return ds;
}

struct SignalNoiseSplit {
    RegressionDataset bias;
    RegressionDataset variance;
};

/// Bias dataset keeps the clean responses; variance dataset keeps only the
/// noise. Both share X with the input.
inline SignalNoiseSplit split_signal_noise(const RegressionDataset& ds) {
    SignalNoiseSplit out{ds, ds};
    out.bias.y_noisy = ds.y_clean;
    out.bias.eps = Vec::Zero(ds.eps.size());
    out.bias.noise_bound = 0.0;
    out.bias.noise_second_moment = 0.0;

    out.variance.y_noisy = ds.eps;
    out.variance.y_clean = Vec::Zero(ds.eps.size());
    out.variance.theta_star = Vec::Zero(ds.theta_star.size());
    return out;
}

// ---------------------------------------------------------------------------
// Diagonal matrix recovery
// ---------------------------------------------------------------------------

enum class MeasurementLaw { Gaussian, BoundedUniform };

struct DiagonalRecoverySpec {
    int d = 1;
    int r = 1;
    Vec sigma_star;  ///< length r, positive, nonincreasing
    int n = 1;
    double noise_std = 0.0;
    double noise_bound = 0.0;  ///< clip to [-V, V] when > 0
    double alpha = 0.01;
    std::uint64_t seed = 0;
    MeasurementLaw law = MeasurementLaw::Gaussian;
};

inline void validate(const DiagonalRecoverySpec& spec) {
    if (spec.d < 1 || spec.n < 1) throw SpecError("diagonal recovery needs d >= 1 and n >= 1");
    if (spec.r < 0 || spec.r > spec.d) throw SpecError("rank must satisfy 0 <= r <= d");
    if (spec.sigma_star.size() != spec.r) throw SpecError("sigma_star must have r entries");
    for (int i = 0; i < spec.r; ++i) {
        if (spec.sigma_star(i) <= 0.0) throw SpecError("sigma_star entries must be positive");
        if (i > 0 && spec.sigma_star(i) > spec.sigma_star(i - 1))
            throw SpecError("sigma_star must be nonincreasing");
    }
    if (spec.noise_std < 0.0 || spec.noise_bound < 0.0) throw SpecError("noise parameters must be >= 0");
    if (!(spec.alpha > 0.0)) throw SpecError("alpha must be > 0");
}

/// Column j holds the n measurements of coordinate j.
struct DiagonalMeasurements {
    Mat a;
    Mat eps;
    Mat y;
    Vec sigma_star_full;  ///< length d, zero beyond r
    std::optional<double> clip_bound;

    int d() const { return static_cast<int>(a.cols()); }
    int n() const { return static_cast<int>(a.rows()); }
};

inline DiagonalMeasurements gen_diagonal_measurements(const DiagonalRecoverySpec& spec) {
    validate(spec);
    DiagonalMeasurements m;
    m.sigma_star_full = Vec::Zero(spec.d);
    m.sigma_star_full.head(spec.r) = spec.sigma_star;
    m.a.resize(spec.n, spec.d);
    m.eps.resize(spec.n, spec.d);

    Rng a_rng = make_rng(spec.seed, "measure");
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double half_width = std::sqrt(3.0);
    std::uniform_real_distribution<double> unif(-half_width, half_width);
    for (int j = 0; j < spec.d; ++j)
        for (int i = 0; i < spec.n; ++i)
            m.a(i, j) = spec.law == MeasurementLaw::Gaussian ? gauss(a_rng) : unif(a_rng);

    const NoiseSpec noise = GaussianNoise{spec.noise_std, spec.noise_bound};
    Rng e_rng = make_rng(spec.seed, "noise");
    for (int j = 0; j < spec.d; ++j)
        for (int i = 0; i < spec.n; ++i) m.eps(i, j) = detail::draw_noise(noise, e_rng);
    if (spec.noise_bound > 0.0) m.clip_bound = spec.noise_bound;

    m.y = m.a * m.sigma_star_full.asDiagonal();
    m.y += m.eps;
    return m;
}

/// Empirical per-coordinate moments driving the flow of coordinate j.
struct CoordinateStats {
    double xi = 1.0;      ///< (1/n) sum a_i^2
    double s_b = 0.0;     ///< xi * sigma*_j
    double s_v = 0.0;     ///< (1/n) sum a_i eps_i
    double s_emp = 0.0;   ///< s_b + s_v
    double sigma_star = 0.0;
};

inline CoordinateStats coordinate_stats(const DiagonalMeasurements& m, int j) {
    if (j < 0 || j >= m.d()) throw SpecError("coordinate index out of range");
    const double n = m.n();
    CoordinateStats s;
    s.sigma_star = m.sigma_star_full(j);
    s.xi = m.a.col(j).squaredNorm() / n;
    s.s_b = s.xi * s.sigma_star;
    s.s_v = m.a.col(j).dot(m.eps.col(j)) / n;
    s.s_emp = s.s_b + s.s_v;
    return s;
}

// ---------------------------------------------------------------------------
// General (symmetric, low-rank) matrix recovery
// ---------------------------------------------------------------------------

struct GeneralRecoverySpec {
    int d = 1;
    int r = 1;
    Vec sigma_star;
    std::uint64_t factor_seed = 0;
    int n = 1;
    double noise_std = 1.0;
    double alpha = 0.01;
    double stepsize = 0.1;
    std::uint64_t seed = 0;
};

inline void validate(const GeneralRecoverySpec& spec) {
    if (spec.d < 1 || spec.n < 1) throw SpecError("general recovery needs d >= 1 and n >= 1");
    if (spec.r < 0 || spec.r > spec.d) throw SpecError("rank must satisfy 0 <= r <= d");
    if (spec.sigma_star.size() != spec.r) throw SpecError("sigma_star must have r entries");
    if ((spec.sigma_star.array() < 0.0).any()) throw SpecError("sigma_star entries must be >= 0");
    if (spec.noise_std < 0.0) throw SpecError("noise_std must be >= 0");
    if (spec.alpha < 0.0) throw SpecError("alpha must be >= 0");
    if (!(spec.stepsize > 0.0)) throw SpecError("stepsize must be > 0");
}

struct GeneralMeasurements {
    /// Row i is vec(A_i) in column-major order, so <A_i, X> = (A * vec(X))(i).
    Mat A;
    Vec y_clean;
    Vec eps;
    Vec y;
    Mat X_star;

    int n() const { return static_cast<int>(A.rows()); }
    int d() const { return static_cast<int>(X_star.rows()); }
    Mat measurement(int i) const {
        return Eigen::Map<const Mat>(Vec(A.row(i).transpose()).data(), d(), d());
    }
};

/// Haar-like orthonormal matrix from the QR factorization of a Gaussian matrix.
inline Mat random_orthonormal(int d, std::uint64_t seed) {
    Rng rng = make_rng(seed, "orthonormal");
    std::normal_distribution<double> dist(0.0, 1.0);
    Mat G(d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) G(i, j) = dist(rng);
    Eigen::HouseholderQR<Mat> qr(G);
    Mat Q = qr.householderQ();
    const Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j)
        if (R(j, j) < 0.0) Q.col(j) *= -1.0;
    return Q;
}

inline Mat general_ground_truth(const GeneralRecoverySpec& spec) {
    validate(spec);
    const Mat V = random_orthonormal(spec.d, spec.factor_seed);
    Vec sigma = Vec::Zero(spec.d);
    sigma.head(spec.r) = spec.sigma_star;
    return V * sigma.asDiagonal() * V.transpose();
}

inline GeneralMeasurements gen_general_measurements(const GeneralRecoverySpec& spec) {
    validate(spec);
    GeneralMeasurements m;
    m.X_star = general_ground_truth(spec);
    const int dd = spec.d * spec.d;
    m.A.resize(spec.n, dd);
    Rng a_rng = make_rng(spec.seed, "measure");
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < spec.n; ++i)
        for (int k = 0; k < dd; ++k) m.A(i, k) = gauss(a_rng);
    m.y_clean = m.A * Eigen::Map<const Vec>(m.X_star.data(), dd);
    Rng e_rng = make_rng(spec.seed, "noise");
    m.eps = Vec::Zero(spec.n);
    if (spec.noise_std > 0.0) {
        std::normal_distribution<double> noise(0.0, spec.noise_std);
        for (int i = 0; i < spec.n; ++i) m.eps(i) = noise(e_rng);
    }
    m.y = m.y_clean + m.eps;
    return m;
}

}  // namespace erdlab
