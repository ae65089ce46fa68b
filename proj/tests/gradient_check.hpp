#pragma once

// Backpropagation against central finite differences, skipping coordinates
// whose perturbation crosses a ReLU kink.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "erdlab/nn.hpp"
#include "erdlab/rng.hpp"

namespace erdlab::testing {

struct GradientCheckResult {
    double max_relative_error = 0.0;
    int coordinates_checked = 0;
};

// Signs of every hidden pre-activation; a central difference is only exact
// when the perturbation leaves this pattern unchanged.
inline std::vector<bool> activation_pattern(const MlpParams& p, const Mat& Xt) {
    std::vector<bool> out;
    Mat h = Xt;
    for (int l = 0; l + 1 < p.num_layers(); ++l) {
        const Mat z = (p.W(l) * h).colwise() + Vec(p.b(l));
        for (Eigen::Index k = 0; k < z.size(); ++k) out.push_back(z.data()[k] > 0.0);
        h = z.cwiseMax(0.0);
    }
    return out;
}

inline GradientCheckResult gradient_check(int depth, int width, std::uint64_t seed, int coordinates = 10,
                                          double h = 1e-4) {
    const int d = 10;
    const int batch = 16;
    MlpArch arch = make_arch(d, depth, width);
    arch.fan_in_init = true;
    Rng rng(derive_seed(seed, "gradcheck", static_cast<std::uint64_t>(depth * 1000 + width)));
    MlpParams p = init_params(arch, rng);
    std::normal_distribution<double> z(0.0, 1.0);
    Mat Xt(d, batch);
    for (Eigen::Index j = 0; j < Xt.cols(); ++j)
        for (Eigen::Index i = 0; i < Xt.rows(); ++i) Xt(i, j) = z(rng);
    Vec y(batch);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = z(rng);
    const Vec grad = mlp_forward_backward(p, Xt, y).grad;

    std::vector<Eigen::Index> candidates;
    for (Eigen::Index i = 0; i < grad.size(); ++i)
        if (std::abs(grad(i)) > 1e-6) candidates.push_back(i);
    GradientCheckResult res;
    if (candidates.empty()) return res;
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const std::vector<bool> pattern = activation_pattern(p, Xt);
    for (int attempt = 0; res.coordinates_checked < coordinates && attempt < 20 * coordinates; ++attempt) {
        const Eigen::Index i = candidates[pick(rng)];
        const double saved = p.flat()(i);
        p.flat()(i) = saved + h;
        const double up = mlp_forward_backward(p, Xt, y).loss;
        const bool smooth_up = activation_pattern(p, Xt) == pattern;
        p.flat()(i) = saved - h;
        const double down = mlp_forward_backward(p, Xt, y).loss;
        const bool smooth_down = activation_pattern(p, Xt) == pattern;
        p.flat()(i) = saved;
        if (!smooth_up || !smooth_down) continue;
        const double fd = (up - down) / (2 * h);
        const double rel = std::abs(fd - grad(i)) / std::max({std::abs(fd), std::abs(grad(i)), 1e-12});
        res.max_relative_error = std::max(res.max_relative_error, rel);
        ++res.coordinates_checked;
    }
    return res;
}

}  // namespace erdlab::testing
