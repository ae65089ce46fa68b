#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "erdlab/bounds.hpp"
#include "erdlab/linreg.hpp"
#include "erdlab/problem_gen.hpp"

using namespace erdlab;

namespace {

BoundInputs linreg_inputs(double n, double T) {
    BoundInputs b;
    b.n = n;
    b.T = T;
    b.lambda = 0.5;
    b.delta = 0.05;
    b.V = 1.0;
    b.B = 0.8;
    b.B_prime = 3.0;
    b.sigma_w = 1.0;
    b.theta_star_energy = 1.0;
    b.theta_star_norm_sq = 1.0;
    return b;
}

// Recommended diagonal-recovery settings: alpha = (d^2 n)^(-1/4), t = log(d n sigma_r) / sigma_r.
double recommended_thm3(double n) {
    BoundInputs b;
    b.n = n;
    b.d = 20;
    b.r = 3;
    b.sigma_star = (Vec(3) << 5.0, 3.0, 1.0).finished();
    b.sigma_r = 1.0;
    b.V = 1.0;
    b.nu = 1.0;
    b.delta = 0.05;
    b.alpha = std::pow(b.d * b.d * n, -0.25);
    return thm3_bound(b, std::log(b.d * n * b.sigma_r) / b.sigma_r);
}

}  // namespace

TEST(Prop1, ZeroStabilityLeavesTheConcentrationTerm) {
    EXPECT_DOUBLE_EQ(prop1_bound(0.0, 100, 0.05), std::sqrt(std::log(20.0) / 100));
    EXPECT_DOUBLE_EQ(prop1_bound(0.0, 100, 0.05, 3.0), 3.0 * std::sqrt(std::log(20.0) / 100));
}

TEST(Prop1, LinregStabilityConstant) {
    const BoundInputs b = linreg_inputs(400, 20);
    const double eps = linreg_stability_constant(b);
    EXPECT_DOUBLE_EQ(eps, 4.0 * 20 * 0.5 * 1.8 * 1.8 / 400);
    const double lead = prop1_bound(eps, b.n, b.delta) - prop1_bound(0.0, b.n, b.delta);
    EXPECT_NEAR(lead, 4.0 * b.T * b.lambda * 1.8 * 1.8 * std::log(b.n) * std::log(b.n / b.delta) / b.n, 1e-12);
}

TEST(Prop1, DoublingNWithFixedStabilityTimesNShrinks) {
    const double en = 3.0;
    for (double n = 50; n < 1e5; n *= 2) EXPECT_LT(prop1_bound(en / (2 * n), 2 * n, 0.1), prop1_bound(en / n, n, 0.1));
}

TEST(Prop1, RejectsBadInputs) {
    EXPECT_THROW(prop1_bound(-1.0, 100, 0.05), SpecError);
    EXPECT_THROW(prop1_bound(0.0, 100, 1.0), SpecError);
    EXPECT_THROW(prop1_bound(0.0, 0.5, 0.05), SpecError);
}

TEST(Thm1, SqrtScheduleBeatsLinearSchedule) {
    for (double n : {1e3, 1e4, 1e5}) {
        EXPECT_LT(thm1_bound(linreg_inputs(n, std::sqrt(n))), thm1_bound(linreg_inputs(n, n)));
    }
}

TEST(Thm1, NoiselessLimit) {
    BoundInputs b = linreg_inputs(1000, 1e12);
    b.V = 0.0;
    b.B = 0.0;
    EXPECT_NEAR(thm1_bound(b), std::sqrt(std::log(4.0 / b.delta) / b.n), 1e-11);
}

TEST(Thm1, StabilityTermIsLinearInT) {
    BoundInputs b = linreg_inputs(500, 40);
    b.theta_star_norm_sq = 0.0;
    const double fixed = std::max({1.0, 1.0, 1.8 * 1.8}) * std::sqrt(std::log(4.0 / b.delta) / b.n);
    const double t1 = thm1_bound(b) - fixed;
    b.T = 80;
    const double t2 = thm1_bound(b) - fixed;
    EXPECT_NEAR(t2, 2.0 * t1, 1e-12);
}

TEST(Thm1, RejectsNonPositiveSchedule) {
    BoundInputs b = linreg_inputs(100, 0);
    EXPECT_THROW(thm1_bound(b), SpecError);
}

TEST(Baseline, SharedTermsMatchWithoutLogFactors) {
    BoundInputs b = linreg_inputs(800, 30);
    b.B_prime = b.B;
    const double vb2 = (b.V + b.B) * (b.V + b.B);
    const double thm1_variance_part = b.T * b.lambda * vb2 * std::log(b.n) * std::log(b.n / b.delta) / b.n;
    const double baseline_variance_part =
        stability_baseline_bound(b) - std::max(1.0, vb2) * std::sqrt(std::log(2.0 / b.delta) / (2.0 * b.n));
    EXPECT_NEAR(baseline_variance_part * std::log(b.n) * std::log(b.n / b.delta), thm1_variance_part, 1e-12);
}

TEST(Baseline, ScalingThetaStarGrowsOnlyTheBaseline) {
    LinearProblemSpec spec;
    spec.d = 512;
    spec.n = 256;
    spec.noise = UniformNoise{1.0};
    spec.seed = 9;
    spec.theta_star = DenseRandomTheta{1.0};
    GdConfig cfg;
    cfg.stepsize = 1.0;
    cfg.steps = static_cast<int>(std::ceil(std::pow(256.0, 0.75)));
    cfg.check_admissible = false;

    auto inputs_for = [&](double norm) {
        spec.theta_star = DenseRandomTheta{norm};
        const RegressionDataset ds = gen_linear_dataset(spec);
        const SignalNoiseSplit split = split_signal_noise(ds);
        const SupNorms s = sup_param_norms(gd_run(ds, cfg), gd_run(split.variance, cfg));
        BoundInputs b;
        b.n = spec.n;
        b.T = cfg.steps;
        b.lambda = cfg.stepsize;
        b.V = 1.0;
        b.B = s.B;
        b.B_prime = s.B_prime;
        b.theta_star_energy = norm * norm;
        b.theta_star_norm_sq = norm * norm;
        return b;
    };
    const BoundInputs small = inputs_for(1.0);
    const BoundInputs large = inputs_for(10.0);
    EXPECT_EQ(small.B, large.B);
    EXPECT_GT(large.B_prime, small.B_prime);
    EXPECT_GT(stability_baseline_bound(large), stability_baseline_bound(small));
    EXPECT_LT(large.B, large.B_prime);
}

TEST(Thm3, SmallAlphaLimit) {
    BoundInputs b;
    b.n = 400;
    b.d = 10;
    b.r = 2;
    b.sigma_star = (Vec(2) << 2.0, 1.0).finished();
    b.V = 0.0;
    b.nu = 0.0;
    b.alpha = 1e-30;
    const double t = 3.0;
    const double expected = 5.0 * std::sqrt(std::log(10 / b.delta) / b.n) + 5.0;
    EXPECT_NEAR(thm3_bound(b, t), expected, 1e-9);
}

TEST(Thm3, RecommendedSettingsDecreaseInN) {
    double prev = recommended_thm3(200);
    for (double n = 400; n <= 6400; n *= 2) {
        const double cur = recommended_thm3(n);
        EXPECT_LT(cur, prev) << "n=" << n;
        const double ratio = prev / cur;
        EXPECT_GE(ratio, 1.2) << "n=" << n;
        EXPECT_LE(ratio, 2.2) << "n=" << n;
        prev = cur;
    }
}

TEST(Thm3, RejectsBadInputs) {
    BoundInputs b;
    b.n = 100;
    b.d = 5;
    b.r = 1;
    b.sigma_star = Vec::Ones(1);
    EXPECT_THROW(thm3_bound(b, 0.0), SpecError);
    b.alpha = 0.0;
    EXPECT_THROW(thm3_bound(b, 1.0), SpecError);
    b.alpha = 0.1;
    b.r = 2;
    EXPECT_THROW(thm3_bound(b, 1.0), SpecError);
}

TEST(Monotonicity, EveryBoundIsNonincreasingInN) {
    double prev1 = INFINITY, prev2 = INFINITY, prev3 = INFINITY;
    for (double n = 50; n <= 1e6; n *= 1.5) {
        const BoundInputs b = linreg_inputs(n, 25);
        BoundInputs c;
        c.n = n;
        c.d = 20;
        c.r = 3;
        c.sigma_star = (Vec(3) << 5.0, 3.0, 1.0).finished();
        c.V = 1.0;
        c.nu = 1.0;
        const double v1 = thm1_bound(b), v2 = stability_baseline_bound(b), v3 = thm3_bound(c, 4.0);
        EXPECT_LE(v1, prev1);
        EXPECT_LE(v2, prev2);
        EXPECT_LE(v3, prev3);
        prev1 = v1;
        prev2 = v2;
        prev3 = v3;
    }
}

TEST(RateProbe, RecoversExactPowerLaw) {
    std::map<double, double> risks;
    for (double n = 100; n <= 3200; n *= 2) risks[n] = 7.0 / std::sqrt(n);
    EXPECT_NEAR(rate_probe(risks), -0.5, 1e-12);
}

TEST(RateProbe, ConstantSequenceIsFlat) {
    std::map<double, double> risks;
    for (double n = 100; n <= 800; n *= 2) risks[n] = 0.3;
    EXPECT_NEAR(rate_probe(risks), 0.0, 1e-12);
}

TEST(RateProbe, RejectsBadInput) {
    EXPECT_THROW(rate_probe({{1.0, 1.0}, {2.0, 1.0}, {3.0, 1.0}}), SpecError);
    EXPECT_THROW(rate_probe({{1.0, 1.0}, {2.0, 1.0}, {3.0, 1.0}, {4.0, 0.0}}), SpecError);
}
