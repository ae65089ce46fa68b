#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "erdlab/nn.hpp"
#include "erdlab/problem_gen.hpp"
#include "erdlab/rng.hpp"
#include "gradient_check.hpp"

using namespace erdlab;

namespace {

Mat gaussian_matrix(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Mat M(rows, cols);
    for (Eigen::Index j = 0; j < M.cols(); ++j)
        for (Eigen::Index i = 0; i < M.rows(); ++i) M(i, j) = z(rng);
    return M;
}

LinearProblemSpec linear_spec(int d, int n, double sigma, std::uint64_t seed) {
    LinearProblemSpec spec;
    spec.d = d;
    spec.n = n;
    spec.noise = GaussianNoise{sigma, 0.0};
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST(Mlp, ArchitectureValidation) {
    EXPECT_THROW(make_arch(5, 0, 8), SpecError);
    MlpArch bad;
    bad.widths = {4, 3, 2};
    EXPECT_THROW(validate(bad), SpecError);
    const MlpArch arch = make_arch(5, 3, 8);
    EXPECT_EQ(arch.widths, (std::vector<int>{5, 8, 8, 1}));
    EXPECT_EQ(arch.num_params(), 8 * 6 + 8 * 9 + 9);
}

TEST(Mlp, ZeroWeightsGiveMeanSquaredTargets) {
    const MlpParams p(make_arch(6, 3, 16));
    const Mat Xt = gaussian_matrix(6, 40, 1);
    const Vec y = gaussian_matrix(40, 1, 2).col(0);
    const LossAndGrad lg = mlp_forward_backward(p, Xt, y);
    EXPECT_NEAR(lg.loss, y.squaredNorm() / 40.0, 1e-14);
    EXPECT_EQ(mlp_forward(p, Xt).norm(), 0.0);
}

TEST(Mlp, FinalLayerIsLinear) {
    MlpArch arch = make_arch(4, 3, 12);
    arch.fan_in_init = true;
    Rng rng(3);
    MlpParams p = init_params(arch, rng);
    const Mat Xt = gaussian_matrix(4, 25, 4);
    const Vec before = mlp_forward(p, Xt);
    const int last = p.num_layers() - 1;
    p.W(last) *= 2.5;
    p.b(last) *= 2.5;
    EXPECT_LE((mlp_forward(p, Xt) - 2.5 * before).norm(), 1e-12 * before.norm());
}

TEST(Mlp, InputDimensionMismatchThrows) {
    const MlpParams p(make_arch(4, 2, 8));
    EXPECT_THROW(mlp_forward(p, Mat::Zero(5, 3)), SpecError);
    EXPECT_THROW(mlp_forward_backward(p, Mat::Zero(4, 3), Vec::Zero(2)), SpecError);
}

class GradientCheck : public ::testing::TestWithParam<std::tuple<int, int>> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
    const auto [depth, width] = GetParam();
    const erdlab::testing::GradientCheckResult res = erdlab::testing::gradient_check(depth, width, 11);
    EXPECT_EQ(res.coordinates_checked, 10);
    EXPECT_LE(res.max_relative_error, 1e-5);
}

INSTANTIATE_TEST_SUITE_P(DepthsAndWidths, GradientCheck,
                         ::testing::Combine(::testing::Values(2, 3, 4), ::testing::Values(64, 256, 512)));

TEST(Optimizers, SgdWithZeroGradientIsIdle) {
    Vec params = Vec::LinSpaced(7, -1.0, 1.0);
    const Vec before = params;
    const OptimizerConfig cfg = SgdConfig{0.3};
    OptimizerState st = init_optimizer(cfg, params.size());
    optimizer_step(params, st, Vec::Zero(7), cfg);
    EXPECT_TRUE(params == before);
}

TEST(Optimizers, AdamFirstStepIsSignStep) {
    Vec params = Vec::Zero(4);
    const Vec g = (Vec(4) << 3.0, -0.2, 1e-3, -50.0).finished();
    const OptimizerConfig cfg = AdamConfig{0.01, 0.9, 0.999, 1e-8};
    OptimizerState st = init_optimizer(cfg, 4);
    optimizer_step(params, st, g, cfg);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(params(i), -0.01 * (g(i) > 0 ? 1.0 : -1.0), 1e-7);
}

TEST(Optimizers, RpropShrinksStepOnSignFlip) {
    Vec params = Vec::Zero(2);
    const OptimizerConfig cfg = RpropConfig{0.1, 0.5, 1.2, 1e-6, 50.0};
    OptimizerState st = init_optimizer(cfg, 2);
    optimizer_step(params, st, (Vec(2) << 1.0, 1.0).finished(), cfg);
    EXPECT_DOUBLE_EQ(params(0), -0.1);
    optimizer_step(params, st, (Vec(2) << 2.0, -1.0).finished(), cfg);
    EXPECT_DOUBLE_EQ(st.step_sizes(0), 0.12);
    EXPECT_DOUBLE_EQ(st.step_sizes(1), 0.05);
    EXPECT_DOUBLE_EQ(params(0), -0.22);
    EXPECT_DOUBLE_EQ(params(1), -0.1);
}

TEST(Optimizers, RejectInvalidConfigs) {
    EXPECT_THROW(init_optimizer(SgdConfig{0.0}, 3), SpecError);
    EXPECT_THROW(init_optimizer(AdamConfig{0.01, 1.0, 0.999, 1e-8}, 3), SpecError);
    EXPECT_THROW(init_optimizer(RpropConfig{0.1, 1.5, 1.2, 1e-6, 50.0}, 3), SpecError);
}

TEST(FunctionDistance, IdenticalFunctionsAreAtZero) {
    MlpArch arch = make_arch(5, 3, 32);
    arch.fan_in_init = true;
    Rng rng(21);
    const MlpParams f = init_params(arch, rng);
    const McEstimate e = l2p_norm(f, f, Vec::Ones(5), 2000, 22);
    EXPECT_EQ(e.value, 0.0);
    EXPECT_EQ(e.se, 0.0);
}

TEST(FunctionDistance, LinearFunctionNormMatchesTheta) {
    const int d = 8;
    MlpParams f(make_arch(d, 1, 1));
    const Vec theta = Vec::LinSpaced(d, -0.5, 1.0);
    f.W(0) = theta.transpose();
    const McEstimate small = l2p_norm(f, ZeroReference{}, Vec::Ones(d), 20000, 23);
    EXPECT_LE(std::abs(small.value - theta.squaredNorm()), 3.0 * small.se);
    const McEstimate large = l2p_norm(f, ZeroReference{}, Vec::Ones(d), 80000, 24);
    EXPECT_NEAR(large.se / small.se, 0.5, 0.15);
    EXPECT_LE(std::abs(l2p_norm(f, LinearReference{theta}, Vec::Ones(d), 1000, 25).value), 1e-24);
}

TEST(FunctionDistance, RejectsEmptySample) {
    const MlpParams f(make_arch(3, 1, 1));
    EXPECT_THROW(l2p_norm(f, ZeroReference{}, Vec::Ones(3), 0, 1), SpecError);
}

TEST(Triplet, SharedInitialization) {
    const RegressionDataset ds = gen_linear_dataset(linear_spec(6, 40, 0.5, 31));
    MlpArch arch = make_arch(6, 2, 16);
    arch.fan_in_init = true;
    NnTrainOptions tro;
    tro.epochs = 0;
    tro.n_mc = 500;
    const TripletResult res = train_triplet(arch, SgdConfig{0.05}, triplet_data(ds, Vec::Ones(6)), tro, 32);
    EXPECT_TRUE(res.final_std.flat() == res.init);
    EXPECT_TRUE(res.final_bias.flat() == res.init);
    EXPECT_TRUE(res.final_var.flat() == res.init);
    ASSERT_EQ(res.records.size(), 1u);
    EXPECT_EQ(res.records[0].er.value, res.records[0].ber.value);
}

TEST(Triplet, ZeroNoiseMakesStandardAndBiasRunsIdentical) {
    const RegressionDataset ds = gen_linear_dataset(linear_spec(6, 60, 0.0, 33));
    MlpArch arch = make_arch(6, 3, 32);
    arch.fan_in_init = true;
    NnTrainOptions tro;
    tro.epochs = 20;
    tro.batch_size = 16;
    tro.record_every = 5;
    tro.n_mc = 1000;
    const TripletResult res = train_triplet(arch, AdamConfig{}, triplet_data(ds, Vec::Ones(6)), tro, 34);
    for (const auto& r : res.records) EXPECT_EQ(r.er.value, r.ber.value);
    EXPECT_EQ(res.records.back().epoch, 20);
}

TEST(Triplet, LinearModelFromZeroIsAdditive) {
    const RegressionDataset ds = gen_linear_dataset(linear_spec(5, 50, 1.0, 35));
    MlpArch arch;
    arch.widths = {5, 1};
    arch.init_std = 0.0;
    NnTrainOptions tro;
    tro.epochs = 30;
    tro.batch_size = 10;
    tro.n_mc = 200;
    const TripletResult res = train_triplet(arch, SgdConfig{0.05}, triplet_data(ds, Vec::Ones(5)), tro, 36);
    EXPECT_EQ(res.init.norm(), 0.0);
    const Vec gap = res.final_std.flat() - res.final_bias.flat() - res.final_var.flat();
    EXPECT_LE(gap.norm(), 1e-8);
}

TEST(Triplet, Deterministic) {
    const RegressionDataset ds = gen_linear_dataset(linear_spec(4, 30, 0.5, 37));
    MlpArch arch = make_arch(4, 2, 16);
    arch.fan_in_init = true;
    NnTrainOptions tro;
    tro.epochs = 5;
    tro.batch_size = 8;
    tro.n_mc = 300;
    const TripletData data = triplet_data(ds, Vec::Ones(4));
    const TripletResult a = train_triplet(arch, RpropConfig{}, data, tro, 38);
    const TripletResult b = train_triplet(arch, RpropConfig{}, data, tro, 38);
    EXPECT_TRUE(a.final_std.flat() == b.final_std.flat());
    EXPECT_TRUE(a.final_var.flat() == b.final_var.flat());
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].ver.value, b.records[i].ver.value);
}

TEST(Triplet, ExplicitInitAndSnapshots) {
    const RegressionDataset ds = gen_linear_dataset(linear_spec(4, 20, 0.5, 39));
    const MlpArch arch = make_arch(4, 2, 8);
    const Vec init = Vec::Constant(arch.num_params(), 0.01);
    NnTrainOptions tro;
    tro.epochs = 4;
    tro.record_every = 2;
    tro.n_mc = 100;
    const TripletResult res = train_triplet(arch, SgdConfig{0.01}, triplet_data(ds, Vec::Ones(4)), tro, 40, &init, true);
    EXPECT_TRUE(res.init == init);
    ASSERT_EQ(res.snap_std.size(), 3u);
    EXPECT_TRUE(res.snap_std[0] == init);
    const Vec wrong = Vec::Zero(3);
    EXPECT_THROW(train_triplet(arch, SgdConfig{0.01}, triplet_data(ds, Vec::Ones(4)), tro, 40, &wrong), SpecError);
}

TEST(Triplet, DivergenceThrows) {
    const RegressionDataset ds = gen_linear_dataset(linear_spec(4, 20, 1.0, 41));
    MlpArch arch = make_arch(4, 3, 16);
    arch.fan_in_init = true;
    NnTrainOptions tro;
    tro.epochs = 200;
    tro.n_mc = 100;
    EXPECT_THROW(train_triplet(arch, SgdConfig{50.0}, triplet_data(ds, Vec::Ones(4)), tro, 42), NumericalError);
}
