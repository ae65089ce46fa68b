#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "erdlab/linreg.hpp"
#include "erdlab/problem_gen.hpp"

using namespace erdlab;

namespace {

LinearProblemSpec spec_of(int d, int n, double sigma, std::uint64_t seed, double theta_norm = 1.0) {
    LinearProblemSpec spec;
    spec.d = d;
    spec.n = n;
    spec.theta_star = DenseRandomTheta{theta_norm};
    spec.noise = GaussianNoise{sigma, 0.0};
    spec.seed = seed;
    return spec;
}

// Independent reference: the pseudoinverse via a complete orthogonal
// decomposition and the iteration matrix raised by repeated multiplication.
Vec pinv_solution(const Mat& X, const Vec& y) {
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(X);
    return cod.pseudoInverse() * y;
}

Vec matrix_power_oracle(const Mat& X, const Vec& y, double lambda, const Vec& theta0, int t) {
    const double n = static_cast<double>(X.rows());
    const Mat M = Mat::Identity(X.cols(), X.cols()) - (lambda / n) * X.transpose() * X;
    const Vec dagger = pinv_solution(X, y);
    Vec v = theta0 - dagger;
    for (int k = 0; k < t; ++k) v = M * v;
    return v + dagger;
}

}  // namespace

TEST(GdRun, ZeroStepsReturnsInit) {
    const RegressionDataset ds = gen_linear_dataset(spec_of(6, 4, 1.0, 1));
    GdConfig cfg;
    cfg.stepsize = 0.1;
    cfg.steps = 0;
    cfg.theta0 = Vec::LinSpaced(6, -1.0, 1.0);
    const ParamTrace tr = gd_run(ds, cfg);
    ASSERT_EQ(tr.times.size(), 1u);
    EXPECT_EQ(tr.times[0], 0);
    EXPECT_TRUE(tr.params[0] == *cfg.theta0);
}

TEST(GdRun, ZeroResponsesStayAtZero) {
    const RegressionDataset ds = gen_linear_dataset(spec_of(8, 5, 1.0, 2));
    GdConfig cfg;
    cfg.stepsize = 0.1;
    cfg.steps = 20;
    const ParamTrace tr = gd_run(ds.X, Vec::Zero(5), cfg);
    for (const Vec& p : tr.params) EXPECT_TRUE((p.array() == 0.0).all());
    EXPECT_EQ(tr.final_sup_norm, 0.0);
}

TEST(GdRun, MatchesClosedFormOracle) {
    const RegressionDataset ds = gen_linear_dataset(spec_of(8, 5, 1.0, 3));
    GdConfig cfg;
    cfg.stepsize = 0.1;
    cfg.steps = 10;
    const ParamTrace tr = gd_run(ds, cfg);
    const Vec oracle = matrix_power_oracle(ds.X, ds.y_noisy, 0.1, Vec::Zero(8), 10);
    EXPECT_LE((tr.final_params() - oracle).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((closed_form_params(ds, cfg, 10) - oracle).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GdRun, DimensionMismatchThrows) {
    GdConfig cfg;
    cfg.steps = 1;
    EXPECT_THROW(gd_run(Mat::Ones(3, 2), Vec::Ones(4), cfg), SpecError);
    cfg.theta0 = Vec::Ones(3);
    EXPECT_THROW(gd_run(Mat::Ones(3, 2), Vec::Ones(3), cfg), SpecError);
}

TEST(GdRun, RecordStrideAndSupNorm) {
    const RegressionDataset ds = gen_linear_dataset(spec_of(30, 20, 1.0, 4));
    GdConfig cfg;
    cfg.stepsize = 0.05;
    cfg.steps = 2000;
    const ParamTrace coarse = gd_run(ds, cfg);
    ASSERT_EQ(coarse.times.size(), 201u);
    EXPECT_EQ(coarse.times[1], 10);
    EXPECT_EQ(coarse.times.back(), 2000);

    cfg.steps = 25;
    cfg.record_every = 10;
    const ParamTrace odd = gd_run(ds, cfg);
    EXPECT_EQ(odd.times, (std::vector<int>{0, 10, 20, 25}));

    cfg.record_every = 1;
    const ParamTrace dense = gd_run(ds, cfg);
    double sup = 0.0;
    for (const Vec& p : dense.params) sup = std::max(sup, p.norm());
    EXPECT_EQ(odd.final_sup_norm, sup);
}

TEST(GdRun, WarnsWhenStepsizeIsNotAdmissible) {
    const RegressionDataset ds = gen_linear_dataset(spec_of(10, 40, 1.0, 5));
    GdConfig cfg;
    cfg.steps = 1;
    cfg.stepsize = 0.01;
    EXPECT_TRUE(gd_run(ds, cfg).warnings.empty());
    cfg.stepsize = 5.0;
    EXPECT_EQ(gd_run(ds, cfg).warnings.size(), 1u);
    const Mat gram = ds.X.transpose() * ds.X / 40.0;
    Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
    EXPECT_NEAR(gram_lambda_max(ds.X), eig.eigenvalues().maxCoeff(), 1e-10);
}

TEST(ClosedForm, TimeZeroIsInit) {
    const RegressionDataset ds = gen_linear_dataset(spec_of(12, 7, 1.0, 6));
    GdConfig cfg;
    cfg.stepsize = 0.05;
    cfg.theta0 = Vec::LinSpaced(12, 0.5, -0.5);
    EXPECT_LE((closed_form_params(ds, cfg, 0) - *cfg.theta0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ClosedForm, LongHorizonReachesMinNorm) {
    const RegressionDataset ds = gen_linear_dataset(spec_of(40, 15, 1.0, 7));
    GdConfig cfg;
    cfg.stepsize = 0.5 / gram_lambda_max(ds.X);
    const Vec limit = pinv_solution(ds.X, ds.y_noisy);
    EXPECT_LE((closed_form_params(ds, cfg, 10000) - limit).norm(), 1e-6);
}

TEST(ClosedForm, MatchesIterationStepwise) {
    const RegressionDataset ds = gen_linear_dataset(spec_of(50, 20, 1.0, 8));
    GdConfig cfg;
    cfg.stepsize = 0.1;
    cfg.steps = 100;
    cfg.record_every = 1;
    const ParamTrace tr = gd_run(ds, cfg);
    const GdClosedForm cf(ds.X, ds.y_noisy, cfg.stepsize, Vec::Zero(50));
    for (std::size_t k = 1; k < tr.times.size(); ++k) {
        EXPECT_LE((tr.params[k] - cf.at(tr.times[k])).cwiseAbs().maxCoeff(), 1e-9) << "t = " << tr.times[k];
    }
}

TEST(ClosedForm, DistanceToLimitShrinksMonotonically) {
    const RegressionDataset ds = gen_linear_dataset(spec_of(60, 25, 1.0, 9));
    const double lambda = 0.9 / gram_lambda_max(ds.X);
    const GdClosedForm cf(ds.X, ds.y_noisy, lambda, Vec::Zero(60));
    double prev = std::numeric_limits<double>::infinity();
    for (int t = 0; t <= 2000; t += 50) {
        const double dist = (cf.at(t) - cf.limit()).norm();
        EXPECT_LE(dist, prev);
        prev = dist;
    }
}

TEST(MinNorm, ZeroResponses) {
    const RegressionDataset ds = gen_linear_dataset(spec_of(9, 4, 1.0, 10));
    EXPECT_TRUE((min_norm_solution(ds.X, Vec::Zero(4)).array() == 0.0).all());
}

TEST(MinNorm, OrthonormalRowsCopyResponses) {
    Mat X = Mat::Zero(3, 7);
    X.leftCols(3) = Mat::Identity(3, 3);
    const Vec y = (Vec(3) << 1.5, -2.0, 0.25).finished();
    const Vec sol = min_norm_solution(X, y);
    EXPECT_NEAR((sol.head(3) - y).norm(), 0.0, 1e-15);
    EXPECT_EQ(sol.tail(4).norm(), 0.0);
}

TEST(MinNorm, FullRowRankResidual) {
    const RegressionDataset ds = gen_linear_dataset(spec_of(100, 50, 2.0, 11));
    const Vec sol = min_norm_solution(ds.X, ds.y_noisy);
    EXPECT_LE((ds.X * sol - ds.y_noisy).norm() / ds.y_noisy.norm(), 1e-10);
    EXPECT_LE((sol - pinv_solution(ds.X, ds.y_noisy)).norm(), 1e-10 * sol.norm());
}

TEST(ExcessRisk, ZeroAtTruth) {
    const LinearProblemSpec spec = spec_of(10, 5, 1.0, 12);
    EXPECT_EQ(linreg_excess_risk(realize_theta_star(spec), spec), 0.0);
}

TEST(ExcessRisk, IdentityCovarianceAtOrigin) {
    const LinearProblemSpec spec = spec_of(10, 5, 1.0, 13, 3.0);
    EXPECT_NEAR(linreg_excess_risk(Vec::Zero(10), spec), 9.0, 1e-12);
}

TEST(ExcessRisk, AgreesWithMonteCarloPopulationLoss) {
    LinearProblemSpec spec = spec_of(6, 5, 0.7, 14);
    spec.covariance = DiagonalCovariance{(Vec(6) << 2.0, 1.0, 0.5, 0.5, 0.25, 0.1).finished()};
    const Vec theta_star = realize_theta_star(spec);
    const Vec theta = Vec::LinSpaced(6, -0.3, 0.4);
    const double analytic = linreg_excess_risk(theta, spec);

    // Fresh population sample: E[(y - <x, theta>)^2] - E[eps^2].
    const int m = 100000;
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z(0.0, 1.0);
    const Vec scale = covariance_diagonal(spec).cwiseSqrt();
    Eigen::ArrayXd loss(m);
    for (int i = 0; i < m; ++i) {
        Vec x(6);
        for (int j = 0; j < 6; ++j) x(j) = scale(j) * z(rng);
        const double y = x.dot(theta_star) + 0.7 * z(rng);
        loss(i) = (y - x.dot(theta)) * (y - x.dot(theta)) - 0.49;
    }
    const double mean = loss.mean();
    const double se = std::sqrt((loss - mean).square().sum() / (m - 1.0) / m);
    EXPECT_LE(std::abs(mean - analytic), 3.0 * se) << "analytic " << analytic << " mc " << mean;
}

TEST(VarianceGap, ValueAtInitialization) {
    const LinearProblemSpec spec = spec_of(20, 10, 1.5, 15);
    const RegressionDataset ds = gen_linear_dataset(spec);
    GdConfig cfg;
    cfg.stepsize = 0.1;
    cfg.steps = 5;
    const ParamTrace tr = gd_run(split_signal_noise(ds).variance, cfg);
    const auto gap = variance_generalization_gap(tr, ds, spec);
    EXPECT_NEAR(gap[0], 2.25 - ds.eps.squaredNorm() / 10.0, 1e-14);
}

TEST(VarianceGap, MonotoneUnderIdentityCovariance) {
    const LinearProblemSpec spec = spec_of(100, 50, 1.0, 16);
    const RegressionDataset ds = gen_linear_dataset(spec);
    GdConfig cfg;
    cfg.stepsize = 0.1;
    cfg.steps = 500;
    cfg.record_every = 1;
    const ParamTrace tr = gd_run(split_signal_noise(ds).variance, cfg);
    const auto gap = variance_generalization_gap(tr, ds, spec);
    for (std::size_t k = 1; k < gap.size(); ++k) EXPECT_GE(gap[k], gap[k - 1] - 1e-9) << "step " << k;
}

TEST(VarianceGap, ZeroNoiseGivesZeroGap) {
    const LinearProblemSpec spec = spec_of(20, 10, 0.0, 17);
    const RegressionDataset ds = gen_linear_dataset(spec);
    GdConfig cfg;
    cfg.stepsize = 0.1;
    cfg.steps = 30;
    const ParamTrace tr = gd_run(split_signal_noise(ds).variance, cfg);
    for (double g : variance_generalization_gap(tr, ds, spec)) EXPECT_EQ(g, 0.0);
}

TEST(SupNorms, ZeroNoiseGivesZeroB) {
    const RegressionDataset ds = gen_linear_dataset(spec_of(20, 10, 0.0, 18));
    GdConfig cfg;
    cfg.stepsize = 0.1;
    cfg.steps = 50;
    const SupNorms s = sup_param_norms(gd_run(ds, cfg), gd_run(split_signal_noise(ds).variance, cfg));
    EXPECT_EQ(s.B, 0.0);
    EXPECT_GT(s.B_prime, 0.0);
}

TEST(SupNorms, VarianceNormIgnoresThetaScale) {
    GdConfig cfg;
    cfg.stepsize = 0.1;
    cfg.steps = 64;
    const RegressionDataset a = gen_linear_dataset(spec_of(20, 30, 1.0, 19, 1.0));
    const RegressionDataset b = gen_linear_dataset(spec_of(20, 30, 1.0, 19, 10.0));
    const SupNorms sa = sup_param_norms(gd_run(a, cfg), gd_run(split_signal_noise(a).variance, cfg));
    const SupNorms sb = sup_param_norms(gd_run(b, cfg), gd_run(split_signal_noise(b).variance, cfg));
    EXPECT_EQ(sa.B, sb.B);
    EXPECT_GT(sb.B_prime, sa.B_prime);
}

TEST(SupNorms, HighSignalToNoiseOrdersTheNorms) {
    LinearProblemSpec spec = spec_of(8, 256, 0.0, 20, 10.0);
    spec.covariance = DiagonalCovariance{Vec::Constant(8, 0.125)};
    spec.noise = UniformNoise{1.0};
    const RegressionDataset ds = gen_linear_dataset(spec);
    GdConfig cfg;
    cfg.stepsize = 1.0;
    cfg.steps = static_cast<int>(std::ceil(std::pow(256.0, 0.75)));
    const SupNorms s = sup_param_norms(gd_run(ds, cfg), gd_run(split_signal_noise(ds).variance, cfg));
    EXPECT_LT(s.B, s.B_prime);
}

TEST(SupNorms, RejectsEmptyOrMismatchedTraces) {
    ParamTrace empty;
    ParamTrace one;
    one.times = {0};
    one.params = {Vec::Zero(2)};
    EXPECT_THROW(sup_param_norms(empty, one), ContractError);
    ParamTrace other = one;
    other.times = {1};
    EXPECT_THROW(sup_param_norms(one, other), ContractError);
}

TEST(Additivity, StandardEqualsVariancePlusBias) {
    const RegressionDataset ds = gen_linear_dataset(spec_of(100, 50, 2.0, 21));
    const SignalNoiseSplit split = split_signal_noise(ds);
    GdConfig cfg;
    cfg.stepsize = 0.1;
    cfg.steps = 500;
    const ParamTrace s = gd_run(ds, cfg), b = gd_run(split.bias, cfg), v = gd_run(split.variance, cfg);
    const Vec cov = Vec::Ones(100);
    const Vec zero = Vec::Zero(100);
    for (std::size_t k = 0; k < s.params.size(); ++k) {
        EXPECT_LE((s.params[k] - b.params[k] - v.params[k]).cwiseAbs().maxCoeff(), 1e-10);
        const double er = quadratic_excess_risk(s.params[k], ds.theta_star, cov);
        const double ver = quadratic_excess_risk(v.params[k], zero, cov);
        const double ber = quadratic_excess_risk(b.params[k], ds.theta_star, cov);
        EXPECT_LE(er, 2.0 * ver + 2.0 * ber + 1e-9);
    }
}
