#pragma once

// Fully connected ReLU networks with an identity output, trained on the mean
// squared error by SGD, Adam or Rprop, plus Monte Carlo L2(P) distances.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "erdlab/errors.hpp"
#include "erdlab/problem_gen.hpp"
#include "erdlab/rng.hpp"

namespace erdlab {

/// widths = {input d, hidden..., 1}. Hidden layers use ReLU, the output layer
/// is the identity.
struct MlpArch {
    std::vector<int> widths;
    double init_std = 1e-3;
    /// When set, layer l is drawn with std 1/sqrt(widths[l]) instead of init_std.
    bool fan_in_init = false;

    int num_layers() const { return static_cast<int>(widths.size()) - 1; }

    Eigen::Index num_params() const {
        Eigen::Index total = 0;
        for (int l = 0; l < num_layers(); ++l) total += static_cast<Eigen::Index>(widths[l + 1]) * (widths[l] + 1);
        return total;
    }
};

inline void validate(const MlpArch& arch) {
    if (arch.widths.size() < 2) throw SpecError("MLP needs at least an input and an output layer");
    for (int w : arch.widths)
        if (w < 1) throw SpecError("MLP widths must be >= 1");
    if (arch.widths.back() != 1) throw SpecError("MLP output width must be 1");
    if (!(arch.init_std >= 0.0)) throw SpecError("init_std must be >= 0");
}

/// Depth counts weight layers: depth 2 is one hidden layer.
inline MlpArch make_arch(int input_dim, int depth, int width, double init_std = 1e-3) {
    if (depth < 1) throw SpecError("MLP depth must be >= 1");
    MlpArch arch;
    arch.widths.push_back(input_dim);
    for (int i = 0; i + 1 < depth; ++i) arch.widths.push_back(width);
    arch.widths.push_back(1);
    arch.init_std = init_std;
    validate(arch);
    return arch;
}

/// Parameters stored as one flat vector; layer l contributes W_l
/// (widths[l+1] x widths[l], column-major) followed by b_l.
class MlpParams {
public:
    MlpParams() = default;
    explicit MlpParams(const MlpArch& arch) : arch_(arch), flat_(Vec::Zero(arch.num_params())) {
        validate(arch);
        offsets_.push_back(0);
        for (int l = 0; l < arch.num_layers(); ++l)
            offsets_.push_back(offsets_.back() + static_cast<Eigen::Index>(arch.widths[l + 1]) * (arch.widths[l] + 1));
    }

    const MlpArch& arch() const { return arch_; }
    int num_layers() const { return arch_.num_layers(); }

    Eigen::Map<Mat> W(int l) {
        return {flat_.data() + offsets_[l], arch_.widths[l + 1], arch_.widths[l]};
    }
    Eigen::Map<const Mat> W(int l) const {
        return {flat_.data() + offsets_[l], arch_.widths[l + 1], arch_.widths[l]};
    }
    Eigen::Map<Vec> b(int l) {
        return {flat_.data() + offsets_[l] + static_cast<Eigen::Index>(arch_.widths[l + 1]) * arch_.widths[l],
                arch_.widths[l + 1]};
    }
    Eigen::Map<const Vec> b(int l) const {
        return {flat_.data() + offsets_[l] + static_cast<Eigen::Index>(arch_.widths[l + 1]) * arch_.widths[l],
                arch_.widths[l + 1]};
    }

    Vec& flat() { return flat_; }
    const Vec& flat() const { return flat_; }

    bool same_shape(const MlpParams& other) const { return arch_.widths == other.arch_.widths; }

private:
    MlpArch arch_;
    Vec flat_;
    std::vector<Eigen::Index> offsets_;
};

inline MlpParams init_params(const MlpArch& arch, Rng& rng) {
    MlpParams p(arch);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int l = 0; l < p.num_layers(); ++l) {
        const double sd = arch.fan_in_init ? 1.0 / std::sqrt(static_cast<double>(arch.widths[l])) : arch.init_std;
        auto W = p.W(l);
        auto b = p.b(l);
        for (Eigen::Index j = 0; j < W.cols(); ++j)
            for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = sd * dist(rng);
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = sd * dist(rng);
    }
    return p;
}

/// Network outputs for the columns of Xt (d x batch).
inline Vec mlp_forward(const MlpParams& p, const Mat& Xt) {
    if (Xt.rows() != p.arch().widths.front()) throw SpecError("mlp_forward: input dimension mismatch");
    Mat h = Xt;
    for (int l = 0; l < p.num_layers(); ++l) {
        Mat z = p.W(l) * h;
        z.colwise() += p.b(l);
        if (l + 1 < p.num_layers()) z = z.cwiseMax(0.0);
        h = std::move(z);
    }
    return h.row(0).transpose();
}

struct LossAndGrad {
    double loss = 0.0;
    Vec grad;  ///< same layout as MlpParams::flat()
};

/// Mean squared error over the batch (columns of Xt) and its exact gradient.
inline LossAndGrad mlp_forward_backward(const MlpParams& p, const Mat& Xt, const Vec& y) {
    if (Xt.rows() != p.arch().widths.front()) throw SpecError("mlp_forward_backward: input dimension mismatch");
    if (Xt.cols() != y.size()) throw SpecError("mlp_forward_backward: batch size mismatch");
    const int L = p.num_layers();
    const double m = static_cast<double>(y.size());
    std::vector<Mat> acts;  // acts[l] is the input to layer l
    acts.reserve(L + 1);
    acts.push_back(Xt);
    for (int l = 0; l < L; ++l) {
        Mat z = p.W(l) * acts.back();
        z.colwise() += p.b(l);
        if (l + 1 < L) z = z.cwiseMax(0.0);
        acts.push_back(std::move(z));
    }
    const Eigen::RowVectorXd diff = acts.back().row(0) - y.transpose();

    LossAndGrad out;
    out.loss = diff.squaredNorm() / m;
    MlpParams g(p.arch());
    Mat delta = (2.0 / m) * diff;
    for (int l = L - 1; l >= 0; --l) {
        g.W(l).noalias() = delta * acts[l].transpose();
        g.b(l) = delta.rowwise().sum().transpose();
        if (l > 0) {
            Mat back = p.W(l).transpose() * delta;
            // acts[l] > 0 exactly where the ReLU of layer l-1 was active
            delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
        }
    }
    out.grad = std::move(g.flat());
    return out;
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

struct SgdConfig {
    double stepsize = 1e-2;
};
struct AdamConfig {
    double stepsize = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};
struct RpropConfig {
    double stepsize = 5e-4;
    double eta_minus = 0.5;
    double eta_plus = 1.2;
    double step_min = 1e-6;
    double step_max = 50.0;
};
using OptimizerConfig = std::variant<SgdConfig, AdamConfig, RpropConfig>;

inline void validate(const OptimizerConfig& cfg) {
    std::visit(
        [](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if (!(c.stepsize > 0.0)) throw SpecError("optimizer stepsize must be > 0");
            if constexpr (std::is_same_v<T, AdamConfig>) {
                if (!(c.beta1 > 0.0 && c.beta1 < 1.0 && c.beta2 > 0.0 && c.beta2 < 1.0))
                    throw SpecError("Adam betas must lie in (0, 1)");
                if (!(c.eps > 0.0)) throw SpecError("Adam eps must be > 0");
            } else if constexpr (std::is_same_v<T, RpropConfig>) {
                if (!(c.eta_minus > 0.0 && c.eta_minus < 1.0 && c.eta_plus > 1.0))
                    throw SpecError("Rprop needs 0 < eta_minus < 1 < eta_plus");
                if (!(c.step_min > 0.0 && c.step_min <= c.step_max)) throw SpecError("Rprop step bounds invalid");
            }
        },
        cfg);
}

inline std::string optimizer_name(const OptimizerConfig& cfg) {
    return std::visit(
        [](const auto& c) -> std::string {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, SgdConfig>) return "sgd";
            else if constexpr (std::is_same_v<T, AdamConfig>) return "adam";
            else return "rprop";
        },
        cfg);
}

/// Per-run optimizer state. Adam keeps its moments and step count; Rprop keeps
/// the previous gradient and per-coordinate steps.
struct OptimizerState {
    long step = 0;
    Vec m;
    Vec v;
    Vec prev_grad;
    Vec step_sizes;
};

inline OptimizerState init_optimizer(const OptimizerConfig& cfg, Eigen::Index size) {
    validate(cfg);
    OptimizerState s;
    if (std::holds_alternative<AdamConfig>(cfg)) {
        s.m = Vec::Zero(size);
        s.v = Vec::Zero(size);
    } else if (const auto* r = std::get_if<RpropConfig>(&cfg)) {
        s.prev_grad = Vec::Zero(size);
        s.step_sizes = Vec::Constant(size, r->stepsize);
    }
    return s;
}

inline void optimizer_step(Vec& params, OptimizerState& state, const Vec& grad, const OptimizerConfig& cfg) {
    if (grad.size() != params.size()) throw SpecError("optimizer_step: gradient size mismatch");
    ++state.step;
    if (const auto* sgd = std::get_if<SgdConfig>(&cfg)) {
        params.noalias() -= sgd->stepsize * grad;
    } else if (const auto* adam = std::get_if<AdamConfig>(&cfg)) {
        state.m = adam->beta1 * state.m + (1.0 - adam->beta1) * grad;
        state.v = adam->beta2 * state.v + (1.0 - adam->beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(adam->beta1, static_cast<double>(state.step));
        const double c2 = 1.0 - std::pow(adam->beta2, static_cast<double>(state.step));
        params.array() -=
            adam->stepsize * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + adam->eps);
    } else {
        const auto& rp = std::get<RpropConfig>(cfg);
        for (Eigen::Index i = 0; i < params.size(); ++i) {
            double g = grad(i);
            const double prod = g * state.prev_grad(i);
            if (prod > 0.0) {
                state.step_sizes(i) = std::min(state.step_sizes(i) * rp.eta_plus, rp.step_max);
            } else if (prod < 0.0) {
                state.step_sizes(i) = std::max(state.step_sizes(i) * rp.eta_minus, rp.step_min);
                g = 0.0;
            }
            if (g > 0.0) params(i) -= state.step_sizes(i);
            else if (g < 0.0) params(i) += state.step_sizes(i);
            state.prev_grad(i) = g;
        }
    }
}

// ---------------------------------------------------------------------------
// Function-space distances
// ---------------------------------------------------------------------------

struct ZeroReference {};
struct LinearReference {
    Vec theta;
};
using FunctionReference = std::variant<ZeroReference, LinearReference, MlpParams>;

struct McEstimate {
    double value = 0.0;  ///< mean of (f - g)^2
    double se = 0.0;     ///< standard error of that mean
};

inline Vec evaluate_reference(const FunctionReference& g, const Mat& Xt) {
    return std::visit(
        [&](const auto& ref) -> Vec {
            using T = std::decay_t<decltype(ref)>;
            if constexpr (std::is_same_v<T, ZeroReference>) return Vec::Zero(Xt.cols());
            else if constexpr (std::is_same_v<T, LinearReference>) return Xt.transpose() * ref.theta;
            else return mlp_forward(ref, Xt);
        },
        g);
}

inline McEstimate mean_square(const Vec& diff) {
    const double m = static_cast<double>(diff.size());
    McEstimate e;
    const Eigen::ArrayXd sq = diff.array().square();
    e.value = sq.mean();
    if (diff.size() > 1) {
        const double var = (sq - e.value).square().sum() / (m - 1.0);
        e.se = std::sqrt(var / m);
    }
    return e;
}

/// Monte Carlo estimate of ||f - g||^2 in L2(P) with x ~ N(0, diag(cov_diag)).
inline McEstimate l2p_norm(const MlpParams& f, const FunctionReference& g, const Vec& cov_diag, int n_mc,
                           std::uint64_t seed) {
    if (n_mc < 1) throw SpecError("l2p_norm: n_mc must be >= 1");
    if (const auto* other = std::get_if<MlpParams>(&g)) {
        if (!f.same_shape(*other)) throw ContractError("l2p_norm: reference network has a different shape");
    }
    Rng rng = make_rng(seed, "mc");
    const Mat Xt = sample_inputs(cov_diag, n_mc, rng).transpose();
    return mean_square(mlp_forward(f, Xt) - evaluate_reference(g, Xt));
}

// ---------------------------------------------------------------------------
// Triplet training
// ---------------------------------------------------------------------------

struct NnTrainOptions {
    int epochs = 100;
    int batch_size = 0;    ///< 0 means full batch
    int record_every = 1;  ///< epochs between risk evaluations
    int n_mc = 10000;
    double divergence_threshold = 1e12;
};

struct NnRiskRecord {
    int epoch = 0;
    McEstimate er;   ///< ||f_theta - f*||^2
    McEstimate ver;  ///< ||f_theta_v||^2
    McEstimate ber;  ///< ||f_theta_b - f*||^2
};

struct TripletResult {
    Vec init;
    MlpParams final_std, final_bias, final_var;
    std::vector<NnRiskRecord> records;
    /// Parameter snapshots at every recorded epoch (only when requested).
    std::vector<Vec> snap_std, snap_bias, snap_var;
};

struct TripletData {
    Mat X;  ///< n x d
    Vec y_std;
    Vec y_bias;
    Vec y_var;
    Vec cov_diag;
    Vec theta_star;  ///< f*(x) = <theta*, x>
};

inline TripletData triplet_data(const RegressionDataset& ds, const Vec& cov_diag) {
    return {ds.X, ds.y_noisy, ds.y_clean, ds.eps, cov_diag, ds.theta_star};
}

/// Trains the standard, bias and variance runs from one shared initialization
/// (drawn from `seed` unless `init` is given) over one shared batch order.
inline TripletResult train_triplet(const MlpArch& arch, const OptimizerConfig& opt, const TripletData& data,
                                   const NnTrainOptions& tro, std::uint64_t seed, const Vec* init = nullptr,
                                   bool keep_snapshots = false) {
    validate(arch);
    validate(opt);
    if (data.X.cols() != arch.widths.front()) throw SpecError("train_triplet: input dimension mismatch");
    const Eigen::Index n = data.X.rows();
    if (data.y_std.size() != n || data.y_bias.size() != n || data.y_var.size() != n)
        throw SpecError("train_triplet: response lengths differ from X");
    if (tro.epochs < 0 || tro.record_every < 1) throw SpecError("train_triplet: invalid epoch settings");

    MlpParams base(arch);
    if (init) {
        if (init->size() != base.flat().size()) throw SpecError("train_triplet: init has wrong size");
        base.flat() = *init;
    } else {
        Rng init_rng = make_rng(seed, "init");
        base = init_params(arch, init_rng);
    }
    TripletResult res;
    res.init = base.flat();
    MlpParams P[3] = {base, base, base};
    OptimizerState S[3] = {init_optimizer(opt, base.flat().size()), init_optimizer(opt, base.flat().size()),
                           init_optimizer(opt, base.flat().size())};
    const Vec* Y[3] = {&data.y_std, &data.y_bias, &data.y_var};

    Rng mc_rng = make_rng(seed, "mc");
    const Mat mc_Xt = sample_inputs(data.cov_diag, tro.n_mc, mc_rng).transpose();
    const Vec f_star = mc_Xt.transpose() * data.theta_star;
    auto record = [&](int epoch) {
        NnRiskRecord r;
        r.epoch = epoch;
        r.er = mean_square(mlp_forward(P[0], mc_Xt) - f_star);
        r.ber = mean_square(mlp_forward(P[1], mc_Xt) - f_star);
        r.ver = mean_square(mlp_forward(P[2], mc_Xt));
        res.records.push_back(r);
        if (keep_snapshots) {
            res.snap_std.push_back(P[0].flat());
            res.snap_bias.push_back(P[1].flat());
            res.snap_var.push_back(P[2].flat());
        }
    };

    const Mat Xt = data.X.transpose();
    const int bs = tro.batch_size <= 0 ? static_cast<int>(n) : std::min<int>(tro.batch_size, static_cast<int>(n));
    Rng batch_rng = make_rng(seed, "batch");
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Mat xb;
    Vec yb[3];

    record(0);
    for (int epoch = 1; epoch <= tro.epochs; ++epoch) {
        if (bs < n) std::shuffle(order.begin(), order.end(), batch_rng);
        for (Eigen::Index start = 0; start < n; start += bs) {
            const Eigen::Index len = std::min<Eigen::Index>(bs, n - start);
            if (bs < n) {
                xb.resize(Xt.rows(), len);
                for (int k = 0; k < 3; ++k) yb[k].resize(len);
                for (Eigen::Index i = 0; i < len; ++i) {
                    const int idx = order[static_cast<std::size_t>(start + i)];
                    xb.col(i) = Xt.col(idx);
                    for (int k = 0; k < 3; ++k) yb[k](i) = (*Y[k])(idx);
                }
            }
            for (int k = 0; k < 3; ++k) {
                const LossAndGrad lg = bs < n ? mlp_forward_backward(P[k], xb, yb[k])
                                              : mlp_forward_backward(P[k], Xt, *Y[k]);
                if (!std::isfinite(lg.loss) || lg.loss > tro.divergence_threshold)
                    throw NumericalError("train_triplet: run " + std::to_string(k) + " diverged at epoch " +
                                         std::to_string(epoch));
                optimizer_step(P[k].flat(), S[k], lg.grad, opt);
            }
        }
        if (epoch % tro.record_every == 0 || epoch == tro.epochs) record(epoch);
    }
    res.final_std = P[0];
    res.final_bias = P[1];
    res.final_var = P[2];
    return res;
}

}  // namespace erdlab
