#include "videomind/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "videomind/error.hpp"
#include "videomind/moments.hpp"
#include "videomind/synthetic.hpp"

namespace videomind {

namespace {

constexpr double kProbEps = 1e-12;

double sign(double x) { return (x > 0.0) - (x < 0.0); }

Matrix reg_matrix(const RegToken& r) { return Matrix(1, r.values.size(), r.values); }

}  // namespace

void LossParams::validate() const {
    if (!(lambda_cls > 0 && lambda_reg > 0 && lambda_con > 0 && gamma > 0 && tau > 0))
        throw ValidationError("loss weights, gamma and tau must be positive");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("focal alpha must lie in (0,1)");
}

std::size_t TargetAssignment::positive_count() const {
    return static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
}

std::vector<std::size_t> TargetAssignment::positive_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < positive.size(); ++i)
        if (positive[i])
            out.push_back(i);
    return out;
}

TargetAssignment assign_targets(const Moment& gt, double duration, std::size_t t, std::size_t levels,
                                double max_offset_units) {
    if (!(duration > 0.0))
        throw RangeError("duration must be positive");
    validate(gt);
    if (gt.start < 0.0 || gt.end > duration)
        throw RangeError("ground-truth moment lies outside the video");
    DecoderConfig shape;
    shape.pyramid_levels = levels;
    const std::size_t L = shape.pyramid_length(t);

    const double frames_per_second = static_cast<double>(t) / duration;
    const double gs = gt.start * frames_per_second, ge = gt.end * frames_per_second;

    TargetAssignment ta;
    ta.positive.assign(L, false);
    ta.offsets = Matrix(L, 2);
    std::size_t i = 0;
    for (std::size_t l = 0; l < levels; ++l) {
        const double stride = static_cast<double>(std::size_t{1} << l);
        for (std::size_t j = 0; j < (t >> l); ++j, ++i) {
            ta.anchors.push_back({l, j});
            const double center = (static_cast<double>(j) + 0.5) * stride;
            if (center < gs || center > ge)
                continue;
            const double bs = (center - gs) / stride, be = (ge - center) / stride;
            if (std::max(bs, be) > max_offset_units)
                continue;
            ta.positive[i] = true;
            ta.offsets(i, 0) = bs;
            ta.offsets(i, 1) = be;
        }
    }
    auto pos = ta.positive_indices();
    if (!pos.empty())
        ta.contrastive_positive = pos[pos.size() / 2];
    return ta;
}

void resample_contrastive_positive(TargetAssignment& ta, Rng& rng) {
    auto pos = ta.positive_indices();
    if (pos.empty()) {
        ta.contrastive_positive.reset();
        return;
    }
    ta.contrastive_positive = pos[rng.index(pos.size())];
}

double focal_loss(double c_hat, bool positive, const LossParams& p) {
    const double c = std::clamp(c_hat, kProbEps, 1.0 - kProbEps);
    if (positive)
        return -p.lambda_cls * p.alpha * std::pow(1.0 - c, p.gamma) * std::log(c);
    return -p.lambda_cls * (1.0 - p.alpha) * std::pow(c, p.gamma) * std::log1p(-c);
}

double focal_loss_derivative(double c_hat, bool positive, const LossParams& p) {
    if (c_hat < kProbEps || c_hat > 1.0 - kProbEps)
        return 0.0;
    const double c = c_hat, g = p.gamma;
    if (positive)
        return -p.lambda_cls * p.alpha *
               (-g * std::pow(1.0 - c, g - 1.0) * std::log(c) + std::pow(1.0 - c, g) / c);
    return -p.lambda_cls * (1.0 - p.alpha) * (g * std::pow(c, g - 1.0) * std::log1p(-c) - std::pow(c, g) / (1.0 - c));
}

double regression_loss(std::pair<double, double> pred, std::pair<double, double> target, const LossParams& p) {
    return p.lambda_reg * (std::abs(target.first - pred.first) + std::abs(target.second - pred.second));
}

double contrastive_loss(std::span<const double> sims, std::size_t p_index, const LossParams& p) {
    if (p_index >= sims.size())
        throw RangeError("contrastive positive index out of range");
    const double sp = sims[p_index];
    // Every member of the negative set scores below sp, so each exponent is
    // negative and the sum cannot overflow.
    double acc = 0.0;
    for (double s : sims)
        if (sp > s)
            acc += std::exp((s - sp) / p.tau);
    return p.lambda_con * std::log1p(acc);
}

LossBreakdown total_loss_with_gradients(const HeadOutputs& heads, const TargetAssignment& ta, const LossParams& p,
                                        HeadGradients& grads) {
    const std::size_t L = ta.length();
    if (heads.cls_scores.size() != L || heads.offsets.rows != L || heads.frame_sims.size() != L)
        throw ShapeError("head outputs do not match target assignment length");
    grads.cls = Matrix(L, 1);
    grads.offsets = Matrix(L, 2);
    grads.sims = Matrix(L, 1);

    LossBreakdown out;
    const double invL = 1.0 / static_cast<double>(L);
    for (std::size_t i = 0; i < L; ++i) {
        out.cls += focal_loss(heads.cls_scores[i], ta.positive[i], p) * invL;
        grads.cls(i, 0) = focal_loss_derivative(heads.cls_scores[i], ta.positive[i], p) * invL;
    }

    const auto pos = ta.positive_indices();
    if (pos.empty()) {
        out.no_positives = true;
        out.total = out.cls;
        return out;
    }
    const double invP = 1.0 / static_cast<double>(pos.size());
    for (std::size_t i : pos) {
        const double ps = heads.offsets(i, 0), pe = heads.offsets(i, 1);
        out.reg += regression_loss({ps, pe}, {ta.offsets(i, 0), ta.offsets(i, 1)}, p) * invP;
        grads.offsets(i, 0) = p.lambda_reg * sign(ps - ta.offsets(i, 0)) * invP;
        grads.offsets(i, 1) = p.lambda_reg * sign(pe - ta.offsets(i, 1)) * invP;
    }

    const std::size_t pi = ta.contrastive_positive.value_or(pos[pos.size() / 2]);
    out.con = contrastive_loss(heads.frame_sims, pi, p);
    const double sp = heads.frame_sims[pi];
    double acc = 0.0;
    for (double s : heads.frame_sims)
        if (sp > s)
            acc += std::exp((s - sp) / p.tau);
    const double k = p.lambda_con / (p.tau * (1.0 + acc));
    for (std::size_t i = 0; i < L; ++i) {
        const double s = heads.frame_sims[i];
        if (sp > s)
            grads.sims(i, 0) += k * std::exp((s - sp) / p.tau);
    }
    grads.sims(pi, 0) -= k * acc;

    out.total = out.cls + out.reg + out.con;
    return out;
}

LossBreakdown total_loss(const HeadOutputs& heads, const TargetAssignment& ta, const LossParams& p) {
    HeadGradients unused;
    return total_loss_with_gradients(heads, ta, p, unused);
}

LossAndGradient loss_and_gradient(const DecoderWeights& w, const DecoderConfig& cfg, const TrainingExample& ex,
                                  const TargetAssignment& ta, const LossParams& p) {
    ad::Tape tape;
    auto params = detail::bind(tape, w, true);
    const Matrix pooled = avg_pool_frames(ex.features);
    detail::DecoderGraph g = detail::forward_graph(tape, params, cfg, pooled, reg_matrix(ex.reg));

    HeadOutputs heads{g.cls.value().data, g.offsets.value(), g.sims.value().data};
    HeadGradients hg;
    LossAndGradient out;
    out.loss = total_loss_with_gradients(heads, ta, p, hg);
    if (!std::isfinite(out.loss.total))
        throw NumericError("loss is not finite");

    // The three heads are stacked into one sink so a single reverse sweep
    // covers the shared graph.
    ad::Var sink = ad::concat_rows({g.cls, ad::reshape(g.offsets, 2 * g.offsets.rows(), 1), g.sims});
    Matrix seed(sink.rows(), 1);
    std::size_t o = 0;
    for (double v : hg.cls.data)
        seed.data[o++] = v;
    for (double v : hg.offsets.data)
        seed.data[o++] = v;
    for (double v : hg.sims.data)
        seed.data[o++] = v;
    tape.backward(sink, seed);

    out.gradient = params.map<Matrix>([&](const std::string&, const ad::Var& v) {
        const Matrix& grad = tape.grad(v);
        return grad.size() == v.value().size() ? grad : Matrix(v.rows(), v.cols());
    });
    return out;
}

double evaluate_loss(const DecoderWeights& w, const DecoderConfig& cfg, const TrainingExample& ex,
                     const TargetAssignment& ta, const LossParams& p) {
    ad::Tape tape;
    auto params = detail::bind(tape, w, false);
    detail::DecoderGraph g = detail::forward_graph(tape, params, cfg, avg_pool_frames(ex.features),
                                                   reg_matrix(ex.reg));
    HeadOutputs heads{g.cls.value().data, g.offsets.value(), g.sims.value().data};
    return total_loss(heads, ta, p).total;
}

GradientCheckReport gradient_check(const DecoderWeights& w, const DecoderConfig& cfg, const TrainingExample& ex,
                                   const TargetAssignment& ta, const LossParams& p, double eps,
                                   const std::optional<GradientMutation>& mutation) {
    DecoderWeights analytic = loss_and_gradient(w, cfg, ex, ta, p).gradient;
    if (mutation) {
        bool found = false;
        analytic.visit([&](const std::string& name, Matrix& g) {
            if (name != mutation->tensor)
                return;
            found = true;
            for (double& v : g.data)
                v *= mutation->factor;
        });
        if (!found)
            throw ValidationError("unknown tensor for gradient mutation: " + mutation->tensor);
    }

    std::vector<const Matrix*> grads;
    analytic.visit([&](const std::string&, const Matrix& g) { grads.push_back(&g); });

    GradientCheckReport report;
    DecoderWeights probe = w;
    std::size_t tensor_index = 0;
    probe.visit([&](const std::string& name, Matrix& m) {
        const Matrix& g = *grads[tensor_index++];
        double max_diff = 0.0, max_g = 0.0, max_fd = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double orig = m.data[i];
            m.data[i] = orig + eps;
            const double up = evaluate_loss(probe, cfg, ex, ta, p);
            m.data[i] = orig - eps;
            const double down = evaluate_loss(probe, cfg, ex, ta, p);
            m.data[i] = orig;
            const double fd = (up - down) / (2.0 * eps);
            max_diff = std::max(max_diff, std::abs(fd - g.data[i]));
            max_g = std::max(max_g, std::abs(g.data[i]));
            max_fd = std::max(max_fd, std::abs(fd));
        }
        report.entries_checked += m.size();
        const double scale = std::max(max_g, max_fd);
        double err;
        if (scale <= kGradientAbsTolerance)
            err = max_diff <= kGradientAbsTolerance ? 0.0 : max_diff;
        else
            err = max_diff / scale;
        if (err > report.max_relative_error || report.worst_tensor.empty()) {
            report.max_relative_error = err;
            report.worst_tensor = name;
        }
    });
    return report;
}

DecoderConfig tiny_decoder_config() {
    DecoderConfig cfg;
    cfg.d_model = 16;
    cfg.d_input = 8;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.pyramid_levels = 4;
    cfg.ffn_mult = 2;
    return cfg;
}

TrainingExample tiny_fixture(std::uint64_t seed) {
    Rng rng(seed);
    SyntheticSpec spec;
    spec.frames = 8;
    spec.dim = tiny_decoder_config().d_input;
    SyntheticClip clip = make_synthetic_clip(rng, spec, "tiny");
    return {std::move(clip.features), std::move(clip.reg), clip.annotation.gt_moments.front(),
            clip.annotation.duration};
}

DecoderConfig ToyTrainingConfig::toy_decoder() {
    DecoderConfig cfg;
    cfg.d_model = 32;
    cfg.d_input = 8;
    cfg.n_layers = 1;
    cfg.n_heads = 4;
    cfg.pyramid_levels = 4;
    cfg.ffn_mult = 2;
    return cfg;
}

ToyTrainingResult train_toy(std::uint64_t seed, std::size_t steps, double lr, const ToyTrainingConfig& cfg) {
    cfg.decoder.validate();
    cfg.loss.validate();
    if (!(lr > 0.0))
        throw ValidationError("learning rate must be positive");

    Rng data_rng(seed);
    SyntheticSpec spec;
    spec.frames = cfg.frames;
    spec.dim = cfg.decoder.d_input;
    std::vector<TrainingExample> examples;
    std::vector<TargetAssignment> targets;
    for (std::size_t i = 0; i < cfg.clips; ++i) {
        SyntheticClip clip = make_synthetic_clip(data_rng, spec, "train_" + std::to_string(i));
        TrainingExample ex{std::move(clip.features), std::move(clip.reg), clip.annotation.gt_moments.front(),
                           clip.annotation.duration};
        targets.push_back(assign_targets(ex.gt, ex.duration, cfg.frames, cfg.decoder.pyramid_levels,
                                         cfg.max_offset_units));
        examples.push_back(std::move(ex));
    }

    ToyTrainingResult result;
    result.config = cfg.decoder;
    result.weights = init_decoder_weights(cfg.decoder, seed);
    Rng sample_rng(seed ^ 0x5deece66dULL);

    auto dataset_loss = [&](std::size_t step) {
        double loss = 0.0;
        for (std::size_t i = 0; i < examples.size(); ++i)
            loss += evaluate_loss(result.weights, cfg.decoder, examples[i], targets[i], cfg.loss);
        loss /= static_cast<double>(examples.size());
        if (!std::isfinite(loss))
            throw TrainingError("training diverged at step " + std::to_string(step), static_cast<long>(step));
        return loss;
    };

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    result.loss_history.push_back(dataset_loss(0));
    for (std::size_t step = 0; step < steps; ++step) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[sample_rng.index(i)]);
        for (std::size_t idx : order) {
            LossAndGradient lg;
            try {
                lg = loss_and_gradient(result.weights, cfg.decoder, examples[idx], targets[idx], cfg.loss);
            } catch (const NumericError& e) {
                throw TrainingError("training diverged at step " + std::to_string(step + 1) + ": " + e.what(),
                                    static_cast<long>(step + 1));
            }
            std::vector<const Matrix*> gs;
            lg.gradient.visit([&](const std::string&, const Matrix& g) { gs.push_back(&g); });
            std::size_t k = 0;
            result.weights.visit([&](const std::string&, Matrix& m) {
                for (std::size_t e = 0; e < m.size(); ++e)
                    m.data[e] -= lr * gs[k]->data[e];
                ++k;
            });
            resample_contrastive_positive(targets[idx], sample_rng);
        }
        result.loss_history.push_back(dataset_loss(step + 1));
    }
    return result;
}

}  // namespace videomind
