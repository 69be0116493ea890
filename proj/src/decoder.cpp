#include "videomind/decoder.hpp"

#include <cmath>
#include <string>

#include "videomind/error.hpp"
#include "videomind/moments.hpp"

namespace videomind {

namespace {

// RetinaNet-style prior: the classification head starts near p = 0.01.
constexpr double kClsPriorProbability = 0.01;

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& name) {
    if (m.rows != rows || m.cols != cols)
        throw ShapeError("tensor " + name + " has shape " + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                         ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
}

/// Expected shape of every tensor, in visit order.
DecoderWeights skeleton(const DecoderConfig& cfg) {
    const std::size_t D = cfg.d_model, F = cfg.ffn_mult * cfg.d_model;
    auto lin = [](std::size_t in, std::size_t out) { return LinearParams<Matrix>{Matrix(in, out), Matrix(1, out)}; };
    auto norm = [D] { return NormParams<Matrix>{Matrix(1, D, 1.0), Matrix(1, D)}; };
    DecoderWeights w;
    w.proj_v = lin(cfg.d_input, D);
    w.proj_r = lin(cfg.d_input, D);
    w.mod_v = Matrix(1, D);
    w.mod_r = Matrix(1, D);
    for (std::size_t i = 0; i < cfg.n_layers; ++i)
        w.layers.push_back({lin(D, D), lin(D, D), lin(D, D), lin(D, D), lin(D, F), lin(F, D), norm(), norm()});
    for (std::size_t i = 0; i + 1 < cfg.pyramid_levels; ++i)
        w.pyramid.push_back({lin(2 * D, D), norm()});
    w.cls_head = {lin(3 * D, D), lin(3 * D, 1)};
    w.reg_head = {lin(3 * D, D), lin(3 * D, 2)};
    w.level_scales = Matrix(1, cfg.pyramid_levels, 1.0);
    return w;
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void DecoderConfig::validate() const {
    if (d_model == 0 || d_input == 0)
        throw ValidationError("decoder d_model and d_input must be positive");
    if (n_heads == 0 || d_model % n_heads != 0)
        throw ValidationError("d_model must be divisible by n_heads");
    if (pyramid_levels == 0)
        throw ValidationError("pyramid_levels must be at least 1");
    if (ffn_mult == 0)
        throw ValidationError("ffn_mult must be positive");
    if (!(pe_base > 0.0))
        throw ValidationError("pe_base must be positive");
}

void DecoderConfig::check_frames(std::size_t t) const {
    const std::size_t stride = std::size_t{1} << (pyramid_levels - 1);
    if (t == 0 || t % stride != 0)
        throw ShapeError("frame count " + std::to_string(t) + " not divisible by " + std::to_string(stride) +
                         " for " + std::to_string(pyramid_levels) + " pyramid levels");
}

std::size_t DecoderConfig::pyramid_length(std::size_t t) const {
    check_frames(t);
    std::size_t total = 0;
    for (std::size_t l = 0; l < pyramid_levels; ++l)
        total += t >> l;
    return total;
}

DecoderWeights init_decoder_weights(const DecoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    DecoderWeights w = skeleton(cfg);
    w.visit([&](const std::string& name, Matrix& m) {
        if (ends_with(name, ".weight")) {
            const double std_dev = 1.0 / std::sqrt(static_cast<double>(m.rows));
            for (double& v : m.data)
                v = rng.normal() * std_dev;
        } else if (name == "mod_v" || name == "mod_r") {
            for (double& v : m.data)
                v = rng.normal() * 0.02;
        }
    });
    const double prior_bias = -std::log((1.0 - kClsPriorProbability) / kClsPriorProbability);
    for (double& v : w.cls_head.conv2.bias.data)
        v = prior_bias;
    return w;
}

DecoderWeights zero_decoder_weights(const DecoderConfig& cfg) {
    cfg.validate();
    return skeleton(cfg);
}

void validate_weights(const DecoderWeights& w, const DecoderConfig& cfg) {
    cfg.validate();
    const DecoderWeights expected = skeleton(cfg);
    if (w.layers.size() != expected.layers.size())
        throw ShapeError("weights have " + std::to_string(w.layers.size()) + " layers, config expects " +
                         std::to_string(expected.layers.size()));
    if (w.pyramid.size() != expected.pyramid.size())
        throw ShapeError("weights have " + std::to_string(w.pyramid.size()) + " pyramid blocks, config expects " +
                         std::to_string(expected.pyramid.size()));
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    expected.visit([&](const std::string&, const Matrix& m) { shapes.emplace_back(m.rows, m.cols); });
    std::size_t i = 0;
    w.visit([&](const std::string& name, const Matrix& m) {
        require_shape(m, shapes[i].first, shapes[i].second, name);
        ++i;
        if (!m.all_finite())
            throw NumericError("tensor " + name + " has non-finite values");
    });
    for (double s : w.level_scales.data)
        if (!(s > 0.0))
            throw ValidationError("level_scales must be positive");
}

std::size_t parameter_count(const DecoderWeights& w) {
    std::size_t n = 0;
    w.visit([&](const std::string&, const Matrix& m) { n += m.size(); });
    return n;
}

std::uint64_t ForwardTrace::checksum() const {
    std::uint64_t h = fnv1a(pooled.data);
    for (const Matrix* m : {&embedded_v, &embedded_r, &fused_v, &fused_r, &pyramid.features, &heads.offsets})
        h = fnv1a(m->data, h);
    h = fnv1a(heads.cls_scores, h);
    h = fnv1a(heads.frame_sims, h);
    return h;
}

Matrix avg_pool_frames(const FeatureSequence& f) {
    f.validate();
    Matrix out(f.t, f.d);
    const double inv = 1.0 / static_cast<double>(f.tokens_per_frame());
    for (std::size_t t = 0; t < f.t; ++t)
        for (std::size_t k = 0; k < f.tokens_per_frame(); ++k) {
            auto tok = f.token(t, k);
            for (std::size_t c = 0; c < f.d; ++c)
                out(t, c) += tok[c];
        }
    for (double& v : out.data)
        v *= inv;
    return out;
}

std::vector<double> sinusoidal_pe(std::size_t t_index, std::size_t t, std::size_t d, double base) {
    if (t_index >= t)
        throw RangeError("position index " + std::to_string(t_index) + " outside clip of " + std::to_string(t));
    std::vector<double> pe(d);
    const double pos = static_cast<double>(t_index);
    for (std::size_t i = 0; i < d; ++i) {
        const std::size_t pair = i - (i % 2);
        const double freq = std::pow(base, -static_cast<double>(pair) / static_cast<double>(d));
        pe[i] = (i % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
    }
    return pe;
}

namespace detail {

DecoderParams<ad::Var> bind(ad::Tape& tape, const DecoderWeights& w, bool trainable) {
    return w.map<ad::Var>([&](const std::string&, const Matrix& m) {
        return trainable ? tape.parameter(m) : tape.constant(m);
    });
}

namespace {

ad::Var apply(const LinearParams<ad::Var>& l, ad::Var x) { return ad::linear(x, l.weight, l.bias); }

ad::Var apply(const NormParams<ad::Var>& n, ad::Var x) { return ad::layer_norm(x, n.gain, n.bias); }

ad::Var encoder_layer(const EncoderLayerParams<ad::Var>& p, std::size_t n_heads, ad::Var x) {
    const std::size_t D = x.cols(), dh = D / n_heads;
    ad::Var q = apply(p.query, x), k = apply(p.key, x), v = apply(p.value, x);
    std::vector<ad::Var> heads;
    heads.reserve(n_heads);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t h = 0; h < n_heads; ++h) {
        ad::Var qh = ad::slice_cols(q, h * dh, dh);
        ad::Var kh = ad::slice_cols(k, h * dh, dh);
        ad::Var vh = ad::slice_cols(v, h * dh, dh);
        ad::Var attn = ad::softmax_rows(ad::scale(ad::matmul_bt(qh, kh), inv_sqrt));
        heads.push_back(ad::matmul(attn, vh));
    }
    ad::Var attended = apply(p.output, ad::concat_cols(heads));
    x = apply(p.norm_attn, ad::add(x, attended));
    ad::Var ffn = apply(p.ffn_out, ad::gelu(apply(p.ffn_in, x)));
    return apply(p.norm_ffn, ad::add(x, ffn));
}

}  // namespace

ad::Var fuse_graph(ad::Tape& tape, const DecoderParams<ad::Var>& p, const DecoderConfig& cfg, const Matrix& pooled,
                   const Matrix& reg, ad::Var* embedded_v, ad::Var* embedded_r) {
    const std::size_t T = pooled.rows, D = cfg.d_model;
    Matrix pe(T, D);
    for (std::size_t t = 0; t < T; ++t) {
        auto row = sinusoidal_pe(t, T, D, cfg.pe_base);
        std::copy(row.begin(), row.end(), pe.row(t).begin());
    }
    ad::Var e_v = apply(p.proj_v, tape.constant(pooled));
    ad::Var e_r = apply(p.proj_r, tape.constant(reg));
    if (embedded_v)
        *embedded_v = e_v;
    if (embedded_r)
        *embedded_r = e_r;
    ad::Var visual = ad::add(ad::add_rowvec(e_v, p.mod_v), tape.constant(std::move(pe)));
    ad::Var query = ad::add(e_r, p.mod_r);
    ad::Var x = ad::concat_rows({visual, query});
    for (const auto& layer : p.layers)
        x = encoder_layer(layer, cfg.n_heads, x);
    return x;
}

std::vector<ad::Var> pyramid_graph(const DecoderParams<ad::Var>& p, const DecoderConfig& cfg, ad::Var fused_v) {
    std::vector<ad::Var> levels{fused_v};
    const std::size_t D = cfg.d_model;
    for (const auto& block : p.pyramid) {
        ad::Var prev = levels.back();
        ad::Var pairs = ad::reshape(prev, prev.rows() / 2, 2 * D);
        levels.push_back(ad::silu(apply(block.norm, apply(block.conv, pairs))));
    }
    return levels;
}

void heads_graph(const DecoderParams<ad::Var>& p, const std::vector<ad::Var>& levels, ad::Var fused_r,
                 DecoderGraph& out) {
    std::vector<ad::Var> cls, reg;
    out.level_lengths.clear();
    for (std::size_t l = 0; l < levels.size(); ++l) {
        ad::Var x = levels[l];
        out.level_lengths.push_back(x.rows());
        ad::Var hc = ad::silu(apply(p.cls_head.conv1, ad::unfold3(x)));
        cls.push_back(ad::sigmoid(apply(p.cls_head.conv2, ad::unfold3(hc))));
        ad::Var hr = ad::silu(apply(p.reg_head.conv1, ad::unfold3(x)));
        ad::Var raw = ad::exp(apply(p.reg_head.conv2, ad::unfold3(hr)));
        reg.push_back(ad::mul_scalar(raw, ad::slice_cols(p.level_scales, l, 1)));
    }
    out.pyramid = ad::concat_rows(levels);
    out.cls = ad::concat_rows(cls);
    out.offsets = ad::concat_rows(reg);
    out.sims = ad::cosine_rows(out.pyramid, fused_r);
}

DecoderGraph forward_graph(ad::Tape& tape, const DecoderParams<ad::Var>& p, const DecoderConfig& cfg,
                           const Matrix& pooled, const Matrix& reg) {
    cfg.check_frames(pooled.rows);
    DecoderGraph g;
    ad::Var x = fuse_graph(tape, p, cfg, pooled, reg, &g.embedded_v, &g.embedded_r);
    g.fused_v = ad::slice_rows(x, 0, pooled.rows);
    g.fused_r = ad::slice_rows(x, pooled.rows, 1);
    heads_graph(p, pyramid_graph(p, cfg, g.fused_v), g.fused_r, g);
    return g;
}

}  // namespace detail

namespace {

void check_inputs(const FeatureSequence& f, const RegToken& r, const DecoderConfig& cfg) {
    cfg.validate();
    f.validate();
    r.validate(f.d);
    if (f.d != cfg.d_input)
        throw ShapeError("feature dim " + std::to_string(f.d) + " does not match decoder d_input " +
                         std::to_string(cfg.d_input));
}

Matrix reg_matrix(const RegToken& r) { return Matrix(1, r.values.size(), r.values); }

std::vector<PyramidAnchor> make_anchors(const std::vector<std::size_t>& level_lengths) {
    std::vector<PyramidAnchor> anchors;
    for (std::size_t l = 0; l < level_lengths.size(); ++l)
        for (std::size_t j = 0; j < level_lengths[l]; ++j)
            anchors.push_back({l, j});
    return anchors;
}

HeadOutputs collect_heads(const detail::DecoderGraph& g) {
    HeadOutputs h;
    h.cls_scores = g.cls.value().data;
    h.offsets = g.offsets.value();
    h.frame_sims = g.sims.value().data;
    return h;
}

}  // namespace

ForwardTrace fuse(const FeatureSequence& f, const RegToken& r, const DecoderWeights& w, const DecoderConfig& cfg) {
    check_inputs(f, r, cfg);
    validate_weights(w, cfg);
    ForwardTrace trace;
    trace.pooled = avg_pool_frames(f);
    ad::Tape tape;
    auto p = detail::bind(tape, w, false);
    ad::Var e_v, e_r;
    ad::Var x = detail::fuse_graph(tape, p, cfg, trace.pooled, reg_matrix(r), &e_v, &e_r);
    trace.embedded_v = e_v.value();
    trace.embedded_r = e_r.value();
    trace.fused_v = ad::slice_rows(x, 0, f.t).value();
    trace.fused_r = ad::slice_rows(x, f.t, 1).value();
    if (!trace.fused_v.all_finite() || !trace.fused_r.all_finite())
        throw NumericError("transformer produced non-finite activations");
    return trace;
}

Pyramid build_pyramid(const Matrix& fused_v, const DecoderWeights& w, const DecoderConfig& cfg) {
    cfg.validate();
    cfg.check_frames(fused_v.rows);
    if (fused_v.cols != cfg.d_model)
        throw ShapeError("pyramid input width must equal d_model");
    ad::Tape tape;
    auto p = detail::bind(tape, w, false);
    auto levels = detail::pyramid_graph(p, cfg, tape.constant(fused_v));
    Pyramid out;
    for (ad::Var l : levels)
        out.level_lengths.push_back(l.rows());
    out.features = ad::concat_rows(levels).value();
    out.anchors = make_anchors(out.level_lengths);
    return out;
}

HeadOutputs predict_heads(const Pyramid& pyramid, const Matrix& fused_r, const DecoderWeights& w,
                          const DecoderConfig& cfg) {
    cfg.validate();
    if (pyramid.level_lengths.size() != cfg.pyramid_levels)
        throw ShapeError("pyramid level count does not match config");
    ad::Tape tape;
    auto p = detail::bind(tape, w, false);
    ad::Var all = tape.constant(pyramid.features);
    std::vector<ad::Var> levels;
    std::size_t offset = 0;
    for (std::size_t len : pyramid.level_lengths) {
        levels.push_back(ad::slice_rows(all, offset, len));
        offset += len;
    }
    detail::DecoderGraph g;
    detail::heads_graph(p, levels, tape.constant(fused_r), g);
    return collect_heads(g);
}

ForwardTrace decoder_forward(const FeatureSequence& f, const RegToken& r, const DecoderWeights& w,
                             const DecoderConfig& cfg) {
    check_inputs(f, r, cfg);
    validate_weights(w, cfg);
    ForwardTrace trace;
    trace.pooled = avg_pool_frames(f);
    ad::Tape tape;
    auto p = detail::bind(tape, w, false);
    detail::DecoderGraph g = detail::forward_graph(tape, p, cfg, trace.pooled, reg_matrix(r));
    trace.embedded_v = g.embedded_v.value();
    trace.embedded_r = g.embedded_r.value();
    trace.fused_v = g.fused_v.value();
    trace.fused_r = g.fused_r.value();
    trace.pyramid.features = g.pyramid.value();
    trace.pyramid.level_lengths = g.level_lengths;
    trace.pyramid.anchors = make_anchors(g.level_lengths);
    trace.heads = collect_heads(g);
    if (!trace.pyramid.features.all_finite() || !trace.heads.offsets.all_finite())
        throw NumericError("decoder produced non-finite outputs");
    return trace;
}

std::pair<double, double> decode_position(const PyramidAnchor& anchor, double offset_start, double offset_end) {
    const double stride = static_cast<double>(std::size_t{1} << anchor.level);
    const double center = (static_cast<double>(anchor.index) + 0.5) * stride;
    return {center - offset_start * stride, center + offset_end * stride};
}

std::vector<Moment> decode_candidates(const ForwardTrace& trace, double duration, std::size_t k,
                                      double nms_threshold) {
    if (!(duration > 0.0))
        throw RangeError("duration must be positive");
    const auto& anchors = trace.pyramid.anchors;
    if (anchors.size() != trace.heads.cls_scores.size() || anchors.size() != trace.heads.offsets.rows)
        throw ShapeError("trace is incomplete: heads do not cover the pyramid");
    const double seconds_per_frame = duration / static_cast<double>(trace.frames());
    std::vector<Moment> cands;
    cands.reserve(anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        auto [s, e] = decode_position(anchors[i], trace.heads.offsets(i, 0), trace.heads.offsets(i, 1));
        Moment m{s * seconds_per_frame, e * seconds_per_frame, trace.heads.cls_scores[i]};
        cands.push_back(clamp_moment(m, duration));
    }
    return top_k(nms(cands, nms_threshold), k);
}

}  // namespace videomind
