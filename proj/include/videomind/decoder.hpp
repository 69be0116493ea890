#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "videomind/autodiff.hpp"
#include "videomind/tensor.hpp"
#include "videomind/types.hpp"

namespace videomind {

struct DecoderConfig {
    std::size_t d_model = 256;
    std::size_t d_input = 0;
    std::size_t n_layers = 3;
    std::size_t n_heads = 8;
    std::size_t pyramid_levels = 4;
    std::size_t ffn_mult = 4;
    double pe_base = 10000.0;

    void validate() const;
    /// Throws ShapeError unless t is divisible by 2^(pyramid_levels - 1).
    void check_frames(std::size_t t) const;
    /// T + T/2 + ... over all levels.
    std::size_t pyramid_length(std::size_t t) const;

    friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

template <class T>
struct LinearParams {
    T weight;  // in x out
    T bias;    // 1 x out
};

template <class T>
struct NormParams {
    T gain;
    T bias;
};

template <class T>
struct EncoderLayerParams {
    LinearParams<T> query, key, value, output;
    LinearParams<T> ffn_in, ffn_out;
    NormParams<T> norm_attn, norm_ffn;
};

template <class T>
struct PyramidBlockParams {
    LinearParams<T> conv;  // kernel-2 stride-2 conv as a (2D x D) map
    NormParams<T> norm;
};

template <class T>
struct ConvHeadParams {
    LinearParams<T> conv1;  // kernel-3 conv as (3D x D)
    LinearParams<T> conv2;  // (3D x out)
};

/// Every learnable tensor of the timestamp decoder. Instantiated over Matrix
/// for storage and over ad::Var when bound to a tape.
template <class T>
struct DecoderParams {
    LinearParams<T> proj_v, proj_r;
    T mod_v, mod_r;
    std::vector<EncoderLayerParams<T>> layers;
    std::vector<PyramidBlockParams<T>> pyramid;  // pyramid_levels - 1 blocks
    ConvHeadParams<T> cls_head, reg_head;
    T level_scales;  // 1 x pyramid_levels

    /// Calls f(name, tensor) for every tensor in a fixed order.
    template <class F>
    void visit(F&& f);
    template <class F>
    void visit(F&& f) const;

    /// Same structure with each tensor replaced by fn(name, tensor).
    template <class U, class F>
    DecoderParams<U> map(F&& fn) const;
};

using DecoderWeights = DecoderParams<Matrix>;

/// Random initialisation from a seed; reproducible across platforms.
DecoderWeights init_decoder_weights(const DecoderConfig& cfg, std::uint64_t seed);
/// All tensors zero except layer-norm gains (1) and level scales (1).
DecoderWeights zero_decoder_weights(const DecoderConfig& cfg);
/// Throws ShapeError / NumericError if any tensor disagrees with cfg or is non-finite.
void validate_weights(const DecoderWeights& w, const DecoderConfig& cfg);
std::size_t parameter_count(const DecoderWeights& w);

struct PyramidAnchor {
    std::size_t level = 0;
    std::size_t index = 0;  // position within its level
};

struct Pyramid {
    Matrix features;  // L x D
    std::vector<std::size_t> level_lengths;
    std::vector<PyramidAnchor> anchors;

    std::size_t length() const noexcept { return features.rows; }
};

struct HeadOutputs {
    std::vector<double> cls_scores;  // length L, in (0,1)
    Matrix offsets;                  // L x 2 (start, end), positive
    std::vector<double> frame_sims;  // length L, cosine with the fused REG embedding
};

struct ForwardTrace {
    Matrix pooled;       // T x D_L
    Matrix embedded_v;   // T x D
    Matrix embedded_r;   // 1 x D
    Matrix fused_v;      // T x D
    Matrix fused_r;      // 1 x D
    Pyramid pyramid;
    HeadOutputs heads;

    std::size_t frames() const noexcept { return pooled.rows; }
    /// FNV-1a over every stored value, in field order.
    std::uint64_t checksum() const;
};

/// Mean over the H*W tokens of each frame.
Matrix avg_pool_frames(const FeatureSequence& f);

/// sin/cos encoding of integer position t_index at width d.
std::vector<double> sinusoidal_pe(std::size_t t_index, std::size_t t, std::size_t d, double base = 10000.0);

/// Pooling, projection, modality/position embedding and the transformer
/// encoder. Fills the trace through fused_r; pyramid and heads stay empty.
ForwardTrace fuse(const FeatureSequence& f, const RegToken& r, const DecoderWeights& w,
                  const DecoderConfig& cfg);

Pyramid build_pyramid(const Matrix& fused_v, const DecoderWeights& w, const DecoderConfig& cfg);

HeadOutputs predict_heads(const Pyramid& pyramid, const Matrix& fused_r, const DecoderWeights& w,
                          const DecoderConfig& cfg);

/// Full forward pass.
ForwardTrace decoder_forward(const FeatureSequence& f, const RegToken& r, const DecoderWeights& w,
                             const DecoderConfig& cfg);

/// Raw (un-suppressed, un-clamped) moment for one pyramid position, in frame units.
std::pair<double, double> decode_position(const PyramidAnchor& anchor, double offset_start, double offset_end);

/// Decodes every pyramid position into a scored moment in seconds, clamps to
/// the video, applies NMS and keeps the top k.
std::vector<Moment> decode_candidates(const ForwardTrace& trace, double duration, std::size_t k = 5,
                                      double nms_threshold = 0.75);

namespace detail {

/// Tape-level graph shared by inference and training.
struct DecoderGraph {
    ad::Var embedded_v, embedded_r, fused_v, fused_r;
    ad::Var pyramid;  // L x D
    ad::Var cls;      // L x 1
    ad::Var offsets;  // L x 2
    ad::Var sims;     // L x 1
    std::vector<std::size_t> level_lengths;
};

DecoderParams<ad::Var> bind(ad::Tape& tape, const DecoderWeights& w, bool trainable);

ad::Var fuse_graph(ad::Tape& tape, const DecoderParams<ad::Var>& p, const DecoderConfig& cfg, const Matrix& pooled,
                   const Matrix& reg, ad::Var* embedded_v, ad::Var* embedded_r);
std::vector<ad::Var> pyramid_graph(const DecoderParams<ad::Var>& p, const DecoderConfig& cfg, ad::Var fused_v);
void heads_graph(const DecoderParams<ad::Var>& p, const std::vector<ad::Var>& levels, ad::Var fused_r,
                 DecoderGraph& out);
DecoderGraph forward_graph(ad::Tape& tape, const DecoderParams<ad::Var>& p, const DecoderConfig& cfg,
                           const Matrix& pooled, const Matrix& reg);

}  // namespace detail

// ---------------------------------------------------------------------------

template <class T>
template <class F>
void DecoderParams<T>::visit(F&& f) {
    auto lin = [&](const std::string& n, LinearParams<T>& l) {
        f(n + ".weight", l.weight);
        f(n + ".bias", l.bias);
    };
    auto norm = [&](const std::string& n, NormParams<T>& l) {
        f(n + ".gain", l.gain);
        f(n + ".bias", l.bias);
    };
    lin("proj_v", proj_v);
    lin("proj_r", proj_r);
    f(std::string("mod_v"), mod_v);
    f(std::string("mod_r"), mod_r);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string p = "layers." + std::to_string(i);
        lin(p + ".query", layers[i].query);
        lin(p + ".key", layers[i].key);
        lin(p + ".value", layers[i].value);
        lin(p + ".output", layers[i].output);
        lin(p + ".ffn_in", layers[i].ffn_in);
        lin(p + ".ffn_out", layers[i].ffn_out);
        norm(p + ".norm_attn", layers[i].norm_attn);
        norm(p + ".norm_ffn", layers[i].norm_ffn);
    }
    for (std::size_t i = 0; i < pyramid.size(); ++i) {
        const std::string p = "pyramid." + std::to_string(i);
        lin(p + ".conv", pyramid[i].conv);
        norm(p + ".norm", pyramid[i].norm);
    }
    lin("cls_head.conv1", cls_head.conv1);
    lin("cls_head.conv2", cls_head.conv2);
    lin("reg_head.conv1", reg_head.conv1);
    lin("reg_head.conv2", reg_head.conv2);
    f(std::string("level_scales"), level_scales);
}

template <class T>
template <class F>
void DecoderParams<T>::visit(F&& f) const {
    const_cast<DecoderParams<T>*>(this)->visit(
        [&](const std::string& name, T& tensor) { f(name, static_cast<const T&>(tensor)); });
}

template <class T>
template <class U, class F>
DecoderParams<U> DecoderParams<T>::map(F&& fn) const {
    DecoderParams<U> out;
    out.layers.resize(layers.size());
    out.pyramid.resize(pyramid.size());
    std::vector<U> mapped;
    visit([&](const std::string& name, const T& tensor) { mapped.push_back(fn(name, tensor)); });
    std::size_t i = 0;
    out.visit([&](const std::string&, U& slot) { slot = std::move(mapped[i++]); });
    return out;
}

}  // namespace videomind
