#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "videomind/decoder.hpp"
#include "videomind/tensor.hpp"
#include "videomind/types.hpp"

namespace videomind {

struct LossParams {
    double lambda_cls = 5.0;
    double lambda_reg = 1.0;
    double lambda_con = 0.05;
    double alpha = 0.9;
    double gamma = 2.0;
    double tau = 0.07;

    void validate() const;
};

inline constexpr double kDefaultMaxOffsetUnits = 8.0;

/// Per-position training targets over the concatenated pyramid.
struct TargetAssignment {
    std::vector<PyramidAnchor> anchors;
    std::vector<bool> positive;
    Matrix offsets;  // L x 2 in level-stride units; zero rows on negatives
    std::optional<std::size_t> contrastive_positive;

    std::size_t length() const noexcept { return positive.size(); }
    std::size_t positive_count() const;
    std::vector<std::size_t> positive_indices() const;
};

/// Position (l, j) is positive iff its centre lies inside gt and both offsets
/// to the gt boundaries are at most max_offset_units (in 2^l-frame units).
/// The contrastive positive defaults to the middle positive; see
/// resample_contrastive_positive for the seeded draw used in training.
TargetAssignment assign_targets(const Moment& gt, double duration, std::size_t t, std::size_t levels,
                                double max_offset_units = kDefaultMaxOffsetUnits);

void resample_contrastive_positive(TargetAssignment& ta, Rng& rng);

double focal_loss(double c_hat, bool positive, const LossParams& p);
/// d focal_loss / d c_hat.
double focal_loss_derivative(double c_hat, bool positive, const LossParams& p);

double regression_loss(std::pair<double, double> pred, std::pair<double, double> target, const LossParams& p);

/// InfoNCE restricted to positions scoring strictly below the positive.
double contrastive_loss(std::span<const double> sims, std::size_t p_index, const LossParams& p);

struct LossBreakdown {
    double cls = 0.0;
    double reg = 0.0;
    double con = 0.0;
    double total = 0.0;
    bool no_positives = false;
};

LossBreakdown total_loss(const HeadOutputs& heads, const TargetAssignment& ta, const LossParams& p);
inline LossBreakdown total_loss(const ForwardTrace& trace, const TargetAssignment& ta, const LossParams& p) {
    return total_loss(trace.heads, ta, p);
}

/// Gradients of total_loss with respect to the head outputs.
struct HeadGradients {
    Matrix cls;      // L x 1
    Matrix offsets;  // L x 2
    Matrix sims;     // L x 1
};
LossBreakdown total_loss_with_gradients(const HeadOutputs& heads, const TargetAssignment& ta, const LossParams& p,
                                        HeadGradients& grads);

struct TrainingExample {
    FeatureSequence features;
    RegToken reg;
    Moment gt;
    double duration = 0.0;
};

struct LossAndGradient {
    LossBreakdown loss;
    DecoderWeights gradient;
};

/// Forward pass, loss and backpropagation to every decoder tensor.
LossAndGradient loss_and_gradient(const DecoderWeights& w, const DecoderConfig& cfg, const TrainingExample& ex,
                                  const TargetAssignment& ta, const LossParams& p);

double evaluate_loss(const DecoderWeights& w, const DecoderConfig& cfg, const TrainingExample& ex,
                     const TargetAssignment& ta, const LossParams& p);

struct GradientMutation {
    std::string tensor;
    double factor = 1.0;
};

struct GradientCheckReport {
    double max_relative_error = 0.0;
    std::string worst_tensor;
    std::size_t entries_checked = 0;
};

inline constexpr double kGradientAbsTolerance = 1e-9;

/// Compares backpropagated gradients against central finite differences over
/// every entry of every tensor. Per tensor the error is
/// max|g - fd| / max(max|g|, max|fd|); tensors whose gradients are all below
/// kGradientAbsTolerance are compared absolutely instead.
GradientCheckReport gradient_check(const DecoderWeights& w, const DecoderConfig& cfg, const TrainingExample& ex,
                                   const TargetAssignment& ta, const LossParams& p, double eps = 1e-5,
                                   const std::optional<GradientMutation>& mutation = std::nullopt);

/// The small configuration used for gradient checks: T=8, D=16, one layer.
DecoderConfig tiny_decoder_config();
TrainingExample tiny_fixture(std::uint64_t seed);

struct ToyTrainingConfig {
    DecoderConfig decoder = toy_decoder();
    std::size_t frames = 16;
    std::size_t clips = 64;
    LossParams loss;
    double max_offset_units = kDefaultMaxOffsetUnits;

    static DecoderConfig toy_decoder();
};

struct ToyTrainingResult {
    /// Mean loss over the training clips: [0] before training, [i] after step i.
    std::vector<double> loss_history;
    DecoderWeights weights;
    DecoderConfig config;
};

/// Plain gradient descent on synthetic clips whose REG-correlated frames define
/// the ground-truth moment. Each step visits every clip once in a seeded
/// shuffled order and applies one update per clip.
ToyTrainingResult train_toy(std::uint64_t seed, std::size_t steps, double lr,
                            const ToyTrainingConfig& cfg = ToyTrainingConfig{});

}  // namespace videomind
