#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "videomind/tensor.hpp"
#include "videomind/types.hpp"

namespace videomind {

struct SyntheticSpec {
    std::size_t frames = 16;
    std::size_t height = 2;
    std::size_t width = 2;
    std::size_t dim = 8;
    double seconds_per_frame = 2.0;
    double noise = 0.3;
    /// Amplitude of the shared off-query direction on background frames,
    /// relative to the query signal.
    double distractor = 0.0;
};

struct SyntheticClip {
    AnnotationRecord annotation;
    FeatureSequence features;
    RegToken reg;
};

/// One clip: tokens of frames inside the ground-truth moment carry the REG
/// token's direction, everything else is noise around a distractor direction.
/// The moment is frame aligned and spans 2..frames/2 frames.
SyntheticClip make_synthetic_clip(Rng& rng, const SyntheticSpec& spec, const std::string& video_id);

}  // namespace videomind
