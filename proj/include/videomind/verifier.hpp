#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "videomind/types.hpp"

namespace videomind {

struct VerifierScore {
    std::size_t candidate_index = 0;
    double l_yes = 0.0;
    double l_no = 0.0;
    double score = 0.5;  // sigmoid(l_yes - l_no)
};

/// Where the <SEG-START>/<SEG-END> markers sit among the frames of a zoomed
/// segment. Markers go before frame start_insert_index and before frame
/// end_insert_index (i.e. after frame end_insert_index - 1).
struct SegmentLayout {
    Moment expanded;
    std::vector<double> frame_times;
    std::size_t start_insert_index = 0;
    std::size_t end_insert_index = 0;
    bool empty_span = false;  // no sampled frame falls inside the original moment
};

inline constexpr double kDefaultZoomRatio = 0.5;
inline constexpr std::size_t kDefaultFramesPerSegment = 32;
inline constexpr double kVerifierLabelIou = 0.5;

/// Moves each boundary outward by ratio * length and clamps to the video.
Moment zoom_in(const Moment& m, double duration, double ratio = kDefaultZoomRatio);

/// n frame times at the centres of n equal bins over the segment.
std::vector<double> sample_segment_frames(const Moment& segment, std::size_t n);

SegmentLayout layout_segment_tokens(const Moment& original, std::span<const double> frame_times);

/// zoom_in, sample_segment_frames and layout_segment_tokens in one go.
SegmentLayout make_segment_layout(const Moment& original, double duration, std::size_t frames,
                                  double ratio = kDefaultZoomRatio);

VerifierScore score_candidate(double l_yes, double l_no, std::size_t candidate_index = 0);

/// Highest score wins; ties go to the lower candidate index.
std::pair<Moment, std::size_t> select_best(std::span<const VerifierScore> scores, std::span<const Moment> cands);

bool assign_verifier_label(const Moment& cand, const Moment& gt);

}  // namespace videomind
