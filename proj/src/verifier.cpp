#include "videomind/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "videomind/error.hpp"
#include "videomind/moments.hpp"

namespace videomind {

Moment zoom_in(const Moment& m, double duration, double ratio) {
    validate(m);
    if (!(duration > 0.0))
        throw RangeError("duration must be positive");
    if (m.start < 0.0 || m.end > duration)
        throw RangeError("moment lies outside the video");
    if (!(m.length() > 0.0))
        throw PreconditionError("zoom_in needs a moment of positive length");
    const double pad = ratio * m.length();
    return clamp_moment(Moment{m.start - pad, m.end + pad, m.score}, duration);
}

std::vector<double> sample_segment_frames(const Moment& segment, std::size_t n) {
    std::vector<double> times(n);
    const double step = segment.length() / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        times[i] = segment.start + (static_cast<double>(i) + 0.5) * step;
    return times;
}

SegmentLayout layout_segment_tokens(const Moment& original, std::span<const double> frame_times) {
    if (!std::is_sorted(frame_times.begin(), frame_times.end()))
        throw PreconditionError("frame times must be ascending");
    SegmentLayout layout;
    layout.frame_times.assign(frame_times.begin(), frame_times.end());
    layout.expanded = frame_times.empty() ? original : Moment{frame_times.front(), frame_times.back(), std::nullopt};

    const auto first = std::lower_bound(frame_times.begin(), frame_times.end(), original.start);
    const auto past_last = std::upper_bound(frame_times.begin(), frame_times.end(), original.end);
    layout.start_insert_index = static_cast<std::size_t>(first - frame_times.begin());
    layout.end_insert_index = static_cast<std::size_t>(past_last - frame_times.begin());
    if (layout.end_insert_index <= layout.start_insert_index) {
        layout.end_insert_index = layout.start_insert_index;
        layout.empty_span = true;
    }
    return layout;
}

SegmentLayout make_segment_layout(const Moment& original, double duration, std::size_t frames, double ratio) {
    const Moment expanded = zoom_in(original, duration, ratio);
    const auto times = sample_segment_frames(expanded, frames);
    SegmentLayout layout = layout_segment_tokens(original, times);
    layout.expanded = expanded;
    return layout;
}

VerifierScore score_candidate(double l_yes, double l_no, std::size_t candidate_index) {
    if (!std::isfinite(l_yes) || !std::isfinite(l_no))
        throw NumericError("verifier log-likelihoods must be finite");
    const double z = l_yes - l_no;
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return {candidate_index, l_yes, l_no, s};
}

std::pair<Moment, std::size_t> select_best(std::span<const VerifierScore> scores, std::span<const Moment> cands) {
    if (scores.empty() || cands.empty())
        throw PreconditionError("select_best needs at least one candidate");
    if (scores.size() != cands.size())
        throw PreconditionError("select_best: " + std::to_string(scores.size()) + " scores for " +
                                std::to_string(cands.size()) + " candidates");
    const VerifierScore* best = &scores[0];
    for (const VerifierScore& s : scores) {
        if (s.candidate_index >= cands.size())
            throw PreconditionError("verifier score refers to a missing candidate");
        if (s.score > best->score || (s.score == best->score && s.candidate_index < best->candidate_index))
            best = &s;
    }
    return {cands[best->candidate_index], best->candidate_index};
}

bool assign_verifier_label(const Moment& cand, const Moment& gt) {
    return interval_iou(cand, gt) >= kVerifierLabelIou;
}

}  // namespace videomind
