#include "videomind/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "videomind/error.hpp"

namespace videomind {

namespace {

std::string describe(const Moment& m) {
    return "[" + std::to_string(m.start) + ", " + std::to_string(m.end) + "]";
}

}  // namespace

Moment Moment::checked(double start, double end, std::optional<double> score) {
    Moment m{start, end, score};
    videomind::validate(m);
    return m;
}

void validate(const Moment& m) {
    if (!std::isfinite(m.start) || !std::isfinite(m.end))
        throw RangeError("moment bounds must be finite");
    if (m.start > m.end)
        throw RangeError("moment start exceeds end: " + describe(m));
    if (m.score && !(*m.score >= 0.0 && *m.score <= 1.0))
        throw RangeError("moment score outside [0,1]");
}

std::pair<double, double> moment_normalize(const Moment& m, double duration) {
    if (!(duration > 0.0))
        throw RangeError("duration must be positive");
    validate(m);
    if (m.start < 0.0 || m.end > duration)
        throw RangeError("moment " + describe(m) + " outside [0, " + std::to_string(duration) + "]");
    return {m.start / duration, m.end / duration};
}

Moment moment_denormalize(std::pair<double, double> fractions, double duration) {
    return Moment{fractions.first * duration, fractions.second * duration, std::nullopt};
}

Moment clamp_moment(const Moment& m, double duration) {
    if (!(duration > 0.0))
        throw RangeError("duration must be positive");
    Moment out = m;
    out.start = std::clamp(m.start, 0.0, duration);
    out.end = std::clamp(m.end, 0.0, duration);
    return out;
}

void VideoMeta::validate() const {
    if (video_id.empty())
        throw ValidationError("video_id must be non-empty");
    if (!(duration > 0.0) || !std::isfinite(duration))
        throw ValidationError("duration must be positive and finite");
    for (std::size_t i = 0; i < frame_timestamps.size(); ++i) {
        double t = frame_timestamps[i];
        if (!(t >= 0.0 && t <= duration))
            throw ValidationError("frame timestamp " + std::to_string(i) + " outside [0, duration]");
        if (i > 0 && !(t > frame_timestamps[i - 1]))
            throw ValidationError("frame timestamps must be strictly increasing");
    }
}

std::span<const double> FeatureSequence::token(std::size_t frame, std::size_t index) const {
    std::size_t offset = (frame * tokens_per_frame() + index) * d;
    return std::span<const double>(values).subspan(offset, d);
}

void FeatureSequence::validate() const {
    if (t == 0 || h == 0 || w == 0 || d == 0)
        throw ShapeError("feature dimensions must be positive");
    if (values.size() != t * h * w * d)
        throw ShapeError("feature values length " + std::to_string(values.size()) +
                         " does not match t*h*w*d = " + std::to_string(t * h * w * d));
    if (frame_times.size() != t)
        throw ShapeError("frame_times length must equal t");
    for (double v : values)
        if (!std::isfinite(v))
            throw NumericError("non-finite feature value");
    for (std::size_t i = 1; i < frame_times.size(); ++i)
        if (frame_times[i] < frame_times[i - 1])
            throw ValidationError("frame_times must be ascending");
}

void RegToken::validate(std::size_t expected_dim) const {
    if (values.size() != expected_dim)
        throw ShapeError("REG token length " + std::to_string(values.size()) +
                         " does not match feature dim " + std::to_string(expected_dim));
    for (double v : values)
        if (!std::isfinite(v))
            throw NumericError("non-finite REG token value");
}

void AnnotationRecord::validate() const {
    if (video_id.empty())
        throw ValidationError("video_id must be non-empty");
    if (!(duration > 0.0) || !std::isfinite(duration))
        throw ValidationError("duration must be positive");
    for (std::size_t i = 0; i < gt_moments.size(); ++i) {
        const Moment& m = gt_moments[i];
        videomind::validate(m);
        if (m.start < 0.0 || m.end > duration)
            throw ValidationError("gt_moments[" + std::to_string(i) + "] exceeds duration");
    }
    if (answer_index && options) {
        if (*answer_index < 0 || static_cast<std::size_t>(*answer_index) >= options->size())
            throw ValidationError("answer_index out of range of options");
    }
}

}  // namespace videomind
