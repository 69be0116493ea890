#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace videomind {

/// A closed time interval in seconds, optionally carrying a confidence.
struct Moment {
    double start = 0.0;
    double end = 0.0;
    std::optional<double> score;

    double length() const noexcept { return end - start; }

    /// Builds a moment and enforces start <= end, finiteness and score in [0,1].
    static Moment checked(double start, double end, std::optional<double> score = std::nullopt);

    friend bool operator==(const Moment&, const Moment&) = default;
};

/// Throws RangeError unless the moment is well formed.
void validate(const Moment& m);

/// (start/duration, end/duration); the moment must lie inside [0, duration].
std::pair<double, double> moment_normalize(const Moment& m, double duration);

/// Inverse of moment_normalize. The score is not carried.
Moment moment_denormalize(std::pair<double, double> fractions, double duration);

/// Clips both ends into [0, duration]. Never increases the length.
Moment clamp_moment(const Moment& m, double duration);

struct VideoMeta {
    std::string video_id;
    double duration = 0.0;
    std::vector<double> frame_timestamps;

    void validate() const;
};

/// Per-frame hidden-state grid, row-major over (t, h, w, d).
struct FeatureSequence {
    std::size_t t = 0;
    std::size_t h = 1;
    std::size_t w = 1;
    std::size_t d = 0;
    std::vector<double> values;
    std::vector<double> frame_times;

    std::size_t tokens_per_frame() const noexcept { return h * w; }
    std::span<const double> token(std::size_t frame, std::size_t index) const;

    void validate() const;
};

struct RegToken {
    std::vector<double> values;

    void validate(std::size_t expected_dim) const;
};

struct AnnotationRecord {
    std::string video_id;
    double duration = 0.0;
    std::string query;
    std::optional<std::string> question;
    std::optional<std::vector<std::string>> options;
    std::optional<int> answer_index;
    std::optional<std::string> subtitles;
    std::vector<Moment> gt_moments;

    void validate() const;
};

}  // namespace videomind
