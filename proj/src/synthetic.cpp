#include "videomind/synthetic.hpp"

#include <cmath>

#include "videomind/error.hpp"

namespace videomind {

namespace {

std::vector<double> unit_direction(Rng& rng, std::size_t d) {
    std::vector<double> v(d);
    double norm = 0.0;
    for (double& x : v) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : v)
        x /= norm;
    return v;
}

}  // namespace

SyntheticClip make_synthetic_clip(Rng& rng, const SyntheticSpec& spec, const std::string& video_id) {
    if (spec.frames < 4 || spec.dim == 0 || spec.height == 0 || spec.width == 0)
        throw PreconditionError("synthetic clip needs at least 4 frames and positive dims");
    const std::size_t T = spec.frames, D = spec.dim, tokens = spec.height * spec.width;
    const double duration = static_cast<double>(T) * spec.seconds_per_frame;

    const std::size_t max_len = std::max<std::size_t>(2, T / 2);
    const std::size_t len = 2 + rng.index(max_len - 1);
    const std::size_t first = rng.index(T - len + 1);

    const auto query = unit_direction(rng, D);
    const auto distractor = unit_direction(rng, D);
    const double signal = std::sqrt(static_cast<double>(D));

    SyntheticClip clip;
    FeatureSequence& f = clip.features;
    f.t = T;
    f.h = spec.height;
    f.w = spec.width;
    f.d = D;
    f.values.resize(T * tokens * D);
    for (std::size_t t = 0; t < T; ++t) {
        const bool inside = t >= first && t < first + len;
        const auto& dir = inside ? query : distractor;
        const double amp = inside ? signal : signal * spec.distractor;
        for (std::size_t k = 0; k < tokens; ++k)
            for (std::size_t c = 0; c < D; ++c)
                f.values[(t * tokens + k) * D + c] = amp * dir[c] + spec.noise * rng.normal();
        f.frame_times.push_back((static_cast<double>(t) + 0.5) * spec.seconds_per_frame);
    }

    clip.reg.values.resize(D);
    for (std::size_t c = 0; c < D; ++c)
        clip.reg.values[c] = signal * query[c] + spec.noise * rng.normal();

    AnnotationRecord& a = clip.annotation;
    a.video_id = video_id;
    a.duration = duration;
    a.query = "the highlighted event in " + video_id;
    a.question = "What happens while the highlighted event takes place?";
    a.options = std::vector<std::string>{"option one", "option two", "option three", "option four"};
    a.answer_index = static_cast<int>(rng.index(4));
    a.gt_moments.push_back(Moment{static_cast<double>(first) * spec.seconds_per_frame,
                                  static_cast<double>(first + len) * spec.seconds_per_frame, std::nullopt});
    a.validate();
    return clip;
}

}  // namespace videomind
