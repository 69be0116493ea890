#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "videomind/backend.hpp"
#include "videomind/error.hpp"
#include "videomind/moments.hpp"
#include "videomind/plan.hpp"
#include "videomind/verifier.hpp"

namespace videomind {

struct PipelineConfig {
    std::size_t top_k = 5;
    double nms_threshold = kDefaultNmsThreshold;
    double zoom_ratio = kDefaultZoomRatio;
    std::size_t frames_per_segment = kDefaultFramesPerSegment;
    std::size_t verifier_concurrency = 4;
};

struct TraceEntry {
    Role role = Role::planner;
    std::string input_digest;
    std::string output_digest;
};

struct PipelineInput {
    VideoMeta video;
    std::string question;
    std::optional<std::vector<std::string>> options;
    std::optional<std::string> subtitles;
};

struct PipelineResult {
    std::optional<std::string> answer;
    std::optional<Moment> selected_moment;  // element of candidates
    std::vector<Moment> candidates;
    std::vector<VerifierScore> verifier_scores;
    std::optional<Moment> answer_segment;  // zoomed segment given to the answerer
    ReasoningPlan plan;
    std::vector<TraceEntry> trace;
    bool degraded = false;  // grounder returned nothing; answered on the whole video

    nlohmann::json to_json() const;
    /// Candidates re-ranked by verifier score (ties by grounder rank), scored
    /// with the verifier confidence; the grounder's order when unverified.
    std::vector<Moment> ranked_moments() const;
};

class PipelineError : public Error {
public:
    PipelineError(Role role, std::vector<TraceEntry> trace, const std::string& what)
        : Error(what), role_(role), trace_(std::move(trace)) {}

    Role role() const noexcept { return role_; }
    const std::vector<TraceEntry>& trace() const noexcept { return trace_; }

private:
    Role role_;
    std::vector<TraceEntry> trace_;
};

/// Planner -> [grounder -> zoom-in + verifier per candidate -> argmax] ->
/// [answerer on the selected zoomed segment, or the whole video].
PipelineResult run_pipeline(const PipelineInput& input, const RoleBackend& backend,
                            const PipelineConfig& cfg = PipelineConfig{});

}  // namespace videomind
