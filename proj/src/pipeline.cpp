#include "videomind/pipeline.hpp"

#include <algorithm>
#include <future>
#include <numeric>

#include "videomind/prompts.hpp"

namespace videomind {

namespace {

class Recorder {
public:
    std::vector<TraceEntry> trace;

    template <class F>
    auto call(Role role, const nlohmann::json& input, F&& f) {
        try {
            auto out = f();
            trace.push_back({role, digest(input.dump()), digest(output_json(out).dump())});
            return out;
        } catch (const PipelineError&) {
            throw;
        } catch (const std::exception& e) {
            throw PipelineError(role, trace, std::string(role_name(role)) + " failed: " + e.what());
        }
    }

    static nlohmann::json output_json(const std::string& s) { return s; }
    static nlohmann::json output_json(const VerifyResponse& v) { return {v.l_yes, v.l_no}; }
    static nlohmann::json output_json(const std::vector<Moment>& ms) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& m : ms)
            j.push_back(moment_to_json(m));
        return j;
    }
};

std::vector<Moment> prepare_candidates(std::vector<Moment> raw, const VideoMeta& video, const PipelineConfig& cfg) {
    for (auto& m : raw) {
        validate(m);
        m = clamp_moment(m, video.duration);
    }
    // Zero-length moments cannot be zoomed or verified.
    std::erase_if(raw, [](const Moment& m) { return !(m.length() > 0.0); });
    const bool scored = std::all_of(raw.begin(), raw.end(), [](const Moment& m) { return m.score.has_value(); });
    if (scored)
        raw = nms(raw, cfg.nms_threshold);
    return top_k(raw, cfg.top_k);
}

}  // namespace

PipelineResult run_pipeline(const PipelineInput& input, const RoleBackend& backend, const PipelineConfig& cfg) {
    input.video.validate();
    Recorder rec;
    PipelineResult result;

    PlanRequest plan_req{input.video, input.question, render_prompt(Role::planner, {.question = input.question})};
    const std::string raw_plan = rec.call(Role::planner, plan_req.to_json(), [&] { return backend.plan(plan_req); });
    try {
        result.plan = parse_plan(raw_plan);
    } catch (const Error& e) {
        throw PipelineError(Role::planner, rec.trace, std::string("planner output rejected: ") + e.what());
    }

    std::optional<Moment> answer_segment;
    bool answer = result.plan.contains(Role::answerer);
    if (result.plan.contains(Role::grounder)) {
        const std::string query = result.plan.grounding_query().value_or(input.question);
        GroundRequest ground_req{input.video, query, render_prompt(Role::grounder, {.query = query})};
        auto raw = rec.call(Role::grounder, ground_req.to_json(), [&] { return backend.ground(ground_req); });
        try {
            result.candidates = prepare_candidates(std::move(raw), input.video, cfg);
        } catch (const Error& e) {
            throw PipelineError(Role::grounder, rec.trace, std::string("grounder output rejected: ") + e.what());
        }

        if (result.candidates.empty()) {
            result.degraded = true;
            answer = true;
        } else {
            const std::string verify_prompt = render_prompt(Role::verifier, {.query = query});
            std::vector<VerifyRequest> requests;
            for (std::size_t i = 0; i < result.candidates.size(); ++i) {
                const Moment& c = result.candidates[i];
                requests.push_back({input.video, i, c,
                                    make_segment_layout(c, input.video.duration, cfg.frames_per_segment,
                                                        cfg.zoom_ratio),
                                    query, verify_prompt});
            }

            // Bounded fan-out; results are gathered by candidate index so
            // completion order never reaches the trace or the argmax.
            std::vector<std::optional<VerifyResponse>> responses(requests.size());
            std::vector<std::string> errors(requests.size());
            const std::size_t width = std::max<std::size_t>(1, cfg.verifier_concurrency);
            for (std::size_t begin = 0; begin < requests.size(); begin += width) {
                std::vector<std::future<void>> batch;
                for (std::size_t i = begin; i < std::min(requests.size(), begin + width); ++i)
                    batch.push_back(std::async(std::launch::async, [&, i] {
                        try {
                            responses[i] = backend.verify(requests[i]);
                        } catch (const std::exception& e) {
                            errors[i] = e.what();
                        }
                    }));
                for (auto& f : batch)
                    f.get();
            }
            for (std::size_t i = 0; i < requests.size(); ++i) {
                if (!responses[i])
                    throw PipelineError(Role::verifier, rec.trace, "verifier failed: " + errors[i]);
                rec.trace.push_back({Role::verifier, digest(requests[i].to_json().dump()),
                                     digest(Recorder::output_json(*responses[i]).dump())});
                try {
                    result.verifier_scores.push_back(score_candidate(responses[i]->l_yes, responses[i]->l_no, i));
                } catch (const Error& e) {
                    throw PipelineError(Role::verifier, rec.trace, std::string("verifier output rejected: ") + e.what());
                }
            }
            auto [best, index] = select_best(result.verifier_scores, result.candidates);
            result.selected_moment = best;
            answer_segment = requests[index].layout.expanded;
            answer_segment->score.reset();
        }
    }

    if (answer) {
        AnswerRequest ans_req{input.video, answer_segment, input.question, input.options,
                              render_prompt(Role::answerer, {.question = input.question,
                                                             .duration = answer_segment ? answer_segment->length()
                                                                                        : input.video.duration,
                                                             .subtitles = input.subtitles,
                                                             .options = input.options})};
        result.answer = rec.call(Role::answerer, ans_req.to_json(), [&] { return backend.answer(ans_req); });
        result.answer_segment = answer_segment;
    }
    result.trace = std::move(rec.trace);
    return result;
}

std::vector<Moment> PipelineResult::ranked_moments() const {
    if (verifier_scores.size() != candidates.size() || candidates.empty())
        return candidates;
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return verifier_scores[a].score > verifier_scores[b].score;
    });
    std::vector<Moment> out;
    for (std::size_t i : order) {
        Moment m = candidates[i];
        m.score = verifier_scores[i].score;
        out.push_back(m);
    }
    return out;
}

nlohmann::json PipelineResult::to_json() const {
    nlohmann::json j;
    j["answer"] = answer ? nlohmann::json(*answer) : nlohmann::json(nullptr);
    j["selected_moment"] = selected_moment ? moment_to_json(*selected_moment) : nlohmann::json(nullptr);
    j["answer_segment"] = answer_segment ? moment_to_json(*answer_segment) : nlohmann::json(nullptr);
    j["candidates"] = nlohmann::json::array();
    for (const auto& c : candidates)
        j["candidates"].push_back(moment_to_json(c));
    j["verifier_scores"] = nlohmann::json::array();
    for (const auto& s : verifier_scores)
        j["verifier_scores"].push_back(
            {{"candidate_index", s.candidate_index}, {"l_yes", s.l_yes}, {"l_no", s.l_no}, {"score", s.score}});
    j["plan"] = plan_to_json(plan);
    j["trace"] = nlohmann::json::array();
    for (const auto& t : trace)
        j["trace"].push_back({{"role", role_name(t.role)}, {"input", t.input_digest}, {"output", t.output_digest}});
    j["degraded"] = degraded;
    return j;
}

}  // namespace videomind
