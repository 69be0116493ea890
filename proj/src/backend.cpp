#include "videomind/backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "videomind/error.hpp"
#include "videomind/moments.hpp"
#include "videomind/plan.hpp"
#include "videomind/prompts.hpp"

namespace videomind {

namespace {

nlohmann::json video_json(const VideoMeta& v) {
    return {{"video_id", v.video_id}, {"duration", v.duration}};
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

std::string digest(const std::string& text) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(text.data());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(std::span<const unsigned char>(bytes, text.size()))));
    return buf;
}

nlohmann::json moment_to_json(const Moment& m) {
    nlohmann::json j = nlohmann::json::array({m.start, m.end});
    if (m.score)
        j.push_back(*m.score);
    return j;
}

Moment moment_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() < 2 || j.size() > 3)
        throw ValidationError("a moment is [start, end] or [start, end, score]");
    for (const auto& v : j)
        if (!v.is_number())
            throw ValidationError("moment entries must be numbers");
    std::optional<double> score;
    if (j.size() == 3)
        score = j[2].get<double>();
    return Moment::checked(j[0].get<double>(), j[1].get<double>(), score);
}

nlohmann::json PlanRequest::to_json() const {
    return {{"role", "planner"}, {"media", video_json(video)}, {"question", question}, {"prompt", prompt}};
}

nlohmann::json GroundRequest::to_json() const {
    return {{"role", "grounder"}, {"media", video_json(video)}, {"query", query}, {"prompt", prompt}};
}

nlohmann::json VerifyRequest::to_json() const {
    nlohmann::json media = video_json(video);
    media["segment"] = moment_to_json(layout.expanded);
    media["frame_times"] = layout.frame_times;
    media["seg_start_index"] = layout.start_insert_index;
    media["seg_end_index"] = layout.end_insert_index;
    return {{"role", "verifier"},
            {"media", std::move(media)},
            {"candidate_index", candidate_index},
            {"candidate", moment_to_json(candidate)},
            {"query", query},
            {"prompt", prompt}};
}

nlohmann::json AnswerRequest::to_json() const {
    nlohmann::json media = video_json(video);
    if (segment)
        media["segment"] = moment_to_json(*segment);
    nlohmann::json j{{"role", "answerer"}, {"media", std::move(media)}, {"question", question}, {"prompt", prompt}};
    if (options)
        j["options"] = *options;
    return j;
}

std::string ScriptedBackend::plan(const PlanRequest&) const { return script_.plan; }

std::vector<Moment> ScriptedBackend::ground(const GroundRequest&) const { return script_.candidates; }

VerifyResponse ScriptedBackend::verify(const VerifyRequest& req) const {
    if (req.candidate_index >= script_.verifier_probabilities.size())
        throw InputError("script has no verifier score for candidate " + std::to_string(req.candidate_index));
    const double p = script_.verifier_probabilities[req.candidate_index];
    if (!(p > 0.0 && p < 1.0))
        throw InputError("scripted verifier probabilities must lie in (0,1)");
    return {std::log(p), std::log1p(-p)};
}

std::string ScriptedBackend::answer(const AnswerRequest&) const { return script_.answer; }

std::vector<Moment> DecoderGrounder::ground(const VideoMeta& video) const {
    if (!features)
        throw InputError("decoder grounder has no feature source");
    auto [seq, reg] = features(video.video_id);
    ForwardTrace trace = decoder_forward(seq, reg, weights, config);
    return decode_candidates(trace, video.duration, top_k, nms_threshold);
}

std::uint64_t MockBackend::key(const std::string& text) const {
    const auto* bytes = reinterpret_cast<const unsigned char*>(text.data());
    return fnv1a(std::span<const unsigned char>(bytes, text.size()), 0xcbf29ce484222325ULL ^ seed_);
}

std::string MockBackend::plan(const PlanRequest& req) const {
    const std::string q = lower(req.question);
    ReasoningPlan p;
    if (q.find("summar") != std::string::npos)
        p = ReasoningPlan::answer_only();
    else if (!q.empty() && q.back() == '?')
        p = ReasoningPlan::ground_verify_answer(req.question);
    else
        p = ReasoningPlan::ground_verify(req.question);
    return serialize_plan(p);
}

std::vector<Moment> MockBackend::ground(const GroundRequest& req) const {
    if (grounder_)
        return grounder_->ground(req.video);
    Rng rng(key("ground|" + req.video.video_id + "|" + req.query));
    std::vector<Moment> out;
    for (int i = 0; i < 8; ++i) {
        double a = rng.uniform(0.0, req.video.duration), b = rng.uniform(0.0, req.video.duration);
        if (a > b)
            std::swap(a, b);
        out.push_back(Moment{a, b, rng.uniform()});
    }
    return out;
}

VerifyResponse MockBackend::verify(const VerifyRequest& req) const {
    Rng rng(key("verify|" + req.video.video_id + "|" + format_seconds(req.candidate.start) + "|" +
                format_seconds(req.candidate.end)));
    return {rng.normal(), rng.normal()};
}

std::string MockBackend::answer(const AnswerRequest& req) const {
    if (!req.options || req.options->empty())
        return "The video shows the queried event.";
    std::string k = "answer|" + req.video.video_id + "|" + req.question;
    if (req.segment)
        k += "|" + format_seconds(req.segment->start) + "|" + format_seconds(req.segment->end);
    const auto idx = key(k) % req.options->size();
    return std::string(1, static_cast<char>('A' + idx));
}

}  // namespace videomind
