#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "videomind/decoder.hpp"
#include "videomind/types.hpp"
#include "videomind/verifier.hpp"

namespace videomind {

struct PlanRequest {
    VideoMeta video;
    std::string question;
    std::string prompt;

    nlohmann::json to_json() const;
};

struct GroundRequest {
    VideoMeta video;
    std::string query;
    std::string prompt;

    nlohmann::json to_json() const;
};

struct VerifyRequest {
    VideoMeta video;
    std::size_t candidate_index = 0;
    Moment candidate;
    SegmentLayout layout;
    std::string query;
    std::string prompt;

    nlohmann::json to_json() const;
};

struct AnswerRequest {
    VideoMeta video;
    std::optional<Moment> segment;  // absent: the whole video
    std::string question;
    std::optional<std::vector<std::string>> options;
    std::string prompt;

    nlohmann::json to_json() const;
};

struct VerifyResponse {
    double l_yes = 0.0;
    double l_no = 0.0;
};

/// One adapter per role behind a single interface; switching roles is
/// switching which method is called. Implementations must tolerate
/// concurrent verify() calls.
class RoleBackend {
public:
    virtual ~RoleBackend() = default;

    virtual std::string plan(const PlanRequest& req) const = 0;
    virtual std::vector<Moment> ground(const GroundRequest& req) const = 0;
    virtual VerifyResponse verify(const VerifyRequest& req) const = 0;
    virtual std::string answer(const AnswerRequest& req) const = 0;
};

/// Replays fixed outputs. Verifier probabilities are returned as
/// (log p, log(1 - p)) so that sigmoid(l_yes - l_no) recovers p.
struct BackendScript {
    std::string plan;
    std::vector<Moment> candidates;
    std::vector<double> verifier_probabilities;  // indexed by candidate
    std::string answer;
};

class ScriptedBackend : public RoleBackend {
public:
    explicit ScriptedBackend(BackendScript script) : script_(std::move(script)) {}

    std::string plan(const PlanRequest& req) const override;
    std::vector<Moment> ground(const GroundRequest& req) const override;
    VerifyResponse verify(const VerifyRequest& req) const override;
    std::string answer(const AnswerRequest& req) const override;

private:
    BackendScript script_;
};

/// Grounds with the timestamp decoder on precomputed features.
struct DecoderGrounder {
    DecoderWeights weights;
    DecoderConfig config;
    std::function<std::pair<FeatureSequence, RegToken>(const std::string& video_id)> features;
    std::size_t top_k = 5;
    double nms_threshold = 0.75;

    std::vector<Moment> ground(const VideoMeta& video) const;
};

/// Deterministic stand-in for all four roles:
///  - planner: answerer-only for "summarize" style questions, otherwise ground
///    and verify, adding the answerer when the question ends with '?';
///  - grounder: the decoder when one is attached, else seeded random moments;
///  - verifier: seeded pseudo log-likelihoods keyed by the candidate;
///  - answerer: a seeded option letter, or a fixed sentence without options.
class MockBackend : public RoleBackend {
public:
    explicit MockBackend(std::uint64_t seed, std::optional<DecoderGrounder> grounder = std::nullopt)
        : seed_(seed), grounder_(std::move(grounder)) {}

    std::string plan(const PlanRequest& req) const override;
    std::vector<Moment> ground(const GroundRequest& req) const override;
    VerifyResponse verify(const VerifyRequest& req) const override;
    std::string answer(const AnswerRequest& req) const override;

private:
    std::uint64_t key(const std::string& text) const;

    std::uint64_t seed_;
    std::optional<DecoderGrounder> grounder_;
};

/// 16 hex digits of FNV-1a over the text.
std::string digest(const std::string& text);

nlohmann::json moment_to_json(const Moment& m);
Moment moment_from_json(const nlohmann::json& j);

}  // namespace videomind
