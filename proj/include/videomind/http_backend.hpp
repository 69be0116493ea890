#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "videomind/backend.hpp"
#include "videomind/plan.hpp"

namespace videomind {

inline constexpr const char* kDefaultTokenEnv = "VIDEOMIND_API_TOKEN";

struct HttpBackendConfig {
    std::map<Role, std::string> urls;  // http(s)://host[:port]/path per role
    std::string token_env = kDefaultTokenEnv;
    double timeout_seconds = 60.0;
    int retries = 2;  // transport failures only
    int max_tokens = 256;
    double temperature = 0.0;
    int top_logprobs = 5;
};

/// Posts one JSON request per role call:
///   {role, prompt, media, ...role fields, generation: {max_tokens,
///    temperature, return_logprobs, top_logprobs}}
/// and accepts either a flat reply {text, logprobs: {Yes, No}, moments} or an
/// OpenAI-style chat completion with choices[0].logprobs.content.
class HttpBackend : public RoleBackend {
public:
    explicit HttpBackend(HttpBackendConfig cfg);

    std::string plan(const PlanRequest& req) const override;
    std::vector<Moment> ground(const GroundRequest& req) const override;
    VerifyResponse verify(const VerifyRequest& req) const override;
    std::string answer(const AnswerRequest& req) const override;

    /// The request body that would be sent, without posting it.
    nlohmann::json request_body(nlohmann::json request, bool want_logprobs) const;

private:
    nlohmann::json post(Role role, const nlohmann::json& body) const;

    HttpBackendConfig cfg_;
};

/// Generated text from either reply shape.
std::string response_text(const nlohmann::json& response);

/// First-token log-likelihoods of "Yes" and "No", when the reply carries them.
/// A single alternative is completed with log(1 - p).
std::optional<VerifyResponse> response_yes_no(const nlohmann::json& response);

/// response_yes_no, falling back to the generated text: "Yes" -> score 0.99,
/// "No" -> 0.01. Throws BackendError when neither is available.
VerifyResponse verifier_response(const nlohmann::json& response);

/// Candidates from a "moments" field or a JSON list in the generated text.
std::vector<Moment> grounder_response(const nlohmann::json& response, double duration);

class BackendError : public Error {
public:
    using Error::Error;
};

}  // namespace videomind
