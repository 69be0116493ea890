#include "videomind/http_backend.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <regex>

#include "videomind/error.hpp"

namespace videomind {

namespace {

constexpr double kFallbackYes = 0.99;
constexpr double kFallbackNo = 0.01;

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint split_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re))
        throw ValidationError("backend URL must look like http(s)://host[:port]/path, got: " + url);
    return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

std::string trim(std::string s) {
    const auto ws = " \t\r\n\"'.";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos)
        return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::optional<double> find_logprob(const nlohmann::json& entries, const std::string& token) {
    for (const auto& e : entries) {
        if (!e.is_object() || !e.contains("token") || !e.contains("logprob"))
            continue;
        if (trim(e["token"].get<std::string>()) == token)
            return e["logprob"].get<double>();
    }
    return std::nullopt;
}

}  // namespace

std::string response_text(const nlohmann::json& r) {
    if (r.contains("text") && r["text"].is_string())
        return r["text"].get<std::string>();
    if (r.contains("choices") && r["choices"].is_array() && !r["choices"].empty()) {
        const auto& c = r["choices"][0];
        if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string())
            return c["message"]["content"].get<std::string>();
        if (c.contains("text") && c["text"].is_string())
            return c["text"].get<std::string>();
    }
    throw BackendError("backend reply carries no generated text");
}

std::optional<VerifyResponse> response_yes_no(const nlohmann::json& r) {
    std::optional<double> yes, no;
    if (r.contains("logprobs") && r["logprobs"].is_object()) {
        const auto& lp = r["logprobs"];
        if (lp.contains("Yes") && lp["Yes"].is_number())
            yes = lp["Yes"].get<double>();
        if (lp.contains("No") && lp["No"].is_number())
            no = lp["No"].get<double>();
    } else if (r.contains("choices") && r["choices"].is_array() && !r["choices"].empty()) {
        const auto& c = r["choices"][0];
        if (c.contains("logprobs") && c["logprobs"].is_object() && c["logprobs"].contains("content") &&
            c["logprobs"]["content"].is_array() && !c["logprobs"]["content"].empty()) {
            const auto& first = c["logprobs"]["content"][0];
            nlohmann::json alts = first.value("top_logprobs", nlohmann::json::array());
            alts.push_back(first);
            yes = find_logprob(alts, "Yes");
            no = find_logprob(alts, "No");
        }
    }
    if (yes && no)
        return VerifyResponse{*yes, *no};
    if (yes)
        return VerifyResponse{*yes, std::log1p(-std::min(std::exp(*yes), 1.0 - 1e-12))};
    if (no)
        return VerifyResponse{std::log1p(-std::min(std::exp(*no), 1.0 - 1e-12)), *no};
    return std::nullopt;
}

VerifyResponse verifier_response(const nlohmann::json& r) {
    if (auto lp = response_yes_no(r))
        return *lp;
    const std::string text = trim(response_text(r));
    std::cerr << "warning: verifier reply has no token log-probabilities; scoring from text \"" << text << "\"\n";
    if (text.rfind("Yes", 0) == 0)
        return {std::log(kFallbackYes), std::log(kFallbackNo)};
    if (text.rfind("No", 0) == 0)
        return {std::log(kFallbackNo), std::log(kFallbackYes)};
    throw BackendError("verifier reply is neither Yes nor No: " + text);
}

std::vector<Moment> grounder_response(const nlohmann::json& r, double duration) {
    nlohmann::json list;
    if (r.contains("moments"))
        list = r["moments"];
    else {
        try {
            list = nlohmann::json::parse(response_text(r));
        } catch (const nlohmann::json::parse_error&) {
            throw BackendError("grounder reply has no parsable moment list");
        }
    }
    if (!list.is_array())
        throw BackendError("grounder moments must be a list");
    std::vector<Moment> out;
    for (const auto& m : list) {
        try {
            out.push_back(clamp_moment(moment_from_json(m), duration));
        } catch (const ValidationError& e) {
            throw BackendError(std::string("grounder returned a malformed moment: ") + e.what());
        } catch (const RangeError& e) {
            throw BackendError(std::string("grounder returned a malformed moment: ") + e.what());
        }
    }
    return out;
}

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    for (const auto& [role, url] : cfg_.urls)
        split_url(url);
}

nlohmann::json HttpBackend::request_body(nlohmann::json request, bool want_logprobs) const {
    request["generation"] = {{"max_tokens", cfg_.max_tokens},
                             {"temperature", cfg_.temperature},
                             {"return_logprobs", want_logprobs}};
    if (want_logprobs)
        request["generation"]["top_logprobs"] = cfg_.top_logprobs;
    return request;
}

nlohmann::json HttpBackend::post(Role role, const nlohmann::json& body) const {
    auto it = cfg_.urls.find(role);
    if (it == cfg_.urls.end())
        throw BackendError("no endpoint configured for role " + std::string(role_name(role)));
    const Endpoint ep = split_url(it->second);

    httplib::Client client(ep.origin);
    const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
    const auto usecs = static_cast<time_t>((cfg_.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (const char* token = std::getenv(cfg_.token_env.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);

    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
        auto res = client.Post(ep.path, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200)
            throw BackendError(std::string(role_name(role)) + " endpoint returned HTTP " +
                               std::to_string(res->status));
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error&) {
            throw BackendError(std::string(role_name(role)) + " endpoint returned non-JSON body");
        }
    }
    throw TransportError(std::string(role_name(role)) + " endpoint unreachable after " +
                         std::to_string(cfg_.retries + 1) + " attempts: " + last_error);
}

std::string HttpBackend::plan(const PlanRequest& req) const {
    return response_text(post(Role::planner, request_body(req.to_json(), false)));
}

std::vector<Moment> HttpBackend::ground(const GroundRequest& req) const {
    return grounder_response(post(Role::grounder, request_body(req.to_json(), false)), req.video.duration);
}

VerifyResponse HttpBackend::verify(const VerifyRequest& req) const {
    return verifier_response(post(Role::verifier, request_body(req.to_json(), true)));
}

std::string HttpBackend::answer(const AnswerRequest& req) const {
    return response_text(post(Role::answerer, request_body(req.to_json(), false)));
}

}  // namespace videomind
