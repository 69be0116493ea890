#include "videomind/config.hpp"

#include <fstream>
#include <set>

#include "videomind/error.hpp"

namespace videomind {

using nlohmann::json;

namespace {

class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object())
            throw ValidationError(where_ + " must be a JSON object");
    }

    template <class T>
    void get(const char* key, T& slot) {
        seen_.insert(key);
        if (!j_.contains(key))
            return;
        try {
            slot = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ValidationError(where_ + "." + key + " has the wrong type");
        }
    }

    template <class T>
    void get(const char* key, std::optional<T>& slot) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null())
            return;
        T v{};
        get(key, v);
        slot = std::move(v);
    }

    const json* object(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k))
                throw ValidationError("unknown config key " + where_ + "." + k);
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void check_thresholds(const std::vector<double>& ts, const char* name) {
    if (ts.empty())
        throw ValidationError(std::string(name) + " must not be empty");
    for (double t : ts)
        if (!(t >= 0.0 && t <= 1.0))
            throw ValidationError(std::string(name) + " entries must lie in [0,1]");
}

}  // namespace

json decoder_config_to_json(const DecoderConfig& c) {
    return {{"d_model", c.d_model},   {"d_input", c.d_input},   {"n_layers", c.n_layers},
            {"n_heads", c.n_heads},   {"pyramid_levels", c.pyramid_levels},
            {"ffn_mult", c.ffn_mult}, {"pe_base", c.pe_base}};
}

DecoderConfig decoder_config_from_json(const json& j, DecoderConfig c) {
    Reader r(j, "decoder");
    r.get("d_model", c.d_model);
    r.get("d_input", c.d_input);
    r.get("n_layers", c.n_layers);
    r.get("n_heads", c.n_heads);
    r.get("pyramid_levels", c.pyramid_levels);
    r.get("ffn_mult", c.ffn_mult);
    r.get("pe_base", c.pe_base);
    r.finish();
    return c;
}

void ToolkitConfig::validate() const {
    if (decoder.d_input != 0)
        decoder.validate();
    loss.validate();
    if (!(max_offset_units > 0.0))
        throw ValidationError("max_offset_units must be positive");
    if (pipeline.top_k == 0)
        throw ValidationError("pipeline.top_k must be positive");
    if (!(pipeline.nms_threshold >= 0.0 && pipeline.nms_threshold <= 1.0))
        throw ValidationError("pipeline.nms_threshold must lie in [0,1]");
    if (!(pipeline.zoom_ratio >= 0.0))
        throw ValidationError("pipeline.zoom_ratio must be non-negative");
    if (pipeline.frames_per_segment == 0 || pipeline.verifier_concurrency == 0)
        throw ValidationError("pipeline frame and concurrency limits must be positive");
    if (!(backend.timeout_seconds > 0.0) || backend.retries < 0)
        throw ValidationError("backend timeout must be positive and retries non-negative");
    check_thresholds(eval.iou_thresholds, "eval.iou_thresholds");
    check_thresholds(eval.cg_thresholds, "eval.cg_thresholds");
    if (!(eval.gqa_iop_threshold >= 0.0 && eval.gqa_iop_threshold <= 1.0))
        throw ValidationError("eval.gqa_iop_threshold must lie in [0,1]");
    if (!(gradcheck.tolerance > 0.0) || !(gradcheck.eps > 0.0))
        throw ValidationError("gradcheck tolerance and eps must be positive");
    if (batch_concurrency == 0)
        throw ValidationError("batch_concurrency must be positive");
}

json config_to_json(const ToolkitConfig& c) {
    json urls = json::object();
    for (const auto& [role, url] : c.backend.urls)
        urls[std::string(role_name(role))] = url;
    json j = {
        {"decoder", decoder_config_to_json(c.decoder)},
        {"loss",
         {{"lambda_cls", c.loss.lambda_cls},
          {"lambda_reg", c.loss.lambda_reg},
          {"lambda_con", c.loss.lambda_con},
          {"alpha", c.loss.alpha},
          {"gamma", c.loss.gamma},
          {"tau", c.loss.tau}}},
        {"max_offset_units", c.max_offset_units},
        {"pipeline",
         {{"top_k", c.pipeline.top_k},
          {"nms_threshold", c.pipeline.nms_threshold},
          {"zoom_ratio", c.pipeline.zoom_ratio},
          {"frames_per_segment", c.pipeline.frames_per_segment},
          {"verifier_concurrency", c.pipeline.verifier_concurrency}}},
        {"backend",
         {{"urls", urls},
          {"token_env", c.backend.token_env},
          {"timeout_seconds", c.backend.timeout_seconds},
          {"retries", c.backend.retries},
          {"max_tokens", c.backend.max_tokens},
          {"temperature", c.backend.temperature},
          {"top_logprobs", c.backend.top_logprobs}}},
        {"eval",
         {{"iou_thresholds", c.eval.iou_thresholds},
          {"cg_thresholds", c.eval.cg_thresholds},
          {"gqa_iop_threshold", c.eval.gqa_iop_threshold}}},
        {"gradcheck", {{"tolerance", c.gradcheck.tolerance}, {"eps", c.gradcheck.eps}}},
        {"seed", c.seed},
        {"batch_concurrency", c.batch_concurrency},
    };
    if (c.features_dir)
        j["features_dir"] = *c.features_dir;
    if (c.weights)
        j["weights"] = *c.weights;
    return j;
}

ToolkitConfig config_from_json(const json& j) {
    ToolkitConfig c;
    Reader top(j, "config");
    if (const json* d = top.object("decoder"))
        c.decoder = decoder_config_from_json(*d, c.decoder);
    if (const json* l = top.object("loss")) {
        Reader r(*l, "loss");
        r.get("lambda_cls", c.loss.lambda_cls);
        r.get("lambda_reg", c.loss.lambda_reg);
        r.get("lambda_con", c.loss.lambda_con);
        r.get("alpha", c.loss.alpha);
        r.get("gamma", c.loss.gamma);
        r.get("tau", c.loss.tau);
        r.finish();
    }
    top.get("max_offset_units", c.max_offset_units);
    if (const json* p = top.object("pipeline")) {
        Reader r(*p, "pipeline");
        r.get("top_k", c.pipeline.top_k);
        r.get("nms_threshold", c.pipeline.nms_threshold);
        r.get("zoom_ratio", c.pipeline.zoom_ratio);
        r.get("frames_per_segment", c.pipeline.frames_per_segment);
        r.get("verifier_concurrency", c.pipeline.verifier_concurrency);
        r.finish();
    }
    if (const json* b = top.object("backend")) {
        Reader r(*b, "backend");
        if (const json* urls = r.object("urls")) {
            if (!urls->is_object())
                throw ValidationError("backend.urls must be an object keyed by role");
            for (const auto& [name, url] : urls->items()) {
                auto role = role_from_name(name);
                if (!role || !url.is_string())
                    throw ValidationError("backend.urls." + name + " is not a role URL");
                c.backend.urls[*role] = url.get<std::string>();
            }
        }
        r.get("token_env", c.backend.token_env);
        r.get("timeout_seconds", c.backend.timeout_seconds);
        r.get("retries", c.backend.retries);
        r.get("max_tokens", c.backend.max_tokens);
        r.get("temperature", c.backend.temperature);
        r.get("top_logprobs", c.backend.top_logprobs);
        r.finish();
    }
    if (const json* e = top.object("eval")) {
        Reader r(*e, "eval");
        r.get("iou_thresholds", c.eval.iou_thresholds);
        r.get("cg_thresholds", c.eval.cg_thresholds);
        r.get("gqa_iop_threshold", c.eval.gqa_iop_threshold);
        r.finish();
    }
    if (const json* g = top.object("gradcheck")) {
        Reader r(*g, "gradcheck");
        r.get("tolerance", c.gradcheck.tolerance);
        r.get("eps", c.gradcheck.eps);
        r.finish();
    }
    top.get("features_dir", c.features_dir);
    top.get("weights", c.weights);
    top.get("seed", c.seed);
    top.get("batch_concurrency", c.batch_concurrency);
    top.finish();
    c.validate();
    return c;
}

ToolkitConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    ToolkitConfig c = config_from_json(j);
    const auto base = path.parent_path();
    auto resolve = [&](std::optional<std::string>& p) {
        if (p && std::filesystem::path(*p).is_relative())
            p = (base / *p).lexically_normal().string();
    };
    resolve(c.features_dir);
    resolve(c.weights);
    return c;
}

}  // namespace videomind
