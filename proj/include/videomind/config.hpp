#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "videomind/decoder.hpp"
#include "videomind/http_backend.hpp"
#include "videomind/pipeline.hpp"
#include "videomind/training.hpp"

namespace videomind {

struct EvalConfig {
    std::vector<double> iou_thresholds{0.3, 0.5, 0.7};
    std::vector<double> cg_thresholds{0.1, 0.2, 0.3, 0.4, 0.5};
    double gqa_iop_threshold = 0.5;
};

struct GradcheckConfig {
    double tolerance = 1e-6;
    double eps = 1e-5;
};

/// Every numeric default of the toolkit, overridable from one JSON file.
/// Unknown keys are rejected so typos surface as errors.
struct ToolkitConfig {
    DecoderConfig decoder;
    LossParams loss;
    double max_offset_units = kDefaultMaxOffsetUnits;
    PipelineConfig pipeline;
    HttpBackendConfig backend;
    EvalConfig eval;
    GradcheckConfig gradcheck;
    std::optional<std::string> features_dir;  // relative paths resolve against the config file
    std::optional<std::string> weights;
    std::uint64_t seed = 0;
    std::size_t batch_concurrency = 1;

    void validate() const;
};

nlohmann::json decoder_config_to_json(const DecoderConfig& c);
/// Missing keys keep the defaults in `base`.
DecoderConfig decoder_config_from_json(const nlohmann::json& j, DecoderConfig base = {});

nlohmann::json config_to_json(const ToolkitConfig& c);
ToolkitConfig config_from_json(const nlohmann::json& j);
ToolkitConfig load_config(const std::filesystem::path& path);

}  // namespace videomind
