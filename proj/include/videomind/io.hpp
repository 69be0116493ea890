#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "videomind/plan.hpp"
#include "videomind/tensor.hpp"
#include "videomind/types.hpp"

namespace videomind {

using NamedTensors = std::vector<std::pair<std::string, Matrix>>;

/// A JSON manifest {blob, tensors: [{name, shape, offset}], ...extra} next to
/// a flat little-endian f64 blob, row-major, tensors in manifest order.
/// The blob lives beside the manifest as <stem>.bin.
struct TensorBundle {
    nlohmann::json extra = nlohmann::json::object();
    NamedTensors tensors;

    const Matrix& at(std::string_view name) const;
};

void write_tensor_bundle(const std::filesystem::path& manifest, const TensorBundle& bundle);
TensorBundle read_tensor_bundle(const std::filesystem::path& manifest);

nlohmann::json annotation_to_json(const AnnotationRecord& r);
/// Throws ValidationError naming the offending field.
AnnotationRecord annotation_from_json(const nlohmann::json& j);

/// Errors name the 1-based line number.
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path, const std::vector<AnnotationRecord>& records);

/// One line of a predictions file.
struct PredictionRecord {
    std::string video_id;
    std::vector<Moment> moments;  // ranked, every one scored
    std::optional<std::string> answer;
    ReasoningPlan plan;
    bool degraded = false;

    void validate() const;
};

nlohmann::json prediction_to_json(const PredictionRecord& p);
PredictionRecord prediction_from_json(const nlohmann::json& j);

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);
void save_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);

/// Features are stored as tensors "features" ((t*h*w) x d) and "reg" (1 x d);
/// the manifest carries t, h, w, d and frame_times.
void save_features(const std::filesystem::path& manifest, const FeatureSequence& f, const RegToken& r);
std::pair<FeatureSequence, RegToken> load_features(const std::filesystem::path& manifest);

/// Option index from answer text: "B", "(B)", "B) cats", "b." -> 1.
std::optional<int> parse_answer_letter(std::string_view text, std::size_t option_count);

}  // namespace videomind
