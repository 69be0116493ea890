#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "videomind/io.hpp"
#include "videomind/types.hpp"

namespace videomind {

struct EvalRecord {
    std::string video_id;
    std::optional<Moment> top1;  // absent: nothing was predicted, scores as overlap 0
    std::vector<Moment> all_preds;
    std::vector<Moment> gt_moments;
    std::optional<bool> answer_correct;
};

/// Max over ground truth; 0 without a prediction. Throws InputError when the
/// record has no ground truth.
double top1_iou(const EvalRecord& r);
double top1_iop(const EvalRecord& r);

/// Fractions of records whose top-1 overlap is >= each threshold.
std::vector<double> recall_at_iou(const std::vector<EvalRecord>& records, const std::vector<double>& thresholds);
std::vector<double> recall_at_iop(const std::vector<EvalRecord>& records, const std::vector<double>& thresholds);
double mean_iou(const std::vector<EvalRecord>& records);
double mean_iop(const std::vector<EvalRecord>& records);

/// Fraction answered correctly with top-1 IoP >= threshold.
double acc_at_gqa(const std::vector<EvalRecord>& records, double iop_threshold = 0.5);
/// Fraction answered correctly. Throws InputError on a missing answer.
double answer_accuracy(const std::vector<EvalRecord>& records);

struct MapResult {
    std::vector<double> thresholds;
    std::vector<double> ap;
    double average = 0.0;
};

std::vector<double> default_map_thresholds();  // 0.5, 0.55, ..., 0.95

/// Predictions of all records pooled into one score ranking (ties: record
/// order, then rank within the record). At each threshold a prediction matches
/// the unmatched gt of its own record with the highest IoU, if that IoU >= the
/// threshold. AP is all-point interpolated over recall against the total gt
/// count.
MapResult multi_moment_map(const std::vector<EvalRecord>& records,
                           const std::vector<double>& thresholds = default_map_thresholds());

/// Mean over thresholds of the fraction answered correctly with top-1 IoU >= θ.
double acc_at_iou_avg(const std::vector<EvalRecord>& records,
                      const std::vector<double>& thresholds = {0.1, 0.2, 0.3, 0.4, 0.5});

/// Joins predictions to annotations line by line; ids must agree. The answer
/// is correct when its option letter equals answer_index.
std::vector<EvalRecord> make_eval_records(const std::vector<PredictionRecord>& predictions,
                                          const std::vector<AnnotationRecord>& annotations);

struct MetricsRequest {
    std::vector<std::string> metrics{"riou", "miou", "miop", "gqa", "map"};
    std::vector<double> thresholds{0.3, 0.5, 0.7};
    double gqa_iop_threshold = 0.5;
    std::vector<double> cg_thresholds{0.1, 0.2, 0.3, 0.4, 0.5};
};

/// Known metric names: riou, riop, miou, miop, acc, gqa, map, cg.
/// Values are ordered by metric name then threshold.
nlohmann::ordered_json metrics_report(const std::vector<EvalRecord>& records, const MetricsRequest& req);
std::string metrics_table(const nlohmann::ordered_json& report);

}  // namespace videomind
