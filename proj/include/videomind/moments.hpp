#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "videomind/types.hpp"

namespace videomind {

/// Intersection over union. Two zero-length moments score 1 only when identical.
double interval_iou(const Moment& a, const Moment& b);

/// Intersection over the prediction's length. A zero-length prediction scores
/// 1 when its point lies inside gt, else 0.
double interval_iop(const Moment& pred, const Moment& gt);

double max_iou(const Moment& pred, std::span<const Moment> gts);
double max_iop(const Moment& pred, std::span<const Moment> gts);

inline constexpr double kDefaultNmsThreshold = 0.75;

/// Greedy suppression in descending score order (ties: earlier start, then
/// input position). A candidate is dropped when its IoU with an already kept
/// moment is strictly greater than the threshold. Every candidate needs a score.
std::vector<Moment> nms(std::span<const Moment> cands, double iou_threshold = kDefaultNmsThreshold);

/// The first k entries, order preserved.
std::vector<Moment> top_k(std::span<const Moment> cands, std::size_t k = 5);

}  // namespace videomind
