#include "videomind/moments.hpp"

#include <algorithm>
#include <numeric>

#include "videomind/error.hpp"

namespace videomind {

double interval_iou(const Moment& a, const Moment& b) {
    const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
    const double uni = a.length() + b.length() - inter;
    if (uni <= 0.0)
        return (a.start == b.start && a.end == b.end) ? 1.0 : 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double interval_iop(const Moment& pred, const Moment& gt) {
    if (pred.length() <= 0.0)
        return (pred.start >= gt.start && pred.start <= gt.end) ? 1.0 : 0.0;
    const double inter = std::max(0.0, std::min(pred.end, gt.end) - std::max(pred.start, gt.start));
    return std::clamp(inter / pred.length(), 0.0, 1.0);
}

double max_iou(const Moment& pred, std::span<const Moment> gts) {
    double best = 0.0;
    for (const Moment& g : gts)
        best = std::max(best, interval_iou(pred, g));
    return best;
}

double max_iop(const Moment& pred, std::span<const Moment> gts) {
    double best = 0.0;
    for (const Moment& g : gts)
        best = std::max(best, interval_iop(pred, g));
    return best;
}

std::vector<Moment> nms(std::span<const Moment> cands, double iou_threshold) {
    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), 0);
    for (const Moment& m : cands)
        if (!m.score)
            throw PreconditionError("nms requires every candidate to carry a score");
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (*cands[a].score != *cands[b].score)
            return *cands[a].score > *cands[b].score;
        if (cands[a].start != cands[b].start)
            return cands[a].start < cands[b].start;
        return a < b;
    });

    std::vector<Moment> kept;
    for (std::size_t idx : order) {
        const Moment& c = cands[idx];
        bool suppressed = std::any_of(kept.begin(), kept.end(),
                                      [&](const Moment& k) { return interval_iou(k, c) > iou_threshold; });
        if (!suppressed)
            kept.push_back(c);
    }
    return kept;
}

std::vector<Moment> top_k(std::span<const Moment> cands, std::size_t k) {
    const std::size_t n = std::min(k, cands.size());
    return {cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace videomind
