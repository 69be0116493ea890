#pragma once

// Reference implementations written from the definitions, deliberately
// structured differently from the library code they check.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "videomind/eval.hpp"
#include "videomind/types.hpp"

namespace oracle {

using videomind::EvalRecord;
using videomind::Moment;

inline double iou(const Moment& a, const Moment& b) {
    const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
    const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
    if (uni <= 0.0)
        return (a.start == b.start && a.end == b.end) ? 1.0 : 0.0;
    return inter / uni;
}

inline double focal(double c, bool pos, double lambda = 5.0, double alpha = 0.9, double gamma = 2.0) {
    return pos ? -lambda * alpha * std::pow(1.0 - c, gamma) * std::log(c)
               : -lambda * (1.0 - alpha) * std::pow(c, gamma) * std::log(1.0 - c);
}

inline double l1(std::pair<double, double> pred, std::pair<double, double> target, double lambda = 1.0) {
    return lambda * (std::fabs(target.first - pred.first) + std::fabs(target.second - pred.second));
}

/// Direct softmax form, no stabilisation.
inline double contrastive(const std::vector<double>& s, std::size_t p, double tau = 0.07, double lambda = 0.05) {
    double denom = std::exp(s[p] / tau);
    for (double v : s)
        if (v < s[p])
            denom += std::exp(v / tau);
    return -lambda * std::log(std::exp(s[p] / tau) / denom);
}

/// Greedy suppression characterised as a fixed point: S is the output iff
/// every candidate, in rank order, is in S exactly when no earlier member of S
/// overlaps it beyond the threshold. Every subset is tested; exactly one must
/// qualify.
inline std::vector<Moment> brute_force_nms(const std::vector<Moment>& cands, double theta) {
    const std::size_t n = cands.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (*cands[a].score != *cands[b].score)
            return *cands[a].score > *cands[b].score;
        if (cands[a].start != cands[b].start)
            return cands[a].start < cands[b].start;
        return a < b;
    });
    std::vector<std::vector<Moment>> solutions;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        bool ok = true;
        for (std::size_t r = 0; r < n && ok; ++r) {
            bool blocked = false;
            for (std::size_t q = 0; q < r; ++q)
                if ((mask >> q) & 1u)
                    blocked = blocked || iou(cands[order[q]], cands[order[r]]) > theta;
            ok = (((mask >> r) & 1u) != 0) == !blocked;
        }
        if (ok) {
            std::vector<Moment> kept;
            for (std::size_t r = 0; r < n; ++r)
                if ((mask >> r) & 1u)
                    kept.push_back(cands[order[r]]);
            solutions.push_back(kept);
        }
    }
    if (solutions.size() != 1)
        throw std::logic_error("suppression fixed point is not unique");
    return solutions.front();
}

/// AP from first principles: the true-positive count of every ranking prefix is
/// recomputed from scratch, and each recall step is weighted by the best
/// precision at or beyond it.
inline double average_precision(const std::vector<EvalRecord>& records, double theta) {
    struct P {
        std::size_t r, k;
        double s;
    };
    std::vector<P> pool;
    std::size_t gts = 0;
    for (std::size_t r = 0; r < records.size(); ++r) {
        gts += records[r].gt_moments.size();
        for (std::size_t k = 0; k < records[r].all_preds.size(); ++k)
            pool.push_back({r, k, *records[r].all_preds[k].score});
    }
    std::stable_sort(pool.begin(), pool.end(), [](const P& a, const P& b) { return a.s > b.s; });
    auto tp_of_prefix = [&](std::size_t n) {
        std::vector<std::vector<int>> used(records.size());
        for (std::size_t r = 0; r < records.size(); ++r)
            used[r].assign(records[r].gt_moments.size(), 0);
        std::size_t tp = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& R = records[pool[i].r];
            int best = -1;
            double best_iou = 0.0;
            for (std::size_t g = 0; g < R.gt_moments.size(); ++g) {
                const double v = iou(R.all_preds[pool[i].k], R.gt_moments[g]);
                if (!used[pool[i].r][g] && v >= theta && (best < 0 || v > best_iou)) {
                    best = static_cast<int>(g);
                    best_iou = v;
                }
            }
            if (best >= 0) {
                used[pool[i].r][best] = 1;
                ++tp;
            }
        }
        return tp;
    };
    std::vector<std::size_t> tp(pool.size() + 1, 0);
    for (std::size_t n = 1; n <= pool.size(); ++n)
        tp[n] = tp_of_prefix(n);
    double ap = 0.0;
    for (std::size_t n = 1; n <= pool.size(); ++n) {
        if (tp[n] == tp[n - 1])
            continue;
        double best_prec = 0.0;
        for (std::size_t m = n; m <= pool.size(); ++m)
            best_prec = std::max(best_prec, static_cast<double>(tp[m]) / static_cast<double>(m));
        ap += best_prec / static_cast<double>(gts);
    }
    return ap;
}

}  // namespace oracle
