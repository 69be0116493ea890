#include "videomind/eval.hpp"

#include <algorithm>
#include <charconv>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "videomind/error.hpp"
#include "videomind/moments.hpp"

namespace videomind {

namespace {

void require_records(const std::vector<EvalRecord>& records) {
    if (records.empty())
        throw InputError("no records to evaluate");
}

void require_answers(const std::vector<EvalRecord>& records) {
    for (const auto& r : records)
        if (!r.answer_correct)
            throw InputError("record " + r.video_id + " has no answer correctness");
}

template <class F>
std::vector<double> fractions_at(const std::vector<EvalRecord>& records, const std::vector<double>& thresholds,
                                 F overlap) {
    require_records(records);
    std::vector<double> values;
    for (const auto& r : records)
        values.push_back(overlap(r));
    std::vector<double> out;
    for (double t : thresholds) {
        const auto hits = std::count_if(values.begin(), values.end(), [t](double v) { return v >= t; });
        out.push_back(static_cast<double>(hits) / static_cast<double>(records.size()));
    }
    return out;
}

template <class F>
double mean_of(const std::vector<EvalRecord>& records, F overlap) {
    require_records(records);
    double sum = 0.0;
    for (const auto& r : records)
        sum += overlap(r);
    return sum / static_cast<double>(records.size());
}

std::string threshold_key(double t) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, t);
    return std::string(buf, res.ptr);
}

}  // namespace

double top1_iou(const EvalRecord& r) {
    if (r.gt_moments.empty())
        throw InputError("record " + r.video_id + " has no ground-truth moments");
    return r.top1 ? max_iou(*r.top1, r.gt_moments) : 0.0;
}

double top1_iop(const EvalRecord& r) {
    if (r.gt_moments.empty())
        throw InputError("record " + r.video_id + " has no ground-truth moments");
    return r.top1 ? max_iop(*r.top1, r.gt_moments) : 0.0;
}

std::vector<double> recall_at_iou(const std::vector<EvalRecord>& records, const std::vector<double>& thresholds) {
    return fractions_at(records, thresholds, top1_iou);
}

std::vector<double> recall_at_iop(const std::vector<EvalRecord>& records, const std::vector<double>& thresholds) {
    return fractions_at(records, thresholds, top1_iop);
}

double mean_iou(const std::vector<EvalRecord>& records) { return mean_of(records, top1_iou); }

double mean_iop(const std::vector<EvalRecord>& records) { return mean_of(records, top1_iop); }

double acc_at_gqa(const std::vector<EvalRecord>& records, double iop_threshold) {
    require_records(records);
    require_answers(records);
    return mean_of(records, [&](const EvalRecord& r) {
        return (*r.answer_correct && top1_iop(r) >= iop_threshold) ? 1.0 : 0.0;
    });
}

double answer_accuracy(const std::vector<EvalRecord>& records) {
    require_records(records);
    require_answers(records);
    return mean_of(records, [](const EvalRecord& r) { return *r.answer_correct ? 1.0 : 0.0; });
}

std::vector<double> default_map_thresholds() {
    std::vector<double> ts;
    for (int i = 0; i <= 9; ++i)
        ts.push_back((50 + 5 * i) / 100.0);
    return ts;
}

MapResult multi_moment_map(const std::vector<EvalRecord>& records, const std::vector<double>& thresholds) {
    require_records(records);
    struct Ranked {
        std::size_t record;
        std::size_t rank;
        double score;
    };
    std::vector<Ranked> pool;
    std::size_t total_gt = 0;
    for (std::size_t r = 0; r < records.size(); ++r) {
        total_gt += records[r].gt_moments.size();
        for (std::size_t k = 0; k < records[r].all_preds.size(); ++k) {
            const auto& m = records[r].all_preds[k];
            if (!m.score)
                throw InputError("record " + records[r].video_id + " has an unscored prediction");
            pool.push_back({r, k, *m.score});
        }
    }
    if (total_gt == 0)
        throw InputError("mAP needs at least one ground-truth moment");
    std::stable_sort(pool.begin(), pool.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

    MapResult out;
    out.thresholds = thresholds;
    for (double t : thresholds) {
        std::vector<std::vector<bool>> used(records.size());
        for (std::size_t r = 0; r < records.size(); ++r)
            used[r].assign(records[r].gt_moments.size(), false);
        std::vector<double> precision, recall;
        std::size_t tp = 0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const auto& rec = records[pool[i].record];
            const Moment& pred = rec.all_preds[pool[i].rank];
            std::optional<std::size_t> best;
            double best_iou = -1.0;
            for (std::size_t g = 0; g < rec.gt_moments.size(); ++g) {
                if (used[pool[i].record][g])
                    continue;
                const double iou = interval_iou(pred, rec.gt_moments[g]);
                if (iou >= t && iou > best_iou) {
                    best = g;
                    best_iou = iou;
                }
            }
            if (best) {
                used[pool[i].record][*best] = true;
                ++tp;
            }
            precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
            recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
        }
        // Precision envelope, then area under the step curve.
        for (std::size_t i = precision.size(); i-- > 1;)
            precision[i - 1] = std::max(precision[i - 1], precision[i]);
        double ap = 0.0, prev_recall = 0.0;
        for (std::size_t i = 0; i < precision.size(); ++i) {
            ap += (recall[i] - prev_recall) * precision[i];
            prev_recall = recall[i];
        }
        out.ap.push_back(ap);
    }
    out.average = out.ap.empty() ? 0.0
                                 : std::accumulate(out.ap.begin(), out.ap.end(), 0.0) /
                                       static_cast<double>(out.ap.size());
    return out;
}

double acc_at_iou_avg(const std::vector<EvalRecord>& records, const std::vector<double>& thresholds) {
    require_records(records);
    require_answers(records);
    if (thresholds.empty())
        throw InputError("acc@IoU needs at least one threshold");
    double sum = 0.0;
    for (double t : thresholds)
        sum += mean_of(records, [&](const EvalRecord& r) { return (*r.answer_correct && top1_iou(r) >= t) ? 1.0 : 0.0; });
    return sum / static_cast<double>(thresholds.size());
}

std::vector<EvalRecord> make_eval_records(const std::vector<PredictionRecord>& predictions,
                                          const std::vector<AnnotationRecord>& annotations) {
    if (predictions.size() != annotations.size())
        throw InputError(std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(annotations.size()) + " annotations");
    std::vector<EvalRecord> out;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& p = predictions[i];
        const auto& a = annotations[i];
        if (p.video_id != a.video_id)
            throw InputError("line " + std::to_string(i + 1) + ": prediction for " + p.video_id +
                             " but annotation for " + a.video_id);
        EvalRecord r;
        r.video_id = p.video_id;
        r.all_preds = p.moments;
        if (!p.moments.empty())
            r.top1 = p.moments.front();
        r.gt_moments = a.gt_moments;
        if (a.answer_index && a.options) {
            const auto chosen = p.answer ? parse_answer_letter(*p.answer, a.options->size()) : std::nullopt;
            r.answer_correct = chosen && *chosen == *a.answer_index;
        }
        out.push_back(std::move(r));
    }
    return out;
}

nlohmann::ordered_json metrics_report(const std::vector<EvalRecord>& records, const MetricsRequest& req) {
    nlohmann::ordered_json j;
    j["count"] = records.size();
    for (const auto& name : req.metrics) {
        if (name == "riou" || name == "riop") {
            const auto values = name == "riou" ? recall_at_iou(records, req.thresholds)
                                               : recall_at_iop(records, req.thresholds);
            const std::string prefix = name == "riou" ? "R@" : "R_IoP@";
            for (std::size_t i = 0; i < values.size(); ++i)
                j[prefix + threshold_key(req.thresholds[i])] = values[i];
        } else if (name == "miou") {
            j["mIoU"] = mean_iou(records);
        } else if (name == "miop") {
            j["mIoP"] = mean_iop(records);
        } else if (name == "acc") {
            j["Acc"] = answer_accuracy(records);
        } else if (name == "gqa") {
            j["Acc@GQA"] = acc_at_gqa(records, req.gqa_iop_threshold);
        } else if (name == "map") {
            const MapResult m = multi_moment_map(records);
            for (std::size_t i = 0; i < m.ap.size(); ++i)
                j["AP@" + threshold_key(m.thresholds[i])] = m.ap[i];
            j["mAP"] = m.average;
        } else if (name == "cg") {
            j["acc@IoU"] = acc_at_iou_avg(records, req.cg_thresholds);
        } else {
            throw InputError("unknown metric '" + name + "'");
        }
    }
    return j;
}

std::string metrics_table(const nlohmann::ordered_json& report) {
    std::size_t width = 6;
    for (const auto& [k, v] : report.items())
        width = std::max(width, k.size());
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(width)) << "metric" << "  value\n";
    for (const auto& [k, v] : report.items()) {
        os << std::left << std::setw(static_cast<int>(width)) << k << "  ";
        if (v.is_number_float())
            os << std::fixed << std::setprecision(4) << v.get<double>();
        else
            os << v.dump();
        os << "\n";
    }
    return os.str();
}

}  // namespace videomind
