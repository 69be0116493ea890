#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "../oracles.hpp"
#include "videomind/error.hpp"
#include "videomind/eval.hpp"
#include "videomind/moments.hpp"
#include "videomind/tensor.hpp"

using namespace videomind;

namespace {

EvalRecord rec(Moment top1, Moment gt, std::optional<bool> correct = std::nullopt) {
    top1.score = 1.0;
    return {"v", top1, {top1}, {gt}, correct};
}

std::vector<EvalRecord> random_records(Rng& rng, std::size_t max_moments) {
    std::vector<EvalRecord> out;
    const std::size_t n = 1 + rng.index(4);
    for (std::size_t r = 0; r < n; ++r) {
        EvalRecord e;
        e.video_id = "r" + std::to_string(r);
        const std::size_t g = 1 + rng.index(3);
        for (std::size_t i = 0; i < g; ++i) {
            const double s = rng.uniform(0, 50);
            e.gt_moments.push_back({s, s + rng.uniform(1, 15)});
        }
        const std::size_t p = rng.index(max_moments + 1);
        for (std::size_t i = 0; i < p; ++i) {
            const Moment& near = e.gt_moments[rng.index(g)];
            const double jitter = rng.uniform(-4, 4);
            const double s = std::max(0.0, near.start + jitter);
            e.all_preds.push_back({s, s + near.length() * rng.uniform(0.5, 1.5), rng.uniform()});
        }
        std::stable_sort(e.all_preds.begin(), e.all_preds.end(),
                         [](const Moment& a, const Moment& b) { return *a.score > *b.score; });
        if (!e.all_preds.empty())
            e.top1 = e.all_preds.front();
        e.answer_correct = rng.uniform() < 0.6;
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

TEST_SUITE("eval") {
    const Moment G{0, 10};

    TEST_CASE("recall at IoU hand counts") {
        const std::vector<EvalRecord> r{rec({0, 6}, G), rec({0, 4}, G), rec({0, 9}, G)};
        const auto v = recall_at_iou(r, {0.0, 0.5, 0.95});
        CHECK(std::abs(v[0] - 1.0) < 1e-12);
        CHECK(std::abs(v[1] - 2.0 / 3.0) < 1e-12);
        CHECK(v[2] == 0.0);
        const std::vector<EvalRecord> disjoint{rec({20, 30}, G), rec({11, 12}, G)};
        for (double x : recall_at_iou(disjoint, {0.1, 0.5, 0.9}))
            CHECK(x == 0.0);
    }

    TEST_CASE("mean IoU and IoP") {
        CHECK(std::abs(mean_iou({rec({0, 6}, G), rec({0, 4}, G)}) - 0.5) < 1e-12);
        CHECK(mean_iou({rec(G, G), rec({3, 9}, {3, 9})}) == 1.0);
        // Five hand-built records: IoU 1/2, 1/3, 3/5, 1, 0 and IoP 1, 1/2, 1, 1, 0.
        const std::vector<EvalRecord> five{rec({0, 5}, G), rec({5, 15}, G), rec({2, 8}, G), rec(G, G), rec({20, 30}, G)};
        CHECK(std::abs(mean_iou(five) - (0.5 + 1.0 / 3.0 + 0.6 + 1.0) / 5.0) < 1e-12);
        CHECK(std::abs(mean_iop(five) - 0.7) < 1e-12);
        EvalRecord none{"x", std::nullopt, {}, {G}, std::nullopt};
        CHECK(mean_iou({none}) == 0.0);
        CHECK_THROWS_AS(mean_iou({}), InputError);
        CHECK_THROWS_AS(mean_iou({EvalRecord{"x", G, {}, {}, std::nullopt}}), InputError);
    }

    TEST_CASE("multiple ground truths take the max") {
        EvalRecord r = rec({20, 29}, G);
        r.gt_moments.push_back({20, 30});
        CHECK(std::abs(top1_iou(r) - 0.9) < 1e-12);
    }

    TEST_CASE("Acc@GQA hand count") {
        const std::vector<EvalRecord> r{rec({0, 10}, {4, 20}, true), rec({0, 10}, {7, 20}, true), rec({0, 10}, {1, 20}, false)};
        CHECK(std::abs(acc_at_gqa(r) - 1.0 / 3.0) < 1e-12);
        CHECK(acc_at_gqa({rec(G, G, true), rec(G, G, true)}) == 1.0);
        CHECK(acc_at_gqa({rec(G, G, false)}) == 0.0);
        CHECK_THROWS_AS(acc_at_gqa({rec(G, G)}), InputError);
    }

    TEST_CASE("acc at IoU averaged over thresholds") {
        const std::vector<EvalRecord> r{rec({0, 6}, G, true), rec({0, 3}, G, true), rec({0, 9}, G, false), rec({0, 1.5}, G, true)};
        CHECK(std::abs(acc_at_iou_avg(r) - 0.45) < 1e-12);
        CHECK(acc_at_iou_avg({rec(G, G, true)}) == 1.0);
        // A single threshold is the fraction correct with IoU >= θ.
        CHECK(std::abs(acc_at_iou_avg(r, {0.5}) - 0.25) < 1e-12);
    }

    TEST_CASE("mAP hand constructions") {
        const MapResult perfect = multi_moment_map({rec(G, G)});
        for (double ap : perfect.ap)
            CHECK(ap == 1.0);
        CHECK(perfect.average == 1.0);
        const MapResult half = multi_moment_map({rec({0, 5}, G)});
        CHECK(half.ap.front() == 1.0);
        CHECK(half.ap.back() == 0.0);
        CHECK(half.thresholds.size() == 10);
        CHECK(half.thresholds[9] == doctest::Approx(0.95));
        // Two gt, a duplicate hit ranked between: ranks TP, FP, TP -> AP = (1 + 2/3) / 2.
        EvalRecord two{"v", Moment{0, 10, 0.9}, {{0, 10, 0.9}, {0, 10, 0.8}, {20, 30, 0.7}}, {G, {20, 30}}, std::nullopt};
        CHECK(std::abs(multi_moment_map({two}, {0.5}).ap[0] - (1.0 + 2.0 / 3.0) / 2.0) < 1e-12);
    }

    TEST_CASE("mAP equals the brute-force oracle on random instances") {
        Rng rng(99);
        for (int inst = 0; inst < 300; ++inst) {
            const auto records = random_records(rng, 6);
            const MapResult m = multi_moment_map(records);
            for (std::size_t t = 0; t < m.thresholds.size(); ++t)
                CHECK(std::abs(m.ap[t] - oracle::average_precision(records, m.thresholds[t])) < 1e-12);
        }
    }

    TEST_CASE("monotonicity properties on random record sets") {
        Rng rng(5);
        const std::vector<double> ts{0.1, 0.3, 0.5, 0.7, 0.9};
        for (int inst = 0; inst < 200; ++inst) {
            auto records = random_records(rng, 6);
            const auto rec_iou = recall_at_iou(records, ts);
            for (std::size_t i = 1; i < ts.size(); ++i)
                CHECK(rec_iou[i] <= rec_iou[i - 1]);
            const MapResult m = multi_moment_map(records);
            for (std::size_t i = 1; i < m.ap.size(); ++i)
                CHECK(m.ap[i] <= m.ap[i - 1] + 1e-15);
            const double gqa = acc_at_gqa(records);
            CHECK(gqa <= std::min(answer_accuracy(records), recall_at_iop(records, {0.5})[0]));
        }
    }

    TEST_CASE("mean IoU is invariant to permuting records") {
        Rng rng(12);
        auto records = random_records(rng, 4);
        records.push_back(rec({1, 4}, G));
        const double base = mean_iou(records);
        std::reverse(records.begin(), records.end());
        CHECK(mean_iou(records) == doctest::Approx(base).epsilon(1e-14));
    }

    TEST_CASE("joining predictions with annotations") {
        AnnotationRecord a{"v1", 30.0, "q", "Q?", std::vector<std::string>{"a", "b", "c"}, 2, std::nullopt, {{1, 5}}};
        PredictionRecord p{"v1", {{1, 4, 0.9}}, "(C) c", ReasoningPlan::ground_verify_answer("q"), false};
        auto r = make_eval_records({p}, {a});
        CHECK(r[0].answer_correct == true);
        CHECK(*r[0].top1 == Moment{1, 4, 0.9});
        p.answer = "A";
        CHECK(make_eval_records({p}, {a})[0].answer_correct == false);
        a.answer_index.reset();
        CHECK_FALSE(make_eval_records({p}, {a})[0].answer_correct.has_value());
        p.video_id = "v2";
        CHECK_THROWS_AS(make_eval_records({p}, {a}), InputError);
        CHECK_THROWS_AS(make_eval_records({}, {a}), InputError);
    }

    TEST_CASE("report and table") {
        const std::vector<EvalRecord> r{rec({0, 6}, G, true), rec({0, 4}, G, false)};
        MetricsRequest req;
        req.metrics = {"riou", "miou", "acc", "cg"};
        req.thresholds = {0.5};
        const auto j = metrics_report(r, req);
        CHECK(j["R@0.5"] == 0.5);
        CHECK(j["Acc"] == 0.5);
        CHECK(j.contains("acc@IoU"));
        const std::string table = metrics_table(j);
        CHECK(table.find("\nmIoU     0.5000\n") != std::string::npos);
        CHECK(table.find("\nacc@IoU  ") != std::string::npos);
        req.metrics = {"bleu"};
        CHECK_THROWS_AS(metrics_report(r, req), InputError);
    }
}
