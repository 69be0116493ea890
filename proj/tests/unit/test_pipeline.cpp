#include <doctest.h>

#include <chrono>
#include <thread>

#include "support.hpp"
#include "videomind/error.hpp"
#include "videomind/pipeline.hpp"

using namespace videomind;

namespace {

const char* kPlan1 = R"([{"type":"grounder","value":"the baby is crying"},{"type":"verifier"},{"type":"answerer"}])";
const char* kPlan2 = R"([{"type":"grounder","value":"the baby is crying"},{"type":"verifier"}])";
const char* kPlan3 = R"([{"type":"answerer"}])";

PipelineInput input() {
    return {{"golden_video", 60.0, {}}, "What is the baby doing?",
            std::vector<std::string>{"sleeping", "crying", "eating", "playing"}, std::nullopt};
}

BackendScript script(const char* plan) { return {plan, {{10, 20, 0.9}, {40, 50, 0.8}}, {0.3, 0.8}, "B"}; }

std::vector<Role> roles(const PipelineResult& r) {
    std::vector<Role> out;
    for (const auto& t : r.trace)
        out.push_back(t.role);
    return out;
}

/// Verifier replies arrive in reverse candidate order.
class SlowVerifier : public ScriptedBackend {
public:
    using ScriptedBackend::ScriptedBackend;
    VerifyResponse verify(const VerifyRequest& req) const override {
        std::this_thread::sleep_for(std::chrono::milliseconds(10 * (5 - static_cast<int>(req.candidate_index))));
        return ScriptedBackend::verify(req);
    }
};

class FailingVerifier : public ScriptedBackend {
public:
    using ScriptedBackend::ScriptedBackend;
    VerifyResponse verify(const VerifyRequest& req) const override {
        if (req.candidate_index == 1)
            throw TransportError("connection reset");
        return ScriptedBackend::verify(req);
    }
};

}  // namespace

TEST_SUITE("pipeline") {
    TEST_CASE("plan 1: ground, verify, answer on the zoomed selection") {
        const PipelineResult r = run_pipeline(input(), ScriptedBackend(script(kPlan1)));
        CHECK(r.answer == "B");
        CHECK(r.selected_moment == Moment{40, 50, 0.8});
        CHECK(r.answer_segment == Moment{35, 55});
        CHECK(r.candidates.size() == 2);
        CHECK(r.verifier_scores[1].score == doctest::Approx(0.8));
        CHECK(roles(r) == std::vector<Role>{Role::planner, Role::grounder, Role::verifier, Role::verifier, Role::answerer});
        CHECK_FALSE(r.degraded);
        const auto ranked = r.ranked_moments();
        CHECK(ranked[0].start == 40.0);
        CHECK(*ranked[0].score == doctest::Approx(0.8));
    }

    TEST_CASE("golden scripted run") {
        const PipelineResult r = run_pipeline(input(), ScriptedBackend(script(kPlan1)));
        testsupport::check_golden("pipeline_scripted.json", r.to_json().dump(2) + "\n");
    }

    TEST_CASE("plan 2 grounds without answering") {
        const PipelineResult r = run_pipeline(input(), ScriptedBackend(script(kPlan2)));
        CHECK_FALSE(r.answer.has_value());
        CHECK(r.selected_moment == Moment{40, 50, 0.8});
        CHECK(r.trace.size() == 4);
    }

    TEST_CASE("plan 3 answers on the whole video") {
        const PipelineResult r = run_pipeline(input(), ScriptedBackend(script(kPlan3)));
        CHECK(r.answer == "B");
        CHECK_FALSE(r.selected_moment.has_value());
        CHECK_FALSE(r.answer_segment.has_value());
        CHECK(roles(r) == std::vector<Role>{Role::planner, Role::answerer});
    }

    TEST_CASE("no candidates degrades to answering on the whole video") {
        BackendScript s = script(kPlan2);
        s.candidates.clear();
        const PipelineResult r = run_pipeline(input(), ScriptedBackend(s));
        CHECK(r.degraded);
        CHECK(r.answer == "B");
        CHECK_FALSE(r.selected_moment.has_value());
        CHECK(roles(r) == std::vector<Role>{Role::planner, Role::grounder, Role::answerer});
    }

    TEST_CASE("scored candidates pass through NMS and top-k") {
        BackendScript s = script(kPlan2);
        s.candidates = {{0, 10, 0.9}, {1, 10, 0.85}, {20, 30, 0.7}, {30, 31, 0.6}, {40, 41, 0.5}, {50, 51, 0.4}, {55, 56, 0.3}};
        s.verifier_probabilities = {0.5, 0.5, 0.5, 0.5, 0.5};
        PipelineConfig cfg;
        cfg.top_k = 4;
        const PipelineResult r = run_pipeline(input(), ScriptedBackend(s), cfg);
        REQUIRE(r.candidates.size() == 4);
        CHECK(r.candidates[1].start == 20.0);
        // Equal scores: the first candidate wins.
        CHECK(r.selected_moment == Moment{0, 10, 0.9});
    }

    TEST_CASE("concurrent verification gathers in candidate order") {
        BackendScript s = script(kPlan1);
        s.candidates = {{0, 5, 0.9}, {10, 15, 0.8}, {20, 25, 0.7}, {30, 35, 0.6}, {40, 45, 0.5}};
        s.verifier_probabilities = {0.2, 0.9, 0.9, 0.4, 0.1};
        const PipelineResult serial = run_pipeline(input(), SlowVerifier(s), PipelineConfig{.verifier_concurrency = 1});
        const PipelineResult wide = run_pipeline(input(), SlowVerifier(s), PipelineConfig{.verifier_concurrency = 5});
        CHECK(wide.to_json() == serial.to_json());
        CHECK(wide.selected_moment->start == 10.0);
        for (std::size_t i = 0; i < wide.verifier_scores.size(); ++i)
            CHECK(wide.verifier_scores[i].candidate_index == i);
    }

    TEST_CASE("backend failures carry the role and the trace so far") {
        try {
            run_pipeline(input(), FailingVerifier(script(kPlan1)));
            FAIL("expected a pipeline error");
        } catch (const PipelineError& e) {
            CHECK(e.role() == Role::verifier);
            // planner, grounder and the verifier call that succeeded before the failure.
            CHECK(e.trace().size() == 3);
        }
        BackendScript bad = script(R"([{"type":"verifier"}])");
        try {
            run_pipeline(input(), ScriptedBackend(bad));
            FAIL("expected a pipeline error");
        } catch (const PipelineError& e) {
            CHECK(e.role() == Role::planner);
            CHECK(e.trace().size() == 1);
        }
    }

    TEST_CASE("mock backend runs are byte-stable") {
        const PipelineResult a = run_pipeline(input(), MockBackend(11));
        const PipelineResult b = run_pipeline(input(), MockBackend(11));
        CHECK(a.to_json().dump() == b.to_json().dump());
        CHECK(a.plan.kind() == PlanKind::ground_verify_answer);
        // Trace follows the plan, with one verifier entry per candidate.
        std::size_t verifiers = 0;
        for (const auto& t : a.trace)
            verifiers += t.role == Role::verifier;
        CHECK(verifiers == a.candidates.size());
    }
}
