#include <doctest.h>

#include "videomind/error.hpp"
#include "videomind/plan.hpp"

using namespace videomind;

namespace {

void expect_rejected(const std::string& raw, PlanErrorKind kind, std::size_t position) {
    CAPTURE(raw);
    try {
        parse_plan(raw);
        FAIL("plan accepted");
    } catch (const PlanValidationError& e) {
        CHECK(plan_error_name(e.kind()) == plan_error_name(kind));
        CHECK(e.position() == position);
    }
}

}  // namespace

TEST_SUITE("plan") {
    TEST_CASE("the three canonical plans parse") {
        const auto p1 = parse_plan(
            R"([{"type":"grounder","value":"the baby is crying"},{"type":"verifier"},{"type":"answerer"}])");
        CHECK(p1.kind() == PlanKind::ground_verify_answer);
        CHECK(p1.grounding_query() == "the baby is crying");
        const auto p2 = parse_plan(R"([{"type":"grounder","value":"q"},{"type":"verifier"}])");
        CHECK(p2.kind() == PlanKind::ground_verify);
        CHECK_FALSE(p2.contains(Role::answerer));
        const auto p3 = parse_plan(R"([{"type":"answerer"}])");
        CHECK(p3.kind() == PlanKind::answer_only);
        CHECK_FALSE(p3.grounding_query().has_value());
    }

    TEST_CASE("fenced and padded planner output is accepted") {
        const auto p = parse_plan("```json\n[{\"type\": \"answerer\"}]\n```\n");
        CHECK(p == ReasoningPlan::answer_only());
        CHECK(parse_plan("  [{\"type\":\"answerer\"}]  ") == ReasoningPlan::answer_only());
    }

    TEST_CASE("malformed JSON is a parse error") {
        CHECK_THROWS_AS(parse_plan("[{\"type\": \"answerer\""), ParseError);
        CHECK_THROWS_AS(parse_plan(""), ParseError);
        CHECK_THROWS_AS(parse_plan("grounder, verifier"), ParseError);
    }

    TEST_CASE("invalid plans name the error class and position") {
        expect_rejected(R"([{"type":"verifier"}])", PlanErrorKind::non_canonical, 0);
        expect_rejected(R"({"type":"answerer"})", PlanErrorKind::not_a_list, 0);
        expect_rejected(R"([])", PlanErrorKind::non_canonical, 0);
        expect_rejected(R"(["answerer"])", PlanErrorKind::not_an_object, 0);
        expect_rejected(R"([{"value":"q"}])", PlanErrorKind::missing_type, 0);
        expect_rejected(R"([{"type":"grounder","value":"q"},{"type":"judge"}])", PlanErrorKind::unknown_role, 1);
        expect_rejected(R"([{"type":"answerer","value":"x"}])", PlanErrorKind::unexpected_value, 0);
        expect_rejected(R"([{"type":"grounder"},{"type":"verifier"}])", PlanErrorKind::missing_value, 0);
        expect_rejected(R"([{"type":"grounder","value":"q"},{"type":"answerer"}])", PlanErrorKind::non_canonical, 1);
        expect_rejected(R"([{"type":"grounder","value":"q"},{"type":"verifier"},{"type":"answerer"},{"type":"answerer"}])",
                        PlanErrorKind::non_canonical, 3);
        expect_rejected(R"([{"type":"planner"}])", PlanErrorKind::non_canonical, 0);
    }

    TEST_CASE("serialize then parse is the identity on canonical plans") {
        for (const auto& p : {ReasoningPlan::ground_verify_answer("a \"quoted\" query"), ReasoningPlan::ground_verify("x"),
                              ReasoningPlan::answer_only()})
            CHECK(parse_plan(serialize_plan(p)) == p);
    }

    TEST_CASE("role names round trip") {
        for (Role r : {Role::planner, Role::grounder, Role::verifier, Role::answerer})
            CHECK(role_from_name(role_name(r)) == r);
        CHECK_FALSE(role_from_name("judge").has_value());
    }
}
