#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "videomind/error.hpp"

namespace videomind {

enum class Role { planner, grounder, verifier, answerer };

std::string_view role_name(Role r);
std::optional<Role> role_from_name(std::string_view name);

struct RoleCall {
    Role role = Role::answerer;
    std::optional<std::string> value;  // grounding query; grounder only

    friend bool operator==(const RoleCall&, const RoleCall&) = default;
};

enum class PlanKind {
    ground_verify_answer,  // [grounder, verifier, answerer]
    ground_verify,         // [grounder, verifier]
    answer_only,           // [answerer]
};

struct ReasoningPlan {
    std::vector<RoleCall> calls;

    PlanKind kind() const;
    bool contains(Role r) const;
    /// The grounder's query, when the plan grounds.
    std::optional<std::string> grounding_query() const;

    static ReasoningPlan ground_verify_answer(std::string query);
    static ReasoningPlan ground_verify(std::string query);
    static ReasoningPlan answer_only();

    friend bool operator==(const ReasoningPlan&, const ReasoningPlan&) = default;
};

enum class PlanErrorKind {
    not_a_list,
    not_an_object,
    missing_type,
    unknown_role,
    unexpected_value,
    missing_value,
    non_canonical,
};

std::string_view plan_error_name(PlanErrorKind k);

class PlanValidationError : public ValidationError {
public:
    PlanValidationError(PlanErrorKind kind, std::size_t position, const std::string& what)
        : ValidationError(what), kind_(kind), position_(position) {}

    PlanErrorKind kind() const noexcept { return kind_; }
    /// Index of the first offending call (0 for whole-document errors).
    std::size_t position() const noexcept { return position_; }

private:
    PlanErrorKind kind_;
    std::size_t position_;
};

/// Parses planner output: a JSON list of {"type", "value"} objects, optionally
/// wrapped in a markdown code fence. Throws ParseError for malformed JSON and
/// PlanValidationError for anything that is not one of the three plans.
ReasoningPlan parse_plan(std::string_view raw);

nlohmann::json plan_to_json(const ReasoningPlan& plan);
std::string serialize_plan(const ReasoningPlan& plan);

}  // namespace videomind
