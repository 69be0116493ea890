#include "videomind/plan.hpp"

#include <algorithm>
#include <array>

namespace videomind {

namespace {

constexpr std::array<std::pair<Role, std::string_view>, 4> kRoleNames{{
    {Role::planner, "planner"},
    {Role::grounder, "grounder"},
    {Role::verifier, "verifier"},
    {Role::answerer, "answerer"},
}};

const std::array<std::vector<Role>, 3> kCanonical{{
    {Role::grounder, Role::verifier, Role::answerer},
    {Role::grounder, Role::verifier},
    {Role::answerer},
}};

std::string_view strip_code_fence(std::string_view s) {
    auto trim = [](std::string_view v) {
        const auto ws = " \t\r\n";
        const auto b = v.find_first_not_of(ws);
        if (b == std::string_view::npos)
            return std::string_view{};
        return v.substr(b, v.find_last_not_of(ws) - b + 1);
    };
    s = trim(s);
    if (s.starts_with("```")) {
        auto nl = s.find('\n');
        auto close = s.rfind("```");
        if (nl != std::string_view::npos && close != std::string_view::npos && close > nl)
            s = trim(s.substr(nl + 1, close - nl - 1));
    }
    return s;
}

[[noreturn]] void fail(PlanErrorKind kind, std::size_t pos, const std::string& msg) {
    throw PlanValidationError(kind, pos, "invalid plan at position " + std::to_string(pos) + ": " + msg);
}

}  // namespace

std::string_view role_name(Role r) {
    for (const auto& [role, name] : kRoleNames)
        if (role == r)
            return name;
    return "unknown";
}

std::optional<Role> role_from_name(std::string_view name) {
    for (const auto& [role, n] : kRoleNames)
        if (n == name)
            return role;
    return std::nullopt;
}

std::string_view plan_error_name(PlanErrorKind k) {
    switch (k) {
        case PlanErrorKind::not_a_list: return "not_a_list";
        case PlanErrorKind::not_an_object: return "not_an_object";
        case PlanErrorKind::missing_type: return "missing_type";
        case PlanErrorKind::unknown_role: return "unknown_role";
        case PlanErrorKind::unexpected_value: return "unexpected_value";
        case PlanErrorKind::missing_value: return "missing_value";
        case PlanErrorKind::non_canonical: return "non_canonical";
    }
    return "unknown";
}

PlanKind ReasoningPlan::kind() const {
    std::vector<Role> roles;
    for (const auto& c : calls)
        roles.push_back(c.role);
    if (roles == kCanonical[0])
        return PlanKind::ground_verify_answer;
    if (roles == kCanonical[1])
        return PlanKind::ground_verify;
    if (roles == kCanonical[2])
        return PlanKind::answer_only;
    throw ValidationError("plan is not one of the canonical sequences");
}

bool ReasoningPlan::contains(Role r) const {
    return std::any_of(calls.begin(), calls.end(), [r](const RoleCall& c) { return c.role == r; });
}

std::optional<std::string> ReasoningPlan::grounding_query() const {
    for (const auto& c : calls)
        if (c.role == Role::grounder)
            return c.value;
    return std::nullopt;
}

ReasoningPlan ReasoningPlan::ground_verify_answer(std::string query) {
    return {{{Role::grounder, std::move(query)}, {Role::verifier, std::nullopt}, {Role::answerer, std::nullopt}}};
}

ReasoningPlan ReasoningPlan::ground_verify(std::string query) {
    return {{{Role::grounder, std::move(query)}, {Role::verifier, std::nullopt}}};
}

ReasoningPlan ReasoningPlan::answer_only() { return {{{Role::answerer, std::nullopt}}}; }

ReasoningPlan parse_plan(std::string_view raw) {
    const std::string_view body = strip_code_fence(raw);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("planner output is not valid JSON: ") + e.what());
    }
    if (!doc.is_array())
        fail(PlanErrorKind::not_a_list, 0, "expected a JSON list of role calls");

    ReasoningPlan plan;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& item = doc[i];
        if (!item.is_object())
            fail(PlanErrorKind::not_an_object, i, "each call must be a JSON object");
        auto type = item.find("type");
        if (type == item.end() || !type->is_string())
            fail(PlanErrorKind::missing_type, i, "missing string field \"type\"");
        auto role = role_from_name(type->get<std::string>());
        if (!role)
            fail(PlanErrorKind::unknown_role, i, "unknown role \"" + type->get<std::string>() + "\"");
        RoleCall call{*role, std::nullopt};
        auto value = item.find("value");
        if (*role == Role::grounder) {
            if (value == item.end() || !value->is_string() || value->get<std::string>().empty())
                fail(PlanErrorKind::missing_value, i, "grounder requires a non-empty string \"value\"");
            call.value = value->get<std::string>();
        } else if (value != item.end()) {
            fail(PlanErrorKind::unexpected_value, i,
                 "only the grounder accepts \"value\", found it on " + std::string(role_name(*role)));
        }
        plan.calls.push_back(std::move(call));
    }

    // First position where the sequence departs from every canonical plan.
    std::size_t best_match = 0;
    for (const auto& canon : kCanonical) {
        std::size_t k = 0;
        while (k < canon.size() && k < plan.calls.size() && plan.calls[k].role == canon[k])
            ++k;
        if (k == canon.size() && k == plan.calls.size())
            return plan;
        best_match = std::max(best_match, k);
    }
    fail(PlanErrorKind::non_canonical, best_match,
         "expected [grounder, verifier, answerer], [grounder, verifier] or [answerer]");
}

nlohmann::json plan_to_json(const ReasoningPlan& plan) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : plan.calls) {
        nlohmann::json call{{"type", role_name(c.role)}};
        if (c.value)
            call["value"] = *c.value;
        out.push_back(std::move(call));
    }
    return out;
}

std::string serialize_plan(const ReasoningPlan& plan) { return plan_to_json(plan).dump(); }

}  // namespace videomind
