#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace mrcot {

/// Whether a reasoning step retrieves stored knowledge or derives new
/// information from earlier steps.
enum class StepKind { Memory, Reason };

std::string step_kind_name(StepKind kind);
StepKind step_kind_from_name(const std::string& name);

/// One step of a structured chain of thought.
struct PlanStep {
    std::string name;
    StepKind kind = StepKind::Reason;
    /// For Memory steps, the standalone question whose answer this step
    /// needs. Non-empty for Memory steps after parsing.
    std::string knowledge_query;
    std::string content;

    bool operator==(const PlanStep&) const = default;
};

/// A finished chain of thought for one record: Memory steps already carry
/// verified knowledge text, Reason steps carry derivations.
struct AnnotatedTrace {
    std::string record_id;
    std::vector<PlanStep> steps;
    std::string answer;

    bool operator==(const AnnotatedTrace&) const = default;
};

nlohmann::json trace_to_json(const AnnotatedTrace& trace);
AnnotatedTrace trace_from_json(const nlohmann::json& j);

} // namespace mrcot
