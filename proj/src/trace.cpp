#include "mrcot/trace.hpp"

#include <stdexcept>

namespace mrcot {

std::string step_kind_name(StepKind kind) {
    return kind == StepKind::Memory ? "memory" : "reason";
}

StepKind step_kind_from_name(const std::string& name) {
    if (name == "memory") return StepKind::Memory;
    if (name == "reason") return StepKind::Reason;
    throw std::invalid_argument("unknown step kind: " + name);
}

nlohmann::json trace_to_json(const AnnotatedTrace& trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const PlanStep& step : trace.steps) {
        nlohmann::json s{{"name", step.name},
                         {"kind", step_kind_name(step.kind)},
                         {"content", step.content}};
        if (!step.knowledge_query.empty()) s["query"] = step.knowledge_query;
        steps.push_back(std::move(s));
    }
    return nlohmann::json{{"record_id", trace.record_id},
                          {"steps", std::move(steps)},
                          {"answer", trace.answer}};
}

AnnotatedTrace trace_from_json(const nlohmann::json& j) {
    AnnotatedTrace trace;
    trace.record_id = j.at("record_id").get<std::string>();
    trace.answer = j.at("answer").get<std::string>();
    for (const auto& s : j.at("steps")) {
        PlanStep step;
        step.name = s.at("name").get<std::string>();
        step.kind = step_kind_from_name(s.at("kind").get<std::string>());
        step.content = s.at("content").get<std::string>();
        if (s.contains("query")) step.knowledge_query = s.at("query").get<std::string>();
        trace.steps.push_back(std::move(step));
    }
    return trace;
}

} // namespace mrcot
