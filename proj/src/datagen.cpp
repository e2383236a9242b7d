#include "mrcot/datagen.hpp"

#include <stdexcept>

#include "mrcot/util.hpp"

namespace mrcot::datagen {

namespace {

constexpr const char* kInferencePromptTemplate =
    R"(Here is the question:
<Question>
{question}
<Question>

Here is the correct answer:
<Correct Answer>
{answer}
<Correct Answer>

Factual knowledge is information that aligns with objective reality and can be verified through evidence or observation, such as scientific facts or historical events.

Provide a reasoning plan for the above question to get the correct answer; each step in your reasoning plan must adhere strictly to the following format:

*Step name*:
# Put the name of the step here.

**Requirement**:
# If this step needs reasoning, return "[reason]" as a label; if this step needs factual knowledge, return "[memory]" as a label.

**Knowledge based**:
# Only if this step needs factual knowledge, put a query in question sentences about this factual knowledge for retrieval.

**Content**:
# If this step is about reasoning, please provide your reasoning thinking; if this step needs factual knowledge, please provide factual knowledge.)";

constexpr const char* kKnowledgePromptTemplate =
    R"(Factual knowledge is information that aligns with objective reality and can be verified through evidence or observation, such as scientific facts or historical events.

Please provide factual knowledge for the below question set:
<Questions>
{questions}
<Questions>

You should return a dictionary in JSON format; for each element in the dictionary, the key is each question in <Questions>, and the value is the factual knowledge of each question in <Questions>.

Your answer format should strictly be in the following steps:
```json
{
    "Question 1": "The factual knowledge of question 1",
    ........
}
```)";

} // namespace

std::string gold_answer_text(const ingest::QARecord& record) {
    for (const ingest::Option& opt : record.options) {
        if (opt.label == record.gold) return opt.label + ". " + opt.text;
    }
    return record.gold;
}

std::string build_inference_prompt(const ingest::QARecord& record) {
    std::string prompt = kInferencePromptTemplate;
    prompt = util::replace_all(prompt, "{question}", ingest::render_question(record));
    prompt = util::replace_all(prompt, "{answer}", gold_answer_text(record));
    return prompt;
}

std::string build_knowledge_prompt(const std::vector<std::string>& questions) {
    // The {questions} placeholder collides with the literal JSON example
    // braces in the template, so split on the marker lines instead.
    std::string prompt = kKnowledgePromptTemplate;
    std::string marker = "<Questions>\n{questions}\n<Questions>";
    std::size_t pos = prompt.find(marker);
    if (pos == std::string::npos) throw std::logic_error("knowledge template out of sync");
    std::string joined = util::join(questions, "\n");
    prompt.replace(pos, marker.size(), "<Questions>\n" + joined + "\n<Questions>");
    return prompt;
}

namespace {

/// Strips list prefixes like "3. ", "- ", "* " and surrounding quotes.
std::string strip_item_decoration(std::string line) {
    std::string s = util::trim(line);
    std::size_t i = 0;
    while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' ||
                            s[i] == ')' || s[i] == '-' || s[i] == ' ')) {
        // Stop as soon as a bracket or quote starts; "- " and "1. " only.
        if (s[i] == '[' || s[i] == '"' || s[i] == '\'') break;
        ++i;
    }
    s = s.substr(i);
    while (!s.empty() && (s.back() == ',' || std::isspace(static_cast<unsigned char>(s.back())))) {
        s.pop_back();
    }
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\''))) {
        s = s.substr(1, s.size() - 2);
    }
    return s;
}

enum class Label { Memory, Reason, Answer, None };

/// Leading "[memory]:"-style label of an itemized line, if any.
std::pair<Label, std::string> split_bracket_label(const std::string& line) {
    std::string s = strip_item_decoration(line);
    std::string lowered = util::to_lower(s);
    static const std::vector<std::pair<std::string, Label>> kLabels = {
        {"[memory]", Label::Memory}, {"[rag]", Label::Memory},
        {"[reason]", Label::Reason}, {"[answer]", Label::Answer},
    };
    for (const auto& [tag, label] : kLabels) {
        if (!util::starts_with(lowered, tag)) continue;
        std::string rest = util::trim(s.substr(tag.size()));
        if (util::starts_with(rest, ":")) rest = util::trim(rest.substr(1));
        return {label, rest};
    }
    return {Label::None, s};
}

/// Matches block-form field headers such as "**Requirement**:" with one or
/// two asterisks on either side and an optional colon.
bool match_field_header(const std::string& line, const std::string& field, std::string& rest) {
    std::string s = util::trim(line);
    std::size_t i = 0;
    while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' ||
                            s[i] == ')' || s[i] == '-' || s[i] == '#' || s[i] == ' ')) {
        ++i;
    }
    s = s.substr(i);
    int stars = 0;
    while (stars < 2 && static_cast<std::size_t>(stars) < s.size() && s[stars] == '*') ++stars;
    if (stars == 0 && field != "Step name") {
        // Field headers inside a plan always carry emphasis; plain text
        // lines must stay content.
        return false;
    }
    std::string body = s.substr(stars);
    std::string lowered = util::to_lower(body);
    std::string want = util::to_lower(field);
    if (!util::starts_with(lowered, want)) return false;
    std::size_t pos = field.size();
    while (pos < body.size() && body[pos] == '*') ++pos;
    std::string tail = util::trim(body.substr(pos));
    if (util::starts_with(tail, ":")) tail = util::trim(tail.substr(1));
    else if (!tail.empty() && stars == 0) return false;
    rest = tail;
    return true;
}

Label requirement_label(const std::string& value) {
    std::string lowered = util::to_lower(value);
    std::size_t memory = lowered.find("memory");
    std::size_t rag = lowered.find("[rag]");
    std::size_t reason = lowered.find("reason");
    if (rag != std::string::npos && (memory == std::string::npos || rag < memory)) memory = rag;
    if (memory == std::string::npos && reason == std::string::npos) return Label::None;
    if (reason == std::string::npos || (memory != std::string::npos && memory < reason)) {
        return Label::Memory;
    }
    return Label::Reason;
}

std::string join_content(std::vector<std::string>& lines) {
    while (!lines.empty() && util::trim(lines.back()).empty()) lines.pop_back();
    std::string joined = util::join(lines, "\n");
    lines.clear();
    return util::trim(joined);
}

bool is_placeholder(const std::string& value) {
    std::string lowered = util::to_lower(util::trim(value));
    return lowered.empty() || lowered == "n/a" || lowered == "na" || lowered == "none" ||
           lowered == "-";
}

PlanParseResult parse_block_plan(const std::string& text) {
    PlanParseResult result;
    struct RawStep {
        std::string name;
        std::string requirement;
        std::string knowledge;
        std::string content;
        bool has_requirement = false;
    };
    std::vector<RawStep> raw;
    enum class Field { None, Name, Requirement, Knowledge, Content };
    Field current = Field::None;
    std::vector<std::string> pending;

    auto flush_into = [&](RawStep& step, Field field, std::vector<std::string>& lines) {
        std::string value = join_content(lines);
        switch (field) {
            case Field::Name: if (step.name.empty()) step.name = value; break;
            case Field::Requirement:
                if (!value.empty()) {
                    step.requirement = value;
                    step.has_requirement = true;
                }
                break;
            case Field::Knowledge: step.knowledge = value; break;
            case Field::Content: step.content = value; break;
            default: break;
        }
    };

    for (const std::string& line : util::split_lines(text)) {
        std::string rest;
        if (match_field_header(line, "Step name", rest)) {
            if (!raw.empty() && current != Field::None) {
                flush_into(raw.back(), current, pending);
            }
            pending.clear();
            raw.emplace_back();
            current = Field::Name;
            if (!util::trim(rest).empty()) pending.push_back(rest);
            continue;
        }
        if (raw.empty()) continue; // preamble before the first step
        Field next = Field::None;
        if (match_field_header(line, "Requirement", rest)) next = Field::Requirement;
        else if (match_field_header(line, "Knowledge based", rest)) next = Field::Knowledge;
        else if (match_field_header(line, "Knowledge base", rest)) next = Field::Knowledge;
        else if (match_field_header(line, "Content", rest)) next = Field::Content;
        if (next != Field::None) {
            flush_into(raw.back(), current, pending);
            current = next;
            if (!util::trim(rest).empty()) pending.push_back(rest);
            continue;
        }
        pending.push_back(line);
    }
    if (!raw.empty() && current != Field::None) flush_into(raw.back(), current, pending);

    if (raw.empty()) {
        result.error = "no plan steps found";
        return result;
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const RawStep& r = raw[i];
        if (!r.has_requirement) {
            result.error = "step " + std::to_string(i + 1) + ": missing Requirement";
            return result;
        }
        Label label = requirement_label(r.requirement);
        if (label == Label::None || label == Label::Answer) {
            result.error = "step " + std::to_string(i + 1) +
                           ": Requirement is neither [memory] nor [reason]: " + r.requirement;
            return result;
        }
        if (util::trim(r.content).empty()) {
            result.error = "step " + std::to_string(i + 1) + ": empty Content";
            return result;
        }
        PlanStep step;
        step.name = r.name.empty() ? "Step " + std::to_string(i + 1) : r.name;
        step.kind = label == Label::Memory ? StepKind::Memory : StepKind::Reason;
        step.content = util::trim(r.content);
        if (step.kind == StepKind::Memory) {
            step.knowledge_query =
                is_placeholder(r.knowledge) ? step.content : util::trim(r.knowledge);
        }
        result.steps.push_back(std::move(step));
    }
    result.ok = true;
    return result;
}

PlanParseResult parse_itemized_plan(const std::string& text) {
    PlanParseResult result;
    for (const std::string& line : util::split_lines(text)) {
        if (util::trim(line).empty()) continue;
        auto [label, content] = split_bracket_label(line);
        if (label == Label::None || label == Label::Answer) continue;
        if (content.empty()) {
            result.error = "labeled step with empty content";
            return result;
        }
        PlanStep step;
        step.name = "Step " + std::to_string(result.steps.size() + 1);
        step.kind = label == Label::Memory ? StepKind::Memory : StepKind::Reason;
        step.content = content;
        if (step.kind == StepKind::Memory) step.knowledge_query = content;
        result.steps.push_back(std::move(step));
    }
    if (result.steps.empty()) {
        if (result.error.empty()) result.error = "no plan steps found";
        return result;
    }
    result.ok = true;
    return result;
}

} // namespace

PlanParseResult parse_plan(const std::string& text) {
    // Block form wins when its step marker is present anywhere.
    for (const std::string& line : util::split_lines(text)) {
        std::string rest;
        if (match_field_header(line, "Step name", rest)) return parse_block_plan(text);
    }
    return parse_itemized_plan(text);
}

std::vector<std::string> collect_queries(const std::vector<PlanStep>& steps) {
    std::vector<std::string> queries;
    for (const PlanStep& step : steps) {
        if (step.kind != StepKind::Memory) continue;
        const std::string& q = step.knowledge_query;
        if (q.empty()) continue;
        bool seen = false;
        for (const std::string& existing : queries) seen |= existing == q;
        if (!seen) queries.push_back(q);
    }
    return queries;
}

std::map<std::string, std::string> parse_knowledge_json(const std::string& text) {
    auto try_parse = [](const std::string& candidate,
                        std::map<std::string, std::string>& out) -> bool {
        nlohmann::json j = nlohmann::json::parse(candidate, nullptr, false);
        if (j.is_discarded() || !j.is_object()) return false;
        for (const auto& [key, value] : j.items()) {
            out[key] = value.is_string() ? value.get<std::string>() : value.dump();
        }
        return true;
    };

    std::map<std::string, std::string> out;
    std::string trimmed = util::trim(text);
    if (try_parse(trimmed, out)) return out;

    std::size_t fence = text.find("```");
    while (fence != std::string::npos) {
        std::size_t body_start = text.find('\n', fence);
        std::size_t fence_end = body_start == std::string::npos
                                    ? std::string::npos
                                    : text.find("```", body_start);
        if (body_start == std::string::npos || fence_end == std::string::npos) break;
        if (try_parse(util::trim(text.substr(body_start, fence_end - body_start)), out)) {
            return out;
        }
        fence = text.find("```", fence_end + 3);
    }

    std::size_t open = text.find('{');
    std::size_t close = text.rfind('}');
    if (open != std::string::npos && close != std::string::npos && close > open &&
        try_parse(text.substr(open, close - open + 1), out)) {
        return out;
    }
    throw std::runtime_error("knowledge response contains no JSON dictionary");
}

std::vector<std::string> substitute(std::vector<PlanStep>& steps,
                                    const std::map<std::string, std::string>& answers) {
    std::vector<std::string> unresolved;
    for (PlanStep& step : steps) {
        if (step.kind != StepKind::Memory) continue;
        auto mark_unresolved = [&] {
            bool seen = false;
            for (const std::string& q : unresolved) seen |= q == step.knowledge_query;
            if (!seen) unresolved.push_back(step.knowledge_query);
        };
        auto it = answers.find(step.knowledge_query);
        if (it == answers.end()) {
            mark_unresolved();
            continue;
        }
        std::string answer = util::trim(it->second);
        if (answer.empty()) {
            mark_unresolved();
            continue;
        }
        step.content = answer;
    }
    return unresolved;
}

TraceResult generate_trace(const ingest::QARecord& record, provider::ChatProvider& inference,
                           provider::ChatProvider& knowledge, const GenConfig& cfg) {
    TraceResult result;
    result.reject.record_id = record.id;

    PlanParseResult plan;
    std::string last_error = "no attempts made";
    int attempts = std::max(1, cfg.max_plan_attempts);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        provider::ChatRequest req{cfg.inference_model,
                                  {{"user", build_inference_prompt(record)}},
                                  cfg.temperature};
        std::string response;
        try {
            response = inference.chat(req).content;
        } catch (const provider::ProviderError& e) {
            last_error = e.what();
            continue;
        }
        plan = parse_plan(response);
        if (plan.ok) break;
        last_error = plan.error;
    }
    if (!plan.ok) {
        result.reject.stage = "plan";
        result.reject.diagnostic = last_error;
        return result;
    }

    std::vector<std::string> queries = collect_queries(plan.steps);
    if (!queries.empty()) {
        std::map<std::string, std::string> answers;
        try {
            provider::ChatRequest req{cfg.knowledge_model,
                                      {{"user", build_knowledge_prompt(queries)}},
                                      cfg.temperature};
            answers = parse_knowledge_json(knowledge.chat(req).content);
        } catch (const std::exception&) {
            // Fall through to per-question retries.
            answers.clear();
        }
        std::vector<std::string> unresolved = substitute(plan.steps, answers);
        for (const std::string& query : unresolved) {
            std::string answer;
            try {
                provider::ChatRequest req{cfg.knowledge_model,
                                          {{"user", build_knowledge_prompt({query})}},
                                          cfg.temperature};
                auto single = parse_knowledge_json(knowledge.chat(req).content);
                if (single.count(query)) answer = util::trim(single.at(query));
                else if (single.size() == 1) answer = util::trim(single.begin()->second);
            } catch (const std::exception&) {
            }
            if (answer.empty()) {
                result.reject.stage = "knowledge";
                result.reject.diagnostic = "no knowledge answer for query: " + query;
                return result;
            }
            for (PlanStep& step : plan.steps) {
                if (step.kind == StepKind::Memory && step.knowledge_query == query) {
                    step.content = answer;
                }
            }
        }
    }

    for (const PlanStep& step : plan.steps) {
        if (util::trim(step.content).empty()) {
            result.reject.stage = "knowledge";
            result.reject.diagnostic = "empty content after substitution";
            return result;
        }
    }

    result.ok = true;
    result.trace.record_id = record.id;
    result.trace.steps = std::move(plan.steps);
    result.trace.answer = record.gold;
    return result;
}

BatchResult generate_batch(const std::vector<ingest::QARecord>& records,
                           provider::ChatProvider& inference, provider::ChatProvider& knowledge,
                           const GenConfig& cfg) {
    std::vector<TraceResult> results(records.size());
    util::parallel_for_indexed(records.size(), static_cast<std::size_t>(std::max(1, cfg.workers)),
                               [&](std::size_t i) {
                                   results[i] = generate_trace(records[i], inference, knowledge,
                                                               cfg);
                               });
    BatchResult batch;
    for (TraceResult& r : results) {
        if (r.ok) batch.traces.push_back(std::move(r.trace));
        else batch.rejects.push_back(std::move(r.reject));
    }
    return batch;
}

} // namespace mrcot::datagen
