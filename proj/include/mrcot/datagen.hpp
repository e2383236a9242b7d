#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mrcot/ingest.hpp"
#include "mrcot/provider.hpp"
#include "mrcot/trace.hpp"

namespace mrcot::datagen {

/// Prompt sent to the inference agent: question plus gold answer plus the
/// step block format it must follow.
std::string build_inference_prompt(const ingest::QARecord& record);

/// Prompt sent to the knowledge agent for a batch of standalone questions.
/// Questions appear one per line between the <Questions> markers.
std::string build_knowledge_prompt(const std::vector<std::string>& questions);

/// Gold answer as prose: "True"/"False" for boolean records, "B. bank" for
/// multiple choice.
std::string gold_answer_text(const ingest::QARecord& record);

struct PlanParseResult {
    bool ok = false;
    std::vector<PlanStep> steps;
    std::string error;
};

/// Parses an inference-agent response into plan steps. Two surface forms are
/// accepted:
///  - the block form the prompt asks for (*Step name* / **Requirement** /
///    **Knowledge based** / **Content** headers), and
///  - an itemized form of "[memory]: ..." / "[reason]: ..." lines.
/// Memory steps without a usable retrieval query fall back to their content
/// as the query, so a parsed Memory step always has one.
PlanParseResult parse_plan(const std::string& text);

/// Unique retrieval queries of the Memory steps, in first-appearance order.
std::vector<std::string> collect_queries(const std::vector<PlanStep>& steps);

/// Extracts the question-to-knowledge dictionary from a knowledge-agent
/// response. Accepts a bare JSON object, a fenced ```json block, or an
/// object embedded in prose. Throws std::runtime_error when no object can
/// be recovered.
std::map<std::string, std::string> parse_knowledge_json(const std::string& text);

/// Replaces each Memory step's content with the answer to its query.
/// Returns the queries that had no answer; those steps are left untouched.
std::vector<std::string> substitute(std::vector<PlanStep>& steps,
                                    const std::map<std::string, std::string>& answers);

struct GenConfig {
    std::string inference_model = "inference";
    std::string knowledge_model = "knowledge";
    double temperature = 0.7;
    /// Total plan attempts per record before the record is rejected.
    int max_plan_attempts = 3;
    /// Worker threads for batch generation.
    int workers = 4;
};

/// A record that could not be turned into a trace, with the stage that
/// failed ("plan" or "knowledge") and a diagnostic.
struct Reject {
    std::string record_id;
    std::string stage;
    std::string diagnostic;
};

struct TraceResult {
    bool ok = false;
    AnnotatedTrace trace;
    Reject reject;
};

/// Runs the two-agent pipeline for one record: plan with the inference
/// agent (retrying malformed plans), batch-answer the Memory queries with
/// the knowledge agent, substitute the answers back.
TraceResult generate_trace(const ingest::QARecord& record, provider::ChatProvider& inference,
                           provider::ChatProvider& knowledge, const GenConfig& cfg);

struct BatchResult {
    std::vector<AnnotatedTrace> traces; // record order
    std::vector<Reject> rejects;
};

BatchResult generate_batch(const std::vector<ingest::QARecord>& records,
                           provider::ChatProvider& inference, provider::ChatProvider& knowledge,
                           const GenConfig& cfg);

} // namespace mrcot::datagen
