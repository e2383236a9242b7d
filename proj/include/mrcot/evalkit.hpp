#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mrcot/ingest.hpp"
#include "mrcot/provider.hpp"

namespace mrcot::evalkit {

/// Renders the True/False answer-judging prompt.
std::string render_judge_prompt(const std::string& question, const std::string& correct_answer,
                                const std::string& user_answer);

/// Renders the 0/1 step-classification prompt (0 factual knowledge,
/// 1 reasoning process).
std::string render_step_prompt(const std::string& sentence);

/// Renders the memory/reason error-attribution prompt. `question_with_trace`
/// is the question followed by the full labeled output being diagnosed.
std::string render_error_prompt(const std::string& question_with_trace,
                                const std::string& correct_answer);

/// Renders the one-shot labeled chain-of-thought prompt used as the
/// unadapted-model baseline; the model is asked for [rag]/[reason] steps.
std::string build_oneshot_cot_prompt(const std::string& question);

enum class Verdict { True, False, Error };

std::string verdict_name(Verdict v);

struct JudgeVerdict {
    Verdict verdict = Verdict::Error;
    std::string raw;

    bool correct() const { return verdict == Verdict::True; }
};

/// Strict verdict normalization: the response must consist of the single
/// word True or False (case-insensitive, punctuation ignored); anything else
/// is Error.
Verdict normalize_verdict(const std::string& raw);

JudgeVerdict judge_answer(const std::string& question, const std::string& correct_answer,
                          const std::string& user_answer, provider::ChatProvider& judge,
                          const std::string& model);

enum class StepClass { Memory, Reason, Error };

std::string step_class_name(StepClass c);

struct StepVerdict {
    StepClass cls = StepClass::Error;
    std::string raw;
};

/// Strict 0/1 normalization: the digits in the response must be exactly "0"
/// (factual knowledge) or "1" (reasoning); anything else is Error.
StepClass normalize_step_class(const std::string& raw);

StepVerdict classify_step(const std::string& sentence, provider::ChatProvider& judge,
                          const std::string& model);

enum class ErrorSite { Memory, Reason, Error };

std::string error_site_name(ErrorSite e);

struct ErrorVerdict {
    ErrorSite site = ErrorSite::Error;
    std::string raw;
};

/// The response must contain exactly one of the words "memory" and "reason"
/// (case-insensitive); containing both or neither is Error.
ErrorSite normalize_error_site(const std::string& raw);

ErrorVerdict attribute_error(const std::string& question_with_trace,
                             const std::string& correct_answer, provider::ChatProvider& judge,
                             const std::string& model);

/// One model output paired with the record it answers.
struct RunOutput {
    ingest::QARecord record;
    std::string output;
};

struct AccuracyReport {
    std::size_t total = 0;
    std::size_t judged = 0; // verdicts that were not Error
    std::size_t correct = 0;
    std::size_t errors = 0;
    /// correct / judged; empty when nothing could be judged.
    std::optional<double> accuracy;
};

AccuracyReport summarize(const std::vector<Verdict>& verdicts);

} // namespace mrcot::evalkit
