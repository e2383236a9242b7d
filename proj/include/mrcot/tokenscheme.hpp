#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrcot/trace.hpp"

namespace mrcot::tokens {

/// Special-token scheme that marks which portion of a serialized chain of
/// thought is retrieval and which is derivation.
///
/// A scheme (n_prefix, n_special) contributes the control tokens
///   <prefix_0>..<prefix_{n_prefix-1}>
///   <memory_0>..<memory_{n_special-1}>
///   <reason_0>..<reason_{n_special-1}>
///   <answer_0>..<answer_{n_special-1}>
/// With n_special == 0 no control tokens exist and serialization degrades to
/// plain text.
struct TokenScheme {
    int n_prefix = 3;
    int n_special = 4;

    bool operator==(const TokenScheme&) const = default;

    /// Full ordered token list: prefix run, then the memory/reason/answer
    /// runs. Empty when n_special == 0.
    std::vector<std::string> vocabulary() const;

    std::string prefix_token(int i) const;
    std::string kind_token(StepKind kind, int i) const;
    std::string answer_token(int i) const;

    /// The n_special-token header that opens a step of the given kind.
    std::string step_header(StepKind kind) const;
    std::string answer_header() const;
    std::string prefix_block() const;
};

/// One supervised example: the serialized body is what a model is trained to
/// produce given the question.
struct TrainingExample {
    std::string question;
    std::string body;
    std::string answer;
    TokenScheme scheme;

    bool operator==(const TrainingExample&) const = default;
};

enum class SegmentKind { Memory, Reason, Answer, Other };

std::string segment_kind_name(SegmentKind kind);

struct Segment {
    SegmentKind kind = SegmentKind::Other;
    std::string text;

    bool operator==(const Segment&) const = default;
};

/// Result of segmenting a model output back into labeled spans.
struct SegmentedOutput {
    std::vector<Segment> segments;
    /// Final answer text if the output contains one.
    std::optional<std::string> answer;
};

/// Sentence that introduces the final answer; the serialized body always ends
/// with it and the parser recognizes it.
inline constexpr const char* kAnswerSentencePrefix = "The answer is:";

/// Serializes a trace into its training body:
///   <prefix tokens><first step header>\n<content>\n<next header>\n...\n
///   <answer header>\nThe answer is: {answer}
/// With n_special == 0, step contents are joined by blank lines and followed
/// by the bare answer sentence.
TrainingExample serialize(const AnnotatedTrace& trace, const TokenScheme& scheme,
                          const std::string& question = "");

/// Splits text into labeled segments. A line opening with control tokens
/// starts a new segment whose kind is taken from the first non-prefix token.
/// Plain-label lines ("[memory]: ...", "[rag]: ...", "[reason]: ...",
/// "[answer]: ...") are honored as well so outputs of unadapted models can be
/// segmented; [rag] counts as Memory. Text before any marker becomes an
/// Other segment. The final answer is read from the answer sentence.
SegmentedOutput parse_output(const std::string& text, const TokenScheme& scheme);

/// Permutes the step label headers of each example in place, leaving contents
/// where they are. Each example uses an RNG keyed by (seed, example index) so
/// a subset of a dataset shuffles identically to the full set. Throws if the
/// scheme has no label tokens.
void shuffle_labels(std::vector<TrainingExample>& examples, std::uint64_t seed);

nlohmann::json example_to_json(const TrainingExample& ex);
TrainingExample example_from_json(const nlohmann::json& j);

} // namespace mrcot::tokens
