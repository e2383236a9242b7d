#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace mrcot::ingest {

enum class Dataset { StrategyQA, CommonsenseQA, TruthfulQA };

std::string dataset_name(Dataset d);
Dataset dataset_from_name(const std::string& name);

struct Option {
    std::string label;
    std::string text;

    bool operator==(const Option&) const = default;
};

/// Canonical question record shared by every downstream stage.
struct QARecord {
    std::string id;
    Dataset dataset = Dataset::StrategyQA;
    std::string question;
    /// Empty for boolean benchmarks; labeled choices for multiple choice.
    std::vector<Option> options;
    /// Gold answer: "True"/"False" for boolean benchmarks, an option label
    /// for multiple choice.
    std::string gold;

    bool operator==(const QARecord&) const = default;
};

/// Boolean QA source: array or JSONL of {qid, question, answer} with a
/// boolean answer. Gold becomes "True"/"False".
std::vector<QARecord> load_strategyqa(const std::filesystem::path& path);

/// Multiple-choice source: array or JSONL of
/// {id, question: {stem, choices: [{label, text}]}, answerKey}.
std::vector<QARecord> load_commonsenseqa(const std::filesystem::path& path);

/// Single-true multiple-choice source: array or JSONL of
/// {question, mc1_targets: {choices: [...], labels: [1, 0, ...]}}. The
/// published layout always lists the correct choice first, so options are
/// reshuffled per record (keyed by seed and record index) and relabeled
/// A, B, C, ... before use; gold tracks the originally-correct choice text.
std::vector<QARecord> load_truthfulqa_mc1(const std::filesystem::path& path, std::uint64_t seed);

struct SplitResult {
    std::vector<QARecord> train;
    std::vector<QARecord> test;
};

/// Seeded random split. Train receives ceil(fraction * N) records; both
/// halves keep the input's relative order.
SplitResult split(const std::vector<QARecord>& records, double fraction, std::uint64_t seed);

/// Question text a model sees: the stem, then one "L. text" line per option.
std::string render_question(const QARecord& record);

nlohmann::json record_to_json(const QARecord& record);
QARecord record_from_json(const nlohmann::json& j);

void write_records_jsonl(const std::filesystem::path& path, const std::vector<QARecord>& records);
std::vector<QARecord> read_records_jsonl(const std::filesystem::path& path);

} // namespace mrcot::ingest
