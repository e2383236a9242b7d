#include "mrcot/ingest.hpp"

#include <cmath>
#include <stdexcept>

#include "mrcot/util.hpp"

namespace mrcot::ingest {

namespace {

using util::json;

/// Source files come either as one JSON array or as JSONL.
std::vector<json> load_rows(const std::filesystem::path& path) {
    std::string text = util::read_file(path);
    std::string head = util::trim(text);
    if (!head.empty() && head.front() == '[') {
        json arr = json::parse(text);
        if (!arr.is_array()) throw std::runtime_error(path.string() + ": expected a JSON array");
        return std::vector<json>(arr.begin(), arr.end());
    }
    return util::read_jsonl(path);
}

std::string option_label(std::size_t i) {
    std::string label;
    label.push_back(static_cast<char>('A' + i % 26));
    if (i >= 26) label += std::to_string(i / 26);
    return label;
}

} // namespace

std::string dataset_name(Dataset d) {
    switch (d) {
        case Dataset::StrategyQA: return "StrategyQA";
        case Dataset::CommonsenseQA: return "CommonsenseQA";
        case Dataset::TruthfulQA: return "TruthfulQA";
    }
    return "StrategyQA";
}

Dataset dataset_from_name(const std::string& name) {
    std::string n = util::to_lower(name);
    if (n == "strategyqa") return Dataset::StrategyQA;
    if (n == "commonsenseqa") return Dataset::CommonsenseQA;
    if (n == "truthfulqa") return Dataset::TruthfulQA;
    throw std::invalid_argument("unknown dataset: " + name);
}

std::vector<QARecord> load_strategyqa(const std::filesystem::path& path) {
    std::vector<QARecord> records;
    std::size_t index = 0;
    for (const json& row : load_rows(path)) {
        QARecord rec;
        rec.dataset = Dataset::StrategyQA;
        if (row.contains("qid")) rec.id = row.at("qid").get<std::string>();
        else if (row.contains("id")) rec.id = row.at("id").get<std::string>();
        else rec.id = "strategyqa-" + std::to_string(index);
        rec.question = row.at("question").get<std::string>();
        if (!row.at("answer").is_boolean()) {
            throw std::runtime_error(path.string() + ": record " + rec.id +
                                     ": answer must be a boolean");
        }
        rec.gold = row.at("answer").get<bool>() ? "True" : "False";
        records.push_back(std::move(rec));
        ++index;
    }
    return records;
}

std::vector<QARecord> load_commonsenseqa(const std::filesystem::path& path) {
    std::vector<QARecord> records;
    std::size_t index = 0;
    for (const json& row : load_rows(path)) {
        QARecord rec;
        rec.dataset = Dataset::CommonsenseQA;
        if (row.contains("id")) rec.id = row.at("id").get<std::string>();
        else rec.id = "commonsenseqa-" + std::to_string(index);
        const json& q = row.at("question");
        rec.question = q.at("stem").get<std::string>();
        for (const json& choice : q.at("choices")) {
            rec.options.push_back(
                {choice.at("label").get<std::string>(), choice.at("text").get<std::string>()});
        }
        rec.gold = row.at("answerKey").get<std::string>();
        bool gold_found = false;
        for (const Option& opt : rec.options) gold_found |= opt.label == rec.gold;
        if (!gold_found) {
            throw std::runtime_error(path.string() + ": record " + rec.id +
                                     ": answerKey does not match any choice label");
        }
        records.push_back(std::move(rec));
        ++index;
    }
    return records;
}

std::vector<QARecord> load_truthfulqa_mc1(const std::filesystem::path& path, std::uint64_t seed) {
    std::vector<QARecord> records;
    std::size_t index = 0;
    for (const json& row : load_rows(path)) {
        QARecord rec;
        rec.dataset = Dataset::TruthfulQA;
        if (row.contains("id")) rec.id = row.at("id").get<std::string>();
        else rec.id = "truthfulqa-" + std::to_string(index);
        rec.question = row.at("question").get<std::string>();

        const json& targets = row.at("mc1_targets");
        std::vector<std::string> choices;
        std::vector<int> labels;
        if (targets.is_object() && targets.contains("choices")) {
            for (const json& c : targets.at("choices")) choices.push_back(c.get<std::string>());
            for (const json& l : targets.at("labels")) labels.push_back(l.get<int>());
        } else if (targets.is_object()) {
            // Alternative layout: a {choice text: 0/1} map.
            for (const auto& [text, flag] : targets.items()) {
                choices.push_back(text);
                labels.push_back(flag.get<int>());
            }
        }
        if (choices.empty() || choices.size() != labels.size()) {
            throw std::runtime_error(path.string() + ": record " + rec.id +
                                     ": malformed mc1_targets");
        }
        int correct = -1;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == 1) {
                if (correct >= 0) {
                    throw std::runtime_error(path.string() + ": record " + rec.id +
                                             ": more than one correct mc1 choice");
                }
                correct = static_cast<int>(i);
            }
        }
        if (correct < 0) {
            throw std::runtime_error(path.string() + ": record " + rec.id +
                                     ": no correct mc1 choice");
        }
        std::string correct_text = choices[static_cast<std::size_t>(correct)];

        // The source always lists the correct choice first; shuffle so the
        // gold label position carries no signal.
        util::Rng rng(util::derive_seed(seed, index));
        std::vector<std::size_t> order = rng.permutation(choices.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            rec.options.push_back({option_label(i), choices[order[i]]});
            if (choices[order[i]] == correct_text && rec.gold.empty()) {
                rec.gold = rec.options.back().label;
            }
        }
        records.push_back(std::move(rec));
        ++index;
    }
    return records;
}

SplitResult split(const std::vector<QARecord>& records, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("split fraction must be within [0, 1]");
    }
    std::size_t n = records.size();
    auto train_size =
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)) + 0.5);
    if (train_size > n) train_size = n;

    util::Rng rng(seed);
    std::vector<std::size_t> order = rng.permutation(n);
    std::vector<bool> in_train(n, false);
    for (std::size_t i = 0; i < train_size; ++i) in_train[order[i]] = true;

    SplitResult result;
    for (std::size_t i = 0; i < n; ++i) {
        (in_train[i] ? result.train : result.test).push_back(records[i]);
    }
    return result;
}

std::string render_question(const QARecord& record) {
    std::string out = record.question;
    for (const Option& opt : record.options) {
        out += '\n';
        out += opt.label;
        out += ". ";
        out += opt.text;
    }
    return out;
}

nlohmann::json record_to_json(const QARecord& record) {
    json options = json::array();
    for (const Option& opt : record.options) {
        options.push_back({{"label", opt.label}, {"text", opt.text}});
    }
    return json{{"id", record.id},
                {"dataset", dataset_name(record.dataset)},
                {"question", record.question},
                {"options", std::move(options)},
                {"gold", record.gold}};
}

QARecord record_from_json(const nlohmann::json& j) {
    QARecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.dataset = dataset_from_name(j.at("dataset").get<std::string>());
    rec.question = j.at("question").get<std::string>();
    for (const auto& opt : j.at("options")) {
        rec.options.push_back(
            {opt.at("label").get<std::string>(), opt.at("text").get<std::string>()});
    }
    rec.gold = j.at("gold").get<std::string>();
    return rec;
}

void write_records_jsonl(const std::filesystem::path& path, const std::vector<QARecord>& records) {
    std::vector<json> rows;
    rows.reserve(records.size());
    for (const QARecord& rec : records) rows.push_back(record_to_json(rec));
    util::write_jsonl(path, rows);
}

std::vector<QARecord> read_records_jsonl(const std::filesystem::path& path) {
    std::vector<QARecord> records;
    for (const json& row : util::read_jsonl(path)) records.push_back(record_from_json(row));
    return records;
}

} // namespace mrcot::ingest
