#include "mrcot/cli.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mrcot/analysis.hpp"
#include "mrcot/datagen.hpp"
#include "mrcot/evalkit.hpp"
#include "mrcot/ingest.hpp"
#include "mrcot/sha256.hpp"
#include "mrcot/toylab/lab.hpp"
#include "mrcot/util.hpp"

namespace mrcot::cli {
namespace {

using nlohmann::json;

namespace fs = std::filesystem;

fs::path artifact(const Config& cfg, const std::string& name) { return cfg.out_dir / name; }

void write_json_file(const fs::path& path, const json& j) { util::write_file(path, j.dump(2) + "\n"); }

/// Records what a command consumed and produced. Written next to the
/// artifacts as {command}.manifest.json; wall time makes it non-reproducible
/// by design, so determinism checks must skip manifests.
class Manifest {
public:
    Manifest(const Config& cfg, std::string command)
        : cfg_(cfg), command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

    void add_input(const fs::path& path) {
        if (path.empty() || !fs::exists(path)) return;
        inputs_[path.string()] = util::sha256_hex(util::read_file(path));
    }

    void add_output(const fs::path& path) { outputs_.push_back(path.filename().string()); }

    void write() {
        auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start_)
                        .count();
        json j;
        j["command"] = command_;
        j["tool_version"] = kToolVersion;
        j["seed"] = cfg_.seed;
        j["config_path"] = cfg_.config_path.string();
        if (fs::exists(cfg_.config_path))
            j["config_digest"] = util::sha256_hex(util::read_file(cfg_.config_path));
        j["inputs"] = inputs_;
        j["outputs"] = outputs_;
        j["wall_ms"] = wall;
        write_json_file(artifact(cfg_, command_ + ".manifest.json"), j);
    }

private:
    const Config& cfg_;
    std::string command_;
    std::chrono::steady_clock::time_point start_;
    std::map<std::string, std::string> inputs_;
    std::vector<std::string> outputs_;
};

std::vector<ingest::QARecord> load_ingested(const Config& cfg, const CommonFlags& flags) {
    fs::path path = artifact(cfg, "ingest.jsonl");
    if (!fs::exists(path))
        throw std::runtime_error("missing " + path.string() + "; run the ingest command first");
    auto records = ingest::read_records_jsonl(path);
    if (flags.limit && records.size() > *flags.limit) records.resize(*flags.limit);
    return records;
}

struct Providers {
    std::unique_ptr<provider::ChatProvider> inference;
    std::unique_ptr<provider::ChatProvider> knowledge;
    std::unique_ptr<provider::ChatProvider> judge;
    std::unique_ptr<provider::Embedder> embedder;
};

Providers make_providers(const Config& cfg, const CommonFlags& flags) {
    Providers p;
    if (flags.mock) {
        p.inference = std::make_unique<provider::MockChatProvider>(
            provider::MockChatProvider::from_dir(*flags.mock, "inference"));
        p.knowledge = std::make_unique<provider::MockChatProvider>(
            provider::MockChatProvider::from_dir(*flags.mock, "knowledge"));
        p.judge = std::make_unique<provider::MockChatProvider>(
            provider::MockChatProvider::from_dir(*flags.mock, "judge"));
        p.embedder = std::make_unique<provider::HashEmbedder>();
        return p;
    }
    provider::HttpConfig http;
    http.base_url = cfg.base_url;
    http.retry = cfg.retry;
    http.connect_timeout_ms = cfg.connect_timeout_ms;
    http.read_timeout_ms = cfg.read_timeout_ms;
    http.max_inflight = cfg.max_inflight;
    http = provider::with_env_defaults(std::move(http));
    if (http.base_url.empty())
        throw std::runtime_error(
            "no provider endpoint: set provider.base_url, PIPELINE_BASE_URL, or pass --mock");
    p.inference = std::make_unique<provider::HttpChatProvider>(http);
    p.knowledge = std::make_unique<provider::HttpChatProvider>(http);
    p.judge = std::make_unique<provider::HttpChatProvider>(http);
    if (cfg.embed_model.empty())
        p.embedder = std::make_unique<provider::HashEmbedder>();
    else
        p.embedder = std::make_unique<provider::HttpEmbedder>(http, cfg.embed_model);
    return p;
}

/// Model outputs to analyze: either the file named in evaluate.outputs_path
/// (JSONL of {record_id, output}) or, by default, the serialized bodies from
/// build-dataset.jsonl replayed as outputs.
std::vector<evalkit::RunOutput> load_outputs(const Config& cfg,
                                             const std::vector<ingest::QARecord>& records,
                                             fs::path* used_path) {
    std::map<std::string, const ingest::QARecord*> by_id;
    for (const auto& rec : records) by_id[rec.id] = &rec;

    fs::path path = cfg.outputs_path;
    bool from_dataset = path.empty();
    if (from_dataset) path = artifact(cfg, "build-dataset.jsonl");
    if (!fs::exists(path))
        throw std::runtime_error("no model outputs: " + path.string() +
                                 " does not exist (set evaluate.outputs_path or run build-dataset)");
    if (used_path) *used_path = path;

    std::vector<evalkit::RunOutput> outputs;
    for (const auto& row : util::read_jsonl(path)) {
        std::string id = row.at("record_id").get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end()) continue;
        evalkit::RunOutput out;
        out.record = *it->second;
        out.output = from_dataset ? row.at("body").get<std::string>() : row.at("output").get<std::string>();
        outputs.push_back(std::move(out));
    }
    if (outputs.empty())
        throw std::runtime_error(path.string() + " holds no outputs for the ingested records");
    return outputs;
}

std::set<std::string> existing_ids(const fs::path& path) {
    std::set<std::string> ids;
    if (!fs::exists(path)) return ids;
    for (const auto& row : util::read_jsonl(path))
        if (row.contains("record_id")) ids.insert(row.at("record_id").get<std::string>());
    return ids;
}

// ---- ingest -----------------------------------------------------------------

std::vector<ingest::QARecord> load_dataset_file(const Config& cfg, const fs::path& path) {
    switch (ingest::dataset_from_name(cfg.dataset_name)) {
    case ingest::Dataset::StrategyQA: return ingest::load_strategyqa(path);
    case ingest::Dataset::CommonsenseQA: return ingest::load_commonsenseqa(path);
    case ingest::Dataset::TruthfulQA: return ingest::load_truthfulqa_mc1(path, cfg.seed);
    }
    throw std::logic_error("unreachable dataset");
}

int cmd_ingest(Config& cfg, const CommonFlags& flags) {
    if (cfg.dataset_name.empty())
        throw std::runtime_error("ingest needs a dataset section with name and path(s)");
    Manifest manifest(cfg, "ingest");

    std::vector<ingest::QARecord> all;
    std::vector<ingest::QARecord> train;
    std::vector<ingest::QARecord> test;
    bool have_split = false;

    if (!cfg.dataset_train_path.empty()) {
        manifest.add_input(cfg.dataset_train_path);
        manifest.add_input(cfg.dataset_test_path);
        train = load_dataset_file(cfg, cfg.dataset_train_path);
        test = load_dataset_file(cfg, cfg.dataset_test_path);
        all = train;
        all.insert(all.end(), test.begin(), test.end());
        have_split = true;
    } else {
        if (cfg.dataset_path.empty())
            throw std::runtime_error("ingest needs dataset.path or dataset.train_path/test_path");
        manifest.add_input(cfg.dataset_path);
        all = load_dataset_file(cfg, cfg.dataset_path);
        if (flags.limit && all.size() > *flags.limit) all.resize(*flags.limit);
        if (cfg.split_fraction) {
            auto split = ingest::split(all, *cfg.split_fraction, cfg.seed);
            train = std::move(split.train);
            test = std::move(split.test);
            have_split = true;
        }
    }
    if (have_split && flags.limit) {
        if (train.size() > *flags.limit) train.resize(*flags.limit);
        if (test.size() > *flags.limit) test.resize(*flags.limit);
        if (!cfg.dataset_train_path.empty()) {
            all = train;
            all.insert(all.end(), test.begin(), test.end());
        }
    }

    ingest::write_records_jsonl(artifact(cfg, "ingest.jsonl"), all);
    manifest.add_output(artifact(cfg, "ingest.jsonl"));
    if (have_split) {
        ingest::write_records_jsonl(artifact(cfg, "ingest.train.jsonl"), train);
        ingest::write_records_jsonl(artifact(cfg, "ingest.test.jsonl"), test);
        manifest.add_output(artifact(cfg, "ingest.train.jsonl"));
        manifest.add_output(artifact(cfg, "ingest.test.jsonl"));
    }
    manifest.write();
    std::cout << "ingest: " << all.size() << " records";
    if (have_split) std::cout << " (" << train.size() << " train, " << test.size() << " test)";
    std::cout << "\n";
    return 0;
}

// ---- generate ----------------------------------------------------------------

int cmd_generate(Config& cfg, const CommonFlags& flags) {
    Manifest manifest(cfg, "generate");
    auto records = load_ingested(cfg, flags);
    manifest.add_input(artifact(cfg, "ingest.jsonl"));
    auto providers = make_providers(cfg, flags);

    fs::path traces_path = artifact(cfg, "generate.jsonl");
    fs::path rejects_path = artifact(cfg, "generate.rejects.jsonl");

    // Resume: keep previously generated traces, only work on missing records.
    std::map<std::string, json> done;
    for (const auto& row : util::read_jsonl(fs::exists(traces_path) ? traces_path
                                                                    : fs::path("/dev/null")))
        done[row.at("record_id").get<std::string>()] = row;

    std::vector<ingest::QARecord> todo;
    for (const auto& rec : records)
        if (!done.count(rec.id)) todo.push_back(rec);

    datagen::GenConfig gen;
    gen.inference_model = cfg.inference_model;
    gen.knowledge_model = cfg.knowledge_model;
    gen.temperature = cfg.temperature;
    gen.workers = cfg.workers;
    auto batch = datagen::generate_batch(todo, *providers.inference, *providers.knowledge, gen);

    for (const auto& trace : batch.traces) done[trace.record_id] = trace_to_json(trace);

    std::vector<json> trace_rows;
    for (const auto& rec : records) {
        auto it = done.find(rec.id);
        if (it != done.end()) trace_rows.push_back(it->second);
    }
    util::write_jsonl(traces_path, trace_rows);

    std::vector<json> reject_rows;
    for (const auto& reject : batch.rejects)
        reject_rows.push_back({{"record_id", reject.record_id},
                               {"stage", reject.stage},
                               {"diagnostic", reject.diagnostic}});
    util::write_jsonl(rejects_path, reject_rows);

    manifest.add_output(traces_path);
    manifest.add_output(rejects_path);
    manifest.write();
    std::cout << "generate: " << trace_rows.size() << "/" << records.size() << " traces ("
              << todo.size() << " new, " << reject_rows.size() << " rejected)\n";
    return 0;
}

// ---- build-dataset -------------------------------------------------------------

int cmd_build_dataset(Config& cfg, const CommonFlags& flags) {
    Manifest manifest(cfg, "build-dataset");
    auto records = load_ingested(cfg, flags);
    manifest.add_input(artifact(cfg, "ingest.jsonl"));

    fs::path traces_path = artifact(cfg, "generate.jsonl");
    if (!fs::exists(traces_path))
        throw std::runtime_error("missing " + traces_path.string() + "; run generate first");
    manifest.add_input(traces_path);

    std::map<std::string, AnnotatedTrace> traces;
    for (const auto& row : util::read_jsonl(traces_path)) {
        auto trace = trace_from_json(row);
        traces[trace.record_id] = std::move(trace);
    }

    std::vector<json> rows;
    for (const auto& rec : records) {
        auto it = traces.find(rec.id);
        if (it == traces.end()) continue;
        auto ex = tokens::serialize(it->second, cfg.scheme, ingest::render_question(rec));
        json row = tokens::example_to_json(ex);
        row["record_id"] = rec.id;
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("no traces matched the ingested records");

    fs::path out = artifact(cfg, "build-dataset.jsonl");
    util::write_jsonl(out, rows);
    manifest.add_output(out);
    manifest.write();
    std::cout << "build-dataset: " << rows.size() << " examples (n_prefix=" << cfg.scheme.n_prefix
              << ", n_special=" << cfg.scheme.n_special << ")\n";
    return 0;
}

// ---- baseline-cot ---------------------------------------------------------------

int cmd_baseline_cot(Config& cfg, const CommonFlags& flags) {
    Manifest manifest(cfg, "baseline-cot");
    auto records = load_ingested(cfg, flags);
    manifest.add_input(artifact(cfg, "ingest.jsonl"));
    auto providers = make_providers(cfg, flags);

    std::vector<json> rows(records.size());
    util::parallel_for_indexed(records.size(), static_cast<std::size_t>(cfg.workers),
                               [&](std::size_t i) {
                                   provider::ChatRequest req;
                                   req.model = cfg.inference_model;
                                   req.temperature = cfg.temperature;
                                   req.messages = {{"user", evalkit::build_oneshot_cot_prompt(
                                                                ingest::render_question(records[i]))}};
                                   json row;
                                   row["record_id"] = records[i].id;
                                   try {
                                       row["output"] = providers.inference->chat(req).content;
                                   } catch (const provider::ProviderError& e) {
                                       row["output"] = "";
                                       row["error"] = e.what();
                                   }
                                   rows[i] = std::move(row);
                               });

    fs::path out = artifact(cfg, "baseline-cot.jsonl");
    util::write_jsonl(out, rows);
    manifest.add_output(out);
    manifest.write();
    std::cout << "baseline-cot: " << rows.size() << " outputs\n";
    return 0;
}

// ---- evaluate -------------------------------------------------------------------

int cmd_evaluate(Config& cfg, const CommonFlags& flags) {
    Manifest manifest(cfg, "evaluate");
    auto records = load_ingested(cfg, flags);
    manifest.add_input(artifact(cfg, "ingest.jsonl"));
    fs::path outputs_path;
    auto outputs = load_outputs(cfg, records, &outputs_path);
    manifest.add_input(outputs_path);
    auto providers = make_providers(cfg, flags);

    fs::path lines_path = artifact(cfg, "evaluate.jsonl");
    std::map<std::string, json> done;
    for (const auto& row :
         util::read_jsonl(fs::exists(lines_path) ? lines_path : fs::path("/dev/null")))
        done[row.at("record_id").get<std::string>()] = row;

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < outputs.size(); ++i)
        if (!done.count(outputs[i].record.id)) todo.push_back(i);

    std::vector<json> fresh(todo.size());
    util::parallel_for_indexed(todo.size(), static_cast<std::size_t>(cfg.workers),
                               [&](std::size_t t) {
                                   const auto& out = outputs[todo[t]];
                                   auto parsed = tokens::parse_output(out.output, cfg.scheme);
                                   std::string user_answer = parsed.answer.value_or(out.output);
                                   auto verdict = evalkit::judge_answer(
                                       ingest::render_question(out.record),
                                       datagen::gold_answer_text(out.record), user_answer,
                                       *providers.judge, cfg.judge_model);
                                   fresh[t] = {{"record_id", out.record.id},
                                               {"verdict", evalkit::verdict_name(verdict.verdict)},
                                               {"answer", user_answer},
                                               {"raw", verdict.raw}};
                               });
    for (auto& row : fresh) done[row.at("record_id").get<std::string>()] = std::move(row);

    std::vector<json> rows;
    std::vector<evalkit::Verdict> verdicts;
    for (const auto& out : outputs) {
        auto it = done.find(out.record.id);
        if (it == done.end()) continue;
        rows.push_back(it->second);
        std::string name = it->second.at("verdict").get<std::string>();
        verdicts.push_back(name == "true"    ? evalkit::Verdict::True
                           : name == "false" ? evalkit::Verdict::False
                                             : evalkit::Verdict::Error);
    }
    util::write_jsonl(lines_path, rows);

    auto report = evalkit::summarize(verdicts);
    json summary;
    summary["total"] = report.total;
    summary["judged"] = report.judged;
    summary["correct"] = report.correct;
    summary["errors"] = report.errors;
    if (report.accuracy) summary["accuracy"] = *report.accuracy;
    summary["outputs_path"] = outputs_path.string();
    write_json_file(artifact(cfg, "evaluate.json"), summary);

    manifest.add_output(lines_path);
    manifest.add_output(artifact(cfg, "evaluate.json"));
    manifest.write();
    std::cout << "evaluate: " << report.correct << "/" << report.judged << " correct";
    if (report.accuracy)
        std::cout << " (accuracy " << util::format_double(*report.accuracy, 3) << ")";
    std::cout << ", " << report.errors << " judge errors\n";
    return 0;
}

// ---- decouple -------------------------------------------------------------------

int cmd_decouple(Config& cfg, const CommonFlags& flags) {
    Manifest manifest(cfg, "decouple");
    auto records = load_ingested(cfg, flags);
    manifest.add_input(artifact(cfg, "ingest.jsonl"));
    fs::path outputs_path;
    auto outputs = load_outputs(cfg, records, &outputs_path);
    manifest.add_input(outputs_path);
    auto providers = make_providers(cfg, flags);

    struct Job {
        std::string record_id;
        std::size_t segment_index;
        tokens::SegmentKind labeled;
        std::string text;
    };
    std::vector<Job> jobs;
    std::vector<tokens::SegmentedOutput> parsed;
    parsed.reserve(outputs.size());
    for (const auto& out : outputs) {
        auto segmented = tokens::parse_output(out.output, cfg.scheme);
        for (std::size_t s = 0; s < segmented.segments.size(); ++s) {
            const auto& seg = segmented.segments[s];
            if (seg.kind != tokens::SegmentKind::Memory && seg.kind != tokens::SegmentKind::Reason)
                continue;
            jobs.push_back({out.record.id, s, seg.kind, seg.text});
        }
        parsed.push_back(std::move(segmented));
    }

    std::vector<evalkit::StepVerdict> verdicts(jobs.size());
    util::parallel_for_indexed(jobs.size(), static_cast<std::size_t>(cfg.workers),
                               [&](std::size_t i) {
                                   verdicts[i] = evalkit::classify_step(jobs[i].text, *providers.judge,
                                                                        cfg.judge_model);
                               });

    std::vector<json> rows;
    std::vector<analysis::ClassifiedStep> classified;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        rows.push_back({{"record_id", jobs[i].record_id},
                        {"segment", jobs[i].segment_index},
                        {"labeled", tokens::segment_kind_name(jobs[i].labeled)},
                        {"judged", evalkit::step_class_name(verdicts[i].cls)},
                        {"raw", verdicts[i].raw}});
        classified.push_back({jobs[i].labeled, verdicts[i].cls});
    }
    fs::path lines_path = artifact(cfg, "decouple.jsonl");
    util::write_jsonl(lines_path, rows);

    auto report = analysis::decoupling_accuracy(classified);
    auto ratio = analysis::memory_reason_ratio(parsed);
    json summary;
    if (report.memory_accuracy) summary["memory_accuracy"] = *report.memory_accuracy;
    if (report.reason_accuracy) summary["reason_accuracy"] = *report.reason_accuracy;
    summary["memory_total"] = report.memory_total;
    summary["memory_agreed"] = report.memory_agreed;
    summary["reason_total"] = report.reason_total;
    summary["reason_agreed"] = report.reason_agreed;
    summary["classifier_errors"] = report.errors;
    summary["memory_steps"] = ratio.memory_steps;
    summary["reason_steps"] = ratio.reason_steps;
    summary["memory_reason_ratio"] = ratio.ratio;
    write_json_file(artifact(cfg, "decouple.json"), summary);

    manifest.add_output(lines_path);
    manifest.add_output(artifact(cfg, "decouple.json"));
    manifest.write();
    std::cout << "decouple: " << jobs.size() << " steps classified, ratio " << ratio.ratio << "\n";
    return 0;
}

// ---- attribute-errors --------------------------------------------------------------

int cmd_attribute_errors(Config& cfg, const CommonFlags& flags) {
    Manifest manifest(cfg, "attribute-errors");
    auto records = load_ingested(cfg, flags);
    manifest.add_input(artifact(cfg, "ingest.jsonl"));
    fs::path outputs_path;
    auto outputs = load_outputs(cfg, records, &outputs_path);
    manifest.add_input(outputs_path);

    fs::path verdicts_path = artifact(cfg, "evaluate.jsonl");
    if (!fs::exists(verdicts_path))
        throw std::runtime_error("missing " + verdicts_path.string() + "; run evaluate first");
    manifest.add_input(verdicts_path);
    std::set<std::string> wrong;
    for (const auto& row : util::read_jsonl(verdicts_path))
        if (row.at("verdict").get<std::string>() == "false")
            wrong.insert(row.at("record_id").get<std::string>());

    std::vector<const evalkit::RunOutput*> targets;
    for (const auto& out : outputs)
        if (wrong.count(out.record.id)) targets.push_back(&out);

    auto providers = make_providers(cfg, flags);
    std::vector<evalkit::ErrorVerdict> verdicts(targets.size());
    util::parallel_for_indexed(targets.size(), static_cast<std::size_t>(cfg.workers),
                               [&](std::size_t i) {
                                   const auto& out = *targets[i];
                                   std::string with_trace =
                                       ingest::render_question(out.record) + "\n" + out.output;
                                   verdicts[i] = evalkit::attribute_error(
                                       with_trace, datagen::gold_answer_text(out.record),
                                       *providers.judge, cfg.judge_model);
                               });

    std::vector<json> rows;
    std::vector<evalkit::ErrorSite> sites;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        rows.push_back({{"record_id", targets[i]->record.id},
                        {"site", evalkit::error_site_name(verdicts[i].site)},
                        {"raw", verdicts[i].raw}});
        sites.push_back(verdicts[i].site);
    }
    fs::path lines_path = artifact(cfg, "attribute-errors.jsonl");
    util::write_jsonl(lines_path, rows);

    auto props = analysis::error_proportions(sites);
    json summary;
    summary["wrong_answers"] = targets.size();
    summary["memory_errors"] = props.memory_errors;
    summary["reason_errors"] = props.reason_errors;
    summary["unattributed"] = props.unattributed;
    summary["memory_percent"] = props.memory_percent;
    summary["reason_percent"] = props.reason_percent;
    write_json_file(artifact(cfg, "attribute-errors.json"), summary);

    manifest.add_output(lines_path);
    manifest.add_output(artifact(cfg, "attribute-errors.json"));
    manifest.write();
    std::cout << "attribute-errors: " << targets.size() << " wrong answers, memory "
              << (props.memory_percent.empty() ? "-" : props.memory_percent + "%") << " / reason "
              << (props.reason_percent.empty() ? "-" : props.reason_percent + "%") << "\n";
    return 0;
}

// ---- overlap --------------------------------------------------------------------

std::vector<std::string> dedupe_keep_order(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& item : items) {
        std::string t = util::trim(item);
        if (t.empty() || !seen.insert(t).second) continue;
        out.push_back(t);
    }
    return out;
}

int cmd_overlap(Config& cfg, const CommonFlags& flags) {
    Manifest manifest(cfg, "overlap");
    auto records = load_ingested(cfg, flags);
    manifest.add_input(artifact(cfg, "ingest.jsonl"));

    fs::path traces_path = artifact(cfg, "generate.jsonl");
    if (!fs::exists(traces_path))
        throw std::runtime_error("missing " + traces_path.string() + "; run generate first");
    manifest.add_input(traces_path);

    std::set<std::string> wanted;
    for (const auto& rec : records) wanted.insert(rec.id);

    std::vector<std::string> set_a;
    for (const auto& row : util::read_jsonl(traces_path)) {
        auto trace = trace_from_json(row);
        if (!wanted.count(trace.record_id)) continue;
        for (const auto& step : trace.steps)
            if (step.kind == StepKind::Memory) set_a.push_back(step.content);
    }

    fs::path outputs_path;
    auto outputs = load_outputs(cfg, records, &outputs_path);
    manifest.add_input(outputs_path);
    std::vector<std::string> set_b;
    for (const auto& out : outputs) {
        auto parsed = tokens::parse_output(out.output, cfg.scheme);
        for (const auto& seg : parsed.segments)
            if (seg.kind == tokens::SegmentKind::Memory) set_b.push_back(seg.text);
    }

    auto providers = make_providers(cfg, flags);
    auto a = dedupe_keep_order(set_a);
    auto b = dedupe_keep_order(set_b);
    auto report = analysis::knowledge_overlap(a, b, *providers.embedder, cfg.overlap_threshold);

    json j;
    j["size_a"] = report.size_a;
    j["size_b"] = report.size_b;
    j["matched_a"] = report.matched_a;
    j["matched_b"] = report.matched_b;
    j["threshold"] = report.threshold;
    j["jaccard"] = report.jaccard;
    j["source_a"] = traces_path.string();
    j["source_b"] = outputs_path.string();
    write_json_file(artifact(cfg, "overlap.json"), j);

    manifest.add_output(artifact(cfg, "overlap.json"));
    manifest.write();
    std::cout << "overlap: |A|=" << report.size_a << " |B|=" << report.size_b << " jaccard "
              << util::format_double(report.jaccard, 3) << "\n";
    return 0;
}

// ---- heatmap --------------------------------------------------------------------

int cmd_heatmap(Config& cfg, const CommonFlags&) {
    if (cfg.attention_path.empty())
        throw std::runtime_error("heatmap needs heatmap.attention_path in the config");
    if (!fs::exists(cfg.attention_path))
        throw std::runtime_error("attention file does not exist: " + cfg.attention_path.string());
    Manifest manifest(cfg, "heatmap");
    manifest.add_input(cfg.attention_path);

    json raw = json::parse(util::read_file(cfg.attention_path));
    auto matrix = analysis::attention_from_json(raw);
    fs::path svg_path = artifact(cfg, "heatmap.svg");
    analysis::write_heatmap(svg_path, matrix);

    json stats;
    stats["size"] = matrix.size();
    stats["special_tokens"] =
        static_cast<std::size_t>(std::count(matrix.special.begin(), matrix.special.end(), true));
    stats["special_attention_mass"] = analysis::special_attention_mass(matrix);
    stats["uniform_special_mass"] = analysis::uniform_special_mass(matrix);
    write_json_file(artifact(cfg, "heatmap.json"), stats);

    manifest.add_output(svg_path);
    manifest.add_output(fs::path(svg_path.string() + ".json"));
    manifest.add_output(artifact(cfg, "heatmap.json"));
    manifest.write();
    std::cout << "heatmap: " << matrix.size() << " tokens, special mass "
              << util::format_double(stats["special_attention_mass"].get<double>(), 4) << " vs uniform "
              << util::format_double(stats["uniform_special_mass"].get<double>(), 4) << "\n";
    return 0;
}

// ---- toylab --------------------------------------------------------------------

toylab::ToyRunConfig toy_config(const Config& cfg) {
    toylab::ToyRunConfig run;
    run.seed = cfg.seed;
    run.scheme = cfg.scheme;
    const json& t = cfg.toylab;
    if (t.is_object()) {
        run.kb_size = t.value("kb_size", run.kb_size);
        run.n_train = t.value("n_train", run.n_train);
        run.n_test = t.value("n_test", run.n_test);
        run.steps = t.value("steps", run.steps);
        run.batch = t.value("batch", run.batch);
        run.lr = t.value("lr", run.lr);
        run.clip_norm = t.value("clip_norm", run.clip_norm);
        run.label_mode = t.value("label_mode", run.label_mode);
        run.d_model = t.value("d_model", run.d_model);
        run.d_ff = t.value("d_ff", run.d_ff);
        run.n_blocks = t.value("n_blocks", run.n_blocks);
        run.init_scale = t.value("init_scale", run.init_scale);
        run.max_seq = t.value("max_seq", run.max_seq);
        run.log_every = t.value("log_every", run.log_every);
        run.attention_tasks = t.value("attention_tasks", run.attention_tasks);
        run.fidelity_tasks = t.value("fidelity_tasks", run.fidelity_tasks);
    }
    return run;
}

int cmd_toylab(Config& cfg, const CommonFlags&) {
    Manifest manifest(cfg, "toylab");

    if (cfg.toylab_mode == "ablate") {
        toylab::AblateConfig ab;
        ab.base = toy_config(cfg);
        const json& t = cfg.toylab;
        if (t.is_object()) {
            if (t.contains("n_special_grid")) ab.n_special_grid = t.at("n_special_grid").get<std::vector<int>>();
            if (t.contains("seeds")) ab.seeds = t.at("seeds").get<std::vector<std::uint64_t>>();
            ab.workers = t.value("workers", ab.workers);
        }
        auto table = toylab::ablate(ab);
        write_json_file(artifact(cfg, "toylab.json"), toylab::ablation_to_json(table));
        util::write_file(artifact(cfg, "toylab.md"), toylab::ablation_to_markdown(table));
        manifest.add_output(artifact(cfg, "toylab.json"));
        manifest.add_output(artifact(cfg, "toylab.md"));
        manifest.write();
        std::cout << "toylab: ablation over " << table.cells.size() << " cells\n"
                  << toylab::ablation_to_markdown(table);
        return 0;
    }

    auto run = toy_config(cfg);
    toylab::validate_config(run);
    auto result = toylab::train_toy(run);
    write_json_file(artifact(cfg, "toylab.json"), toylab::run_result_to_json(result));
    manifest.add_output(artifact(cfg, "toylab.json"));

    std::ostringstream md;
    md << "# Toy run\n\n";
    md << "- loss: " << util::format_double(result.initial_loss, 4) << " -> "
       << util::format_double(result.final_loss, 4) << " over " << run.steps << " steps\n";
    md << "- answer accuracy: " << util::format_double(result.metrics.answer_accuracy, 3) << "\n";
    md << "- memory segment fidelity: " << util::format_double(result.metrics.segment_fidelity, 3)
       << " over " << result.metrics.fidelity_segments << " segments\n";
    md << "- special attention mass: "
       << util::format_double(result.metrics.special_attention_mass, 4) << " (uniform "
       << util::format_double(result.metrics.uniform_special_mass, 4) << ")\n";
    md << "- parameter digest: " << result.param_digest << "\n";
    util::write_file(artifact(cfg, "toylab.md"), md.str());
    manifest.add_output(artifact(cfg, "toylab.md"));

    if (result.attention.size() > 0) {
        fs::path svg_path = artifact(cfg, "toylab.svg");
        analysis::write_heatmap(svg_path, result.attention);
        manifest.add_output(svg_path);
        manifest.add_output(fs::path(svg_path.string() + ".json"));
    }
    manifest.write();
    std::cout << "toylab: loss " << util::format_double(result.initial_loss, 4) << " -> "
              << util::format_double(result.final_loss, 4) << ", accuracy "
              << util::format_double(result.metrics.answer_accuracy, 3) << "\n";
    return 0;
}

// ---- report --------------------------------------------------------------------

int cmd_report(Config& cfg, const CommonFlags&) {
    Manifest manifest(cfg, "report");
    struct Entry {
        std::string name;
        bool present = false;
        json summary;
    };
    std::vector<Entry> entries;
    json combined;
    std::ostringstream md;
    md << "# Pipeline report\n\n";

    auto jsonl_count = [&](const std::string& name) -> std::optional<std::size_t> {
        fs::path p = artifact(cfg, name);
        if (!fs::exists(p)) return std::nullopt;
        manifest.add_input(p);
        return util::read_jsonl(p).size();
    };
    auto json_file = [&](const std::string& name) -> std::optional<json> {
        fs::path p = artifact(cfg, name);
        if (!fs::exists(p)) return std::nullopt;
        manifest.add_input(p);
        return json::parse(util::read_file(p));
    };

    std::vector<std::string> missing;
    bool any = false;

    if (auto n = jsonl_count("ingest.jsonl")) {
        any = true;
        combined["ingest"] = {{"records", *n}};
        md << "## Ingest\n\n" << *n << " records";
        if (auto tr = jsonl_count("ingest.train.jsonl")) {
            auto te = jsonl_count("ingest.test.jsonl");
            combined["ingest"]["train"] = *tr;
            combined["ingest"]["test"] = te.value_or(0);
            md << " (" << *tr << " train, " << te.value_or(0) << " test)";
        }
        md << ".\n\n";
    } else {
        missing.push_back("ingest.jsonl");
    }

    if (auto n = jsonl_count("generate.jsonl")) {
        any = true;
        auto rejects = jsonl_count("generate.rejects.jsonl").value_or(0);
        combined["generate"] = {{"traces", *n}, {"rejects", rejects}};
        md << "## Trace generation\n\n" << *n << " traces, " << rejects << " rejected records.\n\n";
    } else {
        missing.push_back("generate.jsonl");
    }

    if (auto n = jsonl_count("build-dataset.jsonl")) {
        any = true;
        combined["build_dataset"] = {{"examples", *n},
                                     {"n_prefix", cfg.scheme.n_prefix},
                                     {"n_special", cfg.scheme.n_special}};
        md << "## Serialized dataset\n\n" << *n << " training examples (n_prefix="
           << cfg.scheme.n_prefix << ", n_special=" << cfg.scheme.n_special << ").\n\n";
    } else {
        missing.push_back("build-dataset.jsonl");
    }

    if (auto n = jsonl_count("baseline-cot.jsonl")) {
        any = true;
        combined["baseline_cot"] = {{"outputs", *n}};
        md << "## One-shot labeled baseline\n\n" << *n << " outputs.\n\n";
    } else {
        missing.push_back("baseline-cot.jsonl");
    }

    if (auto j = json_file("evaluate.json")) {
        any = true;
        combined["evaluate"] = *j;
        md << "## Answer accuracy\n\n" << j->value("correct", 0) << "/" << j->value("judged", 0)
           << " correct";
        if (j->contains("accuracy"))
            md << " (" << util::format_double(j->at("accuracy").get<double>(), 3) << ")";
        md << ", " << j->value("errors", 0) << " judge errors.\n\n";
    } else {
        missing.push_back("evaluate.json");
    }

    if (auto j = json_file("decouple.json")) {
        any = true;
        combined["decouple"] = *j;
        md << "## Label decoupling\n\n";
        if (j->contains("memory_accuracy"))
            md << "- memory steps judged factual: "
               << util::format_double(j->at("memory_accuracy").get<double>(), 3) << " ("
               << j->value("memory_agreed", 0) << "/" << j->value("memory_total", 0) << ")\n";
        if (j->contains("reason_accuracy"))
            md << "- reason steps judged derivational: "
               << util::format_double(j->at("reason_accuracy").get<double>(), 3) << " ("
               << j->value("reason_agreed", 0) << "/" << j->value("reason_total", 0) << ")\n";
        md << "- memory:reason ratio: " << j->value("memory_reason_ratio", std::string("-")) << "\n\n";
    } else {
        missing.push_back("decouple.json");
    }

    if (auto j = json_file("attribute-errors.json")) {
        any = true;
        combined["attribute_errors"] = *j;
        md << "## Error attribution\n\n" << j->value("wrong_answers", 0)
           << " wrong answers: memory " << j->value("memory_percent", std::string("-"))
           << "% vs reason " << j->value("reason_percent", std::string("-")) << "%.\n\n";
    } else {
        missing.push_back("attribute-errors.json");
    }

    if (auto j = json_file("overlap.json")) {
        any = true;
        combined["overlap"] = *j;
        md << "## Knowledge overlap\n\n|A|=" << j->value("size_a", 0) << ", |B|="
           << j->value("size_b", 0) << ", jaccard "
           << util::format_double(j->value("jaccard", 0.0), 3) << " at threshold "
           << util::format_double(j->value("threshold", 0.0), 2) << ".\n\n";
    } else {
        missing.push_back("overlap.json");
    }

    if (auto j = json_file("heatmap.json")) {
        any = true;
        combined["heatmap"] = *j;
        md << "## Attention heatmap\n\nspecial mass "
           << util::format_double(j->value("special_attention_mass", 0.0), 4) << " vs uniform "
           << util::format_double(j->value("uniform_special_mass", 0.0), 4) << ".\n\n";
    } else {
        missing.push_back("heatmap.json");
    }

    if (auto j = json_file("toylab.json")) {
        any = true;
        combined["toylab"] = *j;
        md << "## Toy model\n\n";
        fs::path toylab_md = artifact(cfg, "toylab.md");
        if (fs::exists(toylab_md)) {
            manifest.add_input(toylab_md);
            std::string text = util::read_file(toylab_md);
            if (util::starts_with(text, "# ")) {
                auto nl = text.find('\n');
                text = nl == std::string::npos ? std::string() : text.substr(nl + 1);
            }
            md << util::trim(text) << "\n\n";
        } else if (j->contains("metrics")) {
            md << "answer accuracy "
               << util::format_double(j->at("metrics").value("answer_accuracy", 0.0), 3) << ".\n\n";
        }
    } else {
        missing.push_back("toylab.json");
    }

    if (!any)
        throw std::runtime_error("nothing to report: no pipeline artifacts in " +
                                 cfg.out_dir.string());

    if (!missing.empty()) {
        md << "## Missing artifacts\n\n";
        for (const auto& name : missing) md << "- " << name << "\n";
        md << "\n";
        combined["missing"] = missing;
    }

    util::write_file(artifact(cfg, "report.md"), md.str());
    write_json_file(artifact(cfg, "report.json"), combined);
    manifest.add_output(artifact(cfg, "report.md"));
    manifest.add_output(artifact(cfg, "report.json"));
    manifest.write();
    std::cout << "report: written to " << artifact(cfg, "report.md").string() << " ("
              << missing.size() << " artifacts missing)\n";
    return 0;
}

} // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {
        "ingest",   "generate", "build-dataset",    "baseline-cot", "evaluate", "decouple",
        "attribute-errors", "overlap",  "heatmap", "toylab",       "report",
    };
    return names;
}

int run_command(const std::string& command, Config& cfg, const CommonFlags& flags) {
    try {
        std::filesystem::create_directories(cfg.out_dir);
        if (command == "ingest") return cmd_ingest(cfg, flags);
        if (command == "generate") return cmd_generate(cfg, flags);
        if (command == "build-dataset") return cmd_build_dataset(cfg, flags);
        if (command == "baseline-cot") return cmd_baseline_cot(cfg, flags);
        if (command == "evaluate") return cmd_evaluate(cfg, flags);
        if (command == "decouple") return cmd_decouple(cfg, flags);
        if (command == "attribute-errors") return cmd_attribute_errors(cfg, flags);
        if (command == "overlap") return cmd_overlap(cfg, flags);
        if (command == "heatmap") return cmd_heatmap(cfg, flags);
        if (command == "toylab") return cmd_toylab(cfg, flags);
        if (command == "report") return cmd_report(cfg, flags);
        std::cerr << "error: unknown command " << command << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace mrcot::cli
