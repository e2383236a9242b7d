#include "mrcot/toylab/lab.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "mrcot/toylab/kernels.hpp"
#include "mrcot/util.hpp"

namespace mrcot::toylab {

std::string Kb::fact(int entity) const {
    return "e" + std::to_string(entity) + " = " +
           std::to_string(values.at(static_cast<std::size_t>(entity)));
}

std::vector<std::string> Kb::facts() const {
    std::vector<std::string> out;
    out.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out.push_back(fact(static_cast<int>(i)));
    return out;
}

Kb gen_kb(int kb_size, std::uint64_t seed) {
    if (kb_size < 2) throw std::invalid_argument("kb needs at least two entities");
    Kb kb;
    util::Rng rng(util::derive_seed(seed, 1));
    kb.values.reserve(static_cast<std::size_t>(kb_size));
    for (int i = 0; i < kb_size; ++i) kb.values.push_back(static_cast<int>(rng.below(10)));
    return kb;
}

std::string ToyTask::question() const {
    return "e" + std::to_string(a) + " " + op + " e" + std::to_string(b) + " ?";
}

bool task_truth(const ToyTask& task, const Kb& kb) {
    int va = kb.values.at(static_cast<std::size_t>(task.a));
    int vb = kb.values.at(static_cast<std::size_t>(task.b));
    if (task.op == "gt") return va > vb;
    if (task.op == "eq") return va == vb;
    if (task.op == "par") return va % 2 == vb % 2;
    throw std::invalid_argument("unknown op: " + task.op);
}

std::vector<ToyTask> gen_tasks(int n, const Kb& kb, std::uint64_t seed) {
    int k = static_cast<int>(kb.values.size());
    std::vector<ToyTask> pool;
    pool.reserve(static_cast<std::size_t>(k) * static_cast<std::size_t>(k - 1) * 3);
    for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) {
            if (a == b) continue;
            for (const char* op : {"gt", "eq", "par"}) {
                ToyTask task{a, b, op, false};
                task.truth = task_truth(task, kb);
                pool.push_back(std::move(task));
            }
        }
    }
    util::Rng rng(util::derive_seed(seed, 2));
    rng.shuffle(pool);

    std::vector<ToyTask> truths, falses;
    for (ToyTask& task : pool) (task.truth ? truths : falses).push_back(std::move(task));

    std::vector<ToyTask> out;
    out.reserve(static_cast<std::size_t>(n));
    std::size_t ti = 0, fi = 0;
    for (int i = 0; i < n; ++i) {
        bool want_true = i % 2 == 0;
        if (want_true) {
            if (ti >= truths.size()) {
                throw std::runtime_error("kb cannot supply enough distinct True tasks");
            }
            out.push_back(truths[ti++]);
        } else {
            if (fi >= falses.size()) {
                throw std::runtime_error("kb cannot supply enough distinct False tasks");
            }
            out.push_back(falses[fi++]);
        }
        out.back().recall = {out.back().a, out.back().b};
    }
    return out;
}

namespace {

PlanStep recall_step(int entity, const Kb& kb) {
    PlanStep step;
    step.name = "Recall e" + std::to_string(entity);
    step.kind = StepKind::Memory;
    step.knowledge_query = "what is e" + std::to_string(entity) + " ?";
    step.content = kb.fact(entity);
    return step;
}

} // namespace

AnnotatedTrace task_to_trace(const ToyTask& task, const Kb& kb, const std::string& record_id) {
    std::string truth = task.truth ? "True" : "False";

    AnnotatedTrace trace;
    trace.record_id = record_id;
    trace.answer = truth;

    if (task.recall.empty()) {
        trace.steps.push_back(recall_step(task.a, kb));
        trace.steps.push_back(recall_step(task.b, kb));
    } else {
        for (int entity : task.recall) trace.steps.push_back(recall_step(entity, kb));
    }

    int va = kb.values.at(static_cast<std::size_t>(task.a));
    int vb = kb.values.at(static_cast<std::size_t>(task.b));
    PlanStep compare;
    compare.name = "Compare";
    compare.kind = StepKind::Reason;
    compare.content = "the values are " + std::to_string(va) + " " + task.op + " " +
                      std::to_string(vb) + " so " + truth;
    trace.steps.push_back(std::move(compare));

    return trace;
}

void validate_config(const ToyRunConfig& cfg) {
    if (cfg.label_mode != "correct" && cfg.label_mode != "shuffled" && cfg.label_mode != "none") {
        throw std::invalid_argument("label_mode must be correct, shuffled or none");
    }
    if ((cfg.label_mode == "none") != (cfg.scheme.n_special == 0)) {
        throw std::invalid_argument(
            "label_mode none is exactly the n_special == 0 configuration");
    }
    if (cfg.n_train < 1 || cfg.n_test < 0) throw std::invalid_argument("bad task counts");
    if (cfg.batch < 1 || cfg.steps < 0 || cfg.lr <= 0.0 || cfg.clip_norm < 0.0) {
        throw std::invalid_argument("bad training hyperparameters");
    }
    if (cfg.kb_size < 2 || cfg.kb_size > 100) {
        throw std::invalid_argument("kb_size must be in [2, 100]");
    }
}

namespace {

struct PreparedTask {
    ToyTask task;
    AnnotatedTrace trace;
    std::vector<int> gold_seq; // question + correctly labeled body + eos
};

std::vector<int> sequence_for(const std::string& question, const std::string& body,
                              const Vocab& vocab) {
    std::vector<int> seq = tokenize(question + "\n" + body, vocab);
    seq.push_back(vocab.eos);
    return seq;
}

} // namespace

ToyRunResult train_toy(const ToyRunConfig& cfg) {
    validate_config(cfg);
    ToyRunResult result;
    result.cfg = cfg;

    Kb kb = gen_kb(cfg.kb_size, cfg.seed);
    std::vector<ToyTask> tasks = gen_tasks(cfg.n_train + cfg.n_test, kb, cfg.seed);
    Vocab vocab = build_vocab(cfg.kb_size, cfg.scheme);

    // Training texts, with label intervention if requested.
    std::vector<tokens::TrainingExample> examples;
    examples.reserve(static_cast<std::size_t>(cfg.n_train));
    for (int i = 0; i < cfg.n_train; ++i) {
        AnnotatedTrace trace = task_to_trace(tasks[static_cast<std::size_t>(i)], kb,
                                             "task-" + std::to_string(i));
        examples.push_back(tokens::serialize(trace, cfg.scheme,
                                             tasks[static_cast<std::size_t>(i)].question()));
    }
    if (cfg.label_mode == "shuffled") {
        tokens::shuffle_labels(examples, util::derive_seed(cfg.seed, 3));
    }
    std::vector<std::vector<int>> train_seqs;
    train_seqs.reserve(examples.size());
    for (const tokens::TrainingExample& ex : examples) {
        train_seqs.push_back(sequence_for(ex.question, ex.body, vocab));
    }

    // Held-out tasks always carry correct labels.
    std::vector<PreparedTask> test;
    test.reserve(static_cast<std::size_t>(cfg.n_test));
    for (int i = 0; i < cfg.n_test; ++i) {
        PreparedTask pt;
        pt.task = tasks[static_cast<std::size_t>(cfg.n_train + i)];
        pt.trace = task_to_trace(pt.task, kb, "test-" + std::to_string(i));
        tokens::TrainingExample ex = tokens::serialize(pt.trace, cfg.scheme, pt.task.question());
        pt.gold_seq = sequence_for(ex.question, ex.body, vocab);
        test.push_back(std::move(pt));
    }

    ModelConfig mc{static_cast<int>(vocab.size()), cfg.max_seq, cfg.d_model, cfg.d_ff,
                   cfg.n_blocks, cfg.init_scale};
    ToyModel model(mc);
    model.init(util::derive_seed(cfg.seed, 4));

    result.initial_loss = batch_loss(model, train_seqs);

    util::Rng sampler(util::derive_seed(cfg.seed, 5));
    std::vector<double> grad;
    std::vector<std::vector<int>> batch;
    for (int step = 1; step <= cfg.steps; ++step) {
        batch.clear();
        for (int b = 0; b < cfg.batch; ++b) {
            batch.push_back(train_seqs[static_cast<std::size_t>(sampler.below(train_seqs.size()))]);
        }
        double loss = batch_loss_grad(model, batch, grad);
        if (!std::isfinite(loss)) {
            throw std::runtime_error("training diverged at step " + std::to_string(step));
        }
        double scale = cfg.lr;
        if (cfg.clip_norm > 0.0) {
            double norm2 = 0.0;
            for (double g : grad) norm2 += g * g;
            double norm = std::sqrt(norm2);
            if (norm > cfg.clip_norm) scale = cfg.lr * cfg.clip_norm / norm;
        }
        for (std::size_t i = 0; i < model.theta.size(); ++i) {
            model.theta[i] -= scale * grad[i];
        }
        if (step % cfg.log_every == 0 || step == cfg.steps) {
            result.loss_curve.emplace_back(step, loss);
        }
    }

    result.final_loss = batch_loss(model, train_seqs);
    result.param_digest = model.digest();

    // Held-out evaluation.
    int true_id = vocab.id("True");
    int false_id = vocab.id("False");
    std::size_t correct = 0;
    Activations acts;
    for (const PreparedTask& pt : test) {
        const std::vector<int>& seq = pt.gold_seq;
        forward(model, seq, acts);
        std::size_t slot = seq.size() - 3; // the "is:" position predicts the answer
        const double* row = acts.logits.data() + slot * vocab.size();
        int pick = row[static_cast<std::size_t>(true_id)] >=
                           row[static_cast<std::size_t>(false_id)]
                       ? true_id
                       : false_id;
        if (pick == seq[seq.size() - 2]) ++correct;
    }
    result.metrics.answer_accuracy =
        test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());

    // Generation fidelity of memory segments.
    std::set<std::string> fact_set;
    for (const std::string& f : kb.facts()) fact_set.insert(f);
    std::size_t seg_total = 0, seg_good = 0;
    int fidelity_n = std::min<int>(cfg.fidelity_tasks, static_cast<int>(test.size()));
    for (int i = 0; i < fidelity_n; ++i) {
        std::vector<int> prompt = tokenize(test[static_cast<std::size_t>(i)].task.question(),
                                           vocab);
        std::vector<int> gen = greedy_generate(model, prompt, vocab.eos);
        std::vector<int> completion(gen.begin() + static_cast<std::ptrdiff_t>(prompt.size()),
                                    gen.end());
        tokens::SegmentedOutput segmented =
            tokens::parse_output(detokenize(completion, vocab), cfg.scheme);
        for (const tokens::Segment& seg : segmented.segments) {
            if (seg.kind != tokens::SegmentKind::Memory) continue;
            ++seg_total;
            if (fact_set.count(util::trim(seg.text))) ++seg_good;
        }
    }
    result.metrics.fidelity_segments = seg_total;
    result.metrics.segment_fidelity =
        seg_total == 0 ? 0.0 : static_cast<double>(seg_good) / static_cast<double>(seg_total);

    // Attention mass on control tokens. Without a scheme vocabulary there is
    // no special column to measure, so the metric stays at zero.
    int attn_n = cfg.scheme.n_special == 0
                     ? 0
                     : std::min<int>(cfg.attention_tasks, static_cast<int>(test.size()));
    double mass = 0.0, uniform = 0.0;
    for (int i = 0; i < attn_n; ++i) {
        const std::vector<int>& seq = test[static_cast<std::size_t>(i)].gold_seq;
        std::vector<double> rows = attention_rows(model, seq);
        analysis::AttentionMatrix m;
        m.labels.reserve(seq.size());
        for (int id : seq) {
            m.labels.push_back(vocab.tokens[static_cast<std::size_t>(id)]);
            m.special.push_back(vocab.special[static_cast<std::size_t>(id)]);
        }
        m.weights.resize(seq.size());
        for (std::size_t r = 0; r < seq.size(); ++r) {
            m.weights[r].assign(rows.begin() + static_cast<std::ptrdiff_t>(r * seq.size()),
                                rows.begin() + static_cast<std::ptrdiff_t>((r + 1) * seq.size()));
        }
        mass += analysis::special_attention_mass(m);
        uniform += analysis::uniform_special_mass(m);
        if (i == 0) result.attention = std::move(m);
    }
    if (attn_n > 0) {
        result.metrics.special_attention_mass = mass / attn_n;
        result.metrics.uniform_special_mass = uniform / attn_n;
    }

    return result;
}

nlohmann::json run_result_to_json(const ToyRunResult& result) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& [step, loss] : result.loss_curve) {
        curve.push_back({{"step", step}, {"loss", loss}});
    }
    return nlohmann::json{
        {"config",
         {{"kb_size", result.cfg.kb_size},
          {"n_train", result.cfg.n_train},
          {"n_test", result.cfg.n_test},
          {"steps", result.cfg.steps},
          {"batch", result.cfg.batch},
          {"lr", result.cfg.lr},
          {"clip_norm", result.cfg.clip_norm},
          {"seed", result.cfg.seed},
          {"n_prefix", result.cfg.scheme.n_prefix},
          {"n_special", result.cfg.scheme.n_special},
          {"label_mode", result.cfg.label_mode},
          {"d_model", result.cfg.d_model},
          {"d_ff", result.cfg.d_ff},
          {"n_blocks", result.cfg.n_blocks},
          {"init_scale", result.cfg.init_scale}}},
        {"initial_loss", result.initial_loss},
        {"final_loss", result.final_loss},
        {"loss_curve", std::move(curve)},
        {"metrics",
         {{"answer_accuracy", result.metrics.answer_accuracy},
          {"segment_fidelity", result.metrics.segment_fidelity},
          {"fidelity_segments", result.metrics.fidelity_segments},
          {"special_attention_mass", result.metrics.special_attention_mass},
          {"uniform_special_mass", result.metrics.uniform_special_mass}}},
        {"param_digest", result.param_digest},
    };
}

AblationTable ablate(const AblateConfig& cfg) {
    struct Job {
        std::size_t cell_index;
        std::size_t run_index;
        ToyRunConfig run_cfg;
    };

    AblationTable table;
    std::vector<Job> jobs;
    for (int n_special : cfg.n_special_grid) {
        for (const char* mode : {"correct", "shuffled"}) {
            AblationCell cell;
            cell.n_special = n_special;
            cell.label_mode = mode;
            if (n_special == 0) {
                if (std::string(mode) == "shuffled") {
                    cell.feasible = false;
                    cell.note = "n/a (no label tokens to shuffle)";
                    table.cells.push_back(std::move(cell));
                    continue;
                }
                cell.label_mode = "none";
                cell.note = "no label tokens; plain-text serialization";
            }
            cell.runs.resize(cfg.seeds.size());
            for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
                ToyRunConfig run_cfg = cfg.base;
                run_cfg.scheme.n_special = n_special;
                run_cfg.label_mode = cell.label_mode;
                run_cfg.seed = cfg.seeds[s];
                cell.runs[s].seed = cfg.seeds[s];
                jobs.push_back({table.cells.size(), s, std::move(run_cfg)});
            }
            table.cells.push_back(std::move(cell));
        }
    }

    std::size_t workers = static_cast<std::size_t>(std::max(1, cfg.workers));
    util::parallel_for_indexed(jobs.size(), workers, [&](std::size_t j) {
        // Nested parallelism is wasteful; worker threads train serially.
        if (workers > 1) kernels::set_parallel(false);
        const Job& job = jobs[j];
        CellRun& run = table.cells[job.cell_index].runs[job.run_index];
        try {
            ToyRunResult r = train_toy(job.run_cfg);
            run.ok = true;
            run.answer_accuracy = r.metrics.answer_accuracy;
            run.final_loss = r.final_loss;
            run.special_attention_mass = r.metrics.special_attention_mass;
        } catch (const std::exception& e) {
            run.ok = false;
            run.error = e.what();
        }
    });

    for (AblationCell& cell : table.cells) {
        std::vector<double> accs;
        for (const CellRun& run : cell.runs) {
            if (run.ok) accs.push_back(run.answer_accuracy);
        }
        if (accs.empty()) continue;
        double mean = 0.0;
        for (double a : accs) mean += a;
        mean /= static_cast<double>(accs.size());
        double var = 0.0;
        for (double a : accs) var += (a - mean) * (a - mean);
        var /= static_cast<double>(accs.size());
        cell.mean_accuracy = mean;
        cell.accuracy_stddev = std::sqrt(var);
    }
    return table;
}

nlohmann::json ablation_to_json(const AblationTable& table) {
    nlohmann::json cells = nlohmann::json::array();
    for (const AblationCell& cell : table.cells) {
        nlohmann::json runs = nlohmann::json::array();
        for (const CellRun& run : cell.runs) {
            nlohmann::json r{{"seed", run.seed}, {"ok", run.ok}};
            if (run.ok) {
                r["answer_accuracy"] = run.answer_accuracy;
                r["final_loss"] = run.final_loss;
                r["special_attention_mass"] = run.special_attention_mass;
            } else {
                r["error"] = run.error;
            }
            runs.push_back(std::move(r));
        }
        nlohmann::json c{{"n_special", cell.n_special},
                         {"label_mode", cell.label_mode},
                         {"feasible", cell.feasible},
                         {"runs", std::move(runs)}};
        if (!cell.note.empty()) c["note"] = cell.note;
        if (cell.mean_accuracy) c["mean_accuracy"] = *cell.mean_accuracy;
        if (cell.accuracy_stddev) c["accuracy_stddev"] = *cell.accuracy_stddev;
        cells.push_back(std::move(c));
    }
    return nlohmann::json{{"cells", std::move(cells)}};
}

std::string ablation_to_markdown(const AblationTable& table) {
    // Collect the grid axes in emission order.
    std::vector<int> specials;
    for (const AblationCell& cell : table.cells) {
        if (specials.empty() || specials.back() != cell.n_special) {
            specials.push_back(cell.n_special);
        }
    }
    auto find_cell = [&](int n_special, bool shuffled) -> const AblationCell* {
        for (const AblationCell& cell : table.cells) {
            bool cell_shuffled = cell.label_mode == "shuffled" || !cell.feasible;
            if (cell.n_special == n_special && cell_shuffled == shuffled) return &cell;
        }
        return nullptr;
    };
    auto cell_text = [](const AblationCell* cell) -> std::string {
        if (!cell) return "-";
        if (!cell->feasible) return cell->note;
        if (!cell->mean_accuracy) return "failed";
        std::size_t ok = 0;
        for (const CellRun& run : cell->runs) ok += run.ok ? 1 : 0;
        return util::format_double(*cell->mean_accuracy, 3) + " +/- " +
               util::format_double(cell->accuracy_stddev.value_or(0.0), 3) + " (" +
               std::to_string(ok) + "/" + std::to_string(cell->runs.size()) + ")";
    };

    std::string md;
    md += "| n_special | correct labels | shuffled labels |\n";
    md += "|---|---|---|\n";
    for (int n_special : specials) {
        md += "| " + std::to_string(n_special) + " | " +
              cell_text(find_cell(n_special, false)) + " | " +
              cell_text(find_cell(n_special, true)) + " |\n";
    }
    return md;
}

} // namespace mrcot::toylab
