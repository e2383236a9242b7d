#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrcot/analysis.hpp"
#include "mrcot/toylab/model.hpp"
#include "mrcot/trace.hpp"

namespace mrcot::toylab {

/// Knowledge base of the toy world: entity e{i} has digit value values[i].
struct Kb {
    std::vector<int> values;

    /// "e3 = 7" for entity 3.
    std::string fact(int entity) const;
    std::vector<std::string> facts() const;
};

Kb gen_kb(int kb_size, std::uint64_t seed);

/// One comparison question over two kb entities. op is "gt" (greater than),
/// "eq" (equal) or "par" (same parity).
struct ToyTask {
    int a = 0;
    int b = 0;
    std::string op;
    bool truth = false;
    /// Entities recalled as Memory steps, in order: always exactly a then b.
    std::vector<int> recall;

    std::string question() const; // "e3 gt e5 ?"
};

/// Evaluates the op against the kb.
bool task_truth(const ToyTask& task, const Kb& kb);

/// Distinct tasks with alternating True/False answers so both labels appear
/// equally often. Throws when the kb cannot supply enough distinct tasks of
/// either truth value.
std::vector<ToyTask> gen_tasks(int n, const Kb& kb, std::uint64_t seed);

/// One Memory step per recalled entity (value lookups) and one Reason step
/// (the comparison), answer "True"/"False".
AnnotatedTrace task_to_trace(const ToyTask& task, const Kb& kb, const std::string& record_id);

struct ToyRunConfig {
    int kb_size = 16;
    int n_train = 200;
    int n_test = 100;
    int steps = 2000;
    int batch = 16;
    double lr = 1.0;
    /// Global gradient-norm clip; 0 disables clipping.
    double clip_norm = 1.0;
    std::uint64_t seed = 1;
    tokens::TokenScheme scheme{3, 4};
    /// "correct" trains on true labels, "shuffled" permutes the label
    /// headers per example, "none" trains without label tokens and requires
    /// n_special == 0.
    std::string label_mode = "correct";
    int d_model = 32;
    int d_ff = 64;
    int n_blocks = 2;
    double init_scale = 0.2;
    int max_seq = 96;
    int log_every = 10;
    /// Test prefixes whose attention maps are averaged for the special-token
    /// mass metric.
    int attention_tasks = 32;
    /// Test tasks used for the generation-fidelity metric.
    int fidelity_tasks = 32;
};

void validate_config(const ToyRunConfig& cfg);

struct EvalMetrics {
    /// Restricted-choice final-answer accuracy: teacher-forced context, the
    /// answer slot's argmax over the True/False logits.
    double answer_accuracy = 0.0;
    /// Fraction of freely generated memory segments whose content is a
    /// verbatim kb fact.
    double segment_fidelity = 0.0;
    std::size_t fidelity_segments = 0;
    double special_attention_mass = 0.0;
    double uniform_special_mass = 0.0;
};

struct ToyRunResult {
    ToyRunConfig cfg;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<std::pair<int, double>> loss_curve; // (step, batch loss)
    EvalMetrics metrics;
    std::string param_digest;
    /// Attention map of the first test sequence.
    analysis::AttentionMatrix attention;
};

/// Full deterministic run: build kb and tasks, train, evaluate. Throws on a
/// non-finite loss.
ToyRunResult train_toy(const ToyRunConfig& cfg);

nlohmann::json run_result_to_json(const ToyRunResult& result);

struct CellRun {
    std::uint64_t seed = 0;
    bool ok = false;
    double answer_accuracy = 0.0;
    double final_loss = 0.0;
    double special_attention_mass = 0.0;
    std::string error;
};

struct AblationCell {
    int n_special = 0;
    std::string label_mode;
    bool feasible = true;
    std::string note;
    std::vector<CellRun> runs;
    std::optional<double> mean_accuracy;
    std::optional<double> accuracy_stddev;
};

struct AblateConfig {
    std::vector<int> n_special_grid = {0, 2, 4, 6};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    ToyRunConfig base;
    int workers = 1;
};

struct AblationTable {
    std::vector<AblationCell> cells;
};

/// Trains every (n_special, correct/shuffled) cell across all seeds. With
/// n_special == 0 the correct arm degenerates to unlabeled text and the
/// shuffled arm is infeasible (nothing to shuffle); the cell is emitted with
/// a note instead of runs.
AblationTable ablate(const AblateConfig& cfg);

nlohmann::json ablation_to_json(const AblationTable& table);
std::string ablation_to_markdown(const AblationTable& table);

} // namespace mrcot::toylab
