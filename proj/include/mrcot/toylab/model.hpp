#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mrcot/tokenscheme.hpp"

namespace mrcot::toylab {

/// Closed vocabulary for the toy corpus. Control tokens are self-delimiting
/// "<...>" strings; everything else is whitespace-separated words plus a
/// newline token.
struct Vocab {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> ids;
    std::vector<bool> special; // control tokens of the scheme

    int pad = 0;
    int eos = 1;
    int newline = 2;

    int id(const std::string& token) const;
    std::size_t size() const { return tokens.size(); }
};

/// Base words, digits, kb entities and the scheme's control tokens.
Vocab build_vocab(int kb_size, const tokens::TokenScheme& scheme);

/// Splits text into vocabulary tokens: "<...>" control tokens, newlines and
/// whitespace-separated words. Throws on a word outside the vocabulary.
std::vector<int> tokenize(const std::string& text, const Vocab& vocab);

/// Inverse of tokenize for canonical text: words joined by single spaces,
/// control tokens glued together, newline tokens becoming line breaks.
std::string detokenize(const std::vector<int>& ids, const Vocab& vocab);

struct ModelConfig {
    int vocab = 0;
    int max_seq = 96;
    int d_model = 32;
    int d_ff = 64;
    int n_blocks = 2;
    double init_scale = 0.08;
};

/// Small causal transformer: token + learned position embeddings, then one
/// or two blocks of single-head self-attention and a GELU MLP (both with
/// residuals), and an untied output projection. No normalization layers, so
/// gradients stay simple; training relies on gradient clipping instead.
struct ToyModel {
    ModelConfig cfg;
    /// All parameters in one flat buffer (see offsets).
    std::vector<double> theta;

    struct BlockOffsets {
        std::size_t Wq, Wk, Wv, Wo, W1, b1, W2, b2;
    };

    std::size_t off_E, off_P, off_U;
    std::vector<BlockOffsets> blocks;

    explicit ToyModel(const ModelConfig& config);

    void init(std::uint64_t seed);

    double* p(std::size_t off) { return theta.data() + off; }
    const double* p(std::size_t off) const { return theta.data() + off; }

    double* E() { return p(off_E); }
    double* P() { return p(off_P); }
    double* U() { return p(off_U); }
    const double* E() const { return p(off_E); }
    const double* P() const { return p(off_P); }
    const double* U() const { return p(off_U); }

    /// Hex digest of the raw parameter bytes; identical runs match exactly.
    std::string digest() const;
};

/// Activations of one forward pass, kept for the backward pass and for
/// attention inspection.
struct Activations {
    struct Block {
        std::vector<double> q, k, v, scores, att, attout, h, ff1, g, h2;
    };

    std::size_t T = 0;
    std::vector<double> x;
    std::vector<Block> blocks;
    std::vector<double> logits;
};

/// Teacher-forced forward pass over one sequence. Returns summed
/// cross-entropy of predicting tokens[1..T-1] (not averaged).
double forward(const ToyModel& model, const std::vector<int>& tokens, Activations& acts);

/// Forward plus backward; gradient contributions are accumulated into
/// `grad` (same layout as theta) scaled by `grad_scale`.
double forward_backward(const ToyModel& model, const std::vector<int>& tokens,
                        Activations& acts, std::vector<double>& grad, double grad_scale);

/// Mean per-position loss over a batch of sequences; fills `grad` with the
/// gradient of that mean.
double batch_loss_grad(const ToyModel& model, const std::vector<std::vector<int>>& batch,
                       std::vector<double>& grad);

/// Mean per-position loss without gradients.
double batch_loss(const ToyModel& model, const std::vector<std::vector<int>>& batch);

/// Attention matrix (T x T, causal, row-stochastic) of a sequence, taken
/// from the last block, where retrieval from aggregation positions happens.
std::vector<double> attention_rows(const ToyModel& model, const std::vector<int>& tokens);

/// Greedy continuation of a prompt until EOS or the model's sequence limit.
std::vector<int> greedy_generate(const ToyModel& model, const std::vector<int>& prompt,
                                 int eos_id);

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

/// Central finite differences (step 1e-4) on `samples` parameters spread
/// across the whole buffer, against the analytic gradient. Relative error
/// uses a 1e-4 denominator floor.
GradCheckResult grad_check(ToyModel& model, const std::vector<std::vector<int>>& batch,
                           std::size_t samples, std::uint64_t seed);

} // namespace mrcot::toylab
