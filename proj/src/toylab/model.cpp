#include "mrcot/toylab/model.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "mrcot/sha256.hpp"
#include "mrcot/toylab/kernels.hpp"
#include "mrcot/util.hpp"

namespace mrcot::toylab {

int Vocab::id(const std::string& token) const {
    auto it = ids.find(token);
    if (it == ids.end()) throw std::out_of_range("token not in vocabulary: " + token);
    return it->second;
}

Vocab build_vocab(int kb_size, const tokens::TokenScheme& scheme) {
    Vocab vocab;
    auto add = [&](const std::string& token, bool is_special) {
        vocab.ids.emplace(token, static_cast<int>(vocab.tokens.size()));
        vocab.tokens.push_back(token);
        vocab.special.push_back(is_special);
    };
    add("<pad>", false);
    add("<eos>", false);
    add("\n", false);
    vocab.pad = 0;
    vocab.eos = 1;
    vocab.newline = 2;

    for (const char* word : {"is", "?", "=", "gt", "eq", "par", "so", "what", "the", "values",
                             "are", "The", "answer", "is:", "True", "False"}) {
        add(word, false);
    }
    for (int d = 0; d <= 9; ++d) add(std::to_string(d), false);
    for (int e = 0; e < kb_size; ++e) add("e" + std::to_string(e), false);
    for (const std::string& token : scheme.vocabulary()) add(token, true);
    return vocab;
}

std::vector<int> tokenize(const std::string& text, const Vocab& vocab) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        char c = text[pos];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
            continue;
        }
        if (c == '<') {
            std::size_t close = text.find('>', pos);
            if (close != std::string::npos) {
                std::string token = text.substr(pos, close - pos + 1);
                auto it = vocab.ids.find(token);
                if (it != vocab.ids.end()) {
                    out.push_back(it->second);
                    pos = close + 1;
                    continue;
                }
            }
        }
        std::size_t end = pos;
        while (end < text.size() && text[end] != ' ' && text[end] != '\n' && text[end] != '\t' &&
               text[end] != '\r' && text[end] != '<') {
            ++end;
        }
        if (end == pos) ++end; // lone '<' that opened nothing
        out.push_back(vocab.id(text.substr(pos, end - pos)));
        pos = end;
    }
    return out;
}

std::string detokenize(const std::vector<int>& ids, const Vocab& vocab) {
    std::string out;
    for (int id : ids) {
        if (id == vocab.pad || id == vocab.eos) continue;
        const std::string& token = vocab.tokens.at(static_cast<std::size_t>(id));
        if (id == vocab.newline) {
            out += '\n';
            continue;
        }
        bool control = token.size() >= 2 && token.front() == '<' && token.back() == '>';
        bool line_start = out.empty() || out.back() == '\n';
        if (!control && !line_start) out += ' ';
        out += token;
    }
    return out;
}

ToyModel::ToyModel(const ModelConfig& config) : cfg(config) {
    if (cfg.n_blocks < 1 || cfg.n_blocks > 4) {
        throw std::invalid_argument("n_blocks must be in [1, 4]");
    }
    auto v = static_cast<std::size_t>(cfg.vocab);
    auto l = static_cast<std::size_t>(cfg.max_seq);
    auto d = static_cast<std::size_t>(cfg.d_model);
    auto f = static_cast<std::size_t>(cfg.d_ff);
    std::size_t off = 0;
    off_E = off; off += v * d;
    off_P = off; off += l * d;
    blocks.resize(static_cast<std::size_t>(cfg.n_blocks));
    for (BlockOffsets& b : blocks) {
        b.Wq = off; off += d * d;
        b.Wk = off; off += d * d;
        b.Wv = off; off += d * d;
        b.Wo = off; off += d * d;
        b.W1 = off; off += d * f;
        b.b1 = off; off += f;
        b.W2 = off; off += f * d;
        b.b2 = off; off += d;
    }
    off_U = off; off += v * d;
    theta.assign(off, 0.0);
}

void ToyModel::init(std::uint64_t seed) {
    util::Rng rng(util::derive_seed(seed, 11));
    for (double& w : theta) w = rng.normal(cfg.init_scale);
    // Biases start at zero.
    auto f = static_cast<std::size_t>(cfg.d_ff);
    auto d = static_cast<std::size_t>(cfg.d_model);
    for (const BlockOffsets& b : blocks) {
        for (std::size_t i = 0; i < f; ++i) theta[b.b1 + i] = 0.0;
        for (std::size_t i = 0; i < d; ++i) theta[b.b2 + i] = 0.0;
    }
}

std::string ToyModel::digest() const {
    util::Sha256 h;
    h.update(theta.data(), theta.size() * sizeof(double));
    return h.hex_digest();
}

namespace {

void resize_acts(Activations& acts, const ModelConfig& cfg, std::size_t T) {
    auto d = static_cast<std::size_t>(cfg.d_model);
    auto f = static_cast<std::size_t>(cfg.d_ff);
    auto v = static_cast<std::size_t>(cfg.vocab);
    acts.T = T;
    acts.x.assign(T * d, 0.0);
    acts.blocks.resize(static_cast<std::size_t>(cfg.n_blocks));
    for (Activations::Block& b : acts.blocks) {
        b.q.assign(T * d, 0.0);
        b.k.assign(T * d, 0.0);
        b.v.assign(T * d, 0.0);
        b.scores.assign(T * T, 0.0);
        b.att.assign(T * d, 0.0);
        b.attout.assign(T * d, 0.0);
        b.h.assign(T * d, 0.0);
        b.ff1.assign(T * f, 0.0);
        b.g.assign(T * f, 0.0);
        b.h2.assign(T * d, 0.0);
    }
    acts.logits.assign(T * v, 0.0);
}

/// Log-softmax cross entropy of one logits row against a target id.
double row_loss(const double* logits, std::size_t vocab, int target, double* probs) {
    double max_v = logits[0];
    for (std::size_t i = 1; i < vocab; ++i) max_v = std::max(max_v, logits[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < vocab; ++i) {
        probs[i] = std::exp(logits[i] - max_v);
        sum += probs[i];
    }
    for (std::size_t i = 0; i < vocab; ++i) probs[i] /= sum;
    return -(logits[static_cast<std::size_t>(target)] - max_v - std::log(sum));
}

} // namespace

double forward(const ToyModel& model, const std::vector<int>& tokens, Activations& acts) {
    const ModelConfig& cfg = model.cfg;
    std::size_t T = tokens.size();
    if (T < 2) throw std::invalid_argument("sequence needs at least two tokens");
    if (static_cast<int>(T) > cfg.max_seq) {
        throw std::invalid_argument("sequence longer than max_seq");
    }
    auto d = static_cast<std::size_t>(cfg.d_model);
    auto f = static_cast<std::size_t>(cfg.d_ff);
    auto v = static_cast<std::size_t>(cfg.vocab);
    resize_acts(acts, cfg, T);

    for (std::size_t t = 0; t < T; ++t) {
        const double* erow = model.E() + static_cast<std::size_t>(tokens[t]) * d;
        const double* prow = model.P() + t * d;
        double* xrow = acts.x.data() + t * d;
        for (std::size_t j = 0; j < d; ++j) xrow[j] = erow[j] + prow[j];
    }

    double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const std::vector<double>* input = &acts.x;
    for (std::size_t bi = 0; bi < acts.blocks.size(); ++bi) {
        const ToyModel::BlockOffsets& w = model.blocks[bi];
        Activations::Block& b = acts.blocks[bi];

        kernels::matmul(b.q.data(), input->data(), model.p(w.Wq), T, d, d);
        kernels::matmul(b.k.data(), input->data(), model.p(w.Wk), T, d, d);
        kernels::matmul(b.v.data(), input->data(), model.p(w.Wv), T, d, d);

        kernels::matmul_nt(b.scores.data(), b.q.data(), b.k.data(), T, d, T);
        for (double& s : b.scores) s *= scale;
        kernels::softmax_causal(b.scores.data(), T);

        kernels::matmul(b.att.data(), b.scores.data(), b.v.data(), T, T, d);
        kernels::matmul(b.attout.data(), b.att.data(), model.p(w.Wo), T, d, d);

        b.h = *input;
        kernels::add_inplace(b.h.data(), b.attout.data(), T * d);

        kernels::matmul(b.ff1.data(), b.h.data(), model.p(w.W1), T, d, f);
        kernels::add_row_bias(b.ff1.data(), model.p(w.b1), T, f);
        kernels::gelu(b.g.data(), b.ff1.data(), T * f);
        kernels::matmul(b.h2.data(), b.g.data(), model.p(w.W2), T, f, d);
        kernels::add_row_bias(b.h2.data(), model.p(w.b2), T, d);
        kernels::add_inplace(b.h2.data(), b.h.data(), T * d);

        input = &b.h2;
    }

    kernels::matmul_nt(acts.logits.data(), input->data(), model.U(), T, d, v);

    std::vector<double> probs(v);
    double loss = 0.0;
    for (std::size_t t = 0; t + 1 < T; ++t) {
        loss += row_loss(acts.logits.data() + t * v, v, tokens[t + 1], probs.data());
    }
    return loss;
}

double forward_backward(const ToyModel& model, const std::vector<int>& tokens,
                        Activations& acts, std::vector<double>& grad, double grad_scale) {
    double loss = forward(model, tokens, acts);
    const ModelConfig& cfg = model.cfg;
    std::size_t T = acts.T;
    auto d = static_cast<std::size_t>(cfg.d_model);
    auto f = static_cast<std::size_t>(cfg.d_ff);
    auto v = static_cast<std::size_t>(cfg.vocab);

    // dlogits: softmax - onehot on predicting rows, zero on the last row.
    std::vector<double> dlogits(T * v, 0.0);
    std::vector<double> probs(v);
    for (std::size_t t = 0; t + 1 < T; ++t) {
        row_loss(acts.logits.data() + t * v, v, tokens[t + 1], probs.data());
        double* row = dlogits.data() + t * v;
        for (std::size_t i = 0; i < v; ++i) row[i] = probs[i] * grad_scale;
        row[static_cast<std::size_t>(tokens[t + 1])] -= grad_scale;
    }

    const std::vector<double>& top = acts.blocks.back().h2;

    // Output projection.
    std::vector<double> scratch_vd(v * d, 0.0);
    kernels::matmul_tn(scratch_vd.data(), dlogits.data(), top.data(), T, v, d);
    kernels::add_inplace(grad.data() + model.off_U, scratch_vd.data(), v * d);
    std::vector<double> dout(T * d, 0.0);
    kernels::matmul(dout.data(), dlogits.data(), model.U(), T, v, d);

    double scale = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> scratch_dd(d * d, 0.0);
    std::vector<double> scratch_df(d * f, 0.0);
    std::vector<double> scratch_fd(f * d, 0.0);

    // Walk the blocks top down; dout enters as the gradient at a block's h2
    // and leaves as the gradient at its input.
    for (std::size_t bi = acts.blocks.size(); bi-- > 0;) {
        const ToyModel::BlockOffsets& w = model.blocks[bi];
        Activations::Block& b = acts.blocks[bi];
        const std::vector<double>& input = bi == 0 ? acts.x : acts.blocks[bi - 1].h2;

        // MLP with residual: h2 = h + gelu(h W1 + b1) W2 + b2.
        std::vector<double> dh(T * d, 0.0);
        kernels::col_sum_acc(grad.data() + w.b2, dout.data(), T, d);
        kernels::matmul_tn(scratch_fd.data(), b.g.data(), dout.data(), T, f, d);
        kernels::add_inplace(grad.data() + w.W2, scratch_fd.data(), f * d);
        std::vector<double> dg(T * f, 0.0);
        kernels::matmul_nt(dg.data(), dout.data(), model.p(w.W2), T, d, f);
        std::vector<double> dff1(T * f, 0.0);
        kernels::gelu_backward(dff1.data(), b.ff1.data(), dg.data(), T * f);
        kernels::col_sum_acc(grad.data() + w.b1, dff1.data(), T, f);
        kernels::matmul_tn(scratch_df.data(), b.h.data(), dff1.data(), T, d, f);
        kernels::add_inplace(grad.data() + w.W1, scratch_df.data(), d * f);
        kernels::matmul_nt(dh.data(), dff1.data(), model.p(w.W1), T, f, d);
        kernels::add_inplace(dh.data(), dout.data(), T * d);

        // Attention with residual: h = input + (softmax(q k^T / sqrt(d)) v) Wo.
        std::vector<double> din = dh;
        kernels::matmul_tn(scratch_dd.data(), b.att.data(), dh.data(), T, d, d);
        kernels::add_inplace(grad.data() + w.Wo, scratch_dd.data(), d * d);
        std::vector<double> datt(T * d, 0.0);
        kernels::matmul_nt(datt.data(), dh.data(), model.p(w.Wo), T, d, d);

        std::vector<double> dA(T * T, 0.0);
        kernels::matmul_nt(dA.data(), datt.data(), b.v.data(), T, d, T);
        std::vector<double> dv(T * d, 0.0);
        kernels::matmul_tn(dv.data(), b.scores.data(), datt.data(), T, T, d);

        std::vector<double> dS(T * T, 0.0);
        kernels::softmax_causal_backward(dS.data(), b.scores.data(), dA.data(), T);
        for (double& s : dS) s *= scale;

        std::vector<double> dq(T * d, 0.0);
        kernels::matmul(dq.data(), dS.data(), b.k.data(), T, T, d);
        std::vector<double> dk(T * d, 0.0);
        kernels::matmul_tn(dk.data(), dS.data(), b.q.data(), T, T, d);

        kernels::matmul_tn(scratch_dd.data(), input.data(), dq.data(), T, d, d);
        kernels::add_inplace(grad.data() + w.Wq, scratch_dd.data(), d * d);
        kernels::matmul_tn(scratch_dd.data(), input.data(), dk.data(), T, d, d);
        kernels::add_inplace(grad.data() + w.Wk, scratch_dd.data(), d * d);
        kernels::matmul_tn(scratch_dd.data(), input.data(), dv.data(), T, d, d);
        kernels::add_inplace(grad.data() + w.Wv, scratch_dd.data(), d * d);

        std::vector<double> din_part(T * d, 0.0);
        kernels::matmul_nt(din_part.data(), dq.data(), model.p(w.Wq), T, d, d);
        kernels::add_inplace(din.data(), din_part.data(), T * d);
        kernels::matmul_nt(din_part.data(), dk.data(), model.p(w.Wk), T, d, d);
        kernels::add_inplace(din.data(), din_part.data(), T * d);
        kernels::matmul_nt(din_part.data(), dv.data(), model.p(w.Wv), T, d, d);
        kernels::add_inplace(din.data(), din_part.data(), T * d);

        dout = std::move(din);
    }

    // Embedding scatter; dout is now the gradient at the embedding sum.
    double* gE = grad.data() + model.off_E;
    double* gP = grad.data() + model.off_P;
    for (std::size_t t = 0; t < T; ++t) {
        const double* dxrow = dout.data() + t * d;
        double* prow = gP + t * d;
        for (std::size_t j = 0; j < d; ++j) prow[j] += dxrow[j];
    }
    for (std::size_t t = 0; t < T; ++t) {
        double* erow = gE + static_cast<std::size_t>(tokens[t]) * d;
        const double* dxrow = dout.data() + t * d;
        for (std::size_t j = 0; j < d; ++j) erow[j] += dxrow[j];
    }

    return loss;
}

double batch_loss_grad(const ToyModel& model, const std::vector<std::vector<int>>& batch,
                       std::vector<double>& grad) {
    grad.assign(model.theta.size(), 0.0);
    std::size_t positions = 0;
    for (const auto& seq : batch) positions += seq.size() - 1;
    if (positions == 0) return 0.0;
    double scale = 1.0 / static_cast<double>(positions);
    double loss = 0.0;
    Activations acts;
    for (const auto& seq : batch) loss += forward_backward(model, seq, acts, grad, scale);
    return loss * scale;
}

double batch_loss(const ToyModel& model, const std::vector<std::vector<int>>& batch) {
    std::size_t positions = 0;
    for (const auto& seq : batch) positions += seq.size() - 1;
    if (positions == 0) return 0.0;
    double loss = 0.0;
    Activations acts;
    for (const auto& seq : batch) loss += forward(model, seq, acts);
    return loss / static_cast<double>(positions);
}

std::vector<double> attention_rows(const ToyModel& model, const std::vector<int>& tokens) {
    Activations acts;
    forward(model, tokens, acts);
    return acts.blocks.back().scores;
}

std::vector<int> greedy_generate(const ToyModel& model, const std::vector<int>& prompt,
                                 int eos_id) {
    std::vector<int> seq = prompt;
    Activations acts;
    auto v = static_cast<std::size_t>(model.cfg.vocab);
    while (static_cast<int>(seq.size()) < model.cfg.max_seq) {
        forward(model, seq, acts);
        const double* row = acts.logits.data() + (seq.size() - 1) * v;
        std::size_t best = 0;
        for (std::size_t i = 1; i < v; ++i) {
            if (row[i] > row[best]) best = i;
        }
        seq.push_back(static_cast<int>(best));
        if (static_cast<int>(best) == eos_id) break;
    }
    return seq;
}

GradCheckResult grad_check(ToyModel& model, const std::vector<std::vector<int>>& batch,
                           std::size_t samples, std::uint64_t seed) {
    std::vector<double> grad;
    batch_loss_grad(model, batch, grad);

    util::Rng rng(util::derive_seed(seed, 13));
    GradCheckResult result;
    const double h = 1e-4;
    for (std::size_t s = 0; s < samples; ++s) {
        std::size_t i = static_cast<std::size_t>(rng.below(model.theta.size()));
        double saved = model.theta[i];
        model.theta[i] = saved + h;
        double up = batch_loss(model, batch);
        model.theta[i] = saved - h;
        double down = batch_loss(model, batch);
        model.theta[i] = saved;
        double fd = (up - down) / (2.0 * h);
        double denom = std::max({std::abs(grad[i]), std::abs(fd), 1e-4});
        result.max_rel_err = std::max(result.max_rel_err, std::abs(grad[i] - fd) / denom);
        ++result.checked;
    }
    return result;
}

} // namespace mrcot::toylab
