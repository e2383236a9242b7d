#include "mrcot/tokenscheme.hpp"

#include <stdexcept>
#include <unordered_map>

#include "mrcot/util.hpp"

namespace mrcot::tokens {

namespace {

void validate(const TokenScheme& scheme) {
    if (scheme.n_prefix < 0 || scheme.n_special < 0) {
        throw std::invalid_argument("token scheme sizes must be non-negative");
    }
}

std::string make_token(const char* label, int i) {
    return std::string("<") + label + "_" + std::to_string(i) + ">";
}

enum class TokenRole { Prefix, Memory, Reason, Answer };

/// Lookup from every scheme token to its role.
std::unordered_map<std::string, TokenRole> token_roles(const TokenScheme& scheme) {
    std::unordered_map<std::string, TokenRole> roles;
    if (scheme.n_special == 0) return roles;
    for (int i = 0; i < scheme.n_prefix; ++i) roles[make_token("prefix", i)] = TokenRole::Prefix;
    for (int i = 0; i < scheme.n_special; ++i) {
        roles[make_token("memory", i)] = TokenRole::Memory;
        roles[make_token("reason", i)] = TokenRole::Reason;
        roles[make_token("answer", i)] = TokenRole::Answer;
    }
    return roles;
}

SegmentKind role_to_kind(TokenRole role) {
    switch (role) {
        case TokenRole::Memory: return SegmentKind::Memory;
        case TokenRole::Reason: return SegmentKind::Reason;
        case TokenRole::Answer: return SegmentKind::Answer;
        default: throw std::logic_error("prefix token has no segment kind");
    }
}

} // namespace

std::vector<std::string> TokenScheme::vocabulary() const {
    validate(*this);
    std::vector<std::string> vocab;
    if (n_special == 0) return vocab;
    vocab.reserve(static_cast<std::size_t>(n_prefix + 3 * n_special));
    for (int i = 0; i < n_prefix; ++i) vocab.push_back(make_token("prefix", i));
    for (int i = 0; i < n_special; ++i) vocab.push_back(make_token("memory", i));
    for (int i = 0; i < n_special; ++i) vocab.push_back(make_token("reason", i));
    for (int i = 0; i < n_special; ++i) vocab.push_back(make_token("answer", i));
    return vocab;
}

std::string TokenScheme::prefix_token(int i) const { return make_token("prefix", i); }

std::string TokenScheme::kind_token(StepKind kind, int i) const {
    return make_token(kind == StepKind::Memory ? "memory" : "reason", i);
}

std::string TokenScheme::answer_token(int i) const { return make_token("answer", i); }

std::string TokenScheme::step_header(StepKind kind) const {
    std::string header;
    for (int i = 0; i < n_special; ++i) header += kind_token(kind, i);
    return header;
}

std::string TokenScheme::answer_header() const {
    std::string header;
    for (int i = 0; i < n_special; ++i) header += answer_token(i);
    return header;
}

std::string TokenScheme::prefix_block() const {
    if (n_special == 0) return "";
    std::string block;
    for (int i = 0; i < n_prefix; ++i) block += prefix_token(i);
    return block;
}

std::string segment_kind_name(SegmentKind kind) {
    switch (kind) {
        case SegmentKind::Memory: return "memory";
        case SegmentKind::Reason: return "reason";
        case SegmentKind::Answer: return "answer";
        case SegmentKind::Other: return "other";
    }
    return "other";
}

TrainingExample serialize(const AnnotatedTrace& trace, const TokenScheme& scheme,
                          const std::string& question) {
    validate(scheme);
    TrainingExample ex;
    ex.question = question;
    ex.answer = trace.answer;
    ex.scheme = scheme;

    std::string answer_sentence = std::string(kAnswerSentencePrefix) + " " + trace.answer;
    if (scheme.n_special == 0) {
        std::vector<std::string> parts;
        parts.reserve(trace.steps.size() + 1);
        for (const PlanStep& step : trace.steps) parts.push_back(step.content);
        parts.push_back(answer_sentence);
        ex.body = util::join(parts, "\n\n");
        return ex;
    }

    std::string body = scheme.prefix_block();
    for (const PlanStep& step : trace.steps) {
        body += scheme.step_header(step.kind);
        body += '\n';
        body += step.content;
        body += '\n';
    }
    body += scheme.answer_header();
    body += '\n';
    body += answer_sentence;
    ex.body = body;
    return ex;
}

SegmentedOutput parse_output(const std::string& text, const TokenScheme& scheme) {
    validate(scheme);
    auto roles = token_roles(scheme);

    SegmentedOutput out;
    std::vector<std::string> current_lines;
    bool has_current = false;
    SegmentKind current_kind = SegmentKind::Other;

    auto flush = [&] {
        if (!has_current) return;
        while (!current_lines.empty() && current_lines.back().empty()) current_lines.pop_back();
        out.segments.push_back({current_kind, util::join(current_lines, "\n")});
        current_lines.clear();
        has_current = false;
    };
    auto open = [&](SegmentKind kind) {
        flush();
        has_current = true;
        current_kind = kind;
    };
    auto append_line = [&](const std::string& line) {
        if (!has_current) {
            has_current = true;
            current_kind = SegmentKind::Other;
        }
        current_lines.push_back(line);
    };

    // Plain-text label forms emitted by models without control tokens.
    static const std::vector<std::pair<std::string, SegmentKind>> kBracketLabels = {
        {"[memory]", SegmentKind::Memory}, {"[rag]", SegmentKind::Memory},
        {"[reason]", SegmentKind::Reason}, {"[answer]", SegmentKind::Answer},
    };

    // Generated text does not always put control-token runs at the start of a
    // line; break the text so every run opens one, and glue runs that were
    // split by stray spaces. Newlines between runs are kept so empty segments
    // survive.
    std::string normalized;
    normalized.reserve(text.size());
    {
        std::size_t i = 0;
        bool in_run = false;
        while (i < text.size()) {
            if (text[i] == '<') {
                std::size_t close = text.find('>', i);
                if (close != std::string::npos &&
                    roles.count(text.substr(i, close - i + 1)) > 0) {
                    if (!in_run && !normalized.empty() && normalized.back() != '\n') {
                        normalized += '\n';
                    }
                    in_run = true;
                    normalized.append(text, i, close - i + 1);
                    i = close + 1;
                    continue;
                }
            }
            if (in_run && (text[i] == ' ' || text[i] == '\t')) {
                std::size_t next = text.find_first_not_of(" \t", i);
                if (next != std::string::npos && text[next] == '<') {
                    std::size_t close = text.find('>', next);
                    if (close != std::string::npos &&
                        roles.count(text.substr(next, close - next + 1)) > 0) {
                        i = next;
                        continue;
                    }
                }
            }
            in_run = false;
            normalized += text[i];
            ++i;
        }
    }

    for (const std::string& raw_line : util::split_lines(normalized)) {
        std::string line = raw_line;

        // Control-token header: a run of scheme tokens at the start of a line.
        std::size_t pos = 0;
        bool matched_any = false;
        bool have_kind = false;
        SegmentKind header_kind = SegmentKind::Other;
        while (pos < line.size() && line[pos] == '<') {
            std::size_t close = line.find('>', pos);
            if (close == std::string::npos) break;
            auto it = roles.find(line.substr(pos, close - pos + 1));
            if (it == roles.end()) break;
            matched_any = true;
            if (!have_kind && it->second != TokenRole::Prefix) {
                have_kind = true;
                header_kind = role_to_kind(it->second);
            }
            pos = close + 1;
        }
        if (matched_any) {
            if (have_kind) open(header_kind);
            line = line.substr(pos);
            if (util::trim(line).empty()) continue;
        }

        // Bracket label at the start of a line.
        std::string lowered = util::to_lower(util::trim(line));
        bool bracket = false;
        for (const auto& [label, kind] : kBracketLabels) {
            if (!util::starts_with(lowered, label)) continue;
            open(kind);
            std::string rest = util::trim(line).substr(label.size());
            rest = util::trim(rest);
            if (util::starts_with(rest, ":")) rest = util::trim(rest.substr(1));
            if (kind == SegmentKind::Answer && !rest.empty()) {
                std::string answer_text = rest;
                if (util::starts_with(answer_text, kAnswerSentencePrefix)) {
                    answer_text =
                        util::trim(answer_text.substr(std::string(kAnswerSentencePrefix).size()));
                }
                out.answer = answer_text;
            }
            if (!rest.empty()) current_lines.push_back(rest);
            bracket = true;
            break;
        }
        if (bracket) continue;

        // Final answer sentence.
        std::string trimmed = util::trim(line);
        if (util::starts_with(trimmed, kAnswerSentencePrefix)) {
            std::string answer_text =
                util::trim(trimmed.substr(std::string(kAnswerSentencePrefix).size()));
            out.answer = answer_text;
            if (!has_current || current_kind != SegmentKind::Answer) open(SegmentKind::Answer);
            current_lines.push_back(answer_text);
            continue;
        }

        if (trimmed.empty()) {
            if (has_current && !current_lines.empty()) current_lines.push_back("");
            continue;
        }
        append_line(line);
    }
    flush();
    return out;
}

void shuffle_labels(std::vector<TrainingExample>& examples, std::uint64_t seed) {
    for (std::size_t idx = 0; idx < examples.size(); ++idx) {
        TrainingExample& ex = examples[idx];
        if (ex.scheme.n_special == 0) {
            throw std::invalid_argument("shuffle_labels: scheme has no label tokens");
        }
        SegmentedOutput parsed = parse_output(ex.body, ex.scheme);
        std::vector<Segment*> steps;
        for (Segment& seg : parsed.segments) {
            if (seg.kind == SegmentKind::Memory || seg.kind == SegmentKind::Reason) {
                steps.push_back(&seg);
            }
        }
        if (!parsed.answer) {
            throw std::invalid_argument("shuffle_labels: example body has no final answer");
        }

        std::vector<SegmentKind> kinds;
        kinds.reserve(steps.size());
        for (Segment* seg : steps) kinds.push_back(seg->kind);
        util::Rng rng(util::derive_seed(seed, idx));
        rng.shuffle(kinds);

        std::string body = ex.scheme.prefix_block();
        for (std::size_t i = 0; i < steps.size(); ++i) {
            StepKind kind = kinds[i] == SegmentKind::Memory ? StepKind::Memory : StepKind::Reason;
            body += ex.scheme.step_header(kind);
            body += '\n';
            body += steps[i]->text;
            body += '\n';
        }
        body += ex.scheme.answer_header();
        body += '\n';
        body += std::string(kAnswerSentencePrefix) + " " + *parsed.answer;
        ex.body = body;
    }
}

nlohmann::json example_to_json(const TrainingExample& ex) {
    return nlohmann::json{
        {"question", ex.question},
        {"body", ex.body},
        {"answer", ex.answer},
        {"scheme", {{"n_prefix", ex.scheme.n_prefix}, {"n_special", ex.scheme.n_special}}},
    };
}

TrainingExample example_from_json(const nlohmann::json& j) {
    TrainingExample ex;
    ex.question = j.at("question").get<std::string>();
    ex.body = j.at("body").get<std::string>();
    ex.answer = j.at("answer").get<std::string>();
    ex.scheme.n_prefix = j.at("scheme").at("n_prefix").get<int>();
    ex.scheme.n_special = j.at("scheme").at("n_special").get<int>();
    return ex;
}

} // namespace mrcot::tokens
