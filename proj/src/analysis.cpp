#include "mrcot/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mrcot/util.hpp"

namespace mrcot::analysis {

DecouplingReport decoupling_accuracy(const std::vector<ClassifiedStep>& steps) {
    DecouplingReport report;
    for (const ClassifiedStep& step : steps) {
        if (step.judged == evalkit::StepClass::Error) {
            ++report.errors;
            continue;
        }
        if (step.labeled == tokens::SegmentKind::Memory) {
            ++report.memory_total;
            if (step.judged == evalkit::StepClass::Memory) ++report.memory_agreed;
        } else if (step.labeled == tokens::SegmentKind::Reason) {
            ++report.reason_total;
            if (step.judged == evalkit::StepClass::Reason) ++report.reason_agreed;
        }
    }
    if (report.memory_total > 0) {
        report.memory_accuracy = static_cast<double>(report.memory_agreed) /
                                 static_cast<double>(report.memory_total);
    }
    if (report.reason_total > 0) {
        report.reason_accuracy = static_cast<double>(report.reason_agreed) /
                                 static_cast<double>(report.reason_total);
    }
    return report;
}

RatioReport memory_reason_ratio(const std::vector<tokens::SegmentedOutput>& outputs) {
    RatioReport report;
    for (const tokens::SegmentedOutput& out : outputs) {
        for (const tokens::Segment& seg : out.segments) {
            if (seg.kind == tokens::SegmentKind::Memory) ++report.memory_steps;
            else if (seg.kind == tokens::SegmentKind::Reason) ++report.reason_steps;
        }
    }
    std::size_t g = std::gcd(report.memory_steps, report.reason_steps);
    if (g == 0) {
        report.ratio = "0:0";
    } else {
        report.ratio = std::to_string(report.memory_steps / g) + ":" +
                       std::to_string(report.reason_steps / g);
    }
    return report;
}

ErrorProportions error_proportions(const std::vector<evalkit::ErrorSite>& sites) {
    ErrorProportions p;
    for (evalkit::ErrorSite site : sites) {
        switch (site) {
            case evalkit::ErrorSite::Memory: ++p.memory_errors; break;
            case evalkit::ErrorSite::Reason: ++p.reason_errors; break;
            case evalkit::ErrorSite::Error: ++p.unattributed; break;
        }
    }
    std::size_t attributed = p.memory_errors + p.reason_errors;
    if (attributed > 0) {
        double denom = static_cast<double>(attributed);
        p.memory_percent = util::format_double(100.0 * p.memory_errors / denom, 1);
        p.reason_percent = util::format_double(100.0 * p.reason_errors / denom, 1);
    }
    return p;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine_similarity: dimension mismatch");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

OverlapReport knowledge_overlap(const std::vector<std::string>& set_a,
                                const std::vector<std::string>& set_b,
                                provider::Embedder& embedder, double threshold) {
    if (!(threshold > 0.0)) {
        throw std::invalid_argument("knowledge_overlap: threshold must be positive");
    }
    OverlapReport report;
    report.size_a = set_a.size();
    report.size_b = set_b.size();
    report.threshold = threshold;
    if (set_a.empty() && set_b.empty()) return report;

    std::vector<std::string> all;
    all.reserve(set_a.size() + set_b.size());
    all.insert(all.end(), set_a.begin(), set_a.end());
    all.insert(all.end(), set_b.begin(), set_b.end());
    std::vector<std::vector<double>> emb = embedder.embed(all);
    if (emb.size() != all.size()) {
        throw std::runtime_error("knowledge_overlap: embedder returned wrong count");
    }

    std::vector<bool> hit_b(set_b.size(), false);
    for (std::size_t i = 0; i < set_a.size(); ++i) {
        bool hit = false;
        for (std::size_t j = 0; j < set_b.size(); ++j) {
            if (cosine_similarity(emb[i], emb[set_a.size() + j]) > threshold) {
                hit = true;
                hit_b[j] = true;
            }
        }
        if (hit) ++report.matched_a;
    }
    for (bool h : hit_b) {
        if (h) ++report.matched_b;
    }

    double uni = static_cast<double>(report.size_a + report.size_b - report.matched_a);
    report.jaccard = uni > 0.0 ? static_cast<double>(report.matched_a) / uni : 0.0;
    return report;
}

AttentionMatrix attention_from_json(const nlohmann::json& j) {
    AttentionMatrix m;
    m.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& v : j.at("special_mask")) m.special.push_back(v.get<bool>());
    m.weights = j.at("weights").get<std::vector<std::vector<double>>>();

    std::size_t n = m.labels.size();
    if (m.special.size() != n || m.weights.size() != n) {
        throw std::runtime_error("attention matrix: labels, mask and weights sizes differ");
    }
    for (std::size_t r = 0; r < n; ++r) {
        if (m.weights[r].size() != n) {
            throw std::runtime_error("attention matrix: row " + std::to_string(r) +
                                     " is not length " + std::to_string(n));
        }
        double sum = 0.0;
        for (double w : m.weights[r]) {
            if (w < 0.0) {
                throw std::runtime_error("attention matrix: negative weight in row " +
                                         std::to_string(r));
            }
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw std::runtime_error("attention matrix: row " + std::to_string(r) +
                                     " sums to " + util::format_double(sum, 8) + ", expected 1");
        }
    }
    return m;
}

nlohmann::json attention_to_json(const AttentionMatrix& m) {
    nlohmann::json mask = nlohmann::json::array();
    for (bool b : m.special) mask.push_back(b);
    return nlohmann::json{
        {"labels", m.labels}, {"special_mask", std::move(mask)}, {"weights", m.weights}};
}

namespace {

std::size_t checked_special_count(const AttentionMatrix& m) {
    std::size_t specials = 0;
    for (bool b : m.special) {
        if (b) ++specials;
    }
    if (specials == 0) throw std::invalid_argument("attention mask has no special position");
    if (specials == m.size()) {
        throw std::invalid_argument("attention mask has no regular position");
    }
    return specials;
}

} // namespace

double special_attention_mass(const AttentionMatrix& m) {
    checked_special_count(m);
    double total = 0.0;
    for (std::size_t r = 0; r < m.size(); ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < m.size(); ++c) {
            if (m.special[c]) row += m.weights[r][c];
        }
        total += row;
    }
    return total / static_cast<double>(m.size());
}

double uniform_special_mass(const AttentionMatrix& m) {
    std::size_t specials = checked_special_count(m);
    return static_cast<double>(specials) / static_cast<double>(m.size());
}

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

/// White-to-blue ramp; intensity is relative to the matrix maximum.
std::string cell_color(double w, double max_w) {
    double t = max_w > 0.0 ? std::clamp(w / max_w, 0.0, 1.0) : 0.0;
    auto r = static_cast<unsigned>(std::lround(255.0 + t * (8.0 - 255.0)));
    auto g = static_cast<unsigned>(std::lround(255.0 + t * (48.0 - 255.0)));
    auto b = static_cast<unsigned>(std::lround(255.0 + t * (107.0 - 255.0)));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

} // namespace

std::string render_heatmap_svg(const AttentionMatrix& m) {
    const int cell = 18;
    const int label_space = 170;
    const std::size_t n = m.size();
    const int grid = static_cast<int>(n) * cell;
    const int width = label_space + grid + 20;
    const int height = label_space + grid + 20;

    double max_w = 0.0;
    for (const auto& row : m.weights) {
        for (double w : row) max_w = std::max(max_w, w);
    }

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" font-family=\"monospace\" font-size=\"10\">\n";
    svg += "<rect width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) +
           "\" fill=\"white\"/>\n";

    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            int x = label_space + static_cast<int>(c) * cell;
            int y = label_space + static_cast<int>(r) * cell;
            double w = c <= r ? m.weights[r][c] : 0.0;
            svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
                   "\" width=\"" + std::to_string(cell) + "\" height=\"" + std::to_string(cell) +
                   "\" fill=\"" + cell_color(w, max_w) + "\"><title>" +
                   xml_escape(m.labels[r]) + " -> " + xml_escape(m.labels[c]) + ": " +
                   util::format_double(w, 4) + "</title></rect>\n";
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        std::string color = m.special[i] ? "#c01818" : "#202020";
        std::string weight = m.special[i] ? " font-weight=\"bold\"" : "";
        int y = label_space + static_cast<int>(i) * cell + cell / 2 + 3;
        svg += "<text x=\"" + std::to_string(label_space - 6) + "\" y=\"" + std::to_string(y) +
               "\" text-anchor=\"end\" fill=\"" + color + "\"" + weight + ">" +
               xml_escape(m.labels[i]) + "</text>\n";
        int x = label_space + static_cast<int>(i) * cell + cell / 2;
        svg += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(label_space - 6) +
               "\" text-anchor=\"start\" fill=\"" + color + "\"" + weight +
               " transform=\"rotate(-60 " + std::to_string(x) + " " +
               std::to_string(label_space - 6) + ")\">" + xml_escape(m.labels[i]) + "</text>\n";
    }

    svg += "</svg>\n";
    return svg;
}

void write_heatmap(const std::filesystem::path& svg_path, const AttentionMatrix& m) {
    util::write_file(svg_path, render_heatmap_svg(m));
    std::filesystem::path sidecar = svg_path;
    sidecar += ".json";
    util::write_file(sidecar, attention_to_json(m).dump(2) + "\n");
}

} // namespace mrcot::analysis
