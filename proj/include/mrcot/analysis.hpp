#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrcot/evalkit.hpp"
#include "mrcot/provider.hpp"
#include "mrcot/tokenscheme.hpp"

namespace mrcot::analysis {

/// A labeled step paired with the classifier's verdict on it.
struct ClassifiedStep {
    tokens::SegmentKind labeled = tokens::SegmentKind::Other;
    evalkit::StepClass judged = evalkit::StepClass::Error;
};

struct DecouplingReport {
    /// Fraction of memory-labeled steps the classifier judged factual, micro
    /// averaged over all steps in the run.
    std::optional<double> memory_accuracy;
    std::optional<double> reason_accuracy;
    std::size_t memory_total = 0;
    std::size_t memory_agreed = 0;
    std::size_t reason_total = 0;
    std::size_t reason_agreed = 0;
    std::size_t errors = 0; // classifier verdicts that were unusable
};

DecouplingReport decoupling_accuracy(const std::vector<ClassifiedStep>& steps);

struct RatioReport {
    std::size_t memory_steps = 0;
    std::size_t reason_steps = 0;
    /// "a:b" with the counts reduced by their greatest common divisor;
    /// "0:0" when there are no steps.
    std::string ratio;
};

/// Counts Memory and Reason segments across outputs and reduces the pair.
RatioReport memory_reason_ratio(const std::vector<tokens::SegmentedOutput>& outputs);

struct ErrorProportions {
    std::size_t memory_errors = 0;
    std::size_t reason_errors = 0;
    std::size_t unattributed = 0;
    /// Percentages over attributed errors at one-decimal precision, e.g.
    /// "21.6" / "78.4". Empty when nothing was attributed.
    std::string memory_percent;
    std::string reason_percent;
};

ErrorProportions error_proportions(const std::vector<evalkit::ErrorSite>& sites);

struct OverlapReport {
    std::size_t size_a = 0;
    std::size_t size_b = 0;
    /// Items of A with at least one counterpart in B above the similarity
    /// threshold, and vice versa.
    std::size_t matched_a = 0;
    std::size_t matched_b = 0;
    double threshold = 0.0;
    /// matched_a / (|A| + |B| - matched_a); 0 when both sets are empty.
    double jaccard = 0.0;
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Embeds both knowledge sets and reports their similarity-threshold overlap.
/// The threshold must be positive.
OverlapReport knowledge_overlap(const std::vector<std::string>& set_a,
                                const std::vector<std::string>& set_b,
                                provider::Embedder& embedder, double threshold);

/// Row-stochastic attention matrix with token labels; row t holds the
/// attention distribution of position t over positions <= t.
struct AttentionMatrix {
    std::vector<std::string> labels;
    std::vector<bool> special; // true where the token is a control token
    std::vector<std::vector<double>> weights;

    std::size_t size() const { return labels.size(); }
};

/// Parses {labels, special_mask, weights}; validates shape, non-negative
/// entries and row sums of 1 within 1e-6.
AttentionMatrix attention_from_json(const nlohmann::json& j);
nlohmann::json attention_to_json(const AttentionMatrix& m);

/// Mean over query rows of the attention mass falling on special-token
/// columns. Throws when the mask is all-special or has no special position.
double special_attention_mass(const AttentionMatrix& m);

/// Fraction of special tokens in the sequence: the attention mass a uniform
/// attender would put on them. Same mask requirements as
/// special_attention_mass.
double uniform_special_mass(const AttentionMatrix& m);

/// Renders the matrix as an SVG heatmap (deterministic byte-for-byte for
/// identical input). Special-token labels are highlighted.
std::string render_heatmap_svg(const AttentionMatrix& m);

/// Writes the SVG plus a JSON sidecar with the numeric matrix next to it.
void write_heatmap(const std::filesystem::path& svg_path, const AttentionMatrix& m);

} // namespace mrcot::analysis
