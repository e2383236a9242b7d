// Regenerates tests/fixtures/mock/{inference,knowledge,judge}.json.
//
// The offline provider answers requests by fingerprint, so the fixtures have
// to be produced with the same prompt builders and serialization the pipeline
// uses. This tool walks the boolean QA fixture dataset through that exact
// path: it invents a plan and knowledge answers for every record, then keys
// each canned response by the fingerprint of the request the pipeline will
// actually send. Run it from anywhere:
//
//   make_mock_fixtures <dataset.json> <output dir>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrcot/datagen.hpp"
#include "mrcot/evalkit.hpp"
#include "mrcot/ingest.hpp"
#include "mrcot/provider.hpp"
#include "mrcot/tokenscheme.hpp"
#include "mrcot/util.hpp"

namespace {

using namespace mrcot;

constexpr double kGenTemperature = 0.7;
const tokens::TokenScheme kScheme{3, 4};

std::string fp(const std::string& model, const std::string& prompt, double temperature) {
    provider::ChatRequest req{model, {{"user", prompt}}, temperature};
    return provider::fingerprint(req);
}

// First few words of the question, enough to make canned text distinct.
std::string topic(const ingest::QARecord& rec) {
    std::istringstream in(rec.question);
    std::string word, out;
    for (std::size_t i = 0; i < 6 && in >> word; ++i) {
        if (!out.empty()) out += ' ';
        out += word;
    }
    return out;
}

struct PlannedStep {
    bool memory = false;
    std::string name;
    std::string query;   // memory steps only
    std::string content; // reason content, or the knowledge answer for memory
};

std::vector<PlannedStep> plan_steps(const ingest::QARecord& rec, std::size_t index) {
    std::string t = topic(rec);
    std::size_t memories = 2;
    std::size_t reasons = 1;
    if (index % 3 == 1) memories = 1, reasons = 2;
    if (index % 7 == 0) memories = 3, reasons = 2;

    std::vector<PlannedStep> steps;
    for (std::size_t m = 0; m < memories; ++m) {
        PlannedStep s;
        s.memory = true;
        s.name = "Recall fact " + std::to_string(m + 1);
        s.query = "What does background fact " + std::to_string(m + 1) + " say about " + t + "?";
        s.content = "Background fact " + std::to_string(m + 1) + " for " + rec.id + ": " + t +
                    " is settled by well documented evidence.";
        steps.push_back(std::move(s));
    }
    for (std::size_t r = 0; r < reasons; ++r) {
        PlannedStep s;
        s.name = "Weigh the evidence " + std::to_string(r + 1);
        s.content = "Putting the recalled facts together shows the claim about " + t +
                    " resolves to " + rec.gold + ".";
        steps.push_back(std::move(s));
    }
    return steps;
}

// The block surface form the planning prompt asks for.
std::string block_plan_text(const std::vector<PlannedStep>& steps) {
    std::string out;
    for (const PlannedStep& s : steps) {
        out += "*Step name*:\n" + s.name + "\n\n";
        out += "**Requirement**:\n";
        out += s.memory ? "[memory]\n\n" : "[reason]\n\n";
        out += "**Knowledge based**:\n";
        out += s.memory ? s.query + "\n\n" : "N/A\n\n";
        out += "**Content**:\n";
        // Memory content in the raw plan is the model's own stab at the fact;
        // the pipeline replaces it with the knowledge agent's answer.
        out += (s.memory ? "Some provisional recollection." : s.content) + "\n\n";
    }
    return out;
}

// The terser itemized form some models fall back to.
std::string itemized_plan_text(const std::vector<PlannedStep>& steps) {
    std::string out;
    std::size_t n = 1;
    for (const PlannedStep& s : steps) {
        out += std::to_string(n++) + ". \"";
        out += s.memory ? "[memory]: " + s.query : "[reason]: " + s.content;
        out += "\",\n";
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: make_mock_fixtures <dataset.json> <output dir>\n";
        return 2;
    }
    const std::filesystem::path dataset = argv[1];
    const std::filesystem::path out_dir = argv[2];

    auto records = ingest::load_strategyqa(dataset);
    nlohmann::json inference{{"fallback", "error"}, {"responses", nlohmann::json::object()}};
    nlohmann::json knowledge{{"fallback", "error"}, {"responses", nlohmann::json::object()}};
    nlohmann::json judge{{"fallback", "error"}, {"responses", nlohmann::json::object()}};

    std::size_t segment_counter = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        auto steps = plan_steps(rec, i);
        bool itemized = i % 5 == 4;

        std::string plan_text = itemized ? itemized_plan_text(steps) : block_plan_text(steps);
        inference["responses"][fp("inference-model", datagen::build_inference_prompt(rec),
                                  kGenTemperature)] = plan_text;

        // The knowledge request batches the plan's memory queries.
        std::vector<std::string> queries;
        nlohmann::json answers = nlohmann::json::object();
        for (const PlannedStep& s : steps) {
            if (!s.memory) continue;
            queries.push_back(s.query);
            answers[s.query] = s.content;
        }
        if (!queries.empty()) {
            knowledge["responses"][fp("knowledge-model", datagen::build_knowledge_prompt(queries),
                                      kGenTemperature)] = answers.dump(2);
        }

        // Replay what build-dataset will serialize so the judge, classifier
        // and attribution fingerprints line up with the real artifacts.
        AnnotatedTrace trace;
        trace.record_id = rec.id;
        for (const PlannedStep& s : steps) {
            PlanStep step;
            step.name = s.name;
            step.kind = s.memory ? StepKind::Memory : StepKind::Reason;
            if (s.memory) step.knowledge_query = s.query;
            step.content = s.content;
            trace.steps.push_back(std::move(step));
        }
        trace.answer = rec.gold;
        auto example = tokens::serialize(trace, kScheme, ingest::render_question(rec));

        std::string question = ingest::render_question(rec);
        std::string gold = datagen::gold_answer_text(rec);
        std::string user_answer = tokens::parse_output(example.body, kScheme).answer.value_or("");

        std::string verdict = "True";
        if (i == 13 || i == 27 || i == 41) verdict = "False";
        if (i == 35) verdict = "I cannot tell from the transcript.";
        judge["responses"][fp("judge-model",
                              evalkit::render_judge_prompt(question, gold, user_answer), 0.0)] =
            verdict;

        auto segmented = tokens::parse_output(example.body, kScheme);
        for (const auto& seg : segmented.segments) {
            if (seg.kind != tokens::SegmentKind::Memory && seg.kind != tokens::SegmentKind::Reason)
                continue;
            std::string cls = seg.kind == tokens::SegmentKind::Memory ? "0" : "1";
            if (segment_counter % 11 == 10) cls = cls == "0" ? "1" : "0";
            if (segment_counter % 23 == 22) cls = "unsure";
            judge["responses"][fp("judge-model", evalkit::render_step_prompt(seg.text), 0.0)] = cls;
            ++segment_counter;
        }

        if (verdict == "False") {
            std::string with_trace = question + "\n" + example.body;
            std::string site = i == 13 ? "memory" : i == 27 ? "reason" : "# reason";
            judge["responses"][fp("judge-model", evalkit::render_error_prompt(with_trace, gold),
                                  0.0)] = site;
        }

        // One-shot baseline responses reuse the itemized surface form.
        std::string baseline;
        for (const PlannedStep& s : steps) {
            baseline += s.memory ? "[rag]: " + s.content : "[reason]: " + s.content;
            baseline += "\n";
        }
        baseline += "The answer is: " + rec.gold + "\n";
        inference["responses"][fp("inference-model", evalkit::build_oneshot_cot_prompt(question),
                                  kGenTemperature)] = baseline;
    }

    std::filesystem::create_directories(out_dir);
    for (const auto& [name, doc] :
         {std::pair<std::string, const nlohmann::json*>{"inference", &inference},
          {"knowledge", &knowledge},
          {"judge", &judge}}) {
        std::ofstream out(out_dir / (name + ".json"));
        out << doc->dump(2) << "\n";
    }
    std::cout << "wrote mock fixtures for " << records.size() << " records to " << out_dir
              << "\n";
    return 0;
}
