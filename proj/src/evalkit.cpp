#include "mrcot/evalkit.hpp"

#include <cctype>

#include "mrcot/util.hpp"

namespace mrcot::evalkit {

namespace {

constexpr const char* kJudgePromptTemplate =
    R"(You should only return True if the user gives the correct answer or the content related to the correct answer, otherwise, you should return False.

## Question:
<BEGIN QUESTION>
{question}
<END QUESTION>

## Correct Answer:
<BEGIN CORRECT ANSWER>
{correct answer}
<END CORRECT ANSWER>

## User Answer:
<BEGIN USER ANSWER>
{user answer}
<END USER ANSWER>

# Judgement:
## True or False:)";

constexpr const char* kStepPromptTemplate =
    R"(Factual knowledge is information that aligns with objective reality and can be verified through evidence or observation, such as scientific facts or historical events.

here is the sentence:
<sentence>
{sentence}
<sentence>
You should be a classifier to judge whether this sentence is about a reasoning process or factual knowledge.

Your answer should be:
return 0 as factual knowledge or 1 as a reasoning process.)";

constexpr const char* kErrorPromptTemplate =
    R"(Question with Reasoning process:{question}
Correct Answer:{answer}

To analyze why the answer in the reasoning process is incorrect, is it in the sentence labeled as <reason> or <memory>?
your answer should be:
# reason or memory)";

constexpr const char* kOneshotCotTemplate =
    R"(Here is an example:

<Question>
'Is Mixed martial arts totally original from Roman Colosseum games?'
<Question>

<Steps>
'[memory]: Mixed Martial Arts (MMA) is a full-contact combat sport that allows a wide variety of fighting techniques from different martial arts traditions. It permits both striking and grappling, both standing and on the ground, using techniques from disciplines such as boxing, wrestling, Brazilian jiu-jitsu, Muay Thai, karate, and judo.',
'[memory]: The Roman Colosseum games, also known as gladiatorial games, were violent contests where gladiators fought against each other, condemned criminals, or wild animals. These events were held in large amphitheaters like the Colosseum in Rome and were a form of public spectacle and entertainment in ancient Rome.',
'[memory]: Modern MMA is characterized by regulated rules, weight classes, and a combination of various martial arts disciplines. It is officiated with rules to ensure the safety of participants, and fights occur in a controlled environment, often inside a cage.',
"[reason]: MMA and the Roman Colosseum games share the concept of hand-to-hand combat but differ significantly in purpose, structure, and regulation. While MMA is a sport with rules designed for competition and fighter safety, the Roman games were more about public spectacle and entertainment without much emphasis on fairness or safety. The combat in Roman games was often deadly and executed for the spectators' pleasure.",
"[reason]: MMA is not totally original from the Roman Colosseum games. Although both involve unarmed combat, MMA is a modern sporting discipline that synthesizes traditional martial arts into a competitive and regulated environment. The Roman games served as a historical precedent for public combat events but lacked the structured and safety-oriented approach of MMA. Therefore, while there may be a historical inspiration, MMA's development as a technical and regulated sport makes it distinct and not directly derived from the Roman games."
"[Answer]: The answer is incorrect."
<Steps>

Factual knowledge is information that aligns with objective reality and can be verified through evidence or observation, such as scientific facts or historical events.
If this step needs reasoning, return [reason] as the label, if this step needs factual knowledge return [rag] as the label.

Now, here is the question:
<Question>
{question}
<Question>

Your answer should be:
<Steps>
# Put your generated [rag] and [reason] steps here
<Steps>)";

} // namespace

std::string render_judge_prompt(const std::string& question, const std::string& correct_answer,
                                const std::string& user_answer) {
    std::string prompt = kJudgePromptTemplate;
    prompt = util::replace_all(prompt, "{question}", question);
    prompt = util::replace_all(prompt, "{correct answer}", correct_answer);
    prompt = util::replace_all(prompt, "{user answer}", user_answer);
    return prompt;
}

std::string render_step_prompt(const std::string& sentence) {
    return util::replace_all(kStepPromptTemplate, "{sentence}", sentence);
}

std::string render_error_prompt(const std::string& question_with_trace,
                                const std::string& correct_answer) {
    std::string prompt = kErrorPromptTemplate;
    prompt = util::replace_all(prompt, "{question}", question_with_trace);
    prompt = util::replace_all(prompt, "{answer}", correct_answer);
    return prompt;
}

std::string build_oneshot_cot_prompt(const std::string& question) {
    return util::replace_all(kOneshotCotTemplate, "{question}", question);
}

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::True: return "true";
        case Verdict::False: return "false";
        case Verdict::Error: return "error";
    }
    return "error";
}

Verdict normalize_verdict(const std::string& raw) {
    std::string kept;
    for (char c : raw) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            kept.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (kept == "true") return Verdict::True;
    if (kept == "false") return Verdict::False;
    return Verdict::Error;
}

JudgeVerdict judge_answer(const std::string& question, const std::string& correct_answer,
                          const std::string& user_answer, provider::ChatProvider& judge,
                          const std::string& model) {
    provider::ChatRequest req{
        model, {{"user", render_judge_prompt(question, correct_answer, user_answer)}}, 0.0};
    JudgeVerdict verdict;
    try {
        verdict.raw = judge.chat(req).content;
        verdict.verdict = normalize_verdict(verdict.raw);
    } catch (const provider::ProviderError& e) {
        verdict.raw = e.what();
        verdict.verdict = Verdict::Error;
    }
    return verdict;
}

std::string step_class_name(StepClass c) {
    switch (c) {
        case StepClass::Memory: return "memory";
        case StepClass::Reason: return "reason";
        case StepClass::Error: return "error";
    }
    return "error";
}

StepClass normalize_step_class(const std::string& raw) {
    std::string digits;
    for (char c : raw) {
        if (std::isdigit(static_cast<unsigned char>(c))) digits.push_back(c);
    }
    if (digits == "0") return StepClass::Memory;
    if (digits == "1") return StepClass::Reason;
    return StepClass::Error;
}

StepVerdict classify_step(const std::string& sentence, provider::ChatProvider& judge,
                          const std::string& model) {
    provider::ChatRequest req{model, {{"user", render_step_prompt(sentence)}}, 0.0};
    StepVerdict verdict;
    try {
        verdict.raw = judge.chat(req).content;
        verdict.cls = normalize_step_class(verdict.raw);
    } catch (const provider::ProviderError& e) {
        verdict.raw = e.what();
        verdict.cls = StepClass::Error;
    }
    return verdict;
}

std::string error_site_name(ErrorSite e) {
    switch (e) {
        case ErrorSite::Memory: return "memory";
        case ErrorSite::Reason: return "reason";
        case ErrorSite::Error: return "error";
    }
    return "error";
}

ErrorSite normalize_error_site(const std::string& raw) {
    bool has_memory = util::contains_ci(raw, "memory");
    bool has_reason = util::contains_ci(raw, "reason");
    if (has_memory == has_reason) return ErrorSite::Error; // both or neither
    return has_memory ? ErrorSite::Memory : ErrorSite::Reason;
}

ErrorVerdict attribute_error(const std::string& question_with_trace,
                             const std::string& correct_answer, provider::ChatProvider& judge,
                             const std::string& model) {
    provider::ChatRequest req{
        model, {{"user", render_error_prompt(question_with_trace, correct_answer)}}, 0.0};
    ErrorVerdict verdict;
    try {
        verdict.raw = judge.chat(req).content;
        verdict.site = normalize_error_site(verdict.raw);
    } catch (const provider::ProviderError& e) {
        verdict.raw = e.what();
        verdict.site = ErrorSite::Error;
    }
    return verdict;
}

AccuracyReport summarize(const std::vector<Verdict>& verdicts) {
    AccuracyReport report;
    report.total = verdicts.size();
    for (Verdict v : verdicts) {
        if (v == Verdict::Error) {
            ++report.errors;
            continue;
        }
        ++report.judged;
        if (v == Verdict::True) ++report.correct;
    }
    if (report.judged > 0) {
        report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.judged);
    }
    return report;
}

} // namespace mrcot::evalkit
