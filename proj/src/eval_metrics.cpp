#include "kgrobust/eval_metrics.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "kgrobust/run_log.hpp"

namespace kgrobust {

std::string classify_prompt_text(std::string_view sentence) {
    std::string s;
    s += "Appraise the category of a sentence derived from a triplet (subject, predicate, object) and decide if it "
         "is \n";
    s += "'true', 'entity_error' or 'predicate_error': \n";
    s += sentence;
    s += " ";
    return s;
}

ChatRequest build_classify_request(std::string_view sentence, const std::string& model_id) {
    if (sentence.empty()) throw PreconditionError("cannot classify an empty sentence");
    return make_chat_request(model_id, classify_prompt_text(sentence));
}

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Finds `token` at word boundaries in `text`; masks every hit with spaces.
bool find_and_mask(std::string& text, std::string_view token) {
    bool found = false;
    for (std::size_t pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + 1)) {
        const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
        const std::size_t end = pos + token.size();
        const bool right_ok = end >= text.size() || !is_word_char(text[end]);
        if (left_ok && right_ok) {
            found = true;
            std::fill(text.begin() + static_cast<std::ptrdiff_t>(pos), text.begin() + static_cast<std::ptrdiff_t>(end),
                      ' ');
        }
    }
    return found;
}

} // namespace

Verdict extract_label(std::string_view response) {
    std::string text(response);
    std::transform(text.begin(), text.end(), text.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::vector<Verdict> found;
    if (find_and_mask(text, "entity_error")) found.push_back(Verdict::entity_error);
    if (find_and_mask(text, "predicate_error")) found.push_back(Verdict::predicate_error);
    if (find_and_mask(text, "true")) found.push_back(Verdict::true_fact);
    return found.size() == 1 ? found.front() : Verdict::invalid;
}

Classification classify(std::string_view sentence, Gateway& gateway, const std::string& model_id, RunLog* log) {
    const auto request = build_classify_request(sentence, model_id);
    try {
        auto response = gateway.chat(request);
        const auto verdict = extract_label(response.text);
        return {verdict, std::move(response.text)};
    } catch (const GatewayError& e) {
        if (log) log->warn(fmt::format("classification failed, counting as invalid: {}", e.what()));
        return {Verdict::invalid, {}};
    }
}

void to_json(nlohmann::json& j, const EvaluationRecord& r) {
    j = nlohmann::json{{"gold", r.gold},
                       {"verdict_original", r.verdict_original},
                       {"verdict_adversarial", r.verdict_adversarial},
                       {"raw_original", r.raw_original},
                       {"raw_adversarial", r.raw_adversarial},
                       {"original", r.original},
                       {"adversarial", r.adversarial}};
}

void from_json(const nlohmann::json& j, EvaluationRecord& r) {
    j.at("gold").get_to(r.gold);
    j.at("verdict_original").get_to(r.verdict_original);
    j.at("verdict_adversarial").get_to(r.verdict_adversarial);
    r.raw_original = j.value("raw_original", std::string{});
    r.raw_adversarial = j.value("raw_adversarial", std::string{});
    j.at("original").get_to(r.original);
    j.at("adversarial").get_to(r.adversarial);
}

EvaluationRecord make_record(const OriginalPrompt& original, const AdversarialPrompt& adversarial,
                             Classification verdict_original, Classification verdict_adversarial) {
    if (original.label != adversarial.label) {
        throw PreconditionError("original and adversarial prompts carry different labels");
    }
    EvaluationRecord r;
    r.original = original;
    r.adversarial = adversarial;
    r.gold = original.label;
    r.verdict_original = verdict_original.verdict;
    r.verdict_adversarial = verdict_adversarial.verdict;
    r.raw_original = std::move(verdict_original.raw_response);
    r.raw_adversarial = std::move(verdict_adversarial.raw_response);
    return r;
}

void to_json(nlohmann::json& j, const MetricsReport& m) {
    j = nlohmann::json{{"n_total", m.n_total},
                       {"n_original_correct", m.n_original_correct},
                       {"n_adversarial_correct", m.n_adversarial_correct},
                       {"n_flipped", m.n_flipped},
                       {"n_invalid_original", m.n_invalid_original},
                       {"n_invalid_adversarial", m.n_invalid_adversarial},
                       {"nra", m.nra},
                       {"rra", m.rra},
                       {"asr", m.asr ? nlohmann::json(*m.asr) : nlohmann::json(nullptr)}};
}

void from_json(const nlohmann::json& j, MetricsReport& m) {
    j.at("n_total").get_to(m.n_total);
    j.at("n_original_correct").get_to(m.n_original_correct);
    j.at("n_adversarial_correct").get_to(m.n_adversarial_correct);
    j.at("n_flipped").get_to(m.n_flipped);
    m.n_invalid_original = j.value("n_invalid_original", std::size_t{0});
    m.n_invalid_adversarial = j.value("n_invalid_adversarial", std::size_t{0});
    j.at("nra").get_to(m.nra);
    j.at("rra").get_to(m.rra);
    const auto& asr = j.at("asr");
    m.asr = asr.is_null() ? std::nullopt : std::optional<double>(asr.get<double>());
}

MetricsReport compute_metrics(const std::vector<EvaluationRecord>& records) {
    if (records.empty()) throw EmptyEvaluation();
    MetricsReport m;
    m.n_total = records.size();
    for (const auto& r : records) {
        const bool orig_ok = matches(r.verdict_original, r.gold);
        const bool adv_ok = matches(r.verdict_adversarial, r.gold);
        m.n_original_correct += orig_ok;
        m.n_adversarial_correct += adv_ok;
        m.n_flipped += orig_ok && !adv_ok;
        m.n_invalid_original += r.verdict_original == Verdict::invalid;
        m.n_invalid_adversarial += r.verdict_adversarial == Verdict::invalid;
    }
    const auto total = static_cast<double>(m.n_total);
    m.nra = static_cast<double>(m.n_original_correct) / total;
    m.rra = static_cast<double>(m.n_adversarial_correct) / total;
    if (m.n_original_correct > 0) {
        m.asr = static_cast<double>(m.n_flipped) / static_cast<double>(m.n_original_correct);
    }
    return m;
}

double compute_nra(const std::vector<EvaluationRecord>& records) { return compute_metrics(records).nra; }

double compute_rra(const std::vector<EvaluationRecord>& records) { return compute_metrics(records).rra; }

std::optional<double> compute_asr(const std::vector<EvaluationRecord>& records) {
    if (records.empty()) return std::nullopt;
    return compute_metrics(records).asr;
}

double hypothesis_asr(double nra, double rra) {
    if (!(nra > 0.0)) throw DivisionByZero();
    return (nra - rra) / nra;
}

} // namespace kgrobust
