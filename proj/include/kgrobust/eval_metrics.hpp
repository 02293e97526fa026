#pragma once

// Target-model classification and the NRA / RRA / ASR metrics.
//
//   NRA = #(verdict_original == gold) / #records
//   RRA = #(verdict_adversarial == gold) / #records
//   ASR = #(verdict_original == gold && verdict_adversarial != gold) / #(verdict_original == gold)

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kgrobust/errors.hpp"
#include "kgrobust/labels.hpp"
#include "kgrobust/llm_gateway.hpp"
#include "kgrobust/attack.hpp"
#include "kgrobust/t2p.hpp"

namespace kgrobust {

class RunLog;

class EmptyEvaluation : public Error {
public:
    EmptyEvaluation() : Error("no prompts to evaluate") {}
};

class DivisionByZero : public Error {
public:
    DivisionByZero() : Error("hypothesis ASR undefined for NRA = 0") {}
};

std::string classify_prompt_text(std::string_view sentence);
ChatRequest build_classify_request(std::string_view sentence, const std::string& model_id);

// Case-insensitive search for the three label tokens (delimited by
// non-alphanumeric characters). entity_error and predicate_error are found
// and masked first so their text cannot produce a spurious "true". Exactly
// one distinct label found -> that verdict; otherwise invalid.
Verdict extract_label(std::string_view response);

struct Classification {
    Verdict verdict = Verdict::invalid;
    std::string raw_response; // empty when the gateway failed
};

// Gateway failures after retries yield invalid and a warning in `log`.
Classification classify(std::string_view sentence, Gateway& gateway, const std::string& model_id,
                        RunLog* log = nullptr);

struct EvaluationRecord {
    OriginalPrompt original;
    AdversarialPrompt adversarial;
    GoldLabel gold = GoldLabel::true_fact;
    Verdict verdict_original = Verdict::invalid;
    Verdict verdict_adversarial = Verdict::invalid;
    std::string raw_original;
    std::string raw_adversarial;

    bool operator==(const EvaluationRecord&) const = default;
};

void to_json(nlohmann::json& j, const EvaluationRecord& r);
void from_json(const nlohmann::json& j, EvaluationRecord& r);

EvaluationRecord make_record(const OriginalPrompt& original, const AdversarialPrompt& adversarial,
                             Classification verdict_original, Classification verdict_adversarial);

struct MetricsReport {
    std::size_t n_total = 0;
    std::size_t n_original_correct = 0;
    std::size_t n_adversarial_correct = 0;
    std::size_t n_flipped = 0;
    std::size_t n_invalid_original = 0;
    std::size_t n_invalid_adversarial = 0;
    double nra = 0.0;
    double rra = 0.0;
    std::optional<double> asr; // null when no original verdict is correct

    bool operator==(const MetricsReport&) const = default;
};

void to_json(nlohmann::json& j, const MetricsReport& m);
void from_json(const nlohmann::json& j, MetricsReport& m);

double compute_nra(const std::vector<EvaluationRecord>& records);
double compute_rra(const std::vector<EvaluationRecord>& records);
std::optional<double> compute_asr(const std::vector<EvaluationRecord>& records);
MetricsReport compute_metrics(const std::vector<EvaluationRecord>& records);

// (nra - rra) / nra: the ASR expected if every prompt answered correctly in
// adversarial form had also been answered correctly in original form.
double hypothesis_asr(double nra, double rra);

} // namespace kgrobust
