#pragma once

// Prompt refinement: score a candidate sentence against its original and
// accept it when the score clears a threshold.

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "kgrobust/errors.hpp"
#include "kgrobust/llm_gateway.hpp"

namespace kgrobust {

inline constexpr double kDefaultTauLlm = 0.92;
inline constexpr double kDefaultTauWer = 0.5;

// Similarity score in [-1, 1].
class LlmScore {
public:
    explicit LlmScore(double value);
    double value() const { return value_; }
    auto operator<=>(const LlmScore&) const = default;

private:
    double value_;
};

class UnparseableScore : public Error {
public:
    explicit UnparseableScore(const std::string& raw) : Error("no score in response: " + raw) {}
};

class ScoreOutOfRange : public Error {
public:
    explicit ScoreOutOfRange(double v);
};

class EmptyReference : public Error {
public:
    EmptyReference() : Error("WER reference has no tokens") {}
};

enum class ScorerKind { llmscore, wer };
enum class DecisionReason { pass, below_threshold, unparseable_score, scorer_error };

std::string_view to_string(ScorerKind kind);
std::optional<ScorerKind> parse_scorer_kind(std::string_view text);
std::string_view to_string(DecisionReason reason);

void to_json(nlohmann::json& j, ScorerKind k);
void from_json(const nlohmann::json& j, ScorerKind& k);
void to_json(nlohmann::json& j, DecisionReason r);
void from_json(const nlohmann::json& j, DecisionReason& r);

struct RefinementDecision {
    bool accepted = false;
    // LLMScore for llmscore; the WER value for wer. Absent when scoring failed.
    std::optional<double> score;
    ScorerKind scorer = ScorerKind::llmscore;
    DecisionReason reason = DecisionReason::scorer_error;
    std::string raw_response; // scorer output kept for audit (llmscore only)

    bool operator==(const RefinementDecision&) const = default;
};

void to_json(nlohmann::json& j, const RefinementDecision& d);
void from_json(const nlohmann::json& j, RefinementDecision& d);

struct PreGateConfig {
    ScorerKind scorer = ScorerKind::llmscore;
    double tau_llm = kDefaultTauLlm; // accept when score >= tau_llm
    double tau_wer = kDefaultTauWer; // accept when wer <= tau_wer
    std::string scoring_model;       // model asked for the LLMScore
};

std::string pre_prompt_text(std::string_view original, std::string_view candidate);
ChatRequest build_pre_request(std::string_view original, std::string_view candidate, const std::string& model_id);

// First decimal number in the text (optional sign, optional fraction),
// rounded to three decimals.
LlmScore parse_score(std::string_view text);

LlmScore llmscore(std::string_view original, std::string_view candidate, Gateway& gateway,
                  const std::string& model_id);

// Word-level Levenshtein distance over whitespace tokens divided by the
// number of reference tokens. Case-sensitive.
double wer(std::string_view reference, std::string_view candidate);

// Never throws for scoring failures: they fold into a rejecting decision.
RefinementDecision gate(std::string_view original, std::string_view candidate, const PreGateConfig& config,
                        Gateway* gateway);

// Applies the llmscore acceptance rule to an already-known score.
bool passes_llm_threshold(double score, double tau_llm);

} // namespace kgrobust
