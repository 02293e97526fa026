#pragma once

// Few-shot example mining and adversarial prompt generation.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kgrobust/pre.hpp"
#include "kgrobust/t2p.hpp"

namespace kgrobust {

class RunLog;

struct FewShotExample {
    std::string original_text;
    std::string adversarial_text;
    GoldLabel label = GoldLabel::true_fact;

    bool operator==(const FewShotExample&) const = default;
};

void to_json(nlohmann::json& j, const FewShotExample& e);
void from_json(const nlohmann::json& j, FewShotExample& e);

enum class AdversarialOrigin { generated, fallback_original };

std::string_view to_string(AdversarialOrigin origin);
void to_json(nlohmann::json& j, AdversarialOrigin o);
void from_json(const nlohmann::json& j, AdversarialOrigin& o);

struct AdversarialPrompt {
    std::string text;
    GoldLabel label = GoldLabel::true_fact;
    AdversarialOrigin origin = AdversarialOrigin::fallback_original;
    RefinementDecision pre_decision;
    OriginalPrompt source;
    std::string candidate;    // normalized model output, empty if generation failed
    std::size_t examples_used = 0;

    bool operator==(const AdversarialPrompt&) const = default;
};

void to_json(nlohmann::json& j, const AdversarialPrompt& a);
void from_json(const nlohmann::json& j, AdversarialPrompt& a);

// The two labels other than `label`, canonical order, as "'a' or 'b'".
std::string other_labels_phrase(GoldLabel label);

std::string fsa_prompt_text(const OriginalPrompt& p);
ChatRequest build_fsa_request(const OriginalPrompt& p, const std::string& model_id);

// One parenthesized example line per element of `examples`; none when empty.
std::string apgp_prompt_text(const OriginalPrompt& p, const std::vector<FewShotExample>& examples);
ChatRequest build_apgp_request(const OriginalPrompt& p, const std::optional<FewShotExample>& example,
                               const std::string& model_id);
ChatRequest build_apgp_request(const OriginalPrompt& p, const std::vector<FewShotExample>& examples,
                               const std::string& model_id);

// Everything the miner saw for one prompt, kept for the run's audit trail.
struct MiningTrace {
    std::string original_text;
    GoldLabel label = GoldLabel::true_fact;
    std::string candidate;
    std::optional<RefinementDecision> decision;
    std::optional<Verdict> verdict_original;
    std::optional<Verdict> verdict_candidate;
    bool recorded = false;
    std::string error;
};

void to_json(nlohmann::json& j, const MiningTrace& t);

struct MiningOptions {
    std::string generator_model;  // model asked to paraphrase
    std::string classifier_model; // model under evaluation
    PreGateConfig gate;
    std::size_t max_examples = 8;
    int parallelism = 1;
};

struct MiningResult {
    std::vector<FewShotExample> examples;
    std::vector<MiningTrace> traces; // one per input prompt, input order
};

// A prompt yields an example iff its candidate passes the gate, differs from
// the original text, and flips a correct original verdict to a wrong one.
MiningResult mine_examples(const std::vector<OriginalPrompt>& prompts, Gateway& gateway,
                           const MiningOptions& options, RunLog* log = nullptr);

// Seeded uniform draw among examples with `label`, else among all examples.
std::optional<FewShotExample> select_example(const std::vector<FewShotExample>& examples, GoldLabel label,
                                             std::uint64_t seed);

// Up to `count` distinct examples, each drawn with select_example on the
// remaining pool using derive_seed(seed, k).
std::vector<FewShotExample> select_examples(const std::vector<FewShotExample>& examples, GoldLabel label,
                                            std::size_t count, std::uint64_t seed);

struct ApgpOptions {
    std::string generator_model;
    PreGateConfig gate;
    bool use_fsa = false;
    std::size_t examples_per_prompt = 1; // 0..3
};

// Never throws for model failures: rejection or any error yields the
// original text with origin fallback_original.
AdversarialPrompt generate_adversarial(const OriginalPrompt& p, const std::vector<FewShotExample>& examples,
                                       Gateway& gateway, const ApgpOptions& options, std::uint64_t seed,
                                       RunLog* log = nullptr);

} // namespace kgrobust
