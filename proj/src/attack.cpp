#include "kgrobust/attack.hpp"

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "kgrobust/eval_metrics.hpp"
#include "kgrobust/parallel.hpp"
#include "kgrobust/random.hpp"
#include "kgrobust/run_log.hpp"

namespace kgrobust {

void to_json(nlohmann::json& j, const FewShotExample& e) {
    j = nlohmann::json{{"original_text", e.original_text}, {"adversarial_text", e.adversarial_text}, {"label", e.label}};
}

void from_json(const nlohmann::json& j, FewShotExample& e) {
    j.at("original_text").get_to(e.original_text);
    j.at("adversarial_text").get_to(e.adversarial_text);
    j.at("label").get_to(e.label);
}

std::string_view to_string(AdversarialOrigin origin) {
    return origin == AdversarialOrigin::generated ? "generated" : "fallback_original";
}

void to_json(nlohmann::json& j, AdversarialOrigin o) { j = std::string(to_string(o)); }

void from_json(const nlohmann::json& j, AdversarialOrigin& o) {
    const auto s = j.get<std::string>();
    if (s == "generated") {
        o = AdversarialOrigin::generated;
    } else if (s == "fallback_original") {
        o = AdversarialOrigin::fallback_original;
    } else {
        throw Error("unknown adversarial origin: " + s);
    }
}

void to_json(nlohmann::json& j, const AdversarialPrompt& a) {
    j = nlohmann::json{{"text", a.text},
                       {"label", a.label},
                       {"origin", a.origin},
                       {"candidate", a.candidate},
                       {"examples_used", a.examples_used},
                       {"pre_decision", a.pre_decision},
                       {"source", a.source}};
}

void from_json(const nlohmann::json& j, AdversarialPrompt& a) {
    j.at("text").get_to(a.text);
    j.at("label").get_to(a.label);
    j.at("origin").get_to(a.origin);
    a.candidate = j.value("candidate", std::string{});
    a.examples_used = j.value("examples_used", std::size_t{0});
    j.at("pre_decision").get_to(a.pre_decision);
    j.at("source").get_to(a.source);
}

std::string other_labels_phrase(GoldLabel label) {
    std::vector<std::string_view> others;
    for (auto l : kAllLabels) {
        if (l != label) others.push_back(to_string(l));
    }
    return fmt::format("'{}' or '{}'", others[0], others[1]);
}

namespace {

// Lines shared by the mining and generation prompts. The two differ in the
// guidance line and in how the closing echo is laid out.
std::string attack_prompt_head(const OriginalPrompt& p) {
    std::string s;
    s += "The original sentence \"" + p.text + "\" is classified as " + std::string(to_string(p.label)) + ". \n";
    s += "Your task is to generate a new sentence which must satisfy the following  conditions: \n";
    s += "1. Keeping the semantic meaning of the new sentence unchanged; \n";
    s += "2. The new sentence should be classified as " + other_labels_phrase(p.label) + " \n";
    return s;
}

} // namespace

std::string fsa_prompt_text(const OriginalPrompt& p) {
    std::string s = attack_prompt_head(p);
    s += "You can finish the task by modifying sentence using the following guidance: Paraphrase the sentence ; \n";
    s += "Only output the new sentence without anything else. " + p.text + " -> ";
    return s;
}

ChatRequest build_fsa_request(const OriginalPrompt& p, const std::string& model_id) {
    return make_chat_request(model_id, fsa_prompt_text(p));
}

std::string apgp_prompt_text(const OriginalPrompt& p, const std::vector<FewShotExample>& examples) {
    std::string s = attack_prompt_head(p);
    s += "You can finish the task by modifying sentence using the following guidance: Paraphrase the sentence; \n";
    for (const auto& e : examples) {
        s += "(Here is an example that fit the guidance: " + e.original_text + " ->  " + e.adversarial_text + ") \n";
    }
    s += "Only output the new sentence without anything else. \n";
    s += p.text + " -> ";
    return s;
}

ChatRequest build_apgp_request(const OriginalPrompt& p, const std::optional<FewShotExample>& example,
                               const std::string& model_id) {
    std::vector<FewShotExample> examples;
    if (example) examples.push_back(*example);
    return build_apgp_request(p, examples, model_id);
}

ChatRequest build_apgp_request(const OriginalPrompt& p, const std::vector<FewShotExample>& examples,
                               const std::string& model_id) {
    return make_chat_request(model_id, apgp_prompt_text(p, examples));
}

void to_json(nlohmann::json& j, const MiningTrace& t) {
    j = nlohmann::json{{"original_text", t.original_text},
                       {"label", t.label},
                       {"candidate", t.candidate},
                       {"decision", t.decision ? nlohmann::json(*t.decision) : nlohmann::json(nullptr)},
                       {"verdict_original",
                        t.verdict_original ? nlohmann::json(*t.verdict_original) : nlohmann::json(nullptr)},
                       {"verdict_candidate",
                        t.verdict_candidate ? nlohmann::json(*t.verdict_candidate) : nlohmann::json(nullptr)},
                       {"recorded", t.recorded},
                       {"error", t.error}};
}

MiningResult mine_examples(const std::vector<OriginalPrompt>& prompts, Gateway& gateway,
                           const MiningOptions& options, RunLog* log) {
    struct Item {
        MiningTrace trace;
        std::vector<std::string> warnings;
    };
    auto items = parallel_map(prompts.size(), options.parallelism, [&](std::size_t i) {
        const auto& p = prompts[i];
        Item item;
        auto& trace = item.trace;
        trace.original_text = p.text;
        trace.label = p.label;
        try {
            trace.candidate = normalize_generation(gateway.chat(build_fsa_request(p, options.generator_model)).text);
        } catch (const Error& e) {
            trace.error = e.what();
            item.warnings.push_back(fmt::format("mining skipped prompt {}: {}", i, e.what()));
            return item;
        }
        if (trace.candidate.empty()) {
            trace.error = "empty generation";
            return item;
        }
        trace.decision = gate(p.text, trace.candidate, options.gate, &gateway);
        if (!trace.decision->accepted || trace.candidate == p.text) return item;

        RunLog local;
        trace.verdict_original = classify(p.text, gateway, options.classifier_model, &local).verdict;
        trace.verdict_candidate = classify(trace.candidate, gateway, options.classifier_model, &local).verdict;
        item.warnings = local.warnings();
        trace.recorded = matches(*trace.verdict_original, p.label) && !matches(*trace.verdict_candidate, p.label);
        return item;
    });

    MiningResult result;
    for (auto& item : items) {
        if (log) {
            for (auto& w : item.warnings) log->warn(std::move(w));
        }
        if (item.trace.recorded && result.examples.size() < options.max_examples) {
            result.examples.push_back({item.trace.original_text, item.trace.candidate, item.trace.label});
        }
        result.traces.push_back(std::move(item.trace));
    }
    return result;
}

std::optional<FewShotExample> select_example(const std::vector<FewShotExample>& examples, GoldLabel label,
                                             std::uint64_t seed) {
    if (examples.empty()) return std::nullopt;
    std::vector<const FewShotExample*> matching;
    for (const auto& e : examples) {
        if (e.label == label) matching.push_back(&e);
    }
    Rng rng(seed);
    if (!matching.empty()) return *matching[rng.below(matching.size())];
    return examples[rng.below(examples.size())];
}

std::vector<FewShotExample> select_examples(const std::vector<FewShotExample>& examples, GoldLabel label,
                                            std::size_t count, std::uint64_t seed) {
    std::vector<FewShotExample> pool = examples;
    std::vector<FewShotExample> chosen;
    for (std::size_t k = 0; k < count && !pool.empty(); ++k) {
        auto pick = select_example(pool, label, derive_seed(seed, k));
        const auto it = std::find(pool.begin(), pool.end(), *pick);
        pool.erase(it);
        chosen.push_back(std::move(*pick));
    }
    return chosen;
}

AdversarialPrompt generate_adversarial(const OriginalPrompt& p, const std::vector<FewShotExample>& examples,
                                       Gateway& gateway, const ApgpOptions& options, std::uint64_t seed,
                                       RunLog* log) {
    AdversarialPrompt a;
    a.label = p.label;
    a.source = p;
    a.text = p.text;
    a.origin = AdversarialOrigin::fallback_original;
    a.pre_decision.scorer = options.gate.scorer;

    const auto chosen = options.use_fsa ? select_examples(examples, p.label, options.examples_per_prompt, seed)
                                        : std::vector<FewShotExample>{};
    a.examples_used = chosen.size();
    try {
        a.candidate = normalize_generation(
            gateway.chat(build_apgp_request(p, chosen, options.generator_model)).text);
    } catch (const Error& e) {
        if (log) log->warn(fmt::format("adversarial generation failed, keeping original: {}", e.what()));
        return a;
    }
    if (a.candidate.empty()) {
        if (log) log->warn("adversarial generation returned nothing, keeping original");
        return a;
    }
    a.pre_decision = gate(p.text, a.candidate, options.gate, &gateway);
    if (a.pre_decision.accepted) {
        a.text = a.candidate;
        a.origin = AdversarialOrigin::generated;
    }
    return a;
}

} // namespace kgrobust
