#pragma once

// Triplets to prompts: template substitution or an LLM rewrite request.

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "kgrobust/errors.hpp"
#include "kgrobust/kg_ingest.hpp"
#include "kgrobust/llm_gateway.hpp"
#include "kgrobust/poisoner.hpp"

namespace kgrobust {

enum class T2pStrategy { template_based, llm };

std::string_view to_string(T2pStrategy strategy);
std::optional<T2pStrategy> parse_t2p_strategy(std::string_view text);
void to_json(nlohmann::json& j, T2pStrategy s);
void from_json(const nlohmann::json& j, T2pStrategy& s);

struct OriginalPrompt {
    std::string text; // nonempty, single line
    GoldLabel label = GoldLabel::true_fact;
    PoisonedTriplet source;
    T2pStrategy strategy = T2pStrategy::template_based;
    // True when the LLM rewrite failed and the template rendering was used.
    bool fallback = false;

    bool operator==(const OriginalPrompt&) const = default;
};

void to_json(nlohmann::json& j, const OriginalPrompt& p);
void from_json(const nlohmann::json& j, OriginalPrompt& p);

class MissingTemplate : public Error {
public:
    explicit MissingTemplate(const std::string& predicate)
        : Error("no template for predicate '" + predicate + "'"), predicate_(predicate) {}
    const std::string& predicate() const { return predicate_; }

private:
    std::string predicate_;
};

class EmptyGeneration : public Error {
public:
    EmptyGeneration() : Error("model returned an empty sentence") {}
};

// Replaces the single "[X]" and "[Y]" of `pattern` in one left-to-right pass
// over the pattern; substituted text is never rescanned.
std::string substitute_placeholders(std::string_view pattern, std::string_view subject, std::string_view object);

OriginalPrompt render_template(const PoisonedTriplet& pt, const TemplateMap& templates);

// Strips surrounding whitespace and wrapping quotes, collapses line breaks
// to single spaces. Used for every model-generated sentence.
std::string normalize_generation(std::string_view raw);

ChatRequest make_chat_request(std::string model_id, std::string user_text);

std::string t2p_prompt_text(const Triplet& t);
ChatRequest build_t2p_request(const PoisonedTriplet& pt, const std::string& model_id);

OriginalPrompt llm_transform(const PoisonedTriplet& pt, Gateway& gateway, const std::string& model_id);

} // namespace kgrobust
