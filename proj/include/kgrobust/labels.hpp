#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace kgrobust {

// Gold label of a prompt. The spellings are exactly the tokens the model is
// asked to emit.
enum class GoldLabel { true_fact, entity_error, predicate_error };

inline constexpr std::array<GoldLabel, 3> kAllLabels{GoldLabel::true_fact, GoldLabel::entity_error,
                                                     GoldLabel::predicate_error};

std::string_view to_string(GoldLabel label);
std::optional<GoldLabel> parse_gold_label(std::string_view text);

void to_json(nlohmann::json& j, GoldLabel label);
void from_json(const nlohmann::json& j, GoldLabel& label);

// Label assigned by the model under evaluation; invalid when no single label
// could be extracted from its response.
enum class Verdict { true_fact, entity_error, predicate_error, invalid };

std::string_view to_string(Verdict v);
void to_json(nlohmann::json& j, Verdict v);
void from_json(const nlohmann::json& j, Verdict& v);

inline bool matches(Verdict v, GoldLabel gold) {
    switch (v) {
        case Verdict::true_fact: return gold == GoldLabel::true_fact;
        case Verdict::entity_error: return gold == GoldLabel::entity_error;
        case Verdict::predicate_error: return gold == GoldLabel::predicate_error;
        case Verdict::invalid: return false;
    }
    return false;
}

} // namespace kgrobust
