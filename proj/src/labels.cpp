#include "kgrobust/labels.hpp"

#include <nlohmann/json.hpp>

#include "kgrobust/errors.hpp"

namespace kgrobust {

std::string_view to_string(GoldLabel label) {
    switch (label) {
        case GoldLabel::true_fact: return "true";
        case GoldLabel::entity_error: return "entity_error";
        case GoldLabel::predicate_error: return "predicate_error";
    }
    return "?";
}

std::optional<GoldLabel> parse_gold_label(std::string_view text) {
    for (auto label : kAllLabels) {
        if (text == to_string(label)) return label;
    }
    return std::nullopt;
}

void to_json(nlohmann::json& j, GoldLabel label) { j = std::string(to_string(label)); }

void from_json(const nlohmann::json& j, GoldLabel& label) {
    const auto parsed = parse_gold_label(j.get<std::string>());
    if (!parsed) throw Error("unknown gold label: " + j.dump());
    label = *parsed;
}

} // namespace kgrobust

namespace kgrobust {

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::true_fact: return "true";
        case Verdict::entity_error: return "entity_error";
        case Verdict::predicate_error: return "predicate_error";
        case Verdict::invalid: return "invalid";
    }
    return "?";
}

void to_json(nlohmann::json& j, Verdict v) { j = std::string(to_string(v)); }

void from_json(const nlohmann::json& j, Verdict& v) {
    const auto s = j.get<std::string>();
    for (auto c : {Verdict::true_fact, Verdict::entity_error, Verdict::predicate_error, Verdict::invalid}) {
        if (s == to_string(c)) {
            v = c;
            return;
        }
    }
    throw Error("unknown verdict: " + s);
}

} // namespace kgrobust
