#include "kgrobust/pre.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "kgrobust/t2p.hpp"

namespace kgrobust {

LlmScore::LlmScore(double value) : value_(value) {
    if (!(value >= -1.0 && value <= 1.0)) throw ScoreOutOfRange(value);
}

ScoreOutOfRange::ScoreOutOfRange(double v) : Error(fmt::format("score {} outside [-1, 1]", v)) {}

std::string_view to_string(ScorerKind kind) { return kind == ScorerKind::wer ? "wer" : "llmscore"; }

std::optional<ScorerKind> parse_scorer_kind(std::string_view text) {
    if (text == "llmscore") return ScorerKind::llmscore;
    if (text == "wer") return ScorerKind::wer;
    return std::nullopt;
}

std::string_view to_string(DecisionReason reason) {
    switch (reason) {
        case DecisionReason::pass: return "pass";
        case DecisionReason::below_threshold: return "below_threshold";
        case DecisionReason::unparseable_score: return "unparseable_score";
        case DecisionReason::scorer_error: return "scorer_error";
    }
    return "?";
}

void to_json(nlohmann::json& j, ScorerKind k) { j = std::string(to_string(k)); }

void from_json(const nlohmann::json& j, ScorerKind& k) {
    const auto parsed = parse_scorer_kind(j.get<std::string>());
    if (!parsed) throw Error("unknown scorer: " + j.dump());
    k = *parsed;
}

void to_json(nlohmann::json& j, DecisionReason r) { j = std::string(to_string(r)); }

void from_json(const nlohmann::json& j, DecisionReason& r) {
    const auto s = j.get<std::string>();
    for (auto v : {DecisionReason::pass, DecisionReason::below_threshold, DecisionReason::unparseable_score,
                   DecisionReason::scorer_error}) {
        if (s == to_string(v)) {
            r = v;
            return;
        }
    }
    throw Error("unknown decision reason: " + s);
}

void to_json(nlohmann::json& j, const RefinementDecision& d) {
    j = nlohmann::json{{"accepted", d.accepted},
                       {"score", d.score ? nlohmann::json(*d.score) : nlohmann::json(nullptr)},
                       {"scorer", d.scorer},
                       {"reason", d.reason},
                       {"raw_response", d.raw_response}};
}

void from_json(const nlohmann::json& j, RefinementDecision& d) {
    j.at("accepted").get_to(d.accepted);
    const auto& s = j.at("score");
    d.score = s.is_null() ? std::nullopt : std::optional<double>(s.get<double>());
    j.at("scorer").get_to(d.scorer);
    j.at("reason").get_to(d.reason);
    d.raw_response = j.value("raw_response", std::string{});
}

std::string pre_prompt_text(std::string_view original, std::string_view candidate) {
    std::string s;
    s += "Task Description: \n";
    s += "you are required to assess the quality of a piece of generated text, as well as its semantic "
         "similarity and \n";
    s += "overall quality in relation to a provided reference text. \n";
    s += "Input Data: Reference Text: ";
    s += original;
    s += "; Candidate Text: ";
    s += candidate;
    s += " \n";
    s += "Scoring Guidelines: Please rate the candidate text according to the following criteria, with scores \n";
    s += "ranging from -1 to 1, where 1 represents a perfect match, and -1 represents a complete mismatch. The \n";
    s += "score can be a decimal \n";
    s += "Just give the score, and the Score needs to be a three-digit decimal representation, score: ";
    return s;
}

ChatRequest build_pre_request(std::string_view original, std::string_view candidate, const std::string& model_id) {
    if (original.empty()) throw PreconditionError("PRE original sentence is empty");
    if (candidate.empty()) throw PreconditionError("PRE candidate sentence is empty");
    return make_chat_request(model_id, pre_prompt_text(original, candidate));
}

LlmScore parse_score(std::string_view text) {
    const auto digit = [&](std::size_t i) {
        return i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]));
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        std::size_t start = i;
        std::size_t j = i;
        if ((text[j] == '-' || text[j] == '+') && (digit(j + 1) || (j + 2 < text.size() && text[j + 1] == '.' && digit(j + 2)))) {
            ++j;
        } else if (!digit(j) && !(text[j] == '.' && digit(j + 1))) {
            continue;
        }
        while (digit(j)) ++j;
        if (j < text.size() && text[j] == '.' && digit(j + 1)) {
            ++j;
            while (digit(j)) ++j;
        }
        const std::string number(text.substr(start, j - start));
        const double value = std::strtod(number.c_str(), nullptr);
        const double rounded = std::round(value * 1000.0) / 1000.0;
        return LlmScore(rounded == 0.0 ? 0.0 : rounded);
    }
    throw UnparseableScore(std::string(text));
}

LlmScore llmscore(std::string_view original, std::string_view candidate, Gateway& gateway,
                  const std::string& model_id) {
    return parse_score(gateway.chat(build_pre_request(original, candidate, model_id)).text);
}

namespace {

std::vector<std::string_view> tokens(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        const std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

} // namespace

double wer(std::string_view reference, std::string_view candidate) {
    const auto ref = tokens(reference);
    const auto hyp = tokens(candidate);
    if (ref.empty()) throw EmptyReference();
    // Two-row Levenshtein over tokens.
    std::vector<std::size_t> prev(hyp.size() + 1);
    std::vector<std::size_t> cur(hyp.size() + 1);
    for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= ref.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= hyp.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[hyp.size()]) / static_cast<double>(ref.size());
}

bool passes_llm_threshold(double score, double tau_llm) { return score >= tau_llm; }

RefinementDecision gate(std::string_view original, std::string_view candidate, const PreGateConfig& config,
                        Gateway* gateway) {
    RefinementDecision d;
    d.scorer = config.scorer;
    if (config.scorer == ScorerKind::wer) {
        try {
            const double w = wer(original, candidate);
            d.score = w;
            d.accepted = w <= config.tau_wer;
            d.reason = d.accepted ? DecisionReason::pass : DecisionReason::below_threshold;
        } catch (const Error&) {
            d.reason = DecisionReason::scorer_error;
        }
        return d;
    }

    if (gateway == nullptr || original.empty() || candidate.empty()) {
        d.reason = DecisionReason::scorer_error;
        return d;
    }
    try {
        d.raw_response = gateway->chat(build_pre_request(original, candidate, config.scoring_model)).text;
    } catch (const Error&) {
        d.reason = DecisionReason::scorer_error;
        return d;
    }
    try {
        const auto score = parse_score(d.raw_response);
        d.score = score.value();
        d.accepted = passes_llm_threshold(score.value(), config.tau_llm);
        d.reason = d.accepted ? DecisionReason::pass : DecisionReason::below_threshold;
    } catch (const UnparseableScore&) {
        d.reason = DecisionReason::unparseable_score;
    } catch (const ScoreOutOfRange&) {
        d.reason = DecisionReason::unparseable_score;
    }
    return d;
}

} // namespace kgrobust
