#include "kgrobust/t2p.hpp"

#include <nlohmann/json.hpp>

namespace kgrobust {

std::string_view to_string(T2pStrategy strategy) {
    return strategy == T2pStrategy::llm ? "llm" : "template";
}

std::optional<T2pStrategy> parse_t2p_strategy(std::string_view text) {
    if (text == "template") return T2pStrategy::template_based;
    if (text == "llm") return T2pStrategy::llm;
    return std::nullopt;
}

void to_json(nlohmann::json& j, T2pStrategy s) { j = std::string(to_string(s)); }

void from_json(const nlohmann::json& j, T2pStrategy& s) {
    const auto parsed = parse_t2p_strategy(j.get<std::string>());
    if (!parsed) throw Error("unknown t2p strategy: " + j.dump());
    s = *parsed;
}

void to_json(nlohmann::json& j, const OriginalPrompt& p) {
    j = nlohmann::json{{"text", p.text},
                       {"label", p.label},
                       {"strategy", p.strategy},
                       {"fallback", p.fallback},
                       {"source", p.source}};
}

void from_json(const nlohmann::json& j, OriginalPrompt& p) {
    j.at("text").get_to(p.text);
    j.at("label").get_to(p.label);
    j.at("strategy").get_to(p.strategy);
    p.fallback = j.value("fallback", false);
    j.at("source").get_to(p.source);
}

std::string substitute_placeholders(std::string_view pattern, std::string_view subject, std::string_view object) {
    std::string out;
    out.reserve(pattern.size() + subject.size() + object.size());
    bool x_done = false;
    bool y_done = false;
    std::size_t i = 0;
    while (i < pattern.size()) {
        const auto rest = pattern.substr(i);
        if (!x_done && rest.starts_with("[X]")) {
            out += subject;
            x_done = true;
            i += 3;
        } else if (!y_done && rest.starts_with("[Y]")) {
            out += object;
            y_done = true;
            i += 3;
        } else {
            out += pattern[i++];
        }
    }
    return out;
}

OriginalPrompt render_template(const PoisonedTriplet& pt, const TemplateMap& templates) {
    const auto it = templates.find(pt.current.predicate);
    if (it == templates.end()) throw MissingTemplate(pt.current.predicate);
    OriginalPrompt p;
    p.text = substitute_placeholders(it->second.pattern, pt.current.subject, pt.current.object);
    p.label = pt.label;
    p.source = pt;
    p.strategy = T2pStrategy::template_based;
    return p;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// Removes one layer of matching wrapping quotes; false when there is none.
bool unwrap_quotes(std::string_view& s) {
    static constexpr std::pair<std::string_view, std::string_view> kPairs[] = {
        {"\"", "\""}, {"'", "'"}, {"`", "`"}, {"\xE2\x80\x9C", "\xE2\x80\x9D"}, {"\xE2\x80\x98", "\xE2\x80\x99"}};
    for (const auto& [open, close] : kPairs) {
        if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
            s.remove_prefix(open.size());
            s.remove_suffix(close.size());
            return true;
        }
    }
    return false;
}

} // namespace

std::string normalize_generation(std::string_view raw) {
    std::string collapsed;
    collapsed.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size();) {
        if (raw[i] == '\n' || raw[i] == '\r') {
            while (!collapsed.empty() && (collapsed.back() == ' ' || collapsed.back() == '\t')) collapsed.pop_back();
            while (i < raw.size() && is_space(raw[i])) ++i;
            collapsed += ' ';
        } else {
            collapsed += raw[i++];
        }
    }
    std::string_view s = trim(collapsed);
    while (unwrap_quotes(s)) s = trim(s);
    return std::string(s);
}

ChatRequest make_chat_request(std::string model_id, std::string user_text) {
    ChatRequest r;
    r.model_id = std::move(model_id);
    r.user_text = std::move(user_text);
    return r;
}

std::string t2p_prompt_text(const Triplet& t) {
    std::string s;
    s += "Here is a triplet (subject, predicate, object) extracted from knowledge graph: \n";
    s += "The subject: " + t.subject + "; The predicate: " + t.predicate + "; The object: " + t.object + "; \n";
    s += "Now create a statement describing this triplet. Tips: Do not care about whether this triplet is true, "
         "and do \n";
    s += "not change the meaning of the predicate. \n";
    s += "Just give the statement. Statement: ";
    return s;
}

ChatRequest build_t2p_request(const PoisonedTriplet& pt, const std::string& model_id) {
    return make_chat_request(model_id, t2p_prompt_text(pt.current));
}

OriginalPrompt llm_transform(const PoisonedTriplet& pt, Gateway& gateway, const std::string& model_id) {
    const auto response = gateway.chat(build_t2p_request(pt, model_id));
    OriginalPrompt p;
    p.text = normalize_generation(response.text);
    if (p.text.empty()) throw EmptyGeneration();
    p.label = pt.label;
    p.source = pt;
    p.strategy = T2pStrategy::llm;
    return p;
}

} // namespace kgrobust
