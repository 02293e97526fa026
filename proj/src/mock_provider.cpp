#include "kgrobust/mock_provider.hpp"

#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace kgrobust {

MockScript MockScript::from_json(const nlohmann::json& j) {
    MockScript script;
    if (!j.is_object()) throw Error("mock script must be a JSON object");
    if (j.contains("rules")) {
        for (const auto& r : j.at("rules")) {
            MockRule rule;
            rule.match = r.at("match").get<std::string>();
            rule.response = r.value("response", std::string{});
            rule.is_regex = r.value("regex", false);
            rule.fail_times = r.value("fail_times", 0);
            rule.fail_always = r.value("fail_always", false);
            rule.fail_status = r.value("fail_status", 500);
            rule.delay_ms = r.value("delay_ms", 0);
            const auto kind = r.value("fail_kind", std::string("http"));
            if (kind == "http") {
                rule.fail_kind = ProviderReply::Status::http_error;
            } else if (kind == "transport") {
                rule.fail_kind = ProviderReply::Status::transport_error;
            } else if (kind == "timeout") {
                rule.fail_kind = ProviderReply::Status::timeout;
            } else {
                throw Error("mock rule has unknown fail_kind: " + kind);
            }
            script.rules.push_back(std::move(rule));
        }
    }
    script.default_response = j.value("default_response", std::string{});
    return script;
}

MockScript MockScript::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open mock script " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error("mock script " + path.string() + ": " + e.what());
    }
}

MockProvider::MockProvider(MockScript script)
    : script_(std::move(script)), counts_(script_.rules.size() + 1, 0) {
    compiled_.reserve(script_.rules.size());
    for (const auto& rule : script_.rules) {
        try {
            compiled_.emplace_back(rule.is_regex ? std::regex(rule.match, std::regex::ECMAScript) : std::regex());
        } catch (const std::regex_error& e) {
            throw Error("mock rule has invalid regex '" + rule.match + "': " + e.what());
        }
    }
}

std::optional<std::size_t> MockProvider::find_rule(const std::string& text) const {
    for (std::size_t i = 0; i < script_.rules.size(); ++i) {
        const auto& rule = script_.rules[i];
        const bool hit = rule.is_regex ? std::regex_search(text, compiled_[i])
                                       : text.find(rule.match) != std::string::npos;
        if (hit) return i;
    }
    return std::nullopt;
}

ProviderReply MockProvider::send(const ChatRequest& request) {
    const int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    struct Leave {
        std::atomic<int>& counter;
        ~Leave() { --counter; }
    } leave{in_flight_};

    const auto rule_index = find_rule(request.user_text);
    std::uint64_t served = 0;
    {
        std::lock_guard lock(mutex_);
        served = ++counts_[rule_index.value_or(script_.rules.size())];
    }
    if (!rule_index) return ProviderReply::success(script_.default_response);

    const auto& rule = script_.rules[*rule_index];
    if (rule.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(rule.delay_ms));
    if (rule.fail_always || served <= static_cast<std::uint64_t>(std::max(rule.fail_times, 0))) {
        switch (rule.fail_kind) {
            case ProviderReply::Status::transport_error: return ProviderReply::transport("scripted transport failure");
            case ProviderReply::Status::timeout: return ProviderReply::timed_out("scripted timeout");
            default: return ProviderReply::http(rule.fail_status, "scripted failure");
        }
    }
    return ProviderReply::success(rule.response);
}

std::uint64_t MockProvider::rule_calls(std::size_t i) const {
    std::lock_guard lock(mutex_);
    return counts_.at(i);
}

std::uint64_t MockProvider::default_calls() const {
    std::lock_guard lock(mutex_);
    return counts_.back();
}

std::uint64_t MockProvider::total_calls() const {
    std::lock_guard lock(mutex_);
    std::uint64_t total = 0;
    for (auto c : counts_) total += c;
    return total;
}

std::vector<std::uint64_t> MockProvider::counters() const {
    std::lock_guard lock(mutex_);
    return counts_;
}

} // namespace kgrobust
