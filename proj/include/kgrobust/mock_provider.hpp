#pragma once

// Scripted offline provider. A script is JSON:
//
//   {"rules": [{"match": "...", "response": "..."}, ...], "default_response": "..."}
//
// Each rule matches by substring of the user text, or by ECMAScript regex
// search when "regex": true. The first matching rule serves the request.
// Optional per-rule fields script failures and latency:
//   "fail_times": n      first n requests served by the rule fail
//   "fail_always": true  every request served by the rule fails
//   "fail_status": 500   HTTP status of scripted failures (default 500)
//   "fail_kind": "http" | "transport" | "timeout"   (default "http")
//   "delay_ms": n        sleep before answering

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kgrobust/llm_gateway.hpp"

namespace kgrobust {

struct MockRule {
    std::string match;
    bool is_regex = false;
    std::string response;
    int fail_times = 0;
    bool fail_always = false;
    int fail_status = 500;
    ProviderReply::Status fail_kind = ProviderReply::Status::http_error;
    int delay_ms = 0;
};

struct MockScript {
    std::vector<MockRule> rules;
    std::string default_response;

    static MockScript from_json(const nlohmann::json& j);
    static MockScript load(const std::filesystem::path& path);
};

class MockProvider : public ChatProvider {
public:
    explicit MockProvider(MockScript script);

    ProviderReply send(const ChatRequest& request) override;
    std::string name() const override { return "mock"; }

    // Requests served by rule i; default_calls() counts unmatched requests.
    std::uint64_t rule_calls(std::size_t i) const;
    std::uint64_t default_calls() const;
    std::uint64_t total_calls() const;
    std::vector<std::uint64_t> counters() const; // rules..., then default

    // Highest number of concurrent send() calls observed.
    int max_in_flight() const { return max_in_flight_.load(); }

    const MockScript& script() const { return script_; }

private:
    std::optional<std::size_t> find_rule(const std::string& text) const;

    MockScript script_;
    std::vector<std::regex> compiled_; // one per rule; unused for substring rules
    mutable std::mutex mutex_;
    std::vector<std::uint64_t> counts_; // rules..., then default
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
};

} // namespace kgrobust
