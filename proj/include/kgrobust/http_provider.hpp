#pragma once

#include <string>

#include "kgrobust/llm_gateway.hpp"

namespace kgrobust {

// OpenAI-compatible chat endpoint: POST {endpoint}/chat/completions with a
// single user message; the reply is choices[0].message.content.
class HttpProvider : public ChatProvider {
public:
    // An empty api_key sends no Authorization header (local servers).
    HttpProvider(std::string endpoint, std::string api_key, double timeout_seconds);

    ProviderReply send(const ChatRequest& request) override;
    std::string name() const override { return "http_openai_compatible"; }

    const std::string& scheme_host_port() const { return origin_; }
    const std::string& path() const { return path_; }

private:
    std::string origin_;
    std::string path_;
    std::string api_key_;
    double timeout_seconds_;
};

} // namespace kgrobust
