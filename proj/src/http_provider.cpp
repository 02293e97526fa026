#include "kgrobust/http_provider.hpp"

#include <chrono>
#include <cstdlib>
#include <regex>

#include <fmt/core.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "kgrobust/mock_provider.hpp"
#include "kgrobust/run_log.hpp"

namespace kgrobust {

HttpProvider::HttpProvider(std::string endpoint, std::string api_key, double timeout_seconds)
    : api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint, m, url)) throw ConfigError("endpoint", "not an http(s) URL: " + endpoint);
    origin_ = m[1].str();
    std::string base = m[2].matched ? m[2].str() : std::string{};
    while (!base.empty() && base.back() == '/') base.pop_back();
    path_ = base + "/chat/completions";
}

ProviderReply HttpProvider::send(const ChatRequest& request) {
    httplib::Client client(origin_);
    const auto secs = static_cast<time_t>(timeout_seconds_);
    const auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    const nlohmann::json body{
        {"model", request.model_id},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.user_text}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens}};

    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
        const auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout ||
            (err == httplib::Error::Read && elapsed.count() >= timeout_seconds_ * 0.95)) {
            return ProviderReply::timed_out(httplib::to_string(err));
        }
        return ProviderReply::transport(httplib::to_string(err));
    }
    if (res->status != 200) return ProviderReply::http(res->status, res->body.substr(0, 200));
    try {
        const auto doc = nlohmann::json::parse(res->body);
        const auto& content = doc.at("choices").at(0).at("message").at("content");
        return ProviderReply::success(content.is_null() ? std::string{} : content.get<std::string>());
    } catch (const std::exception& e) {
        return ProviderReply::transport(std::string("malformed completion body: ") + e.what());
    }
}

std::shared_ptr<ChatProvider> make_provider(const ProviderConfig& config,
                                            const std::optional<std::filesystem::path>& mock_script,
                                            RunLog* log) {
    config.validate();
    switch (config.kind) {
        case ProviderKind::mock:
            if (!mock_script || mock_script->empty()) {
                throw ConfigError("mock_script_path", "required for the mock provider");
            }
            return std::make_shared<MockProvider>(MockScript::load(*mock_script));
        case ProviderKind::http_openai_compatible: {
            std::string key;
            if (const char* v = std::getenv(config.api_key_env.c_str())) key = v;
            if (key.empty() && log) {
                log->warn(fmt::format("environment variable {} is unset; sending requests without credentials",
                                      config.api_key_env));
            }
            return std::make_shared<HttpProvider>(config.endpoint, std::move(key), config.timeout_seconds);
        }
    }
    throw ConfigError("provider", "unknown provider kind");
}

} // namespace kgrobust
