#pragma once

// Uniform access to chat-completion providers: retry with backoff, a
// parallelism bound, and an optional on-disk response cache.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "kgrobust/errors.hpp"

namespace kgrobust {

class RunLog;

struct ChatRequest {
    std::string model_id;
    std::string user_text;
    double temperature = 0.0;
    int max_tokens = 256;
};

struct ChatResponse {
    std::string text; // raw assistant message
    bool from_cache = false;
    std::string provider;
    int attempts = 0; // 0 for cache hits
};

enum class ProviderKind { http_openai_compatible, mock };

std::string_view to_string(ProviderKind kind);
std::optional<ProviderKind> parse_provider_kind(std::string_view text);

inline constexpr const char* kDefaultApiKeyEnv = "OPENAI_API_KEY";

struct ProviderConfig {
    ProviderKind kind = ProviderKind::mock;
    std::string endpoint = "https://api.openai.com/v1";
    std::string api_key_env = kDefaultApiKeyEnv; // variable name, never the key
    int max_parallel = 4;
    double timeout_seconds = 60.0;
    int max_attempts = 3;
    double backoff_base_seconds = 1.0;
    double backoff_factor = 2.0;

    // Throws ConfigError naming the first invalid field.
    void validate() const;
};

// Outcome of a single provider attempt, before any retry policy.
struct ProviderReply {
    enum class Status { ok, http_error, transport_error, timeout };

    Status status = Status::ok;
    int http_status = 200;
    std::string text;   // assistant message when ok
    std::string detail; // diagnostic otherwise

    static ProviderReply success(std::string text) { return {Status::ok, 200, std::move(text), {}}; }
    static ProviderReply http(int code, std::string detail = {}) {
        return {Status::http_error, code, {}, std::move(detail)};
    }
    static ProviderReply transport(std::string detail) { return {Status::transport_error, 0, {}, std::move(detail)}; }
    static ProviderReply timed_out(std::string detail) { return {Status::timeout, 0, {}, std::move(detail)}; }
};

// One attempt against a backend. Implementations must be thread-safe.
class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ProviderReply send(const ChatRequest& request) = 0;
    virtual std::string name() const = 0;
};

enum class GatewayErrorKind { timeout, http_status, transport, exhausted_retries };

std::string_view to_string(GatewayErrorKind kind);

class GatewayError : public Error {
public:
    GatewayError(GatewayErrorKind kind, int attempts, int http_status, const std::string& detail);

    GatewayErrorKind kind() const { return kind_; }
    int attempts() const { return attempts_; }
    int http_status() const { return http_status_; }

private:
    GatewayErrorKind kind_;
    int attempts_;
    int http_status_;
};

// Retries happen on transport errors, timeouts, HTTP 429 and HTTP 5xx.
bool is_retryable(const ProviderReply& reply);

// Cache key: lowercase hex SHA-256 of the canonical JSON of
// {max_tokens, model_id, temperature, user_text} (keys sorted).
nlohmann::json cache_key_fields(const ChatRequest& request);
std::string cache_key(const ChatRequest& request);
std::string sha256_hex(std::string_view bytes);

// One JSON file per key under a directory: {key_fields, response_text,
// provider, timestamp}. Writes go through a temp file and a rename.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path path_for(const ChatRequest& request) const;

    // nullopt on a miss. Unreadable or mismatching entries are reported to
    // `log` and treated as misses.
    std::optional<std::string> load(const ChatRequest& request, RunLog* log) const;
    // I/O failures are reported to `log` and otherwise ignored.
    void store(const ChatRequest& request, const std::string& response_text, const std::string& provider,
               RunLog* log) const;

private:
    std::filesystem::path dir_;
};

class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::duration<double>)>;

    Gateway(std::shared_ptr<ChatProvider> provider, ProviderConfig config,
            std::optional<std::filesystem::path> cache_dir = std::nullopt, RunLog* log = nullptr);

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    // Provider call with the retry policy; no cache involvement.
    ChatResponse complete(const ChatRequest& request);
    // Cache lookup, then complete() on a miss followed by a cache write.
    ChatResponse cached_complete(const ChatRequest& request);
    // cached_complete() when a cache directory is configured, else complete().
    ChatResponse chat(const ChatRequest& request);

    // Replaces the backoff sleep (tests use this to avoid real waiting).
    void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }
    // Seed for backoff jitter.
    void set_jitter_seed(std::uint64_t seed) { jitter_state_ = seed; }

    const ProviderConfig& config() const { return config_; }
    bool caching() const { return cache_.has_value(); }

    std::uint64_t provider_attempts() const { return provider_attempts_.load(); }
    std::uint64_t cache_hits() const { return cache_hits_.load(); }

private:
    std::chrono::duration<double> backoff_delay(int failed_attempts);

    std::shared_ptr<ChatProvider> provider_;
    ProviderConfig config_;
    std::optional<ResponseCache> cache_;
    RunLog* log_;
    std::counting_semaphore<> in_flight_;
    Sleeper sleeper_;
    std::atomic<std::uint64_t> jitter_state_{0x6b67726f62757374ULL};
    std::atomic<std::uint64_t> provider_attempts_{0};
    std::atomic<std::uint64_t> cache_hits_{0};
};

// Builds the provider described by `config`. Mock providers need a script
// path; HTTP providers read the credential from config.api_key_env.
std::shared_ptr<ChatProvider> make_provider(const ProviderConfig& config,
                                            const std::optional<std::filesystem::path>& mock_script,
                                            RunLog* log = nullptr);

} // namespace kgrobust
