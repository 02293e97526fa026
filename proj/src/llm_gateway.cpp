#include "kgrobust/llm_gateway.hpp"

#include <cmath>
#include <thread>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "kgrobust/random.hpp"
#include "kgrobust/run_log.hpp"

namespace kgrobust {

std::string_view to_string(ProviderKind kind) {
    switch (kind) {
        case ProviderKind::http_openai_compatible: return "http_openai_compatible";
        case ProviderKind::mock: return "mock";
    }
    return "?";
}

std::optional<ProviderKind> parse_provider_kind(std::string_view text) {
    if (text == "http_openai_compatible" || text == "http" || text == "openai") {
        return ProviderKind::http_openai_compatible;
    }
    if (text == "mock") return ProviderKind::mock;
    return std::nullopt;
}

void ProviderConfig::validate() const {
    if (max_parallel < 1) throw ConfigError("max_parallel", "must be >= 1");
    if (max_attempts < 1) throw ConfigError("retry", "must be >= 1");
    if (!(timeout_seconds > 0)) throw ConfigError("timeout", "must be > 0");
    if (backoff_base_seconds < 0) throw ConfigError("backoff_base", "must be >= 0");
    if (backoff_factor < 1) throw ConfigError("backoff_factor", "must be >= 1");
    if (kind == ProviderKind::http_openai_compatible && endpoint.empty()) {
        throw ConfigError("endpoint", "required for the http provider");
    }
}

std::string_view to_string(GatewayErrorKind kind) {
    switch (kind) {
        case GatewayErrorKind::timeout: return "timeout";
        case GatewayErrorKind::http_status: return "http_status";
        case GatewayErrorKind::transport: return "transport";
        case GatewayErrorKind::exhausted_retries: return "exhausted_retries";
    }
    return "?";
}

GatewayError::GatewayError(GatewayErrorKind kind, int attempts, int http_status, const std::string& detail)
    : Error(fmt::format("gateway {} after {} attempt(s){}{}", to_string(kind), attempts,
                        http_status > 0 ? fmt::format(" (HTTP {})", http_status) : std::string{},
                        detail.empty() ? std::string{} : ": " + detail)),
      kind_(kind),
      attempts_(attempts),
      http_status_(http_status) {}

bool is_retryable(const ProviderReply& reply) {
    switch (reply.status) {
        case ProviderReply::Status::ok: return false;
        case ProviderReply::Status::transport_error:
        case ProviderReply::Status::timeout: return true;
        case ProviderReply::Status::http_error: return reply.http_status == 429 || reply.http_status >= 500;
    }
    return false;
}

namespace {

GatewayErrorKind kind_of(const ProviderReply& reply) {
    switch (reply.status) {
        case ProviderReply::Status::timeout: return GatewayErrorKind::timeout;
        case ProviderReply::Status::transport_error: return GatewayErrorKind::transport;
        default: return GatewayErrorKind::http_status;
    }
}

// Releases a semaphore slot on scope exit.
struct SlotGuard {
    std::counting_semaphore<>& sem;
    explicit SlotGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
    ~SlotGuard() { sem.release(); }
};

} // namespace

Gateway::Gateway(std::shared_ptr<ChatProvider> provider, ProviderConfig config,
                 std::optional<std::filesystem::path> cache_dir, RunLog* log)
    : provider_(std::move(provider)),
      config_(std::move(config)),
      log_(log),
      in_flight_(std::max(config_.max_parallel, 1)),
      sleeper_([](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); }) {
    if (!provider_) throw PreconditionError("Gateway needs a provider");
    config_.validate();
    if (cache_dir && !cache_dir->empty()) cache_.emplace(*cache_dir);
}

std::chrono::duration<double> Gateway::backoff_delay(int failed_attempts) {
    // Full jitter: uniform in [0, base * factor^(failed_attempts - 1)].
    const double cap = config_.backoff_base_seconds * std::pow(config_.backoff_factor, failed_attempts - 1);
    const auto bits = splitmix64(jitter_state_.fetch_add(0x9e3779b97f4a7c15ULL));
    const double unit = static_cast<double>(bits >> 11) * 0x1.0p-53;
    return std::chrono::duration<double>(cap * unit);
}

ChatResponse Gateway::complete(const ChatRequest& request) {
    if (request.user_text.empty()) throw PreconditionError("ChatRequest.user_text must be nonempty");
    ProviderReply last;
    int attempt = 1;
    for (;; ++attempt) {
        {
            SlotGuard slot(in_flight_);
            ++provider_attempts_;
            last = provider_->send(request);
        }
        if (last.status == ProviderReply::Status::ok) {
            return ChatResponse{std::move(last.text), false, provider_->name(), attempt};
        }
        if (!is_retryable(last)) {
            throw GatewayError(GatewayErrorKind::http_status, attempt, last.http_status, last.detail);
        }
        if (attempt >= config_.max_attempts) break;
        sleeper_(backoff_delay(attempt));
    }
    const auto kind = attempt > 1 ? GatewayErrorKind::exhausted_retries : kind_of(last);
    throw GatewayError(kind, attempt, last.status == ProviderReply::Status::http_error ? last.http_status : 0,
                       last.detail);
}

ChatResponse Gateway::cached_complete(const ChatRequest& request) {
    if (!cache_) return complete(request);
    if (auto hit = cache_->load(request, log_)) {
        ++cache_hits_;
        return ChatResponse{std::move(*hit), true, provider_->name(), 0};
    }
    auto response = complete(request);
    cache_->store(request, response.text, response.provider, log_);
    return response;
}

ChatResponse Gateway::chat(const ChatRequest& request) {
    return cache_ ? cached_complete(request) : complete(request);
}

} // namespace kgrobust
