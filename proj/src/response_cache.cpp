#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/core.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <unistd.h>

#include "kgrobust/llm_gateway.hpp"
#include "kgrobust/run_log.hpp"

namespace kgrobust {

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

nlohmann::json cache_key_fields(const ChatRequest& request) {
    return nlohmann::json{{"model_id", request.model_id},
                          {"user_text", request.user_text},
                          {"temperature", request.temperature},
                          {"max_tokens", request.max_tokens}};
}

std::string cache_key(const ChatRequest& request) { return sha256_hex(cache_key_fields(request).dump()); }

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ResponseCache::path_for(const ChatRequest& request) const {
    return dir_ / (cache_key(request) + ".json");
}

std::optional<std::string> ResponseCache::load(const ChatRequest& request, RunLog* log) const {
    const auto path = path_for(request);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
        std::ifstream in(path);
        if (!in) throw Error("unreadable");
        const auto doc = nlohmann::json::parse(in);
        if (doc.at("key_fields") != cache_key_fields(request)) throw Error("key fields do not match request");
        return doc.at("response_text").get<std::string>();
    } catch (const std::exception& e) {
        if (log) log->warn(fmt::format("ignoring cache entry {}: {}", path.string(), e.what()));
        return std::nullopt;
    }
}

void ResponseCache::store(const ChatRequest& request, const std::string& response_text,
                          const std::string& provider, RunLog* log) const {
    static std::atomic<std::uint64_t> counter{0};
    const auto path = path_for(request);
    const auto tmp = dir_ / fmt::format(".{}.{}.{}.{}.tmp", path.filename().string(), ::getpid(),
                                        std::hash<std::thread::id>{}(std::this_thread::get_id()), counter++);
    try {
        std::filesystem::create_directories(dir_);
        const nlohmann::json doc{
            {"key_fields", cache_key_fields(request)},
            {"response_text", response_text},
            {"provider", provider},
            {"timestamp", fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)))}};
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot create temp file");
            out << doc.dump(2) << '\n';
            if (!out.flush()) throw Error("write failed");
        }
        std::filesystem::rename(tmp, path);
    } catch (const std::exception& e) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        if (log) log->warn(fmt::format("cache write {} failed: {}", path.string(), e.what()));
    }
}

} // namespace kgrobust
