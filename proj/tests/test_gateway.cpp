#include <gtest/gtest.h>

#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "kgrobust/http_provider.hpp"
#include "kgrobust/mock_provider.hpp"
#include "kgrobust/parallel.hpp"
#include "kgrobust/run_log.hpp"
#include "test_util.hpp"

using namespace kgrobust;
using nlohmann::json;

namespace {

std::shared_ptr<MockProvider> mock(const std::string& script) {
    return std::make_shared<MockProvider>(MockScript::from_json(json::parse(script)));
}

ChatRequest req(std::string text, double temperature = 0.0) {
    ChatRequest r;
    r.model_id = "m";
    r.user_text = std::move(text);
    r.temperature = temperature;
    return r;
}

// Gateway whose backoff sleeps are recorded instead of performed.
struct Harness {
    std::shared_ptr<MockProvider> provider;
    std::vector<double> sleeps;
    std::unique_ptr<Gateway> gateway;

    explicit Harness(const std::string& script, ProviderConfig cfg = {},
                     std::optional<std::filesystem::path> cache = std::nullopt, RunLog* log = nullptr)
        : provider(mock(script)) {
        gateway = std::make_unique<Gateway>(provider, cfg, cache, log);
        gateway->set_sleeper([this](std::chrono::duration<double> d) { sleeps.push_back(d.count()); });
    }
};

} // namespace

TEST(MockProvider, FirstMatchingRuleWins) {
    auto p = mock(R"({"rules":[{"match":"ab","response":"one"},{"match":"a","response":"two"},
                               {"match":"^x\\d+$","regex":true,"response":"three"}],
                      "default_response":"dflt"})");
    EXPECT_EQ(p->send(req("xaby")).text, "one");
    EXPECT_EQ(p->send(req("xay")).text, "two");
    EXPECT_EQ(p->send(req("x42")).text, "three");
    EXPECT_EQ(p->send(req("x42b")).text, "dflt");
    EXPECT_EQ(p->counters(), (std::vector<std::uint64_t>{1, 1, 1, 1}));
    EXPECT_EQ(p->total_calls(), 4u);
}

TEST(MockProvider, RejectsBadScripts) {
    EXPECT_THROW(mock(R"({"rules":[{"match":"(","regex":true}]})"), Error);
    EXPECT_THROW(mock(R"({"rules":[{"match":"a","fail_kind":"weird"}]})"), Error);
    EXPECT_THROW(mock("[]"), Error);
}

TEST(Gateway, RetriesTransientFailureThenSucceeds) {
    Harness h(R"({"rules":[{"match":"hi","response":"ok","fail_times":1,"fail_status":503}]})");
    const auto r = h.gateway->complete(req("hi"));
    EXPECT_EQ(r.text, "ok");
    EXPECT_EQ(r.attempts, 2);
    EXPECT_FALSE(r.from_cache);
    EXPECT_EQ(h.provider->rule_calls(0), 2u);
    ASSERT_EQ(h.sleeps.size(), 1u);
    EXPECT_GE(h.sleeps[0], 0.0);
    EXPECT_LE(h.sleeps[0], 1.0);
}

TEST(Gateway, PersistentServerErrorExhaustsRetries) {
    Harness h(R"({"rules":[{"match":"hi","fail_always":true,"fail_status":500}]})");
    try {
        h.gateway->complete(req("hi"));
        FAIL() << "expected GatewayError";
    } catch (const GatewayError& e) {
        EXPECT_EQ(e.kind(), GatewayErrorKind::exhausted_retries);
        EXPECT_EQ(e.attempts(), 3);
        EXPECT_EQ(e.http_status(), 500);
    }
    EXPECT_EQ(h.provider->rule_calls(0), 3u);
    // Full jitter caps: base * factor^(k-1) for k = 1, 2.
    ASSERT_EQ(h.sleeps.size(), 2u);
    EXPECT_LE(h.sleeps[0], 1.0);
    EXPECT_LE(h.sleeps[1], 2.0);
}

TEST(Gateway, ClientErrorIsNotRetried) {
    Harness h(R"({"rules":[{"match":"hi","fail_always":true,"fail_status":400}]})");
    try {
        h.gateway->complete(req("hi"));
        FAIL() << "expected GatewayError";
    } catch (const GatewayError& e) {
        EXPECT_EQ(e.kind(), GatewayErrorKind::http_status);
        EXPECT_EQ(e.http_status(), 400);
        EXPECT_EQ(e.attempts(), 1);
    }
    EXPECT_EQ(h.provider->rule_calls(0), 1u);
    EXPECT_TRUE(h.sleeps.empty());
}

TEST(Gateway, RateLimitIsRetried) {
    Harness h(R"({"rules":[{"match":"hi","response":"ok","fail_times":2,"fail_status":429}]})");
    EXPECT_EQ(h.gateway->complete(req("hi")).attempts, 3);
}

TEST(Gateway, SingleAttemptReportsUnderlyingKind) {
    ProviderConfig cfg;
    cfg.max_attempts = 1;
    Harness timeout(R"({"rules":[{"match":"hi","fail_always":true,"fail_kind":"timeout"}]})", cfg);
    try {
        timeout.gateway->complete(req("hi"));
        FAIL();
    } catch (const GatewayError& e) {
        EXPECT_EQ(e.kind(), GatewayErrorKind::timeout);
    }
    Harness transport(R"({"rules":[{"match":"hi","fail_always":true,"fail_kind":"transport"}]})", cfg);
    try {
        transport.gateway->complete(req("hi"));
        FAIL();
    } catch (const GatewayError& e) {
        EXPECT_EQ(e.kind(), GatewayErrorKind::transport);
    }
}

TEST(Gateway, EmptyUserTextIsAPrecondition) {
    Harness h(R"({"default_response":"x"})");
    EXPECT_THROW(h.gateway->complete(req("")), PreconditionError);
    EXPECT_EQ(h.provider->total_calls(), 0u);
}

TEST(Gateway, InvalidConfigNamesField) {
    ProviderConfig cfg;
    cfg.max_parallel = 0;
    try {
        Gateway g(mock("{}"), cfg);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "max_parallel");
    }
}

TEST(Gateway, ConcurrencyBoundIsRespected) {
    ProviderConfig cfg;
    cfg.max_parallel = 2;
    Harness h(R"({"rules":[{"match":"q","response":"ok","delay_ms":30}]})", cfg);
    parallel_map(8, 8, [&](std::size_t i) { return h.gateway->complete(req("q" + std::to_string(i))).text; });
    EXPECT_EQ(h.provider->rule_calls(0), 8u);
    EXPECT_LE(h.provider->max_in_flight(), 2);
    EXPECT_GE(h.provider->max_in_flight(), 1);
}

TEST(CacheKey, MatchesSha256OfCanonicalJson) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(cache_key(req("hi")),
              sha256_hex(R"({"max_tokens":256,"model_id":"m","temperature":0.0,"user_text":"hi"})"));
    EXPECT_NE(cache_key(req("hi", 0.0)), cache_key(req("hi", 0.7)));
    auto other_model = req("hi");
    other_model.model_id = "n";
    EXPECT_NE(cache_key(req("hi")), cache_key(other_model));
}

TEST(ResponseCacheTest, SecondCallIsServedFromDisk) {
    TempDir dir;
    Harness h(R"({"rules":[{"match":"hi","response":"hello"}]})", {}, dir.path());
    const auto first = h.gateway->chat(req("hi"));
    EXPECT_FALSE(first.from_cache);
    const auto second = h.gateway->chat(req("hi"));
    EXPECT_TRUE(second.from_cache);
    EXPECT_EQ(second.text, "hello");
    EXPECT_EQ(second.attempts, 0);
    EXPECT_EQ(h.provider->rule_calls(0), 1u);
    EXPECT_EQ(h.gateway->cache_hits(), 1u);

    const auto doc = json::parse(read_file(ResponseCache(dir.path()).path_for(req("hi")).string()));
    EXPECT_EQ(doc.at("response_text"), "hello");
    EXPECT_EQ(doc.at("provider"), "mock");
    EXPECT_EQ(doc.at("key_fields"), cache_key_fields(req("hi")));
    EXPECT_TRUE(doc.contains("timestamp"));

    // A fresh gateway over the same directory never reaches its provider.
    Harness again(R"({"rules":[{"match":"hi","response":"different"}]})", {}, dir.path());
    EXPECT_EQ(again.gateway->chat(req("hi")).text, "hello");
    EXPECT_EQ(again.provider->total_calls(), 0u);
}

TEST(ResponseCacheTest, TemperatureIsPartOfTheKey) {
    TempDir dir;
    Harness h(R"({"rules":[{"match":"hi","response":"hello"}]})", {}, dir.path());
    h.gateway->chat(req("hi", 0.0));
    h.gateway->chat(req("hi", 0.7));
    EXPECT_EQ(h.provider->rule_calls(0), 2u);
    h.gateway->chat(req("hi", 0.7));
    EXPECT_EQ(h.provider->rule_calls(0), 2u);
}

TEST(ResponseCacheTest, CorruptEntryFallsBackToNetworkWithWarning) {
    TempDir dir;
    RunLog log;
    Harness h(R"({"rules":[{"match":"hi","response":"hello"}]})", {}, dir.path(), &log);
    write_file(ResponseCache(dir.path()).path_for(req("hi")), "{not json");
    EXPECT_EQ(h.gateway->chat(req("hi")).text, "hello");
    EXPECT_EQ(h.provider->rule_calls(0), 1u);
    EXPECT_EQ(log.size(), 1u);
    // The network answer replaced the corrupt file.
    EXPECT_TRUE(h.gateway->chat(req("hi")).from_cache);
}

TEST(ResponseCacheTest, FailuresAreNotCached) {
    TempDir dir;
    Harness h(R"({"rules":[{"match":"hi","response":"ok","fail_times":3}]})", {}, dir.path());
    EXPECT_THROW(h.gateway->chat(req("hi")), GatewayError);
    EXPECT_EQ(h.gateway->chat(req("hi")).text, "ok");
    EXPECT_EQ(h.provider->rule_calls(0), 4u);
}

TEST(ParallelMap, KeepsIndexOrderAndRethrowsLowestIndex) {
    const auto out = parallel_map(20, 4, [](std::size_t i) { return i * i; });
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], i * i);
    try {
        parallel_map(10, 3, [](std::size_t i) -> int {
            if (i == 3 || i == 7) throw std::runtime_error(std::to_string(i));
            return 0;
        });
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "3");
    }
}

namespace {

// Local OpenAI-compatible endpoint on an ephemeral port.
class FakeServer {
public:
    FakeServer() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& r, httplib::Response& res) {
            {
                std::lock_guard lock(mutex_);
                last_body_ = r.body;
                last_auth_ = r.get_header_value("Authorization");
            }
            const auto body = json::parse(r.body);
            const auto text = body["messages"][0]["content"].get<std::string>();
            if (text == "fail") {
                res.status = 503;
                res.set_content("busy", "text/plain");
                return;
            }
            if (text == "slow") std::this_thread::sleep_for(std::chrono::milliseconds(1500));
            if (text == "garbage") {
                res.set_content("not json", "application/json");
                return;
            }
            const json reply{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", "echo: " + text}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    json last_body() const {
        std::lock_guard lock(mutex_);
        return json::parse(last_body_);
    }
    std::string last_auth() const {
        std::lock_guard lock(mutex_);
        return last_auth_;
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    mutable std::mutex mutex_;
    std::string last_body_;
    std::string last_auth_;
};

} // namespace

TEST(HttpProviderTest, PostsChatCompletionAndParsesReply) {
    FakeServer server;
    HttpProvider provider(server.endpoint(), "sk-test", 5.0);
    const auto reply = provider.send(req("hello"));
    ASSERT_EQ(reply.status, ProviderReply::Status::ok);
    EXPECT_EQ(reply.text, "echo: hello");
    const auto body = server.last_body();
    EXPECT_EQ(body["model"], "m");
    EXPECT_EQ(body["temperature"], 0.0);
    EXPECT_EQ(body["max_tokens"], 256);
    EXPECT_EQ(body["messages"][0]["role"], "user");
    EXPECT_EQ(server.last_auth(), "Bearer sk-test");
}

TEST(HttpProviderTest, MapsFailures) {
    FakeServer server;
    HttpProvider provider(server.endpoint(), "", 0.5);
    const auto busy = provider.send(req("fail"));
    EXPECT_EQ(busy.status, ProviderReply::Status::http_error);
    EXPECT_EQ(busy.http_status, 503);
    EXPECT_EQ(server.last_auth(), "");
    EXPECT_EQ(provider.send(req("slow")).status, ProviderReply::Status::timeout);
    EXPECT_EQ(provider.send(req("garbage")).status, ProviderReply::Status::transport_error);

    HttpProvider nowhere("http://127.0.0.1:1/v1", "", 0.5);
    EXPECT_EQ(nowhere.send(req("x")).status, ProviderReply::Status::transport_error);
    EXPECT_THROW(HttpProvider("ftp://example.com", "", 1.0), ConfigError);
}
