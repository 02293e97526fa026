#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <set>

#include <fmt/core.h>

#include <nlohmann/json.hpp>

#include "kgrobust/cli.hpp"
#include "kgrobust/config.hpp"
#include "kgrobust/jsonl.hpp"
#include "kgrobust/mock_provider.hpp"
#include "kgrobust/pipeline.hpp"
#include "test_util.hpp"

using namespace kgrobust;
using nlohmann::json;

namespace {

RunConfig sample_config(const TempDir& dir, const std::string& sub = "run") {
    auto c = load_config(test_data("sample/sample.cfg"));
    c.out_dir = dir.path() / sub;
    return c;
}

std::shared_ptr<MockProvider> sample_mock() {
    return std::make_shared<MockProvider>(MockScript::load(test_data("sample/mock_script.json")));
}

// Counts calls without answering anything useful.
class CountingProvider : public ChatProvider {
public:
    ProviderReply send(const ChatRequest&) override {
        ++calls;
        return ProviderReply::success("0.0");
    }
    std::string name() const override { return "counting"; }
    std::atomic<int> calls{0};
};

std::set<std::size_t> accepted_indices(const std::filesystem::path& pre_log) {
    std::set<std::size_t> out;
    for (const auto& line : read_jsonl<json>(pre_log)) {
        if (line.at("accepted").get<bool>()) out.insert(line.at("index").get<std::size_t>());
    }
    return out;
}

} // namespace

TEST(Config, ParsesKeysAndResolvesRelativePaths) {
    const auto c = parse_config("# comment\nkg_path = kg.tsv\n\ntemplates_path=/abs/t.tsv\ntarget_model = gpt-x\n"
                                "use_fsa = false\ntau_llm = 0.85\nsample_size = 12\nseed = 7\nscorer = wer\n"
                                "t2p_strategy = llm\nprovider = http\nmax_parallel = 2\nretry = 5\n",
                                "/base");
    EXPECT_EQ(c.kg_path, std::filesystem::path("/base/kg.tsv"));
    EXPECT_EQ(c.templates_path, std::filesystem::path("/abs/t.tsv"));
    EXPECT_EQ(c.target_model, "gpt-x");
    EXPECT_FALSE(c.use_fsa);
    EXPECT_DOUBLE_EQ(c.tau_llm, 0.85);
    EXPECT_EQ(c.sample_size, 12u);
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.scorer, ScorerKind::wer);
    EXPECT_EQ(c.t2p_strategy, T2pStrategy::llm);
    EXPECT_EQ(c.provider.kind, ProviderKind::http_openai_compatible);
    EXPECT_EQ(c.provider.max_parallel, 2);
    EXPECT_EQ(c.provider.max_attempts, 5);
    EXPECT_EQ(c.dataset_name(), "kg");
    EXPECT_EQ(c.effective_scoring_model(), "gpt-x");
}

TEST(Config, ErrorsNameTheField) {
    auto field_of = [](const std::string& text) {
        try {
            parse_config(text, {}).validate();
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string("<none>");
    };
    EXPECT_EQ(field_of("colour = blue\n"), "colour");
    EXPECT_EQ(field_of("seed = x\n"), "seed");
    EXPECT_EQ(field_of("use_fsa = maybe\n"), "use_fsa");
    EXPECT_EQ(field_of("scorer = bleu\n"), "scorer");
    EXPECT_EQ(field_of("templates_path = t\ntarget_model = m\nprovider = mock\nmock_script_path = s\n"), "kg_path");
    EXPECT_EQ(field_of("kg_path = k\ntarget_model = m\nprovider = mock\nmock_script_path = s\n"), "templates_path");
    EXPECT_EQ(field_of("kg_path = k\ntemplates_path = t\ntarget_model = m\nmock_script_path = s\ntau_llm = 1.5\n"),
              "tau_llm");
    EXPECT_EQ(field_of("kg_path = k\ntemplates_path = t\ntarget_model = m\nprovider = mock\n"), "mock_script_path");
    EXPECT_EQ(field_of("kg_path = k\ntemplates_path = t\ntarget_model = m\nmock_script_path = s\n"), "<none>");
}

TEST(Pipeline, MiningSplitSize) {
    EXPECT_EQ(mining_split_size(1), 3u);
    EXPECT_EQ(mining_split_size(27), 3u);
    EXPECT_EQ(mining_split_size(31), 4u);
    EXPECT_EQ(mining_split_size(100), 10u);
}

TEST(Pipeline, SampleRunMatchesGoldenAndConservesCounts) {
    TempDir dir;
    const auto report = run_pipeline(sample_config(dir));
    EXPECT_EQ(read_file((dir.path() / "run/metrics.csv").string()), read_file(test_data("sample/golden/metrics.csv")));

    const auto& n = report.counts;
    EXPECT_EQ(n.parsed, 30u);
    EXPECT_EQ(n.sampled, 27u);
    EXPECT_EQ(n.poisoned, n.sampled);
    EXPECT_EQ(n.original_prompts, n.sampled);
    EXPECT_EQ(n.records, n.sampled);
    EXPECT_EQ(n.pre_accepted + n.fallbacks, n.records);
    EXPECT_EQ(n.mining_prompts, 3u);
    EXPECT_EQ(n.examples_mined, 1u);
    for (const auto& [name, path] : report.artifacts) EXPECT_TRUE(std::filesystem::exists(path)) << name;

    const auto adversarial = read_jsonl<AdversarialPrompt>(dir.path() / "run" / checkpoint::adversarial_prompts);
    const auto originals = read_jsonl<OriginalPrompt>(dir.path() / "run" / checkpoint::original_prompts);
    ASSERT_EQ(adversarial.size(), originals.size());
    for (std::size_t i = 0; i < adversarial.size(); ++i) {
        EXPECT_EQ(adversarial[i].label, originals[i].label);
        if (adversarial[i].origin == AdversarialOrigin::generated) {
            EXPECT_TRUE(adversarial[i].pre_decision.accepted);
            EXPECT_GE(*adversarial[i].pre_decision.score, 0.92);
        } else {
            EXPECT_EQ(adversarial[i].text, originals[i].text);
        }
    }
}

TEST(Pipeline, RepeatedRunsAreIdentical) {
    TempDir dir;
    const auto a = run_pipeline(sample_config(dir, "a"));
    const auto b = run_pipeline(sample_config(dir, "b"));
    auto strip_paths = [](json j) {
        j.erase("artifacts");
        j["config"].erase("out_dir");
        return j;
    };
    EXPECT_EQ(strip_paths(stable_report_json(a)), strip_paths(stable_report_json(b)));
    for (const char* name : {checkpoint::poisoned, checkpoint::original_prompts, checkpoint::adversarial_prompts,
                             checkpoint::pre_decisions, checkpoint::evaluation_records, checkpoint::metrics_csv}) {
        EXPECT_EQ(read_file((dir.path() / "a" / name).string()), read_file((dir.path() / "b" / name).string()))
            << name;
    }
}

TEST(Pipeline, EmptySampleFailsBeforeAnyProviderCall) {
    TempDir dir;
    auto c = sample_config(dir);
    c.sample_size = 0;
    auto provider = std::make_shared<CountingProvider>();
    EXPECT_THROW(run_pipeline(c, provider), EmptyEvaluation);
    EXPECT_EQ(provider->calls.load(), 0);
}

TEST(Pipeline, EmptyExamplePoolDegradesGracefully) {
    TempDir dir;
    auto c = sample_config(dir);
    // Every score is 0.0, so mining records nothing.
    auto provider = std::make_shared<CountingProvider>();
    const auto report = run_pipeline(c, provider);
    EXPECT_EQ(report.counts.examples_available, 0u);
    EXPECT_EQ(report.counts.examples_used, 0u);
    EXPECT_EQ(report.counts.pre_accepted, 0u);
    EXPECT_EQ(report.counts.fallbacks, 27u);
    EXPECT_TRUE(std::any_of(report.warnings.begin(), report.warnings.end(),
                            [](const std::string& w) { return w.find("few-shot pool is empty") != std::string::npos; }));
}

TEST(Pipeline, CachedRerunIssuesNoProviderCalls) {
    TempDir dir;
    auto c = sample_config(dir);
    c.cache_dir = dir.path() / "cache";
    // The sample script has a scripted generation failure; failures are not
    // cached, so drop that rule to get a run whose cache warms completely.
    auto script = json::parse(read_file(test_data("sample/mock_script.json")));
    auto& rules = script["rules"];
    rules.erase(std::remove_if(rules.begin(), rules.end(),
                               [](const json& r) { return r.value("fail_always", false); }),
                rules.end());
    auto provider = std::make_shared<MockProvider>(MockScript::from_json(script));
    const auto first = run_pipeline(c, provider);
    const auto counters = provider->counters();
    EXPECT_GT(provider->total_calls(), 0u);
    const auto second = run_pipeline(c, provider);
    EXPECT_EQ(provider->counters(), counters);
    EXPECT_EQ(second.provider_attempts, 0u);
    EXPECT_GT(second.cache_hits, 0u);
    EXPECT_EQ(first.metrics, second.metrics);
}

TEST(Pipeline, FailedRequestsAreRetriedOnCachedRerun) {
    TempDir dir;
    auto c = sample_config(dir);
    c.cache_dir = dir.path() / "cache";
    auto provider = sample_mock();
    const auto first = run_pipeline(c, provider);
    const auto before = provider->counters();
    const auto second = run_pipeline(c, provider);
    const auto after = provider->counters();
    const auto& rules = provider->script().rules;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        if (rules[i].fail_always) EXPECT_GT(after[i], before[i]) << rules[i].match;
        else EXPECT_EQ(after[i], before[i]) << rules[i].match;
    }
    EXPECT_EQ(after.back(), before.back());
    EXPECT_EQ(first.metrics, second.metrics);
}

TEST(Pipeline, FewShotBankIsWrittenThenReused) {
    TempDir dir;
    auto c = sample_config(dir);
    c.fsa_bank_path = dir.path() / "bank/examples.jsonl";
    const auto first = run_pipeline(c);
    EXPECT_EQ(first.counts.mining_prompts, 3u);
    ASSERT_TRUE(std::filesystem::exists(c.fsa_bank_path));
    EXPECT_EQ(read_jsonl<FewShotExample>(c.fsa_bank_path).size(), 1u);

    auto provider = sample_mock();
    const auto second = run_pipeline(c, provider);
    EXPECT_EQ(second.counts.mining_prompts, 0u);
    EXPECT_EQ(second.counts.examples_available, 1u);
    EXPECT_EQ(first.metrics, second.metrics);
}

TEST(Pipeline, LlmStrategyFallsBackToTemplatesPerItem) {
    TempDir dir;
    auto c = sample_config(dir);
    c.t2p_strategy = T2pStrategy::llm;
    c.use_fsa = false;
    // Only the first evaluation triple gets a rewrite; every other T2P request
    // is answered with an empty string and falls back to its template.
    const auto first = run_poison_stage(c).evaluation.at(0).current;
    const auto match = fmt::format("The subject: {}; The predicate: {}; The object: {};", first.subject,
                                   first.predicate, first.object);
    write_file(dir.path() / "script.json",
               json{{"rules", json::array({{{"match", match}, {"response", "\"A rewritten statement.\""}},
                                           {{"match", "Statement:"}, {"response", ""}}})},
                    {"default_response", "true"}}
                   .dump());
    c.mock_script_path = dir.path() / "script.json";
    const auto report = run_pipeline(c);
    const auto prompts = read_jsonl<OriginalPrompt>(dir.path() / "run" / checkpoint::original_prompts);
    ASSERT_EQ(prompts.size(), 27u);
    EXPECT_EQ(prompts[0].strategy, T2pStrategy::llm);
    EXPECT_EQ(prompts[0].text, "A rewritten statement.");
    EXPECT_FALSE(prompts[0].fallback);
    for (std::size_t i = 1; i < prompts.size(); ++i) EXPECT_TRUE(prompts[i].fallback) << i;
    EXPECT_EQ(report.counts.t2p_fallbacks, 26u);
    EXPECT_EQ(report.warnings.size(), 26u);
}

TEST(Report, JsonRoundTripAndCsvNullAsr) {
    TempDir dir;
    auto report = run_pipeline(sample_config(dir));
    EXPECT_EQ(load_report(dir.path() / "run/report.json"), report);

    report.metrics.asr.reset();
    emit_report(report, dir.path() / "null");
    const auto csv = read_file((dir.path() / "null/metrics.csv").string());
    EXPECT_EQ(csv, std::string(kMetricsCsvHeader) + "\nmock-model,sample,template,true,0.92,0.888889,0.777778,\n");
    EXPECT_TRUE(json::parse(read_file((dir.path() / "null/report.json").string()))["metrics"]["asr"].is_null());
}

TEST(Sweep, AcceptanceShrinksAsTauRises) {
    TempDir dir;
    auto c = sample_config(dir);
    c.out_dir = dir.path() / "sweep";
    auto provider = sample_mock();
    const std::vector<double> taus{0.80, 0.85, 0.90, 0.92, 0.95};
    const auto reports = run_tau_sweep(c, taus, provider);
    ASSERT_EQ(reports.size(), taus.size());
    EXPECT_EQ(read_file((dir.path() / "sweep/metrics.csv").string()),
              read_file(test_data("sample/golden/sweep_metrics.csv")));
    std::set<std::size_t> previous;
    for (std::size_t k = 0; k < taus.size(); ++k) {
        const auto accepted =
            accepted_indices(dir.path() / "sweep" / fmt::format("tau_{}", taus[k]) / checkpoint::pre_decisions);
        EXPECT_EQ(accepted.size(), reports[k].counts.pre_accepted);
        if (k > 0) {
            EXPECT_TRUE(std::includes(previous.begin(), previous.end(), accepted.begin(), accepted.end()));
            EXPECT_LE(reports[k].counts.pre_accepted, reports[k - 1].counts.pre_accepted);
        }
        previous = accepted;
    }
}

TEST(Cli, RunPoisonMetricsAndErrors) {
    TempDir dir;
    const auto cfg = test_data("sample/sample.cfg");
    const auto mock = test_data("sample/mock_script.json");
    EXPECT_EQ(cli_main({"kgrobust", "run", "--config", cfg, "--mock-script", mock, "--out", dir.str("run")}), 0);
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "run/report.json"));
    EXPECT_EQ(read_file(dir.str("run/metrics.csv")), read_file(test_data("sample/golden/metrics.csv")));

    EXPECT_EQ(cli_main({"kgrobust", "metrics", "--records", dir.str("run/evaluation_records.jsonl"), "--out",
                        dir.str("m.json")}),
              0);
    const auto recomputed = json::parse(read_file(dir.str("m.json"))).get<MetricsReport>();
    EXPECT_EQ(recomputed, load_report(dir.path() / "run/report.json").metrics);

    EXPECT_EQ(cli_main({"kgrobust", "poison", "--config", cfg, "--out", dir.str("p")}), 0);
    EXPECT_EQ(read_jsonl<PoisonedTriplet>(dir.path() / "p/poisoned.jsonl").size(), 27u);
    EXPECT_FALSE(std::filesystem::exists(dir.path() / "p/original_prompts.jsonl"));

    // Flags override the file.
    EXPECT_EQ(cli_main({"kgrobust", "run", "--config", cfg, "--no-fsa", "--sample-size", "6", "--out", dir.str("o")}), 0);
    const auto o = load_report(dir.path() / "o/report.json");
    EXPECT_EQ(o.counts.sampled, 6u);
    EXPECT_FALSE(o.config.at("use_fsa").get<bool>());

    EXPECT_EQ(cli_main({"kgrobust", "run", "--config", cfg, "--tau-llm", "1.5", "--out", dir.str("bad")}), 2);
    EXPECT_EQ(cli_main({"kgrobust", "run", "--config", cfg, "--scorer", "bleu"}), 2);
    EXPECT_EQ(cli_main({"kgrobust"}), 2);
    EXPECT_EQ(cli_main({"kgrobust", "run", "--bogus"}), 2);
    EXPECT_EQ(cli_main({"kgrobust", "metrics", "--records", dir.str("missing.jsonl")}), 1);
    EXPECT_EQ(cli_main({"kgrobust", "--help"}), 0);
}
