#include "kgrobust/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>

#include <fmt/chrono.h>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "kgrobust/attack.hpp"
#include "kgrobust/eval_metrics.hpp"
#include "kgrobust/jsonl.hpp"
#include "kgrobust/kg_ingest.hpp"
#include "kgrobust/parallel.hpp"
#include "kgrobust/random.hpp"
#include "kgrobust/run_log.hpp"
#include "kgrobust/t2p.hpp"

namespace kgrobust {

std::size_t mining_split_size(std::size_t sample_size) {
    return std::max<std::size_t>(3, (sample_size + 9) / 10);
}

namespace {

std::string utc_now() { return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr))); }

class StageTimer {
public:
    explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink) {}

    void lap(const std::string& stage) {
        const auto now = std::chrono::steady_clock::now();
        sink_[stage] = std::chrono::duration<double>(now - last_).count();
        last_ = now;
    }

private:
    std::map<std::string, double>& sink_;
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string file_fingerprint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return sha256_hex(bytes);
}

bool mining_needed(const RunConfig& c) {
    if (!c.use_fsa) return false;
    std::error_code ec;
    return c.fsa_bank_path.empty() || !std::filesystem::exists(c.fsa_bank_path, ec);
}

// Per-item output of a parallel stage: the value and its warnings, merged
// into the run log afterwards in item order.
template <typename T>
struct Logged {
    T value{};
    std::vector<std::string> warnings;
};

template <typename T>
std::vector<T> merge_logged(std::vector<Logged<T>>&& items, RunLog& log) {
    std::vector<T> out;
    out.reserve(items.size());
    for (auto& item : items) {
        for (auto& w : item.warnings) log.warn(std::move(w));
        out.push_back(std::move(item.value));
    }
    return out;
}

struct PoisonStage {
    PoisonStageResult result;
    KnowledgeGraphStore store;
};

PoisonStage poison_stage(const RunConfig& config) {
    const auto triples = load_triples(config.kg_path.string());
    PoisonStage stage{{}, build_store(triples)};
    auto& r = stage.result;
    r.parsed = triples.size();

    const std::size_t mining = mining_needed(config) ? mining_split_size(config.sample_size) : 0;
    auto sample = sample_triples(stage.store, config.sample_size + mining, derive_seed(config.seed, SeedStream::sample));
    std::vector<Triplet> mining_triples(sample.begin() + static_cast<std::ptrdiff_t>(config.sample_size), sample.end());
    sample.resize(config.sample_size);

    r.evaluation = poison_batch(sample, stage.store, config.seed);
    r.mining = poison_batch(mining_triples, stage.store, derive_seed(config.seed, SeedStream::mining_poison));

    std::filesystem::create_directories(config.out_dir);
    const auto poisoned_path = config.out_dir / checkpoint::poisoned;
    write_jsonl(poisoned_path, r.evaluation);
    r.artifacts["poisoned"] = poisoned_path.string();
    if (mining > 0) {
        const auto path = config.out_dir / checkpoint::mining_poisoned;
        write_jsonl(path, r.mining);
        r.artifacts["mining_poisoned"] = path.string();
    }
    return stage;
}

std::vector<OriginalPrompt> to_prompts(const std::vector<PoisonedTriplet>& batch, const RunConfig& config,
                                       const TemplateMap& templates, Gateway& gateway, RunLog& log) {
    if (config.t2p_strategy == T2pStrategy::template_based) {
        std::vector<OriginalPrompt> out;
        out.reserve(batch.size());
        for (const auto& pt : batch) out.push_back(render_template(pt, templates));
        return out;
    }
    const auto model = config.effective_generator_model();
    auto items = parallel_map(batch.size(), config.provider.max_parallel, [&](std::size_t i) {
        Logged<OriginalPrompt> item;
        try {
            item.value = llm_transform(batch[i], gateway, model);
        } catch (const Error& e) {
            if (!templates.contains(batch[i].current.predicate)) throw;
            item.value = render_template(batch[i], templates);
            item.value.fallback = true;
            item.warnings.push_back(fmt::format("T2P rewrite of item {} failed ({}); used the template", i, e.what()));
        }
        return item;
    });
    return merge_logged(std::move(items), log);
}

nlohmann::json pre_log_line(std::size_t index, const AdversarialPrompt& a) {
    const auto& d = a.pre_decision;
    return nlohmann::json{{"index", index},
                          {"original", a.source.text},
                          {"candidate", a.candidate},
                          {"scorer", d.scorer},
                          {"score", d.score ? nlohmann::json(*d.score) : nlohmann::json(nullptr)},
                          {"accepted", d.accepted},
                          {"reason", d.reason},
                          {"raw_response", d.raw_response}};
}

} // namespace

PoisonStageResult run_poison_stage(const RunConfig& config) {
    config.validate();
    if (config.sample_size == 0) throw EmptyEvaluation();
    return poison_stage(config).result;
}

RunReport run_pipeline(const RunConfig& config, std::shared_ptr<ChatProvider> provider) {
    config.validate();
    if (config.sample_size == 0) throw EmptyEvaluation();

    RunReport report;
    report.started_at = utc_now();
    report.config = config;
    report.dataset = config.dataset_name();
    StageTimer timer(report.stage_seconds);
    RunLog log;
    auto& counts = report.counts;

    // Ingest, sample, poison.
    report.dataset_fingerprint = file_fingerprint(config.kg_path);
    TemplateMap templates;
    if (!config.templates_path.empty()) templates = load_templates(config.templates_path.string(), &log);
    auto stage = poison_stage(config);
    auto& poisoned = stage.result;
    report.artifacts = poisoned.artifacts;
    counts.parsed = poisoned.parsed;
    counts.sampled = poisoned.evaluation.size();
    counts.poisoned = poisoned.evaluation.size();
    timer.lap("ingest_sample_poison");

    if (!provider) provider = make_provider(config.provider, config.mock_script_path, &log);
    std::optional<std::filesystem::path> cache;
    if (!config.cache_dir.empty()) cache = config.cache_dir;
    Gateway gateway(provider, config.provider, cache, &log);
    gateway.set_jitter_seed(config.seed);

    // Original prompts.
    const auto prompts = to_prompts(poisoned.evaluation, config, templates, gateway, log);
    const auto mining_prompts = to_prompts(poisoned.mining, config, templates, gateway, log);
    counts.original_prompts = prompts.size();
    counts.mining_prompts = mining_prompts.size();
    for (const auto* batch : {&prompts, &mining_prompts}) {
        for (const auto& p : *batch) counts.t2p_fallbacks += p.fallback;
    }
    const auto prompts_path = config.out_dir / checkpoint::original_prompts;
    write_jsonl(prompts_path, prompts);
    report.artifacts["original_prompts"] = prompts_path.string();
    if (!mining_prompts.empty()) {
        const auto path = config.out_dir / checkpoint::mining_prompts;
        write_jsonl(path, mining_prompts);
        report.artifacts["mining_prompts"] = path.string();
    }
    timer.lap("t2p");

    PreGateConfig gate_config;
    gate_config.scorer = config.scorer;
    gate_config.tau_llm = config.tau_llm;
    gate_config.tau_wer = config.tau_wer;
    gate_config.scoring_model = config.effective_scoring_model();

    // Few-shot examples.
    std::vector<FewShotExample> examples;
    if (config.use_fsa) {
        if (!mining_needed(config)) {
            examples = read_jsonl<FewShotExample>(config.fsa_bank_path);
        } else {
            MiningOptions options;
            options.generator_model = config.effective_generator_model();
            options.classifier_model = config.target_model;
            options.gate = gate_config;
            options.max_examples = config.fsa_max_examples;
            options.parallelism = config.provider.max_parallel;
            auto mined = mine_examples(mining_prompts, gateway, options, &log);
            examples = std::move(mined.examples);
            counts.examples_mined = examples.size();
            const auto trace_path = config.out_dir / checkpoint::mining_trace;
            write_jsonl(trace_path, mined.traces);
            report.artifacts["mining_trace"] = trace_path.string();
            if (!config.fsa_bank_path.empty()) {
                if (config.fsa_bank_path.has_parent_path()) {
                    std::filesystem::create_directories(config.fsa_bank_path.parent_path());
                }
                write_jsonl(config.fsa_bank_path, examples);
            }
        }
        counts.examples_available = examples.size();
        const auto path = config.out_dir / checkpoint::fewshot_examples;
        write_jsonl(path, examples);
        report.artifacts["fewshot_examples"] = path.string();
        if (examples.empty()) log.warn("few-shot pool is empty; adversarial prompts are generated without examples");
    }
    timer.lap("fsa_mining");

    // Adversarial prompts.
    ApgpOptions apgp;
    apgp.generator_model = config.effective_generator_model();
    apgp.gate = gate_config;
    apgp.use_fsa = config.use_fsa;
    apgp.examples_per_prompt = config.fsa_examples_per_prompt;
    const auto select_seed = derive_seed(config.seed, SeedStream::example_select);
    auto adv_items = parallel_map(prompts.size(), config.provider.max_parallel, [&](std::size_t i) {
        RunLog local;
        Logged<AdversarialPrompt> item;
        item.value = generate_adversarial(prompts[i], examples, gateway, apgp, derive_seed(select_seed, i), &local);
        item.warnings = local.warnings();
        return item;
    });
    const auto adversarial = merge_logged(std::move(adv_items), log);
    std::vector<nlohmann::json> pre_lines;
    for (std::size_t i = 0; i < adversarial.size(); ++i) {
        const auto& a = adversarial[i];
        counts.examples_used += a.examples_used > 0;
        counts.pre_accepted += a.pre_decision.accepted;
        counts.fallbacks += a.origin == AdversarialOrigin::fallback_original;
        if (!a.candidate.empty()) {
            ++counts.pre_evaluated;
            pre_lines.push_back(pre_log_line(i, a));
        }
    }
    const auto adv_path = config.out_dir / checkpoint::adversarial_prompts;
    write_jsonl(adv_path, adversarial);
    report.artifacts["adversarial_prompts"] = adv_path.string();
    const auto pre_path = config.out_dir / checkpoint::pre_decisions;
    write_jsonl(pre_path, pre_lines);
    report.artifacts["pre_decisions"] = pre_path.string();
    timer.lap("apgp");

    // Classification of both sets.
    auto record_items = parallel_map(prompts.size(), config.provider.max_parallel, [&](std::size_t i) {
        RunLog local;
        Logged<EvaluationRecord> item;
        auto original = classify(prompts[i].text, gateway, config.target_model, &local);
        auto adv = classify(adversarial[i].text, gateway, config.target_model, &local);
        item.value = make_record(prompts[i], adversarial[i], std::move(original), std::move(adv));
        item.warnings = local.warnings();
        return item;
    });
    const auto records = merge_logged(std::move(record_items), log);
    counts.records = records.size();
    for (const auto& r : records) {
        counts.invalid_verdicts += (r.verdict_original == Verdict::invalid) + (r.verdict_adversarial == Verdict::invalid);
    }
    const auto records_path = config.out_dir / checkpoint::evaluation_records;
    write_jsonl(records_path, records);
    report.artifacts["evaluation_records"] = records_path.string();
    timer.lap("classify");

    report.metrics = compute_metrics(records);
    report.artifacts["report"] = (config.out_dir / checkpoint::report).string();
    report.artifacts["metrics_csv"] = (config.out_dir / checkpoint::metrics_csv).string();
    report.warnings = log.warnings();
    report.provider_attempts = gateway.provider_attempts();
    report.cache_hits = gateway.cache_hits();
    timer.lap("metrics");
    report.finished_at = utc_now();
    emit_report(report, config.out_dir);
    return report;
}

std::vector<RunReport> run_tau_sweep(const RunConfig& config, const std::vector<double>& taus,
                                     std::shared_ptr<ChatProvider> provider) {
    if (taus.empty()) throw ConfigError("taus", "at least one threshold is required");
    RunConfig base = config;
    if (base.cache_dir.empty()) base.cache_dir = base.out_dir / "cache";
    base.validate();
    if (!provider) provider = make_provider(base.provider, base.mock_script_path);

    std::vector<RunReport> reports;
    for (const double tau : taus) {
        RunConfig c = base;
        c.tau_llm = tau;
        c.out_dir = base.out_dir / fmt::format("tau_{}", tau);
        reports.push_back(run_pipeline(c, provider));
    }
    write_metrics_csv(base.out_dir / checkpoint::metrics_csv, reports);
    std::ofstream out(base.out_dir / "sweep.csv", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (base.out_dir / "sweep.csv").string());
    out << "tau_llm,pre_evaluated,pre_accepted,fallbacks\n";
    for (const auto& r : reports) {
        out << fmt::format("{},{},{},{}\n", r.config.at("tau_llm").get<double>(), r.counts.pre_evaluated,
                           r.counts.pre_accepted, r.counts.fallbacks);
    }
    return reports;
}

MetricsReport recompute_metrics(const std::filesystem::path& records_path) {
    return compute_metrics(read_jsonl<EvaluationRecord>(records_path));
}

} // namespace kgrobust
