#pragma once

// End-to-end run: ingest -> sample -> poison -> T2P -> (FSA mining) ->
// APGP -> classify -> metrics -> report.
//
// Seeds: sampling uses derive_seed(seed, sample); the evaluation batch is
// poisoned with `seed`, the mining batch with derive_seed(seed, mining_poison);
// prompt i draws its few-shot example with
// derive_seed(derive_seed(seed, example_select), i).
//
// Sampling draws sample_size + m triples from one permutation. The first
// sample_size are evaluated; the next m (m = max(3, ceil(sample_size / 10))
// when mining is on, else 0) form the disjoint mining split.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "kgrobust/config.hpp"
#include "kgrobust/llm_gateway.hpp"
#include "kgrobust/poisoner.hpp"
#include "kgrobust/report.hpp"

namespace kgrobust {

// Checkpoint file names inside out_dir.
namespace checkpoint {
inline constexpr const char* poisoned = "poisoned.jsonl";
inline constexpr const char* mining_poisoned = "mining_poisoned.jsonl";
inline constexpr const char* original_prompts = "original_prompts.jsonl";
inline constexpr const char* mining_prompts = "mining_prompts.jsonl";
inline constexpr const char* mining_trace = "mining_trace.jsonl";
inline constexpr const char* fewshot_examples = "fewshot_examples.jsonl";
inline constexpr const char* adversarial_prompts = "adversarial_prompts.jsonl";
inline constexpr const char* pre_decisions = "pre_decisions.jsonl";
inline constexpr const char* evaluation_records = "evaluation_records.jsonl";
inline constexpr const char* report = "report.json";
inline constexpr const char* metrics_csv = "metrics.csv";
} // namespace checkpoint

std::size_t mining_split_size(std::size_t sample_size);

struct PoisonStageResult {
    std::size_t parsed = 0;
    std::vector<PoisonedTriplet> evaluation;
    std::vector<PoisonedTriplet> mining;
    std::map<std::string, std::string> artifacts;
};

// Ingest, sample and poison; writes the poisoning checkpoints.
PoisonStageResult run_poison_stage(const RunConfig& config);

// `provider` overrides the one described by config (tests share a mock
// across runs this way).
RunReport run_pipeline(const RunConfig& config, std::shared_ptr<ChatProvider> provider = nullptr);

// One run per tau under out_dir/tau_<tau>; all runs share one cache
// (config.cache_dir, or out_dir/cache when unset). Writes out_dir/metrics.csv
// with one row per tau and out_dir/sweep.csv with PRE acceptance counts.
std::vector<RunReport> run_tau_sweep(const RunConfig& config, const std::vector<double>& taus,
                                     std::shared_ptr<ChatProvider> provider = nullptr);

// Recomputes metrics from an evaluation record log.
MetricsReport recompute_metrics(const std::filesystem::path& records_path);

} // namespace kgrobust
