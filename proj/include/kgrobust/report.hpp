#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgrobust/eval_metrics.hpp"

namespace kgrobust {

struct StageCounts {
    std::size_t parsed = 0;
    std::size_t sampled = 0;
    std::size_t poisoned = 0;
    std::size_t original_prompts = 0;
    std::size_t t2p_fallbacks = 0;
    std::size_t mining_prompts = 0;
    std::size_t examples_mined = 0;
    std::size_t examples_available = 0;
    std::size_t examples_used = 0; // APGP requests that carried at least one example
    std::size_t pre_evaluated = 0;
    std::size_t pre_accepted = 0;
    std::size_t fallbacks = 0;
    std::size_t invalid_verdicts = 0;
    std::size_t records = 0;

    bool operator==(const StageCounts&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(StageCounts, parsed, sampled, poisoned, original_prompts, t2p_fallbacks,
                                   mining_prompts, examples_mined, examples_available, examples_used, pre_evaluated,
                                   pre_accepted, fallbacks, invalid_verdicts, records)

struct RunReport {
    nlohmann::json config;
    std::string dataset;
    std::string dataset_fingerprint; // SHA-256 of the KG file
    MetricsReport metrics;
    StageCounts counts;
    std::map<std::string, double> stage_seconds;
    std::map<std::string, std::string> artifacts; // checkpoint name -> path
    std::vector<std::string> warnings;
    std::uint64_t provider_attempts = 0;
    std::uint64_t cache_hits = 0;
    std::string started_at;
    std::string finished_at;

    bool operator==(const RunReport&) const = default;
};

void to_json(nlohmann::json& j, const RunReport& r);
void from_json(const nlohmann::json& j, RunReport& r);

// Fields that legitimately differ between otherwise identical runs (wall
// clock, cache and provider telemetry) are removed.
nlohmann::json stable_report_json(const RunReport& r);

inline constexpr const char* kMetricsCsvHeader = "model,dataset,strategy,fsa,tau_llm,nra,rra,asr";

// One CSV data row (no trailing newline); a null ASR is an empty field.
std::string metrics_csv_row(const RunReport& r);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<RunReport>& reports);

// Writes report.json and metrics.csv into out_dir. I/O errors throw.
void emit_report(const RunReport& report, const std::filesystem::path& out_dir);

RunReport load_report(const std::filesystem::path& path);

} // namespace kgrobust
