#pragma once

// Run configuration. The file format is flat "key = value" lines with '#'
// comments; keys are the RunConfig field names. Relative paths in a file
// resolve against the file's directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "kgrobust/llm_gateway.hpp"
#include "kgrobust/pre.hpp"
#include "kgrobust/t2p.hpp"

namespace kgrobust {

struct RunConfig {
    std::filesystem::path kg_path;
    std::filesystem::path templates_path; // required for the template strategy
    std::string dataset;                  // report label; defaults to the KG file stem
    ProviderConfig provider;
    std::string target_model;
    std::string scoring_model;   // defaults to target_model
    std::string generator_model; // defaults to target_model
    T2pStrategy t2p_strategy = T2pStrategy::template_based;
    bool use_fsa = true;
    double tau_llm = kDefaultTauLlm;
    double tau_wer = kDefaultTauWer;
    ScorerKind scorer = ScorerKind::llmscore;
    std::size_t sample_size = 30;
    std::size_t fsa_max_examples = 8;
    std::size_t fsa_examples_per_prompt = 1;
    std::uint64_t seed = 0;
    std::filesystem::path cache_dir; // empty disables caching
    std::filesystem::path out_dir = "out";
    std::filesystem::path mock_script_path;
    std::filesystem::path fsa_bank_path; // reused when present, written after mining otherwise

    std::string dataset_name() const;
    std::string effective_scoring_model() const { return scoring_model.empty() ? target_model : scoring_model; }
    std::string effective_generator_model() const {
        return generator_model.empty() ? target_model : generator_model;
    }

    // Throws ConfigError naming the offending field.
    void validate() const;
};

// Sets one field from its textual form. Throws ConfigError for unknown keys
// or unparseable values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value,
                   const std::filesystem::path& base_dir);

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const RunConfig& c);

} // namespace kgrobust
