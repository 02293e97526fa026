#include "kgrobust/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "kgrobust/config.hpp"
#include "kgrobust/pipeline.hpp"

namespace kgrobust {

namespace {

// Flag values that override the config file when given.
struct Overrides {
    std::optional<std::string> config;
    std::vector<std::pair<std::string, std::string*>> fields;
    std::string kg, templates, model, provider, endpoint, t2p, scorer, tau_llm, sample_size, seed, cache_dir, out,
        mock_script, api_key_env, fsa_max_examples, fsa_bank, max_parallel;
    bool fsa = true;
    CLI::Option* fsa_opt = nullptr;
    std::vector<CLI::Option*> opts;

    void add_to(CLI::App& app) {
        app.add_option("--config", config, "Flat key = value run configuration file");
        const std::pair<const char*, std::pair<std::string*, const char*>> table[] = {
            {"--kg", {&kg, "kg_path"}},
            {"--templates", {&templates, "templates_path"}},
            {"--model", {&model, "target_model"}},
            {"--provider", {&provider, "provider"}},
            {"--endpoint", {&endpoint, "endpoint"}},
            {"--t2p", {&t2p, "t2p_strategy"}},
            {"--scorer", {&scorer, "scorer"}},
            {"--tau-llm", {&tau_llm, "tau_llm"}},
            {"--sample-size", {&sample_size, "sample_size"}},
            {"--seed", {&seed, "seed"}},
            {"--cache-dir", {&cache_dir, "cache_dir"}},
            {"--out", {&out, "out_dir"}},
            {"--mock-script", {&mock_script, "mock_script_path"}},
            {"--api-key-env", {&api_key_env, "api_key_env"}},
            {"--fsa-max-examples", {&fsa_max_examples, "fsa_max_examples"}},
            {"--fsa-bank", {&fsa_bank, "fsa_bank_path"}},
            {"--max-parallel", {&max_parallel, "max_parallel"}},
        };
        for (const auto& [flag, target] : table) {
            opts.push_back(app.add_option(flag, *target.first, std::string("Overrides ") + target.second));
            fields.emplace_back(target.second, target.first);
        }
        fsa_opt = app.add_flag("--fsa,!--no-fsa", fsa, "Enable or disable few-shot attack examples");
    }

    RunConfig resolve() const {
        RunConfig c = config ? load_config(*config) : RunConfig{};
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (opts[i]->count() > 0) apply_setting(c, fields[i].first, *fields[i].second, {});
        }
        if (fsa_opt->count() > 0) c.use_fsa = fsa;
        return c;
    }
};

std::vector<double> parse_taus(const std::string& text) {
    std::vector<double> taus;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        RunConfig scratch;
        apply_setting(scratch, "tau_llm", item, {});
        taus.push_back(scratch.tau_llm);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return taus;
}

void print_summary(const RunReport& r) {
    fmt::print("{} on {}: nra={:.3f} rra={:.3f} asr={} (n={}, pre_accepted={}, fallbacks={})\n",
               r.config.value("target_model", std::string{}), r.dataset, r.metrics.nra, r.metrics.rra,
               r.metrics.asr ? fmt::format("{:.3f}", *r.metrics.asr) : "null", r.metrics.n_total,
               r.counts.pre_accepted, r.counts.fallbacks);
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Knowledge-graph driven adversarial robustness evaluation for chat models"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run the full pipeline and write report.json and metrics.csv");
    Overrides run_flags;
    run_flags.add_to(*run);

    auto* poison = app.add_subcommand("poison", "Stop after writing the poisoned-triplet checkpoint");
    Overrides poison_flags;
    poison_flags.add_to(*poison);

    auto* metrics = app.add_subcommand("metrics", "Recompute metrics from an evaluation record log");
    std::string records_path;
    std::string metrics_out;
    metrics->add_option("--records", records_path, "evaluation_records.jsonl")->required();
    metrics->add_option("--out", metrics_out, "Also write the metrics JSON to this file");

    auto* sweep = app.add_subcommand("sweep-tau", "Repeat run across PRE thresholds with a shared cache");
    Overrides sweep_flags;
    sweep_flags.add_to(*sweep);
    std::string taus_text = "0.80,0.85,0.90,0.92,0.95";
    sweep->add_option("--taus", taus_text, "Comma-separated tau_llm values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        fmt::print(stderr, "error: {}\n", e.what());
        const CLI::App* scope = &app;
        for (const auto* sub : app.get_subcommands()) scope = sub;
        std::cerr << scope->help();
        return 2;
    }

    try {
        if (run->parsed()) {
            print_summary(run_pipeline(run_flags.resolve()));
        } else if (poison->parsed()) {
            const auto result = run_poison_stage(poison_flags.resolve());
            fmt::print("poisoned {} evaluation and {} mining triples -> {}\n", result.evaluation.size(),
                       result.mining.size(), result.artifacts.at("poisoned"));
        } else if (metrics->parsed()) {
            const auto m = recompute_metrics(records_path);
            const auto text = nlohmann::json(m).dump(2);
            if (!metrics_out.empty()) {
                std::ofstream out(metrics_out);
                if (!out) throw Error("cannot write " + metrics_out);
                out << text << '\n';
            }
            fmt::print("{}\n", text);
        } else if (sweep->parsed()) {
            const auto taus = parse_taus(taus_text);
            for (const auto& r : run_tau_sweep(sweep_flags.resolve(), taus)) {
                fmt::print("tau_llm={} ", r.config.at("tau_llm").get<double>());
                print_summary(r);
            }
        }
    } catch (const ConfigError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}

int cli_main(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

} // namespace kgrobust
