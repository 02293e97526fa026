#include "kgrobust/report.hpp"

#include <fstream>

#include <fmt/core.h>

namespace kgrobust {

void to_json(nlohmann::json& j, const RunReport& r) {
    j = nlohmann::json{{"config", r.config},
                       {"dataset", r.dataset},
                       {"dataset_fingerprint", r.dataset_fingerprint},
                       {"metrics", r.metrics},
                       {"counts", r.counts},
                       {"stage_seconds", r.stage_seconds},
                       {"artifacts", r.artifacts},
                       {"warnings", r.warnings},
                       {"provider_attempts", r.provider_attempts},
                       {"cache_hits", r.cache_hits},
                       {"started_at", r.started_at},
                       {"finished_at", r.finished_at}};
}

void from_json(const nlohmann::json& j, RunReport& r) {
    r.config = j.at("config");
    j.at("dataset").get_to(r.dataset);
    j.at("dataset_fingerprint").get_to(r.dataset_fingerprint);
    j.at("metrics").get_to(r.metrics);
    j.at("counts").get_to(r.counts);
    j.at("stage_seconds").get_to(r.stage_seconds);
    j.at("artifacts").get_to(r.artifacts);
    j.at("warnings").get_to(r.warnings);
    j.at("provider_attempts").get_to(r.provider_attempts);
    j.at("cache_hits").get_to(r.cache_hits);
    j.at("started_at").get_to(r.started_at);
    j.at("finished_at").get_to(r.finished_at);
}

nlohmann::json stable_report_json(const RunReport& r) {
    nlohmann::json j = r;
    for (const char* key : {"stage_seconds", "provider_attempts", "cache_hits", "started_at", "finished_at"}) {
        j.erase(key);
    }
    // Cache-file problems are telemetry too.
    auto& warnings = j["warnings"];
    nlohmann::json kept = nlohmann::json::array();
    for (const auto& w : warnings) {
        const auto s = w.get<std::string>();
        if (s.rfind("ignoring cache entry", 0) != 0 && s.rfind("cache write", 0) != 0) kept.push_back(w);
    }
    warnings = kept;
    return j;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string json_string(const nlohmann::json& config, const char* key) {
    const auto it = config.find(key);
    if (it == config.end()) return {};
    return it->is_string() ? it->get<std::string>() : it->dump();
}

} // namespace

std::string metrics_csv_row(const RunReport& r) {
    const auto& c = r.config;
    const double tau = c.contains("tau_llm") ? c.at("tau_llm").get<double>() : 0.0;
    const bool fsa = c.contains("use_fsa") && c.at("use_fsa").get<bool>();
    return fmt::format("{},{},{},{},{},{:.6f},{:.6f},{}", csv_field(json_string(c, "target_model")),
                       csv_field(r.dataset), csv_field(json_string(c, "t2p_strategy")), fsa ? "true" : "false", tau,
                       r.metrics.nra, r.metrics.rra, r.metrics.asr ? fmt::format("{:.6f}", *r.metrics.asr) : "");
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<RunReport>& reports) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << kMetricsCsvHeader << '\n';
    for (const auto& r : reports) out << metrics_csv_row(r) << '\n';
    if (!out.flush()) throw Error("write failed: " + path.string());
}

void emit_report(const RunReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto json_path = out_dir / "report.json";
    {
        std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + json_path.string());
        out << nlohmann::json(report).dump(2) << '\n';
        if (!out.flush()) throw Error("write failed: " + json_path.string());
    }
    write_metrics_csv(out_dir / "metrics.csv", {report});
}

RunReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return nlohmann::json::parse(in).get<RunReport>();
}

} // namespace kgrobust
