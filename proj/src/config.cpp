#include "kgrobust/config.hpp"

#include <charconv>
#include <fstream>
#include <iterator>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

namespace kgrobust {

std::string RunConfig::dataset_name() const {
    return dataset.empty() ? kg_path.stem().string() : dataset;
}

void RunConfig::validate() const {
    if (kg_path.empty()) throw ConfigError("kg_path", "required");
    if (t2p_strategy == T2pStrategy::template_based && templates_path.empty()) {
        throw ConfigError("templates_path", "required for the template strategy");
    }
    if (target_model.empty()) throw ConfigError("target_model", "required");
    if (!(tau_llm >= 0.0 && tau_llm <= 1.0)) throw ConfigError("tau_llm", "must lie in [0, 1]");
    if (!(tau_wer >= 0.0)) throw ConfigError("tau_wer", "must be >= 0");
    if (fsa_examples_per_prompt > 3) throw ConfigError("fsa_examples_per_prompt", "must lie in [0, 3]");
    if (out_dir.empty()) throw ConfigError("out_dir", "required");
    if (provider.kind == ProviderKind::mock && mock_script_path.empty()) {
        throw ConfigError("mock_script_path", "required for the mock provider");
    }
    provider.validate();
}

namespace {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError(std::string(key), fmt::format("not a valid number: '{}'", value));
    }
    return out;
}

double parse_real(std::string_view key, std::string_view value) {
    // GCC 11 lacks floating-point from_chars for some targets; strtod is fine here.
    const std::string s(value);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw ConfigError(std::string(key), fmt::format("not a valid number: '{}'", value));
    }
    return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "yes" || value == "1" || value == "on") return true;
    if (value == "false" || value == "no" || value == "0" || value == "off") return false;
    throw ConfigError(std::string(key), fmt::format("not a boolean: '{}'", value));
}

std::filesystem::path resolve(std::string_view value, const std::filesystem::path& base_dir) {
    std::filesystem::path p{std::string(value)};
    if (p.empty() || p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

} // namespace

void apply_setting(RunConfig& c, std::string_view key, std::string_view raw, const std::filesystem::path& base_dir) {
    const auto value = trim(raw);
    const std::string k(key);
    if (k == "kg_path") {
        c.kg_path = resolve(value, base_dir);
    } else if (k == "templates_path") {
        c.templates_path = resolve(value, base_dir);
    } else if (k == "dataset") {
        c.dataset = value;
    } else if (k == "provider") {
        const auto kind = parse_provider_kind(value);
        if (!kind) throw ConfigError(k, fmt::format("unknown provider '{}'", value));
        c.provider.kind = *kind;
    } else if (k == "endpoint") {
        c.provider.endpoint = value;
    } else if (k == "api_key_env") {
        c.provider.api_key_env = value;
    } else if (k == "max_parallel") {
        c.provider.max_parallel = parse_number<int>(k, value);
    } else if (k == "timeout") {
        c.provider.timeout_seconds = parse_real(k, value);
    } else if (k == "retry") {
        c.provider.max_attempts = parse_number<int>(k, value);
    } else if (k == "backoff_base") {
        c.provider.backoff_base_seconds = parse_real(k, value);
    } else if (k == "target_model") {
        c.target_model = value;
    } else if (k == "scoring_model") {
        c.scoring_model = value;
    } else if (k == "generator_model") {
        c.generator_model = value;
    } else if (k == "t2p_strategy") {
        const auto s = parse_t2p_strategy(value);
        if (!s) throw ConfigError(k, fmt::format("expected template or llm, got '{}'", value));
        c.t2p_strategy = *s;
    } else if (k == "use_fsa") {
        c.use_fsa = parse_bool(k, value);
    } else if (k == "tau_llm") {
        c.tau_llm = parse_real(k, value);
    } else if (k == "tau_wer") {
        c.tau_wer = parse_real(k, value);
    } else if (k == "scorer") {
        const auto s = parse_scorer_kind(value);
        if (!s) throw ConfigError(k, fmt::format("expected llmscore or wer, got '{}'", value));
        c.scorer = *s;
    } else if (k == "sample_size") {
        c.sample_size = parse_number<std::size_t>(k, value);
    } else if (k == "fsa_max_examples") {
        c.fsa_max_examples = parse_number<std::size_t>(k, value);
    } else if (k == "fsa_examples_per_prompt") {
        c.fsa_examples_per_prompt = parse_number<std::size_t>(k, value);
    } else if (k == "seed") {
        c.seed = parse_number<std::uint64_t>(k, value);
    } else if (k == "cache_dir") {
        c.cache_dir = resolve(value, base_dir);
    } else if (k == "out_dir") {
        c.out_dir = resolve(value, base_dir);
    } else if (k == "mock_script_path") {
        c.mock_script_path = resolve(value, base_dir);
    } else if (k == "fsa_bank_path") {
        c.fsa_bank_path = resolve(value, base_dir);
    } else {
        throw ConfigError(k, "unknown field");
    }
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    RunConfig c;
    std::size_t lineno = 0;
    while (!text.empty()) {
        ++lineno;
        const auto nl = text.find('\n');
        auto line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(std::string(line), fmt::format("line {}: expected key = value", lineno));
        }
        apply_setting(c, trim(line.substr(0, eq)), line.substr(eq + 1), base_dir);
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_config(text, path.parent_path());
}

void to_json(nlohmann::json& j, const RunConfig& c) {
    j = nlohmann::json{
        {"kg_path", c.kg_path.string()},
        {"templates_path", c.templates_path.string()},
        {"dataset", c.dataset_name()},
        {"provider", std::string(to_string(c.provider.kind))},
        {"endpoint", c.provider.kind == ProviderKind::mock ? std::string{} : c.provider.endpoint},
        {"api_key_env", c.provider.api_key_env},
        {"max_parallel", c.provider.max_parallel},
        {"timeout", c.provider.timeout_seconds},
        {"retry", c.provider.max_attempts},
        {"target_model", c.target_model},
        {"scoring_model", c.effective_scoring_model()},
        {"generator_model", c.effective_generator_model()},
        {"t2p_strategy", c.t2p_strategy},
        {"use_fsa", c.use_fsa},
        {"tau_llm", c.tau_llm},
        {"tau_wer", c.tau_wer},
        {"scorer", c.scorer},
        {"sample_size", c.sample_size},
        {"fsa_max_examples", c.fsa_max_examples},
        {"fsa_examples_per_prompt", c.fsa_examples_per_prompt},
        {"seed", c.seed},
        {"cache_dir", c.cache_dir.string()},
        {"out_dir", c.out_dir.string()},
        {"mock_script_path", c.mock_script_path.string()},
        {"fsa_bank_path", c.fsa_bank_path.string()},
    };
}

} // namespace kgrobust
