#include "kgrobust/kg_ingest.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "kgrobust/random.hpp"
#include "kgrobust/run_log.hpp"

namespace kgrobust {

void to_json(nlohmann::json& j, const Triplet& t) {
    j = nlohmann::json::array({t.subject, t.predicate, t.object});
}

void from_json(const nlohmann::json& j, Triplet& t) {
    if (!j.is_array() || j.size() != 3) throw Error("triplet must be a 3-element array");
    t.subject = j.at(0).get<std::string>();
    t.predicate = j.at(1).get<std::string>();
    t.object = j.at(2).get<std::string>();
}

MalformedLine::MalformedLine(std::size_t line, const std::string& why)
    : Error(fmt::format("malformed triple on line {}: {}", line, why)), line_(line) {}

DecodingError::DecodingError(std::size_t byte_offset)
    : Error(fmt::format("invalid UTF-8 at byte offset {}", byte_offset)), offset_(byte_offset) {}

MalformedTemplate::MalformedTemplate(std::size_t line, const std::string& why)
    : Error(fmt::format("malformed template on line {}: {}", line, why)), line_(line) {}

SampleTooLarge::SampleTooLarge(std::size_t requested, std::size_t available)
    : Error(fmt::format("cannot sample {} triples from a store of {}", requested, available)) {}

std::size_t find_invalid_utf8(std::string_view bytes) {
    std::size_t i = 0;
    const std::size_t n = bytes.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(bytes[i]);
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return i;
        }
        if (i + len > n) return i;
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(bytes[i + k]);
            if ((cc & 0xC0) != 0x80) return i;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // Overlong forms, surrogates and values past U+10FFFF.
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
            (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
            return i;
        }
        i += len;
    }
    return std::string_view::npos;
}

namespace {

std::string read_all(std::istream& in) {
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(),
                       [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; });
}

// Calls fn(line_number, line) for every non-blank, non-comment line.
template <typename Fn>
void for_each_content_line(std::istream& in, Fn&& fn) {
    const std::string text = read_all(in);
    if (const auto bad = find_invalid_utf8(text); bad != std::string_view::npos) {
        throw DecodingError(bad);
    }
    auto lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto line = lines[i];
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (is_blank(line) || line.front() == '#') continue;
        fn(i + 1, line);
    }
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    std::size_t count = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return in;
}

} // namespace

std::vector<Triplet> parse_triples(std::istream& in) {
    std::vector<Triplet> out;
    for_each_content_line(in, [&](std::size_t lineno, std::string_view line) {
        const auto fields = split(line, '\t');
        if (fields.size() != 3) {
            throw MalformedLine(lineno, fmt::format("expected 3 tab-separated fields, got {}", fields.size()));
        }
        for (const auto& f : fields) {
            if (f.empty()) throw MalformedLine(lineno, "empty field");
        }
        out.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
    });
    return out;
}

std::vector<Triplet> load_triples(const std::string& path) {
    auto in = open_or_throw(path);
    return parse_triples(in);
}

void write_triples(std::ostream& out, const std::vector<Triplet>& triples) {
    for (const auto& t : triples) out << t.subject << '\t' << t.predicate << '\t' << t.object << '\n';
}

TemplateMap parse_templates(std::istream& in, RunLog* log) {
    TemplateMap out;
    for_each_content_line(in, [&](std::size_t lineno, std::string_view line) {
        const auto fields = split(line, '\t');
        if (fields.size() != 2 || fields[0].empty()) {
            throw MalformedTemplate(lineno, "expected predicate<TAB>pattern");
        }
        const auto pattern = fields[1];
        if (count_occurrences(pattern, "[X]") != 1 || count_occurrences(pattern, "[Y]") != 1) {
            throw MalformedTemplate(lineno, "pattern needs exactly one [X] and one [Y]");
        }
        std::string predicate(fields[0]);
        if (out.contains(predicate) && log) {
            log->warn(fmt::format("template for '{}' redefined on line {}; later definition wins",
                                  predicate, lineno));
        }
        out[predicate] = RelationTemplate{predicate, std::string(pattern)};
    });
    return out;
}

TemplateMap load_templates(const std::string& path, RunLog* log) {
    auto in = open_or_throw(path);
    return parse_templates(in, log);
}

KnowledgeGraphStore::KnowledgeGraphStore(std::vector<Triplet> triples) : triples_(std::move(triples)) {
    auto add_unique = [](std::vector<std::string>& pool, const std::string& value) {
        if (std::find(pool.begin(), pool.end(), value) == pool.end()) pool.push_back(value);
    };
    for (const auto& t : triples_) {
        if (!membership_.insert(t).second) continue;
        unique_.push_back(t);
        if (!subjects_by_predicate_.contains(t.predicate)) predicates_.push_back(t.predicate);
        add_unique(subjects_by_predicate_[t.predicate], t.subject);
        add_unique(objects_by_predicate_[t.predicate], t.object);
    }
}

const std::vector<std::string>& KnowledgeGraphStore::subjects_for(const std::string& predicate) const {
    static const std::vector<std::string> empty;
    const auto it = subjects_by_predicate_.find(predicate);
    return it == subjects_by_predicate_.end() ? empty : it->second;
}

const std::vector<std::string>& KnowledgeGraphStore::objects_for(const std::string& predicate) const {
    static const std::vector<std::string> empty;
    const auto it = objects_by_predicate_.find(predicate);
    return it == objects_by_predicate_.end() ? empty : it->second;
}

KnowledgeGraphStore build_store(std::vector<Triplet> triples) {
    return KnowledgeGraphStore(std::move(triples));
}

std::vector<Triplet> sample_triples(const KnowledgeGraphStore& store, std::size_t n, std::uint64_t seed) {
    const auto& pool = store.unique_triples();
    if (n > pool.size()) throw SampleTooLarge(n, pool.size());
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span(order));
    std::vector<Triplet> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool[order[i]]);
    return out;
}

} // namespace kgrobust
