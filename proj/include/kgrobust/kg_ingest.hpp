#pragma once

// Knowledge-graph ingestion: TSV triple files, relation templates and an
// immutable in-memory store with per-predicate entity pools.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kgrobust/errors.hpp"

namespace kgrobust {

class RunLog;

struct Triplet {
    std::string subject;
    std::string predicate;
    std::string object;

    auto operator<=>(const Triplet&) const = default;
};

// Serialized as a 3-element array [subject, predicate, object].
void to_json(nlohmann::json& j, const Triplet& t);
void from_json(const nlohmann::json& j, Triplet& t);

struct RelationTemplate {
    std::string predicate;
    std::string pattern; // exactly one "[X]" and one "[Y]"
};

using TemplateMap = std::map<std::string, RelationTemplate>;

class MalformedLine : public Error {
public:
    MalformedLine(std::size_t line, const std::string& why);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class DecodingError : public Error {
public:
    explicit DecodingError(std::size_t byte_offset);
    std::size_t byte_offset() const { return offset_; }

private:
    std::size_t offset_;
};

class MalformedTemplate : public Error {
public:
    MalformedTemplate(std::size_t line, const std::string& why);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class SampleTooLarge : public Error {
public:
    SampleTooLarge(std::size_t requested, std::size_t available);
};

// Returns the byte offset of the first invalid UTF-8 sequence, or npos.
std::size_t find_invalid_utf8(std::string_view bytes);

// One triple per line: subject<TAB>predicate<TAB>object. Blank lines and
// lines starting with '#' are skipped; CRLF line endings are accepted.
std::vector<Triplet> parse_triples(std::istream& in);
std::vector<Triplet> load_triples(const std::string& path);

// Writes triples back in the format parse_triples reads.
void write_triples(std::ostream& out, const std::vector<Triplet>& triples);

// predicate<TAB>pattern per line. A later definition of the same predicate
// replaces the earlier one and records a warning in `log` (when given).
TemplateMap parse_templates(std::istream& in, RunLog* log = nullptr);
TemplateMap load_templates(const std::string& path, RunLog* log = nullptr);

class KnowledgeGraphStore {
public:
    KnowledgeGraphStore() = default;
    explicit KnowledgeGraphStore(std::vector<Triplet> triples);

    // Every parsed triple, duplicates included, in input order.
    const std::vector<Triplet>& triples() const { return triples_; }
    // Distinct triples in order of first appearance; the sampling domain.
    const std::vector<Triplet>& unique_triples() const { return unique_; }

    bool contains(const Triplet& t) const { return membership_.contains(t); }
    std::size_t membership_size() const { return membership_.size(); }

    // Pools are in order of first appearance, which keeps seeded draws stable.
    const std::vector<std::string>& subjects_for(const std::string& predicate) const;
    const std::vector<std::string>& objects_for(const std::string& predicate) const;
    const std::vector<std::string>& predicates() const { return predicates_; }

private:
    std::vector<Triplet> triples_;
    std::vector<Triplet> unique_;
    std::set<Triplet> membership_;
    std::unordered_map<std::string, std::vector<std::string>> subjects_by_predicate_;
    std::unordered_map<std::string, std::vector<std::string>> objects_by_predicate_;
    std::vector<std::string> predicates_;
};

KnowledgeGraphStore build_store(std::vector<Triplet> triples);

// n distinct triples: the first n entries of a seeded Fisher-Yates
// permutation of unique_triples() (see random.hpp).
std::vector<Triplet> sample_triples(const KnowledgeGraphStore& store, std::size_t n,
                                    std::uint64_t seed);

} // namespace kgrobust
