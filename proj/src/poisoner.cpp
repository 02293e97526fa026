#include "kgrobust/poisoner.hpp"

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "kgrobust/random.hpp"

namespace kgrobust {

std::string_view to_string(PerturbedSlot slot) {
    switch (slot) {
        case PerturbedSlot::none: return "none";
        case PerturbedSlot::subject: return "subject";
        case PerturbedSlot::object: return "object";
        case PerturbedSlot::predicate: return "predicate";
    }
    return "?";
}

void to_json(nlohmann::json& j, PerturbedSlot slot) { j = std::string(to_string(slot)); }

void from_json(const nlohmann::json& j, PerturbedSlot& slot) {
    const auto s = j.get<std::string>();
    for (auto v : {PerturbedSlot::none, PerturbedSlot::subject, PerturbedSlot::object, PerturbedSlot::predicate}) {
        if (s == to_string(v)) {
            slot = v;
            return;
        }
    }
    throw Error("unknown perturbed_slot: " + s);
}

void to_json(nlohmann::json& j, const PoisonedTriplet& p) {
    j = nlohmann::json{{"current", p.current},
                       {"original", p.original},
                       {"label", p.label},
                       {"perturbed_slot", p.perturbed_slot}};
}

void from_json(const nlohmann::json& j, PoisonedTriplet& p) {
    j.at("current").get_to(p.current);
    j.at("original").get_to(p.original);
    j.at("label").get_to(p.label);
    j.at("perturbed_slot").get_to(p.perturbed_slot);
}

std::string check_invariants(const PoisonedTriplet& p) {
    const bool s = p.current.subject != p.original.subject;
    const bool r = p.current.predicate != p.original.predicate;
    const bool o = p.current.object != p.original.object;
    switch (p.label) {
        case GoldLabel::true_fact:
            if (s || r || o) return "true label but triple differs from original";
            if (p.perturbed_slot != PerturbedSlot::none) return "true label with a perturbed slot";
            return {};
        case GoldLabel::entity_error:
            if (p.perturbed_slot == PerturbedSlot::subject && s && !r && !o) return {};
            if (p.perturbed_slot == PerturbedSlot::object && o && !s && !r) return {};
            return "entity_error must differ in exactly the declared entity slot";
        case GoldLabel::predicate_error:
            if (p.perturbed_slot == PerturbedSlot::predicate && r && !s && !o) return {};
            return "predicate_error must differ in the predicate only";
    }
    return "unknown label";
}

std::vector<GoldLabel> assign_labels(std::size_t n, std::uint64_t seed) {
    std::vector<GoldLabel> labels;
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) labels.push_back(kAllLabels[i % kAllLabels.size()]);
    Rng rng(seed);
    rng.shuffle(std::span(labels));
    return labels;
}

namespace {

std::string& slot_field(Triplet& t, PerturbedSlot slot) {
    switch (slot) {
        case PerturbedSlot::subject: return t.subject;
        case PerturbedSlot::object: return t.object;
        default: return t.predicate;
    }
}

// Draws replacements for one slot without replacement from `pool` minus the
// original value, rejecting any that would produce a stored triple. Returns
// false after kMaxReplacementDraws rejections or when the pool runs dry.
bool try_replace(const Triplet& t, PerturbedSlot slot, const std::vector<std::string>& pool,
                 const KnowledgeGraphStore& store, Rng& rng, Triplet& out) {
    Triplet candidate = t;
    const std::string original = slot_field(candidate, slot);
    std::vector<std::string> remaining;
    for (const auto& value : pool) {
        if (value != original) remaining.push_back(value);
    }
    for (int attempt = 0; attempt < kMaxReplacementDraws && !remaining.empty(); ++attempt) {
        const auto k = static_cast<std::size_t>(rng.below(remaining.size()));
        slot_field(candidate, slot) = remaining[k];
        if (!store.contains(candidate)) {
            out = std::move(candidate);
            return true;
        }
        remaining[k] = std::move(remaining.back());
        remaining.pop_back();
    }
    return false;
}

} // namespace

PoisonedTriplet poison_entity(const Triplet& t, const KnowledgeGraphStore& store, std::uint64_t seed) {
    Rng rng(seed);
    const PerturbedSlot first = rng.coin() ? PerturbedSlot::subject : PerturbedSlot::object;
    const PerturbedSlot second = first == PerturbedSlot::subject ? PerturbedSlot::object : PerturbedSlot::subject;
    for (auto slot : {first, second}) {
        const auto& pool = slot == PerturbedSlot::subject ? store.subjects_for(t.predicate)
                                                          : store.objects_for(t.predicate);
        Triplet replaced;
        if (try_replace(t, slot, pool, store, rng, replaced)) {
            return {std::move(replaced), t, GoldLabel::entity_error, slot};
        }
    }
    throw PoisoningExhausted(fmt::format("no valid entity replacement for ({}, {}, {})", t.subject,
                                         t.predicate, t.object));
}

PoisonedTriplet poison_predicate(const Triplet& t, const KnowledgeGraphStore& store, std::uint64_t seed) {
    Rng rng(seed);
    Triplet replaced;
    if (try_replace(t, PerturbedSlot::predicate, store.predicates(), store, rng, replaced)) {
        return {std::move(replaced), t, GoldLabel::predicate_error, PerturbedSlot::predicate};
    }
    throw PoisoningExhausted(fmt::format("no valid predicate replacement for ({}, {}, {})", t.subject,
                                         t.predicate, t.object));
}

std::vector<PoisonedTriplet> poison_batch(const std::vector<Triplet>& triples, const KnowledgeGraphStore& store,
                                          std::uint64_t seed) {
    const auto labels = assign_labels(triples.size(), derive_seed(seed, SeedStream::labels));
    const auto item_seed_base = derive_seed(seed, SeedStream::poison);
    std::vector<PoisonedTriplet> out;
    out.reserve(triples.size());
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto& t = triples[i];
        const auto item_seed = derive_seed(item_seed_base, i);
        try {
            switch (labels[i]) {
                case GoldLabel::true_fact:
                    out.push_back({t, t, GoldLabel::true_fact, PerturbedSlot::none});
                    break;
                case GoldLabel::entity_error:
                    out.push_back(poison_entity(t, store, item_seed));
                    break;
                case GoldLabel::predicate_error:
                    out.push_back(poison_predicate(t, store, item_seed));
                    break;
            }
        } catch (const PoisoningExhausted& e) {
            throw PoisoningExhausted(fmt::format("item {}: {}", i, e.what()), static_cast<std::ptrdiff_t>(i));
        }
    }
    return out;
}

} // namespace kgrobust
