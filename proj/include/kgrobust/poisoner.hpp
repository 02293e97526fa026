#pragma once

// Gold-label assignment and triple perturbation.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kgrobust/errors.hpp"
#include "kgrobust/kg_ingest.hpp"
#include "kgrobust/labels.hpp"

namespace kgrobust {

enum class PerturbedSlot { none, subject, object, predicate };

std::string_view to_string(PerturbedSlot slot);
void to_json(nlohmann::json& j, PerturbedSlot slot);
void from_json(const nlohmann::json& j, PerturbedSlot& slot);

struct PoisonedTriplet {
    Triplet current;
    Triplet original;
    GoldLabel label = GoldLabel::true_fact;
    PerturbedSlot perturbed_slot = PerturbedSlot::none;

    bool operator==(const PoisonedTriplet&) const = default;
};

void to_json(nlohmann::json& j, const PoisonedTriplet& p);
void from_json(const nlohmann::json& j, PoisonedTriplet& p);

// Checks the label/slot/difference invariants; returns an empty string when
// they hold, otherwise a description of the first violation.
std::string check_invariants(const PoisonedTriplet& p);

class PoisoningExhausted : public Error {
public:
    explicit PoisoningExhausted(const std::string& what, std::ptrdiff_t index = -1)
        : Error(what), index_(index) {}

    // Position in the batch, or -1 for single-item calls.
    std::ptrdiff_t index() const { return index_; }

private:
    std::ptrdiff_t index_;
};

// Draws per slot before giving up on that slot.
inline constexpr int kMaxReplacementDraws = 32;

// n labels whose counts differ by at most one, in seeded shuffled order.
std::vector<GoldLabel> assign_labels(std::size_t n, std::uint64_t seed);

PoisonedTriplet poison_entity(const Triplet& t, const KnowledgeGraphStore& store, std::uint64_t seed);
PoisonedTriplet poison_predicate(const Triplet& t, const KnowledgeGraphStore& store, std::uint64_t seed);

// Item i uses label assign_labels(n, derive_seed(seed, labels))[i] and
// perturbation seed derive_seed(derive_seed(seed, poison), i).
std::vector<PoisonedTriplet> poison_batch(const std::vector<Triplet>& triples,
                                          const KnowledgeGraphStore& store, std::uint64_t seed);

} // namespace kgrobust
