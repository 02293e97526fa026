#pragma once

// Deterministic randomness shared by every pipeline stage.
//
// The generator is std::mt19937_64, whose output sequence is fixed by the
// C++ standard. Bounded draws and shuffles are implemented here instead of
// using std::uniform_int_distribution / std::shuffle, whose algorithms are
// implementation-defined. Together this makes every seeded result identical
// across compilers and machines:
//
//   below(n):   x = next(); while (x >= 2^64 - (2^64 mod n)) x = next(); return x mod n
//   shuffle(v): for i = size-1 down to 1: swap(v[i], v[below(i + 1)])
//   derive_seed(seed, stream) = splitmix64(seed ^ splitmix64(stream))

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace kgrobust {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

// Stream tags for derive_seed. Values are part of the reproducibility
// contract; never renumber.
enum class SeedStream : std::uint64_t {
    sample = 1,
    labels = 2,
    poison = 3,
    mining_poison = 5,
    example_select = 6,
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) {
    return derive_seed(seed, static_cast<std::uint64_t>(stream));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    bool coin() { return below(2) == 1; }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace kgrobust
