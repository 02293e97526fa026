#include "kgrobust/random.hpp"

#include "kgrobust/errors.hpp"

namespace kgrobust {

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw PreconditionError("Rng::below: empty range");
    // 2^64 mod n, computed without 128-bit arithmetic.
    const std::uint64_t rem = (0 - n) % n;
    const std::uint64_t limit = 0 - rem; // 2^64 - rem, wraps to 0 when rem == 0
    std::uint64_t x = next();
    if (rem != 0) {
        while (x >= limit) x = next();
    }
    return x % n;
}

} // namespace kgrobust
