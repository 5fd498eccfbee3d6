#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rsgan {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Domain tags so that streams for different purposes never collide.
enum class Stream : std::uint64_t {
    Folds = 1,
    Walks,
    SkipGram,
    Init,
    Pretrain,
    Epoch,
    UserStep,
    LinkHoldout,
    RandomFriends,
    Bpr,
};

/// Derives an independent generator from (master seed, purpose, counters).
/// The same inputs always give the same stream, whatever order callers ask in.
inline Rng derive_rng(std::uint64_t master_seed, Stream purpose,
                      std::initializer_list<std::uint64_t> counters = {}) {
    std::uint64_t h = splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(purpose)));
    for (std::uint64_t c : counters) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
    return Rng(h);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). Lemire-style rejection keeps it unbiased.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

template <class Container>
void shuffle(Container& c, Rng& rng) {
    for (std::size_t i = c.size(); i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(c[i - 1], c[j]);
    }
}

}  // namespace rsgan
