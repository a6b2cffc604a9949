#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace netedu {

/// splitmix64 generator. The constants are the published ones, so a seed
/// reproduces the same stream in any language.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1): top 53 bits divided by 2^53.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [0, bound) by rejection; bound must be > 0.
    std::uint64_t below(std::uint64_t bound)
    {
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return x % bound;
    }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

template <typename T>
void shuffle(std::vector<T>& v, SplitMix64& rng)
{
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

/// Derives an independent seed from a base seed, a label and a counter.
/// Used for per-exercise, per-attempt randomization.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t counter);

} // namespace netedu
