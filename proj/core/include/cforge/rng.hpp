#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace cforge {

/// Seeded generator with a portable bounded-integer draw.
///
/// std::uniform_*_distribution is implementation defined, so every draw goes
/// through mt19937_64's raw output (fully specified) to keep artifacts
/// byte-identical across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream for `label`, derived from a root seed.
    static Rng stream(std::uint64_t seed, std::string_view label, std::uint64_t salt = 0);

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    /// Uniform double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    template <typename T>
    void shuffle(std::span<T> items)
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

std::uint64_t fnv1a(std::string_view text) noexcept;
std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace cforge
