#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace wganplan {

/// Deterministic random source. std::mt19937_64 is reproducible everywhere,
/// but the standard distributions are implementation-defined, so the uniform
/// and normal transforms are spelled out here; datasets and checkpoints stay
/// byte-stable across toolchains.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // splitmix warmup so nearby seeds give unrelated streams
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller; caches the second value of each pair.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        // u1 in (0,1] so the log is finite
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    /// Derives an independent child seed for a named stream.
    std::uint64_t derive(std::string_view stream, std::uint64_t index) const {
        std::uint64_t h = state_ ^ 0x51d2cc5a03e1f3adull;
        for (char c : stream) h = (h ^ static_cast<std::uint64_t>(c)) * 0x100000001b3ull;
        h ^= index + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        return h;
    }

  private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace wganplan
