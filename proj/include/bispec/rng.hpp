#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace bispec {

/// Seed wrapper. Identical seeds reproduce identical draws bit-for-bit,
/// independent of platform and standard library.
struct RngSeed {
    std::uint64_t value = 0;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Derives an independent stream seed from a base seed and a tag path.
/// Used so that signal generation, noise, masking, perturbation and block
/// sampling never share a stream.
template <typename... Tags>
RngSeed derive_seed(RngSeed base, Tags... tags) {
    std::uint64_t s = detail::mix64(base.value);
    ((s = detail::mix64(s ^ static_cast<std::uint64_t>(tags))), ...);
    return RngSeed{s};
}

/// SplitMix64 generator with hand-rolled distributions. std::* distributions
/// are not bit-reproducible across standard libraries, these are.
class Rng {
public:
    explicit Rng(RngSeed seed) : state_(seed.value) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on [0, bound). Lemire multiply-shift, unbiased.
    std::size_t uniform_index(std::size_t bound) {
        if (bound == 0) throw std::invalid_argument("uniform_index: bound must be positive");
        using u128 = unsigned __int128;
        std::uint64_t x = next_u64();
        u128 m = static_cast<u128>(x) * static_cast<u128>(bound);
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            std::uint64_t t = (0 - bound) % bound;
            while (lo < t) {
                x = next_u64();
                m = static_cast<u128>(x) * static_cast<u128>(bound);
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::size_t>(m >> 64);
    }

    /// Standard normal via Box-Muller; second value of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // u1 = 0 would take log(0); nudge onto (0, 1].
        double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// q distinct values from `pool`, uniformly without replacement
    /// (partial Fisher-Yates). Result is sorted for a fixed reduction order.
    std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t q);

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline std::vector<std::size_t> Rng::sample_without_replacement(std::vector<std::size_t> pool, std::size_t q) {
    if (q > pool.size()) throw std::invalid_argument("sample_without_replacement: q exceeds pool size");
    for (std::size_t i = 0; i < q; ++i) {
        std::size_t j = i + uniform_index(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(q);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace bispec
