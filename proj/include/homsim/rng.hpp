#pragma once

#include <cmath>
#include <cstdint>

namespace homsim {

namespace detail {

/// SplitMix64 finaliser; good avalanche, used both as a stream generator and
/// as a key-mixing function.
inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace detail

/// Deterministic counter-seeded random stream. Every simulated frame gets its
/// own stream derived from (seed, delay index, frame index), so results are
/// identical for any execution order or thread schedule. All distributions are
/// hand-rolled: the output must be bit-reproducible across platforms, which
/// <random> does not guarantee.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) { next_u64(); }

    static Rng for_frame(uint64_t seed, uint64_t delay_index, uint64_t frame_index) {
        uint64_t h = detail::mix64(seed ^ 0x6A09E667F3BCC909ull);
        h = detail::mix64(h ^ (0xD1B54A32D192ED03ull * (delay_index + 1)));
        h = detail::mix64(h ^ (0x8CB92BA72F3D8DD7ull * (frame_index + 1)));
        return Rng(h);
    }

    /// Derive an independent substream (e.g. for dark counts vs photon pairs).
    Rng fork(uint64_t tag) const {
        return Rng(detail::mix64(state_ ^ (0x9E3779B97F4A7C15ull * (tag + 1))));
    }

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return detail::mix64(state_);
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [0, 1); never returns exactly 0 (safe for log()).
    double next_double_nz() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) {
        // multiply-shift; bias < 2^-64, irrelevant here
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    bool next_bool() { return (next_u64() >> 63) != 0; }

    /// Standard normal via Box-Muller (second value cached).
    double next_gauss() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = next_double_nz();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    /// Poisson sample, Knuth's product method. O(lambda) per draw, fine for
    /// the pair fluxes used here (a few per frame).
    uint64_t next_poisson(double lambda) {
        if (lambda <= 0.0)
            return 0;
        double limit = std::exp(-lambda);
        uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= next_double_nz();
        } while (p > limit);
        return k - 1;
    }

    /// Number of failures before the first success for success probability p,
    /// i.e. a geometric gap for Bernoulli thinning / sparse click placement.
    uint64_t next_geometric_gap(double p) {
        if (p >= 1.0)
            return 0;
        double u = next_double_nz();
        return static_cast<uint64_t>(std::log(u) / std::log1p(-p));
    }

private:
    uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace homsim
