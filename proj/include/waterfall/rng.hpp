#pragma once

// Deterministic keyed random streams.
//
// Every stochastic quantity in the library is drawn from a stream whose seed
// is a hash of (seed, entity keys...). Draws are therefore reproducible and
// independent of evaluation order, which makes common-random-number
// comparisons between candidate waterfalls exact and makes multi-threaded
// runs bit-identical to single-threaded ones.

#include <cmath>
#include <cstdint>
#include <string_view>

namespace waterfall {

/// 64-bit FNV-1a. Stable across platforms; used for string keys and file
/// content digests.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

/// Full-avalanche 64-bit finalizer (splitmix64).
constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

/// Absorb one key component into a running stream key.
constexpr std::uint64_t feed(std::uint64_t h, std::uint64_t v) {
    return mix64((h ^ v) + kGolden);
}

} // namespace detail

/// Build a stream key from a seed plus any number of integer components.
/// Chained avalanche mixing: distinct tuples give unrelated streams.
template <typename... Parts>
constexpr std::uint64_t stream_key(std::uint64_t seed, Parts... parts) {
    std::uint64_t h = detail::mix64(seed + detail::kGolden);
    ((h = detail::feed(h, static_cast<std::uint64_t>(parts))), ...);
    return h;
}

/// Derive a sub-seed for an independent purpose ("simulate", "synth", ...).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
    return stream_key(seed, fnv1a64(purpose));
}

/// Counter-based generator: state advances by a fixed odd increment and each
/// output is a full avalanche of the state. No warm-up needed, any number of
/// draws per stream.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t stream) : state_(stream) {}

    std::uint64_t next_u64() {
        state_ += detail::kGolden;
        return detail::mix64(state_);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in (0, 1]; safe as a log() argument.
    double next_unit_open() { return 1.0 - next_unit(); }

    /// Standard normal via Box-Muller. Consumes two uniforms per call.
    double next_normal() {
        double u1 = next_unit_open();
        double u2 = next_unit();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    /// Gamma(shape, 1) via Marsaglia-Tsang squeeze; shape < 1 handled by the
    /// boost Ga(shape) = Ga(shape+1) * U^(1/shape).
    double next_gamma(double shape) {
        if (shape < 1.0) {
            double u = next_unit_open();
            return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = next_normal();
            double t = 1.0 + c * x;
            if (t <= 0.0) continue;
            double v = t * t * t;
            double u = next_unit_open();
            double xx = x * x;
            if (u < 1.0 - 0.0331 * xx * xx) return d * v;
            if (std::log(u) < 0.5 * xx + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Beta(a, b) as Ga(a) / (Ga(a) + Ga(b)). Degenerate zero-sum draws
    /// (possible only by extreme underflow) fall back to 1/2.
    double next_beta(double a, double b) {
        double x = next_gamma(a);
        double y = next_gamma(b);
        double s = x + y;
        if (!(s > 0.0)) return 0.5;
        return x / s;
    }

private:
    std::uint64_t state_;
};

} // namespace waterfall
