#include "fedsim/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fedsim {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kSeedSalt = 0x5DEECE66DB0F2A63ull;
constexpr std::uint64_t kDeriveSalt = 0xA3EC4E6C9C0F2A35ull;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace

RngStream::RngStream(std::uint64_t seed) {
    key_ = mix64(seed ^ kSeedSalt);
    state_ = key_;
}

RngStream RngStream::derive(std::uint64_t label) const {
    std::uint64_t child = mix64(key_ ^ mix64(label + kDeriveSalt));
    return RngStream(child, child);
}

std::uint64_t RngStream::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
    if (bound == 0) {
        throw std::invalid_argument("RngStream::next_below: bound must be nonzero");
    }
    // Lemire's bounded generation, rejection keeps it exactly uniform.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        std::uint64_t threshold = -bound % bound;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(next_u64()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double RngStream::next_double() {
    // 53-bit mantissa, offset by half an ulp so 0 and 1 are never returned.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::next_normal() {
    double u1 = next_double();
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::next_gamma(double shape) {
    if (!(shape > 0.0)) {
        throw std::invalid_argument("RngStream::next_gamma: shape must be positive");
    }
    if (shape < 1.0) {
        double g = next_gamma(shape + 1.0);
        return g * std::pow(next_double(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = next_normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) {
            continue;
        }
        v = v * v * v;
        double u = next_double();
        if (u < 1.0 - 0.0331 * (x * x) * (x * x)) {
            return d * v;
        }
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

} // namespace fedsim
