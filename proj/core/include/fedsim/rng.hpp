#pragma once

#include <cstdint>
#include <vector>

namespace fedsim {

/// Deterministic, splittable random stream.
///
/// A stream is identified by an immutable 64-bit key; drawing advances an
/// internal counter, so replaying a stream from the same key always yields
/// the same sequence. `derive(label)` produces an independent child stream
/// whose key depends only on the parent key and the label, never on how
/// many values the parent has drawn. Keying substreams by purpose/round/
/// client makes whole simulations reproducible regardless of evaluation
/// order or thread count.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    /// Child stream keyed by (parent key, label). Chainable; the chain
    /// order matters, so derive(a).derive(b) != derive(b).derive(a).
    RngStream derive(std::uint64_t label) const;

    std::uint64_t next_u64();

    /// Uniform in [0, bound). bound must be nonzero.
    std::uint64_t next_below(std::uint64_t bound);

    /// Uniform double strictly inside (0, 1).
    double next_double();

    /// Standard normal variate (Box-Muller, two uniforms per call).
    double next_normal();

    /// Gamma(shape, 1) variate via Marsaglia-Tsang squeeze, with the
    /// usual power boost for shape < 1. shape must be positive.
    double next_gamma(double shape);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::uint64_t key() const { return key_; }

private:
    RngStream(std::uint64_t key, std::uint64_t state) : key_(key), state_(state) {}

    std::uint64_t key_;
    std::uint64_t state_;
};

} // namespace fedsim
