#pragma once

#include <cstdint>
#include <cstddef>

#include "bfl1/linalg.hpp"

namespace bfl1 {

// Deterministic counter-splittable generator built on xoshiro256++.
//
// Every generator remembers the 64-bit key it was seeded from; split(stream)
// hashes (key, stream) into a fresh key, so any node in the seed tree is
// reproducible from the root seed and the path of stream indices alone,
// independent of how many draws other branches consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    // Standard normal via Box-Muller; always consumes exactly two 64-bit
    // draws and never caches the second variate.
    double normal();

    // Child generator for an independent stream; does not disturb *this.
    Rng split(std::uint64_t stream) const;

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t s_[4];
};

// n iid draws from U[a, b); requires a < b.
Vector uniform_sample(Rng& rng, double a, double b, std::size_t n);

// n iid standard normal draws.
Vector standard_normal_sample(Rng& rng, std::size_t n);

} // namespace bfl1
