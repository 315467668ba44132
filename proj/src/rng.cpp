#include "bfl1/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace bfl1 {
namespace {

inline std::uint64_t splitmix64_next(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace

Rng::Rng(std::uint64_t seed) : key_(seed) {
    // Expand the key into xoshiro state; SplitMix64 guarantees the state is
    // never all-zero for any seed.
    std::uint64_t x = seed;
    for (auto& s : s_) s = splitmix64_next(x);
}

std::uint64_t Rng::next_u64() {
    // xoshiro256++
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    // Box-Muller with a fixed draw count so interleaving with other
    // consumers stays reproducible.
    double u1 = uniform01();
    const double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53; // log(0) guard; occurs for the draw 0
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::uint64_t stream) const {
    // Mix key and stream index through two SplitMix64 rounds so adjacent
    // streams land far apart in seed space.
    std::uint64_t x = key_ ^ rotl(stream, 32) ^ 0xa0761d6478bd642fULL;
    std::uint64_t child = splitmix64_next(x);
    x ^= stream;
    child ^= splitmix64_next(x);
    return Rng(child);
}

Vector uniform_sample(Rng& rng, double a, double b, std::size_t n) {
    if (!(a < b))
        throw config_error("uniform_sample: require a < b, got a=" + std::to_string(a) +
                           " b=" + std::to_string(b));
    Vector out(n);
    for (auto& v : out) v = a + (b - a) * rng.uniform01();
    return out;
}

Vector standard_normal_sample(Rng& rng, std::size_t n) {
    Vector out(n);
    for (auto& v : out) v = rng.normal();
    return out;
}

} // namespace bfl1
