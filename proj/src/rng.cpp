#include "finrad/rng.hpp"

#include <cmath>

#include "finrad/errors.hpp"

namespace finrad {

namespace {

using u128 = unsigned __int128;

constexpr u128 pcg_mult() {
    return (static_cast<u128>(0x2360ed051fc65da4ULL) << 64) |
           0x4385df649fccf645ULL;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t rotr64(uint64_t v, unsigned rot) {
    return (v >> rot) | (v << ((64u - rot) & 63u));
}

} // namespace

Pcg64::Pcg64(uint64_t seed, uint64_t stream) {
    const u128 seq = (static_cast<u128>(splitmix64(stream)) << 64) |
                     splitmix64(stream ^ 0xda3e39cb94b95bdbULL);
    inc_ = (seq << 1) | 1;
    state_ = 0;
    next();
    state_ += (static_cast<u128>(splitmix64(seed)) << 64) |
              splitmix64(seed ^ 0x5851f42d4c957f2dULL);
    next();
}

uint64_t Pcg64::next() {
    state_ = state_ * pcg_mult() + inc_;
    const uint64_t xored =
        static_cast<uint64_t>(state_ >> 64) ^ static_cast<uint64_t>(state_);
    const unsigned rot = static_cast<unsigned>(state_ >> 122);
    return rotr64(xored, rot);
}

double Pcg64::uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Pcg64::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

uint64_t Pcg64::below(uint64_t bound) {
    if (bound == 0) throw InvalidArgument("Pcg64::below: bound must be nonzero");
    // Rejection threshold keeps the draw unbiased and deterministic.
    const uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const uint64_t r = next();
        if (r >= threshold) return r % bound;
    }
}

double Pcg64::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    cached_normal_ = radius * std::sin(angle);
    has_cached_normal_ = true;
    return radius * std::cos(angle);
}

Pcg64 derive_rng(uint64_t seed, uint64_t domain, uint64_t index) {
    const uint64_t t = mix_seed(seed, domain, index);
    return Pcg64(t, splitmix64(t ^ domain) ^ index);
}

uint64_t mix_seed(uint64_t seed, uint64_t domain, uint64_t index) {
    const uint64_t s = splitmix64(seed ^ splitmix64(domain));
    return splitmix64(s ^ splitmix64(index ^ 0xa0761d6478bd642fULL));
}

} // namespace finrad
