#pragma once

#include <cstdint>
#include <vector>

namespace finrad {

/// PCG64 (XSL-RR 128/64, setseq variant). One fixed algorithm so that a seed
/// reproduces the same stream on every platform and in every build.
class Pcg64 {
public:
    explicit Pcg64(uint64_t seed, uint64_t stream = 0);

    uint64_t next();

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);

    /// Uniform integer in [0, bound). bound must be nonzero.
    uint64_t below(uint64_t bound);

    /// Standard normal via Box-Muller (second value cached).
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    using u128 = unsigned __int128;
    u128 state_;
    u128 inc_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

/// Independent deterministic stream for a (seed, domain, index) triple.
/// Used to hand out per-fold / per-candidate / per-item generators whose
/// outputs do not depend on scheduling order.
Pcg64 derive_rng(uint64_t seed, uint64_t domain, uint64_t index);

/// Deterministic 64-bit sub-seed for the same triple, for APIs that take a
/// seed rather than a generator.
uint64_t mix_seed(uint64_t seed, uint64_t domain, uint64_t index);

/// Stream-domain tags. Values are part of the reproducibility contract.
namespace rng_domain {
inline constexpr uint64_t weight_init = 1;
inline constexpr uint64_t texture_item = 2;
inline constexpr uint64_t blob_item = 3;
inline constexpr uint64_t kfold = 4;
inline constexpr uint64_t epoch_shuffle = 5;
inline constexpr uint64_t fin_candidate = 6;
inline constexpr uint64_t fin_split = 7;
inline constexpr uint64_t topology = 8;
inline constexpr uint64_t experiment = 9;
inline constexpr uint64_t grad_check = 10;
} // namespace rng_domain

} // namespace finrad
