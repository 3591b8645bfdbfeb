#pragma once

#include <cstdint>
#include <vector>

namespace cdn {

// Deterministic PRNG with explicitly pinned output laws, so that corpora and
// checkpoints are byte-identical across platforms and standard library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    // xorshift64* core
    uint64_t next_u64() {
        uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dull;
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller, one value per call (spare cached)
    double normal();
    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    // integer in [0, n)
    uint64_t below(uint64_t n);

    // Fisher-Yates permutation of 0..n-1
    std::vector<int> permutation(int n);

    // derive an independent stream (for per-dataset / per-regime seeding)
    Rng fork(uint64_t salt) {
        return Rng(next_mix(state_, salt));
    }

private:
    static uint64_t next_mix(uint64_t a, uint64_t b);
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace cdn
