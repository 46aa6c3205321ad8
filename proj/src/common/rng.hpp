#pragma once

#include <cstdint>
#include <vector>

namespace masklab {

// PCG32. Small, fast, and bit-reproducible across platforms, which the
// determinism contracts (identical seeds -> identical artifacts) depend on.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        state_ = 0u;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += 0x853c49e6748fea9bULL + seed;
        next_u32();
    }

    // Independent generator for a (seed, index) pair, e.g. one per record.
    static Rng for_index(std::uint64_t seed, std::uint64_t index) {
        return Rng(seed, 0x9e3779b97f4a7c15ULL ^ (index + 1));
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    // Uniform in [0, 1) with 24 bits of mantissa.
    float uniform() { return static_cast<float>(next_u32() >> 8) * 0x1.0p-24f; }

    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        std::uint32_t span = static_cast<std::uint32_t>(hi - lo) + 1u;
        return lo + static_cast<int>(next_u32() % span);
    }

    bool bernoulli(float p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_u32() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

}  // namespace masklab
