#pragma once

// Counter-based random streams. A stream is a pure function of its key, so
// paths can be generated in any order on any worker.

#include <cstdint>
#include <limits>
#include <random>

#include "pdfflow/types.hpp"

namespace pdfflow {

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Identifies the Gaussian increment stream of one path.
struct NoiseSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;
    std::uint64_t substream = 0;  // e.g. grid-node index of a slice
};

constexpr std::uint64_t stream_key(const NoiseSpec& spec)
{
    std::uint64_t k = mix64(spec.master_seed ^ 0x243f6a8885a308d3ULL);
    k = mix64(k ^ mix64(spec.substream + 0x13198a2e03707344ULL));
    k = mix64(k ^ mix64(spec.path_index + 0xa4093822299f31d0ULL));
    return k;
}

/// UniformRandomBitGenerator whose i-th output is mix64(key + i * golden).
class CounterEngine {
public:
    using result_type = std::uint64_t;

    explicit CounterEngine(const NoiseSpec& spec) : key_(stream_key(spec)) {}
    explicit CounterEngine(std::uint64_t key) : key_(key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Standard-normal draws for a single path.
class GaussianStream {
public:
    explicit GaussianStream(const NoiseSpec& spec) : engine_(spec) {}

    double next() { return normal_(engine_); }

    Vec3 next3()
    {
        Vec3 z;
        z[0] = next();
        z[1] = next();
        z[2] = next();
        return z;
    }

private:
    CounterEngine engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace pdfflow
