#ifndef SPIKEBENCH_RNG_HPP
#define SPIKEBENCH_RNG_HPP

#include <cstdint>
#include <cstring>
#include <span>

namespace spikebench {

// 64-bit seed with a determinism contract: identical seed => identical
// stream, independent of platform and standard library.
struct RngSeed {
    std::uint64_t value = 0;
};

// splitmix64 finalizer (Stafford mix13). Used both as the stream generator
// and as the mixing function for sub-seed derivation.
inline std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    explicit SplitMix64(RngSeed seed) : state_(seed.value) {}

    std::uint64_t next()
    {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix64(state_);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Exact at the endpoints: p=0 never fires, p=1 always fires.
    bool bernoulli(double p)
    {
        if (p <= 0.0) { next(); return false; }
        if (p >= 1.0) { next(); return true; }
        return uniform() < p;
    }

private:
    std::uint64_t state_;
};

// Sub-seed derivation, e.g. per matrix entry (i, j). Fixed so that runs are
// reproducible across machines.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a)
{
    return mix64(base ^ (a * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b)
{
    return derive_seed(derive_seed(base, a), b);
}

// FNV-1a over raw bytes, then finalized. Used to bind sub-seeds to row
// *content* so that reordering tokens reorders the streams with them.
inline std::uint64_t content_hash(const void* data, std::size_t bytes)
{
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return mix64(h);
}

inline std::uint64_t content_hash(std::span<const double> values)
{
    return content_hash(values.data(), values.size() * sizeof(double));
}

} // namespace spikebench

#endif
