#ifndef SPIKEBENCH_SPIKE_HPP
#define SPIKEBENCH_SPIKE_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikebench/rng.hpp"

namespace spikebench {

// Binary event record over T timesteps, stored as packed 64-bit words.
class SpikeTrain {
public:
    SpikeTrain() = default;

    explicit SpikeTrain(std::uint32_t timesteps)
        : timesteps_(timesteps), words_((timesteps + 63) / 64, 0)
    {
        if (timesteps == 0) throw std::invalid_argument("SpikeTrain: T must be >= 1");
    }

    std::uint32_t timesteps() const { return timesteps_; }

    bool get(std::uint32_t t) const
    {
        return (words_[t >> 6] >> (t & 63)) & 1u;
    }

    void set(std::uint32_t t, bool v)
    {
        const std::uint64_t mask = 1ull << (t & 63);
        if (v) words_[t >> 6] |= mask;
        else   words_[t >> 6] &= ~mask;
    }

    std::uint64_t count_ones() const
    {
        std::uint64_t n = 0;
        for (std::uint64_t w : words_) n += static_cast<std::uint64_t>(__builtin_popcountll(w));
        return n;
    }

    std::vector<std::uint64_t>& words() { return words_; }
    const std::vector<std::uint64_t>& words() const { return words_; }

    // Zeroes the pad bits above T; call after whole-word operations.
    void mask_tail()
    {
        const std::uint32_t rem = timesteps_ & 63;
        if (rem != 0 && !words_.empty())
            words_.back() &= (1ull << rem) - 1ull;
    }

    bool operator==(const SpikeTrain& o) const = default;

private:
    std::uint32_t timesteps_ = 0;
    std::vector<std::uint64_t> words_;
};

// Stochastic rate encoding: each bit is independently Bernoulli(x).
// E[sum s_t] = x*T; deterministic given the seed.
inline SpikeTrain encode_rate(double x, std::uint32_t timesteps, RngSeed seed)
{
    if (!(x >= 0.0 && x <= 1.0))
        throw std::invalid_argument("encode_rate: x must lie in [0,1]");
    SpikeTrain train(timesteps);
    SplitMix64 rng(seed);
    auto& words = train.words();
    std::uint32_t t = 0;
    for (auto& w : words) {
        std::uint64_t acc = 0;
        const std::uint32_t lim = std::min<std::uint32_t>(64, timesteps - t);
        for (std::uint32_t b = 0; b < lim; ++b)
            if (rng.bernoulli(x)) acc |= 1ull << b;
        w = acc;
        t += lim;
    }
    return train;
}

inline double decode_rate(const SpikeTrain& train)
{
    return static_cast<double>(train.count_ones()) / train.timesteps();
}

// Dense block of spike trains indexed (row, col, t); the currency between
// the encoder, the circuits, and the attention layers.
class SpikeTensor {
public:
    SpikeTensor() = default;

    SpikeTensor(std::uint32_t rows, std::uint32_t cols, std::uint32_t timesteps)
        : rows_(rows), cols_(cols), timesteps_(timesteps),
          words_per_train_((timesteps + 63) / 64),
          words_(static_cast<std::size_t>(rows) * cols * words_per_train_, 0)
    {
        if (rows == 0 || cols == 0 || timesteps == 0)
            throw std::invalid_argument("SpikeTensor: dims must be strictly positive");
    }

    std::uint32_t rows() const { return rows_; }
    std::uint32_t cols() const { return cols_; }
    std::uint32_t timesteps() const { return timesteps_; }

    bool get(std::uint32_t i, std::uint32_t j, std::uint32_t t) const
    {
        const std::uint64_t w = words_[offset(i, j) + (t >> 6)];
        return (w >> (t & 63)) & 1u;
    }

    void set(std::uint32_t i, std::uint32_t j, std::uint32_t t, bool v)
    {
        const std::uint64_t mask = 1ull << (t & 63);
        auto& w = words_[offset(i, j) + (t >> 6)];
        if (v) w |= mask;
        else   w &= ~mask;
    }

    SpikeTrain cell(std::uint32_t i, std::uint32_t j) const
    {
        SpikeTrain train(timesteps_);
        const std::size_t off = offset(i, j);
        for (std::size_t w = 0; w < words_per_train_; ++w)
            train.words()[w] = words_[off + w];
        return train;
    }

    void set_cell(std::uint32_t i, std::uint32_t j, const SpikeTrain& train)
    {
        if (train.timesteps() != timesteps_)
            throw std::invalid_argument("SpikeTensor::set_cell: timestep mismatch");
        const std::size_t off = offset(i, j);
        for (std::size_t w = 0; w < words_per_train_; ++w)
            words_[off + w] = train.words()[w];
    }

    std::uint64_t count_ones() const
    {
        std::uint64_t n = 0;
        for (std::uint64_t w : words_) n += static_cast<std::uint64_t>(__builtin_popcountll(w));
        return n;
    }

    const std::vector<std::uint64_t>& words() const { return words_; }

    bool operator==(const SpikeTensor& o) const = default;

private:
    std::size_t offset(std::uint32_t i, std::uint32_t j) const
    {
        return (static_cast<std::size_t>(i) * cols_ + j) * words_per_train_;
    }

    std::uint32_t rows_ = 0, cols_ = 0, timesteps_ = 0;
    std::size_t words_per_train_ = 0;
    std::vector<std::uint64_t> words_;
};

} // namespace spikebench

#endif
