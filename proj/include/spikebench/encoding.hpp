#ifndef SPIKEBENCH_ENCODING_HPP
#define SPIKEBENCH_ENCODING_HPP

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "spikebench/spike.hpp"

namespace spikebench {

// Rate-encodes an n x d matrix with entries in [0,1]. Entry (i,j) gets its
// own sub-seed derived from (seed, i, j), so decoding any cell recovers
// X(i,j) in expectation and runs reproduce across machines.
inline SpikeTensor encode_matrix(const Eigen::MatrixXd& x, std::uint32_t timesteps,
                                 RngSeed seed)
{
    const auto n = static_cast<std::uint32_t>(x.rows());
    const auto d = static_cast<std::uint32_t>(x.cols());
    SpikeTensor tensor(n, d, timesteps);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < d; ++j) {
            const double v = x(i, j);
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument(
                    "encode_matrix: entry (" + std::to_string(i) + "," +
                    std::to_string(j) + ") outside [0,1]");
            tensor.set_cell(i, j,
                            encode_rate(v, timesteps,
                                        RngSeed{derive_seed(seed.value, i, j)}));
        }
    }
    return tensor;
}

inline Eigen::MatrixXd decode_tensor(const SpikeTensor& tensor)
{
    Eigen::MatrixXd out(tensor.rows(), tensor.cols());
    for (std::uint32_t i = 0; i < tensor.rows(); ++i)
        for (std::uint32_t j = 0; j < tensor.cols(); ++j)
            out(i, j) = decode_rate(tensor.cell(i, j));
    return out;
}

// Empirical tail probabilities P[|decoded - x| > delta] over repeated
// encodings, one entry per delta in the grid. The Chernoff reference is
// 2*exp(-2*T*delta^2).
inline std::vector<double> concentration_trial(double x, std::uint32_t timesteps,
                                               std::uint32_t trials,
                                               const std::vector<double>& deltas,
                                               RngSeed seed)
{
    if (trials == 0)
        throw std::invalid_argument("concentration_trial: trials must be >= 1");
    if (!(x >= 0.0 && x <= 1.0))
        throw std::invalid_argument("concentration_trial: x must lie in [0,1]");

    std::vector<std::uint64_t> exceed(deltas.size(), 0);
    for (std::uint32_t k = 0; k < trials; ++k) {
        const auto train =
            encode_rate(x, timesteps, RngSeed{derive_seed(seed.value, k)});
        const double dev = std::abs(decode_rate(train) - x);
        for (std::size_t m = 0; m < deltas.size(); ++m)
            if (dev > deltas[m]) ++exceed[m];
    }
    std::vector<double> tails(deltas.size());
    for (std::size_t m = 0; m < deltas.size(); ++m)
        tails[m] = static_cast<double>(exceed[m]) / trials;
    return tails;
}

inline double chernoff_tail_bound(std::uint32_t timesteps, double delta)
{
    return 2.0 * std::exp(-2.0 * timesteps * delta * delta);
}

// Explicit form of the Hoeffding timestep floor: T >= (1/(2 delta^2)) ln(2/delta)
// guarantees tail < delta. The asymptotic statement is T0 = O(1/delta^2).
inline double concentration_timestep_floor(double delta)
{
    return std::log(2.0 / delta) / (2.0 * delta * delta);
}

} // namespace spikebench

#endif
