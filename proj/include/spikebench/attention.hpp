#ifndef SPIKEBENCH_ATTENTION_HPP
#define SPIKEBENCH_ATTENTION_HPP

#include <Eigen/Dense>
#include <optional>

#include "spikebench/circuits.hpp"
#include "spikebench/encoding.hpp"
#include "spikebench/lif.hpp"
#include "spikebench/spike.hpp"

namespace spikebench {

struct AttentionWeights {
    Eigen::MatrixXd w_q, w_k, w_v; // each d x d_k

    static AttentionWeights identity(Eigen::Index d)
    {
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
        return {id, id, id};
    }

    void validate() const;
};

struct AttentionOutput {
    Eigen::MatrixXd rates;               // n x d_k time-averaged view
    Eigen::MatrixXd attn;                // attention matrix (n x n)
    std::optional<SpikeTensor> spikes;   // output spike record, when spiking
    std::uint64_t spikes_used = 0;
};

// Exact double-precision softmax(Q K^T) V; the ground truth for every
// approximation experiment. With identity weights this is softmax(X X^T) X.
Eigen::MatrixXd float_attention_oracle(const Eigen::MatrixXd& x,
                                       const AttentionWeights& weights);

struct SsaConfig {
    // Input-current scale for the output spiking layer; 0 defaults to
    // 1/d_k, since attention-matrix entries reach d_k and an unscaled
    // current saturates firing.
    double output_current_scale = 0.0;
};

// Spikformer-style spiking self-attention: S^Q/S^K/S^V from per-timestep
// LIF layers with weights shared across t and membrane state carried
// across timesteps; A is the time-averaged sum of binary outer products.
AttentionOutput ssa_forward(const SpikeTensor& s_x, const AttentionWeights& weights,
                            const LifParams& params, const SsaConfig& cfg = {});

struct CircuitAttentionConfig {
    // Max-shift window for the exponential stage (see SpikeSoftmaxConfig).
    double shift_window = 8.0;
    double delta_target = 1e-4;
    // Mixes re-encoded attention weights with V spike trains through
    // coincidence detectors instead of real-valued mixing.
    bool fully_spiking = false;
};

// The constructed approximation of softmax(Q K^T) V: per query row an
// inner-product / exponential / WTA pipeline over the keys, then a convex
// mix of the decoded V rows. Sub-seeds are bound to row content, so
// permuting the tokens permutes the output bit-exactly.
AttentionOutput circuit_attention(const Eigen::MatrixXd& x,
                                  const AttentionWeights& weights,
                                  std::uint32_t timesteps, RngSeed seed,
                                  const CircuitAttentionConfig& cfg = {});

} // namespace spikebench

#endif
