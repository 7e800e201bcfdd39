#ifndef SPIKEBENCH_CIRCUITS_HPP
#define SPIKEBENCH_CIRCUITS_HPP

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "spikebench/lif.hpp"
#include "spikebench/spike.hpp"

namespace spikebench {

// Result of a stochastic spike circuit: the readout, its estimated standard
// error, and the number of spike events generated to produce it.
struct CircuitEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::uint64_t spikes_used = 0;
};

inline nlohmann::json to_json(const CircuitEstimate& e)
{
    return nlohmann::json{{"value", e.value},
                          {"stderr", e.stderr_},
                          {"spikes_used", e.spikes_used}};
}

// Taylor-truncation exponential circuit configuration. Inputs live in
// [-M, M]; J is the truncation order; weights are w_j = (2M)^j / j!.
struct ExpCircuitConfig {
    double m = 1.0;
    int taylor_order = 8;
    std::uint32_t timesteps = 1024;

    void validate() const;

    // J = ceil(2M + ln(1/delta)) covers the series truncation budget.
    static int default_order(double m, double delta_target);
    static ExpCircuitConfig for_target(double m, double delta_target,
                                       std::uint32_t timesteps);
};

// Lateral-inhibition normalizer configuration. T0 transient steps are
// discarded before the rate readout; default T0 = ceil(8 ln n).
struct WtaConfig {
    std::uint32_t channels = 2;
    std::uint32_t timesteps = 1024;
    std::uint32_t transient = 0;

    void validate() const;
    static std::uint32_t default_transient(std::uint32_t channels);
};

// Per-timestep AND of the input trains. For independent inputs with rates
// r_i the expected output rate is the product of the r_i.
SpikeTrain coincidence_product(const std::vector<SpikeTrain>& trains);

// Estimates e^z from j-way coincidences of independent rate-(z+M)/(2M)
// encodings, j = 0..J. The raw weighted readout targets the truncated
// series for e^{z+M}; the returned value carries the e^{-M} readout scale
// so it converges to e^z as T grows.
CircuitEstimate exp_circuit(double z, const ExpCircuitConfig& cfg, RngSeed seed);

// max(0, x) on [-B, B] via a near-perfect-integrator LIF driven with
// constant current x/B; readout is B times the firing rate. Exact 0 for
// every x <= 0.
CircuitEstimate relu_circuit(double x, double range_bound, std::uint32_t timesteps,
                             RngSeed seed);

// Normalizes the input rates to alpha_i = e_i / sum_j e_j with n competing
// integrate-and-fire neurons under a shared inhibitory feedback signal
// (1/n) sum_j s_j(t-1). Outputs sum to exactly 1.
std::vector<CircuitEstimate> wta_normalize(const std::vector<SpikeTrain>& inputs,
                                           const WtaConfig& cfg,
                                           const LifParams& params, RngSeed seed);

// q . k as a sum of per-dimension coincidence rates.
CircuitEstimate inner_product_circuit(const std::vector<SpikeTrain>& q_trains,
                                      const std::vector<SpikeTrain>& k_trains);

struct SpikeSoftmaxConfig {
    std::uint32_t timesteps = 1024;
    double delta_target = 1e-4;
    // Exponential range bound; 0 lets spike_softmax default to M = d_k
    // (the max attainable dot product with entries in [0,1]).
    double m = 0.0;
    // A positive value switches to max-shifted logits clamped into
    // [-window, 0]; needed when the dot-product range is wide, since the
    // exponential-stage variance grows like e^{2M}.
    double shift_window = 0.0;
    // Optional per-key seeds (content-bound callers); empty derives from
    // the call seed by index.
    std::vector<std::uint64_t> key_seeds;
    std::uint64_t query_seed = 0;
    bool has_query_seed = false;
};

// Exponential + WTA stages on already-estimated logits. stage_seeds has one
// entry per logit; logits[j].stderr_ feeds the error propagation.
std::vector<CircuitEstimate> softmax_normalize_logits(
    const std::vector<CircuitEstimate>& logits, const SpikeSoftmaxConfig& cfg,
    const std::vector<std::uint64_t>& stage_seeds);

// softmax(q . k_j) over keys: inner-product circuits -> exponential
// circuits -> WTA normalization. Returned weights sum to exactly 1.
std::vector<CircuitEstimate> spike_softmax(const std::vector<double>& query,
                                           const std::vector<std::vector<double>>& keys,
                                           const SpikeSoftmaxConfig& cfg, RngSeed seed);

} // namespace spikebench

#endif
