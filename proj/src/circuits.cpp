#include "spikebench/circuits.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spikebench/rng.hpp"

namespace spikebench {

namespace {
constexpr double kThetaMin = 1e-3;      // floor for the adaptive threshold
constexpr double kThetaPrior = 8.0;     // pseudo-steps anchoring theta at v_th
constexpr double kReluLeak = 1e-3;      // (1 - beta) of the ReLU integrator
constexpr std::uint64_t kQueryTag = 0xA1;
constexpr std::uint64_t kKeyTag = 0xB2;
constexpr std::uint64_t kExpTag = 0xC3;
constexpr std::uint64_t kWtaTag = 0xD4;
} // namespace

void ExpCircuitConfig::validate() const
{
    if (!(m > 0.0)) throw std::invalid_argument("ExpCircuitConfig: M must be > 0");
    if (taylor_order < 1) throw std::invalid_argument("ExpCircuitConfig: J must be >= 1");
    if (timesteps == 0) throw std::invalid_argument("ExpCircuitConfig: T must be >= 1");
}

int ExpCircuitConfig::default_order(double m, double delta_target)
{
    if (!(delta_target > 0.0 && delta_target < 1.0))
        throw std::invalid_argument("ExpCircuitConfig: delta_target must lie in (0,1)");
    return static_cast<int>(std::ceil(2.0 * m + std::log(1.0 / delta_target)));
}

ExpCircuitConfig ExpCircuitConfig::for_target(double m, double delta_target,
                                              std::uint32_t timesteps)
{
    ExpCircuitConfig cfg;
    cfg.m = m;
    cfg.taylor_order = default_order(m, delta_target);
    cfg.timesteps = timesteps;
    cfg.validate();
    return cfg;
}

void WtaConfig::validate() const
{
    if (channels < 2) throw std::invalid_argument("WtaConfig: n must be >= 2");
    if (!(timesteps > transient))
        throw std::invalid_argument("WtaConfig: need T > T0 >= 0");
}

std::uint32_t WtaConfig::default_transient(std::uint32_t channels)
{
    return static_cast<std::uint32_t>(std::ceil(8.0 * std::log(static_cast<double>(channels))));
}

SpikeTrain coincidence_product(const std::vector<SpikeTrain>& trains)
{
    if (trains.empty())
        throw std::invalid_argument("coincidence_product: need at least one train");
    const std::uint32_t timesteps = trains.front().timesteps();
    for (const auto& tr : trains)
        if (tr.timesteps() != timesteps)
            throw std::invalid_argument("coincidence_product: mismatched train lengths");

    SpikeTrain out = trains.front();
    for (std::size_t i = 1; i < trains.size(); ++i) {
        auto& words = out.words();
        const auto& other = trains[i].words();
        for (std::size_t w = 0; w < words.size(); ++w)
            words[w] &= other[w];
    }
    out.mask_tail();
    return out;
}

CircuitEstimate exp_circuit(double z, const ExpCircuitConfig& cfg, RngSeed seed)
{
    cfg.validate();
    if (std::abs(z) > cfg.m)
        throw std::invalid_argument("exp_circuit: |z| exceeds the range bound M");

    const double rate = (z + cfg.m) / (2.0 * cfg.m);
    const std::uint32_t timesteps = cfg.timesteps;
    const double scale = std::exp(-cfg.m);

    // j = 0 term: empty coincidence is the all-ones train, rate exactly 1.
    double readout = 1.0;
    double var_acc = 0.0;
    std::uint64_t spikes = 0;
    double weight = 1.0;
    double joint = 1.0;

    // A j-way coincidence of independent rate-r encodings fires i.i.d.
    // Bernoulli(r^j) per timestep, so each detector output is sampled
    // directly at its joint rate instead of materializing the j input
    // streams; the readout distribution is identical and the cost drops
    // from O(J^2 T) to O(J T).
    for (int j = 1; j <= cfg.taylor_order; ++j) {
        weight *= 2.0 * cfg.m / j;
        joint *= rate;
        const auto detector =
            encode_rate(joint, timesteps,
                        RngSeed{derive_seed(seed.value, static_cast<std::uint64_t>(j))});
        const std::uint64_t coincidences = detector.count_ones();
        spikes += coincidences;
        const double rhat = static_cast<double>(coincidences) / timesteps;
        readout += weight * rhat;
        var_acc += weight * weight * rhat * (1.0 - rhat) / timesteps;
    }

    return {scale * readout, scale * std::sqrt(var_acc), spikes};
}

CircuitEstimate relu_circuit(double x, double range_bound, std::uint32_t timesteps,
                             RngSeed seed)
{
    (void)seed; // deterministic: constant current, no stochastic encoding
    if (!(range_bound > 0.0))
        throw std::invalid_argument("relu_circuit: B must be > 0");
    if (std::abs(x) > range_bound)
        throw std::invalid_argument("relu_circuit: |x| exceeds the range bound B");
    if (timesteps == 0)
        throw std::invalid_argument("relu_circuit: T must be >= 1");

    const LifParams params{1.0 - kReluLeak, 1.0};
    const double current = x / range_bound;
    LifState state;
    std::uint64_t spikes = 0;
    for (std::uint32_t t = 0; t < timesteps; ++t) {
        const auto res = lif_step(state, current, params);
        state = res.state;
        spikes += res.spike ? 1 : 0;
    }
    const double rate = static_cast<double>(spikes) / timesteps;
    return {range_bound * rate,
            range_bound * (1.0 / timesteps + kReluLeak), spikes};
}

std::vector<CircuitEstimate> wta_normalize(const std::vector<SpikeTrain>& inputs,
                                           const WtaConfig& cfg,
                                           const LifParams& params, RngSeed seed)
{
    (void)seed; // deterministic given the input trains
    cfg.validate();
    params.validate();
    if (inputs.size() != cfg.channels)
        throw std::invalid_argument("wta_normalize: input count != cfg.channels");
    const std::uint32_t timesteps = cfg.timesteps;
    std::uint64_t input_ones_total = 0;
    std::vector<std::uint64_t> input_ones(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].timesteps() != timesteps)
            throw std::invalid_argument("wta_normalize: train length != cfg.timesteps");
        input_ones[i] = inputs[i].count_ones();
        input_ones_total += input_ones[i];
    }
    if (input_ones_total == 0)
        throw std::invalid_argument("wta_normalize: all-zero inputs, normalizer undefined");

    const std::size_t n = inputs.size();
    const double theta_max = static_cast<double>(n);

    // The competing neurons are non-leaky accumulators whose shared firing
    // threshold tracks n times the running mean of the inhibitory signal
    // (1/n) sum_j s_j(t-1). A subtractive leak would silence low-rate
    // channels and destroy the proportional fixed point.
    std::vector<double> membrane(n, 0.0);
    std::vector<double> reset_amount(n, 0.0);
    std::vector<char> fired_prev(n, 0);
    std::vector<std::uint64_t> counts(n, 0);
    std::vector<std::uint64_t> all_spikes(n, 0);
    std::uint64_t spikes_cum = 0;

    for (std::uint32_t t = 0; t < timesteps; ++t) {
        const double theta =
            std::clamp((kThetaPrior * params.v_th + static_cast<double>(spikes_cum)) /
                           (kThetaPrior + t),
                       kThetaMin, theta_max);
        std::uint32_t fired_now = 0;
        for (std::size_t i = 0; i < n; ++i) {
            membrane[i] += inputs[i].get(t) ? 1.0 : 0.0;
            if (fired_prev[i]) membrane[i] -= reset_amount[i];
            const bool spike = membrane[i] >= theta;
            if (spike) {
                reset_amount[i] = theta;
                ++fired_now;
                ++all_spikes[i];
                if (t >= cfg.transient) ++counts[i];
            }
            fired_prev[i] = spike ? 1 : 0;
        }
        spikes_cum += fired_now;
    }

    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0)
        throw std::runtime_error("wta_normalize: no output spikes after transient");

    const double window = static_cast<double>(timesteps - cfg.transient);
    std::vector<CircuitEstimate> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double alpha = static_cast<double>(counts[i]) / total;
        out[i] = {alpha, std::sqrt(std::max(alpha * (1.0 - alpha), 0.0) / window),
                  all_spikes[i] + input_ones[i]};
    }
    return out;
}

CircuitEstimate inner_product_circuit(const std::vector<SpikeTrain>& q_trains,
                                      const std::vector<SpikeTrain>& k_trains)
{
    if (q_trains.empty() || q_trains.size() != k_trains.size())
        throw std::invalid_argument("inner_product_circuit: dimension mismatch");
    const std::uint32_t timesteps = q_trains.front().timesteps();

    double value = 0.0;
    double var_acc = 0.0;
    std::uint64_t spikes = 0;
    for (std::size_t d = 0; d < q_trains.size(); ++d) {
        if (q_trains[d].timesteps() != timesteps || k_trains[d].timesteps() != timesteps)
            throw std::invalid_argument("inner_product_circuit: train length mismatch");
        const auto prod = coincidence_product({q_trains[d], k_trains[d]});
        const std::uint64_t ones = prod.count_ones();
        const double p = static_cast<double>(ones) / timesteps;
        value += p;
        var_acc += p * (1.0 - p) / timesteps;
        spikes += q_trains[d].count_ones() + k_trains[d].count_ones() + ones;
    }
    return {value, std::sqrt(var_acc), spikes};
}

std::vector<CircuitEstimate> softmax_normalize_logits(
    const std::vector<CircuitEstimate>& logits, const SpikeSoftmaxConfig& cfg,
    const std::vector<std::uint64_t>& stage_seeds)
{
    const std::size_t n = logits.size();
    if (n < 2) throw std::invalid_argument("softmax_normalize_logits: need n >= 2");
    if (stage_seeds.size() != n)
        throw std::invalid_argument("softmax_normalize_logits: seed count != n");
    const bool windowed = cfg.shift_window > 0.0;
    const double m = windowed ? cfg.shift_window : cfg.m;
    if (!(m > 0.0))
        throw std::invalid_argument("softmax_normalize_logits: range bound not set");

    const std::uint32_t timesteps = cfg.timesteps;
    const int order = ExpCircuitConfig::default_order(m, cfg.delta_target);

    // Exponentials. In windowed mode logits are shifted by their max first;
    // the common shift cancels in the normalization.
    double shift = 0.0;
    if (windowed) {
        shift = logits[0].value;
        for (const auto& d : logits) shift = std::max(shift, d.value);
    }
    std::vector<CircuitEstimate> exps(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double z = std::clamp(logits[j].value - shift, -m, m);
        exps[j] = exp_circuit(z, ExpCircuitConfig{m, order, timesteps},
                              RngSeed{derive_seed(stage_seeds[j], kExpTag)});
    }

    // WTA normalization of the exponentials, rescaled by their max so every
    // drive rate lies in (0, 1]. Rescaling by a common factor leaves the
    // normalized weights unchanged.
    double emax = exps[0].value;
    for (const auto& e : exps) emax = std::max(emax, e.value);
    std::vector<SpikeTrain> drives;
    drives.reserve(n);
    for (std::size_t j = 0; j < n; ++j)
        drives.push_back(encode_rate(exps[j].value / emax, timesteps,
                                     RngSeed{derive_seed(stage_seeds[j], kWtaTag)}));
    // Cap the transient at T/2 so short-T runs (coarse grids) stay legal.
    WtaConfig wcfg{static_cast<std::uint32_t>(n), timesteps,
                   std::min(WtaConfig::default_transient(static_cast<std::uint32_t>(n)),
                            timesteps / 2)};
    const auto alphas = wta_normalize(drives, wcfg, LifParams{0.5, 1.0}, RngSeed{0});

    double esum = 0.0;
    for (const auto& e : exps) esum += e.value;

    std::vector<CircuitEstimate> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double alpha = alphas[j].value;
        // Delta-method propagation of the exponential-stage noise, folded
        // with the WTA count noise.
        const double sig_j =
            std::hypot(exps[j].stderr_, exps[j].value * logits[j].stderr_);
        double cross = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j) continue;
            const double s =
                std::hypot(exps[i].stderr_, exps[i].value * logits[i].stderr_);
            cross += s * s;
        }
        const double prop =
            std::sqrt((1.0 - alpha) * (1.0 - alpha) * sig_j * sig_j +
                      alpha * alpha * cross) /
            esum;
        out[j].value = alpha;
        out[j].stderr_ = std::hypot(alphas[j].stderr_, prop);
        out[j].spikes_used = logits[j].spikes_used + exps[j].spikes_used +
                             alphas[j].spikes_used;
    }
    return out;
}

std::vector<CircuitEstimate> spike_softmax(const std::vector<double>& query,
                                           const std::vector<std::vector<double>>& keys,
                                           const SpikeSoftmaxConfig& cfg, RngSeed seed)
{
    const std::size_t n = keys.size();
    const std::size_t dk = query.size();
    if (n < 2) throw std::invalid_argument("spike_softmax: need n >= 2 keys");
    if (dk == 0) throw std::invalid_argument("spike_softmax: empty query");
    if (!cfg.key_seeds.empty() && cfg.key_seeds.size() != n)
        throw std::invalid_argument("spike_softmax: key_seeds size != n");
    auto check_range = [](double v) {
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("spike_softmax: entries must lie in [0,1]");
    };
    for (double v : query) check_range(v);
    for (const auto& k : keys) {
        if (k.size() != dk)
            throw std::invalid_argument("spike_softmax: key dimension mismatch");
        for (double v : k) check_range(v);
    }

    const std::uint32_t timesteps = cfg.timesteps;
    const std::uint64_t qseed =
        cfg.has_query_seed ? cfg.query_seed : derive_seed(seed.value, kQueryTag);
    std::vector<std::uint64_t> kseeds(n);
    for (std::size_t j = 0; j < n; ++j)
        kseeds[j] = cfg.key_seeds.empty() ? derive_seed(seed.value, kKeyTag, j)
                                          : cfg.key_seeds[j];

    std::vector<SpikeTrain> q_trains;
    q_trains.reserve(dk);
    for (std::size_t d = 0; d < dk; ++d)
        q_trains.push_back(encode_rate(query[d], timesteps,
                                       RngSeed{derive_seed(qseed, kQueryTag, d)}));

    // Stage 1: dot products via coincidence.
    std::vector<CircuitEstimate> dots(n);
    std::vector<std::uint64_t> stage_seeds(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<SpikeTrain> k_trains;
        k_trains.reserve(dk);
        for (std::size_t d = 0; d < dk; ++d)
            k_trains.push_back(encode_rate(keys[j][d], timesteps,
                                           RngSeed{derive_seed(kseeds[j], kKeyTag, d)}));
        dots[j] = inner_product_circuit(q_trains, k_trains);
        stage_seeds[j] = qseed ^ kseeds[j];
    }

    SpikeSoftmaxConfig stage_cfg = cfg;
    if (stage_cfg.m <= 0.0) stage_cfg.m = static_cast<double>(dk);
    stage_cfg.timesteps = timesteps;
    return softmax_normalize_logits(dots, stage_cfg, stage_seeds);
}

} // namespace spikebench
