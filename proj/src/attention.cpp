#include "spikebench/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spikebench {

namespace {
constexpr std::uint64_t kQueryRowTag = 0x71;
constexpr std::uint64_t kKeyRowTag = 0x72;
constexpr std::uint64_t kValueRowTag = 0x73;
constexpr std::uint64_t kMixTag = 0x74;

// Affine map pulling a weight-projected matrix into [0,1]; recorded so the
// dot-product readout can invert it analytically. Clipping is refused: it
// would bias the approximation errors.
struct AffineRange {
    double offset = 0.0;
    double scale = 1.0;

    static AffineRange fit(const Eigen::MatrixXd& m)
    {
        const double lo = m.minCoeff();
        const double hi = m.maxCoeff();
        if (lo >= 0.0 && hi <= 1.0) return {0.0, 1.0};
        const double span = hi - lo;
        return {lo, span > 0.0 ? span : 1.0};
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& m) const
    {
        return (m.array() - offset) / scale;
    }
};

std::uint64_t row_seed(std::uint64_t base, std::uint64_t stage_tag,
                       const Eigen::MatrixXd& scaled, Eigen::Index row)
{
    std::vector<double> buf(scaled.cols());
    for (Eigen::Index c = 0; c < scaled.cols(); ++c) buf[c] = scaled(row, c);
    return derive_seed(base ^ content_hash(buf), stage_tag);
}

std::vector<SpikeTrain> encode_row(const Eigen::MatrixXd& scaled, Eigen::Index row,
                                   std::uint32_t timesteps, std::uint64_t seed)
{
    std::vector<SpikeTrain> trains;
    trains.reserve(scaled.cols());
    for (Eigen::Index c = 0; c < scaled.cols(); ++c)
        trains.push_back(encode_rate(scaled(row, c), timesteps,
                                     RngSeed{derive_seed(seed, static_cast<std::uint64_t>(c))}));
    return trains;
}

std::uint64_t ones_of(const std::vector<SpikeTrain>& trains)
{
    std::uint64_t n = 0;
    for (const auto& t : trains) n += t.count_ones();
    return n;
}

} // namespace

void AttentionWeights::validate() const
{
    if (w_q.size() == 0 || w_k.size() == 0 || w_v.size() == 0)
        throw std::invalid_argument("AttentionWeights: empty matrix");
    if (w_q.rows() != w_k.rows() || w_q.rows() != w_v.rows() ||
        w_q.cols() != w_k.cols() || w_q.cols() != w_v.cols())
        throw std::invalid_argument("AttentionWeights: inconsistent dims");
    if (!w_q.allFinite() || !w_k.allFinite() || !w_v.allFinite())
        throw std::invalid_argument("AttentionWeights: non-finite entries");
}

Eigen::MatrixXd float_attention_oracle(const Eigen::MatrixXd& x,
                                       const AttentionWeights& weights)
{
    weights.validate();
    if (x.cols() != weights.w_q.rows())
        throw std::invalid_argument("float_attention_oracle: dimension mismatch");
    const Eigen::MatrixXd q = x * weights.w_q;
    const Eigen::MatrixXd k = x * weights.w_k;
    const Eigen::MatrixXd v = x * weights.w_v;

    Eigen::MatrixXd out(x.rows(), v.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Eigen::VectorXd logits = k * q.row(i).transpose();
        const double m = logits.maxCoeff();
        Eigen::VectorXd w = (logits.array() - m).exp();
        w /= w.sum();
        out.row(i) = w.transpose() * v;
    }
    return out;
}

AttentionOutput ssa_forward(const SpikeTensor& s_x, const AttentionWeights& weights,
                            const LifParams& params, const SsaConfig& cfg)
{
    weights.validate();
    params.validate();
    const auto n = static_cast<Eigen::Index>(s_x.rows());
    const auto d = static_cast<Eigen::Index>(s_x.cols());
    const auto dk = weights.w_q.cols();
    const std::uint32_t timesteps = s_x.timesteps();
    if (d != weights.w_q.rows())
        throw std::invalid_argument("ssa_forward: input dim != weight rows");

    SpikeTensor s_q(n, dk, timesteps), s_k(n, dk, timesteps), s_v(n, dk, timesteps);
    std::vector<LifState> st_q(n * dk), st_k(n * dk), st_v(n * dk);

    Eigen::MatrixXd attn = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd v_mean = Eigen::MatrixXd::Zero(n, dk);
    Eigen::MatrixXd xt(n, d), qt(n, dk), kt(n, dk), vt(n, dk);

    for (std::uint32_t t = 0; t < timesteps; ++t) {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                xt(i, j) = s_x.get(i, j, t) ? 1.0 : 0.0;
        const Eigen::MatrixXd cur_q = xt * weights.w_q;
        const Eigen::MatrixXd cur_k = xt * weights.w_k;
        const Eigen::MatrixXd cur_v = xt * weights.w_v;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index c = 0; c < dk; ++c) {
                const auto idx = static_cast<std::size_t>(i * dk + c);
                auto rq = lif_step(st_q[idx], cur_q(i, c), params);
                st_q[idx] = rq.state;
                qt(i, c) = rq.spike ? 1.0 : 0.0;
                if (rq.spike) s_q.set(i, c, t, true);
                auto rk = lif_step(st_k[idx], cur_k(i, c), params);
                st_k[idx] = rk.state;
                kt(i, c) = rk.spike ? 1.0 : 0.0;
                if (rk.spike) s_k.set(i, c, t, true);
                auto rv = lif_step(st_v[idx], cur_v(i, c), params);
                st_v[idx] = rv.state;
                vt(i, c) = rv.spike ? 1.0 : 0.0;
                if (rv.spike) s_v.set(i, c, t, true);
            }
        }
        attn += qt * kt.transpose();
        v_mean += vt;
    }
    attn /= static_cast<double>(timesteps);
    v_mean /= static_cast<double>(timesteps);

    const double scale =
        cfg.output_current_scale > 0.0 ? cfg.output_current_scale : 1.0 / dk;
    const Eigen::MatrixXd out_current = (attn * v_mean) * scale;

    SpikeTensor s_out(n, dk, timesteps);
    Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(n, dk);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < dk; ++c) {
            LifState st;
            std::uint32_t fired = 0;
            for (std::uint32_t t = 0; t < timesteps; ++t) {
                const auto r = lif_step(st, out_current(i, c), params);
                st = r.state;
                if (r.spike) {
                    s_out.set(i, c, t, true);
                    ++fired;
                }
            }
            rates(i, c) = static_cast<double>(fired) / timesteps;
        }
    }

    AttentionOutput out;
    out.rates = std::move(rates);
    out.attn = std::move(attn);
    out.spikes_used = s_q.count_ones() + s_k.count_ones() + s_v.count_ones() +
                      s_out.count_ones();
    out.spikes = std::move(s_out);
    return out;
}

AttentionOutput circuit_attention(const Eigen::MatrixXd& x,
                                  const AttentionWeights& weights,
                                  std::uint32_t timesteps, RngSeed seed,
                                  const CircuitAttentionConfig& cfg)
{
    weights.validate();
    if (x.rows() < 1 || x.cols() != weights.w_q.rows())
        throw std::invalid_argument("circuit_attention: dimension mismatch");
    if (!(x.minCoeff() >= 0.0 && x.maxCoeff() <= 1.0))
        throw std::invalid_argument("circuit_attention: entries must lie in [0,1]");
    if (timesteps == 0)
        throw std::invalid_argument("circuit_attention: T must be >= 1");

    const Eigen::Index n = x.rows();
    const Eigen::Index dk = weights.w_q.cols();

    const Eigen::MatrixXd q = x * weights.w_q;
    const Eigen::MatrixXd k = x * weights.w_k;
    const Eigen::MatrixXd v = x * weights.w_v;
    const AffineRange aq = AffineRange::fit(q);
    const AffineRange ak = AffineRange::fit(k);
    const AffineRange av = AffineRange::fit(v);
    const Eigen::MatrixXd qs = aq.forward(q);
    const Eigen::MatrixXd ks = ak.forward(k);
    const Eigen::MatrixXd vs = av.forward(v);

    // Row seeds bound to content, not position: permuting the tokens
    // permutes the spike streams with them.
    std::vector<std::uint64_t> qseeds(n), kseeds(n), vseeds(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        qseeds[i] = row_seed(seed.value, kQueryRowTag, qs, i);
        kseeds[i] = row_seed(seed.value, kKeyRowTag, ks, i);
        vseeds[i] = row_seed(seed.value, kValueRowTag, vs, i);
    }

    std::vector<std::vector<SpikeTrain>> k_trains(n), v_trains(n);
    std::vector<double> k_rowsum(n);
    Eigen::MatrixXd v_dec(n, dk);
    std::uint64_t spikes_total = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        k_trains[j] = encode_row(ks, j, timesteps, kseeds[j]);
        v_trains[j] = encode_row(vs, j, timesteps, vseeds[j]);
        spikes_total += ones_of(v_trains[j]);
        double s = 0.0;
        for (const auto& tr : k_trains[j]) s += decode_rate(tr);
        k_rowsum[j] = s;
        for (Eigen::Index c = 0; c < dk; ++c)
            v_dec(j, c) = av.offset + av.scale * decode_rate(v_trains[j][c]);
    }

    // Canonical key order by content hash keeps the output mix bit-exact
    // under token permutations.
    std::vector<Eigen::Index> key_order(n);
    std::iota(key_order.begin(), key_order.end(), Eigen::Index{0});
    std::sort(key_order.begin(), key_order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return kseeds[a] < kseeds[b]; });

    AttentionOutput out;
    out.rates = Eigen::MatrixXd::Zero(n, dk);
    out.attn = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto q_tr = encode_row(qs, i, timesteps, qseeds[i]);
        if (n == 1) {
            // Softmax of a singleton is 1; the output is the decoded V row.
            out.attn(0, 0) = 1.0;
            out.rates.row(0) = v_dec.row(0);
            spikes_total += ones_of(q_tr);
            continue;
        }
        double q_rowsum = 0.0;
        for (const auto& tr : q_tr) q_rowsum += decode_rate(tr);

        std::vector<CircuitEstimate> logits(n);
        std::vector<std::uint64_t> stage_seeds(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto ip = inner_product_circuit(q_tr, k_trains[j]);
            // Invert the affine range control analytically:
            // q.k = cq*ck*(qs.ks) + cq*ak*sum(qs) + ck*aq*sum(ks) + dk*aq*ak
            logits[j].value = aq.scale * ak.scale * ip.value +
                              aq.scale * ak.offset * q_rowsum +
                              ak.scale * aq.offset * k_rowsum[j] +
                              static_cast<double>(dk) * aq.offset * ak.offset;
            logits[j].stderr_ = aq.scale * ak.scale * ip.stderr_;
            logits[j].spikes_used = ip.spikes_used;
            stage_seeds[j] = qseeds[i] ^ kseeds[j];
        }

        SpikeSoftmaxConfig scfg;
        scfg.timesteps = timesteps;
        scfg.delta_target = cfg.delta_target;
        scfg.shift_window = cfg.shift_window > 0.0 ? cfg.shift_window
                                                   : static_cast<double>(dk);
        const auto alphas = softmax_normalize_logits(logits, scfg, stage_seeds);

        for (Eigen::Index j = 0; j < n; ++j) {
            out.attn(i, j) = alphas[j].value;
            spikes_total += alphas[j].spikes_used;
        }

        if (!cfg.fully_spiking) {
            for (Eigen::Index j : key_order)
                out.rates.row(i) += alphas[j].value * v_dec.row(j);
        } else {
            // Spiking value mix: coincidence of a re-encoded weight train
            // with each V train estimates alpha_j * v_j.
            Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(dk);
            for (Eigen::Index j : key_order) {
                const auto a_tr = encode_rate(
                    alphas[j].value, timesteps,
                    RngSeed{derive_seed(stage_seeds[j], kMixTag)});
                spikes_total += a_tr.count_ones();
                for (Eigen::Index c = 0; c < dk; ++c) {
                    const auto prod = coincidence_product({a_tr, v_trains[j][c]});
                    const std::uint64_t ones = prod.count_ones();
                    spikes_total += ones;
                    acc(c) += static_cast<double>(ones) / timesteps;
                }
            }
            out.rates.row(i) =
                Eigen::RowVectorXd::Constant(dk, av.offset) + av.scale * acc;
        }
    }
    out.spikes_used = spikes_total;
    return out;
}

} // namespace spikebench
