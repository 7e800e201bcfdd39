#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "spikebench/attention.hpp"
#include "spikebench/encoding.hpp"

using namespace spikebench;

namespace {

Eigen::MatrixXd random_unit_matrix(Eigen::Index rows, Eigen::Index cols,
                                   std::uint64_t seed)
{
    SplitMix64 rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform();
    return m;
}

Eigen::PermutationMatrix<Eigen::Dynamic> random_permutation(Eigen::Index n,
                                                            std::uint64_t seed)
{
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    SplitMix64 rng(seed);
    for (Eigen::Index i = 0; i + 1 < n; ++i)
        std::swap(idx[i], idx[i + rng.next() % (n - i)]);
    Eigen::PermutationMatrix<Eigen::Dynamic> p(n);
    for (Eigen::Index i = 0; i < n; ++i) p.indices()[i] = idx[i];
    return p;
}

} // namespace

TEST_CASE("float oracle structural cases")
{
    // Single row: softmax of a singleton is 1, output equals the row.
    Eigen::MatrixXd x1 = random_unit_matrix(1, 5, 1);
    CHECK((float_attention_oracle(x1, AttentionWeights::identity(5)) - x1).norm() ==
          doctest::Approx(0.0));

    // Identical rows produce identical output rows.
    Eigen::MatrixXd xr(3, 4);
    xr.row(0) = random_unit_matrix(1, 4, 2);
    xr.row(1) = xr.row(0);
    xr.row(2) = xr.row(0);
    const auto out = float_attention_oracle(xr, AttentionWeights::identity(4));
    CHECK((out.row(0) - out.row(1)).norm() == doctest::Approx(0.0));
    CHECK((out.row(0) - out.row(2)).norm() == doctest::Approx(0.0));

    // Hand-evaluated 2x2: logits (1,0) per row -> weights (e/(e+1), 1/(e+1)).
    Eigen::MatrixXd id2(2, 2);
    id2 << 1, 0, 0, 1;
    const auto o2 = float_attention_oracle(id2, AttentionWeights::identity(2));
    const double w = std::exp(1.0) / (std::exp(1.0) + 1.0); // 0.7311
    CHECK(o2(0, 0) == doctest::Approx(w).epsilon(1e-12));
    CHECK(o2(0, 1) == doctest::Approx(1.0 - w).epsilon(1e-12));
    CHECK(o2(1, 0) == doctest::Approx(1.0 - w).epsilon(1e-12));
    CHECK(o2(1, 1) == doctest::Approx(w).epsilon(1e-12));
}

TEST_CASE("float oracle permutation equivariance to machine precision")
{
    const Eigen::MatrixXd x = random_unit_matrix(7, 6, 3);
    const auto weights = AttentionWeights::identity(6);
    const auto p = random_permutation(7, 4);
    const Eigen::MatrixXd lhs = float_attention_oracle(p * x, weights);
    const Eigen::MatrixXd rhs = p * float_attention_oracle(x, weights);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("ssa_forward zero input and structural A bound")
{
    const auto weights = AttentionWeights::identity(4);
    SpikeTensor zeros(3, 4, 16);
    const auto out = ssa_forward(zeros, weights, LifParams{});
    CHECK(out.attn.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(out.rates.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(out.spikes->count_ones() == 0);
    CHECK(out.spikes_used == 0);

    // Random input: A entries always in [0, d_k]; rates in [0,1].
    const Eigen::MatrixXd x = random_unit_matrix(5, 4, 7);
    const auto enc = encode_matrix(x, 64, RngSeed{8});
    const auto out2 = ssa_forward(enc, weights, LifParams{});
    CHECK(out2.attn.minCoeff() >= 0.0);
    CHECK(out2.attn.maxCoeff() <= 4.0);
    CHECK(out2.rates.minCoeff() >= 0.0);
    CHECK(out2.rates.maxCoeff() <= 1.0);
    CHECK(out2.spikes_used > 0);
}

TEST_CASE("ssa_forward rejects mismatched dimensions")
{
    SpikeTensor s(2, 3, 8);
    CHECK_THROWS_AS(
        static_cast<void>(ssa_forward(s, AttentionWeights::identity(4), LifParams{})),
        std::invalid_argument);
}

TEST_CASE("ssa_forward A is zero iff S_Q or S_K is all-zero")
{
    // Weights that suppress K entirely: w_k = 0 keeps every K current at 0.
    AttentionWeights weights = AttentionWeights::identity(3);
    weights.w_k.setZero();
    const auto enc = encode_matrix(random_unit_matrix(4, 3, 9), 32, RngSeed{10});
    const auto out = ssa_forward(enc, weights, LifParams{});
    CHECK(out.attn.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("ssa_forward output approaches the long-T limit monotonically")
{
    const Eigen::MatrixXd x = random_unit_matrix(4, 8, 11);
    const auto weights = AttentionWeights::identity(8);
    const auto ref = ssa_forward(encode_matrix(x, 1u << 18, RngSeed{12}), weights,
                                 LifParams{});

    std::vector<double> medians;
    for (std::uint32_t timesteps : {4u, 8u, 16u, 32u, 64u}) {
        std::vector<double> dists;
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto out = ssa_forward(
                encode_matrix(x, timesteps, RngSeed{derive_seed(13, timesteps, s)}),
                weights, LifParams{});
            dists.push_back((out.rates - ref.rates).norm());
        }
        std::sort(dists.begin(), dists.end());
        medians.push_back(0.5 * (dists[9] + dists[10]));
    }
    for (std::size_t i = 1; i < medians.size(); ++i)
        CHECK(medians[i] < medians[i - 1] + 1e-12);
}

TEST_CASE("circuit_attention singleton token returns the decoded V row")
{
    const Eigen::MatrixXd x = random_unit_matrix(1, 6, 21);
    const auto out =
        circuit_attention(x, AttentionWeights::identity(6), 1u << 14, RngSeed{22});
    CHECK(out.attn(0, 0) == doctest::Approx(1.0));
    CHECK((out.rates - x).cwiseAbs().maxCoeff() <= 0.02);
    CHECK(out.spikes_used > 0);
}

TEST_CASE("circuit_attention approximates the float oracle")
{
    const Eigen::Index n = 4, d = 8;
    const Eigen::MatrixXd x = random_unit_matrix(n, d, 31);
    const auto weights = AttentionWeights::identity(d);
    const auto oracle = float_attention_oracle(x, weights);
    const auto out = circuit_attention(x, weights, 100000, RngSeed{32});
    CHECK((out.rates - oracle).norm() <= 0.05 * std::sqrt(double(n * d)));
    // Attention rows sum to exactly 1.
    for (Eigen::Index i = 0; i < n; ++i)
        CHECK(out.attn.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("circuit_attention error shrinks when T quadruples")
{
    const Eigen::Index n = 4, d = 8;
    const auto weights = AttentionWeights::identity(d);
    std::vector<double> err_small, err_big;
    for (std::uint64_t s = 0; s < 15; ++s) {
        const Eigen::MatrixXd x = random_unit_matrix(n, d, derive_seed(41, s));
        const auto oracle = float_attention_oracle(x, weights);
        for (std::uint32_t timesteps : {1u << 12, 1u << 14}) {
            const auto out =
                circuit_attention(x, weights, timesteps, RngSeed{derive_seed(42, s)});
            (timesteps == (1u << 12) ? err_small : err_big)
                .push_back((out.rates - oracle).norm());
        }
    }
    std::sort(err_small.begin(), err_small.end());
    std::sort(err_big.begin(), err_big.end());
    // Expected factor 2 reduction; accept a wide band around 1/sqrt(4).
    const double ratio = err_big[err_big.size() / 2] / err_small[err_small.size() / 2];
    CHECK(ratio >= 0.25);
    CHECK(ratio <= 0.85);
}

TEST_CASE("circuit_attention is bit-exactly permutation equivariant")
{
    const Eigen::Index n = 5, d = 6;
    const Eigen::MatrixXd x = random_unit_matrix(n, d, 51);
    const auto weights = AttentionWeights::identity(d);
    const auto p = random_permutation(n, 52);
    const auto base = circuit_attention(x, weights, 2048, RngSeed{53});
    const auto perm = circuit_attention(p * x, weights, 2048, RngSeed{53});

    const Eigen::MatrixXd expected_rates = p * base.rates;
    const Eigen::MatrixXd expected_attn =
        p * base.attn * p.transpose();
    // Bit-exact: identical doubles, not just close.
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < d; ++c)
            CHECK(perm.rates(i, c) == expected_rates(i, c));
        for (Eigen::Index j = 0; j < n; ++j)
            CHECK(perm.attn(i, j) == expected_attn(i, j));
    }
    CHECK(perm.spikes_used == base.spikes_used);
}

TEST_CASE("circuit_attention handles weights that leave [0,1] via range control")
{
    const Eigen::Index n = 4, d = 6;
    const Eigen::MatrixXd x = random_unit_matrix(n, d, 61);
    AttentionWeights weights = AttentionWeights::identity(d);
    weights.w_q *= 1.8;  // Q rows now exceed 1
    weights.w_k *= -0.7; // K rows now negative
    const auto oracle = float_attention_oracle(x, weights);
    const auto out = circuit_attention(x, weights, 1u << 14, RngSeed{62});
    CHECK((out.rates - oracle).norm() <= 0.12 * std::sqrt(double(n * d)));
}

TEST_CASE("circuit_attention fully spiking variant stays close to the oracle")
{
    const Eigen::Index n = 4, d = 6;
    const Eigen::MatrixXd x = random_unit_matrix(n, d, 71);
    const auto weights = AttentionWeights::identity(d);
    const auto oracle = float_attention_oracle(x, weights);
    CircuitAttentionConfig cfg;
    cfg.fully_spiking = true;
    const auto out = circuit_attention(x, weights, 1u << 15, RngSeed{72}, cfg);
    CHECK((out.rates - oracle).norm() <= 0.08 * std::sqrt(double(n * d)));
}

TEST_CASE("circuit_attention input validation")
{
    const auto weights = AttentionWeights::identity(3);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Constant(2, 3, 1.5);
    CHECK_THROWS_AS(static_cast<void>(circuit_attention(bad, weights, 64, RngSeed{0})),
                    std::invalid_argument);
    Eigen::MatrixXd x = Eigen::MatrixXd::Constant(2, 4, 0.5);
    CHECK_THROWS_AS(static_cast<void>(circuit_attention(x, weights, 64, RngSeed{0})),
                    std::invalid_argument);
    Eigen::MatrixXd ok = Eigen::MatrixXd::Constant(2, 3, 0.5);
    CHECK_THROWS_AS(static_cast<void>(circuit_attention(ok, weights, 0, RngSeed{0})),
                    std::invalid_argument);
}

TEST_CASE("ssa_forward determinism")
{
    const auto enc = encode_matrix(random_unit_matrix(3, 4, 81), 64, RngSeed{82});
    const auto weights = AttentionWeights::identity(4);
    const auto a = ssa_forward(enc, weights, LifParams{});
    const auto b = ssa_forward(enc, weights, LifParams{});
    CHECK((a.rates - b.rates).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(a.spikes_used == b.spikes_used);
    CHECK(*a.spikes == *b.spikes);
}
