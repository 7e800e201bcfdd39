#include "spikebench/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spikebench {

namespace {

std::uint64_t checked_ceil_count(double value, const char* what)
{
    if (!std::isfinite(value) || value > 9.0e18)
        throw std::invalid_argument(std::string(what) + ": bound exceeds representable count");
    return static_cast<std::uint64_t>(std::ceil(value));
}

// Descending squared-singular-value spectrum of a centered matrix, via the
// smaller Gram side when it fits, otherwise a randomized range finder
// (oversampling 10, two power iterations).
std::vector<double> variance_spectrum(const Eigen::MatrixXd& centered, RngSeed seed)
{
    const Eigen::Index small_side = std::min(centered.rows(), centered.cols());
    std::vector<double> spectrum;
    if (small_side <= 4096) {
        Eigen::MatrixXd gram;
        if (centered.cols() <= centered.rows())
            gram = centered.transpose() * centered;
        else
            gram = centered * centered.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
        const auto& ev = solver.eigenvalues(); // ascending
        spectrum.reserve(ev.size());
        for (Eigen::Index i = ev.size() - 1; i >= 0; --i)
            spectrum.push_back(std::max(ev(i), 0.0));
    } else {
        const Eigen::Index sketch = std::min<Eigen::Index>(small_side, 1024) + 10;
        SplitMix64 rng(seed);
        Eigen::MatrixXd omega(centered.cols(), sketch);
        for (Eigen::Index i = 0; i < omega.rows(); ++i)
            for (Eigen::Index j = 0; j < omega.cols(); ++j) {
                // Box-Muller normal draw from the deterministic stream.
                const double u1 = std::max(rng.uniform(), 1e-300);
                const double u2 = rng.uniform();
                omega(i, j) = std::sqrt(-2.0 * std::log(u1)) *
                              std::cos(2.0 * M_PI * u2);
            }
        Eigen::MatrixXd y = centered * omega;
        for (int it = 0; it < 2; ++it) {
            y = centered * (centered.transpose() * y);
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
        Eigen::MatrixXd qmat =
            qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), sketch);
        Eigen::MatrixXd b = qmat.transpose() * centered;
        Eigen::BDCSVD<Eigen::MatrixXd> svd(b);
        for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
            const double s = svd.singularValues()(i);
            spectrum.push_back(s * s);
        }
    }
    return spectrum;
}

int count_components(const std::vector<double>& spectrum, double total,
                     double threshold)
{
    double cum = 0.0;
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        cum += spectrum[k];
        if (cum >= threshold * total) return static_cast<int>(k + 1);
    }
    return -1;
}

} // namespace

void BoundInputs::validate() const
{
    if (!(lipschitz > 0.0))
        throw std::invalid_argument("BoundInputs: L_f must be > 0");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("BoundInputs: eps must be in (0,1)");
    if (tokens == 0 || dims == 0)
        throw std::invalid_argument("BoundInputs: n*d must be >= 1");
    if (d_eff) {
        const double nd = static_cast<double>(tokens) * static_cast<double>(dims);
        if (!(*d_eff >= 1.0 && *d_eff <= nd))
            throw std::invalid_argument("BoundInputs: need 1 <= d_eff <= n*d");
    }
}

std::uint64_t lower_bound_spikes(const BoundInputs& inputs)
{
    inputs.validate();
    const double nd = static_cast<double>(inputs.tokens) * static_cast<double>(inputs.dims);
    return checked_ceil_count(
        inputs.lipschitz * inputs.lipschitz * nd / (inputs.epsilon * inputs.epsilon),
        "lower_bound_spikes");
}

std::uint64_t input_dependent_bound(const BoundInputs& inputs)
{
    inputs.validate();
    if (!inputs.d_eff)
        throw std::invalid_argument("input_dependent_bound: d_eff missing");
    return checked_ceil_count(inputs.lipschitz * inputs.lipschitz * *inputs.d_eff /
                                  (inputs.epsilon * inputs.epsilon),
                              "input_dependent_bound");
}

double energy_estimate(std::uint64_t spikes, double e_sop_joules)
{
    if (!(e_sop_joules >= 0.0))
        throw std::invalid_argument("energy_estimate: e_sop must be >= 0");
    return static_cast<double>(spikes) * e_sop_joules;
}

std::uint64_t design_rule_timesteps(double d_eff, double epsilon, double c)
{
    if (!(d_eff >= 1.0))
        throw std::invalid_argument("design_rule_timesteps: d_eff must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("design_rule_timesteps: eps must be in (0,1)");
    if (!(c > 0.0))
        throw std::invalid_argument("design_rule_timesteps: C must be > 0");
    return checked_ceil_count(c * d_eff / (epsilon * epsilon), "design_rule_timesteps");
}

BoundReport bound_report(const BoundInputs& inputs, double e_sop_joules, double c)
{
    BoundReport report;
    report.worst_case_spikes = lower_bound_spikes(inputs);
    std::uint64_t governing = report.worst_case_spikes;
    double rule_dim = static_cast<double>(inputs.tokens) * static_cast<double>(inputs.dims);
    if (inputs.d_eff) {
        report.input_dependent_spikes = input_dependent_bound(inputs);
        report.compression_ratio =
            static_cast<double>(inputs.tokens) * static_cast<double>(inputs.dims) /
            *inputs.d_eff;
        governing = *report.input_dependent_spikes;
        rule_dim = *inputs.d_eff;
    }
    report.energy_joules = energy_estimate(governing, e_sop_joules);
    report.recommended_timesteps = design_rule_timesteps(rule_dim, inputs.epsilon, c);
    report.constant_c = c;
    return report;
}

nlohmann::json to_json(const BoundReport& report)
{
    nlohmann::json j{
        {"worst_case_spikes", report.worst_case_spikes},
        {"energy_joules", report.energy_joules},
        {"recommended_timesteps", report.recommended_timesteps},
        {"constant_C", report.constant_c},
        {"constant_C_ci95", {report.constant_c_low, report.constant_c_high}},
        {"constant_convention", "order bound, constant convention: 1"},
    };
    if (report.input_dependent_spikes)
        j["input_dependent_spikes"] = *report.input_dependent_spikes;
    if (report.compression_ratio)
        j["compression_ratio"] = *report.compression_ratio;
    return j;
}

EffDimReport effective_dimension(const Eigen::MatrixXd& data, const EffDimOptions& opts)
{
    const Eigen::Index samples = data.rows();
    const Eigen::Index features = data.cols();
    if (samples < 2 || features < 1)
        throw std::invalid_argument("effective_dimension: need >= 2 samples");
    if (!(opts.variance_threshold > 0.0 && opts.variance_threshold <= 1.0))
        throw std::invalid_argument("effective_dimension: threshold must be in (0,1]");
    if (opts.subsamples < 1)
        throw std::invalid_argument("effective_dimension: need >= 1 subsample");
    if (!(opts.subsample_fraction > 0.0 && opts.subsample_fraction <= 1.0))
        throw std::invalid_argument("effective_dimension: fraction must be in (0,1]");

    auto run_once = [&](const Eigen::MatrixXd& subset,
                        RngSeed seed) -> std::pair<int, std::vector<double>> {
        Eigen::MatrixXd centered = subset.rowwise() - subset.colwise().mean();
        auto spectrum = variance_spectrum(centered, seed);
        const double total =
            std::accumulate(spectrum.begin(), spectrum.end(), 0.0);
        const double scale = centered.cwiseAbs().maxCoeff();
        if (total <= 1e-24 * std::max(1.0, scale))
            throw std::invalid_argument(
                "effective_dimension: degenerate (constant) data");
        const int k = count_components(spectrum, total, opts.variance_threshold);
        if (k < 0)
            throw std::runtime_error(
                "effective_dimension: computed spectrum does not reach the threshold");
        return {k, std::move(spectrum)};
    };

    EffDimReport report;
    report.variance_threshold = opts.variance_threshold;
    report.subsample_fraction = opts.subsample_fraction;
    report.subsample_count = opts.subsamples;

    // Full-data run supplies the reported spectrum.
    auto [k_full, full_spectrum] = run_once(data, RngSeed{derive_seed(opts.seed.value, 0)});
    const double total = std::accumulate(full_spectrum.begin(), full_spectrum.end(), 0.0);
    report.spectrum.reserve(full_spectrum.size());
    for (double s : full_spectrum) report.spectrum.push_back(s / total);

    const auto subset_rows = std::max<Eigen::Index>(
        2, static_cast<Eigen::Index>(std::llround(opts.subsample_fraction * samples)));
    for (std::uint32_t s = 0; s < opts.subsamples; ++s) {
        SplitMix64 rng(derive_seed(opts.seed.value, 1, s));
        std::vector<Eigen::Index> idx(samples);
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        for (Eigen::Index i = 0; i < subset_rows; ++i) {
            const auto j = i + static_cast<Eigen::Index>(rng.next() % (samples - i));
            std::swap(idx[i], idx[j]);
        }
        Eigen::MatrixXd subset(subset_rows, features);
        for (Eigen::Index i = 0; i < subset_rows; ++i)
            subset.row(i) = data.row(idx[i]);
        auto [k, spec] = run_once(subset, RngSeed{derive_seed(opts.seed.value, 2, s)});
        report.per_subsample.push_back(static_cast<double>(k));
    }

    const double mean = std::accumulate(report.per_subsample.begin(),
                                        report.per_subsample.end(), 0.0) /
                        report.per_subsample.size();
    double var = 0.0;
    for (double k : report.per_subsample) var += (k - mean) * (k - mean);
    var /= report.per_subsample.size();
    report.d_eff_mean = mean;
    report.d_eff_std = std::sqrt(var);
    (void)k_full;
    return report;
}

nlohmann::json to_json(const EffDimReport& report)
{
    return nlohmann::json{{"d_eff_mean", report.d_eff_mean},
                          {"d_eff_std", report.d_eff_std},
                          {"variance_threshold", report.variance_threshold},
                          {"subsample_fraction", report.subsample_fraction},
                          {"subsample_count", report.subsample_count},
                          {"per_subsample", report.per_subsample}};
}

double estimate_lipschitz(const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& f,
                          Eigen::Index rows, Eigen::Index cols, std::uint32_t pairs,
                          RngSeed seed, double lo, double hi)
{
    if (pairs == 0)
        throw std::invalid_argument("estimate_lipschitz: pairs must be >= 1");
    if (!(hi > lo))
        throw std::invalid_argument("estimate_lipschitz: empty domain");

    // One sequential stream: the first K pairs of a (K+1)-pair run are the
    // same, so the estimate is nondecreasing in `pairs`.
    SplitMix64 rng(seed);
    auto sample = [&]() {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                m(i, j) = lo + (hi - lo) * rng.uniform();
        return m;
    };

    double best = -1.0;
    for (std::uint32_t p = 0; p < pairs; ++p) {
        const Eigen::MatrixXd x = sample();
        const Eigen::MatrixXd y = sample();
        const double denom = (x - y).norm();
        if (denom < 1e-15) continue; // coincident pair, skip
        const double ratio = (f(x) - f(y)).norm() / denom;
        best = std::max(best, ratio);
    }
    if (best < 0.0)
        throw std::runtime_error("estimate_lipschitz: every sampled pair was degenerate");
    return best;
}

ScalingFit fit_scaling_law(const std::vector<std::pair<double, double>>& points)
{
    if (points.size() < 2)
        throw std::invalid_argument("fit_scaling_law: need >= 2 points");
    std::vector<double> lx, ly;
    lx.reserve(points.size());
    ly.reserve(points.size());
    for (const auto& [n, err] : points) {
        if (!(n > 0.0 && err > 0.0))
            throw std::invalid_argument("fit_scaling_law: points must be positive");
        lx.push_back(std::log(n));
        ly.push_back(std::log(err));
    }
    const double count = static_cast<double>(points.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / count;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / count;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx <= 0.0)
        throw std::invalid_argument("fit_scaling_law: all x values identical");

    ScalingFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double pred = fit.intercept + fit.slope * lx[i];
        ss_res += (ly[i] - pred) * (ly[i] - pred);
    }
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    fit.n_points = static_cast<std::uint32_t>(points.size());
    return fit;
}

nlohmann::json to_json(const ScalingFit& fit)
{
    return nlohmann::json{{"slope", fit.slope},
                          {"intercept", fit.intercept},
                          {"r_squared", fit.r_squared},
                          {"n_points", fit.n_points}};
}

} // namespace spikebench
