#ifndef SPIKEBENCH_ANALYSIS_HPP
#define SPIKEBENCH_ANALYSIS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "spikebench/rng.hpp"

namespace spikebench {

// Energy per synaptic operation, ~0.2 pJ on 14nm neuromorphic silicon.
inline constexpr double kDefaultESopJoules = 0.2e-12;
// Calibrated design-rule constant with its 95% CI.
inline constexpr double kDesignRuleC = 2.3;
inline constexpr double kDesignRuleCLow = 1.9;
inline constexpr double kDesignRuleCHigh = 2.7;

struct BoundInputs {
    double lipschitz = 1.0;
    std::uint64_t tokens = 1;
    std::uint64_t dims = 1;
    std::optional<double> d_eff;
    double epsilon = 0.1;

    void validate() const;
};

struct BoundReport {
    std::uint64_t worst_case_spikes = 0;
    std::optional<std::uint64_t> input_dependent_spikes;
    std::optional<double> compression_ratio; // nd / d_eff
    double energy_joules = 0.0;
    std::uint64_t recommended_timesteps = 0;
    double constant_c = kDesignRuleC;
    double constant_c_low = kDesignRuleCLow;
    double constant_c_high = kDesignRuleCHigh;
};

nlohmann::json to_json(const BoundReport& report);

// ceil(L_f^2 * n * d / eps^2). Order bound; implicit constant fixed to 1.
std::uint64_t lower_bound_spikes(const BoundInputs& inputs);

// ceil(L_f^2 * d_eff / eps^2); the worst-case bound with nd -> d_eff.
std::uint64_t input_dependent_bound(const BoundInputs& inputs);

// spikes * e_sop, exact.
double energy_estimate(std::uint64_t spikes, double e_sop_joules = kDefaultESopJoules);

// T = ceil(C * d_eff / eps^2).
std::uint64_t design_rule_timesteps(double d_eff, double epsilon,
                                    double c = kDesignRuleC);

BoundReport bound_report(const BoundInputs& inputs,
                         double e_sop_joules = kDefaultESopJoules,
                         double c = kDesignRuleC);

struct EffDimOptions {
    double variance_threshold = 0.95;
    std::uint32_t subsamples = 5;
    double subsample_fraction = 0.8;
    RngSeed seed{0};
};

struct EffDimReport {
    double d_eff_mean = 0.0;
    double d_eff_std = 0.0;
    double variance_threshold = 0.95;
    double subsample_fraction = 0.8;
    std::uint32_t subsample_count = 5;
    std::vector<double> per_subsample;
    // Explained-variance spectrum of the full-data run (per-component
    // variance fractions, nonincreasing).
    std::vector<double> spectrum;
};

nlohmann::json to_json(const EffDimReport& report);

// Number of principal components capturing `threshold` of variance, with
// the subsample protocol: mean +- std over `subsamples` random
// `fraction`-subsets. Columns are mean-centered; no variance scaling.
EffDimReport effective_dimension(const Eigen::MatrixXd& data,
                                 const EffDimOptions& opts = {});

// Empirical lower estimate of the Lipschitz constant in Frobenius norm:
// max over sampled pairs of ||f(x)-f(y)||_F / ||x-y||_F on [lo,hi]^{rows x cols}.
double estimate_lipschitz(const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& f,
                          Eigen::Index rows, Eigen::Index cols, std::uint32_t pairs,
                          RngSeed seed, double lo = 0.0, double hi = 1.0);

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::uint32_t n_points = 0;
};

nlohmann::json to_json(const ScalingFit& fit);

// OLS of log(error) against log(spike_count).
ScalingFit fit_scaling_law(const std::vector<std::pair<double, double>>& points);

} // namespace spikebench

#endif
