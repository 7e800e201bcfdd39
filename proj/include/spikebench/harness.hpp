#ifndef SPIKEBENCH_HARNESS_HPP
#define SPIKEBENCH_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikebench/analysis.hpp"
#include "spikebench/rng.hpp"

namespace spikebench {

// Sectioned key-value config text: "[section]" headers, "key = value"
// lines, '#' comments. Flags override file values at the CLI layer.
using ConfigMap = std::map<std::string, std::map<std::string, std::string>>;

ConfigMap parse_config_file(const std::filesystem::path& path);
ConfigMap parse_config_text(const std::string& text);

std::vector<std::uint32_t> parse_u32_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

// Runs fn(0..count-1) on a worker pool; results must be written to
// preallocated per-index slots so merges are order-independent.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------- task1

struct Task1Config {
    std::uint32_t tokens = 16;
    std::uint32_t dims = 32;
    std::vector<std::uint32_t> t_grid{4, 8, 16, 32, 64};
    std::uint32_t seeds = 11;
    std::uint64_t base_seed = 0;
    double shift_window = 8.0;
    double delta_target = 1e-4;
};

struct Task1Row {
    std::uint32_t timesteps = 0;
    double mse_median = 0.0;
    double mse_mean = 0.0;
    double mse_stderr = 0.0;
    double error = 0.0; // sqrt of median MSE
    double spikes_mean = 0.0;
};

struct Task1Result {
    Task1Config config;
    std::vector<Task1Row> rows;
    std::optional<ScalingFit> fit_error_vs_spikes;
    std::optional<ScalingFit> fit_error_vs_timesteps;

    std::string to_csv() const;
    nlohmann::json summary() const;
    std::vector<std::string> gate_failures() const;
};

// softmax(X X^T) X with identity weights on X ~ U([0,1]^{n x d}):
// circuit-attention MSE against the float oracle across the T grid.
Task1Result run_task1(const Task1Config& cfg, unsigned threads = 1);

// ------------------------------------------------------------------ wta

struct WtaExperimentConfig {
    std::vector<std::uint32_t> n_grid{4, 8, 16, 32};
    std::vector<std::uint32_t> t_grid{1u << 8, 1u << 10, 1u << 12, 1u << 14, 1u << 16};
    std::uint32_t trials = 20;
    std::uint64_t base_seed = 0;
};

struct WtaRow {
    std::uint32_t channels = 0;
    std::uint32_t timesteps = 0;
    double err_median = 0.0; // max-abs error vs e_i / sum e_j
    double err_mean = 0.0;
    double err_stderr = 0.0;
};

struct WtaResult {
    WtaExperimentConfig config;
    std::vector<WtaRow> rows;
    std::map<std::uint32_t, ScalingFit> per_n_fit; // err vs T

    std::string to_csv() const;
    nlohmann::json summary() const;
    std::vector<std::string> gate_failures() const;
};

WtaResult run_wta_convergence(const WtaExperimentConfig& cfg, unsigned threads = 1);

// -------------------------------------------------------- concentration

struct ConcentrationConfig {
    std::vector<double> x_grid{0.2, 0.5, 0.8};
    std::vector<double> delta_grid{0.05, 0.1, 0.2};
    std::uint32_t trials = 10000;
    // Optional explicit T values; empty derives the Hoeffding floor
    // ceil((1/(2 delta^2)) ln(2/delta)) per delta.
    std::vector<std::uint32_t> t_grid;
    std::uint64_t base_seed = 0;
};

struct ConcentrationRow {
    double x = 0.0;
    double delta = 0.0;
    std::uint32_t timesteps = 0;
    double observed_tail = 0.0;
    double chernoff_bound = 0.0;
    bool meets_floor = false; // T >= explicit Hoeffding floor
};

struct ConcentrationResult {
    ConcentrationConfig config;
    std::vector<ConcentrationRow> rows;

    std::string to_csv() const;
    nlohmann::json summary() const;
    std::vector<std::string> gate_failures() const;
};

ConcentrationResult run_encoding_concentration(const ConcentrationConfig& cfg,
                                               unsigned threads = 1);

// ------------------------------------------------------- spike-accuracy

struct SpikeAccuracyConfig {
    std::vector<double> eps_targets{0.5, 0.35, 0.25}; // descending
    std::uint32_t tokens = 16;
    std::uint32_t dims = 32;
    std::uint32_t seeds = 10;
    std::uint32_t t_cap = 1u << 18;
    std::uint64_t base_seed = 0;
    double lipschitz = 1.0;
    double shift_window = 8.0;
};

struct SpikeAccuracyRow {
    double eps_target = 0.0;
    std::uint32_t timesteps = 0;
    double spikes_measured = 0.0;
    std::uint64_t bound = 0;
    double ratio = 0.0;
    bool saturated = false; // target unreachable within the T budget
};

struct SpikeAccuracyResult {
    SpikeAccuracyConfig config;
    std::vector<SpikeAccuracyRow> rows;

    std::string to_csv() const;
    nlohmann::json summary() const;
    std::vector<std::string> gate_failures() const;
};

SpikeAccuracyResult run_spike_accuracy(const SpikeAccuracyConfig& cfg,
                                       unsigned threads = 1);

// --------------------------------------------------------------- output

Task1Config task1_from_config(const ConfigMap& cfg, std::uint64_t default_seed);
WtaExperimentConfig wta_from_config(const ConfigMap& cfg, std::uint64_t default_seed);
ConcentrationConfig concentration_from_config(const ConfigMap& cfg,
                                              std::uint64_t default_seed);
SpikeAccuracyConfig spike_accuracy_from_config(const ConfigMap& cfg,
                                               std::uint64_t default_seed);

void write_text_file(const std::string& text, const std::filesystem::path& path);

} // namespace spikebench

#endif
