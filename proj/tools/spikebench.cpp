// spikebench: single-binary driver for the spiking-attention simulator.
// Exit codes: 0 success, 2 usage/domain error, 3 invariant-gate failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spikebench/analysis.hpp"
#include "spikebench/harness.hpp"
#include "spikebench/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitGate = 3;

struct GlobalOpts {
    std::uint64_t seed = 0;
    bool json = false;
    unsigned threads = 1;
};

void print_fit(const spikebench::ScalingFit& fit, const std::string& label)
{
    std::cout << label << ": slope " << spikebench::format_double(fit.slope)
              << ", intercept " << spikebench::format_double(fit.intercept)
              << ", R^2 " << spikebench::format_double(fit.r_squared) << " ("
              << fit.n_points << " points)\n";
}

int cmd_bounds(const GlobalOpts& global, const spikebench::BoundInputs& inputs,
               double e_sop)
{
    const auto report = spikebench::bound_report(inputs, e_sop);
    if (global.json) {
        std::cout << spikebench::to_json(report).dump(2) << '\n';
        return kExitOk;
    }
    std::cout << "worst_case_spikes: " << report.worst_case_spikes << '\n';
    if (report.input_dependent_spikes)
        std::cout << "input_dependent_spikes: " << *report.input_dependent_spikes
                  << '\n';
    if (report.compression_ratio)
        std::cout << "compression_ratio: "
                  << spikebench::format_double(*report.compression_ratio) << '\n';
    std::cout << "energy_joules: " << spikebench::format_double(report.energy_joules)
              << '\n'
              << "recommended_timesteps: " << report.recommended_timesteps << '\n'
              << "constant_C: " << spikebench::format_double(report.constant_c)
              << " (95% CI [" << spikebench::format_double(report.constant_c_low)
              << ", " << spikebench::format_double(report.constant_c_high) << "])\n"
              << "note: order bounds with the implicit constant fixed to 1\n";
    return kExitOk;
}

Eigen::MatrixXd load_effdim_input(const std::vector<std::string>& paths)
{
    bool binary = false;
    for (const auto& p : paths) {
        const auto ext = std::filesystem::path(p).extension().string();
        if (ext == ".bin") binary = true;
        else if (binary)
            throw std::runtime_error("--input: cannot mix .bin batches with CSV");
    }
    if (binary) {
        std::vector<std::filesystem::path> files(paths.begin(), paths.end());
        return spikebench::load_cifar_batches(files);
    }
    if (paths.size() != 1)
        throw std::runtime_error("--input: exactly one CSV file expected");
    return spikebench::load_matrix_csv(paths[0]);
}

int cmd_effdim(const GlobalOpts& global, const std::vector<std::string>& paths,
               const spikebench::EffDimOptions& opts, const std::string& spectrum_out)
{
    const Eigen::MatrixXd data = load_effdim_input(paths);
    const auto report = spikebench::effective_dimension(data, opts);

    std::string spectrum_path = spectrum_out;
    if (spectrum_path.empty())
        spectrum_path = paths.front() + ".spectrum.csv";
    {
        std::string csv = "component,variance_fraction\n";
        for (std::size_t i = 0; i < report.spectrum.size(); ++i)
            csv += std::to_string(i + 1) + ',' +
                   spikebench::format_double(report.spectrum[i]) + '\n';
        spikebench::write_text_file(csv, spectrum_path);
    }

    if (global.json) {
        auto j = spikebench::to_json(report);
        j["spectrum_csv"] = spectrum_path;
        std::cout << j.dump(2) << '\n';
        return kExitOk;
    }
    std::cout << "d_eff: " << spikebench::format_double(report.d_eff_mean) << " +- "
              << spikebench::format_double(report.d_eff_std) << " ("
              << report.subsample_count << " subsamples at "
              << spikebench::format_double(report.subsample_fraction * 100)
              << "%, threshold "
              << spikebench::format_double(report.variance_threshold) << ")\n"
              << "spectrum written to " << spectrum_path << '\n';
    return kExitOk;
}

int finish_run(const GlobalOpts& global, const std::string& name,
               const std::string& csv, const nlohmann::json& summary,
               const std::vector<std::string>& gates,
               const std::filesystem::path& out_dir)
{
    std::filesystem::create_directories(out_dir);
    spikebench::write_text_file(csv, out_dir / (name + ".csv"));
    spikebench::save_json(summary, out_dir / (name + "_summary.json"));
    if (global.json) {
        std::cout << summary.dump(2) << '\n';
    } else {
        std::cout << "experiment " << name << ": " << (summary["rows"].size())
                  << " rows written to " << (out_dir / (name + ".csv")).string()
                  << '\n';
    }
    if (!gates.empty()) {
        for (const auto& g : gates) std::cerr << "gate failure: " << g << '\n';
        return kExitGate;
    }
    return kExitOk;
}

int cmd_run(const GlobalOpts& global, const std::string& experiment,
            const std::string& config_path, const std::string& out_dir)
{
    spikebench::ConfigMap cfg;
    if (!config_path.empty()) cfg = spikebench::parse_config_file(config_path);

    if (experiment == "task1") {
        const auto result = spikebench::run_task1(
            spikebench::task1_from_config(cfg, global.seed), global.threads);
        if (!global.json && result.fit_error_vs_spikes)
            print_fit(*result.fit_error_vs_spikes, "error vs spikes");
        if (!global.json && result.fit_error_vs_timesteps)
            print_fit(*result.fit_error_vs_timesteps, "error vs T");
        return finish_run(global, "task1", result.to_csv(), result.summary(),
                          result.gate_failures(), out_dir);
    }
    if (experiment == "wta") {
        const auto result = spikebench::run_wta_convergence(
            spikebench::wta_from_config(cfg, global.seed), global.threads);
        if (!global.json)
            for (const auto& [n, fit] : result.per_n_fit)
                print_fit(fit, "n=" + std::to_string(n) + " error vs T");
        return finish_run(global, "wta", result.to_csv(), result.summary(),
                          result.gate_failures(), out_dir);
    }
    if (experiment == "concentration") {
        const auto result = spikebench::run_encoding_concentration(
            spikebench::concentration_from_config(cfg, global.seed), global.threads);
        return finish_run(global, "concentration", result.to_csv(), result.summary(),
                          result.gate_failures(), out_dir);
    }
    if (experiment == "spike-accuracy") {
        const auto result = spikebench::run_spike_accuracy(
            spikebench::spike_accuracy_from_config(cfg, global.seed), global.threads);
        return finish_run(global, "spike-accuracy", result.to_csv(), result.summary(),
                          result.gate_failures(), out_dir);
    }
    std::cerr << "unknown experiment '" << experiment
              << "'; valid: task1, wta, concentration, spike-accuracy\n";
    return kExitUsage;
}

int cmd_fit(const GlobalOpts& global, const std::string& input)
{
    const Eigen::MatrixXd m = spikebench::load_matrix_csv(input);
    if (m.cols() != 2)
        throw std::invalid_argument("--input: expected two columns (x, error)");
    if (m.rows() < 2)
        throw std::invalid_argument("--input: need at least two rows to fit");
    std::vector<std::pair<double, double>> points;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        points.emplace_back(m(i, 0), m(i, 1));
    const auto fit = spikebench::fit_scaling_law(points);
    if (global.json)
        std::cout << spikebench::to_json(fit).dump(2) << '\n';
    else
        print_fit(fit, input);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"spikebench: spiking self-attention simulator, bound calculator, "
                 "and scaling-law toolkit"};
    app.require_subcommand(1);
    GlobalOpts global;
    app.add_option("--seed", global.seed, "Master seed (identical seed => identical artifacts)")
        ->envname("SPIKEBENCH_SEED")
        ->capture_default_str();
    app.add_flag("--json", global.json, "Emit exactly one JSON document on stdout");
    app.add_option("--threads", global.threads, "Worker-pool cap for experiment runs")
        ->capture_default_str();

    // bounds
    double lf = 1.0, eps = 0.1, esop = spikebench::kDefaultESopJoules;
    std::uint64_t n_tokens = 1, n_dims = 1;
    std::optional<double> deff;
    auto* bounds = app.add_subcommand("bounds", "Spike-count lower bounds and energy");
    bounds->add_option("--lf", lf, "Lipschitz constant L_f")->required();
    bounds->add_option("--n", n_tokens, "Token count n")->required();
    bounds->add_option("--d", n_dims, "Embedding dimension d")->required();
    bounds->add_option("--deff", deff, "Effective dimension for the input-dependent bound");
    bounds->add_option("--eps", eps, "Target accuracy eps")->required();
    bounds->add_option("--esop", esop, "Energy per synaptic op in joules")
        ->capture_default_str();

    // effdim
    std::vector<std::string> effdim_inputs;
    std::string spectrum_out;
    spikebench::EffDimOptions effdim_opts;
    auto* effdim = app.add_subcommand(
        "effdim", "Effective dimension of a dataset (CSV or CIFAR-10 .bin batches)");
    effdim->add_option("--input", effdim_inputs, "Input file(s)")->required();
    effdim->add_option("--threshold", effdim_opts.variance_threshold,
                       "Explained-variance threshold")->capture_default_str();
    effdim->add_option("--subsamples", effdim_opts.subsamples, "Subsample count")
        ->capture_default_str();
    effdim->add_option("--fraction", effdim_opts.subsample_fraction,
                       "Subsample fraction")->capture_default_str();
    effdim->add_option("--spectrum-out", spectrum_out,
                       "Spectrum CSV path (default: <input>.spectrum.csv)");

    // run
    std::string experiment, config_path, out_dir = "out";
    auto* run = app.add_subcommand("run", "Run an experiment and write its artifacts");
    run->add_option("--experiment", experiment,
                    "task1 | wta | concentration | spike-accuracy")->required();
    run->add_option("--config", config_path, "Sectioned key-value config file");
    run->add_option("--out", out_dir, "Output directory")->capture_default_str();

    // fit
    std::string fit_input;
    auto* fit = app.add_subcommand("fit", "Log-log power-law fit of a 2-column CSV");
    fit->add_option("--input", fit_input, "CSV with columns x,error")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (bounds->parsed()) {
            spikebench::BoundInputs inputs;
            inputs.lipschitz = lf;
            inputs.tokens = n_tokens;
            inputs.dims = n_dims;
            inputs.d_eff = deff;
            inputs.epsilon = eps;
            if (!(eps > 0.0 && eps < 1.0)) {
                std::cerr << "--eps: eps must be in (0,1)\n";
                return kExitUsage;
            }
            if (!(lf > 0.0)) {
                std::cerr << "--lf: L_f must be > 0\n";
                return kExitUsage;
            }
            if (deff) {
                const double nd = static_cast<double>(n_tokens) *
                                  static_cast<double>(n_dims);
                if (!(*deff >= 1.0 && *deff <= nd)) {
                    std::cerr << "--deff: need 1 <= d_eff <= n*d\n";
                    return kExitUsage;
                }
            }
            if (!(esop >= 0.0)) {
                std::cerr << "--esop: energy per op must be >= 0\n";
                return kExitUsage;
            }
            return cmd_bounds(global, inputs, esop);
        }
        if (effdim->parsed()) {
            effdim_opts.seed = spikebench::RngSeed{global.seed};
            return cmd_effdim(global, effdim_inputs, effdim_opts, spectrum_out);
        }
        if (run->parsed()) return cmd_run(global, experiment, config_path, out_dir);
        if (fit->parsed()) return cmd_fit(global, fit_input);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
