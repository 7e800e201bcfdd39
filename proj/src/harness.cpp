#include "spikebench/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "spikebench/attention.hpp"
#include "spikebench/circuits.hpp"
#include "spikebench/encoding.hpp"
#include "spikebench/io.hpp"

namespace spikebench {

namespace {

constexpr std::uint64_t kTaskInputTag = 0x7A5C;
constexpr std::uint64_t kTaskCircuitTag = 0x7A5D;
constexpr std::uint64_t kWtaRateTag = 0x3E11;
constexpr std::uint64_t kWtaTrainTag = 0x3E12;
constexpr std::uint64_t kWtaStageTag = 0x3E13;
constexpr std::uint64_t kConcTag = 0x50AB;
constexpr std::uint64_t kAccInputTag = 0x6F01;
constexpr std::uint64_t kAccCircuitTag = 0x6F02;

std::string trim(const std::string& s)
{
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

double median_of(std::vector<double> v)
{
    if (v.empty()) throw std::invalid_argument("median of empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v)
{
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1)) /
           std::sqrt(static_cast<double>(v.size()));
}

Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    SplitMix64 rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = rng.uniform();
    return m;
}

double frobenius_mse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    return (a - b).squaredNorm() / static_cast<double>(a.size());
}

const std::string* find_value(const ConfigMap& cfg, const std::string& section,
                              const std::string& key)
{
    const auto sec = cfg.find(section);
    if (sec == cfg.end()) return nullptr;
    const auto kv = sec->second.find(key);
    if (kv == sec->second.end()) return nullptr;
    return &kv->second;
}

std::uint64_t get_u64(const ConfigMap& cfg, const std::string& section,
                      const std::string& key, std::uint64_t fallback)
{
    const auto* v = find_value(cfg, section, key);
    return v ? std::stoull(*v) : fallback;
}

std::uint32_t get_u32(const ConfigMap& cfg, const std::string& section,
                      const std::string& key, std::uint32_t fallback)
{
    return static_cast<std::uint32_t>(get_u64(cfg, section, key, fallback));
}

double get_double(const ConfigMap& cfg, const std::string& section,
                  const std::string& key, double fallback)
{
    const auto* v = find_value(cfg, section, key);
    return v ? std::stod(*v) : fallback;
}

std::vector<std::uint32_t> get_u32_list(const ConfigMap& cfg, const std::string& section,
                                        const std::string& key,
                                        std::vector<std::uint32_t> fallback)
{
    const auto* v = find_value(cfg, section, key);
    return v ? parse_u32_list(*v) : fallback;
}

std::vector<double> get_double_list(const ConfigMap& cfg, const std::string& section,
                                    const std::string& key,
                                    std::vector<double> fallback)
{
    const auto* v = find_value(cfg, section, key);
    return v ? parse_double_list(*v) : fallback;
}

nlohmann::json fit_json(const std::optional<ScalingFit>& fit)
{
    return fit ? to_json(*fit) : nlohmann::json(nullptr);
}

} // namespace

ConfigMap parse_config_text(const std::string& text)
{
    ConfigMap cfg;
    std::string section = "common";
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config line " + std::to_string(lineno) +
                                         ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            cfg[section]; // register even if empty
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": empty key");
        cfg[section][key] = value;
    }
    return cfg;
}

ConfigMap parse_config_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::vector<std::uint32_t> parse_u32_list(const std::string& text)
{
    std::vector<std::uint32_t> out;
    std::string item;
    std::stringstream ss(text);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<std::uint32_t>(std::stoul(item)));
    }
    if (out.empty()) throw std::runtime_error("empty integer list: '" + text + "'");
    return out;
}

std::vector<double> parse_double_list(const std::string& text)
{
    std::vector<double> out;
    std::string item;
    std::stringstream ss(text);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw std::runtime_error("empty numeric list: '" + text + "'");
    return out;
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn)
{
    if (count == 0) return;
    const unsigned workers =
        std::max(1u, std::min<unsigned>(threads == 0 ? 1u : threads,
                                        static_cast<unsigned>(count)));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------- task1

Task1Result run_task1(const Task1Config& cfg, unsigned threads)
{
    if (cfg.t_grid.empty()) throw std::invalid_argument("run_task1: empty T grid");
    for (std::size_t i = 1; i < cfg.t_grid.size(); ++i)
        if (!(cfg.t_grid[i] > cfg.t_grid[i - 1]))
            throw std::invalid_argument("run_task1: T grid must be ascending");
    if (cfg.seeds == 0) throw std::invalid_argument("run_task1: seeds must be >= 1");
    if (cfg.tokens == 0 || cfg.dims == 0)
        throw std::invalid_argument("run_task1: tokens/dims must be >= 1");

    // Inputs and oracles depend only on the seed index, so every T is
    // evaluated on identical problems.
    std::vector<Eigen::MatrixXd> inputs(cfg.seeds), oracles(cfg.seeds);
    const auto weights = AttentionWeights::identity(cfg.dims);
    for (std::uint32_t s = 0; s < cfg.seeds; ++s) {
        inputs[s] = uniform_matrix(cfg.tokens, cfg.dims,
                                   derive_seed(cfg.base_seed, kTaskInputTag, s));
        oracles[s] = float_attention_oracle(inputs[s], weights);
    }

    struct Cell { double mse = 0.0; double spikes = 0.0; };
    const std::size_t jobs = cfg.t_grid.size() * cfg.seeds;
    std::vector<Cell> cells(jobs);
    CircuitAttentionConfig attn_cfg;
    attn_cfg.shift_window = cfg.shift_window;
    attn_cfg.delta_target = cfg.delta_target;

    parallel_for(jobs, threads, [&](std::size_t idx) {
        const std::size_t ti = idx / cfg.seeds;
        const auto s = static_cast<std::uint32_t>(idx % cfg.seeds);
        const auto out = circuit_attention(
            inputs[s], weights, cfg.t_grid[ti],
            RngSeed{derive_seed(cfg.base_seed, kTaskCircuitTag, s)}, attn_cfg);
        cells[idx].mse = frobenius_mse(out.rates, oracles[s]);
        cells[idx].spikes = static_cast<double>(out.spikes_used);
    });

    Task1Result result;
    result.config = cfg;
    for (std::size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
        std::vector<double> mses, spikes;
        for (std::uint32_t s = 0; s < cfg.seeds; ++s) {
            mses.push_back(cells[ti * cfg.seeds + s].mse);
            spikes.push_back(cells[ti * cfg.seeds + s].spikes);
        }
        Task1Row row;
        row.timesteps = cfg.t_grid[ti];
        row.mse_median = median_of(mses);
        row.mse_mean = mean_of(mses);
        row.mse_stderr = stderr_of(mses);
        row.error = std::sqrt(row.mse_median);
        row.spikes_mean = mean_of(spikes);
        result.rows.push_back(row);
    }

    std::vector<std::pair<double, double>> vs_spikes, vs_t;
    for (const auto& row : result.rows) {
        if (row.error > 0.0 && row.spikes_mean > 0.0) {
            vs_spikes.emplace_back(row.spikes_mean, row.error);
            vs_t.emplace_back(static_cast<double>(row.timesteps), row.error);
        }
    }
    if (vs_spikes.size() >= 2) {
        result.fit_error_vs_spikes = fit_scaling_law(vs_spikes);
        result.fit_error_vs_timesteps = fit_scaling_law(vs_t);
    }
    return result;
}

std::string Task1Result::to_csv() const
{
    std::string out = "timesteps,mse_median,mse_mean,mse_stderr,error,spikes_mean\n";
    for (const auto& r : rows) {
        out += std::to_string(r.timesteps) + ',' + format_double(r.mse_median) + ',' +
               format_double(r.mse_mean) + ',' + format_double(r.mse_stderr) + ',' +
               format_double(r.error) + ',' + format_double(r.spikes_mean) + '\n';
    }
    return out;
}

nlohmann::json Task1Result::summary() const
{
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows)
        rows_json.push_back({{"timesteps", r.timesteps},
                             {"mse_median", r.mse_median},
                             {"mse_mean", r.mse_mean},
                             {"mse_stderr", r.mse_stderr},
                             {"error", r.error},
                             {"spikes_mean", r.spikes_mean}});
    return nlohmann::json{
        {"experiment", "task1"},
        {"config",
         {{"tokens", config.tokens},
          {"dims", config.dims},
          {"t_grid", config.t_grid},
          {"seeds", config.seeds},
          {"base_seed", config.base_seed},
          {"shift_window", config.shift_window},
          {"delta_target", config.delta_target}}},
        {"rows", rows_json},
        {"fit_error_vs_spikes", fit_json(fit_error_vs_spikes)},
        {"fit_error_vs_timesteps", fit_json(fit_error_vs_timesteps)},
        {"gate_failures", gate_failures()}};
}

std::vector<std::string> Task1Result::gate_failures() const
{
    std::vector<std::string> fails;
    if (rows.empty()) {
        fails.push_back("task1: no rows produced");
        return fails;
    }
    for (const auto& r : rows)
        if (!(r.spikes_mean > 0.0))
            fails.push_back("task1: zero spike usage at T=" + std::to_string(r.timesteps));
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (!(rows[i].mse_median < rows[i - 1].mse_median))
            fails.push_back("task1: median MSE did not decrease from T=" +
                            std::to_string(rows[i - 1].timesteps) + " to T=" +
                            std::to_string(rows[i].timesteps));
    if (fit_error_vs_spikes && !(fit_error_vs_spikes->slope < 0.0))
        fails.push_back("task1: error-vs-spikes slope is not negative");
    return fails;
}

// ------------------------------------------------------------------ wta

WtaResult run_wta_convergence(const WtaExperimentConfig& cfg, unsigned threads)
{
    if (cfg.n_grid.empty() || cfg.t_grid.empty())
        throw std::invalid_argument("run_wta_convergence: empty grid");
    if (cfg.trials == 0)
        throw std::invalid_argument("run_wta_convergence: trials must be >= 1");

    struct Job { std::uint32_t n, t; std::size_t row; };
    std::vector<Job> jobs;
    for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni)
        for (std::size_t ti = 0; ti < cfg.t_grid.size(); ++ti)
            jobs.push_back({cfg.n_grid[ni], cfg.t_grid[ti],
                            ni * cfg.t_grid.size() + ti});

    std::vector<WtaRow> rows(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t idx) {
        const Job job = jobs[idx];
        const std::uint32_t transient = WtaConfig::default_transient(job.n);
        if (job.t <= transient)
            throw std::invalid_argument(
                "run_wta_convergence: T=" + std::to_string(job.t) +
                " is not larger than the transient " + std::to_string(transient) +
                " for n=" + std::to_string(job.n));
        std::vector<double> errs;
        for (std::uint32_t trial = 0; trial < cfg.trials; ++trial) {
            const std::uint64_t trial_seed =
                derive_seed(cfg.base_seed, job.n, job.t * 131071ull + trial);
            SplitMix64 rate_rng(derive_seed(trial_seed, kWtaRateTag));
            std::vector<double> rates(job.n);
            double total = 0.0;
            for (auto& e : rates) {
                // Bounded away from 0 so the target weights are well-defined.
                e = 0.05 + 0.95 * rate_rng.uniform();
                total += e;
            }
            std::vector<SpikeTrain> trains;
            trains.reserve(job.n);
            for (std::uint32_t i = 0; i < job.n; ++i)
                trains.push_back(encode_rate(
                    rates[i], job.t, RngSeed{derive_seed(trial_seed, kWtaTrainTag, i)}));
            const auto alphas =
                wta_normalize(trains, WtaConfig{job.n, job.t, transient}, LifParams{},
                              RngSeed{derive_seed(trial_seed, kWtaStageTag)});
            double err = 0.0;
            for (std::uint32_t i = 0; i < job.n; ++i)
                err = std::max(err, std::abs(alphas[i].value - rates[i] / total));
            errs.push_back(err);
        }
        WtaRow row;
        row.channels = job.n;
        row.timesteps = job.t;
        row.err_median = median_of(errs);
        row.err_mean = mean_of(errs);
        row.err_stderr = stderr_of(errs);
        rows[job.row] = row;
    });

    WtaResult result;
    result.config = cfg;
    result.rows = std::move(rows);
    for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
        std::vector<std::pair<double, double>> points;
        for (std::size_t ti = 0; ti < cfg.t_grid.size(); ++ti) {
            const auto& row = result.rows[ni * cfg.t_grid.size() + ti];
            if (row.err_median > 0.0)
                points.emplace_back(static_cast<double>(row.timesteps), row.err_median);
        }
        if (points.size() >= 2)
            result.per_n_fit[cfg.n_grid[ni]] = fit_scaling_law(points);
    }
    return result;
}

std::string WtaResult::to_csv() const
{
    std::string out = "channels,timesteps,err_median,err_mean,err_stderr\n";
    for (const auto& r : rows)
        out += std::to_string(r.channels) + ',' + std::to_string(r.timesteps) + ',' +
               format_double(r.err_median) + ',' + format_double(r.err_mean) + ',' +
               format_double(r.err_stderr) + '\n';
    return out;
}

nlohmann::json WtaResult::summary() const
{
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows)
        rows_json.push_back({{"channels", r.channels},
                             {"timesteps", r.timesteps},
                             {"err_median", r.err_median},
                             {"err_mean", r.err_mean},
                             {"err_stderr", r.err_stderr}});
    nlohmann::json fits = nlohmann::json::object();
    for (const auto& [n, fit] : per_n_fit) fits[std::to_string(n)] = to_json(fit);
    return nlohmann::json{{"experiment", "wta"},
                          {"config",
                           {{"n_grid", config.n_grid},
                            {"t_grid", config.t_grid},
                            {"trials", config.trials},
                            {"base_seed", config.base_seed}}},
                          {"rows", rows_json},
                          {"per_n_fit", fits},
                          {"gate_failures", gate_failures()}};
}

std::vector<std::string> WtaResult::gate_failures() const
{
    std::vector<std::string> fails;
    if (rows.empty()) {
        fails.push_back("wta: no rows produced");
        return fails;
    }
    for (const auto& [n, fit] : per_n_fit)
        if (!(fit.slope < 0.0))
            fails.push_back("wta: error-vs-T slope not negative for n=" +
                            std::to_string(n));
    return fails;
}

// -------------------------------------------------------- concentration

ConcentrationResult run_encoding_concentration(const ConcentrationConfig& cfg,
                                               unsigned threads)
{
    if (cfg.x_grid.empty() || cfg.delta_grid.empty())
        throw std::invalid_argument("run_encoding_concentration: empty grid");
    if (cfg.trials == 0)
        throw std::invalid_argument("run_encoding_concentration: trials must be >= 1");

    struct Job { double x, delta; std::uint32_t t; };
    std::vector<Job> jobs;
    for (double x : cfg.x_grid) {
        for (double delta : cfg.delta_grid) {
            // delta >= 1 is legal and trivially satisfied: |decoded - x| <= 1.
            if (!(delta > 0.0))
                throw std::invalid_argument(
                    "run_encoding_concentration: delta must be > 0");
            if (cfg.t_grid.empty()) {
                jobs.push_back({x, delta,
                                static_cast<std::uint32_t>(std::max(
                                    1.0,
                                    std::ceil(concentration_timestep_floor(delta))))});
            } else {
                for (std::uint32_t t : cfg.t_grid) jobs.push_back({x, delta, t});
            }
        }
    }

    std::vector<ConcentrationRow> rows(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t idx) {
        const Job job = jobs[idx];
        const std::uint64_t seed =
            derive_seed(cfg.base_seed, kConcTag,
                        content_hash(std::array<double, 3>{
                            job.x, job.delta, static_cast<double>(job.t)}));
        ConcentrationRow row;
        row.x = job.x;
        row.delta = job.delta;
        row.timesteps = job.t;
        row.observed_tail =
            concentration_trial(job.x, job.t, cfg.trials, {job.delta}, RngSeed{seed})[0];
        row.chernoff_bound = chernoff_tail_bound(job.t, job.delta);
        row.meets_floor =
            static_cast<double>(job.t) >= concentration_timestep_floor(job.delta);
        rows[idx] = row;
    });

    ConcentrationResult result;
    result.config = cfg;
    result.rows = std::move(rows);
    return result;
}

std::string ConcentrationResult::to_csv() const
{
    std::string out = "x,delta,timesteps,observed_tail,chernoff_bound,meets_floor\n";
    for (const auto& r : rows)
        out += format_double(r.x) + ',' + format_double(r.delta) + ',' +
               std::to_string(r.timesteps) + ',' + format_double(r.observed_tail) + ',' +
               format_double(r.chernoff_bound) + ',' + (r.meets_floor ? "1" : "0") + '\n';
    return out;
}

nlohmann::json ConcentrationResult::summary() const
{
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows)
        rows_json.push_back({{"x", r.x},
                             {"delta", r.delta},
                             {"timesteps", r.timesteps},
                             {"observed_tail", r.observed_tail},
                             {"chernoff_bound", r.chernoff_bound},
                             {"meets_floor", r.meets_floor}});
    return nlohmann::json{{"experiment", "concentration"},
                          {"config",
                           {{"x_grid", config.x_grid},
                            {"delta_grid", config.delta_grid},
                            {"trials", config.trials},
                            {"t_grid", config.t_grid},
                            {"base_seed", config.base_seed}}},
                          {"rows", rows_json},
                          {"gate_failures", gate_failures()}};
}

std::vector<std::string> ConcentrationResult::gate_failures() const
{
    std::vector<std::string> fails;
    if (rows.empty()) {
        fails.push_back("concentration: no rows produced");
        return fails;
    }
    for (const auto& r : rows) {
        // Chernoff bounds the true tail; allow three binomial standard
        // errors of slack for the finite-trial estimate.
        const double slack =
            3.0 * std::sqrt(std::max(r.chernoff_bound, 1e-6) / config.trials);
        if (r.observed_tail > r.chernoff_bound + slack)
            fails.push_back("concentration: observed tail " +
                            format_double(r.observed_tail) + " exceeds bound " +
                            format_double(r.chernoff_bound) + " at x=" +
                            format_double(r.x) + " delta=" + format_double(r.delta));
    }
    return fails;
}

// ------------------------------------------------------- spike-accuracy

namespace {

struct AccuracyProbe {
    double rmse_median = 0.0;
    double spikes_mean = 0.0;
};

} // namespace

SpikeAccuracyResult run_spike_accuracy(const SpikeAccuracyConfig& cfg, unsigned threads)
{
    if (cfg.eps_targets.empty())
        throw std::invalid_argument("run_spike_accuracy: no targets");
    for (std::size_t i = 1; i < cfg.eps_targets.size(); ++i)
        if (!(cfg.eps_targets[i] < cfg.eps_targets[i - 1]))
            throw std::invalid_argument(
                "run_spike_accuracy: eps targets must be strictly descending");
    if (cfg.seeds == 0)
        throw std::invalid_argument("run_spike_accuracy: seeds must be >= 1");
    if (cfg.t_cap < 4)
        throw std::invalid_argument("run_spike_accuracy: t_cap must be >= 4");

    std::vector<Eigen::MatrixXd> inputs(cfg.seeds), oracles(cfg.seeds);
    const auto weights = AttentionWeights::identity(cfg.dims);
    for (std::uint32_t s = 0; s < cfg.seeds; ++s) {
        inputs[s] = uniform_matrix(cfg.tokens, cfg.dims,
                                   derive_seed(cfg.base_seed, kAccInputTag, s));
        oracles[s] = float_attention_oracle(inputs[s], weights);
    }
    CircuitAttentionConfig attn_cfg;
    attn_cfg.shift_window = cfg.shift_window;

    std::map<std::uint32_t, AccuracyProbe> cache;
    const auto probe = [&](std::uint32_t t) -> const AccuracyProbe& {
        const auto hit = cache.find(t);
        if (hit != cache.end()) return hit->second;
        std::vector<double> rmses(cfg.seeds), spikes(cfg.seeds);
        parallel_for(cfg.seeds, threads, [&](std::size_t s) {
            try {
                const auto out = circuit_attention(
                    inputs[s], weights, t,
                    RngSeed{derive_seed(cfg.base_seed, kAccCircuitTag,
                                        static_cast<std::uint64_t>(s))},
                    attn_cfg);
                rmses[s] = std::sqrt(frobenius_mse(out.rates, oracles[s]));
                spikes[s] = static_cast<double>(out.spikes_used);
            } catch (const std::runtime_error&) {
                // T too small for the WTA stage to emit any spikes; treat
                // the probe as failing the target so the search moves on.
                rmses[s] = std::numeric_limits<double>::infinity();
                spikes[s] = 0.0;
            }
        });
        AccuracyProbe p;
        p.rmse_median = median_of(rmses);
        p.spikes_mean = mean_of(spikes);
        return cache.emplace(t, p).first->second;
    };

    SpikeAccuracyResult result;
    result.config = cfg;
    std::uint32_t search_floor = 4; // targets descend, so minima are monotone
    for (double eps : cfg.eps_targets) {
        // Doubling phase from the previous target's answer, then bisection.
        std::uint32_t lo = 0, hi = 0;
        std::uint32_t t = search_floor;
        for (;;) {
            const auto& p = probe(t);
            if (p.rmse_median <= eps) { hi = t; break; }
            lo = t;
            if (t >= cfg.t_cap) break;
            t = std::min<std::uint32_t>(cfg.t_cap, t * 2);
        }

        SpikeAccuracyRow row;
        row.eps_target = eps;
        BoundInputs bounds;
        bounds.lipschitz = cfg.lipschitz;
        bounds.tokens = cfg.tokens;
        bounds.dims = cfg.dims;
        bounds.epsilon = eps;
        row.bound = lower_bound_spikes(bounds);
        if (hi == 0) {
            row.saturated = true;
            row.timesteps = cfg.t_cap;
            row.spikes_measured = probe(cfg.t_cap).spikes_mean;
        } else {
            while (lo + 1 < hi) {
                const std::uint32_t mid = lo + (hi - lo) / 2;
                if (probe(mid).rmse_median <= eps) hi = mid;
                else lo = mid;
            }
            row.timesteps = hi;
            row.spikes_measured = probe(hi).spikes_mean;
            search_floor = hi;
        }
        row.ratio = row.spikes_measured / static_cast<double>(row.bound);
        result.rows.push_back(row);
    }
    return result;
}

std::string SpikeAccuracyResult::to_csv() const
{
    std::string out = "eps_target,timesteps,spikes_measured,bound,ratio,saturated\n";
    for (const auto& r : rows)
        out += format_double(r.eps_target) + ',' + std::to_string(r.timesteps) + ',' +
               format_double(r.spikes_measured) + ',' + std::to_string(r.bound) + ',' +
               format_double(r.ratio) + ',' + (r.saturated ? "1" : "0") + '\n';
    return out;
}

nlohmann::json SpikeAccuracyResult::summary() const
{
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows)
        rows_json.push_back({{"eps_target", r.eps_target},
                             {"timesteps", r.timesteps},
                             {"spikes_measured", r.spikes_measured},
                             {"bound", r.bound},
                             {"ratio", r.ratio},
                             {"saturated", r.saturated}});
    return nlohmann::json{{"experiment", "spike-accuracy"},
                          {"config",
                           {{"eps_targets", config.eps_targets},
                            {"tokens", config.tokens},
                            {"dims", config.dims},
                            {"seeds", config.seeds},
                            {"t_cap", config.t_cap},
                            {"base_seed", config.base_seed},
                            {"lipschitz", config.lipschitz},
                            {"shift_window", config.shift_window}}},
                          {"rows", rows_json},
                          {"gate_failures", gate_failures()}};
}

std::vector<std::string> SpikeAccuracyResult::gate_failures() const
{
    std::vector<std::string> fails;
    if (rows.empty()) {
        fails.push_back("spike-accuracy: no rows produced");
        return fails;
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].saturated || rows[i - 1].saturated) continue;
        if (rows[i].spikes_measured + 1e-9 < rows[i - 1].spikes_measured)
            fails.push_back("spike-accuracy: measured spikes decreased as the "
                            "target tightened (eps " +
                            format_double(rows[i].eps_target) + ")");
    }
    return fails;
}

// --------------------------------------------------------------- config

Task1Config task1_from_config(const ConfigMap& cfg, std::uint64_t default_seed)
{
    Task1Config out;
    out.tokens = get_u32(cfg, "task1", "tokens", out.tokens);
    out.dims = get_u32(cfg, "task1", "dims", out.dims);
    out.t_grid = get_u32_list(cfg, "task1", "t_grid", out.t_grid);
    out.seeds = get_u32(cfg, "task1", "seeds", out.seeds);
    out.base_seed = get_u64(cfg, "task1", "seed",
                            get_u64(cfg, "common", "seed", default_seed));
    out.shift_window = get_double(cfg, "task1", "shift_window", out.shift_window);
    out.delta_target = get_double(cfg, "task1", "delta_target", out.delta_target);
    return out;
}

WtaExperimentConfig wta_from_config(const ConfigMap& cfg, std::uint64_t default_seed)
{
    WtaExperimentConfig out;
    out.n_grid = get_u32_list(cfg, "wta", "n_grid", out.n_grid);
    out.t_grid = get_u32_list(cfg, "wta", "t_grid", out.t_grid);
    out.trials = get_u32(cfg, "wta", "trials", out.trials);
    out.base_seed =
        get_u64(cfg, "wta", "seed", get_u64(cfg, "common", "seed", default_seed));
    return out;
}

ConcentrationConfig concentration_from_config(const ConfigMap& cfg,
                                              std::uint64_t default_seed)
{
    ConcentrationConfig out;
    out.x_grid = get_double_list(cfg, "concentration", "x_grid", out.x_grid);
    out.delta_grid = get_double_list(cfg, "concentration", "delta_grid", out.delta_grid);
    out.trials = get_u32(cfg, "concentration", "trials", out.trials);
    if (const auto* v = find_value(cfg, "concentration", "t_grid"))
        out.t_grid = parse_u32_list(*v);
    out.base_seed = get_u64(cfg, "concentration", "seed",
                            get_u64(cfg, "common", "seed", default_seed));
    return out;
}

SpikeAccuracyConfig spike_accuracy_from_config(const ConfigMap& cfg,
                                               std::uint64_t default_seed)
{
    SpikeAccuracyConfig out;
    out.eps_targets =
        get_double_list(cfg, "spike-accuracy", "eps_targets", out.eps_targets);
    out.tokens = get_u32(cfg, "spike-accuracy", "tokens", out.tokens);
    out.dims = get_u32(cfg, "spike-accuracy", "dims", out.dims);
    out.seeds = get_u32(cfg, "spike-accuracy", "seeds", out.seeds);
    out.t_cap = get_u32(cfg, "spike-accuracy", "t_cap", out.t_cap);
    out.base_seed = get_u64(cfg, "spike-accuracy", "seed",
                            get_u64(cfg, "common", "seed", default_seed));
    out.lipschitz = get_double(cfg, "spike-accuracy", "lipschitz", out.lipschitz);
    out.shift_window =
        get_double(cfg, "spike-accuracy", "shift_window", out.shift_window);
    return out;
}

void write_text_file(const std::string& text, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

} // namespace spikebench
