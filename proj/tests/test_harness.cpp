#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <vector>

#include "spikebench/harness.hpp"

using namespace spikebench;

TEST_CASE("config parser: sections, comments, and whitespace")
{
    const auto cfg = parse_config_text(
        "# leading comment\n"
        "top = 1\n"
        "[task1]\n"
        "tokens = 8   # trailing comment\n"
        "t_grid = 4, 8, 16\n"
        "\n"
        "[other]\n"
        "x = 0.5\n");
    CHECK(cfg.at("common").at("top") == "1");
    CHECK(cfg.at("task1").at("tokens") == "8");
    CHECK(cfg.at("task1").at("t_grid") == "4, 8, 16");
    CHECK(cfg.at("other").at("x") == "0.5");
}

TEST_CASE("config parser rejects malformed input with line diagnostics")
{
    CHECK_THROWS_WITH_AS(static_cast<void>(parse_config_text("[task1]\nnovalue\n")),
                         doctest::Contains("line 2"), std::runtime_error);
    CHECK_THROWS_AS(static_cast<void>(parse_config_text("[unclosed\n")),
                    std::runtime_error);
    CHECK_THROWS_AS(static_cast<void>(parse_config_text("= 3\n")),
                    std::runtime_error);
    CHECK_THROWS_AS(static_cast<void>(parse_config_file("/nonexistent/file.ini")),
                    std::runtime_error);
}

TEST_CASE("list parsing")
{
    CHECK(parse_u32_list("4, 8,16") == std::vector<std::uint32_t>{4, 8, 16});
    CHECK(parse_u32_list("7") == std::vector<std::uint32_t>{7});
    CHECK(parse_double_list("0.5, 1e-3") == std::vector<double>{0.5, 1e-3});
    CHECK_THROWS(static_cast<void>(parse_u32_list("4, x")));
    CHECK_THROWS_AS(static_cast<void>(parse_u32_list("")), std::runtime_error);
}

TEST_CASE("parallel_for covers every index exactly once, any thread count")
{
    for (unsigned threads : {1u, 2u, 7u}) {
        std::vector<std::atomic<int>> hits(523);
        parallel_for(hits.size(), threads,
                     [&](std::size_t i) { hits[i].fetch_add(1); });
        for (const auto& h : hits) CHECK(h.load() == 1);
    }
    // Zero work is a no-op.
    parallel_for(0, 4, [](std::size_t) { FAIL("must not be called"); });
}

TEST_CASE("parallel_for propagates worker exceptions")
{
    CHECK_THROWS_WITH_AS(parallel_for(16, 4,
                                      [](std::size_t i) {
                                          if (i == 9)
                                              throw std::runtime_error("boom 9");
                                      }),
                         doctest::Contains("boom"), std::runtime_error);
}

TEST_CASE("task1 on a tiny grid: rows, determinism, thread independence")
{
    Task1Config cfg;
    cfg.tokens = 4;
    cfg.dims = 8;
    cfg.t_grid = {8, 64};
    cfg.seeds = 7;
    cfg.base_seed = 5;
    const auto a = run_task1(cfg, 1);
    const auto b = run_task1(cfg, 3);
    REQUIRE(a.rows.size() == 2);
    CHECK(a.to_csv() == b.to_csv());
    CHECK(a.summary().dump() == b.summary().dump());
    CHECK(a.rows[1].mse_median < a.rows[0].mse_median);
    CHECK(a.rows[1].spikes_mean > a.rows[0].spikes_mean);
    REQUIRE(a.fit_error_vs_spikes.has_value());
    CHECK(a.fit_error_vs_spikes->slope < 0.0);
    CHECK(a.gate_failures().empty());
}

TEST_CASE("task1 singleton grid produces one row and no fit")
{
    Task1Config cfg;
    cfg.tokens = 4;
    cfg.dims = 8;
    cfg.t_grid = {16};
    cfg.seeds = 2;
    const auto r = run_task1(cfg, 1);
    CHECK(r.rows.size() == 1);
    CHECK_FALSE(r.fit_error_vs_spikes.has_value());
    CHECK_FALSE(r.fit_error_vs_timesteps.has_value());
}

TEST_CASE("task1 rejects invalid grids")
{
    Task1Config cfg;
    cfg.t_grid = {16, 8}; // not ascending
    CHECK_THROWS_AS(static_cast<void>(run_task1(cfg, 1)), std::invalid_argument);
    cfg.t_grid = {8};
    cfg.seeds = 0;
    CHECK_THROWS_AS(static_cast<void>(run_task1(cfg, 1)), std::invalid_argument);
}

TEST_CASE("wta convergence harness on a small grid")
{
    WtaExperimentConfig cfg;
    cfg.n_grid = {2, 4};
    cfg.t_grid = {1u << 8, 1u << 10, 1u << 12};
    cfg.trials = 8;
    cfg.base_seed = 9;
    const auto r = run_wta_convergence(cfg, 2);
    REQUIRE(r.rows.size() == 6);
    REQUIRE(r.per_n_fit.count(2) == 1);
    REQUIRE(r.per_n_fit.count(4) == 1);
    CHECK(r.per_n_fit.at(2).slope < 0.0);
    CHECK(r.per_n_fit.at(4).slope < 0.0);
    CHECK(r.gate_failures().empty());
    // Determinism across reruns and thread counts.
    CHECK(r.to_csv() == run_wta_convergence(cfg, 1).to_csv());
}

TEST_CASE("concentration harness derives Hoeffding floors and meets them")
{
    ConcentrationConfig cfg;
    cfg.x_grid = {0.5};
    cfg.delta_grid = {0.1, 0.2};
    cfg.trials = 2000;
    cfg.base_seed = 3;
    const auto r = run_encoding_concentration(cfg, 1);
    REQUIRE(r.rows.size() == 2);
    for (const auto& row : r.rows) {
        CHECK(row.meets_floor);
        CHECK(row.observed_tail < row.delta);
        CHECK(row.chernoff_bound <= row.delta + 1e-12);
    }
    CHECK(r.gate_failures().empty());
    CHECK(r.to_csv() == run_encoding_concentration(cfg, 4).to_csv());
}

TEST_CASE("concentration harness with explicit undersized T flags the floor")
{
    ConcentrationConfig cfg;
    cfg.x_grid = {0.5};
    cfg.delta_grid = {0.05};
    cfg.t_grid = {16}; // far below the floor for delta = 0.05
    cfg.trials = 500;
    const auto r = run_encoding_concentration(cfg, 1);
    REQUIRE(r.rows.size() == 1);
    CHECK_FALSE(r.rows[0].meets_floor);
}

TEST_CASE("spike-accuracy harness: coarse targets, monotone spikes")
{
    SpikeAccuracyConfig cfg;
    cfg.eps_targets = {0.5, 0.3};
    cfg.tokens = 4;
    cfg.dims = 8;
    cfg.seeds = 3;
    cfg.t_cap = 1u << 12;
    cfg.base_seed = 17;
    const auto r = run_spike_accuracy(cfg, 2);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].eps_target == doctest::Approx(0.5));
    for (const auto& row : r.rows) {
        CHECK(row.bound > 0);
        if (!row.saturated) CHECK(row.spikes_measured > 0.0);
    }
    // Tighter target never uses fewer spikes.
    CHECK(r.rows[1].spikes_measured >= r.rows[0].spikes_measured);
    CHECK(r.to_csv() == run_spike_accuracy(cfg, 1).to_csv());
}

TEST_CASE("spike-accuracy harness marks unreachable targets as saturated")
{
    SpikeAccuracyConfig cfg;
    cfg.eps_targets = {0.001}; // unreachable at a tiny T cap
    cfg.tokens = 4;
    cfg.dims = 8;
    cfg.seeds = 2;
    cfg.t_cap = 64;
    const auto r = run_spike_accuracy(cfg, 1);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].saturated);
    CHECK(r.rows[0].timesteps == 64);
}

TEST_CASE("spike-accuracy harness rejects non-descending targets")
{
    SpikeAccuracyConfig cfg;
    cfg.eps_targets = {0.3, 0.5};
    CHECK_THROWS_AS(static_cast<void>(run_spike_accuracy(cfg, 1)),
                    std::invalid_argument);
}

TEST_CASE("experiment configs built from parsed files")
{
    const auto cfg = parse_config_text(
        "[common]\n"
        "seed = 99\n"
        "[task1]\n"
        "tokens = 8\n"
        "dims = 16\n"
        "t_grid = 4, 8\n"
        "seeds = 5\n"
        "[wta]\n"
        "n_grid = 2, 4\n"
        "t_grid = 256, 512\n"
        "trials = 6\n"
        "[concentration]\n"
        "x_grid = 0.4\n"
        "delta_grid = 0.2\n"
        "trials = 100\n"
        "[spike-accuracy]\n"
        "eps_targets = 0.5, 0.4\n"
        "t_cap = 1024\n");
    const auto t1 = task1_from_config(cfg, 7);
    CHECK(t1.tokens == 8);
    CHECK(t1.dims == 16);
    CHECK(t1.t_grid == std::vector<std::uint32_t>{4, 8});
    CHECK(t1.seeds == 5);
    CHECK(t1.base_seed == 99); // file seed wins over the default
    const auto w = wta_from_config(cfg, 7);
    CHECK(w.n_grid == std::vector<std::uint32_t>{2, 4});
    CHECK(w.trials == 6);
    const auto c = concentration_from_config(cfg, 7);
    CHECK(c.x_grid == std::vector<double>{0.4});
    CHECK(c.trials == 100);
    const auto s = spike_accuracy_from_config(cfg, 7);
    CHECK(s.eps_targets == std::vector<double>{0.5, 0.4});
    CHECK(s.t_cap == 1024);

    // Without a seed entry the supplied default applies.
    const auto t2 = task1_from_config(parse_config_text("[task1]\ntokens = 4\n"), 7);
    CHECK(t2.base_seed == 7);
}

TEST_CASE("csv and summary round out: headers, file writing")
{
    Task1Config cfg;
    cfg.tokens = 4;
    cfg.dims = 8;
    cfg.t_grid = {8, 16};
    cfg.seeds = 2;
    const auto r = run_task1(cfg, 1);
    const auto csv = r.to_csv();
    CHECK(csv.rfind("timesteps,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3); // header + 2 rows

    const auto dir = std::filesystem::temp_directory_path() / "spikebench_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "task1.csv";
    write_text_file(csv, path);
    std::ifstream in(path);
    std::string back((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    CHECK(back == csv);
    std::filesystem::remove_all(dir);

    const auto j = r.summary();
    CHECK(j.contains("config"));
    CHECK(j.contains("rows"));
    CHECK(j["rows"].size() == 2);
}
