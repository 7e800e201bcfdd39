#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "spikebench/rng.hpp"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::string& binary()
{
    static const std::string bin = [] {
        const char* env = std::getenv("SPIKEBENCH_BIN");
        REQUIRE_MESSAGE(env != nullptr, "SPIKEBENCH_BIN must point at the CLI");
        return std::string(env);
    }();
    return bin;
}

const fs::path& workdir()
{
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "spikebench_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

CmdResult run_cli(const std::string& args, const std::string& env_prefix = "")
{
    const auto out_path = workdir() / "stdout.txt";
    const auto err_path = workdir() / "stderr.txt";
    const std::string cmd = env_prefix + binary() + " " + args + " > " +
                            out_path.string() + " 2> " + err_path.string();
    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    return r;
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream out(p);
    out << text;
}

} // namespace

TEST_CASE("bounds: reference values over JSON")
{
    const auto r = run_cli("--json bounds --lf 1 --n 16 --d 32 --eps 0.1");
    REQUIRE(r.exit_code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["worst_case_spikes"] == 51200);
    CHECK_FALSE(j.contains("input_dependent_spikes"));
}

TEST_CASE("bounds: input-dependent bound and compression ratio")
{
    auto r = run_cli("--json bounds --lf 1 --n 16 --d 32 --deff 47 --eps 0.1");
    REQUIRE(r.exit_code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["input_dependent_spikes"] == 4700);
    CHECK(j["compression_ratio"].get<double>() ==
          doctest::Approx(512.0 / 47.0).epsilon(1e-9));

    // d_eff = n*d collapses to the worst case.
    r = run_cli("--json bounds --lf 1 --n 16 --d 32 --deff 512 --eps 0.1");
    REQUIRE(r.exit_code == 0);
    j = nlohmann::json::parse(r.out);
    CHECK(j["input_dependent_spikes"] == j["worst_case_spikes"]);
}

TEST_CASE("bounds: domain and usage errors exit 2")
{
    CHECK(run_cli("bounds --lf 1 --n 16 --d 32 --eps 0").exit_code == 2);
    CHECK(run_cli("bounds --lf 0 --n 16 --d 32 --eps 0.1").exit_code == 2);
    CHECK(run_cli("bounds --lf 1 --n 16 --d 32 --deff 9999 --eps 0.1").exit_code == 2);
    CHECK(run_cli("bounds --lf 1 --n 16").exit_code == 2); // missing required flags
    const auto r = run_cli("bounds --lf 1 --n 16 --d 32 --eps 0");
    CHECK(r.err.find("--eps") != std::string::npos);
}

TEST_CASE("effdim: planted rank-3 CSV gives d_eff 3 with zero spread")
{
    // Exact rank-3 data: 60 rows spanned by three fixed profiles.
    spikebench::SplitMix64 rng(7);
    std::string csv;
    double basis[3][16];
    for (auto& row : basis)
        for (double& v : row) v = 2.0 * rng.uniform() - 1.0;
    for (int i = 0; i < 60; ++i) {
        const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
        for (int j = 0; j < 16; ++j) {
            const double v = a * basis[0][j] + b * basis[1][j] + c * basis[2][j];
            csv += std::to_string(v);
            csv += (j + 1 < 16) ? ',' : '\n';
        }
    }
    const auto input = workdir() / "rank3.csv";
    write_file(input, csv);

    const auto r = run_cli("--json effdim --threshold 0.999 --input " +
                           input.string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["d_eff_mean"].get<double>() == doctest::Approx(3.0));
    CHECK(j["d_eff_std"].get<double>() == doctest::Approx(0.0));
    CHECK(fs::exists(j["spectrum_csv"].get<std::string>()));
}

TEST_CASE("effdim: missing input exits 2")
{
    CHECK(run_cli("effdim --input /nonexistent/data.csv").exit_code == 2);
}

TEST_CASE("run: unknown experiment exits 2")
{
    CHECK(run_cli("run --experiment nope").exit_code == 2);
}

TEST_CASE("run: tiny wta experiment writes deterministic artifacts")
{
    const auto cfg = workdir() / "wta.ini";
    write_file(cfg, "[wta]\n"
                    "n_grid = 2, 4\n"
                    "t_grid = 256, 1024\n"
                    "trials = 5\n");
    const auto out_a = workdir() / "out_a";
    const auto out_b = workdir() / "out_b";
    const auto ra = run_cli("--seed 11 run --experiment wta --config " +
                            cfg.string() + " --out " + out_a.string());
    REQUIRE_MESSAGE(ra.exit_code == 0, ra.err);
    REQUIRE(fs::exists(out_a / "wta.csv"));
    REQUIRE(fs::exists(out_a / "wta_summary.json"));

    const auto rb = run_cli("--seed 11 run --experiment wta --config " +
                            cfg.string() + " --out " + out_b.string());
    REQUIRE(rb.exit_code == 0);
    CHECK(slurp(out_a / "wta.csv") == slurp(out_b / "wta.csv"));
    CHECK(slurp(out_a / "wta_summary.json") == slurp(out_b / "wta_summary.json"));

    // SPIKEBENCH_SEED in the environment is equivalent to --seed.
    const auto out_c = workdir() / "out_c";
    const auto rc = run_cli("run --experiment wta --config " + cfg.string() +
                                " --out " + out_c.string(),
                            "SPIKEBENCH_SEED=11 ");
    REQUIRE(rc.exit_code == 0);
    CHECK(slurp(out_a / "wta.csv") == slurp(out_c / "wta.csv"));

    // A different seed changes the measurements.
    const auto out_d = workdir() / "out_d";
    const auto rd = run_cli("--seed 12 run --experiment wta --config " +
                            cfg.string() + " --out " + out_d.string());
    REQUIRE(rd.exit_code == 0);
    CHECK(slurp(out_a / "wta.csv") != slurp(out_d / "wta.csv"));
}

TEST_CASE("fit: recovers a planted slope over JSON")
{
    const auto input = workdir() / "law.csv";
    write_file(input, "100,0.03\n1000,0.003\n10000,0.0003\n");
    const auto r = run_cli("--json fit --input " + input.string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["slope"].get<double>() == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(j["r_squared"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("fit: degenerate inputs exit 2")
{
    const auto one_row = workdir() / "one.csv";
    write_file(one_row, "100,0.03\n");
    CHECK(run_cli("fit --input " + one_row.string()).exit_code == 2);

    const auto bad = workdir() / "bad.csv";
    write_file(bad, "100,abc\n200,0.5\n");
    CHECK(run_cli("fit --input " + bad.string()).exit_code == 2);

    CHECK(run_cli("fit --input /nonexistent.csv").exit_code == 2);
    CHECK(run_cli("fit").exit_code == 2);
}

TEST_CASE("no subcommand exits 2 and --help exits 0")
{
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("--help").exit_code == 0);
}
