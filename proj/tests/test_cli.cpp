#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qfilter/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using qfilter::cli::RunConfig;

namespace {

const fs::path kWork = fs::path("cli_work");

std::string write_file(const std::string& name, const std::string& body) {
    fs::create_directories(kWork);
    const fs::path p = kWork / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << body;
    return p.string();
}

std::string oscillator_json(double omega, double gamma, double nu, double sigma0,
                            double hbar = 1.0) {
    std::ostringstream os;
    os.precision(17);
    os << "{\"oscillator\": {\"omega\": " << omega << ", \"gamma\": " << gamma
       << ", \"nu\": " << nu << ", \"sigma0\": " << sigma0 << ", \"hbar\": " << hbar
       << "}}";
    return os.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(QFILTER_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("validate: oscillator passes, broken and malformed models fail") {
    RunConfig config;
    config.model_path = write_file("osc.json", oscillator_json(1.0, 1.0, 0.5, 2.0));
    std::ostringstream out, err;
    CHECK(qfilter::cli::cmd_validate(config, out, err) == 0);
    const json report = json::parse(out.str());
    CHECK(report.at("pass").get<bool>());
    CHECK(report.at("nondemolition_residual").get<double>() <= 1e-12);
    CHECK(report.at("joint_noise_min_eigenvalue").get<double>() >= -1e-12);

    // D zeroed out while C0 and F stay nonzero: nondemolition violated
    config.model_path = write_file("broken.json", R"({
      "n": 1, "m": 1, "hbar": 1.0,
      "A": [[0.5, 1.0]], "J": [[1.0, 0.0]], "Q": [[0.5, 0.0]],
      "R0": [[2.0, 0.0]], "C0": [[1.0, 0.0]],
      "F": [[-1.0, 0.0]], "N": [[0.5, 0.0]], "T": [[0.5, 0.0]], "D": [[0.0, 0.0]]
    })");
    std::ostringstream out2, err2;
    CHECK(qfilter::cli::cmd_validate(config, out2, err2) == 2);
    CHECK(!json::parse(out2.str()).at("pass").get<bool>());

    // classical model: C0 = 0 and D = 0 passes
    config.model_path = write_file("classical.json", R"({
      "n": 1, "m": 1, "hbar": 1.0,
      "A": [[1.0, 0.0]], "J": [[1.0, 0.0]], "Q": [[1.0, 0.0]],
      "R0": [[1.0, 0.0]], "C0": [[0.0, 0.0]],
      "F": [[1.0, 0.0]], "N": [[0.0, 0.0]], "T": [[0.0, 0.0]], "D": [[0.0, 0.0]]
    })");
    std::ostringstream out3, err3;
    CHECK(qfilter::cli::cmd_validate(config, out3, err3) == 0);

    config.model_path = write_file("bad.json", "{\"oscillator\": oops}");
    std::ostringstream out4, err4;
    CHECK(qfilter::cli::cmd_validate(config, out4, err4) == 1);
    CHECK(err4.str().find("line") != std::string::npos);
}

TEST_CASE("synthesize: stationary model has an all-zero gain column") {
    RunConfig config;
    config.model_path = write_file("stationary.json", oscillator_json(2.0, 1.0, 0.7, 0.7));
    config.t_end = 2.0;
    config.step = 4e-3;
    config.out_dir = (kWork / "stationary_out").string();
    std::ostringstream out, err;
    REQUIRE(qfilter::cli::cmd_synthesize(config, out, err) == 0);

    const std::string csv = slurp(fs::path(config.out_dir) / "riccati.csv");
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "t,P_0_0_re,P_0_0_im,trace_error,K_0_0_re,K_0_0_im");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
        const auto cells = split(line, ',');
        REQUIRE(cells.size() == 6);
        CHECK(std::abs(std::stod(cells[4])) <= 1e-12);
        CHECK(std::abs(std::stod(cells[5])) <= 1e-12);
        ++rows;
    }
    CHECK(rows == 1001); // grid spacing is step/2

    const json synthesis = json::parse(slurp(fs::path(config.out_dir) / "synthesis.json"));
    CHECK(synthesis.at("stationarity_residual").get<double>() <= 1e-12);
}

TEST_CASE("synthesize: zero-temperature trace hits the closed form") {
    RunConfig config;
    config.model_path = write_file("floor.json", oscillator_json(1.0, 1.0, 0.0, 1.0));
    config.t_end = 1.0;
    config.step = 2e-3;
    config.out_dir = (kWork / "floor_out").string();
    std::ostringstream out, err;
    REQUIRE(qfilter::cli::cmd_synthesize(config, out, err) == 0);

    const std::string csv = slurp(fs::path(config.out_dir) / "riccati.csv");
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line); // header
    double trace_at_1 = -1.0;
    while (std::getline(lines, line)) {
        const auto cells = split(line, ',');
        if (std::abs(std::stod(cells[0]) - 1.0) < 1e-12) {
            trace_at_1 = std::stod(cells[3]);
        }
    }
    const double want = 1.0 / (2.0 * std::exp(1.0) - 1.0);
    CHECK(std::abs(trace_at_1 - want) <= 1e-8);
}

TEST_CASE("synthesize: long horizon converges to the thermal fixed point") {
    RunConfig config;
    config.model_path = write_file("converge.json", oscillator_json(1.0, 1.0, 0.6, 2.4));
    config.t_end = 25.0;
    config.step = 5e-3;
    config.out_dir = (kWork / "converge_out").string();
    std::ostringstream out, err;
    REQUIRE(qfilter::cli::cmd_synthesize(config, out, err) == 0);
    const json synthesis = json::parse(slurp(fs::path(config.out_dir) / "synthesis.json"));
    CHECK(synthesis.at("stationarity_residual").get<double>() <= 1e-8);
    const double terminal_p = synthesis.at("terminal").at("P")[0][0].get<double>();
    CHECK(std::abs(terminal_p - 0.6) <= 1e-8);
}

TEST_CASE("simulate: demo run stays within the statistical gate") {
    RunConfig config;
    config.model_path = write_file("mc.json", oscillator_json(1.0, 1.0, 1.0, 3.0));
    config.t_end = 1.0;
    config.step = 4e-3;
    config.dt = 2e-3;
    config.n_traj = 2000;
    config.seed = 7;
    config.checkpoints = {0.5, 1.0};
    config.out_dir = (kWork / "mc_out").string();
    std::ostringstream out, err;
    REQUIRE(qfilter::cli::cmd_simulate(config, out, err) == 0);

    const std::string csv = slurp(fs::path(config.out_dir) / "mc_summary.csv");
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "t,empirical_trace,standard_error,riccati_trace,z_score");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 3); // t = 0 plus two checkpoints
}

TEST_CASE("simulate: single trajectory marks the standard error unavailable") {
    RunConfig config;
    config.model_path = write_file("mc1.json", oscillator_json(1.0, 1.0, 1.0, 3.0));
    config.t_end = 0.5;
    config.step = 4e-3;
    config.dt = 2e-3;
    config.n_traj = 1;
    config.checkpoints = {0.5};
    config.out_dir = (kWork / "mc1_out").string();
    std::ostringstream out, err;
    REQUIRE(qfilter::cli::cmd_simulate(config, out, err) == 0);
    const std::string csv = slurp(fs::path(config.out_dir) / "mc_summary.csv");
    CHECK(csv.find("nan") != std::string::npos);
}

TEST_CASE("simulate: record dump writes one CSV per trajectory") {
    RunConfig config;
    config.model_path = write_file("dump.json", oscillator_json(1.0, 1.0, 0.5, 1.0));
    config.t_end = 0.1;
    config.step = 4e-3;
    config.dt = 2e-3;
    config.n_traj = 3;
    config.dump_records = true;
    config.checkpoints = {0.1};
    config.out_dir = (kWork / "dump_out").string();
    std::ostringstream out, err;
    REQUIRE(qfilter::cli::cmd_simulate(config, out, err) == 0);
    for (int traj = 0; traj < 3; ++traj) {
        const fs::path p = fs::path(config.out_dir) / ("record_" + std::to_string(traj) + ".csv");
        REQUIRE(fs::exists(p));
        std::istringstream lines(slurp(p));
        std::string header;
        std::getline(lines, header);
        CHECK(header == "t,dy1_re,dy1_im");
        std::size_t rows = 0;
        std::string line;
        while (std::getline(lines, line)) ++rows;
        CHECK(rows == 50); // 0.1 / 0.002 steps
    }
}

TEST_CASE("simulate: perturbation flag reports the optimality separation") {
    RunConfig config;
    config.model_path = write_file("perturb.json", oscillator_json(1.0, 1.0, 1.0, 3.0));
    config.t_end = 1.0;
    config.step = 4e-3;
    config.dt = 2e-3;
    config.n_traj = 4000;
    config.seed = 19;
    config.checkpoints = {1.0};
    config.perturb_gain = 0.2;
    config.out_dir = (kWork / "perturb_out").string();
    std::ostringstream out, err;
    REQUIRE(qfilter::cli::cmd_simulate(config, out, err) == 0);
    const json report = json::parse(out.str());
    const json& p = report.at("perturbation");
    CHECK(p.at("perturbed").get<double>() > p.at("baseline").get<double>());
    CHECK(p.at("significance").get<double>() > 2.0);
}

TEST_CASE("simulate: grid misalignment is a constraint error") {
    RunConfig config;
    config.model_path = write_file("misaligned.json", oscillator_json(1.0, 1.0, 1.0, 3.0));
    config.t_end = 1.0;
    config.step = 4e-3; // grid spacing 2e-3
    config.dt = 1.5e-3; // does not divide it
    config.out_dir = (kWork / "misaligned_out").string();
    std::ostringstream out, err;
    CHECK(qfilter::cli::cmd_simulate(config, out, err) == 2);
    CHECK(err.str().find("does not divide") != std::string::npos);
}

TEST_CASE("outputs are byte-identical across reruns") {
    RunConfig config;
    config.model_path = write_file("repeat.json", oscillator_json(1.0, 1.0, 1.0, 3.0));
    config.t_end = 1.0;
    config.step = 4e-3;
    config.dt = 2e-3;
    config.n_traj = 500;
    config.seed = 99;
    config.checkpoints = {0.5, 1.0};

    std::string first_csv, first_mc;
    for (int round = 0; round < 2; ++round) {
        config.out_dir = (kWork / ("repeat_out" + std::to_string(round))).string();
        std::ostringstream out, err;
        REQUIRE(qfilter::cli::cmd_synthesize(config, out, err) == 0);
        REQUIRE(qfilter::cli::cmd_simulate(config, out, err) == 0);
        const std::string csv = slurp(fs::path(config.out_dir) / "riccati.csv");
        const std::string mc = slurp(fs::path(config.out_dir) / "mc_summary.csv");
        if (round == 0) {
            first_csv = csv;
            first_mc = mc;
        } else {
            CHECK(first_csv == csv);
            CHECK(first_mc == mc);
        }
    }
}

TEST_CASE("kernels-check passes on an oscillator model") {
    RunConfig config;
    config.model_path = write_file("kc.json", oscillator_json(1.1, 1.0, 0.8, 2.0));
    config.t_end = 1.0;
    config.step = 4e-3;
    config.seed = 5;
    std::ostringstream out, err;
    CHECK(qfilter::cli::cmd_kernels_check(config, out, err) == 0);
    const json report = json::parse(out.str());
    CHECK(report.at("pass").get<bool>());
    CHECK(report.at("max_chapman_kolmogorov_residual").get<double>() <= 1e-8);
    CHECK(report.at("min_gram_eigenvalue").get<double>() >= -1e-10);
}

TEST_CASE("selftest report is byte-identical across runs") {
    std::ostringstream first, second, err;
    REQUIRE(qfilter::cli::cmd_selftest(first, err) == 0);
    REQUIRE(qfilter::cli::cmd_selftest(second, err) == 0);
    CHECK(first.str() == second.str());

    const json report = json::parse(first.str());
    CHECK(report.at("pass").get<bool>());
    CHECK(report.at("criteria").size() == 10);
    for (const auto& c : report.at("criteria")) {
        CHECK(c.at("pass").get<bool>());
    }
}

TEST_CASE("exit codes through the installed binary") {
    const std::string osc_path = write_file("bin_osc.json", oscillator_json(1.0, 1.0, 0.5, 2.0));
    const std::string bad_path = write_file("bin_bad.json", "not json at all");
    const std::string broken_path = write_file("bin_broken.json", R"({
      "n": 1, "m": 1, "hbar": 1.0,
      "A": [[0.5, 1.0]], "J": [[1.0, 0.0]], "Q": [[0.5, 0.0]],
      "R0": [[2.0, 0.0]], "C0": [[1.0, 0.0]],
      "F": [[-1.0, 0.0]], "N": [[0.5, 0.0]], "T": [[0.5, 0.0]], "D": [[0.0, 0.0]]
    })");

    CHECK(run_binary("validate --model " + osc_path) == 0);
    CHECK(run_binary("validate --model " + bad_path) == 1);
    CHECK(run_binary("validate --model " + broken_path) == 2);
    CHECK(run_binary("validate --model does_not_exist.json") == 1);

    // numerical failure: absurd step loses positivity -> exit 3
    const std::string blow_path = write_file("bin_blow.json", oscillator_json(0.0, 1.0, 0.0, 3.0));
    CHECK(run_binary("synthesize --model " + blow_path
                     + " --t-end 8 --step 4 --out " + (kWork / "blow_out").string())
          == 3);

    // statistical failure: dt far too coarse biases the empirical residual -> exit 4
    CHECK(run_binary("simulate --model " + osc_path
                     + " --t-end 4 --step 1.0 --dt 0.5 --n-traj 4000 --seed 3 "
                       "--checkpoints 2,4 --out " + (kWork / "bias_out").string())
          == 4);

    CHECK(run_binary("nonsense-subcommand") == 1);
}
