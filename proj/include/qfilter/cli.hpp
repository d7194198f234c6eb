#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qfilter::cli {

/// Exit codes shared by every subcommand:
///   0 pass, 1 input error, 2 constraint/grid error, 3 numerical failure,
///   4 statistical failure.
struct RunConfig {
    std::string model_path;
    double t_end = 3.0;
    double step = 2e-3;
    double dt = 1e-3;
    int n_traj = 20000;
    std::uint64_t seed = 12345;
    std::string out_dir = ".";
    std::vector<double> checkpoints; ///< empty selects the model-dependent default
    bool dump_records = false;
    std::optional<double> perturb_gain;
    int workers = 0;
};

/// Structural validation report (JSON on `out`).
int cmd_validate(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Writes riccati.csv and synthesis.json into out_dir.
int cmd_synthesize(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Writes mc_summary.csv (and optional record_*.csv dumps) into out_dir;
/// exits 4 when any checkpoint z-score exceeds 4.
int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Kernel composition and Gram positivity sweeps on the model.
int cmd_kernels_check(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Runs the full verification suite; JSON report on `out`.
int cmd_selftest(std::ostream& out, std::ostream& err);

} // namespace qfilter::cli
