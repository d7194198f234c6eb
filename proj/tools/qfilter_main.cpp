#include <iostream>

#include <CLI11.hpp>

#include "qfilter/cli.hpp"

namespace {

void add_model_options(CLI::App* cmd, qfilter::cli::RunConfig& config,
                       bool require_model = true) {
    auto* opt = cmd->add_option("--model", config.model_path, "model JSON file");
    if (require_model) opt->required();
    cmd->add_option("--t-end", config.t_end, "integration horizon");
    cmd->add_option("--step", config.step, "Riccati integration step");
    cmd->add_option("--dt", config.dt, "Monte-Carlo step");
    cmd->add_option("--n-traj", config.n_traj, "number of trajectories");
    cmd->add_option("--seed", config.seed, "master seed");
    cmd->add_option("--out", config.out_dir, "output directory");
    cmd->add_option("--checkpoints", config.checkpoints, "comparison instants")
        ->delimiter(',');
    cmd->add_option("--workers", config.workers,
                    "worker threads (0 = hardware; result is identical either way)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"optimal linear filter synthesis for Gaussian open quantum systems"};
    app.require_subcommand(1);

    qfilter::cli::RunConfig config;

    CLI::App* validate = app.add_subcommand("validate", "check structural constraints");
    add_model_options(validate, config);

    CLI::App* synthesize =
        app.add_subcommand("synthesize", "integrate the filter and write riccati.csv");
    add_model_options(synthesize, config);

    CLI::App* simulate =
        app.add_subcommand("simulate", "Monte-Carlo comparison against the synthesis");
    add_model_options(simulate, config);
    simulate->add_flag("--dump-records", config.dump_records,
                       "write one measurement-record CSV per trajectory");
    double perturb = 0.0;
    CLI::Option* perturb_opt = simulate->add_option(
        "--perturb-gain", perturb, "also rerun with gain scaled by (1+eps)");

    CLI::App* kernels =
        app.add_subcommand("kernels-check", "composition and positivity sweeps");
    add_model_options(kernels, config);

    app.add_subcommand("selftest", "run the full verification suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (perturb_opt->count() > 0) config.perturb_gain = perturb;

    if (validate->parsed()) return qfilter::cli::cmd_validate(config, std::cout, std::cerr);
    if (synthesize->parsed()) return qfilter::cli::cmd_synthesize(config, std::cout, std::cerr);
    if (simulate->parsed()) return qfilter::cli::cmd_simulate(config, std::cout, std::cerr);
    if (kernels->parsed()) return qfilter::cli::cmd_kernels_check(config, std::cout, std::cerr);
    return qfilter::cli::cmd_selftest(std::cout, std::cerr);
}
