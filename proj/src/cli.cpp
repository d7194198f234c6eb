#include "qfilter/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>

#include <json.hpp>

#include "qfilter/csv.hpp"
#include "qfilter/model_io.hpp"
#include "qfilter/selftest.hpp"
#include "qfilter/simulate.hpp"

namespace qfilter::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

int run_guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

ordered_json matrix_json(const ComplexMatrix& m) {
    ordered_json arr = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            arr.push_back({m(i, j).real(), m(i, j).imag()});
        }
    }
    return arr;
}

struct ValidationNumbers {
    double nondemolition = 0.0;
    double preservation = 0.0;
    double joint_min_eig = 0.0;
    bool pass = false;
};

ValidationNumbers validate_numbers(const SignalModel& sig, const ChannelModel& ch) {
    ValidationNumbers v;
    v.nondemolition = validate_nondemolition(sig, ch);
    v.preservation = validate_commutator_preservation(sig);
    const ComplexMatrix joint = joint_noise_covariance(sig, ch);
    v.joint_min_eig = min_eigenvalue_hermitian(joint);
    const double nd_scale =
        1.0 + sig.J().norm() * ch.D().norm() + sig.C0().norm() * ch.F().norm();
    const double pres_scale =
        1.0 + 2.0 * sig.A().norm() * sig.C0().norm() + sig.J().squaredNorm();
    // A classical signal (C0 = 0) has no commutators to preserve; only the
    // nondemolition and realizability constraints bind there.
    const bool preservation_ok =
        sig.C0().norm() == 0.0 || v.preservation <= 1e-10 * pres_scale;
    v.pass = v.nondemolition <= 1e-10 * nd_scale && preservation_ok
             && v.joint_min_eig >= -1e-10 * (1.0 + joint.norm());
    return v;
}

std::string out_path(const RunConfig& config, const std::string& name) {
    std::filesystem::create_directories(config.out_dir);
    return (std::filesystem::path(config.out_dir) / name).string();
}

/// Checkpoints snapped to the synthesis grid; defaults to {0.5,1,2,3}/gamma
/// for oscillator models and to quarters of the horizon otherwise.
std::vector<double> resolve_checkpoints(const RunConfig& config, const LoadedModel& model,
                                        const FilterSynthesis& synth) {
    std::vector<double> wanted = config.checkpoints;
    if (wanted.empty()) {
        if (model.oscillator) {
            for (double c : {0.5, 1.0, 2.0, 3.0}) {
                const double t = c / model.oscillator->gamma;
                if (t <= config.t_end * (1.0 + 1e-9)) wanted.push_back(t);
            }
        }
        if (wanted.empty()) {
            for (int q = 1; q <= 4; ++q) wanted.push_back(0.25 * q * config.t_end);
        }
    }
    const double g = synth.spacing();
    std::vector<double> snapped;
    for (double t : wanted) {
        if (t < 0.0 || t > config.t_end * (1.0 + 1e-9)) {
            throw InputError("checkpoint outside [0, t_end]");
        }
        snapped.push_back(static_cast<double>(std::llround(t / g)) * g);
    }
    return snapped;
}

} // namespace

int cmd_validate(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        const LoadedModel model = load_model_file(config.model_path);
        const ValidationNumbers v = validate_numbers(model.signal, model.channel);
        ordered_json report;
        report["nondemolition_residual"] = v.nondemolition;
        report["preservation_residual"] = v.preservation;
        report["joint_noise_min_eigenvalue"] = v.joint_min_eig;
        report["pass"] = v.pass;
        out << report.dump(2) << "\n";
        return v.pass ? 0 : 2;
    });
}

int cmd_synthesize(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        const LoadedModel model = load_model_file(config.model_path);
        const ValidationNumbers v = validate_numbers(model.signal, model.channel);
        if (!v.pass) {
            err << "error: model fails structural validation\n";
            return 2;
        }
        const FilterSynthesis synth =
            integrate_riccati(model.signal, model.channel, config.t_end, config.step);

        const Eigen::Index n = model.signal.n();
        const Eigen::Index m = model.signal.m();
        std::vector<std::string> header{"t"};
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                header.push_back("P_" + std::to_string(i) + "_" + std::to_string(j) + "_re");
                header.push_back("P_" + std::to_string(i) + "_" + std::to_string(j) + "_im");
            }
        }
        header.push_back("trace_error");
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < m; ++j) {
                header.push_back("K_" + std::to_string(i) + "_" + std::to_string(j) + "_re");
                header.push_back("K_" + std::to_string(i) + "_" + std::to_string(j) + "_im");
            }
        }
        std::vector<std::vector<double>> rows;
        rows.reserve(synth.size());
        for (std::size_t k = 0; k < synth.size(); ++k) {
            std::vector<double> row{synth.times[k]};
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < n; ++j) {
                    row.push_back(synth.P[k](i, j).real());
                    row.push_back(synth.P[k](i, j).imag());
                }
            }
            row.push_back(synth.trace_error[k]);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < m; ++j) {
                    row.push_back(synth.K[k](i, j).real());
                    row.push_back(synth.K[k](i, j).imag());
                }
            }
            rows.push_back(std::move(row));
        }
        const std::string csv_path = out_path(config, "riccati.csv");
        write_csv(csv_path, header, rows);

        const std::size_t last = synth.size() - 1;
        ordered_json terminal;
        terminal["t"] = synth.times[last];
        terminal["P"] = matrix_json(synth.P[last]);
        terminal["K"] = matrix_json(synth.K[last]);
        terminal["B"] = matrix_json(synth.B[last]);
        ordered_json report;
        report["terminal"] = terminal;
        report["stationarity_residual"] =
            riccati_rhs(synth.P[last], model.signal, model.channel).norm();
        report["richardson_error"] = synth.richardson_error;
        const std::string json_path = out_path(config, "synthesis.json");
        std::ofstream jf(json_path, std::ios::binary | std::ios::trunc);
        jf << report.dump(2) << "\n";

        out << "wrote " << csv_path << " and " << json_path << "\n";
        return 0;
    });
}

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        const LoadedModel model = load_model_file(config.model_path);
        const ValidationNumbers v = validate_numbers(model.signal, model.channel);
        if (!v.pass) {
            err << "error: model fails structural validation\n";
            return 2;
        }
        const FilterSynthesis synth =
            integrate_riccati(model.signal, model.channel, config.t_end, config.step);

        SimulationOptions opts;
        opts.record_times = resolve_checkpoints(config, model, synth);
        opts.record_times.insert(opts.record_times.begin(), 0.0);
        opts.store_paths = false;
        opts.workers = config.workers;

        std::ofstream record_file;
        int record_current = -1;
        if (config.dump_records) {
            const Eigen::Index m = model.signal.m();
            opts.record_sink = [&, m](int traj, double t, const ComplexVector& dy) {
                if (traj != record_current) {
                    record_current = traj;
                    record_file.close();
                    record_file.open(out_path(config, "record_" + std::to_string(traj) + ".csv"),
                                     std::ios::binary | std::ios::trunc);
                    record_file << "t";
                    for (Eigen::Index c = 0; c < m; ++c) {
                        record_file << ",dy" << (c + 1) << "_re,dy" << (c + 1) << "_im";
                    }
                    record_file << "\n";
                }
                record_file << format_sig12(t);
                for (Eigen::Index c = 0; c < dy.size(); ++c) {
                    record_file << ',' << format_sig12(dy(c).real()) << ','
                                << format_sig12(dy(c).imag());
                }
                record_file << "\n";
            };
        }

        const TrajectoryBundle bundle =
            simulate_bundle(model.signal, model.channel, synth, config.dt, config.t_end,
                            config.n_traj, config.seed, opts);
        record_file.close();

        std::vector<std::vector<double>> rows;
        double max_abs_z = 0.0;
        bool any_z = false;
        for (std::size_t r = 0; r < bundle.times.size(); ++r) {
            const double t = bundle.times[r];
            const double predicted = synth.trace_error[synth.index_of(t)];
            const double se = bundle.standard_error[r];
            double z = std::numeric_limits<double>::quiet_NaN();
            if (!std::isnan(se)) {
                const double diff = bundle.empirical_trace[r] - predicted;
                z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0
                                                        : std::numeric_limits<double>::infinity());
                max_abs_z = std::max(max_abs_z, std::abs(z));
                any_z = true;
            }
            rows.push_back({t, bundle.empirical_trace[r], se, predicted, z});
        }
        const std::string csv_path = out_path(config, "mc_summary.csv");
        write_csv(csv_path,
                  {"t", "empirical_trace", "standard_error", "riccati_trace", "z_score"},
                  rows);

        ordered_json report;
        report["trajectories"] = config.n_traj;
        report["max_abs_z"] = any_z ? ordered_json(max_abs_z) : ordered_json(nullptr);
        if (config.perturb_gain) {
            const PerturbationReport pr = gain_perturbation_test(
                model.signal, model.channel, synth, config.dt, config.t_end,
                config.n_traj, config.seed, *config.perturb_gain, config.workers);
            ordered_json pj;
            pj["epsilon"] = *config.perturb_gain;
            pj["baseline"] = pr.baseline;
            pj["perturbed"] = pr.perturbed;
            pj["significance"] = pr.significance;
            report["perturbation"] = pj;
        }
        out << report.dump(2) << "\n";
        return (any_z && max_abs_z > 4.0) ? 4 : 0;
    });
}

int cmd_kernels_check(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        const LoadedModel model = load_model_file(config.model_path);
        const ValidationNumbers v = validate_numbers(model.signal, model.channel);
        if (!v.pass) {
            err << "error: model fails structural validation\n";
            return 2;
        }
        const FilterSynthesis synth =
            integrate_riccati(model.signal, model.channel, config.t_end, config.step);
        const double ck = selftest::max_chapman_kolmogorov_residual(
            synth, model.channel, 20, config.seed);
        const double gram = selftest::min_bochner_gram_eigenvalue(
            synth, model.channel, 100, config.seed);
        const bool pass = ck <= 1e-8 && gram >= -1e-10;
        ordered_json report;
        report["max_chapman_kolmogorov_residual"] = ck;
        report["min_gram_eigenvalue"] = gram;
        report["pass"] = pass;
        out << report.dump(2) << "\n";
        return pass ? 0 : 3;
    });
}

int cmd_selftest(std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        const std::vector<selftest::CriterionResult> results = selftest::run_all();
        ordered_json arr = ordered_json::array();
        for (const auto& r : results) {
            ordered_json c;
            c["id"] = r.id;
            c["name"] = r.name;
            c["pass"] = r.pass;
            c["measured"] = r.measured;
            c["threshold"] = r.threshold;
            c["detail"] = r.detail;
            arr.push_back(c);
        }
        ordered_json report;
        report["criteria"] = arr;
        report["pass"] = selftest::all_passed(results);
        out << report.dump(2) << "\n";
        return selftest::all_passed(results) ? 0 : 3;
    });
}

} // namespace qfilter::cli
