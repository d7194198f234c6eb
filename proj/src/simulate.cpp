#include "qfilter/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace qfilter {

namespace {

constexpr std::size_t kBlock = 1024; // trajectories per reduction block (fixed)

struct SimGrid {
    std::size_t n_steps = 0;
    std::size_t steps_per_cell = 1;
    double dt = 0.0;

    std::size_t cell(std::size_t step, std::size_t n_cells) const {
        return std::min(step / steps_per_cell, n_cells - 1);
    }
};

SimGrid make_grid(const FilterSynthesis& synth, double dt, double t_end) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw InputError("simulate: dt must be positive");
    }
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        throw InputError("simulate: t_end must be positive");
    }
    const double g = synth.spacing();
    if (!(g > 0.0)) {
        throw DimensionError("simulate: synthesis grid is degenerate");
    }
    const auto spc = static_cast<std::size_t>(std::llround(g / dt));
    if (spc < 1 || std::abs(g - static_cast<double>(spc) * dt) > 1e-9 * g) {
        std::ostringstream os;
        os << "simulate: dt=" << dt << " does not divide the synthesis grid spacing "
           << g;
        throw DimensionError(os.str());
    }
    const auto n_steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    const double horizon = synth.times.back();
    if (static_cast<double>(n_steps) * dt > horizon + 1e-9 * std::max(1.0, horizon)) {
        std::ostringstream os;
        os << "simulate: t_end=" << t_end << " exceeds the synthesis horizon " << horizon;
        throw DimensionError(os.str());
    }
    return {n_steps, spc, dt};
}

std::vector<std::size_t> record_steps_for(const std::vector<double>& record_times,
                                          const SimGrid& grid, double t_end) {
    std::vector<std::size_t> steps;
    if (record_times.empty()) {
        for (int q = 0; q <= 4; ++q) {
            steps.push_back(static_cast<std::size_t>(
                std::llround(0.25 * q * t_end / grid.dt)));
        }
    } else {
        for (double t : record_times) {
            const auto idx = static_cast<std::size_t>(std::llround(t / grid.dt));
            if (t < -1e-12 || std::abs(t - static_cast<double>(idx) * grid.dt)
                                  > 1e-9 * std::max(1.0, t)) {
                std::ostringstream os;
                os << "simulate: record time " << t << " is not a multiple of dt=" << grid.dt;
                throw DimensionError(os.str());
            }
            if (idx > grid.n_steps) {
                std::ostringstream os;
                os << "simulate: record time " << t << " is past t_end";
                throw DimensionError(os.str());
            }
            steps.push_back(idx);
        }
    }
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    return steps;
}

int pick_workers(int requested, std::size_t n_blocks) {
    int w = requested > 0 ? requested
                          : static_cast<int>(std::thread::hardware_concurrency());
    if (w < 1) w = 1;
    return static_cast<int>(std::min<std::size_t>(w, n_blocks));
}

/// Runs blocks [0, n_blocks) across workers; fn(block) must only touch
/// block-local state. Combination order is the caller's responsibility.
template <typename Fn>
void run_blocks(std::size_t n_blocks, int workers, Fn&& fn) {
    if (workers <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) {
        pool.emplace_back([&] {
            for (std::size_t b = next.fetch_add(1); b < n_blocks; b = next.fetch_add(1)) {
                fn(b);
            }
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace

SurrogateNoiseSpec build_noise_spec(const SignalModel& sig, const ChannelModel& ch) {
    ComplexMatrix joint = joint_noise_covariance(sig, ch);
    const double res = hermitian_residual(joint);
    if (res > 1e-10 * (1.0 + joint.norm())) {
        throw NumericError("no classical realization: joint noise covariance not Hermitian");
    }
    ComplexMatrix factor;
    try {
        factor = factor_psd(joint);
    } catch (const NumericError&) {
        throw NumericError("no classical realization: joint noise covariance indefinite");
    }
    return {std::move(joint), std::move(factor), sig.m()};
}

std::pair<ComplexVector, ComplexVector> sample_increments(const SurrogateNoiseSpec& spec,
                                                          double dt, SplitMix64& stream) {
    if (!(dt > 0.0)) {
        throw InputError("sample_increments: dt must be positive");
    }
    ComplexVector z(2 * spec.m);
    fill_standard_circular(stream, z);
    ComplexVector w = spec.factor * z * std::sqrt(dt);
    return {w.head(spec.m), w.tail(spec.m)};
}

TrajectoryBundle simulate_bundle(const SignalModel& sig, const ChannelModel& ch,
                                 const FilterSynthesis& synth, double dt, double t_end,
                                 int n_traj, std::uint64_t seed,
                                 SimulationOptions options) {
    require_compatible(sig, ch);
    if (n_traj < 1) {
        throw InputError("simulate_bundle: n_traj must be at least 1");
    }
    const SimGrid grid = make_grid(synth, dt, t_end);
    const std::vector<std::size_t> rec_steps = record_steps_for(options.record_times, grid, t_end);
    const SurrogateNoiseSpec spec = build_noise_spec(sig, ch);
    const ComplexMatrix init_factor = factor_psd(sig.R0());

    if (options.noise_substeps < 1) {
        throw InputError("simulate_bundle: noise_substeps must be at least 1");
    }
    const Eigen::Index n = sig.n();
    const Eigen::Index m = sig.m();
    const std::size_t n_rec = rec_steps.size();
    const std::size_t n_cells = synth.K.size();
    const int substeps = options.noise_substeps;
    const double sqrt_sub_dt = std::sqrt(dt / substeps);

    TrajectoryBundle bundle;
    bundle.seed = seed;
    bundle.dt = dt;
    bundle.n_traj = n_traj;
    bundle.times.resize(n_rec);
    for (std::size_t r = 0; r < n_rec; ++r) {
        bundle.times[r] = static_cast<double>(rec_steps[r]) * dt;
    }
    if (options.store_paths) {
        bundle.signal.assign(static_cast<std::size_t>(n_traj),
                             std::vector<ComplexVector>(n_rec));
        bundle.estimate.assign(static_cast<std::size_t>(n_traj),
                               std::vector<ComplexVector>(n_rec));
    }

    struct BlockSums {
        std::vector<ComplexMatrix> moment;
        std::vector<double> tr_sum, tr_sq;
    };
    const std::size_t n_blocks = (static_cast<std::size_t>(n_traj) + kBlock - 1) / kBlock;
    std::vector<BlockSums> partial(n_blocks);

    const bool serial = static_cast<bool>(options.record_sink);
    const int workers = serial ? 1 : pick_workers(options.workers, n_blocks);

    run_blocks(n_blocks, workers, [&](std::size_t b) {
        BlockSums& acc = partial[b];
        acc.moment.assign(n_rec, ComplexMatrix::Zero(n, n));
        acc.tr_sum.assign(n_rec, 0.0);
        acc.tr_sq.assign(n_rec, 0.0);

        ComplexVector s(n), x(n), z_init(n), z(2 * m), w(2 * m), wsub(2 * m), dy(m),
            innov(m), drift(n), resid(n);
        const std::size_t lo = b * kBlock;
        const std::size_t hi = std::min(lo + kBlock, static_cast<std::size_t>(n_traj));
        for (std::size_t traj = lo; traj < hi; ++traj) {
            SplitMix64 g(stream_seed(seed, traj));
            fill_standard_circular(g, z_init);
            s.noalias() = init_factor * z_init;
            x.setZero();

            std::size_t rec_pos = 0;
            auto record = [&](std::size_t step) {
                while (rec_pos < n_rec && rec_steps[rec_pos] == step) {
                    resid = s - x;
                    acc.moment[rec_pos].noalias() += resid * resid.adjoint();
                    const double tr = resid.squaredNorm();
                    acc.tr_sum[rec_pos] += tr;
                    acc.tr_sq[rec_pos] += tr * tr;
                    if (options.store_paths) {
                        bundle.signal[traj][rec_pos] = s;
                        bundle.estimate[traj][rec_pos] = x;
                    }
                    ++rec_pos;
                }
            };
            record(0);

            for (std::size_t j = 0; j < grid.n_steps; ++j) {
                const ComplexMatrix& K = synth.K[grid.cell(j, n_cells)];
                w.setZero();
                for (int sub = 0; sub < substeps; ++sub) {
                    fill_standard_circular(g, z);
                    wsub.noalias() = spec.factor * z;
                    w += sqrt_sub_dt * wsub;
                }

                dy.noalias() = ch.F() * s;
                dy *= dt;
                dy += w.tail(m);
                if (options.record_sink) {
                    options.record_sink(static_cast<int>(traj),
                                        static_cast<double>(j) * dt, dy);
                }

                drift.noalias() = sig.A() * s;
                s -= dt * drift;
                s.noalias() += sig.J() * w.head(m);

                innov.noalias() = ch.F() * x;
                innov = dy - dt * innov;
                drift.noalias() = sig.A() * x;
                x -= dt * drift;
                x.noalias() += K * innov;

                record(j + 1);
            }
        }
    });

    bundle.residual_second_moment.assign(n_rec, ComplexMatrix::Zero(n, n));
    bundle.empirical_trace.assign(n_rec, 0.0);
    bundle.standard_error.assign(n_rec, std::numeric_limits<double>::quiet_NaN());
    const double count = static_cast<double>(n_traj);
    for (std::size_t r = 0; r < n_rec; ++r) {
        ComplexMatrix total = ComplexMatrix::Zero(n, n);
        double tr_sum = 0.0, tr_sq = 0.0;
        for (std::size_t b = 0; b < n_blocks; ++b) {
            total += partial[b].moment[r];
            tr_sum += partial[b].tr_sum[r];
            tr_sq += partial[b].tr_sq[r];
        }
        bundle.residual_second_moment[r] = symmetrize(total / count);
        bundle.empirical_trace[r] = tr_sum / count;
        if (n_traj > 1) {
            const double var =
                std::max(0.0, (tr_sq - tr_sum * tr_sum / count) / (count - 1.0));
            bundle.standard_error[r] = std::sqrt(var / count);
        }
    }
    return bundle;
}

PerturbationReport gain_perturbation_test(const SignalModel& sig, const ChannelModel& ch,
                                          const FilterSynthesis& synth, double dt,
                                          double t_end, int n_traj, std::uint64_t seed,
                                          double epsilon, int workers) {
    require_compatible(sig, ch);
    if (n_traj < 1) {
        throw InputError("gain_perturbation_test: n_traj must be at least 1");
    }
    const SimGrid grid = make_grid(synth, dt, t_end);
    const SurrogateNoiseSpec spec = build_noise_spec(sig, ch);
    const ComplexMatrix init_factor = factor_psd(sig.R0());

    const Eigen::Index n = sig.n();
    const Eigen::Index m = sig.m();
    const std::size_t n_cells = synth.K.size();
    const double sqrt_dt = std::sqrt(dt);

    std::vector<ComplexMatrix> K_pert(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        K_pert[c] = (1.0 + epsilon) * synth.K[c];
    }

    struct BlockSums {
        double base = 0.0, pert = 0.0, diff = 0.0, diff_sq = 0.0;
    };
    const std::size_t n_blocks = (static_cast<std::size_t>(n_traj) + kBlock - 1) / kBlock;
    std::vector<BlockSums> partial(n_blocks);

    run_blocks(n_blocks, pick_workers(workers, n_blocks), [&](std::size_t b) {
        BlockSums& acc = partial[b];
        ComplexVector s(n), xb(n), xp(n), z_init(n), z(2 * m), w(2 * m), dy(m),
            innov(m), drift(n);
        const std::size_t lo = b * kBlock;
        const std::size_t hi = std::min(lo + kBlock, static_cast<std::size_t>(n_traj));
        for (std::size_t traj = lo; traj < hi; ++traj) {
            SplitMix64 g(stream_seed(seed, traj));
            fill_standard_circular(g, z_init);
            s.noalias() = init_factor * z_init;
            xb.setZero();
            xp.setZero();

            double sum_base = 0.0, sum_pert = 0.0;
            for (std::size_t j = 0; j < grid.n_steps; ++j) {
                const std::size_t cell = grid.cell(j, n_cells);
                fill_standard_circular(g, z);
                w.noalias() = spec.factor * z;
                w *= sqrt_dt;

                dy.noalias() = ch.F() * s;
                dy *= dt;
                dy += w.tail(m);

                drift.noalias() = sig.A() * s;
                s -= dt * drift;
                s.noalias() += sig.J() * w.head(m);

                innov.noalias() = ch.F() * xb;
                innov = dy - dt * innov;
                drift.noalias() = sig.A() * xb;
                xb -= dt * drift;
                xb.noalias() += synth.K[cell] * innov;

                innov.noalias() = ch.F() * xp;
                innov = dy - dt * innov;
                drift.noalias() = sig.A() * xp;
                xp -= dt * drift;
                xp.noalias() += K_pert[cell] * innov;

                sum_base += (s - xb).squaredNorm();
                sum_pert += (s - xp).squaredNorm();
            }
            const double steps = static_cast<double>(grid.n_steps);
            const double tavg_b = sum_base / steps;
            const double tavg_p = sum_pert / steps;
            acc.base += tavg_b;
            acc.pert += tavg_p;
            acc.diff += tavg_p - tavg_b;
            acc.diff_sq += (tavg_p - tavg_b) * (tavg_p - tavg_b);
        }
    });

    double base = 0.0, pert = 0.0, diff = 0.0, diff_sq = 0.0;
    for (const BlockSums& acc : partial) {
        base += acc.base;
        pert += acc.pert;
        diff += acc.diff;
        diff_sq += acc.diff_sq;
    }
    const double count = static_cast<double>(n_traj);
    PerturbationReport report;
    report.baseline = base / count;
    report.perturbed = pert / count;
    if (n_traj > 1) {
        const double var =
            std::max(0.0, (diff_sq - diff * diff / count) / (count - 1.0));
        const double se = std::sqrt(var / count);
        report.significance = se > 0.0 ? (diff / count) / se : 0.0;
    }
    return report;
}

} // namespace qfilter
