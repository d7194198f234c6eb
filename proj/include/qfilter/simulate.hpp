#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "qfilter/kernels.hpp"
#include "qfilter/rng.hpp"

namespace qfilter {

/// Per-unit-time covariance of the stacked (signal-noise, measurement-noise)
/// circular complex increments, [[Q, T^+], [T, N+I]], with its PSD factor.
struct SurrogateNoiseSpec {
    ComplexMatrix joint;  ///< 2m x 2m Hermitian PSD
    ComplexMatrix factor; ///< L with L L^+ = joint
    Eigen::Index m = 0;
};

/// Seeded Monte-Carlo summary over a fixed record grid. Statistics are
/// accumulated in ascending trajectory order within fixed-size blocks, so
/// regeneration with the same seed is bit-identical under any worker count.
struct TrajectoryBundle {
    std::uint64_t seed = 0;
    double dt = 0.0;
    std::vector<double> times; ///< record grid
    int n_traj = 0;

    std::vector<std::vector<ComplexVector>> signal;   ///< [traj][record]
    std::vector<std::vector<ComplexVector>> estimate; ///< [traj][record]

    std::vector<ComplexMatrix> residual_second_moment; ///< [record], n x n
    std::vector<double> empirical_trace;               ///< [record]
    std::vector<double> standard_error;                ///< [record]; NaN when n_traj < 2
};

struct SimulationOptions {
    /// Instants at which moments and paths are recorded; must be multiples
    /// of dt inside [0, t_end]. Empty selects {0, t/4, t/2, 3t/4, t_end}
    /// snapped to the dt grid.
    std::vector<double> record_times;
    /// Worker threads; 0 picks the hardware count. The result does not
    /// depend on this value.
    int workers = 0;
    /// When set, receives every measurement increment dy in trajectory and
    /// step order (forces a single worker).
    std::function<void(int traj, double t, const ComplexVector& dy)> record_sink;
    /// Keep per-trajectory paths (on by default; moments are always kept).
    bool store_paths = true;
    /// Number of noise draws summed into each Euler-Maruyama step. A run at
    /// dt with k substeps consumes the stream exactly like a run at dt/k
    /// with one, so the two share the same driving path; used for
    /// discretization studies.
    int noise_substeps = 1;
};

/// Joint surrogate covariance with its factor; throws NumericError when the
/// joint covariance is indefinite (no classical realization exists).
SurrogateNoiseSpec build_noise_spec(const SignalModel& sig, const ChannelModel& ch);

/// Draws one step's worth of correlated circular complex increments
/// (dW_sig, dW_meas) with E[dW dW^+] = joint * dt and zero pseudo-covariance.
std::pair<ComplexVector, ComplexVector> sample_increments(const SurrogateNoiseSpec& spec,
                                                          double dt, SplitMix64& stream);

/// Euler-Maruyama simulation of the surrogate signal, the measurement
/// record and the synthesized filter; accumulates residual second moments
/// at the record grid. dt must divide the synthesis grid spacing.
TrajectoryBundle simulate_bundle(const SignalModel& sig, const ChannelModel& ch,
                                 const FilterSynthesis& synth, double dt, double t_end,
                                 int n_traj, std::uint64_t seed,
                                 SimulationOptions options = {});

struct PerturbationReport {
    double baseline = 0.0;    ///< time-averaged residual trace with K(t)
    double perturbed = 0.0;   ///< same with (1+epsilon) K(t)
    double significance = 0.0; ///< (perturbed - baseline) in paired-SE units
};

/// Reruns the filter with gain (1+epsilon) K(t) on common random numbers
/// and reports the paired separation of the time-averaged residual traces.
PerturbationReport gain_perturbation_test(const SignalModel& sig, const ChannelModel& ch,
                                          const FilterSynthesis& synth, double dt,
                                          double t_end, int n_traj, std::uint64_t seed,
                                          double epsilon, int workers = 0);

} // namespace qfilter
