#pragma once

#include <utility>
#include <vector>

#include "qfilter/matrix_ops.hpp"

namespace qfilter {

/// Linear diffusion driven by circular white noise:
///   dx/dt + A x = J a,   E[a a^+] = Q per unit time,
/// with initial correlation R0, commutator matrix C0 and scale constant hbar.
class SignalModel {
public:
    SignalModel(ComplexMatrix A, ComplexMatrix J, ComplexMatrix Q,
                ComplexMatrix R0, ComplexMatrix C0, double hbar);

    Eigen::Index n() const { return a_.rows(); }
    Eigen::Index m() const { return j_.cols(); }

    const ComplexMatrix& A() const { return a_; }
    const ComplexMatrix& J() const { return j_; }
    const ComplexMatrix& Q() const { return q_; }
    const ComplexMatrix& R0() const { return r0_; }
    const ComplexMatrix& C0() const { return c0_; }
    double hbar() const { return hbar_; }

private:
    ComplexMatrix a_, j_, q_, r0_, c0_;
    double hbar_;
};

/// Output channel b = F x + a' with channel noise correlation N,
/// signal/channel cross correlation T and commutator cross matrix D.
class ChannelModel {
public:
    ChannelModel(ComplexMatrix F, ComplexMatrix N, ComplexMatrix T, ComplexMatrix D);

    Eigen::Index m() const { return f_.rows(); }
    Eigen::Index n() const { return f_.cols(); }

    const ComplexMatrix& F() const { return f_; }
    const ComplexMatrix& N() const { return n_; }
    const ComplexMatrix& T() const { return t_; }
    const ComplexMatrix& D() const { return d_; }

private:
    ComplexMatrix f_, n_, t_, d_;
};

/// Damped mode of frequency omega and damping gamma coupled to a matched
/// line, with thermal occupation nu and initial occupation sigma0.
struct OscillatorModel {
    double omega = 0.0;
    double gamma = 1.0;
    double nu = 0.0;
    double sigma0 = 0.0;
    double hbar = 1.0;

    /// Throws InputError when gamma <= 0, nu < 0, sigma0 < 0 or hbar <= 0.
    void validate() const;
};

struct PhysicalConstants {
    double hbar = 1.0;
    double boltzmann = 1.0;
};

/// One time segment of a piecewise-constant model schedule.
struct ModelSegment {
    double start;
    SignalModel signal;
    ChannelModel channel;
};

/// Throws DimensionError when the two models disagree on n or m.
void require_compatible(const SignalModel& sig, const ChannelModel& ch);

/// ||J D + C0 F^+||_F. Zero means the observed output commutes with the
/// present and future signal, which is what makes causal estimation of the
/// signal meaningful.
double validate_nondemolition(const SignalModel& sig, const ChannelModel& ch);

/// Least-squares D minimizing ||J D + C0 F^+||_F (exact when J is square
/// invertible). Throws NumericError when a rank-deficient J leaves a
/// nonzero attainable residual.
ComplexMatrix solve_nondemolition_D(const ComplexMatrix& J, const ComplexMatrix& C0,
                                    const ComplexMatrix& F);

/// ||A C0 + C0 A^+ - J J^+||_F; zero when the signal commutators are
/// preserved by the dynamics.
double validate_commutator_preservation(const SignalModel& sig);

/// Maps the oscillator onto the general one-dimensional model. The result
/// passes both structural validators to machine precision.
std::pair<SignalModel, ChannelModel> oscillator_to_general(const OscillatorModel& osc);

/// Mean thermal occupation nu = 1/(exp(hbar*gamma/(k*T)) - 1), temp > 0.
double mean_occupation(double temp, double gamma, const PhysicalConstants& constants);

/// Effective measurement-noise intensity sigma = hbar * (nu + 1) * gamma.
double effective_intensity(double nu, double gamma, double hbar);

/// Equilibrium temperature T = hbar*omega / (k * ln(1 + 1/sigma_occ)).
double temperature_from_occupation(double sigma_occ, double omega,
                                   const PhysicalConstants& constants);

/// Joint per-unit-time covariance [[Q, T^+], [T, N+I]] of the stacked
/// (signal-noise, measurement-noise) surrogate increments.
ComplexMatrix joint_noise_covariance(const SignalModel& sig, const ChannelModel& ch);

} // namespace qfilter
