#pragma once

#include <cstddef>
#include <vector>

#include "qfilter/model.hpp"

namespace qfilter {

/// Time-gridded filter synthesis: posterior correlation P, gain K and
/// closed-loop drift B, plus the companion covariances used for
/// verification. The grid spacing is half the requested integration step
/// (the step-halved pass is the one reported).
struct FilterSynthesis {
    SignalModel signal;
    ChannelModel channel;

    std::vector<double> times;
    std::vector<ComplexMatrix> P;      ///< posterior correlation, P(0) = R0
    std::vector<ComplexMatrix> K;      ///< gain (PF^+ + JT^+)(N+I)^-1
    std::vector<ComplexMatrix> B;      ///< closed-loop drift A + KF
    std::vector<double> trace_error;   ///< tr P(t), the minimal mean quadratic error
    std::vector<ComplexMatrix> G_cl;   ///< estimate covariance (innovations form)
    std::vector<ComplexMatrix> R;      ///< unconditional correlation
    std::vector<ComplexMatrix> C_comm; ///< filter commutator matrix

    /// Step-halving estimate of the global integration error on P.
    double richardson_error = 0.0;

    std::size_t size() const { return times.size(); }
    double spacing() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }

    /// Index of a grid-aligned instant; throws DimensionError when t is not
    /// on the grid (relative tolerance 1e-9).
    std::size_t index_of(double t) const;
};

/// Optimal gain K = (P F^+ + J T^+)(N+I)^-1, computed through the adjoint
/// HPD system.
ComplexMatrix gain(const ComplexMatrix& P, const SignalModel& sig, const ChannelModel& ch);

/// Closed-loop drift B = A + K F.
ComplexMatrix filter_drift(const ComplexMatrix& A, const ComplexMatrix& K,
                           const ComplexMatrix& F);

/// dP/dt = J Q J^+ - A P - P A^+ - K (N+I) K^+ with K = gain(P).
ComplexMatrix riccati_rhs(const ComplexMatrix& P, const SignalModel& sig,
                          const ChannelModel& ch);

/// Scalar specialization: (gamma/(1+nu)) (nu - Sigma) (1 + Sigma).
double scalar_riccati_rhs(double Sigma, double gamma, double nu);

/// Closed-form solution of the scalar equation through Sigma(0) = Sigma0.
double scalar_riccati_closed_form(double Sigma0, double gamma, double nu, double t);

/// Dimensionless matrix form:
///   i[S,H] - (1/(2(nu+1))) ((S+I)G(S-nu I) + (S-nu I)G(S+I)).
ComplexMatrix dimensionless_riccati_rhs(const ComplexMatrix& S, const ComplexMatrix& H,
                                        const ComplexMatrix& G, double nu);

/// Integrates the coupled (P, R, G_cl, C_comm) system with fixed-step RK4
/// at half the requested step, re-symmetrizing every Hermitian unknown
/// after each step; a coarse pass at the full step provides the Richardson
/// error estimate. Throws PositivityLossError when P loses positivity.
FilterSynthesis integrate_riccati(const SignalModel& sig, const ChannelModel& ch,
                                  double t_end, double step);

/// Runs integrate_riccati over a piecewise-constant model schedule,
/// carrying (P, R, G_cl, C_comm) across segment boundaries. Segments must
/// start at 0 and be strictly increasing.
FilterSynthesis integrate_riccati_schedule(const std::vector<ModelSegment>& segments,
                                           double t_end, double step);

/// Covariance of the posterior state density, P + G_cl.
ComplexMatrix posterior_antinormal_covariance(const ComplexMatrix& P,
                                              const ComplexMatrix& G_cl);

} // namespace qfilter
