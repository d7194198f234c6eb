#pragma once

#include "qfilter/riccati.hpp"

namespace qfilter {

/// Gaussian transition kernel of the filter state over [s, t]: mean map
/// x(s) -> M x(s) and Hermitian PSD transition covariance V. M = I, V = 0
/// represents the degenerate kernel s = t.
struct GaussianKernel {
    double s = 0.0;
    double t = 0.0;
    ComplexMatrix M;
    ComplexMatrix V;
};

/// Builds the kernel over [s, t] by integrating dM/dtau = -B(tau) M and
/// dV/dtau = -B V - V B^+ + K(N+I)K^+ with the synthesis' own RK4 scheme
/// and step; s and t must be grid points.
GaussianKernel kernel_from_filter(const FilterSynthesis& synth, const ChannelModel& ch,
                                  double s, double t);

/// Smolukhowsky composition: M = M2 M1, V = V2 + M2 V1 M2^+ over the
/// concatenated interval. The intervals must be adjacent.
GaussianKernel compose(const GaussianKernel& k1, const GaussianKernel& k2);

/// ||M02 - M12 M01||_F + ||V02 - (V12 + M12 V01 M12^+)||_F where each
/// kernel is built independently by kernel_from_filter.
double chapman_kolmogorov_residual(const FilterSynthesis& synth, const ChannelModel& ch,
                                   double t0, double t1, double t2);

/// Characteristic function of the kernel at frequency u, conditioned on
/// the start point x_s:
///   phi(u) = exp(i (u^+ M x_s + (M x_s)^+ u) - u^+ V u).
Complex characteristic_function(const GaussianKernel& k, const ComplexVector& x_s,
                                const ComplexVector& u);

/// Minimum eigenvalue of the Gram matrix [phi(u_k - u_l)]; nonnegative (up
/// to round-off) for any probability kernel. At most 32 frequencies.
double cf_positivity_gram(const GaussianKernel& k, const ComplexVector& x_s,
                          const std::vector<ComplexVector>& u_list);

/// |quadrature of exp(-|x|^2/C)/(pi C) over the centered square - 1| for a
/// scalar positive C, by the tensor-product midpoint rule. Tends to zero as
/// the window and resolution grow.
double coherent_measure_normalization_residual(const ComplexMatrix& C, double half_width,
                                               int points_per_axis);

} // namespace qfilter
