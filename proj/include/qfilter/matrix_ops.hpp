#pragma once

#include <Eigen/Dense>
#include <complex>

#include "qfilter/errors.hpp"

namespace qfilter {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Conjugate transpose.
ComplexMatrix adjoint(const ComplexMatrix& m);

/// Hermitian part (M + M^+)/2 of a square matrix.
ComplexMatrix symmetrize(const ComplexMatrix& m);

/// Frobenius norm of M - M^+; zero iff M is Hermitian. Rejects non-square input.
double hermitian_residual(const ComplexMatrix& m);

/// Smallest eigenvalue of the symmetrized input. Rejects non-square input.
double min_eigenvalue_hermitian(const ComplexMatrix& h);

/// Solves H X = B for Hermitian positive definite H (min eigenvalue must
/// exceed 1e-12 * ||H||_F). One step of iterative refinement keeps the
/// relative residual at or below 1e-12.
ComplexMatrix solve_hpd(const ComplexMatrix& h, const ComplexMatrix& b);

/// Lower-triangular factor L with L L^+ = H for Hermitian positive
/// semidefinite H. Eigenvalues in [-1e-10 * ||H||_F, 0) are clamped to zero;
/// anything below that window is rejected as not positive semidefinite.
ComplexMatrix factor_psd(const ComplexMatrix& h);

/// Symmetrizes and clamps small negative eigenvalues (within
/// -tol * ||H||_F) to zero; throws NumericError below the window.
/// Returns the input unchanged when it is already Hermitian PSD.
ComplexMatrix clamp_psd(const ComplexMatrix& h, double tol = 1e-10);

/// True when every entry is finite.
bool all_finite(const ComplexMatrix& m);

} // namespace qfilter
