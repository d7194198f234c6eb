#include "qfilter/matrix_ops.hpp"

#include <cmath>
#include <sstream>

namespace qfilter {

namespace {

void require_square(const ComplexMatrix& m, const char* who) {
    if (m.rows() != m.cols()) {
        std::ostringstream os;
        os << who << ": matrix must be square, got " << m.rows() << "x" << m.cols();
        throw DimensionError(os.str());
    }
}

} // namespace

ComplexMatrix adjoint(const ComplexMatrix& m) {
    return m.adjoint();
}

ComplexMatrix symmetrize(const ComplexMatrix& m) {
    require_square(m, "symmetrize");
    return 0.5 * (m + m.adjoint());
}

double hermitian_residual(const ComplexMatrix& m) {
    require_square(m, "hermitian_residual");
    return (m - m.adjoint().eval()).norm();
}

double min_eigenvalue_hermitian(const ComplexMatrix& h) {
    require_square(h, "min_eigenvalue_hermitian");
    if (h.rows() == 0) return 0.0;
    ComplexMatrix hs = symmetrize(h);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hs, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw NumericError("min_eigenvalue_hermitian: eigensolver failed to converge");
    }
    return es.eigenvalues().minCoeff();
}

ComplexMatrix solve_hpd(const ComplexMatrix& h, const ComplexMatrix& b) {
    require_square(h, "solve_hpd");
    if (h.rows() != b.rows()) {
        throw DimensionError("solve_hpd: right-hand side rows do not match");
    }
    const double scale = h.norm();
    const double lambda_min = min_eigenvalue_hermitian(h);
    if (!(lambda_min > 1e-12 * scale)) {
        std::ostringstream os;
        os << "solve_hpd: matrix is not positive definite "
           << "(minimum eigenvalue " << lambda_min << ", norm " << scale << ")";
        throw NumericError(os.str());
    }
    Eigen::LLT<ComplexMatrix> llt(symmetrize(h));
    if (llt.info() != Eigen::Success) {
        throw NumericError("solve_hpd: Cholesky factorization failed");
    }
    ComplexMatrix x = llt.solve(b);
    x += llt.solve(b - h * x); // one refinement pass
    return x;
}

ComplexMatrix factor_psd(const ComplexMatrix& h) {
    require_square(h, "factor_psd");
    const Eigen::Index n = h.rows();
    if (n == 0) return h;

    const double scale = h.norm();
    ComplexMatrix hs = symmetrize(h);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hs);
    if (es.info() != Eigen::Success) {
        throw NumericError("factor_psd: eigensolver failed to converge");
    }
    Eigen::VectorXd lam = es.eigenvalues();
    const double floor = -1e-10 * scale;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (lam(i) < floor) {
            std::ostringstream os;
            os << "factor_psd: not positive semidefinite "
               << "(minimum eigenvalue " << lam(i) << ", norm " << scale << ")";
            throw NumericError(os.str());
        }
        if (lam(i) < 0.0) lam(i) = 0.0;
    }

    ComplexMatrix root = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
    // root root^+ = H already; QR of root^+ turns it into a genuine
    // lower-triangular factor: root^+ = Q R  =>  root root^+ = R^+ R.
    Eigen::HouseholderQR<ComplexMatrix> qr(root.adjoint().eval());
    ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    ComplexMatrix l = r.adjoint();
    // Normalize phases so the diagonal is real and nonnegative.
    for (Eigen::Index j = 0; j < n; ++j) {
        const Complex d = l(j, j);
        if (std::abs(d) > 0.0) {
            l.col(j) *= std::conj(d) / std::abs(d);
        }
    }
    return l;
}

ComplexMatrix clamp_psd(const ComplexMatrix& h, double tol) {
    require_square(h, "clamp_psd");
    if (h.rows() == 0) return h;
    const double scale = h.norm();
    ComplexMatrix hs = symmetrize(h);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hs);
    if (es.info() != Eigen::Success) {
        throw NumericError("clamp_psd: eigensolver failed to converge");
    }
    const double lambda_min = es.eigenvalues().minCoeff();
    if (lambda_min >= 0.0) return h;
    if (lambda_min < -tol * scale) {
        std::ostringstream os;
        os << "clamp_psd: not positive semidefinite "
           << "(minimum eigenvalue " << lambda_min << ", norm " << scale << ")";
        throw NumericError(os.str());
    }
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    return symmetrize(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint());
}

bool all_finite(const ComplexMatrix& m) {
    return m.allFinite();
}

} // namespace qfilter
