#include "qfilter/model.hpp"

#include <cmath>
#include <sstream>

namespace qfilter {

namespace {

void require_shape(const ComplexMatrix& m, Eigen::Index rows, Eigen::Index cols,
                   const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << name << ": expected " << rows << "x" << cols << ", got "
           << m.rows() << "x" << m.cols();
        throw DimensionError(os.str());
    }
}

void require_finite(const ComplexMatrix& m, const char* name) {
    if (!all_finite(m)) {
        throw InputError(std::string(name) + ": entries must be finite");
    }
}

ComplexMatrix checked_psd(ComplexMatrix m, const char* name) {
    require_finite(m, name);
    const double res = hermitian_residual(m);
    if (res > 1e-10 * (1.0 + m.norm())) {
        std::ostringstream os;
        os << name << ": must be Hermitian (residual " << res << ")";
        throw InputError(os.str());
    }
    try {
        return clamp_psd(m);
    } catch (const NumericError&) {
        std::ostringstream os;
        os << name << ": must be positive semidefinite (minimum eigenvalue "
           << min_eigenvalue_hermitian(m) << ")";
        throw InputError(os.str());
    }
}

ComplexMatrix checked_hermitian(ComplexMatrix m, const char* name) {
    require_finite(m, name);
    const double res = hermitian_residual(m);
    if (res > 1e-10 * (1.0 + m.norm())) {
        std::ostringstream os;
        os << name << ": must be Hermitian (residual " << res << ")";
        throw InputError(os.str());
    }
    return m;
}

ComplexMatrix scalar1x1(Complex v) {
    ComplexMatrix m(1, 1);
    m(0, 0) = v;
    return m;
}

} // namespace

SignalModel::SignalModel(ComplexMatrix A, ComplexMatrix J, ComplexMatrix Q,
                         ComplexMatrix R0, ComplexMatrix C0, double hbar)
    : a_(std::move(A)), j_(std::move(J)), q_(std::move(Q)),
      r0_(std::move(R0)), c0_(std::move(C0)), hbar_(hbar) {
    if (a_.rows() != a_.cols() || a_.rows() < 1) {
        throw DimensionError("SignalModel: A must be square and nonempty");
    }
    const Eigen::Index nn = a_.rows();
    if (j_.rows() != nn || j_.cols() < 1) {
        throw DimensionError("SignalModel: J must be n x m");
    }
    const Eigen::Index mm = j_.cols();
    require_shape(q_, mm, mm, "SignalModel: Q");
    require_shape(r0_, nn, nn, "SignalModel: R0");
    require_shape(c0_, nn, nn, "SignalModel: C0");
    require_finite(a_, "SignalModel: A");
    require_finite(j_, "SignalModel: J");
    q_ = checked_psd(q_, "SignalModel: Q");
    r0_ = checked_psd(r0_, "SignalModel: R0");
    c0_ = checked_hermitian(c0_, "SignalModel: C0");
    if (!(hbar_ > 0.0) || !std::isfinite(hbar_)) {
        throw InputError("SignalModel: hbar must be positive");
    }
}

ChannelModel::ChannelModel(ComplexMatrix F, ComplexMatrix N, ComplexMatrix T,
                           ComplexMatrix D)
    : f_(std::move(F)), n_(std::move(N)), t_(std::move(T)), d_(std::move(D)) {
    if (f_.rows() < 1 || f_.cols() < 1) {
        throw DimensionError("ChannelModel: F must be m x n and nonempty");
    }
    const Eigen::Index mm = f_.rows();
    require_shape(n_, mm, mm, "ChannelModel: N");
    require_shape(t_, mm, mm, "ChannelModel: T");
    require_shape(d_, mm, mm, "ChannelModel: D");
    require_finite(f_, "ChannelModel: F");
    require_finite(t_, "ChannelModel: T");
    require_finite(d_, "ChannelModel: D");
    n_ = checked_psd(n_, "ChannelModel: N");
}

void OscillatorModel::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw InputError("OscillatorModel: gamma must be positive");
    if (!(nu >= 0.0) || !std::isfinite(nu))
        throw InputError("OscillatorModel: nu must be nonnegative");
    if (!(sigma0 >= 0.0) || !std::isfinite(sigma0))
        throw InputError("OscillatorModel: sigma0 must be nonnegative");
    if (!(hbar > 0.0) || !std::isfinite(hbar))
        throw InputError("OscillatorModel: hbar must be positive");
    if (!std::isfinite(omega))
        throw InputError("OscillatorModel: omega must be finite");
}

void require_compatible(const SignalModel& sig, const ChannelModel& ch) {
    if (ch.n() != sig.n() || ch.m() != sig.m()) {
        std::ostringstream os;
        os << "model pair: channel is " << ch.m() << "x" << ch.n()
           << " but signal has n=" << sig.n() << ", m=" << sig.m();
        throw DimensionError(os.str());
    }
}

double validate_nondemolition(const SignalModel& sig, const ChannelModel& ch) {
    require_compatible(sig, ch);
    return (sig.J() * ch.D() + sig.C0() * ch.F().adjoint()).norm();
}

ComplexMatrix solve_nondemolition_D(const ComplexMatrix& J, const ComplexMatrix& C0,
                                    const ComplexMatrix& F) {
    if (C0.rows() != J.rows() || F.cols() != C0.cols()) {
        throw DimensionError("solve_nondemolition_D: inconsistent shapes");
    }
    const ComplexMatrix rhs = -(C0 * F.adjoint());
    Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod(J);
    ComplexMatrix d = cod.solve(rhs);
    const double residual = (J * d - rhs).norm();
    const double scale = 1.0 + rhs.norm();
    if (residual > 1e-10 * scale) {
        std::ostringstream os;
        os << "solve_nondemolition_D: rank-deficient coupling leaves residual "
           << residual;
        throw NumericError(os.str());
    }
    return d;
}

double validate_commutator_preservation(const SignalModel& sig) {
    return (sig.A() * sig.C0() + sig.C0() * sig.A().adjoint()
            - sig.J() * sig.J().adjoint()).norm();
}

std::pair<SignalModel, ChannelModel> oscillator_to_general(const OscillatorModel& osc) {
    osc.validate();
    const Complex alpha(0.5 * osc.gamma, osc.omega);
    const double j = std::sqrt(osc.hbar * osc.gamma);
    const double f = -std::sqrt(osc.gamma / osc.hbar);
    SignalModel sig(scalar1x1(alpha), scalar1x1(j), scalar1x1(osc.nu),
                    scalar1x1(osc.hbar * osc.sigma0), scalar1x1(osc.hbar), osc.hbar);
    ChannelModel ch(scalar1x1(f), scalar1x1(osc.nu), scalar1x1(osc.nu),
                    scalar1x1(1.0));
    return {std::move(sig), std::move(ch)};
}

double mean_occupation(double temp, double gamma, const PhysicalConstants& constants) {
    if (!(temp > 0.0)) {
        throw InputError("mean_occupation: temperature must be positive");
    }
    const double x = constants.hbar * gamma / (constants.boltzmann * temp);
    return 1.0 / std::expm1(x);
}

double effective_intensity(double nu, double gamma, double hbar) {
    if (!(nu >= 0.0)) {
        throw InputError("effective_intensity: nu must be nonnegative");
    }
    return hbar * (nu + 1.0) * gamma;
}

double temperature_from_occupation(double sigma_occ, double omega,
                                   const PhysicalConstants& constants) {
    if (!(sigma_occ > 0.0)) {
        throw InputError("temperature_from_occupation: occupation must be positive");
    }
    if (!(omega > 0.0)) {
        throw InputError("temperature_from_occupation: omega must be positive");
    }
    return constants.hbar * omega
           / (constants.boltzmann * std::log1p(1.0 / sigma_occ));
}

ComplexMatrix joint_noise_covariance(const SignalModel& sig, const ChannelModel& ch) {
    require_compatible(sig, ch);
    const Eigen::Index m = sig.m();
    ComplexMatrix joint(2 * m, 2 * m);
    joint.topLeftCorner(m, m) = sig.Q();
    joint.topRightCorner(m, m) = ch.T().adjoint();
    joint.bottomLeftCorner(m, m) = ch.T();
    joint.bottomRightCorner(m, m) = ch.N() + ComplexMatrix::Identity(m, m);
    return joint;
}

} // namespace qfilter
