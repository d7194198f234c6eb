#include "qfilter/kernels.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace qfilter {

namespace {

struct KernelState {
    ComplexMatrix P, M, V;

    KernelState scaled_add(const KernelState& d, double w) const {
        return {P + w * d.P, M + w * d.M, V + w * d.V};
    }
    void accumulate(const KernelState& d, double w) {
        P += w * d.P;
        M += w * d.M;
        V += w * d.V;
    }
};

KernelState kernel_rhs(const KernelState& st, const SignalModel& sig,
                       const ChannelModel& ch, const ComplexMatrix& source,
                       const ComplexMatrix& NplusI) {
    const ComplexMatrix K = gain(st.P, sig, ch);
    const ComplexMatrix B = filter_drift(sig.A(), K, ch.F());
    KernelState d;
    d.P = source - sig.A() * st.P - st.P * sig.A().adjoint()
          - K * NplusI * K.adjoint();
    d.M = -B * st.M;
    d.V = -B * st.V - st.V * B.adjoint() + K * NplusI * K.adjoint();
    return d;
}

} // namespace

GaussianKernel kernel_from_filter(const FilterSynthesis& synth, const ChannelModel& ch,
                                  double s, double t) {
    const std::size_t i0 = synth.index_of(s);
    const std::size_t i1 = synth.index_of(t);
    if (i1 < i0) {
        throw DimensionError("kernel_from_filter: interval must run forward");
    }
    const Eigen::Index n = synth.signal.n();
    if (i0 == i1) {
        return {s, t, ComplexMatrix::Identity(n, n), ComplexMatrix::Zero(n, n)};
    }

    const SignalModel& sig = synth.signal;
    const ComplexMatrix source = sig.J() * sig.Q() * sig.J().adjoint();
    const ComplexMatrix NplusI =
        ch.N() + ComplexMatrix::Identity(sig.m(), sig.m());
    const double h = synth.spacing();

    KernelState st{synth.P[i0], ComplexMatrix::Identity(n, n), ComplexMatrix::Zero(n, n)};
    for (std::size_t i = i0; i < i1; ++i) {
        const KernelState k1 = kernel_rhs(st, sig, ch, source, NplusI);
        const KernelState k2 = kernel_rhs(st.scaled_add(k1, 0.5 * h), sig, ch, source, NplusI);
        const KernelState k3 = kernel_rhs(st.scaled_add(k2, 0.5 * h), sig, ch, source, NplusI);
        const KernelState k4 = kernel_rhs(st.scaled_add(k3, h), sig, ch, source, NplusI);
        st.accumulate(k1, h / 6.0);
        st.accumulate(k2, h / 3.0);
        st.accumulate(k3, h / 3.0);
        st.accumulate(k4, h / 6.0);
        st.P = symmetrize(st.P);
        st.V = symmetrize(st.V);
    }
    return {s, t, std::move(st.M), std::move(st.V)};
}

GaussianKernel compose(const GaussianKernel& k1, const GaussianKernel& k2) {
    const double tol = 1e-9 * std::max(1.0, std::abs(k1.t));
    if (std::abs(k1.t - k2.s) > tol) {
        std::ostringstream os;
        os << "compose: kernels are not adjacent (" << k1.t << " vs " << k2.s << ")";
        throw DimensionError(os.str());
    }
    if (k1.M.rows() != k2.M.cols()) {
        throw DimensionError("compose: dimension mismatch");
    }
    GaussianKernel out;
    out.s = k1.s;
    out.t = k2.t;
    out.M = k2.M * k1.M;
    out.V = symmetrize(k2.V + k2.M * k1.V * k2.M.adjoint());
    return out;
}

double chapman_kolmogorov_residual(const FilterSynthesis& synth, const ChannelModel& ch,
                                   double t0, double t1, double t2) {
    if (!(t0 <= t1 && t1 <= t2)) {
        throw DimensionError("chapman_kolmogorov_residual: need t0 <= t1 <= t2");
    }
    const GaussianKernel k01 = kernel_from_filter(synth, ch, t0, t1);
    const GaussianKernel k12 = kernel_from_filter(synth, ch, t1, t2);
    const GaussianKernel k02 = kernel_from_filter(synth, ch, t0, t2);
    const double mean_part = (k02.M - k12.M * k01.M).norm();
    const double cov_part =
        (k02.V - (k12.V + k12.M * k01.V * k12.M.adjoint())).norm();
    return mean_part + cov_part;
}

Complex characteristic_function(const GaussianKernel& k, const ComplexVector& x_s,
                                const ComplexVector& u) {
    if (x_s.size() != k.M.cols() || u.size() != k.M.rows()) {
        throw DimensionError("characteristic_function: vector size mismatch");
    }
    const ComplexVector mean = k.M * x_s;
    const double linear = 2.0 * (u.dot(mean)).real(); // u^+ mean + mean^+ u
    const double quad = (u.dot(k.V * u)).real();      // u^+ V u, real for Hermitian V
    return std::exp(Complex(-quad, linear));
}

double cf_positivity_gram(const GaussianKernel& k, const ComplexVector& x_s,
                          const std::vector<ComplexVector>& u_list) {
    if (u_list.empty() || u_list.size() > 32) {
        throw InputError("cf_positivity_gram: need 1..32 frequencies");
    }
    const Eigen::Index count = static_cast<Eigen::Index>(u_list.size());
    ComplexMatrix gram(count, count);
    for (Eigen::Index a = 0; a < count; ++a) {
        for (Eigen::Index b = 0; b < count; ++b) {
            gram(a, b) = characteristic_function(k, x_s, u_list[a] - u_list[b]);
        }
    }
    return min_eigenvalue_hermitian(gram);
}

double coherent_measure_normalization_residual(const ComplexMatrix& C, double half_width,
                                               int points_per_axis) {
    if (C.rows() != 1 || C.cols() != 1) {
        throw DimensionError("coherent_measure_normalization_residual: scalar check only");
    }
    const double c = C(0, 0).real();
    if (!(c > 0.0)) {
        throw InputError("coherent_measure_normalization_residual: C must be positive");
    }
    if (!(half_width >= 0.0) || points_per_axis < 1) {
        throw InputError("coherent_measure_normalization_residual: bad quadrature window");
    }
    const double h = 2.0 * half_width / points_per_axis;
    const double norm = 1.0 / (std::numbers::pi * c);
    double sum = 0.0;
    for (int i = 0; i < points_per_axis; ++i) {
        const double re = -half_width + (i + 0.5) * h;
        for (int j = 0; j < points_per_axis; ++j) {
            const double im = -half_width + (j + 0.5) * h;
            sum += std::exp(-(re * re + im * im) / c);
        }
    }
    return std::abs(sum * norm * h * h - 1.0);
}

} // namespace qfilter
