#include "qfilter/riccati.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace qfilter {

namespace {

/// Joint integration state; R, G, C ride along the posterior correlation P.
struct SynthState {
    ComplexMatrix P, R, G, C;

    SynthState scaled_add(const SynthState& d, double w) const {
        return {P + w * d.P, R + w * d.R, G + w * d.G, C + w * d.C};
    }
    void accumulate(const SynthState& d, double w) {
        P += w * d.P;
        R += w * d.R;
        G += w * d.G;
        C += w * d.C;
    }
    void resymmetrize() {
        P = symmetrize(P);
        R = symmetrize(R);
        G = symmetrize(G);
        C = symmetrize(C);
    }
};

SynthState synth_rhs(const SynthState& st, const SignalModel& sig, const ChannelModel& ch,
                     const ComplexMatrix& source) {
    const ComplexMatrix K = gain(st.P, sig, ch);
    const ComplexMatrix B = filter_drift(sig.A(), K, ch.F());
    const Eigen::Index m = sig.m();
    const ComplexMatrix KNIK =
        K * (ch.N() + ComplexMatrix::Identity(m, m)) * K.adjoint();
    SynthState d;
    d.P = source - sig.A() * st.P - st.P * sig.A().adjoint() - KNIK;
    d.R = source - sig.A() * st.R - st.R * sig.A().adjoint();
    d.G = -sig.A() * st.G - st.G * sig.A().adjoint() + KNIK;
    d.C = -B * st.C - st.C * B.adjoint() + K * K.adjoint();
    return d;
}

void rk4_step(SynthState& y, double h, const SignalModel& sig, const ChannelModel& ch,
              const ComplexMatrix& source) {
    const SynthState k1 = synth_rhs(y, sig, ch, source);
    const SynthState k2 = synth_rhs(y.scaled_add(k1, 0.5 * h), sig, ch, source);
    const SynthState k3 = synth_rhs(y.scaled_add(k2, 0.5 * h), sig, ch, source);
    const SynthState k4 = synth_rhs(y.scaled_add(k3, h), sig, ch, source);
    y.accumulate(k1, h / 6.0);
    y.accumulate(k2, h / 3.0);
    y.accumulate(k3, h / 3.0);
    y.accumulate(k4, h / 6.0);
    y.resymmetrize();
}

void check_positivity(const ComplexMatrix& P, double t) {
    const double lambda_min = min_eigenvalue_hermitian(P);
    if (lambda_min < -1e-8 * P.norm()) {
        std::ostringstream os;
        os << "posterior covariance lost positivity at t=" << t
           << " (minimum eigenvalue " << lambda_min << ")";
        throw PositivityLossError(os.str(), t);
    }
}

void append_point(FilterSynthesis& out, double t, const SynthState& st,
                  const SignalModel& sig, const ChannelModel& ch) {
    const ComplexMatrix K = gain(st.P, sig, ch);
    out.times.push_back(t);
    out.P.push_back(st.P);
    out.K.push_back(K);
    out.B.push_back(filter_drift(sig.A(), K, ch.F()));
    out.trace_error.push_back(st.P.trace().real());
    out.G_cl.push_back(st.G);
    out.R.push_back(st.R);
    out.C_comm.push_back(st.C);
}

/// Integrates one constant-coefficient stretch; appends grid points
/// (including the start when `out` is empty).
void integrate_segment(FilterSynthesis& out, SynthState& st, const SignalModel& sig,
                       const ChannelModel& ch, double t_begin, double t_until,
                       double h) {
    const ComplexMatrix source = sig.J() * sig.Q() * sig.J().adjoint();
    if (out.times.empty()) {
        check_positivity(st.P, t_begin);
        append_point(out, t_begin, st, sig, ch);
    }
    const auto steps =
        static_cast<std::size_t>(std::ceil((t_until - t_begin) / h - 1e-9));
    for (std::size_t i = 0; i < steps; ++i) {
        rk4_step(st, h, sig, ch, source);
        const double t = t_begin + static_cast<double>(i + 1) * h;
        check_positivity(st.P, t);
        append_point(out, t, st, sig, ch);
    }
}

} // namespace

std::size_t FilterSynthesis::index_of(double t) const {
    const double h = spacing();
    if (times.empty() || (h == 0.0 && t != times.front())) {
        throw DimensionError("FilterSynthesis: empty grid");
    }
    const double pos = h > 0.0 ? t / h : 0.0;
    const auto idx = static_cast<long long>(std::llround(pos));
    const double tol = 1e-9 * std::max(1.0, std::abs(t));
    if (idx < 0 || idx >= static_cast<long long>(times.size())
        || std::abs(t - static_cast<double>(idx) * h) > tol) {
        std::ostringstream os;
        os << "FilterSynthesis: t=" << t << " is not on the grid (spacing " << h
           << ", horizon " << times.back() << ")";
        throw DimensionError(os.str());
    }
    return static_cast<std::size_t>(idx);
}

ComplexMatrix gain(const ComplexMatrix& P, const SignalModel& sig, const ChannelModel& ch) {
    require_compatible(sig, ch);
    if (P.rows() != sig.n() || P.cols() != sig.n()) {
        throw DimensionError("gain: P must be n x n");
    }
    const Eigen::Index m = sig.m();
    const ComplexMatrix numerator = P * ch.F().adjoint() + sig.J() * ch.T().adjoint();
    const ComplexMatrix denom = ch.N() + ComplexMatrix::Identity(m, m);
    return solve_hpd(denom, numerator.adjoint()).adjoint();
}

ComplexMatrix filter_drift(const ComplexMatrix& A, const ComplexMatrix& K,
                           const ComplexMatrix& F) {
    if (K.cols() != F.rows() || A.rows() != K.rows() || A.cols() != F.cols()
        || A.rows() != A.cols()) {
        throw DimensionError("filter_drift: inconsistent shapes");
    }
    return A + K * F;
}

ComplexMatrix riccati_rhs(const ComplexMatrix& P, const SignalModel& sig,
                          const ChannelModel& ch) {
    const ComplexMatrix K = gain(P, sig, ch);
    const Eigen::Index m = sig.m();
    const ComplexMatrix KNIK = K * (ch.N() + ComplexMatrix::Identity(m, m)) * K.adjoint();
    return sig.J() * sig.Q() * sig.J().adjoint() - sig.A() * P - P * sig.A().adjoint()
           - KNIK;
}

double scalar_riccati_rhs(double Sigma, double gamma, double nu) {
    return gamma / (1.0 + nu) * (nu - Sigma) * (1.0 + Sigma);
}

double scalar_riccati_closed_form(double Sigma0, double gamma, double nu, double t) {
    if (Sigma0 == nu) return nu;
    const double r = (1.0 + Sigma0) / (nu - Sigma0);
    const double gt = gamma * t;
    // Large gt would overflow exp; the trajectory is already at the fixed point.
    if (gt > 600.0) return nu;
    const double denom = 1.0 + r * std::exp(gt);
    assert(denom != 0.0 && "unreachable for Sigma0 >= 0, nu >= 0, t >= 0");
    return nu - (1.0 + nu) / denom;
}

ComplexMatrix dimensionless_riccati_rhs(const ComplexMatrix& S, const ComplexMatrix& H,
                                        const ComplexMatrix& G, double nu) {
    if (S.rows() != S.cols() || H.rows() != H.cols() || G.rows() != G.cols()
        || S.rows() != H.rows() || S.rows() != G.rows()) {
        throw DimensionError("dimensionless_riccati_rhs: inconsistent shapes");
    }
    const Eigen::Index n = S.rows();
    const ComplexMatrix I = ComplexMatrix::Identity(n, n);
    const Complex iu(0.0, 1.0);
    const ComplexMatrix commutator = S * H - H * S;
    const ComplexMatrix up = (S + I) * G * (S - nu * I);
    return iu * commutator - (up + up.adjoint()) / (2.0 * (nu + 1.0));
}

FilterSynthesis integrate_riccati(const SignalModel& sig, const ChannelModel& ch,
                                  double t_end, double step) {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        throw InputError("integrate_riccati: t_end must be positive");
    }
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw InputError("integrate_riccati: step must be positive");
    }
    require_compatible(sig, ch);

    FilterSynthesis out{sig, ch, {}, {}, {}, {}, {}, {}, {}, {}, 0.0};
    const Eigen::Index n = sig.n();
    SynthState st{sig.R0(), sig.R0(), ComplexMatrix::Zero(n, n), ComplexMatrix::Zero(n, n)};
    const double h = 0.5 * step;
    integrate_segment(out, st, sig, ch, 0.0, t_end, h);

    // Coarse pass at the full step for the Richardson error estimate; RK4 is
    // fourth order, so the fine-grid error is about |P_fine - P_coarse| / 15.
    double worst = 0.0;
    try {
        const ComplexMatrix source = sig.J() * sig.Q() * sig.J().adjoint();
        SynthState coarse{sig.R0(), sig.R0(), ComplexMatrix::Zero(n, n),
                          ComplexMatrix::Zero(n, n)};
        const std::size_t coarse_steps = (out.size() - 1) / 2;
        for (std::size_t i = 0; i < coarse_steps; ++i) {
            rk4_step(coarse, step, sig, ch, source);
            const std::size_t fine_idx = 2 * (i + 1);
            worst = std::max(worst, (out.P[fine_idx] - coarse.P).norm() / 15.0);
        }
    } catch (const Error&) {
        worst = std::numeric_limits<double>::infinity();
    }
    out.richardson_error = worst;
    return out;
}

FilterSynthesis integrate_riccati_schedule(const std::vector<ModelSegment>& segments,
                                           double t_end, double step) {
    if (segments.empty()) {
        throw InputError("integrate_riccati_schedule: no segments");
    }
    if (segments.front().start != 0.0) {
        throw InputError("integrate_riccati_schedule: first segment must start at 0");
    }
    for (std::size_t i = 1; i < segments.size(); ++i) {
        if (!(segments[i].start > segments[i - 1].start)) {
            throw InputError("integrate_riccati_schedule: segment starts must increase");
        }
        require_compatible(segments[i].signal, segments[i].channel);
        if (segments[i].signal.n() != segments[0].signal.n()
            || segments[i].signal.m() != segments[0].signal.m()) {
            throw DimensionError("integrate_riccati_schedule: segment dimensions differ");
        }
    }
    if (!(t_end > 0.0) || !(step > 0.0)) {
        throw InputError("integrate_riccati_schedule: t_end and step must be positive");
    }

    const SignalModel& sig0 = segments.front().signal;
    FilterSynthesis out{sig0, segments.front().channel, {}, {}, {}, {}, {}, {}, {}, {}, 0.0};
    const Eigen::Index n = sig0.n();
    SynthState st{sig0.R0(), sig0.R0(), ComplexMatrix::Zero(n, n), ComplexMatrix::Zero(n, n)};
    const double h = 0.5 * step;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const double begin = segments[i].start;
        const double until =
            i + 1 < segments.size() ? std::min(segments[i + 1].start, t_end) : t_end;
        if (begin >= t_end) break;
        const double grid_begin = out.times.empty() ? begin : out.times.back();
        integrate_segment(out, st, segments[i].signal, segments[i].channel, grid_begin,
                          until, h);
    }
    out.signal = segments.back().signal;
    out.channel = segments.back().channel;
    return out;
}

ComplexMatrix posterior_antinormal_covariance(const ComplexMatrix& P,
                                              const ComplexMatrix& G_cl) {
    if (P.rows() != G_cl.rows() || P.cols() != G_cl.cols()) {
        throw DimensionError("posterior_antinormal_covariance: shape mismatch");
    }
    return symmetrize(P + G_cl);
}

} // namespace qfilter
