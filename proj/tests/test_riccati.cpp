#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qfilter/riccati.hpp"
#include "test_support.hpp"

using namespace qfilter;
using testing::random_model;
using testing::random_psd;
using testing::scalar;

namespace {

OscillatorModel osc(double omega, double gamma, double nu, double sigma0,
                    double hbar = 1.0) {
    return OscillatorModel{omega, gamma, nu, sigma0, hbar};
}

/// Independent high-accuracy integrator for the scalar equation; the rhs is
/// written out inline so the oracle shares nothing with the library path.
double integrate_scalar_reference(double sigma0, double gamma, double nu, double t_end) {
    const int steps = 200000;
    const double h = t_end / steps;
    double y = sigma0;
    for (int i = 0; i < steps; ++i) {
        auto f = [&](double s) { return gamma / (1.0 + nu) * (nu - s) * (1.0 + s); };
        const double k1 = f(y);
        const double k2 = f(y + 0.5 * h * k1);
        const double k3 = f(y + 0.5 * h * k2);
        const double k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

} // namespace

TEST_CASE("closed form agrees with an independent integrator") {
    struct Case {
        double sigma0, gamma, nu, t;
    };
    for (const Case& c : {Case{1.0, 1.0, 0.0, 1.0}, Case{3.0, 0.7, 1.2, 2.5},
                          Case{0.2, 2.0, 0.8, 0.75}, Case{5.0, 1.5, 0.0, 3.0}}) {
        const double want = integrate_scalar_reference(c.sigma0, c.gamma, c.nu, c.t);
        const double got = scalar_riccati_closed_form(c.sigma0, c.gamma, c.nu, c.t);
        CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("scalar rhs values") {
    CHECK(scalar_riccati_rhs(0.8, 1.7, 0.8) == 0.0);
    CHECK(scalar_riccati_rhs(2.0, 1.0, 0.0) == doctest::Approx(-6.0));
    CHECK(scalar_riccati_rhs(0.0, 2.0, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("closed form boundary cases") {
    // Sigma(t) = 1/(2 e^t - 1) for Sigma0 = 1, nu = 0, gamma = 1
    CHECK(scalar_riccati_closed_form(1.0, 1.0, 0.0, 1.0)
          == doctest::Approx(1.0 / (2.0 * std::exp(1.0) - 1.0)).epsilon(1e-14));
    CHECK(scalar_riccati_closed_form(0.7, 2.0, 0.7, 5.0) == 0.7);
    CHECK(scalar_riccati_closed_form(2.5, 1.3, 0.4, 0.0) == doctest::Approx(2.5));
    // far past the transient the trajectory sits at the fixed point
    CHECK(scalar_riccati_closed_form(2.5, 1.0, 0.4, 2000.0) == doctest::Approx(0.4));
}

TEST_CASE("gain closed forms on the oscillator") {
    auto [sig, ch] = oscillator_to_general(osc(1.0, 1.0, 1.0, 0.0));
    // stationary point: P = hbar*nu -> K = 0
    CHECK(gain(scalar(1.0), sig, ch).norm() <= 1e-15);
    // Sigma = 0: K = (0*(-1) + 1*1)/2 = 0.5
    CHECK(gain(scalar(0.0), sig, ch)(0, 0).real() == doctest::Approx(0.5).epsilon(1e-14));

    // matches K = (nu - S) J / (1 + nu) across random oscillator states
    SplitMix64 g(31);
    for (int rep = 0; rep < 15; ++rep) {
        auto model = osc(2.0 * g.uniform(), 0.2 + 2.0 * g.uniform(), 2.0 * g.uniform(),
                         3.0 * g.uniform(), 0.5 + g.uniform());
        auto [s2, c2] = oscillator_to_general(model);
        const double sig_val = 3.0 * g.uniform();
        const ComplexMatrix k = gain(scalar(model.hbar * sig_val), s2, c2);
        const Complex want = (model.nu - sig_val) * s2.J()(0, 0) / (1.0 + model.nu);
        CHECK(std::abs(k(0, 0) - want) <= 1e-12 * (1.0 + std::abs(want)));
    }

    // no coupling: T = 0, F = 0 -> K = 0
    SignalModel plain(scalar(1.0), scalar(1.0), scalar(0.5), scalar(1.0), scalar(0.0), 1.0);
    ChannelModel silent(scalar(0.0), scalar(0.5), scalar(0.0), scalar(0.0));
    CHECK(gain(scalar(2.0), plain, silent).norm() == 0.0);
}

TEST_CASE("filter drift") {
    SplitMix64 g(5);
    const ComplexMatrix a = testing::random_matrix(g, 3, 3);
    CHECK((filter_drift(a, ComplexMatrix::Zero(3, 2), ComplexMatrix::Zero(2, 3)) - a)
              .norm() == 0.0);
    CHECK((filter_drift(ComplexMatrix::Zero(2, 2), ComplexMatrix::Identity(2, 2),
                        ComplexMatrix::Identity(2, 2))
           - ComplexMatrix::Identity(2, 2)).norm() == 0.0);

    // oscillator: B = alpha + gamma (Sigma - nu)/(1 + nu); Sigma0=2, nu=0.5 -> alpha + 1
    auto [sig, ch] = oscillator_to_general(osc(1.0, 1.0, 0.5, 2.0));
    const ComplexMatrix k = gain(sig.R0(), sig, ch);
    const Complex b = filter_drift(sig.A(), k, ch.F())(0, 0);
    CHECK(b.real() == doctest::Approx(0.5 + 1.0).epsilon(1e-14));
    CHECK(b.imag() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("matrix rhs reduces to the scalar equation") {
    auto [sig, ch] = oscillator_to_general(osc(1.0, 1.0, 1.0, 0.0));
    CHECK(riccati_rhs(scalar(1.0), sig, ch).norm() <= 1e-15);

    SplitMix64 g(13);
    for (int rep = 0; rep < 15; ++rep) {
        auto model = osc(2.0 * g.uniform(), 0.2 + 2.0 * g.uniform(), 2.0 * g.uniform(),
                         3.0 * g.uniform(), 0.5 + g.uniform());
        auto [s2, c2] = oscillator_to_general(model);
        const double sig_val = 3.0 * g.uniform();
        const double got = riccati_rhs(scalar(model.hbar * sig_val), s2, c2)(0, 0).real();
        const double want =
            model.hbar * scalar_riccati_rhs(sig_val, model.gamma, model.nu);
        CHECK(got == doctest::Approx(want).epsilon(1e-11));
    }

    // decoupled decay: Q = 0, T = 0, F = 0 -> rhs = -AP - PA^+
    SignalModel plain(scalar(Complex(0.8, 0.3)), scalar(1.0), scalar(0.0), scalar(1.0),
                      scalar(0.0), 1.0);
    ChannelModel silent(scalar(0.0), scalar(0.0), scalar(0.0), scalar(0.0));
    const ComplexMatrix rhs = riccati_rhs(scalar(2.0), plain, silent);
    CHECK(rhs(0, 0).real() == doctest::Approx(-2.0 * 2.0 * 0.8).epsilon(1e-14));
}

TEST_CASE("dimensionless rhs") {
    SplitMix64 g(19);
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(g.next() % 3);
        const double nu = 2.0 * g.uniform();
        const ComplexMatrix H = testing::random_hermitian(g, n);
        const ComplexMatrix G = random_psd(g, n);
        const ComplexMatrix S = nu * ComplexMatrix::Identity(n, n);
        CHECK(dimensionless_riccati_rhs(S, H, G, nu).norm() <= 1e-13 * (1.0 + G.norm()));
    }

    // n = 1 reduction to the scalar equation
    for (int rep = 0; rep < 10; ++rep) {
        const double nu = 2.0 * g.uniform();
        const double gamma = 0.2 + 2.0 * g.uniform();
        const double s = 3.0 * g.uniform();
        const double omega = 2.0 * g.uniform();
        const double got =
            dimensionless_riccati_rhs(scalar(s), scalar(omega), scalar(gamma), nu)(0, 0)
                .real();
        CHECK(got == doctest::Approx(scalar_riccati_rhs(s, gamma, nu)).epsilon(1e-12));
    }

    // simultaneously diagonal S and H: the commutator contributes nothing
    ComplexMatrix S = ComplexMatrix::Zero(2, 2);
    S(0, 0) = 0.5;
    S(1, 1) = 1.5;
    ComplexMatrix H = ComplexMatrix::Zero(2, 2);
    H(0, 0) = 2.0;
    H(1, 1) = -1.0;
    const ComplexMatrix G = random_psd(g, 2);
    const ComplexMatrix with_h = dimensionless_riccati_rhs(S, H, G, 0.3);
    const ComplexMatrix without_h =
        dimensionless_riccati_rhs(S, ComplexMatrix::Zero(2, 2), G, 0.3);
    CHECK((with_h - without_h).norm() <= 1e-14 * (1.0 + G.norm()));
}

TEST_CASE("integration matches the scalar closed form") {
    auto [sig, ch] = oscillator_to_general(osc(1.0, 1.0, 0.0, 1.0));
    const FilterSynthesis synth = integrate_riccati(sig, ch, 2.0, 2e-3);
    for (std::size_t i = 0; i < synth.size(); i += 25) {
        const double want = scalar_riccati_closed_form(1.0, 1.0, 0.0, synth.times[i]);
        CHECK(std::abs(synth.P[i](0, 0).real() - want) <= 1e-8);
    }
    CHECK(synth.richardson_error <= 1e-10);
    CHECK((synth.P.front() - sig.R0()).norm() == 0.0);
}

TEST_CASE("stationary start is an exact fixed point") {
    auto [sig, ch] = oscillator_to_general(osc(2.0, 1.0, 0.7, 0.7));
    const FilterSynthesis synth = integrate_riccati(sig, ch, 3.0, 4e-3);
    for (std::size_t i = 0; i < synth.size(); ++i) {
        CHECK(std::abs(synth.P[i](0, 0).real() - 0.7) <= 1e-12);
        CHECK(synth.K[i].norm() <= 1e-12);
    }
}

TEST_CASE("pure decay has the exponential solution") {
    const double a = 0.8;
    SplitMix64 g(3);
    const ComplexMatrix r0 = random_psd(g, 2);
    SignalModel sig(a * ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(2, 2),
                    ComplexMatrix::Zero(2, 2), r0, ComplexMatrix::Zero(2, 2), 1.0);
    ChannelModel ch(ComplexMatrix::Zero(2, 2), ComplexMatrix::Zero(2, 2),
                    ComplexMatrix::Zero(2, 2), ComplexMatrix::Zero(2, 2));
    const FilterSynthesis synth = integrate_riccati(sig, ch, 1.0, 1e-3);
    const ComplexMatrix want = std::exp(-2.0 * a) * r0;
    CHECK((synth.P.back() - want).norm() <= 1e-8 * (1.0 + want.norm()));
}

TEST_CASE("all stored unknowns stay Hermitian") {
    SplitMix64 g(29);
    auto [sig, ch] = random_model(g, 3, 2);
    const FilterSynthesis synth = integrate_riccati(sig, ch, 1.0, 4e-3);
    for (std::size_t i = 0; i < synth.size(); ++i) {
        CHECK(hermitian_residual(synth.P[i]) <= 1e-9 * (1.0 + synth.P[i].norm()));
        CHECK(hermitian_residual(synth.R[i]) <= 1e-9 * (1.0 + synth.R[i].norm()));
        CHECK(hermitian_residual(synth.G_cl[i]) <= 1e-9 * (1.0 + synth.G_cl[i].norm()));
        CHECK(hermitian_residual(synth.C_comm[i]) <= 1e-9 * (1.0 + synth.C_comm[i].norm()));
    }
}

TEST_CASE("unconditional correlation splits into posterior plus estimate") {
    SplitMix64 g(37);
    for (int rep = 0; rep < 6; ++rep) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(g.next() % 4);
        const Eigen::Index m = 1 + static_cast<Eigen::Index>(g.next() % n);
        auto [sig, ch] = random_model(g, n, m);
        const FilterSynthesis synth = integrate_riccati(sig, ch, 1.5, 4e-3);
        for (std::size_t i = 0; i < synth.size(); i += 10) {
            const ComplexMatrix sum =
                posterior_antinormal_covariance(synth.P[i], synth.G_cl[i]);
            CHECK((synth.R[i] - sum).norm() <= 1e-8 * (1.0 + synth.R[i].norm()));
        }
        CHECK((posterior_antinormal_covariance(synth.P[0], synth.G_cl[0]) - sig.R0())
                  .norm() <= 1e-13 * (1.0 + sig.R0().norm()));
    }
}

TEST_CASE("scalar trajectory is monotone toward the fixed point") {
    for (double sigma0 : {3.0, 0.1}) {
        auto [sig, ch] = oscillator_to_general(osc(1.0, 1.0, 1.0, sigma0));
        const FilterSynthesis synth = integrate_riccati(sig, ch, 3.0, 4e-3);
        const double direction = sigma0 > 1.0 ? -1.0 : 1.0;
        for (std::size_t i = 1; i < synth.size(); ++i) {
            const double diff = synth.P[i](0, 0).real() - synth.P[i - 1](0, 0).real();
            CHECK(direction * diff >= -1e-14);
        }
        const double final_gap = std::abs(synth.P.back()(0, 0).real() - 1.0);
        CHECK(final_gap <= std::abs(sigma0 - 1.0) * std::exp(-0.5 * 3.0));
    }
}

TEST_CASE("positivity loss is detected with a time stamp") {
    auto [sig, ch] = oscillator_to_general(osc(0.0, 1.0, 0.0, 3.0));
    try {
        integrate_riccati(sig, ch, 8.0, 4.0);
        FAIL("expected PositivityLossError");
    } catch (const PositivityLossError& e) {
        CHECK(e.time > 0.0);
        CHECK(std::string(e.what()).find("lost positivity") != std::string::npos);
    }
}

TEST_CASE("piecewise-constant schedules") {
    auto [sig, ch] = oscillator_to_general(osc(1.0, 1.0, 0.5, 2.0));
    // two identical segments behave exactly like a single run
    std::vector<ModelSegment> same{{0.0, sig, ch}, {1.0, sig, ch}};
    const FilterSynthesis split = integrate_riccati_schedule(same, 2.0, 4e-3);
    const FilterSynthesis whole = integrate_riccati(sig, ch, 2.0, 4e-3);
    REQUIRE(split.size() == whole.size());
    for (std::size_t i = 0; i < whole.size(); ++i) {
        CHECK((split.P[i] - whole.P[i]).norm() <= 1e-14);
    }

    // switching the model mid-run moves the trajectory
    auto [hot_sig, hot_ch] = oscillator_to_general(osc(1.0, 1.0, 2.0, 2.0));
    std::vector<ModelSegment> switched{{0.0, sig, ch}, {1.0, hot_sig, hot_ch}};
    const FilterSynthesis moved = integrate_riccati_schedule(switched, 2.0, 4e-3);
    CHECK((moved.P.back() - whole.P.back()).norm() > 1e-3);
    CHECK(moved.P.back()(0, 0).real() > whole.P.back()(0, 0).real());
}
