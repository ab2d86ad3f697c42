#include <doctest.h>

#include <cmath>
#include <complex>

#include "hdlr/edge.hpp"
#include "hdlr/errors.hpp"
#include "hdlr/simulation.hpp"
#include "test_util.hpp"

using namespace hdlr;
using hdlr::testing::rel_err;

namespace {

DiscreteMeasure single_atom() {
    DiscreteMeasure m;
    m.masses = VectorXd::Ones(1);
    m.weights = VectorXd::Ones(1);
    return m;
}

DiscreteMeasure three_mass_measure() {
    DiscreteMeasure m;
    m.masses = VectorXd(3);
    m.masses << 15.0 / 5.5, 5.0 / 5.5, 1.0 / 5.5;
    m.weights = VectorXd(3);
    m.weights << 0.25, 0.25, 0.5;
    return m;
}

// phi = sum_k w_k t_k / (t_k ((1 + g phi)^{-1} - z) + lambda) for z = i eta,
// by Newton with continuation in eta, then Richardson extrapolation to eta = 0.
double phi_at_origin(const DiscreteMeasure& m, double lambda, double gamma2) {
    using C = std::complex<double>;
    auto residual = [&](C phi, C z, C* deriv) {
        C f = phi;
        C df = 1.0;
        const C u = 1.0 / (1.0 + gamma2 * phi);
        const C du = -gamma2 * u * u;
        for (int k = 0; k < m.size(); ++k) {
            const double t = m.masses(k);
            const C den = t * (u - z) + lambda;
            f -= m.weights(k) * t / den;
            df += m.weights(k) * t * t * du / (den * den);
        }
        *deriv = df;
        return f;
    };
    auto solve = [&](double eta, C start) {
        C phi = start;
        for (int it = 0; it < 200; ++it) {
            C d;
            const C f = residual(phi, C(0.0, eta), &d);
            const C next = phi - f / d;
            phi = C(next.real(), std::max(next.imag(), 0.0));
            if (std::abs(f) < 1e-15) break;
        }
        return phi;
    };
    C phi(0.5, 0.5);
    double eta = 1.0;
    while (eta > 2e-5) {
        phi = solve(eta, phi);
        eta /= 2.0;
    }
    const C a = solve(2e-5, phi);
    const C b = solve(1e-5, a);
    return (2.0 * b - a).real();
}

// Second-order derivative on a nonuniform mesh.
double mesh_derivative(const std::vector<double>& x, const std::vector<double>& f, std::size_t i) {
    const double h0 = x[i] - x[i - 1];
    const double h1 = x[i + 1] - x[i];
    return (h0 * h0 * f[i + 1] - h1 * h1 * f[i - 1] + (h1 * h1 - h0 * h0) * f[i]) / (h0 * h1 * (h0 + h1));
}

}  // namespace

TEST_CASE("estimate_rho single atom closed forms") {
    const RhoEstimate case1 = estimate_rho(single_atom(), 1.0, 2.0);
    CHECK(case1.is_discrete_edge);
    CHECK(case1.rho == doctest::Approx(1.0).epsilon(1e-14));

    const RhoEstimate case2 = estimate_rho(single_atom(), 1.0, 0.25);
    CHECK_FALSE(case2.is_discrete_edge);
    CHECK(std::abs(case2.rho - 1.25) < 1e-10);
    CHECK(case2.rho > 1.0);

    const RhoEstimate mp = estimate_rho(single_atom(), 1e-8, 0.25);
    CHECK(std::abs(mp.rho - 0.25) < 1e-4);
}

TEST_CASE("equality gamma2 w1 = 1 takes the discrete branch") {
    const RhoEstimate r = estimate_rho(single_atom(), 2.0, 1.0);
    CHECK(r.is_discrete_edge);
    CHECK(r.rho == doctest::Approx(2.0));
}

TEST_CASE("s(0) for a single atom is the golden-ratio root") {
    const double s0 = solve_s_initial(single_atom(), 1.0, 1.0);
    CHECK(std::abs(s0 - (std::sqrt(5.0) - 1.0) / 2.0) < 1e-10);
}

TEST_CASE("s(0) on the three-mass model agrees with the fixed-point solution") {
    const DiscreteMeasure m = three_mass_measure();
    for (double gamma2 : {0.5, 1.0, 2.0}) {
        const double lambda = 1.0;
        const double oracle = phi_at_origin(m, lambda, gamma2);
        const RhoEstimate rho = estimate_rho(m, lambda, gamma2);
        const SFunTable t = solve_s_ode(m, lambda, gamma2, rho.rho, 1e-3 * rho.rho, 400);
        CHECK(rel_err(t.s.front(), oracle) < 1e-3);
        CHECK(t.xs.front() == 0.0);
    }
}

TEST_CASE("ODE table is self-consistent") {
    const DiscreteMeasure m = three_mass_measure();
    const double lambda = 0.5, gamma2 = 0.5;
    const RhoEstimate rho = estimate_rho(m, lambda, gamma2);
    const SFunTable t = solve_s_ode(m, lambda, gamma2, rho.rho, 1e-3 * rho.rho, 2000);
    double worst1 = 0.0, worst2 = 0.0, worst_h1 = 0.0;
    for (std::size_t i = 1; i + 1 < t.xs.size(); ++i) {
        worst1 = std::max(worst1, rel_err(mesh_derivative(t.xs, t.s, i), t.s1[i]));
        worst2 = std::max(worst2, rel_err(mesh_derivative(t.xs, t.s1, i), t.s2[i]));
        CHECK(t.s[i] > t.s[i - 1]);
        CHECK(t.s1[i] > t.s1[i - 1]);
        CHECK(t.s2[i] > t.s2[i - 1]);
        CHECK(t.s2[i] > 0.0);
        // s = H1(g(x)) and the smaller-root branch condition.
        const double g = t.xs[i] - 1.0 / (1.0 + gamma2 * t.s[i]);
        const HValues hv = h_funcs_all(m, lambda, g);
        worst_h1 = std::max(worst_h1, rel_err(hv.h1, t.s[i]));
        const double denom = 1.0 + gamma2 * hv.h1;
        CHECK(1.0 - gamma2 * hv.h2 / (denom * denom) > 0.0);
    }
    CHECK(worst1 < 1e-3);
    CHECK(worst2 < 1e-3);
    CHECK(worst_h1 < 1e-6);
}

TEST_CASE("beta at a constructed node crossing") {
    const DiscreteMeasure m = three_mass_measure();
    const double lambda = 1.0, gamma2 = 0.5;
    const RhoEstimate rho = estimate_rho(m, lambda, gamma2);
    const SFunTable t = solve_s_ode(m, lambda, gamma2, rho.rho, 1e-3 * rho.rho, 500);
    const std::size_t node = t.xs.size() / 2;
    const double x = t.xs[node];
    const double gamma1 = 1.0 / (x * x * t.s1[node]);
    const EdgeParams e = solve_beta_theta(t, gamma1, rho.rho, lambda);
    CHECK(e.beta == x);
    CHECK(e.theta2 > 0.0);
    CHECK(std::abs(e.beta * e.beta * e.s1_at_beta * gamma1 - 1.0) < 1e-8);
    CHECK(e.theta1 == doctest::Approx((1.0 + gamma1 * x * t.s[node]) / x).epsilon(1e-12));
}

TEST_CASE("beta out of range reports the achieved range") {
    const DiscreteMeasure m = three_mass_measure();
    const RhoEstimate rho = estimate_rho(m, 1.0, 0.5);
    const SFunTable t = solve_s_ode(m, 1.0, 0.5, rho.rho, 0.5 * rho.rho, 200);
    try {
        solve_beta_theta(t, 1e-4, rho.rho, 1.0);
        FAIL("expected BetaOutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BetaOutOfRange);
        CHECK(std::string(e.what()).find("spans [") != std::string::npos);
    }
}

TEST_CASE("oracle pipeline on the identity covariance") {
    const VectorXd eigs = VectorXd::Ones(50);
    const EdgeParams e = oracle_edge_params(eigs, 1.0, 0.5, 0.25);
    CHECK(std::abs(e.rho - 1.25) < 1e-8);
    CHECK(e.beta > 0.0);
    CHECK(e.beta < e.rho);
    CHECK(e.s1_at_beta > 0.0);
    CHECK(e.s2_at_beta > 0.0);
    CHECK(e.theta2 > 0.0);
    CHECK(std::abs(e.beta * e.beta * e.s1_at_beta * 0.5 - 1.0) < 1e-8);
    CHECK(e.theta1 == doctest::Approx((1.0 + 0.5 * e.beta * e.s_at_beta) / e.beta).epsilon(1e-12));
    const double t2 = std::cbrt(0.125 / 2.0 * e.s2_at_beta + 0.25 / (e.beta * e.beta * e.beta));
    CHECK(e.theta2 == doctest::Approx(t2).epsilon(1e-12));
}

TEST_CASE("Toeplitz p = 2 atoms") {
    CovModel c;
    c.kind = CovModel::Kind::Toeplitz;
    c.p = 2;
    const VectorXd e = model_eigenvalues(c);
    const DiscreteMeasure m = DiscreteMeasure::from_spectrum(e);
    REQUIRE(m.size() == 2);
    CHECK(m.masses(0) == doctest::Approx(1.3).epsilon(1e-12));
    CHECK(m.masses(1) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(m.weights(0) == doctest::Approx(0.5));
    const EdgeParams p = oracle_edge_params(e, 0.5, 0.5, 0.5);
    CHECK(p.theta2 > 0.0);
}

TEST_CASE("oracle measure through the estimator path reproduces the oracle") {
    const DiscreteMeasure m = three_mass_measure();
    VectorXd eigs(8);
    eigs << 15.0 / 5.5, 15.0 / 5.5, 5.0 / 5.5, 5.0 / 5.5, 1.0 / 5.5, 1.0 / 5.5, 1.0 / 5.5, 1.0 / 5.5;
    const EdgeParams a = oracle_edge_params(eigs, 0.7, 0.5, 0.5);
    const EdgeParams b = edge_params_from_measure(m, 0.7, 0.5, 0.5);
    CHECK(std::abs(a.theta1 - b.theta1) < 1e-6 * a.theta1);
    CHECK(std::abs(a.theta2 - b.theta2) < 1e-6 * a.theta2);
}
