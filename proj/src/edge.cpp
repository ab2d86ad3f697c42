#include "hdlr/edge.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "hdlr/errors.hpp"

namespace hdlr {

namespace {

constexpr double kResidualTol = 1e-12;
constexpr int kMaxIter = 200;

// Safeguarded Newton on a bracket [lo, hi] with f(lo) and f(hi) of opposite sign.
template <class F>
double bracketed_newton(F&& f_and_df, double lo, double hi, double x0, double ftol, double xtol) {
    auto [f_lo, d_lo] = f_and_df(lo);
    (void)d_lo;
    double x = std::clamp(x0, lo, hi);
    for (int iter = 0; iter < kMaxIter; ++iter) {
        const auto [f, df] = f_and_df(x);
        if (std::abs(f) <= ftol) return x;
        if ((f < 0.0) == (f_lo < 0.0)) {
            lo = x;
            f_lo = f;
        } else {
            hi = x;
        }
        double next = (df != 0.0 && std::isfinite(df)) ? x - f / df : lo - 1.0;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(hi - lo) <= xtol * std::max(1.0, std::abs(x))) return next;
        x = next;
    }
    fail(ErrorCode::NonConvergence, "root solve did not converge");
}

struct OdeRhs {
    double s1, s2;
};

OdeRhs ode_rhs(const DiscreteMeasure& measure, double lambda, double gamma2, double x, double s) {
    const double inv = 1.0 / (1.0 + gamma2 * s);
    const double g = x - inv;
    if (!(g < lambda / measure.top_mass())) {
        fail(ErrorCode::SingularDenominator, "ODE left the admissible branch");
    }
    const HValues hv = h_funcs_all(measure, lambda, g);
    const double zeta = gamma2 * inv * inv;
    const double den = 1.0 - hv.h2 * zeta;
    if (!(den > 1e-12)) fail(ErrorCode::SingularDenominator, "1 - H2 zeta vanished before the endpoint");
    const double s1 = hv.h2 / den;
    const double a = zeta * s1 + 1.0;
    const double gs1 = gamma2 * s1;
    const double s2 = (2.0 * a * a * hv.h3 - 2.0 * inv * inv * inv * hv.h2 * gs1 * gs1) / den;
    return {s1, s2};
}

double rk4_step(const DiscreteMeasure& measure, double lambda, double gamma2, double x, double s,
                double dx) {
    const double k1 = ode_rhs(measure, lambda, gamma2, x, s).s1;
    const double k2 = ode_rhs(measure, lambda, gamma2, x + 0.5 * dx, s + 0.5 * dx * k1).s1;
    const double k3 = ode_rhs(measure, lambda, gamma2, x + 0.5 * dx, s + 0.5 * dx * k2).s1;
    const double k4 = ode_rhs(measure, lambda, gamma2, x + dx, s + dx * k3).s1;
    return s + dx / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

RhoEstimate estimate_rho(const DiscreteMeasure& measure, double lambda, double gamma2) {
    validate_measure(measure);
    if (!(lambda > 0.0)) fail(ErrorCode::NonPositiveLambda, "lambda must be positive");
    const double h_max = lambda / measure.top_mass();
    if (gamma2 * measure.top_weight() >= 1.0) return {h_max, true, h_max};

    // f(h) = gamma2 H2 / (1 + gamma2 H1)^2 - 1 increases on (-inf, h_max);
    // parametrize by u = h_max - h > 0 and search a log grid for the sign change.
    auto f_and_df = [&](double h) {
        const HValues hv = h_funcs_all(measure, lambda, h);
        const double q = 1.0 + gamma2 * hv.h1;
        const double f = gamma2 * hv.h2 / (q * q) - 1.0;
        const double df = gamma2 * (2.0 * hv.h3 / (q * q) - 2.0 * gamma2 * hv.h2 * hv.h2 / (q * q * q));
        return std::pair{f, df};
    };
    double u_pos = h_max, u_neg = h_max;
    int guard = 0;
    while (f_and_df(h_max - u_neg).first >= 0.0) {
        u_neg *= 2.0;
        if (++guard > 200) fail(ErrorCode::NoRoot, "no negative side for the edge equation");
    }
    guard = 0;
    while (f_and_df(h_max - u_pos).first <= 0.0) {
        u_pos *= 0.5;
        if (++guard > 1000 || !(h_max - u_pos < h_max)) {
            fail(ErrorCode::NoRoot, "no positive side for the edge equation");
        }
    }
    // Grid refinement of the bracket before Newton.
    const int grid = 64;
    double lo = h_max - u_neg, hi = h_max - u_pos;
    const double ratio = std::pow(u_pos / u_neg, 1.0 / grid);
    double u = u_neg;
    for (int i = 0; i < grid; ++i) {
        const double u_next = u * ratio;
        if (f_and_df(h_max - u_next).first > 0.0) {
            lo = h_max - u;
            hi = h_max - u_next;
            break;
        }
        u = u_next;
    }
    const double h = bracketed_newton(f_and_df, lo, hi, 0.5 * (lo + hi), kResidualTol, 1e-15);
    const HValues hv = h_funcs_all(measure, lambda, h);
    return {h + 1.0 / (1.0 + gamma2 * hv.h1), false, h};
}

double solve_s_initial(const DiscreteMeasure& measure, double lambda, double gamma2,
                       std::optional<double> guess) {
    auto f_and_df = [&](double s) {
        const double inv = 1.0 / (1.0 + gamma2 * s);
        const HValues hv = h_funcs_all(measure, lambda, -inv);
        return std::pair{hv.h1 - s, hv.h2 * gamma2 * inv * inv - 1.0};
    };
    auto on_branch = [&](double s) {
        const double q = 1.0 + gamma2 * s;
        return s > 0.0 && gamma2 * h_func(measure, lambda, -1.0 / q, 2) < q * q;
    };

    if (guess && *guess > 0.0 && std::isfinite(*guess)) {
        double s = *guess;
        for (int iter = 0; iter < 100; ++iter) {
            const auto [f, df] = f_and_df(s);
            if (std::abs(f) <= kResidualTol * std::max(1.0, s)) {
                if (on_branch(s)) return s;
                break;
            }
            if (df == 0.0) break;
            const double next = s - f / df;
            if (!(next > 0.0)) break;
            s = next;
        }
    }

    // F(0) = H1(-1) > 0 and F(s) -> -inf; exactly one root on (0, inf).
    double hi = 1.0;
    int guard = 0;
    while (f_and_df(hi).first > 0.0) {
        hi *= 2.0;
        if (++guard > 200) fail(ErrorCode::InitFailure, "could not bracket s(0)");
    }
    const double s = bracketed_newton(f_and_df, 0.0, hi, 0.5 * hi, kResidualTol, 1e-15);
    if (!on_branch(s)) fail(ErrorCode::InitFailure, "s(0) root violates the branch condition");
    return s;
}

SFunTable solve_s_ode(const DiscreteMeasure& measure, double lambda, double gamma2, double rho,
                      double margin, int steps, std::optional<double> initial_guess) {
    validate_measure(measure);
    if (!(margin > 0.0 && margin < rho)) fail(ErrorCode::InvalidArgument, "margin must lie in (0, rho)");
    if (steps < 2) fail(ErrorCode::InvalidArgument, "need at least two ODE steps");

    SFunTable table;
    table.measure = measure;
    table.lambda = lambda;
    table.gamma2 = gamma2;
    table.rho = rho;

    const double x_end = rho - margin;
    table.xs.resize(steps + 1);
    for (int i = 0; i <= steps; ++i) {
        const double t = 1.0 - static_cast<double>(i) / steps;
        table.xs[i] = x_end * (1.0 - t * t);
    }
    table.xs[steps] = x_end;
    table.s.resize(steps + 1);
    table.s1.resize(steps + 1);
    table.s2.resize(steps + 1);

    double s = solve_s_initial(measure, lambda, gamma2, initial_guess);
    for (int i = 0; i <= steps; ++i) {
        if (i > 0) s = rk4_step(measure, lambda, gamma2, table.xs[i - 1], s, table.xs[i] - table.xs[i - 1]);
        const OdeRhs d = ode_rhs(measure, lambda, gamma2, table.xs[i], s);
        table.s[i] = s;
        table.s1[i] = d.s1;
        table.s2[i] = d.s2;
    }
    return table;
}

SFunValue s_derivatives(const SFunTable& table, double x, double s) {
    const OdeRhs d = ode_rhs(table.measure, table.lambda, table.gamma2, x, s);
    return {s, d.s1, d.s2};
}

SFunValue s_fun_at(const SFunTable& table, double x) {
    if (!(x >= table.xs.front() && x <= table.xs.back())) {
        fail(ErrorCode::DomainViolation, "x outside the tabulated range");
    }
    auto it = std::upper_bound(table.xs.begin(), table.xs.end(), x);
    std::size_t i = static_cast<std::size_t>(std::distance(table.xs.begin(), it));
    i = i == 0 ? 0 : i - 1;
    if (table.xs[i] == x) return {table.s[i], table.s1[i], table.s2[i]};
    const double s = rk4_step(table.measure, table.lambda, table.gamma2, table.xs[i], table.s[i], x - table.xs[i]);
    return s_derivatives(table, x, s);
}

EdgeParams solve_beta_theta(const SFunTable& table, double gamma1, double rho, double lambda) {
    if (!(gamma1 > 0.0)) fail(ErrorCode::InvalidArgument, "gamma1 must be positive");
    const double target = 1.0 / gamma1;
    const std::size_t n = table.xs.size();
    auto u_at = [&](std::size_t i) { return table.xs[i] * table.xs[i] * table.s1[i]; };
    if (u_at(n - 1) < target) {
        std::ostringstream msg;
        msg << "x^2 s'(x) spans [" << u_at(0) << ", " << u_at(n - 1) << "] below 1/gamma1 = " << target
            << "; reduce the margin or gamma1 is too small";
        fail(ErrorCode::BetaOutOfRange, msg.str());
    }
    std::size_t i = 0;
    while (i + 1 < n && u_at(i + 1) < target) ++i;

    double beta;
    SFunValue v;
    if (u_at(i) == target && table.xs[i] > 0.0) {
        beta = table.xs[i];
        v = {table.s[i], table.s1[i], table.s2[i]};
    } else if (u_at(i + 1) == target) {
        beta = table.xs[i + 1];
        v = {table.s[i + 1], table.s1[i + 1], table.s2[i + 1]};
    } else {
        auto f_and_df = [&](double x) {
            const SFunValue sv = s_fun_at(table, x);
            return std::pair{x * x * sv.s1 - target, 2.0 * x * sv.s1 + x * x * sv.s2};
        };
        const double lo = table.xs[i], hi = table.xs[i + 1];
        const double frac = (target - u_at(i)) / (u_at(i + 1) - u_at(i));
        beta = bracketed_newton(f_and_df, lo, hi, lo + frac * (hi - lo), 1e-14 * target, 1e-16);
        v = s_fun_at(table, beta);
    }

    EdgeParams out;
    out.lambda = lambda;
    out.rho = rho;
    out.beta = beta;
    out.s_at_beta = v.s;
    out.s1_at_beta = v.s1;
    out.s2_at_beta = v.s2;
    out.theta1 = (1.0 + gamma1 * beta * v.s) / beta;
    out.theta2 = std::cbrt(0.5 * gamma1 * gamma1 * gamma1 * v.s2 + gamma1 * gamma1 / (beta * beta * beta));
    return out;
}

EdgeParams edge_params_from_measure(const DiscreteMeasure& measure, double lambda, double gamma1,
                                    double gamma2, const EstimatorOptions& options,
                                    std::optional<double> s0_guess, SFunTable* table_out) {
    const RhoEstimate rho = estimate_rho(measure, lambda, gamma2);
    double margin = options.margin_fraction * rho.rho;
    for (int attempt = 0;; ++attempt) {
        SFunTable table = solve_s_ode(measure, lambda, gamma2, rho.rho, margin, options.ode_steps, s0_guess);
        try {
            EdgeParams params = solve_beta_theta(table, gamma1, rho.rho, lambda);
            params.is_discrete_edge = rho.is_discrete_edge;
            if (table_out) *table_out = std::move(table);
            return params;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::BetaOutOfRange || attempt >= options.margin_halvings) throw;
        }
        margin *= 0.5;
    }
}

EdgeParams oracle_edge_params(const VectorXd& sigma_eigs, double lambda, double gamma1,
                              double gamma2, const EstimatorOptions& options) {
    const DiscreteMeasure measure = DiscreteMeasure::from_spectrum(sigma_eigs);
    return edge_params_from_measure(measure, lambda, gamma1, gamma2, options);
}

EdgeEstimate estimate_edge_params(const SpectrumView& view, double lambda,
                                  const EstimatorOptions& options) {
    EdgeEstimate out;
    const ZGrid zgrid = build_zgrid(view, lambda, options.I);
    out.fit = fit_measure(view, lambda, zgrid, {options.K, options.d, options.second_derivative});
    const double g2 = view.gamma2();
    const double phi = stieltjes(view, cplx(-lambda, 0.0)).real();
    const double guess = 1.0 / (lambda * g2 * phi) - 1.0 / g2;
    out.params = edge_params_from_measure(out.fit.measure, lambda, view.gamma1(), g2, options, guess,
                                          &out.table);
    return out;
}

}  // namespace hdlr
