// Acceptance suite: one PASS/FAIL line per criterion A1-A10, tolerances fixed
// below. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hdlr/edge.hpp"
#include "hdlr/errors.hpp"
#include "hdlr/io.hpp"
#include "hdlr/measure.hpp"
#include "hdlr/model.hpp"
#include "hdlr/power.hpp"
#include "hdlr/simulation.hpp"

using namespace hdlr;

namespace {

const std::string kSpecDir = HDLR_SPEC_DIR;

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Verdict()>& body, double shared_secs = 0.0) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() + shared_secs;
    if (!v.pass) ++failures;
    std::printf("%s %s  %s: %s (%.1f s)\n", id, v.pass ? "PASS" : "FAIL", title, v.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Eigenvalues of W2 for a replicate's residual matrix.
SpectrumView view_from(const SscpPair& s) {
    return make_spectrum_view(s);
}

// Second-order derivative on a nonuniform mesh.
double mesh_derivative(const std::vector<double>& x, const std::vector<double>& f, std::size_t i) {
    const double h0 = x[i] - x[i - 1];
    const double h1 = x[i + 1] - x[i];
    return (h0 * h0 * f[i + 1] - h1 * h1 * f[i - 1] + (h1 * h1 - h0 * h0) * f[i]) / (h0 * h1 * (h0 + h1));
}

// ---- A1, A2 -------------------------------------------------------------

ExperimentResult null_result() {
    return run_null_size(read_spec_file(kSpecDir + "/table4_desk.json"));
}

Verdict a1(const ExperimentResult& r) {
    bool ok = !r.summaries.empty();
    std::string d = "size at 5% per lambda";
    for (const LambdaSummary& s : r.summaries) {
        const double rate = s.reject_rate.at(0);
        ok = ok && rate >= 0.025 && rate <= 0.080 && s.n_ok > 0;
        d += " " + s.label + "=" + fmt("%.3f", rate) + " (n=" + std::to_string(s.n_ok) + ")";
    }
    return {ok, d + "; required in [0.025, 0.080]"};
}

Verdict a2(const ExperimentResult& r) {
    bool ok = !r.summaries.empty();
    std::string d = "KS(oracle-standardized, TW1)";
    for (const LambdaSummary& s : r.summaries) {
        ok = ok && s.ks_oracle <= 0.08;
        d += " " + s.label + "=" + fmt("%.4f", s.ks_oracle);
    }
    return {ok, d + "; required <= 0.08"};
}

// ---- A3, A5 -------------------------------------------------------------

struct EstimationRun {
    std::vector<double> err1, err2;
    int failed = 0;
    double worst_fd = 0.0;
    double worst_beta = 0.0;
    int tables = 0;
};

EstimationRun estimation_run() {
    const ExperimentSpec spec = read_spec_file(kSpecDir + "/estimation_desk.json");
    validate_spec(spec);
    const CovMatrix cov = spec_covariance(spec);
    const double lambda = spec.lambdas.at(0).value;
    const double g1 = static_cast<double>(spec.p) / spec.n1;
    const double g2 = static_cast<double>(spec.p) / spec.n2;
    const EdgeParams oracle = oracle_edge_params(cov.eigs, lambda, g1, g2, spec.estimator);
    const double scale = std::pow(spec.p, 2.0 / 3.0) / oracle.theta2;

    const int n = spec.replicates;
    std::vector<double> e1(n, -1.0), e2(n, -1.0), fd(n, 0.0), beta(n, 0.0);
    parallel_for(n, [&](int r) {
        try {
            const LinearModel model = generate_model(spec, cov, 0.0, kMainStream, r);
            const SscpPair sscp = build_sscp(model);
            const EdgeEstimate est = estimate_edge_params(view_from(sscp), lambda, spec.estimator);
            e1[r] = scale * std::abs(est.params.theta1 - oracle.theta1);
            e2[r] = scale * std::abs(est.params.theta2 - oracle.theta2);
            const SFunTable& t = est.table;
            double worst = 0.0;
            for (std::size_t i = 1; i + 1 < t.xs.size(); ++i) {
                worst = std::max(worst, std::abs(mesh_derivative(t.xs, t.s, i) - t.s1[i]) / t.s1[i]);
            }
            fd[r] = worst;
            const EdgeParams& p = est.params;
            beta[r] = std::abs(p.beta * p.beta * p.s1_at_beta * g1 - 1.0);
        } catch (const Error&) {
        }
    });
    EstimationRun out;
    for (int r = 0; r < n; ++r) {
        if (e1[r] < 0.0) {
            ++out.failed;
            continue;
        }
        out.err1.push_back(e1[r]);
        out.err2.push_back(e2[r]);
        out.worst_fd = std::max(out.worst_fd, fd[r]);
        out.worst_beta = std::max(out.worst_beta, beta[r]);
        ++out.tables;
    }
    return out;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? NAN : s / v.size();
}

Verdict a3(const EstimationRun& run) {
    const double m1 = mean(run.err1), m2 = mean(run.err2);
    const bool ok = run.tables > 0 && m1 <= 0.12 && m2 <= 0.28;
    return {ok, "mean scaled |dTheta1| = " + fmt("%.4f", m1) + " (<= 0.12), |dTheta2| = " + fmt("%.4f", m2) +
                    " (<= 0.28) over " + std::to_string(run.tables) + " replicates, " +
                    std::to_string(run.failed) + " failed"};
}

Verdict a5(const EstimationRun& run) {
    const bool ok = run.tables > 0 && run.failed == 0 && run.worst_fd <= 1e-3 && run.worst_beta <= 1e-8;
    return {ok, "worst relative |s' - FD(s)| = " + fmt("%.2e", run.worst_fd) + " (<= 1e-3), worst |beta^2 s'(beta) g1 - 1| = " +
                    fmt("%.2e", run.worst_beta) + " (<= 1e-8) on " + std::to_string(run.tables) + " tables"};
}

// ---- A4 -----------------------------------------------------------------

Verdict a4() {
    const VectorXd identity = VectorXd::Ones(100);
    const EdgeParams e = oracle_edge_params(identity, 1.0, 0.5, 0.25);
    const double err = std::abs(e.rho - 1.25);
    const EdgeParams tiny = oracle_edge_params(identity, 1e-8, 0.5, 0.25);
    const double err_mp = std::abs(tiny.rho - 0.25);
    return {err <= 1e-6 && err_mp <= 1e-4,
            "|rho - 1.25| = " + fmt("%.2e", err) + " (<= 1e-6), lambda=1e-8: |rho - 0.25| = " + fmt("%.2e", err_mp) +
                " (<= 1e-4)"};
}

// ---- A6 -----------------------------------------------------------------

Verdict a6() {
    const int p = 600, n2 = 600;
    const double lambda = 1.0;
    std::mt19937_64 rng(substream_seed(1, 0, 0));
    const CovMatrix cov = make_cov(CovModel::three_mass(p, 0.5), rng);
    std::mt19937_64 noise(substream_seed(1, kMainStream, 0));
    const MatrixXd y = cov.sigma_sqrt * draw_errors(ErrorLaw::Gaussian, p, n2, noise);
    const SscpPair sscp = make_sscp(MatrixXd::Zero(p, p), y * y.transpose() / n2, p, n2);
    const SpectrumView view = view_from(sscp);
    const EstimatorOptions opt;
    const LpFitReport fit = fit_measure(view, lambda, build_zgrid(view, lambda, opt.I), {opt.K, opt.d, false});
    const DiscreteMeasure truth = DiscreteMeasure::from_spectrum(cov.eigs);

    const double h_hi = 0.9 * lambda / truth.top_mass();
    const double pole = lambda / fit.measure.top_mass();
    double worst = 0.0, worst_left = 0.0;
    bool hit_pole = false;
    const int n = 200;
    for (int i = 0; i <= n; ++i) {
        const double h = -5.0 + (h_hi + 5.0) * i / n;
        if (h >= pole) {
            hit_pole = true;
            continue;
        }
        for (int j = 1; j <= 2; ++j) {
            const double e = std::abs(h_func(fit.measure, lambda, h, j) / h_func(truth, lambda, h, j) - 1.0);
            worst = std::max(worst, e);
            if (h <= 0.0) worst_left = std::max(worst_left, e);
        }
    }
    const bool ok = !hit_pole && worst <= 1e-2;
    std::string d = "max relative error of H1, H2 on [-5, " + fmt("%.3f", h_hi) + "] = " + fmt("%.3g", worst) +
                    " (<= 1e-2); on [-5, 0] = " + fmt("%.3g", worst_left) + "; fitted sigma_1 = " +
                    fmt("%.3f", fit.measure.top_mass()) + " vs true " + fmt("%.3f", truth.top_mass());
    if (hit_pole) d += "; probe grid crosses the fitted pole at h = " + fmt("%.3f", pole);
    return {ok, d};
}

// ---- A7 -----------------------------------------------------------------

Verdict a7() {
    const ExperimentSpec spec = read_spec_file(kSpecDir + "/power_desk.json");
    const ExperimentResult r = run_power_curve(spec, spec.zetas);
    bool ok = r.summaries.size() == spec.zetas.size();
    std::string d = "size-adjusted power:";
    double best = 0.0;
    for (std::size_t i = 0; i < r.summaries.size(); ++i) {
        const LambdaSummary& s = r.summaries[i];
        const double pw = s.adjusted_reject_rate.at(0);
        d += " " + fmt("%.3f", pw);
        if (i > 0 && s.n_ok > 0) {
            // Nondecreasing within two Monte Carlo standard errors of the running maximum.
            const double se = std::sqrt(std::max(best * (1.0 - best), 1.0 / s.n_ok) / s.n_ok);
            if (pw < best - 2.0 * se) ok = false;
        }
        best = std::max(best, pw);
    }
    const double top = r.summaries.empty() ? 0.0 : r.summaries.back().adjusted_reject_rate.at(0);
    ok = ok && top >= 0.9;
    return {ok, d + "; top = " + fmt("%.3f", top) + " (>= 0.9), monotone within 2 SE"};
}

// ---- A8 -----------------------------------------------------------------

Verdict a8() {
    ExperimentSpec spec;
    spec.mode = ExperimentSpec::Mode::NullSize;
    spec.cov = CovModel::three_mass(100, 0.5);
    spec.p = 100;
    spec.n1 = 200;
    spec.m = 200;
    spec.n2 = 200;
    spec.lambdas = {LambdaChoice::fixed(1.0)};
    spec.replicates = 50;
    spec.seed = 8;
    const CovMatrix cov = spec_covariance(spec);
    EstimatorOptions est;
    est.K = 150;
    est.I = 100;
    const int grid_size = 12;

    const int n = spec.replicates;
    std::vector<int> outcome(n, -1);
    parallel_for(n, [&](int r) {
        try {
            const LinearModel model = generate_model(spec, cov, 0.0, kMainStream, r);
            const SscpPair sscp = build_sscp(model);
            const SpectrumView view = view_from(sscp);
            const auto [lo, hi] = default_lambda_bounds(view);
            const LambdaCurve curve = compute_lambda_curve(view, log_lambda_grid(lo, hi, grid_size), est);
            const double l_i = select_lambda(view, &sscp, AlternativePrior::identity(), curve).lambda_opt;
            const double l_s = select_lambda(view, &sscp, AlternativePrior::sigma(), curve).lambda_opt;
            outcome[r] = l_s >= l_i ? 1 : 0;
        } catch (const Error&) {
        }
    });
    int ge = 0, ok_reps = 0;
    for (int o : outcome) {
        if (o < 0) continue;
        ++ok_reps;
        ge += o;
    }
    const double frac = static_cast<double>(ge) / n;
    return {frac >= 0.8, "lambda_Sigma >= lambda_I in " + std::to_string(ge) + "/" + std::to_string(n) +
                             " replicates (" + fmt("%.2f", frac) + ", >= 0.80); " +
                             std::to_string(n - ok_reps) + " failed"};
}

// ---- A9 -----------------------------------------------------------------

// Companion Stieltjes limit at z = -lambda: the positive root of
// -lambda = -1/phi + gamma sum_k w_k t_k / (1 + t_k phi).
double phi_minus_lambda(const DiscreteMeasure& m, double gamma, double lambda) {
    auto f = [&](double phi) {
        double s = 0.0;
        for (int k = 0; k < m.size(); ++k) s += m.weights(k) * m.masses(k) / (1.0 + m.masses(k) * phi);
        return -1.0 / phi + gamma * s + lambda;
    };
    double lo = 1e-12, hi = 1.0 / lambda;
    while (f(hi) < 0.0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Verdict a9() {
    const int p = 600, n2 = 600;
    const double lambda = 1.0;
    std::mt19937_64 rng(substream_seed(9, 0, 0));
    const CovMatrix cov = make_cov(CovModel::three_mass(p, 0.5), rng);
    std::mt19937_64 noise(substream_seed(9, kMainStream, 0));
    const MatrixXd y = cov.sigma_sqrt * draw_errors(ErrorLaw::Gaussian, p, n2, noise);
    const SscpPair sscp = make_sscp(MatrixXd::Zero(p, p), y * y.transpose() / n2, p, n2);
    const auto ups = upsilon(view_from(sscp), lambda);

    const DiscreteMeasure truth = DiscreteMeasure::from_spectrum(cov.eigs);
    const double phi = phi_minus_lambda(truth, static_cast<double>(p) / n2, lambda);
    double worst = 0.0;
    std::string d;
    for (int i = 0; i < 3; ++i) {
        double de = 0.0;
        for (int k = 0; k < truth.size(); ++k) {
            const double t = truth.masses(k);
            de += truth.weights(k) * std::pow(t, i) / (lambda * phi * t + lambda);
        }
        const double err = std::abs(ups[i] / de - 1.0);
        worst = std::max(worst, err);
        d += " U" + std::to_string(i) + "=" + fmt("%.5f", ups[i]) + " vs " + fmt("%.5f", de);
    }
    return {worst <= 5e-2, "values" + d + "; worst relative error " + fmt("%.2e", worst) +
                               " (<= 5e-2)"};
}

// ---- A10 ----------------------------------------------------------------

Verdict a10() {
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> rank(1, 30);
    std::uniform_real_distribution<double> log_lambda(std::log(0.05), std::log(20.0));
    std::normal_distribution<double> normal;
    const int p = 30;
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const int n1 = rank(rng), n2 = rank(rng) + 10;
        MatrixXd g1(p, n1), g2(p, n2);
        for (int j = 0; j < n1; ++j)
            for (int i = 0; i < p; ++i) g1(i, j) = normal(rng);
        for (int j = 0; j < n2; ++j)
            for (int i = 0; i < p; ++i) g2(i, j) = normal(rng);
        const MatrixXd w1 = g1 * g1.transpose() / n1;
        const MatrixXd w2 = g2 * g2.transpose() / n2;
        const double lambda = std::exp(log_lambda(rng));
        const int k = std::min(p, n1);
        const LargestRootResult r = largest_root(make_sscp(w1, w2, n1, n2), lambda, k);
        Eigen::EigenSolver<MatrixXd> es(w1 * (w2 + lambda * MatrixXd::Identity(p, p)).inverse(), false);
        VectorXd ev = es.eigenvalues().real();
        std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
        for (int i = 0; i < k; ++i) worst = std::max(worst, std::abs(r.top_k(i) - ev(i)) / std::max(1.0, ev(0)));
    }
    return {worst <= 1e-8, "worst eigenvalue discrepancy (relative to max(1, ell_1)) = " + fmt("%.2e", worst) +
                               " (<= 1e-8) over 100 pairs"};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main() {
    std::printf("acceptance suite, %d worker thread(s)\n", worker_count());
    ExperimentResult null_run;
    bool null_ok = false;
    std::string null_error;
    const auto null_t0 = std::chrono::steady_clock::now();
    try {
        null_run = null_result();
        null_ok = true;
    } catch (const std::exception& e) {
        null_error = e.what();
    }
    const double null_secs = seconds_since(null_t0);
    report("A1", "null size calibration", [&] { return null_ok ? a1(null_run) : Verdict{false, null_error}; }, null_secs);
    report("A2", "TW1 distributional match", [&] { return null_ok ? a2(null_run) : Verdict{false, null_error}; }, null_secs);

    EstimationRun est;
    bool est_ok = false;
    std::string est_error;
    const auto est_t0 = std::chrono::steady_clock::now();
    try {
        est = estimation_run();
        est_ok = true;
    } catch (const std::exception& e) {
        est_error = e.what();
    }
    const double est_secs = seconds_since(est_t0);
    report("A3", "Theta estimation precision", [&] { return est_ok ? a3(est) : Verdict{false, est_error}; }, est_secs);
    report("A4", "single-atom closed form", a4);
    report("A5", "ODE self-consistency", [&] { return est_ok ? a5(est) : Verdict{false, est_error}; }, est_secs);
    report("A6", "LP functional recovery", a6);
    report("A7", "power shape", a7);
    report("A8", "lambda-selection ordering", a8);
    report("A9", "Upsilon vs deterministic equivalent", a9);
    report("A10", "dual-form equivalence", a10);
    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
