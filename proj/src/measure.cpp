#include "hdlr/measure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "hdlr/errors.hpp"
#include "hdlr/simplex.hpp"

namespace hdlr {

namespace {

// Residual rows of the L-infinity fit: each complex residual contributes its
// real and imaginary part. Row r reads target(r) - coeffs.row(r) * w.
struct ResidualSystem {
    MatrixXd coeffs;
    VectorXd target;
};

ResidualSystem assemble(const SpectrumView& view, double lambda, const ZGrid& zgrid,
                        const VectorXd& grid, bool second_derivative) {
    const int n_z = static_cast<int>(zgrid.points.size());
    const int K = static_cast<int>(grid.size());
    const int per_point = second_derivative ? 3 : 2;
    ResidualSystem sys;
    sys.coeffs.resize(2 * per_point * n_z, K);
    sys.target.resize(2 * per_point * n_z);
    const double g2 = view.gamma2();

    int row = 0;
    for (int i = 0; i < n_z; ++i) {
        const cplx z = zgrid.points[i];
        const StieltjesValues st = stieltjes_all(view, z);
        const auto [q1, q2] = q_hats(view, lambda, z);
        std::vector<cplx> q{q1, q2};
        if (second_derivative) {
            // d^2/dz^2 of Q1 = (1/(lambda g2)) d^2(1/phi)/dz^2.
            const cplx phi = st.value;
            q.push_back((2.0 * st.d1 * st.d1 / (phi * phi * phi) - st.d2 / (phi * phi)) / (lambda * g2));
        }
        for (int j = 0; j < per_point; ++j) {
            const double norm = std::abs(q[j]);
            if (norm < 1e-14) fail(ErrorCode::DegenerateTransform, "Q functional vanishes on the grid");
            const cplx t = q[j] / norm;
            sys.target(row) = t.real();
            sys.target(row + 1) = t.imag();
            for (int k = 0; k < K; ++k) {
                const double sigma = grid(k);
                const cplx denom = lambda * (1.0 + sigma * st.value);
                cplx a;
                if (j == 0) {
                    a = sigma / denom;
                } else if (j == 1) {
                    a = sigma * sigma / (denom * denom);
                } else {
                    // H1(h(z))'' with h = -lambda phi(z): 2 H3 (lambda phi')^2 - lambda H2 phi''.
                    const cplx r = sigma / denom;
                    a = 2.0 * r * r * r * lambda * lambda * st.d1 * st.d1 - lambda * r * r * st.d2;
                }
                a /= norm;
                sys.coeffs(row, k) = a.real();
                sys.coeffs(row + 1, k) = a.imag();
            }
            row += 2;
        }
    }
    return sys;
}

}  // namespace

DiscreteMeasure DiscreteMeasure::from_spectrum(const VectorXd& eigs, double rel_tol) {
    if (eigs.size() == 0) fail(ErrorCode::InvalidArgument, "empty spectrum");
    std::vector<double> sorted(eigs.data(), eigs.data() + eigs.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    if (!(sorted.back() > 0.0)) fail(ErrorCode::InvalidArgument, "spectrum must be positive");
    std::vector<double> masses;
    std::vector<double> counts;
    for (double v : sorted) {
        if (!masses.empty() && std::abs(masses.back() - v) <= rel_tol * masses.back()) {
            counts.back() += 1.0;
        } else {
            masses.push_back(v);
            counts.push_back(1.0);
        }
    }
    DiscreteMeasure out;
    out.masses = Eigen::Map<VectorXd>(masses.data(), static_cast<Eigen::Index>(masses.size()));
    out.weights = Eigen::Map<VectorXd>(counts.data(), static_cast<Eigen::Index>(counts.size()));
    out.weights /= static_cast<double>(sorted.size());
    return out;
}

void validate_measure(const DiscreteMeasure& measure) {
    if (measure.masses.size() == 0 || measure.masses.size() != measure.weights.size()) {
        fail(ErrorCode::InvalidArgument, "measure needs matching nonempty masses and weights");
    }
    for (int k = 0; k < measure.size(); ++k) {
        if (!(measure.weights(k) > 0.0)) fail(ErrorCode::InvalidArgument, "weights must be positive");
        if (!(measure.masses(k) > 0.0)) fail(ErrorCode::InvalidArgument, "masses must be positive");
        if (k > 0 && !(measure.masses(k) < measure.masses(k - 1))) {
            fail(ErrorCode::InvalidArgument, "masses must be strictly decreasing");
        }
    }
    if (std::abs(measure.weights.sum() - 1.0) > 1e-10) {
        fail(ErrorCode::InvalidArgument, "weights must sum to one");
    }
}

HValues h_funcs_all(const DiscreteMeasure& measure, double lambda, double h) {
    if (!(h < lambda / measure.top_mass())) {
        fail(ErrorCode::DomainViolation, "h must be below lambda / sigma_1");
    }
    HValues out{0.0, 0.0, 0.0};
    for (int k = 0; k < measure.size(); ++k) {
        const double r = measure.masses(k) / (lambda - measure.masses(k) * h);
        const double wr = measure.weights(k) * r;
        out.h1 += wr;
        out.h2 += wr * r;
        out.h3 += wr * r * r;
    }
    return out;
}

double h_func(const DiscreteMeasure& measure, double lambda, double h, int j) {
    if (j < 1 || j > 3) fail(ErrorCode::InvalidArgument, "j must be 1, 2 or 3");
    const HValues v = h_funcs_all(measure, lambda, h);
    return j == 1 ? v.h1 : (j == 2 ? v.h2 : v.h3);
}

VectorXd sigma_grid(const SpectrumView& view, int K) {
    if (K < 1) fail(ErrorCode::InvalidArgument, "K must be positive");
    const double top = view.eigs(0);
    if (!(top > 0.0)) fail(ErrorCode::InvalidArgument, "spectrum has no positive eigenvalue");
    double bottom = view.eigs(view.eigs.size() - 1);
    if (!(bottom > 0.0)) bottom = top / K;
    if (K == 1) return VectorXd::Constant(1, top);
    return VectorXd::LinSpaced(K, bottom, top);
}

double fit_loss(const SpectrumView& view, double lambda, const ZGrid& zgrid,
                const VectorXd& grid, const VectorXd& weights) {
    const ResidualSystem sys = assemble(view, lambda, zgrid, grid, false);
    return (sys.target - sys.coeffs * weights).cwiseAbs().maxCoeff();
}

LpFitReport fit_measure(const SpectrumView& view, double lambda, const ZGrid& zgrid,
                        const FitOptions& options) {
    if (!(lambda > 0.0)) fail(ErrorCode::NonPositiveLambda, "lambda must be positive");
    if (zgrid.points.empty()) fail(ErrorCode::InvalidArgument, "empty z grid");
    const VectorXd grid = sigma_grid(view, options.K);
    const bool second = options.second_derivative && view.gamma2() < 5.0;
    const ResidualSystem sys = assemble(view, lambda, zgrid, grid, second);
    const Eigen::Index R = sys.coeffs.rows();
    const Eigen::Index K = grid.size();

    // Dual of  min theta  s.t.  |target_r - a_r w| <= theta, w >= 0, sum w = 1.
    // Columns: y+ (R), y- (R), mu+, mu-.  Rows: one per atom, then the theta row.
    LinearProgram lp;
    lp.A = MatrixXd::Zero(K + 1, 2 * R + 2);
    lp.A.block(0, 0, K, R) = -sys.coeffs.transpose();
    lp.A.block(0, R, K, R) = sys.coeffs.transpose();
    lp.A.block(0, 2 * R, K, 1).setConstant(-1.0);
    lp.A.block(0, 2 * R + 1, K, 1).setConstant(1.0);
    lp.A.block(K, 0, 1, 2 * R).setConstant(1.0);
    lp.b = VectorXd::Zero(K + 1);
    lp.b(K) = 1.0;
    lp.c.resize(2 * R + 2);
    lp.c.head(R) = -sys.target;
    lp.c.segment(R, R) = sys.target;
    lp.c(2 * R) = -1.0;
    lp.c(2 * R + 1) = 1.0;
    lp.sense.assign(K + 1, RowSense::LessEqual);

    const LpSolution sol = solve_lp(lp);
    if (sol.status == LpStatus::Infeasible) fail(ErrorCode::LpInfeasible, "weight LP infeasible");
    if (sol.status != LpStatus::Optimal) {
        fail(ErrorCode::NonConvergence, "weight LP did not reach optimality (status " +
                                             std::to_string(static_cast<int>(sol.status)) + ", " +
                                             std::to_string(sol.iterations) + " pivots)");
    }

    VectorXd w = sol.duals.head(K).cwiseMax(0.0);
    const double cut = std::pow(10.0, -options.d) / static_cast<double>(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        if (!(w(k) > cut)) w(k) = 0.0;
    }
    const double total = w.sum();
    if (!(total > 0.0)) fail(ErrorCode::EmptyMeasure, "truncation removed every atom");

    std::vector<double> masses, weights;
    for (Eigen::Index k = K - 1; k >= 0; --k) {
        if (w(k) > 0.0) {
            masses.push_back(grid(k));
            weights.push_back(w(k) / total);
        }
    }
    LpFitReport report;
    report.measure.masses = Eigen::Map<VectorXd>(masses.data(), static_cast<Eigen::Index>(masses.size()));
    report.measure.weights = Eigen::Map<VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
    report.loss_theta = std::max(sol.objective, 0.0);
    report.n_active = report.measure.size();
    report.grid_K = static_cast<int>(K);
    report.grid_I = static_cast<int>(zgrid.points.size());
    report.lp_iterations = sol.iterations;
    return report;
}

}  // namespace hdlr
