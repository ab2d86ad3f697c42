#include "hdlr/power.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "hdlr/errors.hpp"
#include "hdlr/measure.hpp"

namespace hdlr {

AlternativePrior AlternativePrior::polynomial(const std::array<double, 3>& pis) {
    AlternativePrior prior;
    prior.kind = Kind::Polynomial;
    prior.pis = pis;
    return prior;
}

AlternativePrior AlternativePrior::explicit_matrix(const MatrixXd& D) {
    AlternativePrior prior;
    prior.kind = Kind::ExplicitD;
    prior.D = D;
    return prior;
}

void validate_prior(const AlternativePrior& prior, int p) {
    if (prior.kind == AlternativePrior::Kind::Polynomial) {
        for (double v : prior.pis) {
            if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "prior coefficients must be finite");
        }
        if (prior.pis[0] == 0.0 && prior.pis[1] == 0.0 && prior.pis[2] == 0.0) {
            fail(ErrorCode::InvalidArgument, "prior polynomial is identically zero");
        }
        return;
    }
    if (prior.D.rows() != p || prior.D.cols() != p) {
        fail(ErrorCode::DimensionMismatch, "prior D must be p x p");
    }
    const double scale = std::max(prior.D.cwiseAbs().maxCoeff(), 1.0);
    if ((prior.D - prior.D.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
        fail(ErrorCode::InvalidArgument, "prior D must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (prior.D + prior.D.transpose()), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
        fail(ErrorCode::InvalidArgument, "prior D must be positive semidefinite");
    }
}

void check_prior_on_atoms(const AlternativePrior& prior, const VectorXd& atoms) {
    if (prior.kind != AlternativePrior::Kind::Polynomial) return;
    for (Eigen::Index k = 0; k < atoms.size(); ++k) {
        const double s = atoms(k);
        const double v = prior.pis[0] + prior.pis[1] * s + prior.pis[2] * s * s;
        if (!(v > 0.0)) {
            std::ostringstream msg;
            msg << "prior polynomial is not positive at fitted atom " << s;
            fail(ErrorCode::InvalidArgument, msg.str());
        }
    }
}

double xi_explicit(const SscpPair& sscp, double lambda, const MatrixXd& D) {
    if (!(lambda > 0.0)) fail(ErrorCode::NonPositiveLambda, "lambda must be positive");
    const int p = sscp.p();
    if (D.rows() != p || D.cols() != p) fail(ErrorCode::DimensionMismatch, "D must be p x p");
    MatrixXd shifted = sscp.W2;
    shifted.diagonal().array() += lambda;
    Eigen::LLT<MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success) fail(ErrorCode::EigenFailure, "W2 + lambda I is not positive definite");
    return llt.solve(D).trace() / p;
}

std::vector<double> spectral_moments(const SscpPair& sscp, int r) {
    if (r < 0) fail(ErrorCode::InvalidArgument, "moment order must be nonnegative");
    if (r > 2) fail(ErrorCode::UnsupportedOrder, "only r <= 2 is supported");
    if (r == 0) return {1.0};
    return {1.0, sscp.W2.trace() / sscp.p()};
}

std::array<double, 3> upsilon(const SpectrumView& view, double lambda) {
    if (!(lambda > 0.0)) fail(ErrorCode::NonPositiveLambda, "lambda must be positive");
    const double phi = stieltjes(view, cplx(-lambda, 0.0)).real();
    if (std::abs(phi) < 1e-14) fail(ErrorCode::DegenerateTransform, "phi(-lambda) vanishes");
    const double ratio = static_cast<double>(view.n2) / view.p;
    // The companion spectrum has n2 entries, so the zero-padding correction is
    // scaled by n2 (not n1).
    const double m1 = view.eigs.sum() / view.p;
    std::array<double, 3> ups{};
    ups[0] = ratio * (phi - (1.0 - 1.0 / ratio) / lambda);
    ups[1] = (1.0 - lambda * ups[0]) / (lambda * phi);
    ups[2] = (m1 - lambda * ups[1]) / (lambda * phi);
    return ups;
}

double xi_polynomial(const SpectrumView& view, double lambda, const std::array<double, 3>& pis) {
    const auto ups = upsilon(view, lambda);
    return pis[0] * ups[0] + pis[1] * ups[1] + pis[2] * ups[2];
}

double xi_polynomial(const SpectrumView& view, const SscpPair& sscp, double lambda,
                     const std::array<double, 3>& pis) {
    if (sscp.p() != view.p) fail(ErrorCode::DimensionMismatch, "view and SSCP pair disagree on p");
    return xi_polynomial(view, lambda, pis);
}

double xi_hat(const SpectrumView& view, const SscpPair* sscp, double lambda,
              const AlternativePrior& prior) {
    if (prior.kind == AlternativePrior::Kind::Polynomial) return xi_polynomial(view, lambda, prior.pis);
    if (sscp == nullptr) fail(ErrorCode::InvalidArgument, "an explicit prior needs the SSCP pair");
    return xi_explicit(*sscp, lambda, prior.D);
}

std::pair<double, double> default_lambda_bounds(const SpectrumView& view) {
    const double mean = view.eigs.sum() / view.p;
    if (!(mean > 0.0)) fail(ErrorCode::InvalidArgument, "tr(W2) must be positive");
    return {mean / 50.0, 5.0 * mean};
}

std::vector<double> log_lambda_grid(double lo, double hi, int size) {
    if (size < 1) fail(ErrorCode::InvalidArgument, "lambda grid needs at least one point");
    if (!(lo > 0.0 && hi >= lo)) fail(ErrorCode::InvalidArgument, "lambda bounds must satisfy 0 < lo <= hi");
    if (size == 1) return {lo};
    std::vector<double> grid(size);
    const double step = std::log(hi / lo) / (size - 1);
    for (int i = 0; i < size; ++i) grid[i] = lo * std::exp(step * i);
    grid.back() = hi;
    return grid;
}

LambdaCurve compute_lambda_curve(const std::vector<double>& grid, const EdgeSolver& solver) {
    LambdaCurve curve;
    curve.grid = grid;
    curve.params.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        try {
            curve.params[i] = solver(grid[i]);
        } catch (const Error& e) {
            if (is_input_error(e.code()) && e.code() != ErrorCode::DomainViolation) throw;
            std::ostringstream msg;
            msg << "lambda = " << grid[i] << " dropped: " << e.what();
            curve.warnings.push_back(msg.str());
        }
    }
    return curve;
}

LambdaCurve compute_lambda_curve(const SpectrumView& view, const std::vector<double>& grid,
                                 const EstimatorOptions& options) {
    return compute_lambda_curve(grid, [&](double lambda) {
        return estimate_edge_params(view, lambda, options).params;
    });
}

LambdaSelection select_lambda(const SpectrumView& view, const SscpPair* sscp,
                              const AlternativePrior& prior, const LambdaCurve& curve) {
    validate_prior(prior, view.p);
    LambdaSelection sel;
    sel.warnings = curve.warnings;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        if (!curve.params[i]) continue;
        const double lambda = curve.grid[i];
        double xi;
        try {
            xi = xi_hat(view, sscp, lambda, prior);
        } catch (const Error& e) {
            if (is_input_error(e.code())) throw;
            std::ostringstream msg;
            msg << "lambda = " << lambda << " dropped: " << e.what();
            sel.warnings.push_back(msg.str());
            continue;
        }
        const EdgeParams& params = *curve.params[i];
        sel.grid.push_back(lambda);
        sel.xi.push_back(xi);
        sel.theta2.push_back(params.theta2);
        sel.ratio.push_back(xi / params.theta2);
        // Strict comparison on an ascending grid breaks ties toward smaller lambda.
        if (sel.ratio.back() > best) {
            best = sel.ratio.back();
            sel.index_opt = static_cast<int>(sel.grid.size()) - 1;
            sel.lambda_opt = lambda;
            sel.params_opt = params;
        }
    }
    if (sel.index_opt < 0) fail(ErrorCode::AllPointsFailed, "no lambda grid point could be evaluated");
    return sel;
}

LambdaSelection select_lambda(const SpectrumView& view, const SscpPair* sscp,
                              const AlternativePrior& prior, const SelectOptions& options,
                              const EdgeSolver& solver) {
    validate_prior(prior, view.p);
    const auto [lo_default, hi_default] = default_lambda_bounds(view);
    const double lo = options.lambda_lo.value_or(lo_default);
    const double hi = options.lambda_hi.value_or(hi_default);
    const std::vector<double> grid = log_lambda_grid(lo, hi, options.grid_size);

    const bool check_atoms = prior.kind == AlternativePrior::Kind::Polynomial &&
                             (prior.pis[1] < 0.0 || prior.pis[2] < 0.0 || prior.pis[0] < 0.0);
    EdgeSolver run = solver;
    if (!run) {
        run = [&](double lambda) {
            const EdgeEstimate est = estimate_edge_params(view, lambda, options.estimator);
            if (check_atoms) check_prior_on_atoms(prior, est.fit.measure.masses);
            return est.params;
        };
    }
    return select_lambda(view, sscp, prior, compute_lambda_curve(grid, run));
}

DataSplit split_residual_sscp(const LinearModel& model, double selection_fraction, std::uint64_t seed) {
    if (!(selection_fraction > 0.0 && selection_fraction < 1.0)) {
        fail(ErrorCode::InvalidArgument, "selection fraction must lie in (0, 1)");
    }
    const SscpPair full = build_sscp(model);
    const MatrixXd resid = residual_factor(model);
    const int n2 = static_cast<int>(resid.cols());
    if (n2 < 2) fail(ErrorCode::InvalidArgument, "need at least two residual degrees of freedom to split");
    const int k = std::clamp(static_cast<int>(std::lround(selection_fraction * n2)), 1, n2 - 1);

    std::vector<int> order(n2);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    auto sscp_from = [&](int begin, int end) {
        MatrixXd part(resid.rows(), end - begin);
        for (int j = begin; j < end; ++j) part.col(j - begin) = resid.col(order[j]);
        return make_sscp(full.W1, part * part.transpose() / static_cast<double>(end - begin), full.n1, end - begin);
    };
    return {sscp_from(0, k), sscp_from(k, n2)};
}

}  // namespace hdlr
