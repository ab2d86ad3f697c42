#include "hdlr/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hdlr/errors.hpp"

namespace hdlr {

namespace {

constexpr double kPoleTolerance = 1e-14;
constexpr double kDegenerateTolerance = 1e-14;
constexpr int kNewtonMaxIter = 100;
constexpr int kMaxSubdivisionDepth = 12;

void check_pole(const SpectrumView& view, cplx z) {
    if (std::abs(z.imag()) > kPoleTolerance) return;
    for (Eigen::Index j = 0; j < view.eigs.size(); ++j) {
        if (std::abs(view.eigs(j) - z.real()) < kPoleTolerance) {
            fail(ErrorCode::PoleHit, "z coincides with eigenvalue " + std::to_string(view.eigs(j)));
        }
    }
}

double newton_tolerance(cplx target) {
    return 1e-12 * std::max(1.0, std::abs(target));
}

// Damped Newton solve of phi(z) = target from z0. Returns false on failure.
bool invert_newton(const SpectrumView& view, cplx target, cplx& z) {
    const double tol = newton_tolerance(target);
    cplx f = stieltjes(view, z, 0) - target;
    for (int iter = 0; iter < kNewtonMaxIter; ++iter) {
        if (std::abs(f) <= tol) return true;
        const cplx d = stieltjes(view, z, 1);
        if (std::abs(d) == 0.0) return false;
        cplx step = -f / d;
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving) {
            const cplx trial = z + step;
            if (trial.imag() > 0.0) {
                const cplx f_trial = stieltjes(view, trial, 0) - target;
                if (std::abs(f_trial) < std::abs(f)) {
                    z = trial;
                    f = f_trial;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) return std::abs(f) <= tol;
    }
    return std::abs(f) <= tol;
}

// Continuation along the straight target path from (from_target, z) to target,
// halving the path segments until every Newton solve succeeds.
bool invert_path(const SpectrumView& view, cplx from_target, cplx to_target, cplx& z, int depth) {
    cplx trial = z;
    if (invert_newton(view, to_target, trial)) {
        z = trial;
        return true;
    }
    if (depth >= kMaxSubdivisionDepth) return false;
    const cplx mid = 0.5 * (from_target + to_target);
    cplx z_mid = z;
    if (!invert_path(view, from_target, mid, z_mid, depth + 1)) return false;
    if (!invert_path(view, mid, to_target, z_mid, depth + 1)) return false;
    z = z_mid;
    return true;
}

}  // namespace

SpectrumView make_spectrum_view(const VectorXd& w2_eigs, int p, int n1, int n2) {
    if (p < 1 || n1 < 1 || n2 < 1) fail(ErrorCode::InvalidArgument, "p, n1, n2 must be positive");
    if (w2_eigs.size() != p) fail(ErrorCode::DimensionMismatch, "expected p eigenvalues of W2");
    std::vector<double> sorted(w2_eigs.data(), w2_eigs.data() + w2_eigs.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    SpectrumView view;
    view.p = p;
    view.n1 = n1;
    view.n2 = n2;
    view.eigs = VectorXd::Zero(n2);
    const int keep = std::min(p, n2);
    for (int j = 0; j < keep; ++j) view.eigs(j) = std::max(sorted[j], 0.0);
    return view;
}

SpectrumView make_spectrum_view(const SscpPair& sscp) {
    return make_spectrum_view(sscp.w2_eigs, sscp.p(), sscp.n1, sscp.n2);
}

cplx stieltjes(const SpectrumView& view, cplx z, int order) {
    if (order < 0 || order > 2) fail(ErrorCode::InvalidArgument, "stieltjes order must be 0, 1 or 2");
    check_pole(view, z);
    cplx acc = 0.0;
    const Eigen::Index n = view.eigs.size();
    switch (order) {
        case 0:
            for (Eigen::Index j = 0; j < n; ++j) acc += 1.0 / (view.eigs(j) - z);
            return acc / static_cast<double>(view.n2);
        case 1:
            for (Eigen::Index j = 0; j < n; ++j) {
                const cplx r = 1.0 / (view.eigs(j) - z);
                acc += r * r;
            }
            return acc / static_cast<double>(view.n2);
        default:
            for (Eigen::Index j = 0; j < n; ++j) {
                const cplx r = 1.0 / (view.eigs(j) - z);
                acc += r * r * r;
            }
            return 2.0 * acc / static_cast<double>(view.n2);
    }
}

StieltjesValues stieltjes_all(const SpectrumView& view, cplx z) {
    check_pole(view, z);
    cplx s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (Eigen::Index j = 0; j < view.eigs.size(); ++j) {
        const cplx r = 1.0 / (view.eigs(j) - z);
        const cplx r2 = r * r;
        s0 += r;
        s1 += r2;
        s2 += r2 * r;
    }
    const double inv_n = 1.0 / static_cast<double>(view.n2);
    return {s0 * inv_n, s1 * inv_n, 2.0 * s2 * inv_n};
}

std::pair<cplx, cplx> q_hats(const SpectrumView& view, double lambda, cplx z) {
    if (!(lambda > 0.0)) fail(ErrorCode::NonPositiveLambda, "lambda must be positive");
    const StieltjesValues st = stieltjes_all(view, z);
    if (std::abs(st.value) < kDegenerateTolerance || std::abs(st.d1) < kDegenerateTolerance) {
        fail(ErrorCode::DegenerateTransform, "Stieltjes transform or its derivative vanishes");
    }
    const double g2 = view.gamma2();
    const cplx q1 = z / (lambda * g2) + 1.0 / (lambda * g2 * st.value);
    const cplx q2 = 1.0 / (lambda * lambda * g2 * st.value * st.value) -
                    1.0 / (lambda * lambda * g2 * st.d1);
    return {q1, q2};
}

ZGrid build_zgrid(const SpectrumView& view, double lambda, int count) {
    if (!(lambda > 0.0)) fail(ErrorCode::NonPositiveLambda, "lambda must be positive");
    if (count < 1) fail(ErrorCode::InvalidArgument, "grid size must be positive");
    const double top = view.largest();
    if (!(top > 0.0)) fail(ErrorCode::InvalidArgument, "spectrum has no positive eigenvalue");

    const double lo = stieltjes(view, cplx(1.05 * top, 0.0)).real();
    const double hi = stieltjes(view, cplx(-lambda, 0.0)).real();
    const double imag = 1e-2 / top;

    ZGrid grid;
    grid.targets.resize(count);
    grid.points.resize(count);
    for (int i = 0; i < count; ++i) {
        const double frac = count == 1 ? 1.0 : static_cast<double>(i) / (count - 1);
        grid.targets[i] = cplx(lo + frac * (hi - lo), imag);
    }

    // Walk from the phi(-lambda) end, where z is close to -lambda, towards
    // the phi(1.05 l_1) end, warm-starting each solve from its neighbour.
    const double slope = stieltjes(view, cplx(-lambda, 0.0), 1).real();
    cplx z(-lambda, imag / slope);
    cplx prev_target(hi, 0.0);
    for (int i = count - 1; i >= 0; --i) {
        if (!invert_path(view, prev_target, grid.targets[i], z, 0)) {
            fail(ErrorCode::InversionFailure, "could not invert target index " + std::to_string(i));
        }
        grid.points[i] = z;
        prev_target = grid.targets[i];
    }
    return grid;
}

}  // namespace hdlr
