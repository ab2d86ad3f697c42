#include "hdlr/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hdlr/errors.hpp"

namespace hdlr {

namespace {

MatrixXd symmetrized(const MatrixXd& a) {
    return 0.5 * (a + a.transpose());
}

void check_symmetric(const MatrixXd& a, const char* name) {
    const double scale = a.cwiseAbs().maxCoeff();
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9 * std::max(scale, 1.0)) {
        fail(ErrorCode::InvalidArgument, std::string(name) + " is not symmetric");
    }
}

// Descending eigen-decomposition with small eigenvalues clamped to zero.
void decompose_w2(SscpPair& pair) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(pair.W2);
    if (eig.info() != Eigen::Success) {
        fail(ErrorCode::EigenFailure, "eigen-decomposition of W2 failed");
    }
    const Eigen::Index p = pair.W2.rows();
    pair.w2_eigs = eig.eigenvalues().reverse();
    pair.w2_vecs = eig.eigenvectors().rowwise().reverse();
    const double tol = 1e-10 * (std::max(pair.w2_eigs(0), 0.0) + 1.0);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (pair.w2_eigs(j) < -tol) {
            fail(ErrorCode::EigenFailure, "W2 has a negative eigenvalue beyond tolerance");
        }
        if (pair.w2_eigs(j) < tol) pair.w2_eigs(j) = 0.0;
    }
}

}  // namespace

SscpPair build_sscp(const LinearModel& model) {
    const int p = model.p();
    const int n_total = model.n_total();
    const int m = model.m();
    const int n1 = model.n1();
    if (p < 1 || n1 < 1) fail(ErrorCode::DimensionMismatch, "need p >= 1 and n1 >= 1");
    if (model.X.cols() != n_total) {
        fail(ErrorCode::DimensionMismatch, "X must have n_T = " + std::to_string(n_total) + " columns");
    }
    if (model.C.rows() != m) {
        fail(ErrorCode::DimensionMismatch, "C must have m = " + std::to_string(m) + " rows");
    }
    if (!(n_total > m && m >= n1)) {
        fail(ErrorCode::DimensionMismatch, "need n_T > m >= n1");
    }

    // X^T P = Q R, so X^T (X X^T)^{-1} C = Q R^{-T} P^T C.
    Eigen::ColPivHouseholderQR<MatrixXd> qr_x(model.X.transpose());
    qr_x.setThreshold(kRankTolerance);
    if (qr_x.rank() < m) fail(ErrorCode::RankDeficient, "X does not have full row rank");
    Eigen::ColPivHouseholderQR<MatrixXd> qr_c(model.C);
    qr_c.setThreshold(kRankTolerance);
    if (qr_c.rank() < n1) fail(ErrorCode::RankDeficient, "C does not have full column rank");

    const MatrixXd q = qr_x.householderQ() * MatrixXd::Identity(n_total, m);
    const auto r = qr_x.matrixR().topLeftCorner(m, m).template triangularView<Eigen::Upper>();
    const MatrixXd pc = qr_x.colsPermutation().transpose() * model.C;
    const MatrixXd whitened = r.transpose().solve(pc);  // m x n1

    Eigen::LLT<MatrixXd> llt(whitened.transpose() * whitened);
    if (llt.info() != Eigen::Success) {
        fail(ErrorCode::NotEstimable, "C^T (X X^T)^{-1} C is not positive definite");
    }
    Eigen::HouseholderQR<MatrixXd> qr_w(whitened);
    const MatrixXd q_w = qr_w.householderQ() * MatrixXd::Identity(m, n1);

    const MatrixXd yq = model.Y * q;                // p x m
    const MatrixXd hyp = yq * q_w;                  // p x n1, Y P1 Y^T = hyp hyp^T
    const MatrixXd resid = model.Y - yq * q.transpose();

    SscpPair out;
    out.n1 = n1;
    out.n2 = n_total - m;
    out.W1 = symmetrized(hyp * hyp.transpose() / static_cast<double>(n1));
    out.W2 = symmetrized(resid * resid.transpose() / static_cast<double>(out.n2));
    decompose_w2(out);
    return out;
}

MatrixXd residual_factor(const LinearModel& model) {
    const int n_total = model.n_total();
    const int m = model.m();
    if (model.X.cols() != n_total || !(n_total > m)) {
        fail(ErrorCode::DimensionMismatch, "X must be m x n_T with n_T > m");
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr_x(model.X.transpose());
    qr_x.setThreshold(kRankTolerance);
    if (qr_x.rank() < m) fail(ErrorCode::RankDeficient, "X does not have full row rank");
    MatrixXd basis = MatrixXd::Zero(n_total, n_total - m);
    basis.bottomRows(n_total - m).setIdentity();
    return model.Y * (qr_x.householderQ() * basis);
}

SscpPair make_sscp(const MatrixXd& W1, const MatrixXd& W2, int n1, int n2) {
    if (W1.rows() != W1.cols() || W2.rows() != W2.cols() || W1.rows() != W2.rows()) {
        fail(ErrorCode::DimensionMismatch, "W1 and W2 must be square of equal size");
    }
    if (n1 < 1 || n2 < 1) fail(ErrorCode::InvalidArgument, "degrees of freedom must be positive");
    check_symmetric(W1, "W1");
    check_symmetric(W2, "W2");
    SscpPair out;
    out.W1 = symmetrized(W1);
    out.W2 = symmetrized(W2);
    out.n1 = n1;
    out.n2 = n2;
    decompose_w2(out);
    return out;
}

LargestRootResult largest_root(const SscpPair& sscp, double lambda, int k) {
    if (!(lambda > 0.0)) fail(ErrorCode::NonPositiveLambda, "lambda must be positive");
    const int p = sscp.p();
    if (k < 1 || k > std::min(p, sscp.n1)) {
        fail(ErrorCode::InvalidArgument, "k must lie in [1, min(p, n1)]");
    }
    const VectorXd inv_sqrt = (sscp.w2_eigs.array() + lambda).rsqrt().matrix();
    MatrixXd s = sscp.w2_vecs.transpose() * sscp.W1 * sscp.w2_vecs;
    s = inv_sqrt.asDiagonal() * s * inv_sqrt.asDiagonal();
    s = symmetrized(s);

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) fail(ErrorCode::EigenFailure, "eigen-decomposition of F failed");

    LargestRootResult out;
    out.lambda = lambda;
    out.top_k.resize(k);
    for (int i = 0; i < k; ++i) out.top_k(i) = std::max(eig.eigenvalues()(p - 1 - i), 0.0);
    out.ell_max = out.top_k(0);
    return out;
}

}  // namespace hdlr
