#pragma once

#include <Eigen/Dense>

namespace hdlr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Multivariate linear model Y = B X + noise with hypothesis H0: B C = 0.
struct LinearModel {
    MatrixXd Y;  // p x n_T responses
    MatrixXd X;  // m x n_T design
    MatrixXd C;  // m x n_1 constraints

    int p() const { return static_cast<int>(Y.rows()); }
    int n_total() const { return static_cast<int>(Y.cols()); }
    int m() const { return static_cast<int>(X.rows()); }
    int n1() const { return static_cast<int>(C.cols()); }
};

// Hypothesis (W1) and residual (W2) SSCP matrices, each scaled by its
// degrees of freedom, plus the spectral decomposition of W2.
struct SscpPair {
    MatrixXd W1;
    MatrixXd W2;
    int n1 = 0;
    int n2 = 0;
    VectorXd w2_eigs;  // nonincreasing, clamped at zero
    MatrixXd w2_vecs;  // columns match w2_eigs

    int p() const { return static_cast<int>(W2.rows()); }
};

struct LargestRootResult {
    double lambda = 0.0;
    double ell_max = 0.0;
    VectorXd top_k;  // nonincreasing
};

// Relative rank tolerance used for X and C.
inline constexpr double kRankTolerance = 1e-10;

SscpPair build_sscp(const LinearModel& model);

// Wraps externally supplied W1, W2 (symmetrized) and decomposes W2.
// Y U2 for an orthonormal basis U2 (n_T x n2) of the residual space of X, so
// that W2 = E E^T / n2 with E the returned p x n2 matrix.
MatrixXd residual_factor(const LinearModel& model);

SscpPair make_sscp(const MatrixXd& W1, const MatrixXd& W2, int n1, int n2);

// k largest eigenvalues of W1 (W2 + lambda I)^{-1}, computed from the
// similar symmetric matrix (W2 + lambda I)^{-1/2} W1 (W2 + lambda I)^{-1/2}.
LargestRootResult largest_root(const SscpPair& sscp, double lambda, int k = 1);

}  // namespace hdlr
