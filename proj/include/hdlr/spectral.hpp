#pragma once

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hdlr/model.hpp"

namespace hdlr {

using cplx = std::complex<double>;

// Spectrum of the n2 x n2 companion of W2: the W2 eigenvalues padded with
// zeros when n2 > p, or its n2 largest eigenvalues when p > n2.
struct SpectrumView {
    VectorXd eigs;  // length n2, nonincreasing, >= 0
    int n2 = 0;
    int p = 0;
    int n1 = 0;

    double gamma2() const { return static_cast<double>(p) / n2; }
    double gamma1() const { return static_cast<double>(p) / n1; }
    double largest() const { return eigs(0); }
};

SpectrumView make_spectrum_view(const SscpPair& sscp);
SpectrumView make_spectrum_view(const VectorXd& w2_eigs, int p, int n1, int n2);

// order 0: (1/n2) sum (l_j - z)^{-1}; order 1: (1/n2) sum (l_j - z)^{-2};
// order 2: (2/n2) sum (l_j - z)^{-3}.
cplx stieltjes(const SpectrumView& view, cplx z, int order = 0);

struct StieltjesValues {
    cplx value;
    cplx d1;
    cplx d2;
};
StieltjesValues stieltjes_all(const SpectrumView& view, cplx z);

// (Q1, Q2): estimates of H1 and H2 at h = -lambda * phi(z).
std::pair<cplx, cplx> q_hats(const SpectrumView& view, double lambda, cplx z);

struct ZGrid {
    std::vector<cplx> points;
    std::vector<cplx> targets;
};

ZGrid build_zgrid(const SpectrumView& view, double lambda, int count);

}  // namespace hdlr
