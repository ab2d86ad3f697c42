#pragma once

#include <complex>

#include <Eigen/Dense>

#include "hdlr/spectral.hpp"

namespace hdlr {

// Point masses sigma_1 > ... > sigma_B with positive weights summing to one.
struct DiscreteMeasure {
    VectorXd masses;
    VectorXd weights;

    int size() const { return static_cast<int>(masses.size()); }
    double top_mass() const { return masses(0); }
    double top_weight() const { return weights(0); }

    // Uniform weights on an exact spectrum, merging eigenvalues that agree to
    // a relative tolerance.
    static DiscreteMeasure from_spectrum(const VectorXd& eigs, double rel_tol = 1e-12);
};

void validate_measure(const DiscreteMeasure& measure);

// sum_k w_k sigma_k^j / (lambda - sigma_k h)^j for h < lambda / sigma_1.
double h_func(const DiscreteMeasure& measure, double lambda, double h, int j);

struct HValues {
    double h1, h2, h3;
};
HValues h_funcs_all(const DiscreteMeasure& measure, double lambda, double h);

struct FitOptions {
    int K = 500;
    int d = 2;
    bool second_derivative = false;
};

struct LpFitReport {
    DiscreteMeasure measure;
    double loss_theta = 0.0;
    int n_active = 0;
    int grid_K = 0;
    int grid_I = 0;
    int lp_iterations = 0;
};

LpFitReport fit_measure(const SpectrumView& view, double lambda, const ZGrid& zgrid,
                        const FitOptions& options = {});

// L-infinity residual of arbitrary weights on the fitting grid (the LP loss).
double fit_loss(const SpectrumView& view, double lambda, const ZGrid& zgrid,
                const VectorXd& sigma_grid, const VectorXd& weights);

// The equally spaced candidate atoms used by fit_measure.
VectorXd sigma_grid(const SpectrumView& view, int K);

}  // namespace hdlr
