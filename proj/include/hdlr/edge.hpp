#pragma once

#include <optional>
#include <vector>

#include "hdlr/measure.hpp"
#include "hdlr/spectral.hpp"

namespace hdlr {

// Tracy-Widom centering (theta1) and scaling (theta2) for a given lambda,
// together with the intermediate quantities they are built from.
struct EdgeParams {
    double lambda = 0.0;
    double rho = 0.0;
    double beta = 0.0;
    double s_at_beta = 0.0;
    double s1_at_beta = 0.0;
    double s2_at_beta = 0.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    bool is_discrete_edge = false;
};

struct RhoEstimate {
    double rho = 0.0;
    bool is_discrete_edge = false;
    double h_edge = 0.0;  // root of x'(h) = 0 in the continuous case, lambda/sigma_1 otherwise
};

// s, s' and s'' on a mesh of [0, rho - margin], clustered towards the right end.
struct SFunTable {
    std::vector<double> xs;
    std::vector<double> s;
    std::vector<double> s1;
    std::vector<double> s2;

    DiscreteMeasure measure;
    double lambda = 0.0;
    double gamma2 = 0.0;
    double rho = 0.0;
};

struct SFunValue {
    double s, s1, s2;
};

RhoEstimate estimate_rho(const DiscreteMeasure& measure, double lambda, double gamma2);

// Initial value s(0): the root of H1(-1/(1 + gamma2 s)) = s on the branch
// with gamma2 H2 < (1 + gamma2 s)^2.
double solve_s_initial(const DiscreteMeasure& measure, double lambda, double gamma2,
                       std::optional<double> guess = std::nullopt);

SFunTable solve_s_ode(const DiscreteMeasure& measure, double lambda, double gamma2, double rho,
                      double margin, int steps, std::optional<double> initial_guess = std::nullopt);

// s, s', s'' at an arbitrary x inside the table range (one RK4 step from the
// nearest node to the left).
SFunValue s_fun_at(const SFunTable& table, double x);

// s'' from (s, s') using the algebraic relation along the ODE solution.
SFunValue s_derivatives(const SFunTable& table, double x, double s);

EdgeParams solve_beta_theta(const SFunTable& table, double gamma1, double rho, double lambda);

struct EstimatorOptions {
    int K = 500;
    int I = 500;
    int d = 2;
    int ode_steps = 2000;
    double margin_fraction = 1e-3;
    int margin_halvings = 6;
    bool second_derivative = false;
};

// rho -> s-ODE -> beta/theta for a known measure, halving the margin when beta
// is not bracketed.
EdgeParams edge_params_from_measure(const DiscreteMeasure& measure, double lambda, double gamma1,
                                    double gamma2, const EstimatorOptions& options = {},
                                    std::optional<double> s0_guess = std::nullopt,
                                    SFunTable* table_out = nullptr);

// Ground truth from the exact population spectrum.
EdgeParams oracle_edge_params(const VectorXd& sigma_eigs, double lambda, double gamma1,
                              double gamma2, const EstimatorOptions& options = {});

struct EdgeEstimate {
    EdgeParams params;
    LpFitReport fit;
    SFunTable table;
};

// Data-driven estimate from the W2 spectrum: z-grid, LP fit, then the edge pipeline.
EdgeEstimate estimate_edge_params(const SpectrumView& view, double lambda,
                                  const EstimatorOptions& options = {});

}  // namespace hdlr
