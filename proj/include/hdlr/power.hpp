#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hdlr/edge.hpp"
#include "hdlr/model.hpp"
#include "hdlr/spectral.hpp"

namespace hdlr {

// Prior covariance D of the alternative: either an explicit matrix or the
// polynomial pi0 I + pi1 Sigma + pi2 Sigma^2 in the unknown population covariance.
struct AlternativePrior {
    enum class Kind { ExplicitD, Polynomial };
    Kind kind = Kind::Polynomial;
    MatrixXd D;
    std::array<double, 3> pis{1.0, 0.0, 0.0};

    static AlternativePrior identity() { return polynomial({1.0, 0.0, 0.0}); }
    static AlternativePrior sigma() { return polynomial({0.0, 1.0, 0.0}); }
    static AlternativePrior polynomial(const std::array<double, 3>& pis);
    static AlternativePrior explicit_matrix(const MatrixXd& D);
};

void validate_prior(const AlternativePrior& prior, int p);

// The polynomial must stay positive on the atoms of a fitted measure.
void check_prior_on_atoms(const AlternativePrior& prior, const VectorXd& atoms);

double xi_explicit(const SscpPair& sscp, double lambda, const MatrixXd& D);

std::vector<double> spectral_moments(const SscpPair& sscp, int r);

// Upsilon_0..2: estimates of (1/p) tr[(lambda phi Sigma + lambda I)^{-1} Sigma^i].
std::array<double, 3> upsilon(const SpectrumView& view, double lambda);

double xi_polynomial(const SpectrumView& view, double lambda, const std::array<double, 3>& pis);
double xi_polynomial(const SpectrumView& view, const SscpPair& sscp, double lambda,
                     const std::array<double, 3>& pis);

double xi_hat(const SpectrumView& view, const SscpPair* sscp, double lambda,
              const AlternativePrior& prior);

// Default selection interval [tr(W2)/(50 p), 5 tr(W2)/p].
std::pair<double, double> default_lambda_bounds(const SpectrumView& view);
std::vector<double> log_lambda_grid(double lo, double hi, int size);

using EdgeSolver = std::function<EdgeParams(double lambda)>;

// Theta2 (and the rest of the edge parameters) along a lambda grid. Points
// whose pipeline fails are kept as empty entries with a warning so one curve
// can serve several priors.
struct LambdaCurve {
    std::vector<double> grid;
    std::vector<std::optional<EdgeParams>> params;
    std::vector<std::string> warnings;
};

LambdaCurve compute_lambda_curve(const std::vector<double>& grid, const EdgeSolver& solver);
LambdaCurve compute_lambda_curve(const SpectrumView& view, const std::vector<double>& grid,
                                 const EstimatorOptions& options = {});

struct LambdaSelection {
    std::vector<double> grid;
    std::vector<double> xi;
    std::vector<double> theta2;
    std::vector<double> ratio;
    double lambda_opt = 0.0;
    int index_opt = -1;
    EdgeParams params_opt;
    std::vector<std::string> warnings;
};

LambdaSelection select_lambda(const SpectrumView& view, const SscpPair* sscp,
                              const AlternativePrior& prior, const LambdaCurve& curve);

struct SelectOptions {
    int grid_size = 25;
    std::optional<double> lambda_lo;
    std::optional<double> lambda_hi;
    EstimatorOptions estimator;
};

LambdaSelection select_lambda(const SpectrumView& view, const SscpPair* sscp,
                              const AlternativePrior& prior, const SelectOptions& options = {},
                              const EdgeSolver& solver = nullptr);

// Residual degrees of freedom split at random into a part used to choose
// lambda and a disjoint part used for the test itself. W1 is shared.
struct DataSplit {
    SscpPair selection;
    SscpPair testing;
};

DataSplit split_residual_sscp(const LinearModel& model, double selection_fraction, std::uint64_t seed);

}  // namespace hdlr
