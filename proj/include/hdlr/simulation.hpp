#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hdlr/edge.hpp"
#include "hdlr/model.hpp"
#include "hdlr/tracy_widom.hpp"

namespace hdlr {

struct CovModel {
    enum class Kind { PolyDecay, Toeplitz, Factor, Explicit };
    Kind kind = Kind::PolyDecay;
    int p = 0;
    bool rotate = false;
    double toeplitz_rho = 0.3;
    // Eigenvalues for Kind::Explicit, before trace normalization.
    std::vector<double> explicit_eigs;

    static CovModel three_mass(int p, double A, bool rotate = false);
};

const char* to_string(CovModel::Kind kind);
CovModel::Kind cov_kind_from_string(const std::string& name);

struct CovMatrix {
    MatrixXd sigma;
    MatrixXd sigma_sqrt;
    VectorXd eigs;  // nonincreasing, sums to p
};

// Unnormalized eigenvalues for the structured models, in nonincreasing order.
VectorXd model_eigenvalues(const CovModel& model);

CovMatrix make_cov(const CovModel& model, std::mt19937_64& rng);

// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, R diagonal made positive).
MatrixXd haar_orthogonal(int n, std::mt19937_64& rng);

enum class ErrorLaw { Gaussian, StudentT4, PoissonCentered };

const char* to_string(ErrorLaw law);

ErrorLaw error_law_from_string(const std::string& name);

// Matrix of i.i.d. mean-zero, unit-variance draws.
MatrixXd draw_errors(ErrorLaw law, int rows, int cols, std::mt19937_64& rng);

struct LambdaChoice {
    enum class Kind { Fixed, DataDrivenI, DataDrivenSigma };
    Kind kind = Kind::Fixed;
    double value = 0.0;

    std::string label() const;
    static LambdaChoice fixed(double value) { return {Kind::Fixed, value}; }
    static LambdaChoice parse(const std::string& text);
};

struct ExperimentSpec {
    enum class Mode { NullSize, Power, Estimation };
    Mode mode = Mode::NullSize;
    CovModel cov;
    ErrorLaw error_law = ErrorLaw::Gaussian;
    int p = 0;
    int n1 = 0;
    int n2 = 0;
    int m = 0;
    std::vector<LambdaChoice> lambdas;
    double signal_zeta = 0.0;
    std::vector<double> zetas;  // power curves only
    int replicates = 0;
    std::uint64_t seed = 0;
    std::vector<double> alphas{0.05};
    EstimatorOptions estimator;
    int lambda_grid = 25;
    bool oracle = true;
    // Fraction of residual degrees of freedom used to pick a data-driven
    // lambda; zero disables splitting.
    double data_split = 0.0;
    int null_replicates = 2000;
};

const char* to_string(ExperimentSpec::Mode mode);
ExperimentSpec::Mode mode_from_string(const std::string& name);

// Runs the experiment selected by spec.mode.
struct ExperimentResult;
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Throws InvalidArgument listing every offending field.
void validate_spec(const ExperimentSpec& spec);

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Stream of the reported replicates (null-cutoff replicates use another one).
inline constexpr std::uint64_t kMainStream = 1;

// The experiment's covariance, including its Haar rotation when requested.
CovMatrix spec_covariance(const ExperimentSpec& spec);

// Replicate r of the design: X i.i.d. N(0,1) (m x n_T), C = I, B with first
// column N(0, zeta^2), Y = B X + Sigma^{1/2} Z.
LinearModel generate_model(const ExperimentSpec& spec, const CovMatrix& cov, double zeta,
                           std::uint64_t stream, int replicate);

struct LambdaOutcome {
    std::string label;
    bool ok = false;
    std::string error;
    double lambda = 0.0;
    double ell_max = 0.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
    std::vector<bool> reject;
    bool oracle_ok = false;
    double oracle_theta1 = 0.0;
    double oracle_theta2 = 0.0;
    double oracle_statistic = 0.0;
    std::vector<bool> oracle_reject;
};

struct ReplicateRecord {
    int index = 0;
    double zeta = 0.0;
    std::string error;
    std::vector<LambdaOutcome> outcomes;
};

struct LambdaSummary {
    std::string label;
    double zeta = 0.0;
    int n_ok = 0;
    std::vector<double> reject_rate;
    std::vector<double> oracle_reject_rate;
    std::vector<double> adjusted_reject_rate;  // filled when size-adjusted cutoffs exist
    double err1_mean = 0.0, err1_sd = 0.0;
    double err2_mean = 0.0, err2_sd = 0.0;
    double ks_empirical = 0.0;
    double ks_oracle = 0.0;
};

struct ExperimentResult {
    ExperimentSpec spec;
    std::vector<ReplicateRecord> replicates;
    std::vector<LambdaSummary> summaries;
    std::vector<int> failed;
    std::map<std::string, EdgeParams> oracle_params;
    // label -> per-alpha empirical null quantile of the standardized statistic
    std::map<std::string, std::vector<double>> adjusted_cutoffs;
    VectorXd sigma_eigs;
};

// One replicate of the main stream, exactly as the experiment runners compute it.
ReplicateRecord run_single_replicate(const ExperimentSpec& spec, int replicate, double zeta);

ExperimentResult run_null_size(const ExperimentSpec& spec);
ExperimentResult run_estimation_table(const ExperimentSpec& spec);
ExperimentResult run_power_curve(const ExperimentSpec& spec, const std::vector<double>& zetas);

// Empirical (1 - alpha) null quantiles, simulated once per spec and cached in-process.
std::map<std::string, std::vector<double>> size_adjusted_cutoffs(const ExperimentSpec& spec);

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);

// Worker count from HDLR_THREADS, else the hardware concurrency.
int worker_count();
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace hdlr
