#include "hdlr/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "hdlr/errors.hpp"
#include "hdlr/power.hpp"

namespace hdlr {

namespace {

constexpr std::uint64_t kStreamCovariance = 0;
constexpr std::uint64_t kStreamMain = kMainStream;
constexpr std::uint64_t kStreamNull = 2;
constexpr std::uint64_t kStreamSplit = 3;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Linear interpolation between order statistics.
double empirical_quantile(std::vector<double> v, double prob) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double pos = prob * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct RunContext {
    const ExperimentSpec& spec;
    CovMatrix cov;
    std::map<std::string, EdgeParams> oracle_fixed;
    std::vector<double> tw_cutoffs;
};

RunContext make_context(const ExperimentSpec& spec) {
    RunContext ctx{spec, spec_covariance(spec), {}, {}};
    for (double alpha : spec.alphas) ctx.tw_cutoffs.push_back(tw1_quantile(1.0 - alpha));
    if (spec.oracle) {
        const double g1 = static_cast<double>(spec.p) / spec.n1;
        const double g2 = static_cast<double>(spec.p) / spec.n2;
        for (const LambdaChoice& choice : spec.lambdas) {
            if (choice.kind != LambdaChoice::Kind::Fixed) continue;
            ctx.oracle_fixed[choice.label()] =
                oracle_edge_params(ctx.cov.eigs, choice.value, g1, g2, spec.estimator);
        }
    }
    return ctx;
}

void fill_test(LambdaOutcome& out, const LargestRootResult& root, const EdgeParams& params, int p,
               const std::vector<double>& cutoffs) {
    const double scale = std::pow(static_cast<double>(p), 2.0 / 3.0);
    out.lambda = root.lambda;
    out.ell_max = root.ell_max;
    out.theta1 = params.theta1;
    out.theta2 = params.theta2;
    out.statistic = scale * (root.ell_max - params.theta1) / params.theta2;
    out.p_value = 1.0 - tw1_cdf(out.statistic);
    out.reject.clear();
    for (double c : cutoffs) out.reject.push_back(out.statistic > c);
    out.ok = true;
}

void fill_oracle(LambdaOutcome& out, const EdgeParams& oracle, int p, const std::vector<double>& cutoffs) {
    const double scale = std::pow(static_cast<double>(p), 2.0 / 3.0);
    out.oracle_theta1 = oracle.theta1;
    out.oracle_theta2 = oracle.theta2;
    out.oracle_statistic = scale * (out.ell_max - oracle.theta1) / oracle.theta2;
    out.oracle_reject.clear();
    for (double c : cutoffs) out.oracle_reject.push_back(out.oracle_statistic > c);
    out.oracle_ok = true;
}

ReplicateRecord run_replicate(const RunContext& ctx, double zeta, std::uint64_t stream, int r) {
    const ExperimentSpec& spec = ctx.spec;
    ReplicateRecord rec;
    rec.index = r;
    rec.zeta = zeta;
    LinearModel model;
    SscpPair sscp;
    std::optional<DataSplit> split;
    try {
        model = generate_model(spec, ctx.cov, zeta, stream, r);
        sscp = build_sscp(model);
    } catch (const std::exception& e) {
        rec.error = e.what();
        return rec;
    }
    const SpectrumView view = make_spectrum_view(sscp);
    const double g1 = static_cast<double>(spec.p) / spec.n1;

    std::optional<LambdaCurve> curve;
    const SscpPair* select_sscp = &sscp;
    const SscpPair* test_sscp = &sscp;
    SpectrumView select_view = view;
    SpectrumView test_view = view;

    for (const LambdaChoice& choice : spec.lambdas) {
        LambdaOutcome out;
        out.label = choice.label();
        try {
            EdgeParams params;
            if (choice.kind == LambdaChoice::Kind::Fixed) {
                params = estimate_edge_params(view, choice.value, spec.estimator).params;
            } else {
                if (!curve) {
                    if (spec.data_split > 0.0) {
                        split = split_residual_sscp(model, spec.data_split, substream_seed(spec.seed, kStreamSplit, r));
                        select_sscp = &split->selection;
                        test_sscp = &split->testing;
                        select_view = make_spectrum_view(*select_sscp);
                        test_view = make_spectrum_view(*test_sscp);
                    }
                    const auto [lo, hi] = default_lambda_bounds(select_view);
                    curve = compute_lambda_curve(select_view, log_lambda_grid(lo, hi, spec.lambda_grid), spec.estimator);
                }
                const AlternativePrior prior = choice.kind == LambdaChoice::Kind::DataDrivenI
                                                   ? AlternativePrior::identity()
                                                   : AlternativePrior::sigma();
                const LambdaSelection sel = select_lambda(select_view, select_sscp, prior, *curve);
                params = split ? estimate_edge_params(test_view, sel.lambda_opt, spec.estimator).params
                               : sel.params_opt;
            }
            const SscpPair& tested = choice.kind == LambdaChoice::Kind::Fixed ? sscp : *test_sscp;
            fill_test(out, largest_root(tested, params.lambda), params, spec.p, ctx.tw_cutoffs);

            if (spec.oracle) {
                auto it = ctx.oracle_fixed.find(out.label);
                if (it != ctx.oracle_fixed.end()) {
                    fill_oracle(out, it->second, spec.p, ctx.tw_cutoffs);
                } else {
                    const double g2 = static_cast<double>(spec.p) / tested.n2;
                    fill_oracle(out, oracle_edge_params(ctx.cov.eigs, params.lambda, g1, g2, spec.estimator),
                                spec.p, ctx.tw_cutoffs);
                }
            }
        } catch (const std::exception& e) {
            out.error = e.what();
        }
        rec.outcomes.push_back(std::move(out));
    }
    return rec;
}

std::vector<ReplicateRecord> run_replicates(const RunContext& ctx, double zeta, std::uint64_t stream, int count) {
    std::vector<ReplicateRecord> records(count);
    parallel_for(count, [&](int r) { records[r] = run_replicate(ctx, zeta, stream, r); });
    return records;
}

LambdaSummary summarize(const std::vector<ReplicateRecord>& records, std::size_t slot, double zeta,
                        const std::string& label, const std::vector<double>& alphas,
                        const std::vector<double>* adjusted, int p) {
    LambdaSummary s;
    s.label = label;
    s.zeta = zeta;
    const std::size_t na = alphas.size();
    s.reject_rate.assign(na, 0.0);
    s.oracle_reject_rate.assign(na, 0.0);
    if (adjusted) s.adjusted_reject_rate.assign(na, 0.0);
    std::vector<double> stats, oracle_stats, err1, err2;
    int n_oracle = 0;
    const double scale = std::pow(static_cast<double>(p), 2.0 / 3.0);
    for (const ReplicateRecord& rec : records) {
        if (slot >= rec.outcomes.size()) continue;
        const LambdaOutcome& o = rec.outcomes[slot];
        if (!o.ok) continue;
        ++s.n_ok;
        stats.push_back(o.statistic);
        for (std::size_t a = 0; a < na; ++a) {
            s.reject_rate[a] += o.reject[a] ? 1.0 : 0.0;
            if (adjusted) s.adjusted_reject_rate[a] += o.statistic > (*adjusted)[a] ? 1.0 : 0.0;
        }
        if (o.oracle_ok) {
            ++n_oracle;
            oracle_stats.push_back(o.oracle_statistic);
            for (std::size_t a = 0; a < na; ++a) s.oracle_reject_rate[a] += o.oracle_reject[a] ? 1.0 : 0.0;
            err1.push_back(scale * std::abs(o.theta1 - o.oracle_theta1) / o.oracle_theta2);
            err2.push_back(scale * std::abs(o.theta2 - o.oracle_theta2) / o.oracle_theta2);
        }
    }
    for (std::size_t a = 0; a < na; ++a) {
        if (s.n_ok > 0) s.reject_rate[a] /= s.n_ok;
        if (adjusted && s.n_ok > 0) s.adjusted_reject_rate[a] /= s.n_ok;
        if (n_oracle > 0) s.oracle_reject_rate[a] /= n_oracle;
    }
    s.err1_mean = mean_of(err1);
    s.err1_sd = sd_of(err1);
    s.err2_mean = mean_of(err2);
    s.err2_sd = sd_of(err2);
    auto cdf = [](double x) { return tw1_cdf(x); };
    if (!stats.empty()) s.ks_empirical = ks_distance(stats, cdf);
    if (!oracle_stats.empty()) s.ks_oracle = ks_distance(oracle_stats, cdf);
    return s;
}

void collect_failures(ExperimentResult& result) {
    for (const ReplicateRecord& rec : result.replicates) {
        bool failed = !rec.error.empty();
        for (const LambdaOutcome& o : rec.outcomes) failed = failed || !o.ok;
        if (failed && (result.failed.empty() || result.failed.back() != rec.index)) result.failed.push_back(rec.index);
    }
}

std::string cache_key(const ExperimentSpec& spec) {
    std::ostringstream key;
    key.precision(17);
    key << to_string(spec.cov.kind) << '|' << spec.cov.p << '|' << spec.cov.rotate << '|' << spec.cov.toeplitz_rho;
    for (double v : spec.cov.explicit_eigs) key << ',' << v;
    key << '|' << to_string(spec.error_law) << '|' << spec.p << '|' << spec.n1 << '|' << spec.n2 << '|' << spec.m;
    for (const LambdaChoice& c : spec.lambdas) key << '|' << c.label();
    for (double a : spec.alphas) key << '|' << a;
    key << '|' << spec.seed << '|' << spec.null_replicates << '|' << spec.estimator.K << '|' << spec.estimator.I
        << '|' << spec.estimator.d << '|' << spec.estimator.ode_steps << '|' << spec.lambda_grid << '|'
        << spec.data_split << '|' << spec.estimator.second_derivative;
    return key.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Covariance models and error laws

CovModel CovModel::three_mass(int p, double A, bool rotate) {
    if (!(A > 0.0 && A < 1.0)) fail(ErrorCode::InvalidArgument, "three-mass weight must lie in (0, 1)");
    CovModel model;
    model.kind = Kind::Explicit;
    model.p = p;
    model.rotate = rotate;
    const int n_one = static_cast<int>(std::lround(A * p));
    const int n_five = (p - n_one) / 2;
    const int n_fifteen = p - n_one - n_five;
    model.explicit_eigs.insert(model.explicit_eigs.end(), n_fifteen, 15.0);
    model.explicit_eigs.insert(model.explicit_eigs.end(), n_five, 5.0);
    model.explicit_eigs.insert(model.explicit_eigs.end(), n_one, 1.0);
    return model;
}

const char* to_string(CovModel::Kind kind) {
    switch (kind) {
        case CovModel::Kind::PolyDecay: return "poly_decay";
        case CovModel::Kind::Toeplitz: return "toeplitz";
        case CovModel::Kind::Factor: return "factor";
        case CovModel::Kind::Explicit: return "explicit";
    }
    return "unknown";
}

CovModel::Kind cov_kind_from_string(const std::string& name) {
    if (name == "poly_decay") return CovModel::Kind::PolyDecay;
    if (name == "toeplitz") return CovModel::Kind::Toeplitz;
    if (name == "factor") return CovModel::Kind::Factor;
    if (name == "explicit") return CovModel::Kind::Explicit;
    fail(ErrorCode::InvalidArgument, "unknown covariance model '" + name + "'");
}

VectorXd model_eigenvalues(const CovModel& model) {
    const int p = model.p;
    if (p < 1) fail(ErrorCode::InvalidArgument, "covariance dimension must be positive");
    VectorXd tau(p);
    switch (model.kind) {
        case CovModel::Kind::PolyDecay:
        case CovModel::Kind::Factor:
            for (int j = 1; j <= p; ++j) tau(j - 1) = 0.01 + std::pow(0.1 + p - j, 6);
            if (model.kind == CovModel::Kind::Factor) {
                if (p < 6) fail(ErrorCode::InvalidArgument, "factor model needs p >= 6");
                const double tau6 = tau(5);
                for (int j = 1; j <= 5; ++j) tau(j - 1) = (2.2 - 0.2 * j) * tau6;
            }
            break;
        case CovModel::Kind::Toeplitz: {
            MatrixXd t(p, p);
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < p; ++j) t(i, j) = std::pow(model.toeplitz_rho, std::abs(i - j));
            Eigen::SelfAdjointEigenSolver<MatrixXd> eig(t, Eigen::EigenvaluesOnly);
            tau = eig.eigenvalues().reverse();
            break;
        }
        case CovModel::Kind::Explicit:
            if (static_cast<int>(model.explicit_eigs.size()) != p) {
                fail(ErrorCode::DimensionMismatch, "explicit eigenvalue list must have length p");
            }
            for (int j = 0; j < p; ++j) tau(j) = model.explicit_eigs[j];
            break;
    }
    std::sort(tau.data(), tau.data() + p, std::greater<>());
    if (!(tau(p - 1) > 0.0)) fail(ErrorCode::InvalidArgument, "covariance eigenvalues must be positive");
    return tau;
}

MatrixXd haar_orthogonal(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    MatrixXd g(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<MatrixXd> qr(g);
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, n);
    const MatrixXd& r = qr.matrixQR();
    for (int j = 0; j < n; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

CovMatrix make_cov(const CovModel& model, std::mt19937_64& rng) {
    const int p = model.p;
    if (p < 2) fail(ErrorCode::InvalidArgument, "covariance models need p >= 2");
    VectorXd tau = model_eigenvalues(model);
    tau *= static_cast<double>(p) / tau.sum();

    MatrixXd vecs;
    if (model.rotate) {
        vecs = haar_orthogonal(p, rng);
    } else if (model.kind == CovModel::Kind::Toeplitz) {
        MatrixXd t(p, p);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) t(i, j) = std::pow(model.toeplitz_rho, std::abs(i - j));
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(t);
        vecs = eig.eigenvectors().rowwise().reverse();
    } else {
        vecs = MatrixXd::Identity(p, p);
    }
    CovMatrix out;
    out.eigs = tau;
    out.sigma = vecs * tau.asDiagonal() * vecs.transpose();
    out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();
    out.sigma_sqrt = vecs * tau.cwiseSqrt().asDiagonal() * vecs.transpose();
    return out;
}

const char* to_string(ErrorLaw law) {
    switch (law) {
        case ErrorLaw::Gaussian: return "gaussian";
        case ErrorLaw::StudentT4: return "student_t4";
        case ErrorLaw::PoissonCentered: return "poisson_centered";
    }
    return "unknown";
}

const char* to_string(ExperimentSpec::Mode mode) {
    switch (mode) {
        case ExperimentSpec::Mode::NullSize: return "null";
        case ExperimentSpec::Mode::Power: return "power";
        case ExperimentSpec::Mode::Estimation: return "estimation";
    }
    return "unknown";
}

ExperimentSpec::Mode mode_from_string(const std::string& name) {
    if (name == "null") return ExperimentSpec::Mode::NullSize;
    if (name == "power") return ExperimentSpec::Mode::Power;
    if (name == "estimation") return ExperimentSpec::Mode::Estimation;
    fail(ErrorCode::InvalidArgument, "unknown experiment mode '" + name + "'");
}

ErrorLaw error_law_from_string(const std::string& name) {
    if (name == "gaussian") return ErrorLaw::Gaussian;
    if (name == "student_t4") return ErrorLaw::StudentT4;
    if (name == "poisson_centered") return ErrorLaw::PoissonCentered;
    fail(ErrorCode::InvalidArgument, "unknown error law '" + name + "'");
}

MatrixXd draw_errors(ErrorLaw law, int rows, int cols, std::mt19937_64& rng) {
    MatrixXd z(rows, cols);
    switch (law) {
        case ErrorLaw::Gaussian: {
            std::normal_distribution<double> d;
            for (int j = 0; j < cols; ++j)
                for (int i = 0; i < rows; ++i) z(i, j) = d(rng);
            break;
        }
        case ErrorLaw::StudentT4: {
            // Var(t_4) = 2.
            std::student_t_distribution<double> d(4.0);
            const double s = 1.0 / std::sqrt(2.0);
            for (int j = 0; j < cols; ++j)
                for (int i = 0; i < rows; ++i) z(i, j) = s * d(rng);
            break;
        }
        case ErrorLaw::PoissonCentered: {
            std::poisson_distribution<int> d(1.0);
            for (int j = 0; j < cols; ++j)
                for (int i = 0; i < rows; ++i) z(i, j) = static_cast<double>(d(rng)) - 1.0;
            break;
        }
    }
    return z;
}

// ---------------------------------------------------------------------------
// Specs and replicate generation

std::string LambdaChoice::label() const {
    switch (kind) {
        case Kind::DataDrivenI: return "data-driven-I";
        case Kind::DataDrivenSigma: return "data-driven-Sigma";
        case Kind::Fixed: break;
    }
    std::ostringstream out;
    out.precision(12);
    out << value;
    return out.str();
}

LambdaChoice LambdaChoice::parse(const std::string& text) {
    if (text == "data-driven-I") return {Kind::DataDrivenI, 0.0};
    if (text == "data-driven-Sigma") return {Kind::DataDrivenSigma, 0.0};
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || !(v > 0.0)) {
        fail(ErrorCode::InvalidArgument, "lambda must be a positive number or a data-driven policy, got '" + text + "'");
    }
    return fixed(v);
}

void validate_spec(const ExperimentSpec& spec) {
    std::vector<std::string> bad;
    if (spec.p < 2) bad.push_back("p (must be >= 2)");
    if (spec.cov.p != spec.p) bad.push_back("cov.p (must equal p)");
    if (spec.n1 < 1) bad.push_back("n1 (must be >= 1)");
    if (spec.n2 < 1) bad.push_back("n2 (must be >= 1)");
    if (spec.m != spec.n1) bad.push_back("m (the simulation design uses m = n1)");
    if (spec.replicates < 1) bad.push_back("replicates (must be >= 1)");
    if (spec.lambdas.empty()) bad.push_back("lambdas (at least one required)");
    for (const LambdaChoice& c : spec.lambdas) {
        if (c.kind == LambdaChoice::Kind::Fixed && !(c.value > 0.0)) bad.push_back("lambdas (fixed values must be positive)");
    }
    if (spec.alphas.empty()) bad.push_back("alphas (at least one required)");
    for (double a : spec.alphas) {
        if (!(a > 0.0 && a < 1.0)) bad.push_back("alphas (levels must lie in (0, 1))");
    }
    if (!(spec.signal_zeta >= 0.0)) bad.push_back("signal_zeta (must be >= 0)");
    for (std::size_t i = 0; i < spec.zetas.size(); ++i) {
        if (!(spec.zetas[i] >= 0.0) || (i > 0 && !(spec.zetas[i] > spec.zetas[i - 1]))) {
            bad.push_back("zetas (must be nonnegative and increasing)");
            break;
        }
    }
    if (spec.estimator.K < 1) bad.push_back("K (must be >= 1)");
    if (spec.estimator.I < 2) bad.push_back("I (must be >= 2)");
    if (spec.estimator.ode_steps < 2) bad.push_back("ode_steps (must be >= 2)");
    if (spec.lambda_grid < 1) bad.push_back("lambda_grid (must be >= 1)");
    if (!(spec.data_split >= 0.0 && spec.data_split < 1.0)) bad.push_back("data_split (must lie in [0, 1))");
    if (spec.null_replicates < 1) bad.push_back("null_replicates (must be >= 1)");
    if (spec.mode == ExperimentSpec::Mode::Power && spec.zetas.empty()) bad.push_back("zetas (power mode needs a grid)");
    if (spec.cov.kind == CovModel::Kind::Explicit && static_cast<int>(spec.cov.explicit_eigs.size()) != spec.p) {
        bad.push_back("cov.eigenvalues (explicit model needs p entries)");
    }
    if (spec.cov.kind == CovModel::Kind::Factor && spec.p < 6) bad.push_back("p (factor model needs p >= 6)");
    if (bad.empty()) return;
    std::string msg = "invalid experiment spec:";
    for (const std::string& b : bad) msg += " " + b + ";";
    fail(ErrorCode::InvalidArgument, msg);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(seed ^ splitmix64(stream)) + index);
}

CovMatrix spec_covariance(const ExperimentSpec& spec) {
    validate_spec(spec);
    std::mt19937_64 rng(substream_seed(spec.seed, kStreamCovariance, 0));
    return make_cov(spec.cov, rng);
}

LinearModel generate_model(const ExperimentSpec& spec, const CovMatrix& cov, double zeta,
                           std::uint64_t stream, int replicate) {
    std::mt19937_64 rng(substream_seed(spec.seed, stream, static_cast<std::uint64_t>(replicate)));
    const int n_total = spec.n1 + spec.n2;
    LinearModel model;
    model.X = draw_errors(ErrorLaw::Gaussian, spec.m, n_total, rng);
    model.C = MatrixXd::Identity(spec.m, spec.n1);
    const MatrixXd z = draw_errors(spec.error_law, spec.p, n_total, rng);
    // The signal direction is drawn even under the null so replicate r shares
    // its noise across the zeta grid.
    std::normal_distribution<double> normal;
    VectorXd b(spec.p);
    for (int i = 0; i < spec.p; ++i) b(i) = normal(rng);
    model.Y = cov.sigma_sqrt * z;
    if (zeta > 0.0) model.Y.noalias() += (zeta * b) * model.X.row(0);
    return model;
}

// ---------------------------------------------------------------------------
// Experiments

ReplicateRecord run_single_replicate(const ExperimentSpec& spec, int replicate, double zeta) {
    const RunContext ctx = make_context(spec);
    return run_replicate(ctx, zeta, kStreamMain, replicate);
}

ExperimentResult run_null_size(const ExperimentSpec& spec) {
    const RunContext ctx = make_context(spec);
    ExperimentResult result;
    result.spec = spec;
    result.sigma_eigs = ctx.cov.eigs;
    result.oracle_params = ctx.oracle_fixed;
    result.replicates = run_replicates(ctx, spec.signal_zeta, kStreamMain, spec.replicates);
    for (std::size_t k = 0; k < spec.lambdas.size(); ++k) {
        result.summaries.push_back(summarize(result.replicates, k, spec.signal_zeta, spec.lambdas[k].label(),
                                             spec.alphas, nullptr, spec.p));
    }
    collect_failures(result);
    return result;
}

ExperimentResult run_estimation_table(const ExperimentSpec& spec) {
    if (!spec.oracle) {
        ExperimentSpec copy = spec;
        copy.oracle = true;
        return run_null_size(copy);
    }
    return run_null_size(spec);
}

std::map<std::string, std::vector<double>> size_adjusted_cutoffs(const ExperimentSpec& spec) {
    static std::mutex mutex;
    static std::map<std::string, std::map<std::string, std::vector<double>>> cache;
    const std::string key = cache_key(spec);
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    ExperimentSpec null_spec = spec;
    null_spec.oracle = false;
    const RunContext ctx = make_context(null_spec);
    const auto records = run_replicates(ctx, 0.0, kStreamNull, spec.null_replicates);
    std::map<std::string, std::vector<double>> cutoffs;
    for (std::size_t k = 0; k < spec.lambdas.size(); ++k) {
        std::vector<double> stats;
        for (const ReplicateRecord& rec : records) {
            if (k < rec.outcomes.size() && rec.outcomes[k].ok) stats.push_back(rec.outcomes[k].statistic);
        }
        if (stats.empty()) fail(ErrorCode::AllPointsFailed, "no null replicate succeeded for " + spec.lambdas[k].label());
        std::vector<double> per_alpha;
        for (double a : spec.alphas) per_alpha.push_back(empirical_quantile(stats, 1.0 - a));
        cutoffs[spec.lambdas[k].label()] = per_alpha;
    }
    std::lock_guard<std::mutex> lock(mutex);
    cache[key] = cutoffs;
    return cutoffs;
}

ExperimentResult run_power_curve(const ExperimentSpec& spec, const std::vector<double>& zetas) {
    ExperimentSpec copy = spec;
    copy.zetas = zetas;
    if (zetas.empty()) fail(ErrorCode::InvalidArgument, "power curve needs at least one zeta");
    const RunContext ctx = make_context(copy);
    ExperimentResult result;
    result.spec = copy;
    result.sigma_eigs = ctx.cov.eigs;
    result.oracle_params = ctx.oracle_fixed;
    result.adjusted_cutoffs = size_adjusted_cutoffs(copy);
    for (double zeta : zetas) {
        auto records = run_replicates(ctx, zeta, kStreamMain, copy.replicates);
        for (std::size_t k = 0; k < copy.lambdas.size(); ++k) {
            const std::string label = copy.lambdas[k].label();
            result.summaries.push_back(summarize(records, k, zeta, label, copy.alphas,
                                                 &result.adjusted_cutoffs.at(label), copy.p));
        }
        result.replicates.insert(result.replicates.end(), std::make_move_iterator(records.begin()),
                                 std::make_move_iterator(records.end()));
    }
    collect_failures(result);
    return result;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    switch (spec.mode) {
        case ExperimentSpec::Mode::Power: return run_power_curve(spec, spec.zetas);
        case ExperimentSpec::Mode::Estimation: return run_estimation_table(spec);
        case ExperimentSpec::Mode::NullSize: break;
    }
    return run_null_size(spec);
}

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) fail(ErrorCode::InvalidArgument, "KS distance of an empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

// ---------------------------------------------------------------------------
// Parallelism

int worker_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("HDLR_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1) n = static_cast<int>(cap);
    }
    return n;
}

void parallel_for(int n, const std::function<void(int)>& body) {
    const int workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace hdlr
