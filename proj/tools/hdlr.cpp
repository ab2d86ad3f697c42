#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hdlr/edge.hpp"
#include "hdlr/errors.hpp"
#include "hdlr/io.hpp"
#include "hdlr/model.hpp"
#include "hdlr/power.hpp"
#include "hdlr/simulation.hpp"
#include "hdlr/tracy_widom.hpp"

namespace fs = std::filesystem;
using namespace hdlr;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

struct DataOptions {
    std::string y_path, x_path, c_path;
    bool dump = false;
};

struct EstimatorFlags {
    int K = 500;
    int I = 500;
    int d = 2;
    int ode_steps = 2000;
    bool second_derivative = false;

    EstimatorOptions resolve() const {
        EstimatorOptions o;
        o.K = K;
        o.I = I;
        o.d = d;
        o.ode_steps = ode_steps;
        o.second_derivative = second_derivative;
        return o;
    }
};

struct Context {
    DataOptions data;
    EstimatorFlags est;
    std::string out_dir = ".";
    std::string tw_table;
    std::optional<double> lambda;
    std::vector<double> lambdas;
    std::string lambda_policy = "fixed";
    std::vector<double> alphas{0.05};
    int lambda_grid = 25;
    std::optional<double> lambda_lo, lambda_hi;
    double data_split = 0.0;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string prior = "I";
    std::vector<double> pis;
    std::string d_path;
    std::string spec_path;
    bool emit_data = false;
    int emit_replicate = 0;
};

void add_data_options(CLI::App* cmd, Context& ctx) {
    cmd->add_option("--Y", ctx.data.y_path, "Response matrix CSV (p rows x n_T columns)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--X", ctx.data.x_path, "Design matrix CSV (m x n_T)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--C", ctx.data.c_path, "Constraint matrix CSV (m x n1)")->required()->check(CLI::ExistingFile);
    cmd->add_flag("--dump", ctx.data.dump, "Also write W1, W2 and the W2 spectrum to sscp.json");
}

void add_estimator_options(CLI::App* cmd, Context& ctx) {
    cmd->add_option("--K", ctx.est.K, "Number of atoms in the sigma grid")->check(CLI::PositiveNumber);
    cmd->add_option("--I", ctx.est.I, "Number of z-grid points")->check(CLI::Range(2, 100000));
    cmd->add_option("--d", ctx.est.d, "Weight truncation exponent")->check(CLI::NonNegativeNumber);
    cmd->add_option("--ode-steps", ctx.est.ode_steps, "RK4 steps")->check(CLI::Range(2, 10000000));
    cmd->add_flag("--second-derivative", ctx.est.second_derivative, "Add second-derivative rows to the LP");
    cmd->add_option("--out", ctx.out_dir, "Output directory");
}

LinearModel load_model(const DataOptions& data) {
    LinearModel model;
    model.Y = read_csv_matrix_file(data.y_path);
    model.X = read_csv_matrix_file(data.x_path);
    model.C = read_csv_matrix_file(data.c_path);
    return model;
}

fs::path prepare_out(const std::string& dir) {
    fs::path out(dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) fail(ErrorCode::InvalidArgument, "cannot create output directory '" + dir + "': " + ec.message());
    return out;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::InvalidArgument, "cannot write '" + path.string() + "'");
    out << std::setw(2) << j << '\n';
}

json matrix_json(const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(m.cols());
        for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
        rows.push_back(row);
    }
    return rows;
}

void maybe_dump(const Context& ctx, const SscpPair& sscp, const fs::path& out) {
    if (!ctx.data.dump) return;
    std::vector<double> eigs(sscp.w2_eigs.data(), sscp.w2_eigs.data() + sscp.w2_eigs.size());
    write_json(out / "sscp.json", {{"schema_version", kSchemaVersion},
                                   {"W1", matrix_json(sscp.W1)},
                                   {"W2", matrix_json(sscp.W2)},
                                   {"n1", sscp.n1},
                                   {"n2", sscp.n2},
                                   {"w2_eigs", eigs}});
}

json base_config(const Context& ctx, const std::string& command) {
    return {{"command", command},
            {"Y", ctx.data.y_path},
            {"X", ctx.data.x_path},
            {"C", ctx.data.c_path},
            {"K", ctx.est.K},
            {"I", ctx.est.I},
            {"d", ctx.est.d},
            {"ode_steps", ctx.est.ode_steps},
            {"second_derivative", ctx.est.second_derivative},
            {"tw_table", ctx.tw_table.empty() ? "builtin" : ctx.tw_table}};
}

const Tw1Table& tw_table(const Context& ctx) {
    static std::optional<Tw1Table> custom;
    if (ctx.tw_table.empty()) return Tw1Table::builtin();
    if (!custom) custom = Tw1Table::from_file(ctx.tw_table);
    return *custom;
}

AlternativePrior prior_from(const Context& ctx, int p) {
    if (!ctx.d_path.empty()) return AlternativePrior::explicit_matrix(read_csv_matrix_file(ctx.d_path));
    if (!ctx.pis.empty()) {
        if (ctx.pis.size() != 3) fail(ErrorCode::InvalidArgument, "--pis needs exactly three coefficients");
        return AlternativePrior::polynomial({ctx.pis[0], ctx.pis[1], ctx.pis[2]});
    }
    (void)p;
    return ctx.prior == "Sigma" ? AlternativePrior::sigma() : AlternativePrior::identity();
}

SelectOptions select_options(const Context& ctx) {
    SelectOptions o;
    o.grid_size = ctx.lambda_grid;
    o.lambda_lo = ctx.lambda_lo;
    o.lambda_hi = ctx.lambda_hi;
    o.estimator = ctx.est.resolve();
    return o;
}

void print_report(const TestReport& r) {
    std::cout << std::setprecision(10);
    std::cout << "lambda     " << r.lambda << "\n"
              << "ell_max    " << r.ell_max << "\n"
              << "theta1     " << r.theta1 << "\n"
              << "theta2     " << r.theta2 << "\n"
              << "statistic  " << r.statistic << "\n"
              << "p_value    " << r.p_value << "\n";
    for (const auto& [alpha, reject] : r.reject_at) {
        std::cout << "alpha " << alpha << "  " << (reject ? "reject H0" : "do not reject H0") << "\n";
    }
}

// ---------------------------------------------------------------------------

int cmd_test(const Context& ctx) {
    const fs::path out = prepare_out(ctx.out_dir);
    const LinearModel model = load_model(ctx.data);
    json config = base_config(ctx, "test");
    config["lambda_policy"] = ctx.lambda_policy;
    config["alphas"] = ctx.alphas;

    SscpPair test_sscp;
    EdgeParams params;
    json selection_json;
    if (ctx.lambda_policy == "fixed") {
        if (!ctx.lambda) fail(ErrorCode::InvalidArgument, "--lambda is required with the fixed policy");
        test_sscp = build_sscp(model);
        maybe_dump(ctx, test_sscp, out);
        const EdgeEstimate est = estimate_edge_params(make_spectrum_view(test_sscp), *ctx.lambda, ctx.est.resolve());
        params = est.params;
        config["lambda"] = *ctx.lambda;
        selection_json = {{"fit", to_json(est.fit)}};
    } else {
        const AlternativePrior prior =
            ctx.lambda_policy == "data-driven-Sigma" ? AlternativePrior::sigma() : AlternativePrior::identity();
        SscpPair select_sscp;
        if (ctx.data_split > 0.0) {
            DataSplit split = split_residual_sscp(model, ctx.data_split, ctx.seed);
            select_sscp = std::move(split.selection);
            test_sscp = std::move(split.testing);
        } else {
            test_sscp = build_sscp(model);
            select_sscp = test_sscp;
        }
        maybe_dump(ctx, test_sscp, out);
        const SpectrumView select_view = make_spectrum_view(select_sscp);
        const LambdaSelection sel = select_lambda(select_view, &select_sscp, prior, select_options(ctx));
        for (const auto& w : sel.warnings) std::cerr << "warning: " << w << "\n";
        params = ctx.data_split > 0.0
                     ? estimate_edge_params(make_spectrum_view(test_sscp), sel.lambda_opt, ctx.est.resolve()).params
                     : sel.params_opt;
        config["lambda_grid"] = ctx.lambda_grid;
        config["data_split"] = ctx.data_split;
        config["seed"] = ctx.seed;
        selection_json = {{"selection", to_json(sel)}};
    }
    const LargestRootResult root = largest_root(test_sscp, params.lambda);
    const TestReport report = standardized_test(root, params, test_sscp.p(), ctx.alphas, ThetaSource::Empirical,
                                                tw_table(ctx));
    json j = {{"schema_version", kSchemaVersion},
              {"config", config},
              {"report", to_json(report)},
              {"edge_params", to_json(params)}};
    j.update(selection_json);
    write_json(out / "report.json", j);
    print_report(report);
    return 0;
}

int cmd_estimate(const Context& ctx) {
    const fs::path out = prepare_out(ctx.out_dir);
    const SscpPair sscp = build_sscp(load_model(ctx.data));
    maybe_dump(ctx, sscp, out);
    if (ctx.lambdas.empty()) fail(ErrorCode::InvalidArgument, "--lambda is required");
    const SpectrumView view = make_spectrum_view(sscp);
    json results = json::array();
    std::cout << std::setprecision(10);
    for (double lambda : ctx.lambdas) {
        const EdgeEstimate est = estimate_edge_params(view, lambda, ctx.est.resolve());
        const LargestRootResult root = largest_root(sscp, lambda);
        results.push_back({{"edge_params", to_json(est.params)}, {"fit", to_json(est.fit)}, {"ell_max", root.ell_max}});
        std::cout << "lambda " << lambda << "  rho " << est.params.rho << "  beta " << est.params.beta << "  theta1 "
                  << est.params.theta1 << "  theta2 " << est.params.theta2 << "  ell_max " << root.ell_max << "\n";
    }
    json config = base_config(ctx, "estimate");
    config["lambdas"] = ctx.lambdas;
    write_json(out / "estimate.json", {{"schema_version", kSchemaVersion}, {"config", config}, {"results", results}});
    return 0;
}

int cmd_select(const Context& ctx) {
    const fs::path out = prepare_out(ctx.out_dir);
    const SscpPair sscp = build_sscp(load_model(ctx.data));
    maybe_dump(ctx, sscp, out);
    const SpectrumView view = make_spectrum_view(sscp);
    const AlternativePrior prior = prior_from(ctx, sscp.p());
    const LambdaSelection sel = select_lambda(view, &sscp, prior, select_options(ctx));
    for (const auto& w : sel.warnings) std::cerr << "warning: " << w << "\n";
    json config = base_config(ctx, "select-lambda");
    config["lambda_grid"] = ctx.lambda_grid;
    config["prior"] = !ctx.d_path.empty() ? json(ctx.d_path) : (!ctx.pis.empty() ? json(ctx.pis) : json(ctx.prior));
    if (ctx.lambda_lo) config["lambda_lo"] = *ctx.lambda_lo;
    if (ctx.lambda_hi) config["lambda_hi"] = *ctx.lambda_hi;
    write_json(out / "selection.json", {{"schema_version", kSchemaVersion}, {"config", config}, {"selection", to_json(sel)}});
    std::cout << std::setprecision(10) << "lambda_opt " << sel.lambda_opt << "  ratio " << sel.ratio[sel.index_opt]
              << "  (" << sel.grid.size() << " grid points evaluated)\n";
    return 0;
}

int cmd_simulate(const Context& ctx) {
    ExperimentSpec spec = read_spec_file(ctx.spec_path);
    if (ctx.seed_given) spec.seed = ctx.seed;
    validate_spec(spec);
    const fs::path out = prepare_out(ctx.out_dir);

    if (ctx.emit_data) {
        if (ctx.emit_replicate < 0 || ctx.emit_replicate >= spec.replicates) {
            fail(ErrorCode::InvalidArgument, "--emit-replicate must index an existing replicate");
        }
        const double zeta = spec.mode == ExperimentSpec::Mode::Power ? spec.zetas.front() : spec.signal_zeta;
        const LinearModel model = generate_model(spec, spec_covariance(spec), zeta, kMainStream, ctx.emit_replicate);
        const fs::path data_dir = out / "data";
        fs::create_directories(data_dir);
        write_csv_matrix_file((data_dir / "Y.csv").string(), model.Y);
        write_csv_matrix_file((data_dir / "X.csv").string(), model.X);
        write_csv_matrix_file((data_dir / "C.csv").string(), model.C);
        const ReplicateRecord rec = run_single_replicate(spec, ctx.emit_replicate, zeta);
        json outcomes = json::array();
        for (const LambdaOutcome& o : rec.outcomes) {
            outcomes.push_back({{"lambda", o.label}, {"ok", o.ok}, {"error", o.error}, {"statistic", o.statistic},
                                {"statistic_text", format_double(o.statistic)}, {"theta1", o.theta1},
                                {"theta2", o.theta2}, {"ell_max", o.ell_max}});
        }
        write_json(data_dir / "emitted.json", {{"schema_version", kSchemaVersion},
                                               {"config", to_json(spec)},
                                               {"replicate", ctx.emit_replicate},
                                               {"zeta", zeta},
                                               {"outcomes", outcomes}});
    }

    const ExperimentResult result = run_experiment(spec);
    write_json(out / "result.json", to_json(result));
    {
        std::ofstream csv(out / "replicates.csv");
        write_replicates_csv(csv, result);
    }
    {
        std::ofstream csv(out / "summary.csv");
        write_summary_csv(csv, result);
    }
    write_summary_csv(std::cout, result);
    if (!result.failed.empty()) {
        std::cerr << result.failed.size() << " replicate(s) had failures; see result.json\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ridge-regularized largest-root test for high-dimensional linear hypotheses"};
    app.require_subcommand(1);
    Context ctx;

    auto* test = app.add_subcommand("test", "Run the test on CSV data");
    add_data_options(test, ctx);
    add_estimator_options(test, ctx);
    auto* lambda_opt = test->add_option("--lambda", ctx.lambda, "Ridge parameter")->check(CLI::PositiveNumber);
    test->add_option("--lambda-policy", ctx.lambda_policy, "fixed, data-driven-I or data-driven-Sigma")
        ->check(CLI::IsMember({"fixed", "data-driven-I", "data-driven-Sigma"}));
    test->add_option("--alpha", ctx.alphas, "Test levels, comma separated")->delimiter(',');
    test->add_option("--lambda-grid", ctx.lambda_grid, "Grid size for data-driven lambda")->check(CLI::PositiveNumber);
    test->add_option("--data-split", ctx.data_split, "Fraction of residual df used to choose lambda")
        ->check(CLI::Range(0.0, 0.99));
    test->add_option("--seed", ctx.seed, "Seed for the data split");
    test->add_option("--tw-table", ctx.tw_table, "Alternative TW1 table CSV")->check(CLI::ExistingFile);
    (void)lambda_opt;

    auto* estimate = app.add_subcommand("estimate", "Estimate the Tracy-Widom centering and scaling");
    add_data_options(estimate, ctx);
    add_estimator_options(estimate, ctx);
    estimate->add_option("--lambda", ctx.lambdas, "Ridge parameter(s), comma separated")->delimiter(',')->required();

    auto* select = app.add_subcommand("select-lambda", "Choose lambda by maximizing the estimated signal-to-noise ratio");
    add_data_options(select, ctx);
    add_estimator_options(select, ctx);
    select->add_option("--lambda-grid", ctx.lambda_grid, "Number of log-spaced grid points")->check(CLI::PositiveNumber);
    select->add_option("--lambda-lo", ctx.lambda_lo, "Lower end of the grid")->check(CLI::PositiveNumber);
    select->add_option("--lambda-hi", ctx.lambda_hi, "Upper end of the grid")->check(CLI::PositiveNumber);
    auto* prior = select->add_option("--prior", ctx.prior, "I or Sigma")->check(CLI::IsMember({"I", "Sigma"}));
    auto* pis = select->add_option("--pis", ctx.pis, "Polynomial prior pi0,pi1,pi2")->delimiter(',')->expected(3);
    auto* dmat = select->add_option("--D", ctx.d_path, "Explicit prior covariance CSV")->check(CLI::ExistingFile);
    prior->excludes(pis)->excludes(dmat);
    pis->excludes(dmat);

    auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo experiment from a JSON spec");
    simulate->add_option("--spec", ctx.spec_path, "Experiment spec (JSON)")->required()->check(CLI::ExistingFile);
    auto* seed = simulate->add_option("--seed", ctx.seed, "Override the experiment seed");
    simulate->add_option("--out", ctx.out_dir, "Output directory");
    simulate->add_flag("--emit-data", ctx.emit_data, "Also write one replicate's Y, X, C as CSV");
    simulate->add_option("--emit-replicate", ctx.emit_replicate, "Replicate index written by --emit-data");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }
    ctx.seed_given = seed->count() > 0;

    try {
        if (*test) return cmd_test(ctx);
        if (*estimate) return cmd_estimate(ctx);
        if (*select) return cmd_select(ctx);
        if (*simulate) return cmd_simulate(ctx);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return is_input_error(e.code()) ? kExitInput : kExitNumeric;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return 0;
}
