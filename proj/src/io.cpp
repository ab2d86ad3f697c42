#include "hdlr/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "hdlr/errors.hpp"

namespace hdlr {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& text, double& value) {
    if (text.empty()) return false;
    const char* begin = text.data();
    const char* end = begin + text.size();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    return ec == std::errc() && ptr == end;
}

json doubles(const std::vector<double>& v) {
    return json(v);
}

}  // namespace

MatrixXd read_csv_matrix(std::istream& in, const std::string& source) {
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    bool first_content = true;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_fields(line);
        std::vector<double> values(fields.size());
        bool numeric = true;
        std::size_t bad = 0;
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (!parse_double(fields[c], values[c])) {
                numeric = false;
                bad = c;
                break;
            }
        }
        if (first_content) {
            first_content = false;
            width = fields.size();
            if (!numeric) continue;  // header
        }
        if (fields.size() != width) {
            std::ostringstream msg;
            msg << source << ": row " << line_no << " has " << fields.size() << " fields, expected " << width;
            fail(ErrorCode::ParseError, msg.str());
        }
        if (!numeric) {
            std::ostringstream msg;
            msg << source << ": row " << line_no << ", column " << bad + 1 << ": cannot parse '" << fields[bad]
                << "' as a number";
            fail(ErrorCode::ParseError, msg.str());
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) fail(ErrorCode::ParseError, source + ": no numeric rows");
    MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) m(i, j) = rows[i][j];
    return m;
}

MatrixXd read_csv_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::InvalidArgument, "cannot open '" + path + "'");
    return read_csv_matrix(in, path);
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

void write_csv_matrix(std::ostream& out, const MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

void write_csv_matrix_file(const std::string& path, const MatrixXd& m) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
    write_csv_matrix(out, m);
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const EdgeParams& e) {
    return {{"lambda", e.lambda},         {"rho", e.rho},
            {"beta", e.beta},             {"s_at_beta", e.s_at_beta},
            {"s1_at_beta", e.s1_at_beta}, {"s2_at_beta", e.s2_at_beta},
            {"theta1", e.theta1},         {"theta2", e.theta2},
            {"is_discrete_edge", e.is_discrete_edge}};
}

json to_json(const LpFitReport& r) {
    std::vector<double> masses(r.measure.masses.data(), r.measure.masses.data() + r.measure.masses.size());
    std::vector<double> weights(r.measure.weights.data(), r.measure.weights.data() + r.measure.weights.size());
    return {{"masses", masses},     {"weights", weights},           {"loss_theta", r.loss_theta},
            {"n_active", r.n_active}, {"grid_K", r.grid_K},         {"grid_I", r.grid_I},
            {"lp_iterations", r.lp_iterations}};
}

json to_json(const TestReport& r) {
    json reject = json::object();
    for (const auto& [alpha, decision] : r.reject_at) reject[format_double(alpha)] = decision;
    return {{"lambda", r.lambda},       {"ell_max", r.ell_max},     {"theta1", r.theta1},
            {"theta2", r.theta2},       {"statistic", r.statistic}, {"p_value", r.p_value},
            {"reject_at", reject},      {"theta_source", to_string(r.theta_source)},
            {"p", r.p}};
}

json to_json(const LambdaSelection& s) {
    return {{"grid", s.grid},     {"xi", s.xi},         {"theta2", s.theta2},
            {"ratio", s.ratio},   {"lambda_opt", s.lambda_opt},
            {"index_opt", s.index_opt}, {"warnings", s.warnings}};
}

json to_json(const ExperimentSpec& s) {
    json lambdas = json::array();
    for (const LambdaChoice& c : s.lambdas) {
        if (c.kind == LambdaChoice::Kind::Fixed) lambdas.push_back(c.value);
        else lambdas.push_back(c.label());
    }
    json cov = {{"kind", to_string(s.cov.kind)}, {"rotate", s.cov.rotate}};
    if (s.cov.kind == CovModel::Kind::Toeplitz) cov["toeplitz_rho"] = s.cov.toeplitz_rho;
    if (s.cov.kind == CovModel::Kind::Explicit) cov["eigenvalues"] = s.cov.explicit_eigs;
    return {{"schema_version", kSchemaVersion},
            {"mode", to_string(s.mode)},
            {"cov", cov},
            {"error_law", to_string(s.error_law)},
            {"p", s.p},
            {"n1", s.n1},
            {"n2", s.n2},
            {"m", s.m},
            {"lambdas", lambdas},
            {"signal_zeta", s.signal_zeta},
            {"zetas", s.zetas},
            {"replicates", s.replicates},
            {"seed", s.seed},
            {"alphas", s.alphas},
            {"K", s.estimator.K},
            {"I", s.estimator.I},
            {"d", s.estimator.d},
            {"ode_steps", s.estimator.ode_steps},
            {"margin_fraction", s.estimator.margin_fraction},
            {"second_derivative", s.estimator.second_derivative},
            {"lambda_grid", s.lambda_grid},
            {"oracle", s.oracle},
            {"data_split", s.data_split},
            {"null_replicates", s.null_replicates}};
}

json to_json(const ExperimentResult& r) {
    json summaries = json::array();
    for (const LambdaSummary& s : r.summaries) {
        json item = {{"lambda", s.label},
                     {"zeta", s.zeta},
                     {"n_ok", s.n_ok},
                     {"reject_rate", doubles(s.reject_rate)},
                     {"oracle_reject_rate", doubles(s.oracle_reject_rate)},
                     {"err_theta1_mean", s.err1_mean},
                     {"err_theta1_sd", s.err1_sd},
                     {"err_theta2_mean", s.err2_mean},
                     {"err_theta2_sd", s.err2_sd},
                     {"ks_empirical", s.ks_empirical},
                     {"ks_oracle", s.ks_oracle}};
        if (!s.adjusted_reject_rate.empty()) item["adjusted_reject_rate"] = doubles(s.adjusted_reject_rate);
        summaries.push_back(item);
    }
    json oracle = json::object();
    for (const auto& [label, params] : r.oracle_params) oracle[label] = to_json(params);
    json failures = json::array();
    for (const ReplicateRecord& rec : r.replicates) {
        if (!rec.error.empty()) failures.push_back({{"replicate", rec.index}, {"zeta", rec.zeta}, {"error", rec.error}});
        for (const LambdaOutcome& o : rec.outcomes) {
            if (!o.ok) {
                failures.push_back({{"replicate", rec.index}, {"zeta", rec.zeta}, {"lambda", o.label}, {"error", o.error}});
            }
        }
    }
    json out = {{"schema_version", kSchemaVersion},
                {"config", to_json(r.spec)},
                {"summaries", summaries},
                {"oracle_params", oracle},
                {"failed_replicates", r.failed},
                {"failures", failures}};
    if (!r.adjusted_cutoffs.empty()) out["size_adjusted_cutoffs"] = r.adjusted_cutoffs;
    return out;
}

ExperimentSpec spec_from_json(const json& j) {
    if (!j.is_object()) fail(ErrorCode::InvalidArgument, "spec must be a JSON object");
    static const std::vector<std::string> known = {
        "schema_version", "mode", "cov", "error_law", "p", "n1", "n2", "m", "lambdas", "signal_zeta",
        "zetas", "replicates", "seed", "alphas", "K", "I", "d", "ode_steps", "margin_fraction",
        "second_derivative", "lambda_grid", "oracle", "data_split", "null_replicates", "description"};
    std::vector<std::string> problems;
    for (const auto& item : j.items()) {
        if (std::find(known.begin(), known.end(), item.key()) == known.end()) problems.push_back(item.key() + " (unknown field)");
    }
    for (const char* required : {"cov", "p", "n1", "n2", "lambdas", "replicates"}) {
        if (!j.contains(required)) problems.push_back(std::string(required) + " (missing)");
    }
    if (!problems.empty()) {
        std::string msg = "invalid experiment spec:";
        for (const auto& p : problems) msg += " " + p + ";";
        fail(ErrorCode::InvalidArgument, msg);
    }

    ExperimentSpec s;
    auto field = [&](const char* name, auto& target) {
        if (!j.contains(name)) return;
        try {
            j.at(name).get_to(target);
        } catch (const json::exception&) {
            fail(ErrorCode::InvalidArgument, std::string("invalid experiment spec: ") + name + " has the wrong type");
        }
    };
    std::string text;
    if (j.contains("mode")) {
        field("mode", text);
        s.mode = mode_from_string(text);
    }
    field("p", s.p);
    field("n1", s.n1);
    field("n2", s.n2);
    s.m = s.n1;
    field("m", s.m);
    field("replicates", s.replicates);
    field("seed", s.seed);
    field("signal_zeta", s.signal_zeta);
    field("zetas", s.zetas);
    field("alphas", s.alphas);
    field("K", s.estimator.K);
    field("I", s.estimator.I);
    field("d", s.estimator.d);
    field("ode_steps", s.estimator.ode_steps);
    field("margin_fraction", s.estimator.margin_fraction);
    field("second_derivative", s.estimator.second_derivative);
    field("lambda_grid", s.lambda_grid);
    field("oracle", s.oracle);
    field("data_split", s.data_split);
    field("null_replicates", s.null_replicates);
    if (j.contains("error_law")) {
        field("error_law", text);
        s.error_law = error_law_from_string(text);
    }

    const json& lambdas = j.at("lambdas");
    if (!lambdas.is_array()) fail(ErrorCode::InvalidArgument, "invalid experiment spec: lambdas must be an array");
    for (const json& l : lambdas) {
        if (l.is_number()) s.lambdas.push_back(LambdaChoice::fixed(l.get<double>()));
        else if (l.is_string()) s.lambdas.push_back(LambdaChoice::parse(l.get<std::string>()));
        else fail(ErrorCode::InvalidArgument, "invalid experiment spec: lambdas entries must be numbers or policy names");
    }

    const json& cov = j.at("cov");
    if (!cov.is_object() || !cov.contains("kind")) {
        fail(ErrorCode::InvalidArgument, "invalid experiment spec: cov needs a kind");
    }
    s.cov.kind = cov_kind_from_string(cov.at("kind").get<std::string>());
    s.cov.p = s.p;
    if (cov.contains("rotate")) s.cov.rotate = cov.at("rotate").get<bool>();
    if (cov.contains("toeplitz_rho")) s.cov.toeplitz_rho = cov.at("toeplitz_rho").get<double>();
    if (cov.contains("three_mass_A")) {
        const bool rotate = s.cov.rotate;
        s.cov = CovModel::three_mass(s.p, cov.at("three_mass_A").get<double>(), rotate);
    } else if (cov.contains("eigenvalues")) {
        s.cov.explicit_eigs = cov.at("eigenvalues").get<std::vector<double>>();
    }
    validate_spec(s);
    return s;
}

ExperimentSpec read_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::InvalidArgument, "cannot open spec '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ParseError, path + ": " + e.what());
    }
    return spec_from_json(j);
}

void write_replicates_csv(std::ostream& out, const ExperimentResult& result) {
    out << "replicate,zeta,lambda_label,ok,lambda,ell_max,theta1,theta2,statistic,p_value";
    for (double a : result.spec.alphas) out << ",reject_" << format_double(a);
    out << ",oracle_theta1,oracle_theta2,oracle_statistic\n";
    for (const ReplicateRecord& rec : result.replicates) {
        for (const LambdaOutcome& o : rec.outcomes) {
            out << rec.index << ',' << format_double(rec.zeta) << ',' << o.label << ',' << (o.ok ? 1 : 0) << ','
                << format_double(o.lambda) << ',' << format_double(o.ell_max) << ',' << format_double(o.theta1) << ','
                << format_double(o.theta2) << ',' << format_double(o.statistic) << ',' << format_double(o.p_value);
            for (std::size_t a = 0; a < result.spec.alphas.size(); ++a) {
                out << ',' << (o.ok && o.reject[a] ? 1 : 0);
            }
            if (o.oracle_ok) {
                out << ',' << format_double(o.oracle_theta1) << ',' << format_double(o.oracle_theta2) << ','
                    << format_double(o.oracle_statistic) << '\n';
            } else {
                out << ",,,\n";
            }
        }
    }
}

void write_summary_csv(std::ostream& out, const ExperimentResult& result) {
    out << "zeta,lambda_label,n_ok";
    for (double a : result.spec.alphas) out << ",reject_" << format_double(a);
    for (double a : result.spec.alphas) out << ",oracle_reject_" << format_double(a);
    const bool adjusted = !result.adjusted_cutoffs.empty();
    if (adjusted) {
        for (double a : result.spec.alphas) out << ",adjusted_reject_" << format_double(a);
    }
    out << ",err_theta1_mean,err_theta1_sd,err_theta2_mean,err_theta2_sd,ks_empirical,ks_oracle\n";
    for (const LambdaSummary& s : result.summaries) {
        out << format_double(s.zeta) << ',' << s.label << ',' << s.n_ok;
        for (double v : s.reject_rate) out << ',' << format_double(v);
        for (double v : s.oracle_reject_rate) out << ',' << format_double(v);
        if (adjusted) {
            for (double v : s.adjusted_reject_rate) out << ',' << format_double(v);
        }
        out << ',' << format_double(s.err1_mean) << ',' << format_double(s.err1_sd) << ','
            << format_double(s.err2_mean) << ',' << format_double(s.err2_sd) << ','
            << format_double(s.ks_empirical) << ',' << format_double(s.ks_oracle) << '\n';
    }
}

}  // namespace hdlr
