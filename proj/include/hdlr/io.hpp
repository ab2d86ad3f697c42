#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "hdlr/edge.hpp"
#include "hdlr/measure.hpp"
#include "hdlr/model.hpp"
#include "hdlr/power.hpp"
#include "hdlr/simulation.hpp"
#include "hdlr/tracy_widom.hpp"

namespace hdlr {

using json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "1.0";

// Dense CSV: comma separated, row-major, optional non-numeric header line,
// '.' as decimal point regardless of locale. Errors name the offending row.
MatrixXd read_csv_matrix(std::istream& in, const std::string& source = "input");
MatrixXd read_csv_matrix_file(const std::string& path);

// Shortest round-trip decimal form, so reading back reproduces every bit.
void write_csv_matrix(std::ostream& out, const MatrixXd& m);
void write_csv_matrix_file(const std::string& path, const MatrixXd& m);

std::string format_double(double v);

json to_json(const EdgeParams& params);
json to_json(const LpFitReport& report);
json to_json(const TestReport& report);
json to_json(const LambdaSelection& selection);
json to_json(const ExperimentSpec& spec);
json to_json(const ExperimentResult& result);

ExperimentSpec spec_from_json(const json& j);
ExperimentSpec read_spec_file(const std::string& path);

// Per-replicate rows and per-(zeta, lambda) summary rows.
void write_replicates_csv(std::ostream& out, const ExperimentResult& result);
void write_summary_csv(std::ostream& out, const ExperimentResult& result);

}  // namespace hdlr
