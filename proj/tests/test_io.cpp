#include <doctest.h>

#include <sstream>

#include "hdlr/errors.hpp"
#include "hdlr/io.hpp"

using namespace hdlr;

TEST_CASE("CSV with and without header") {
    std::istringstream plain("1,2,3\n4,5,6\n");
    const MatrixXd a = read_csv_matrix(plain);
    REQUIRE(a.rows() == 2);
    REQUIRE(a.cols() == 3);
    CHECK(a(1, 2) == 6.0);
    std::istringstream headed("a,b\n1.5,-2e-3\n\n3,4\n");
    const MatrixXd b = read_csv_matrix(headed);
    CHECK(b.rows() == 2);
    CHECK(b(0, 1) == -2e-3);
}

TEST_CASE("CSV errors name the offending row") {
    std::istringstream ragged("1,2\n3,4\n5\n");
    try {
        read_csv_matrix(ragged, "Y.csv");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        const std::string what = e.what();
        CHECK(what.find("Y.csv") != std::string::npos);
        CHECK(what.find("row 3") != std::string::npos);
    }
    std::istringstream bad("1,2\n3,x\n");
    try {
        read_csv_matrix(bad);
        FAIL("expected ParseError");
    } catch (const Error& e) {
        const std::string what = e.what();
        CHECK(what.find("row 2") != std::string::npos);
        CHECK(what.find("column 2") != std::string::npos);
    }
}

TEST_CASE("CSV round trip is exact") {
    MatrixXd m(2, 2);
    m << 0.1, 1.0 / 3.0, -7.123456789012345e-12, 6.02214076e23;
    std::ostringstream out;
    write_csv_matrix(out, m);
    std::istringstream in(out.str());
    const MatrixXd back = read_csv_matrix(in);
    CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spec JSON parsing") {
    const json j = json::parse(R"({"mode":"null","cov":{"kind":"toeplitz","rotate":false},"p":20,
        "n1":10,"n2":40,"lambdas":[0.5,"data-driven-I"],"replicates":3,"seed":9,"alphas":[0.05,0.01],
        "K":50,"I":30})");
    const ExperimentSpec s = spec_from_json(j);
    CHECK(s.mode == ExperimentSpec::Mode::NullSize);
    CHECK(s.cov.kind == CovModel::Kind::Toeplitz);
    CHECK(s.m == 10);
    CHECK(s.lambdas.size() == 2);
    CHECK(s.lambdas[1].kind == LambdaChoice::Kind::DataDrivenI);
    CHECK(s.estimator.K == 50);
    CHECK(s.estimator.I == 30);
    const ExperimentSpec again = spec_from_json(to_json(s));
    CHECK(again.alphas == s.alphas);
    CHECK(again.seed == 9);

    json unknown = j;
    unknown["colour"] = 1;
    CHECK_THROWS_AS(spec_from_json(unknown), Error);
    json missing = j;
    missing.erase("p");
    CHECK_THROWS_AS(spec_from_json(missing), Error);
}

TEST_CASE("result JSON carries schema version and config") {
    ExperimentSpec s;
    s.p = 4;
    s.cov.p = 4;
    s.n1 = 2;
    s.m = 2;
    s.n2 = 6;
    s.lambdas = {LambdaChoice::fixed(1.0)};
    s.replicates = 1;
    s.estimator.K = 20;
    s.estimator.I = 10;
    ExperimentResult r;
    r.spec = s;
    const json j = to_json(r);
    CHECK(j.at("schema_version") == kSchemaVersion);
    CHECK(j.at("config").at("p") == 4);
}
