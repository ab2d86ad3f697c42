#include <doctest.h>

#include <cmath>

#include "hdlr/errors.hpp"
#include "hdlr/tracy_widom.hpp"

using namespace hdlr;

TEST_CASE("TW1 reference quantiles") {
    CHECK(std::abs(tw1_quantile(0.95) - 0.9793) < 1e-3);
    CHECK(std::abs(tw1_quantile(0.99) - 2.0234) < 2e-3);
    CHECK(std::abs(tw1_quantile(0.5) - (-1.2686)) < 2e-3);
}

TEST_CASE("TW1 table invariants") {
    const Tw1Table& t = Tw1Table::builtin();
    REQUIRE(t.xs().size() > 100);
    CHECK(t.cdf_values().front() < 0.005);
    CHECK(t.cdf_values().back() > 0.9995);
    for (std::size_t i = 1; i < t.xs().size(); ++i) {
        CHECK(t.xs()[i] > t.xs()[i - 1]);
        CHECK(t.cdf_values()[i] > t.cdf_values()[i - 1]);
    }
}

TEST_CASE("cdf is strictly monotone including the tails") {
    double previous = 0.0;
    for (double x = -14.0; x <= 8.0; x += 0.037) {
        const double c = tw1_cdf(x);
        CHECK(c > previous);
        CHECK(c < 1.0);
        previous = c;
    }
}

TEST_CASE("quantile inverts cdf on the grid interior") {
    for (double x = -6.0; x <= 4.0; x += 0.173) {
        CHECK(std::abs(tw1_quantile(tw1_cdf(x)) - x) < 1e-6);
    }
}

TEST_CASE("table parsing validates monotonicity") {
    CHECK_THROWS_AS(Tw1Table::from_csv_text("x,cdf\n-6,0.001\n0,0.8\n1,0.7\n6,0.9999\n"), Error);
    const Tw1Table t = Tw1Table::from_csv_text("x,cdf\n-6,0.001\n0,0.5\n6,0.9999\n");
    CHECK(t.cdf(0.0) == doctest::Approx(0.5));
}

TEST_CASE("standardized_test centering and thresholds") {
    EdgeParams params;
    params.lambda = 1.0;
    params.theta1 = 2.0;
    params.theta2 = 0.5;
    LargestRootResult r;
    r.lambda = 1.0;
    r.ell_max = 2.0;
    r.top_k = VectorXd::Constant(1, 2.0);
    const TestReport centered = standardized_test(r, params, 100, {0.05});
    CHECK(centered.statistic == 0.0);
    CHECK(centered.p_value == doctest::Approx(1.0 - tw1_cdf(0.0)).epsilon(1e-15));
    CHECK_FALSE(centered.reject_at.at(0.05));

    const int p = 125;
    const double scale = std::pow(p, 2.0 / 3.0) / params.theta2;
    r.ell_max = params.theta1 + (tw1_quantile(0.95) + 1e-9) / scale;
    const TestReport crossed = standardized_test(r, params, p, {0.05, 0.01});
    CHECK(crossed.reject_at.at(0.05));
    CHECK_FALSE(crossed.reject_at.at(0.01));
    CHECK(std::abs(crossed.statistic - scale * (r.ell_max - params.theta1)) < 1e-12);

    r.lambda = 2.0;
    try {
        standardized_test(r, params, p, {0.05});
        FAIL("expected MismatchedLambda");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MismatchedLambda);
    }
}

TEST_CASE("p-value decreases with the statistic") {
    EdgeParams params;
    params.lambda = 1.0;
    params.theta1 = 1.0;
    params.theta2 = 1.0;
    LargestRootResult r;
    r.lambda = 1.0;
    double previous = 2.0;
    for (double ell = 0.5; ell < 1.5; ell += 0.01) {
        r.ell_max = ell;
        const double pv = standardized_test(r, params, 8, {0.05}).p_value;
        CHECK(pv < previous);
        previous = pv;
    }
}
