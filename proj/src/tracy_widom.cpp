#include "hdlr/tracy_widom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "hdlr/errors.hpp"
#include "hdlr/io.hpp"

namespace hdlr {

namespace detail {
extern const char* const kTw1Csv;
}

namespace {

// Fritsch-Carlson derivative estimates for a monotone cubic Hermite interpolant.
std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> h(n - 1), delta(n - 1), d(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x[i + 1] - x[i];
        delta[i] = (y[i + 1] - y[i]) / h[i];
    }
    if (n == 2) {
        d[0] = d[1] = delta[0];
        return d;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) continue;
        const double w1 = 2.0 * h[i] + h[i - 1];
        const double w2 = h[i] + 2.0 * h[i - 1];
        d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (s * d0 <= 0.0) return 0.0;
        if (d0 * d1 <= 0.0 && std::abs(s) > 3.0 * std::abs(d0)) return 3.0 * d0;
        return s;
    };
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    return d;
}

}  // namespace

Tw1Table::Tw1Table(std::vector<double> xs, std::vector<double> cdf)
    : xs_(std::move(xs)), cdf_(std::move(cdf)) {
    if (xs_.size() < 3 || xs_.size() != cdf_.size()) {
        fail(ErrorCode::InvalidArgument, "TW1 table needs at least three (x, cdf) rows");
    }
    for (std::size_t i = 0; i < xs_.size(); ++i) {
        if (!(cdf_[i] > 0.0 && cdf_[i] < 1.0)) fail(ErrorCode::InvalidArgument, "TW1 cdf values must lie in (0, 1)");
        if (i > 0 && !(xs_[i] > xs_[i - 1] && cdf_[i] > cdf_[i - 1])) {
            fail(ErrorCode::InvalidArgument, "TW1 table must be strictly increasing in both columns");
        }
    }
    if (!(cdf_.front() < 0.005 && cdf_.back() > 0.9995)) {
        fail(ErrorCode::InvalidArgument, "TW1 table does not cover the distribution's bulk");
    }
    slopes_ = pchip_slopes(xs_, cdf_);
}

Tw1Table Tw1Table::from_csv_text(const std::string& text) {
    std::istringstream in(text);
    const MatrixXd m = read_csv_matrix(in, "TW1 table");
    if (m.cols() != 2) fail(ErrorCode::ParseError, "TW1 table must have exactly two columns");
    std::vector<double> xs(m.rows()), cdf(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        xs[i] = m(i, 0);
        cdf[i] = m(i, 1);
    }
    return Tw1Table(std::move(xs), std::move(cdf));
}

Tw1Table Tw1Table::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::InvalidArgument, "cannot open TW1 table '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_csv_text(buffer.str());
}

const Tw1Table& Tw1Table::builtin() {
    static const Tw1Table table = from_csv_text(detail::kTw1Csv);
    return table;
}

double Tw1Table::cdf(double x) const {
    constexpr double kLowest = std::numeric_limits<double>::min();
    const double below_one = std::nextafter(1.0, 0.0);
    if (std::isnan(x)) return x;
    if (x < xs_.front()) {
        // log F(x) ~ -|x|^3 / 24, anchored at the first grid point.
        const double a = std::abs(x), a0 = std::abs(xs_.front());
        return std::max(cdf_.front() * std::exp(-(a * a * a - a0 * a0 * a0) / 24.0), kLowest);
    }
    if (x > xs_.back()) {
        // log(1 - F(x)) ~ -(2/3) x^{3/2}, anchored at the last grid point.
        const double tail = (1.0 - cdf_.back()) *
                            std::exp(-(2.0 / 3.0) * (std::pow(x, 1.5) - std::pow(xs_.back(), 1.5)));
        return std::min(1.0 - tail, below_one);
    }
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    std::size_t i = static_cast<std::size_t>(it - xs_.begin());
    i = std::clamp<std::size_t>(i, 1, xs_.size() - 1) - 1;
    const double h = xs_[i + 1] - xs_[i];
    const double t = (x - xs_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double v = (2 * t3 - 3 * t2 + 1) * cdf_[i] + (t3 - 2 * t2 + t) * h * slopes_[i] +
                     (-2 * t3 + 3 * t2) * cdf_[i + 1] + (t3 - t2) * h * slopes_[i + 1];
    return std::clamp(v, kLowest, below_one);
}

double Tw1Table::quantile(double prob) const {
    if (!(prob > 0.0 && prob < 1.0)) fail(ErrorCode::InvalidArgument, "probability must lie in (0, 1)");
    if (prob < cdf_.front()) {
        const double a0 = std::abs(xs_.front());
        return -std::cbrt(a0 * a0 * a0 - 24.0 * std::log(prob / cdf_.front()));
    }
    if (prob > cdf_.back()) {
        const double r = std::pow(xs_.back(), 1.5) - 1.5 * std::log((1.0 - prob) / (1.0 - cdf_.back()));
        return std::pow(r, 2.0 / 3.0);
    }
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), prob);
    std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
    if (cdf_[i] == prob) return xs_[i];
    double lo = xs_[i - 1], hi = xs_[i];
    for (int iter = 0; iter < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++iter) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < prob ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double tw1_cdf(double x) {
    return Tw1Table::builtin().cdf(x);
}

double tw1_quantile(double prob) {
    return Tw1Table::builtin().quantile(prob);
}

const char* to_string(ThetaSource source) {
    return source == ThetaSource::Oracle ? "oracle" : "empirical";
}

TestReport standardized_test(const LargestRootResult& result, const EdgeParams& params, int p,
                             const std::vector<double>& alphas, ThetaSource source,
                             const Tw1Table& table) {
    if (std::abs(result.lambda - params.lambda) > 1e-12 * std::max(1.0, std::abs(result.lambda))) {
        fail(ErrorCode::MismatchedLambda, "edge parameters were computed for a different lambda");
    }
    if (p < 1) fail(ErrorCode::InvalidArgument, "p must be positive");
    if (!(params.theta2 > 0.0)) fail(ErrorCode::InvalidArgument, "theta2 must be positive");
    TestReport report;
    report.lambda = result.lambda;
    report.ell_max = result.ell_max;
    report.theta1 = params.theta1;
    report.theta2 = params.theta2;
    report.p = p;
    report.theta_source = source;
    report.statistic = std::pow(static_cast<double>(p), 2.0 / 3.0) * (result.ell_max - params.theta1) / params.theta2;
    report.p_value = 1.0 - table.cdf(report.statistic);
    for (double alpha : alphas) {
        if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidArgument, "test levels must lie in (0, 1)");
        report.reject_at[alpha] = report.statistic > table.quantile(1.0 - alpha);
    }
    return report;
}

}  // namespace hdlr
