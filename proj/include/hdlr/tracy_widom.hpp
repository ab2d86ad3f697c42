#pragma once

#include <map>
#include <string>
#include <vector>

#include "hdlr/edge.hpp"
#include "hdlr/model.hpp"

namespace hdlr {

// Tabulated CDF of the type-1 Tracy-Widom law with monotone cubic (PCHIP)
// interpolation inside the grid and asymptotic tails outside it.
class Tw1Table {
public:
    static Tw1Table from_csv_text(const std::string& text);
    static Tw1Table from_file(const std::string& path);
    // The table compiled into the library (x from -10 to 6, step 0.01).
    static const Tw1Table& builtin();

    double cdf(double x) const;
    double quantile(double prob) const;

    const std::vector<double>& xs() const { return xs_; }
    const std::vector<double>& cdf_values() const { return cdf_; }

private:
    Tw1Table(std::vector<double> xs, std::vector<double> cdf);

    std::vector<double> xs_;
    std::vector<double> cdf_;
    std::vector<double> slopes_;
};

double tw1_cdf(double x);
double tw1_quantile(double prob);

enum class ThetaSource { Empirical, Oracle };

const char* to_string(ThetaSource source);

struct TestReport {
    double lambda = 0.0;
    double ell_max = 0.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
    std::map<double, bool> reject_at;
    ThetaSource theta_source = ThetaSource::Empirical;
    int p = 0;
};

TestReport standardized_test(const LargestRootResult& result, const EdgeParams& params, int p,
                             const std::vector<double>& alphas,
                             ThetaSource source = ThetaSource::Empirical,
                             const Tw1Table& table = Tw1Table::builtin());

}  // namespace hdlr
