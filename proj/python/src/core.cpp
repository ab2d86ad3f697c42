#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hdlr/edge.hpp"
#include "hdlr/errors.hpp"
#include "hdlr/io.hpp"
#include "hdlr/model.hpp"
#include "hdlr/power.hpp"
#include "hdlr/simulation.hpp"
#include "hdlr/tracy_widom.hpp"

namespace py = pybind11;
using namespace hdlr;

namespace {

AlternativePrior prior_from_name(const std::string& name) {
    if (name == "I" || name == "identity") return AlternativePrior::identity();
    if (name == "Sigma" || name == "sigma") return AlternativePrior::sigma();
    fail(ErrorCode::InvalidArgument, "unknown prior '" + name + "' (expected 'I' or 'Sigma')");
}

LinearModel to_model(const MatrixXd& Y, const MatrixXd& X, const std::optional<MatrixXd>& C) {
    LinearModel model{Y, X, C ? *C : MatrixXd::Identity(X.rows(), X.rows())};
    return model;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Regularized largest-root test for high-dimensional linear hypotheses";

    static py::exception<Error> numerical_error(m, "NumericalError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr ptr) {
        try {
            if (ptr) std::rethrow_exception(ptr);
        } catch (const Error& e) {
            if (is_input_error(e.code())) {
                PyErr_SetString(PyExc_ValueError, e.what());
            } else {
                py::set_error(numerical_error, e.what());
            }
        }
    });

    py::class_<EstimatorOptions>(m, "EstimatorOptions")
        .def(py::init<>())
        .def_readwrite("K", &EstimatorOptions::K)
        .def_readwrite("I", &EstimatorOptions::I)
        .def_readwrite("d", &EstimatorOptions::d)
        .def_readwrite("ode_steps", &EstimatorOptions::ode_steps)
        .def_readwrite("second_derivative", &EstimatorOptions::second_derivative);

    py::class_<SscpPair>(m, "SscpPair")
        .def_readonly("W1", &SscpPair::W1)
        .def_readonly("W2", &SscpPair::W2)
        .def_readonly("n1", &SscpPair::n1)
        .def_readonly("n2", &SscpPair::n2)
        .def_readonly("w2_eigs", &SscpPair::w2_eigs)
        .def_property_readonly("p", &SscpPair::p);

    py::class_<LargestRootResult>(m, "LargestRootResult")
        .def_readonly("lambda_", &LargestRootResult::lambda)
        .def_readonly("ell_max", &LargestRootResult::ell_max)
        .def_readonly("top_k", &LargestRootResult::top_k);

    py::class_<EdgeParams>(m, "EdgeParams")
        .def_readonly("lambda_", &EdgeParams::lambda)
        .def_readonly("rho", &EdgeParams::rho)
        .def_readonly("beta", &EdgeParams::beta)
        .def_readonly("theta1", &EdgeParams::theta1)
        .def_readonly("theta2", &EdgeParams::theta2)
        .def_readonly("is_discrete_edge", &EdgeParams::is_discrete_edge)
        .def("__repr__", [](const EdgeParams& e) {
            return "EdgeParams(lambda=" + format_double(e.lambda) + ", theta1=" + format_double(e.theta1) +
                   ", theta2=" + format_double(e.theta2) + ")";
        });

    py::class_<TestReport>(m, "TestReport")
        .def_readonly("lambda_", &TestReport::lambda)
        .def_readonly("ell_max", &TestReport::ell_max)
        .def_readonly("theta1", &TestReport::theta1)
        .def_readonly("theta2", &TestReport::theta2)
        .def_readonly("statistic", &TestReport::statistic)
        .def_readonly("p_value", &TestReport::p_value)
        .def_readonly("reject_at", &TestReport::reject_at);

    m.def("make_sscp", &make_sscp, py::arg("W1"), py::arg("W2"), py::arg("n1"), py::arg("n2"));
    m.def(
        "build_sscp",
        [](const MatrixXd& Y, const MatrixXd& X, const std::optional<MatrixXd>& C) {
            return build_sscp(to_model(Y, X, C));
        },
        py::arg("Y"), py::arg("X"), py::arg("C") = py::none(),
        "W1 and W2 from responses Y (p x n), design X (m x n) and constraints C (m x n1, default I).");
    m.def("largest_root", &largest_root, py::arg("sscp"), py::arg("lam"), py::arg("k") = 1);

    m.def(
        "estimate_edge_params",
        [](const SscpPair& sscp, double lam, const EstimatorOptions& opt) {
            return estimate_edge_params(make_spectrum_view(sscp), lam, opt).params;
        },
        py::arg("sscp"), py::arg("lam"), py::arg("options") = EstimatorOptions{});
    m.def("oracle_edge_params", &oracle_edge_params, py::arg("sigma_eigs"), py::arg("lam"), py::arg("gamma1"),
          py::arg("gamma2"), py::arg("options") = EstimatorOptions{});

    m.def("tw1_cdf", &tw1_cdf, py::arg("x"));
    m.def("tw1_quantile", &tw1_quantile, py::arg("prob"));

    m.def(
        "test",
        [](const SscpPair& sscp, double lam, const std::vector<double>& alphas, const EstimatorOptions& opt) {
            const EdgeParams params = estimate_edge_params(make_spectrum_view(sscp), lam, opt).params;
            return standardized_test(largest_root(sscp, lam), params, sscp.p(), alphas);
        },
        py::arg("sscp"), py::arg("lam"), py::arg("alphas") = std::vector<double>{0.05},
        py::arg("options") = EstimatorOptions{});

    m.def(
        "select_lambda",
        [](const SscpPair& sscp, const std::string& prior, int grid_size, const EstimatorOptions& opt) {
            SelectOptions so;
            so.grid_size = grid_size;
            so.estimator = opt;
            return select_lambda(make_spectrum_view(sscp), &sscp, prior_from_name(prior), so).lambda_opt;
        },
        py::arg("sscp"), py::arg("prior") = "I", py::arg("grid_size") = 25, py::arg("options") = EstimatorOptions{});

    m.def(
        "run_experiment",
        [](const std::string& spec_json) {
            const ExperimentSpec spec = spec_from_json(json::parse(spec_json));
            ExperimentResult result;
            {
                py::gil_scoped_release release;
                result = run_experiment(spec);
            }
            return to_json(result).dump();
        },
        py::arg("spec_json"), "Run a simulation spec given as JSON text; returns the result as JSON text.");
}
