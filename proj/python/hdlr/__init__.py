"""Python bindings for the hdlr C++ core."""

import json

from ._core import (
    EdgeParams,
    EstimatorOptions,
    LargestRootResult,
    NumericalError,
    SscpPair,
    TestReport,
    build_sscp,
    estimate_edge_params,
    largest_root,
    make_sscp,
    oracle_edge_params,
    select_lambda,
    test,
    tw1_cdf,
    tw1_quantile,
)
from ._core import run_experiment as _run_experiment


def run_experiment(spec):
    """Run a simulation spec (dict or JSON string) and return the parsed result."""
    text = spec if isinstance(spec, str) else json.dumps(spec)
    return json.loads(_run_experiment(text))


__all__ = [
    "EdgeParams",
    "EstimatorOptions",
    "LargestRootResult",
    "NumericalError",
    "SscpPair",
    "TestReport",
    "build_sscp",
    "estimate_edge_params",
    "largest_root",
    "make_sscp",
    "oracle_edge_params",
    "run_experiment",
    "select_lambda",
    "test",
    "tw1_cdf",
    "tw1_quantile",
]
