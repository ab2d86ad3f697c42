import json
import os

import numpy as np
import pytest

import hdlr


def test_toy_sscp_and_root():
    sscp = hdlr.build_sscp(np.ones((1, 2)), np.ones((1, 2)), np.ones((1, 1)))
    assert sscp.p == 1
    assert sscp.W1[0, 0] == pytest.approx(2.0)
    assert sscp.W2[0, 0] == pytest.approx(0.0)
    assert hdlr.largest_root(sscp, 1.0).ell_max == pytest.approx(2.0)


def test_largest_root_matches_numpy():
    rng = np.random.default_rng(0)
    p = 8
    g1 = rng.standard_normal((p, 3))
    g2 = rng.standard_normal((p, 20))
    w1 = g1 @ g1.T / 3
    w2 = g2 @ g2.T / 20
    root = hdlr.largest_root(hdlr.make_sscp(w1, w2, 3, 20), 0.5, 3)
    ref = np.sort(np.linalg.eigvals(w1 @ np.linalg.inv(w2 + 0.5 * np.eye(p))).real)[::-1][:3]
    np.testing.assert_allclose(root.top_k, ref, rtol=1e-9, atol=1e-10)


def test_tw1_quantiles():
    assert hdlr.tw1_quantile(0.95) == pytest.approx(0.9793, abs=1e-3)
    assert hdlr.tw1_cdf(hdlr.tw1_quantile(0.5)) == pytest.approx(0.5, abs=1e-6)


def test_identity_oracle_closed_form():
    e = hdlr.oracle_edge_params(np.ones(50), 1.0, 0.5, 0.25)
    assert e.rho == pytest.approx(1.25, abs=1e-6)
    assert e.theta1 > 0 and e.theta2 > 0


def test_end_to_end_test_and_selection():
    rng = np.random.default_rng(1)
    p, n1, n2 = 40, 20, 80
    y = rng.standard_normal((p, n1 + n2))
    x = rng.standard_normal((n1, n1 + n2))
    sscp = hdlr.build_sscp(y, x)
    assert (sscp.n1, sscp.n2) == (n1, n2)
    opt = hdlr.EstimatorOptions()
    opt.K, opt.I = 100, 80
    report = hdlr.test(sscp, 1.0, [0.05, 0.01], opt)
    assert 0.0 <= report.p_value <= 1.0
    assert set(report.reject_at) == {0.05, 0.01}
    lam = hdlr.select_lambda(sscp, "Sigma", 5, opt)
    assert lam > 0


def test_errors_map_to_python_exceptions():
    sscp = hdlr.make_sscp(np.eye(2), np.eye(2), 1, 4)
    with pytest.raises(ValueError):
        hdlr.largest_root(sscp, -1.0)
    with pytest.raises(ValueError):
        hdlr.select_lambda(sscp, "nonsense")


def test_run_experiment_small_spec():
    spec_dir = os.environ.get("HDLR_SPEC_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "specs"))
    with open(os.path.join(spec_dir, "null_small.json")) as f:
        spec = json.load(f)
    spec["replicates"] = 4
    result = hdlr.run_experiment(spec)
    assert "schema_version" in result
    assert result["config"]["replicates"] == 4
