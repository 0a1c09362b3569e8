"""Metric families, the fundamental tensor, and the config loader."""

import json
import warnings

import numpy as np
import pytest

from finslerlab.errors import ConfigError, DegenerateMetricError
from finslerlab.jets import ScalarField, TangentPoint, fd_oracle
from finslerlab.metrics import (
    FinslerMetric,
    Poly,
    euler_identities,
    euler_residuals,
    fundamental_tensor,
    load_metric,
    metric_matrices,
    sample_points,
)

from helpers import randers2, riemann2, riemann2_amatrix


def test_euclidean_g_is_identity():
    M = FinslerMetric.euclidean(3)
    ft = fundamental_tensor(M, TangentPoint([0.0, 0.0, 0.0], [3.0, 4.0, 0.5]))
    assert np.abs(ft.g - np.eye(3)).max() < 1e-14
    assert np.abs(ft.g @ ft.g_inv - np.eye(3)).max() < 1e-10


def test_riemannian_g_equals_coefficient_matrix():
    M = riemann2()
    x = np.array([0.4, -0.7])
    for y in ([1.0, 0.2], [-0.3, 1.4]):
        ft = fundamental_tensor(M, TangentPoint(x, y))
        assert np.abs(ft.g - riemann2_amatrix(x)).max() < 1e-12


def test_randers_g_matches_fd_hessian():
    M = randers2()
    p = TangentPoint([0.3, -0.5], [1.1, 0.6])
    ft = fundamental_tensor(M, p)
    half_f2 = ScalarField(2, lambda x, y: 0.5 * M.evaluate(x, y) * M.evaluate(x, y))
    for i in range(2):
        for j in range(2):
            fd = fd_oracle(half_f2, p, [f"y{i}", f"y{j}"])
            assert ft.g[i, j] == pytest.approx(fd, rel=1e-6)


def test_euler_identities_euclidean():
    M = FinslerMetric.euclidean(2)
    rep = euler_identities(M, TangentPoint([0.0, 0.0], [3.0, 4.0]))
    assert rep.norm_residual <= 1e-12
    assert rep.gradient_residual <= 1e-12
    assert rep.vertical_residual <= 1e-12


def test_euler_identities_randers_sampled():
    M = randers2()
    x, y = sample_points(M, 200, 5)
    r1, r2, r3 = euler_residuals(M, x, y)
    assert max(r1.max(), r2.max(), r3.max()) <= 1e-10


def test_g_zero_homogeneous_in_y():
    M = randers2()
    x, y = sample_points(M, 50, 8)
    g0, _ = metric_matrices(M, x, y)
    for lam in (0.5, 2.0):
        g1, _ = metric_matrices(M, x, lam * y)
        assert np.abs(g1 - g0).max() / np.abs(g0).max() <= 1e-10


def test_riemannian_g_independent_of_y():
    M = riemann2()
    x, y = sample_points(M, 50, 9)
    g0, _ = metric_matrices(M, x, y)
    g1, _ = metric_matrices(M, x, np.roll(y, 1, axis=1) + 0.3)
    assert np.abs(g1 - g0).max() <= 1e-12


def test_degenerate_metric_error_names_point():
    # rank-one quadratic form: g is singular everywhere it is defined
    M = FinslerMetric.custom(2, lambda x, y: (y[0] * y[0]) ** 0.5 if isinstance(y[0], float) else (y[0] * y[0]).sqrt())
    with pytest.raises(DegenerateMetricError, match="x="):
        metric_matrices(M, np.array([[0.0, 0.0]]), np.array([[1.0, 0.5]]))


def test_load_metric_examples():
    M = load_metric({"family": "euclidean", "n": 3})
    assert M.family == "euclidean" and M.n == 3
    M = load_metric({"family": "randers", "n": 2, "a": [[1, 0], [0, 1]], "b": [0.3, 0]})
    assert M.family == "randers"


def test_load_metric_json_string():
    M = load_metric(json.dumps({"family": "euclidean", "n": 2}))
    assert M.n == 2


def test_load_metric_rejections():
    with pytest.raises(ConfigError, match="convexity"):
        load_metric({"family": "randers", "n": 2, "a": [[1, 0], [0, 1]], "b": [1.5, 0]})
    with pytest.raises(ConfigError, match="unknown config fields"):
        load_metric({"family": "euclidean", "n": 2, "extra": 1})
    with pytest.raises(ConfigError, match="unknown family"):
        load_metric({"family": "kropina", "n": 2})
    with pytest.raises(ConfigError, match="2x2"):
        load_metric({"family": "riemannian", "n": 2, "a": [[1, 0]]})
    with pytest.raises(ConfigError, match="degree"):
        load_metric(
            {
                "family": "riemannian",
                "n": 2,
                "a": [
                    [{"poly": [{"coef": 1.0, "powers": [4, 0]}]}, 0],
                    [0, 1],
                ],
            }
        )
    with pytest.raises(ConfigError, match="JSON"):
        load_metric("{not json")


def test_probe_warns_on_inhomogeneous_custom_metric():
    bad = FinslerMetric.custom(2, lambda x, y: y[0] * y[0] + y[1] * y[1] + 1.0)

    import finslerlab.metrics as mt

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mt._probe_metric(bad)
    assert any("homogeneous" in str(w.message) for w in caught)


def test_sampling_policy():
    M = FinslerMetric.euclidean(3)
    x, y = sample_points(M, 500, 42)
    assert x.shape == (500, 3) and y.shape == (500, 3)
    assert np.all(np.abs(x) <= 1.0)
    r = np.linalg.norm(y, axis=1)
    assert np.all((r >= 0.5) & (r <= 2.0))
    x2, y2 = sample_points(M, 500, 42)
    assert np.array_equal(x, x2) and np.array_equal(y, y2)


def test_polynomial_coefficients_evaluate():
    p = Poly(2, ((2.0, (1, 1)), (1.0, (0, 0))))
    assert p([3.0, 4.0]) == 25.0
    assert p.degree() == 2
