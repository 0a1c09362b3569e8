"""Spray coefficients, nonlinear connection, frames, brackets, geodesics."""

import numpy as np
import pytest

from finslerlab.errors import ChartExitError
from finslerlab.jets import TangentPoint
from finslerlab.metrics import FinslerMetric, sample_points
from finslerlab.spray import (
    Workspace,
    bracket,
    components_values,
    horizontal_frame,
    integrate_geodesic,
    nonlinear_curvature,
    spray,
    spray_values,
)

from helpers import christoffel_spray_oracle, randers2, riemann2, riemann2_amatrix


def test_euclidean_spray_vanishes():
    S = spray(FinslerMetric.euclidean(2), TangentPoint([0.1, 0.2], [3.0, 4.0]))
    assert np.abs(S.G).max() == 0.0
    assert np.abs(S.N).max() == 0.0
    assert np.abs(S.dN).max() == 0.0


def test_riemannian_spray_matches_christoffel_oracle():
    M = riemann2()
    for seed in (0, 1):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-0.8, 0.8, 2)
        y = rng.uniform(0.5, 1.5, 2)
        S = spray(M, TangentPoint(x, y))
        G_oracle = christoffel_spray_oracle(riemann2_amatrix, x, y)
        assert np.abs(S.G - G_oracle).max() <= 1e-6


def test_nonlinear_connection_matches_fd_of_spray():
    M = randers2()
    x = np.array([0.3, -0.4])
    y = np.array([1.2, 0.7])
    S = spray(M, TangentPoint(x, y))
    h = 1e-5
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (spray_values(M, x[None], (y + e)[None])[0] - spray_values(M, x[None], (y - e)[None])[0]) / (2 * h)
        fd2 = (spray_values(M, x[None], (y + e / 2)[None])[0] - spray_values(M, x[None], (y - e / 2)[None])[0]) / h
        rich = (4 * fd2 - fd) / 3
        assert np.abs(S.N[:, i] - rich).max() <= 1e-6


def test_spray_homogeneity():
    M = randers2()
    x, y = sample_points(M, 40, 3)
    ws1 = Workspace(M, x, y, order=3)
    ws2 = Workspace(M, x, 2.0 * y, order=3)
    assert np.abs(ws2.G_val - 4.0 * ws1.G_val).max() / np.abs(ws1.G_val).max() <= 1e-9
    assert np.abs(ws2.N_val - 2.0 * ws1.N_val).max() / np.abs(ws1.N_val).max() <= 1e-9


def test_connection_radial_homogeneity():
    M = randers2()
    x, y = sample_points(M, 40, 4)
    ws = Workspace(M, x, y, order=4)
    contracted = np.einsum("bjik,bk->bji", ws.dN_val, y)
    assert np.abs(contracted - ws.N_val).max() <= 1e-9 * (1 + np.abs(ws.N_val).max())


def test_frame_coframe_duality():
    M = randers2()
    S = spray(M, TangentPoint([0.3, -0.4], [1.2, 0.7]))
    fr = horizontal_frame(S)
    assert np.abs(fr.coframe @ fr.frame.T - np.eye(4)).max() <= 1e-10
    E = spray(FinslerMetric.euclidean(2), TangentPoint([0.0, 0.0], [1.0, 0.0]))
    fe = horizontal_frame(E)
    assert np.array_equal(fe.rows, np.concatenate([np.eye(2), np.zeros((2, 2))], axis=1))


def test_nonlinear_curvature_flat_cases():
    assert np.abs(nonlinear_curvature(FinslerMetric.euclidean(3), TangentPoint([0.0] * 3, [1.0, 2.0, 0.3]))).max() == 0.0
    M = FinslerMetric.riemannian(2, [[2.0, 0.3], [0.3, 1.5]])  # constant coefficients
    R = nonlinear_curvature(M, TangentPoint([0.2, 0.1], [1.0, -0.5]))
    assert np.abs(R).max() <= 1e-12


def test_nonlinear_curvature_vs_bracket():
    M = randers2()
    x, y = sample_points(M, 30, 6)
    ws = Workspace(M, x, y, order=4)
    R = ws.R_val
    for i in range(2):
        for j in range(i + 1, 2):
            w = components_values(bracket(ws.vf_dx(i), ws.vf_dx(j)), ws.B)
            assert np.abs(w[:, :2]).max() <= 1e-12
            assert np.abs(w[:, 2:] + R[:, :, i, j]).max() <= 1e-7


def test_curvature_antisymmetry_exact():
    M = randers2()
    R = nonlinear_curvature(M, TangentPoint([0.3, -0.4], [1.2, 0.7]))
    assert np.array_equal(R, -R.transpose(0, 2, 1))


def test_radial_horizontal_commutator():
    M = randers2()
    x, y = sample_points(M, 30, 7)
    ws = Workspace(M, x, y, order=4)
    gamma = ws.vf_gamma()
    for i in range(2):
        w = components_values(bracket(gamma, ws.vf_dx(i)), ws.B)
        assert np.abs(w).max() <= 1e-8


def test_vertical_bracket_containment():
    M = randers2()
    x, y = sample_points(M, 30, 7)
    ws = Workspace(M, x, y, order=4)
    for i in range(2):
        for j in range(2):
            w = components_values(bracket(ws.vf_dy(j), ws.vf_dx(i)), ws.B)
            assert np.abs(ws.horizontal_part_values(w)).max() <= 1e-10


def test_geodesic_euclidean_straight_line():
    M = FinslerMetric.euclidean(2)
    res = integrate_geodesic(M, TangentPoint([0.0, 0.0], [0.3, 0.1]), 100, 1e-2)
    assert res.drift <= 1e-12
    assert np.abs(res.x[-1] - np.array([0.3, 0.1])).max() <= 1e-12
    assert res.t[-1] == pytest.approx(1.0)


def test_geodesic_riemannian_drift_small():
    M = riemann2()
    res = integrate_geodesic(M, TangentPoint([0.0, 0.0], [0.6, 0.4]), 1000, 1e-3)
    assert res.drift <= 1e-8


def test_geodesic_reversal_retraces():
    M = riemann2()
    fwd = integrate_geodesic(M, TangentPoint([0.0, 0.0], [0.6, 0.4]), 400, 1e-3)
    back = integrate_geodesic(M, TangentPoint(fwd.x[-1], -fwd.y[-1]), 400, 1e-3)
    assert np.abs(back.x[-1] - np.array([0.0, 0.0])).max() <= 1e-8
    assert np.abs(back.y[-1] + np.array([0.6, 0.4])).max() <= 1e-8


def test_geodesic_fourth_order_drift():
    M = riemann2()
    p0 = TangentPoint([0.05, -0.1], [1.5, 1.4])
    T = 0.4
    drifts = [integrate_geodesic(M, p0, int(round(T / dt)), dt).drift for dt in (1e-2, 5e-3, 2.5e-3)]
    for a, b in zip(drifts, drifts[1:]):
        assert 8.0 <= a / b <= 32.0  # 2^4 within a factor 2


def test_geodesic_chart_exit():
    M = FinslerMetric.euclidean(2)
    with pytest.raises(ChartExitError) as err:
        integrate_geodesic(M, TangentPoint([0.9, 0.0], [1.0, 0.0]), 1000, 1e-2)
    assert err.value.last_valid_index >= 9


def test_geodesic_argument_validation():
    M = FinslerMetric.euclidean(2)
    with pytest.raises(ValueError):
        integrate_geodesic(M, TangentPoint([0.0, 0.0], [1.0, 0.0]), 10, 0.0)
    with pytest.raises(ValueError):
        integrate_geodesic(M, TangentPoint([0.0, 0.0], [1.0, 0.0]), 0, 1e-3)
