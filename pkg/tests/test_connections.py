"""The connection triple: tables, basicness, torsion/metricity, curvature."""

import numpy as np

import finslerlab.connections as cn
from finslerlab.jets import TangentPoint
from finslerlab.metrics import FinslerMetric, metric_matrices, sample_points
from finslerlab.spray import Workspace, bracket, components_values

from helpers import randers2, randers3, riemann2


def ws_of(M, count=40, seed=17):
    x, y = sample_points(M, count, seed)
    return Workspace(M, x, y, order=4)


def test_riemannian_vertical_table_vanishes():
    ws = ws_of(riemann2())
    assert np.abs(cn.vranceanu_values(ws)["C"]).max() <= 1e-12


def test_euclidean_tables_all_zero():
    ws = ws_of(FinslerMetric.euclidean(3))
    tables = cn.vranceanu_values(ws)
    for key in ("C", "Gc", "Fc"):
        assert np.abs(tables[key]).max() <= 1e-14


def test_table_structure_residuals():
    ws = ws_of(randers3())
    res = cn.vranceanu_structure_residuals(ws)
    assert res["c_symmetry"].max() == 0.0
    assert res["c_radial"].max() <= 1e-10
    assert res["c_radial_trace"].max() <= 1e-10
    assert res["fc_symmetry"].max() <= 1e-10


def test_horizontal_table_matches_fd_assembly():
    """Fc from finite differences of g (with the AD nonlinear connection
    supplying the horizontal transport term) agrees with the jet route."""
    M = randers2()
    x0 = np.array([0.3, -0.4])
    y0 = np.array([1.1, 0.7])
    ws = Workspace(M, x0[None, :], y0[None, :], order=4)
    Fc = cn.vranceanu_values(ws)["Fc"][0]
    h = 1e-5
    n = 2

    def gmat(x, y):
        return metric_matrices(M, x[None, :], y[None, :])[0][0]

    dgx = np.zeros((n, n, n))
    dgy = np.zeros((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        dgx[:, :, k] = (gmat(x0 + e, y0) - gmat(x0 - e, y0)) / (2 * h)
        dgy[:, :, k] = (gmat(x0, y0 + e) - gmat(x0, y0 - e)) / (2 * h)
    delta_g = dgx - np.einsum("lk,ijl->ijk", ws.N_val[0], dgy)
    ginv = np.linalg.inv(gmat(x0, y0))
    Fc_fd = np.zeros((n, n, n))
    for k in range(n):
        for i in range(n):
            for j in range(n):
                s = 0.0
                for l in range(n):
                    s += ginv[k, l] * (delta_g[i, l, j] + delta_g[j, l, i] - delta_g[i, j, l])
                Fc_fd[k, i, j] = 0.5 * s
    assert np.abs(Fc - Fc_fd).max() <= 1e-6


def test_vranceanu_basicness():
    rng = np.random.default_rng(1)
    assert cn.vranceanu_basic_residuals(ws_of(FinslerMetric.euclidean(2)), rng).max() <= 1e-11
    assert cn.vranceanu_basic_residuals(ws_of(randers2()), rng).max() <= 1e-7


def test_vaisman_table_structural_values():
    va = cn.vaisman(randers2(), TangentPoint([0.2, -0.3], [1.0, 0.6]))
    assert va.radial_bar == -1.0
    assert va.radial_radial == 1.0
    assert np.all(va.bar_radial == 0.0)
    assert np.all(va.horizontal_radial == 0.0)
    assert va.s_bar.shape == (1, 1, 1)
    assert va.beta.shape == (2, 1, 1)
    assert va.dropped not in va.kept


def test_vaisman_line_display():
    for M in (FinslerMetric.euclidean(2), randers3()):
        assert cn.vaisman_line_residuals(ws_of(M)).max() <= 1e-10


def test_vaisman_defining_conditions():
    ws = ws_of(randers3())
    vs = cn.solve_vaisman(ws)
    res = cn.vaisman_condition_residuals(ws, vs)
    assert res["splitting"].max() <= 1e-9
    assert res["torsion_indicatrix"].max() <= 1e-7
    assert res["torsion_radial"].max() <= 1e-7
    assert res["torsion_mixed"].max() <= 1e-7
    assert res["metric_indicatrix"].max() <= 1e-8
    assert res["metric_radial"].max() <= 1e-10


def test_euclidean_round_indicatrix_oracle():
    """Flat case oracle (derived by hand from the Koszul formula on the round
    indicatrix): nabla_{bar_a} bar_q = -t_q bar_a, all mixed terms zero."""
    for n in (2, 3):
        ws = ws_of(FinslerMetric.euclidean(n))
        vs = cn.solve_vaisman(ws)
        tables = cn.vranceanu_values(ws)
        assert cn.euclidean_table_residuals(ws, vs, tables).max() <= 1e-10


def test_vaisman_basic_zero_lift_euclidean():
    """The defining display with the zero lift: nabla_Gamma Z = pi_0[Gamma, Z]."""
    M = FinslerMetric.euclidean(2)
    ws = ws_of(M, count=20)
    vs = cn.solve_vaisman(ws)
    rng = np.random.default_rng(4)
    zeta = [cn.random_poly_jet(ws, rng) for _ in range(2)]
    gamma = ws.vf_gamma()
    lhs = cn.apply_vaisman(ws, vs, gamma, zeta)
    bars = [ws.vf_bar(k) for k in range(2)]
    from finslerlab.spray import add_fields, scale_field

    Z = add_fields(*(scale_field(zeta[k], bars[k]) for k in range(2)))
    w = ws.project_off_gamma(components_values(bracket(gamma, Z), ws.B))
    assert np.abs(np.concatenate([np.zeros((ws.B, 2)), lhs], axis=1) - w).max() <= 1e-11


def test_vaisman_basic_and_lift_independence():
    ws = ws_of(randers3())
    vs = cn.solve_vaisman(ws)
    res = cn.vaisman_basic_residuals(ws, vs, np.random.default_rng(2))
    assert res["basic"].max() <= 1e-8
    assert res["lift_independence"].max() <= 1e-10


def test_composite_line_displays():
    res = cn.composite_line_residuals(ws_of(randers3()))
    assert res["horizontal_display"].max() <= 1e-10
    assert res["vertical_display"].max() <= 1e-10


def test_composite_basicness():
    ws = ws_of(randers3())
    vs = cn.solve_vaisman(ws)
    Fc = cn.vranceanu_values(ws)["Fc"]
    res = cn.composite_basic_residuals(ws, vs, Fc, np.random.default_rng(3))
    assert res["basic"].max() <= 1e-7
    assert res["lift_independence"].max() <= 1e-10


def test_splitting_compatibility():
    for M in (riemann2(), randers3()):
        ws = ws_of(M)
        vs = cn.solve_vaisman(ws)
        Fc = cn.vranceanu_values(ws)["Fc"]
        res = cn.splitting_compatibility_residuals(ws, vs, Fc, np.random.default_rng(5))
        assert res["vertical_embedding"].max() <= 1e-9
        assert res["horizontal_projection"].max() <= 1e-12


def test_line_curvature_vanishes():
    assert cn.line_curvature_residuals(ws_of(FinslerMetric.euclidean(2)), np.random.default_rng(6)).max() <= 1e-10
    assert cn.line_curvature_residuals(ws_of(randers3()), np.random.default_rng(7)).max() <= 1e-7


def test_line_curvature_constant_coefficients_exact():
    """With a = b = 1 the two iterated derivatives are identical computations
    and the commutator coefficient vanishes, so K = 0 exactly."""
    ws = ws_of(randers2(), count=10)
    rng = np.random.default_rng(8)
    n = 2
    H = [cn.random_poly_jet(ws, rng, order=3) for _ in range(n)]
    zeta = [cn.random_poly_jet(ws, rng, order=3) for _ in range(n)]

    def d_gamma(Hc, zc):
        return [cn.gamma_of(ws, h) for h in Hc], [cn.gamma_of(ws, z) - z for z in zc]

    H1, z1 = d_gamma(H, zeta)
    HXY, zXY = d_gamma(H1, z1)
    KH = np.stack([(HXY[i] - HXY[i]).value for i in range(n)], axis=1)
    assert np.abs(KH).max() == 0.0


def test_per_point_check_apis():
    M = randers2()
    p = TangentPoint([0.2, -0.1], [0.9, 1.1])
    out = cn.check_vranceanu_basic(M, p)
    assert out["structural"] == 0.0 and out["general"] <= 1e-7
    out = cn.check_vaisman_basic(M, p)
    assert out["line_display"] <= 1e-10 and out["basic"] <= 1e-8
    out = cn.check_composite_basic(M, p)
    assert out["horizontal_display"] <= 1e-10 and out["basic"] <= 1e-7
    out = cn.splitting_compatibility(M, p)
    assert out["vertical_embedding"] <= 1e-9
    assert cn.curvature_on_line(M, p) <= 1e-7
    table = cn.composite_connection(M, p)
    assert table.bundle == "radial_complement"
    assert table.coefficients["radial_indicatrix"] == -1.0
