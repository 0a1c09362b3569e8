"""Sasaki lift, almost complex structure, and the almost-Kahler form.

The Sasaki metric is block-diagonal (g, g) in the adapted frame
{delta/delta x, d/dy}; J swaps the blocks (J delta/delta x^i = -d/dy^i,
J d/dy^i = delta/delta x^i).  The fundamental 2-form is assembled two ways:
invariantly as Omega(X, Y) = G(JX, Y), and from the local expression
Omega = g_ij delta-y^i wedge dx^j; both are compared in the checks.

Closedness of Omega is tested pointwise through the frame-field formula
  d Omega(X,Y,Z) = X Omega(Y,Z) - Y Omega(X,Z) + Z Omega(X,Y)
                   - Omega([X,Y],Z) + Omega([X,Z],Y) - Omega([Y,Z],X)
with jet-differentiated coefficients, reusing the bracket engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .jets import TangentPoint
from .metrics import FinslerMetric
from .spray import Workspace, bracket, components_values, workspace_at


def coordinate_metric(ws: Workspace) -> np.ndarray:
    """Sasaki metric in the coordinate frame: B^T diag(g, g) B with
    B = [[I, 0], [N, I]] the coordinate-to-adapted component map."""
    B, n = ws.B, ws.n
    ident = np.broadcast_to(np.eye(n), (B, n, n))
    zero = np.zeros((B, n, n))
    Bmat = np.block([[ident, zero], [ws.N_val, ident]])
    Gd = np.block([[ws.g_val, zero], [zero, ws.g_val]])
    return np.einsum("bki,bkl,blj->bij", Bmat, Gd, Bmat)


def complex_structure_matrix(ws: Workspace) -> np.ndarray:
    """J acting on coordinate components: blocks [[N, I], [-(N^2 + I), -N]]."""
    B, n = ws.B, ws.n
    ident = np.broadcast_to(np.eye(n), (B, n, n))
    NN = np.einsum("bij,bjk->bik", ws.N_val, ws.N_val)
    return np.block([[ws.N_val, ident], [-(NN + ident), -ws.N_val]])


def adapted_metric(ws: Workspace) -> np.ndarray:
    """Sasaki metric in the adapted frame: blockdiag(g, g)."""
    B, n = ws.B, ws.n
    zero = np.zeros((B, n, n))
    return np.block([[ws.g_val, zero], [zero, ws.g_val]])


def adapted_frame_rows(ws: Workspace) -> np.ndarray:
    """Coordinate components of {delta/delta x_i, d/dy_i}: (B, 2n, 2n)."""
    B, n = ws.B, ws.n
    ident = np.broadcast_to(np.eye(n), (B, n, n))
    zero = np.zeros((B, n, n))
    return np.block([[ident, -ws.N_val.transpose(0, 2, 1)], [zero, ident]])


def kahler_adapted(ws: Workspace) -> np.ndarray:
    """Omega in the adapted frame: [[0, -g], [g, 0]] (antisymmetric exactly,
    because g is exactly symmetric)."""
    B, n = ws.B, ws.n
    zero = np.zeros((B, n, n))
    return np.block([[zero, -ws.g_val], [ws.g_val, zero]])


def kahler_coordinate_invariant(ws: Workspace) -> np.ndarray:
    """Coordinate matrix of Omega from Omega(X, Y) = G(JX, Y)."""
    Jc = complex_structure_matrix(ws)
    Gc = coordinate_metric(ws)
    return np.einsum("bki,bkj->bij", Jc, Gc)


def kahler_coordinate_local(ws: Workspace) -> np.ndarray:
    """Coordinate matrix of Omega from g_ij delta-y^i wedge dx^j."""
    B, n = ws.B, ws.n
    C = np.einsum("bia,bic->bac", ws.N_val, ws.g_val)  # (N^T g)_{ab}
    zero = np.zeros((B, n, n))
    return np.block([[C - C.transpose(0, 2, 1), -ws.g_val], [ws.g_val, zero]])


# -- residual engines -------------------------------------------------------------


def sasaki_residuals(ws: Workspace) -> dict:
    gamma = ws.gamma_values()
    res = {}
    res["radial_norm"] = np.abs(ws.sasaki_values(gamma, gamma) - ws.L_val) / ws.L_val
    rows = adapted_frame_rows(ws)
    Gc = coordinate_metric(ws)
    back = np.einsum("bai,bij,bcj->bac", rows, Gc, rows)
    res["coordinate_roundtrip"] = np.abs(back - adapted_metric(ws)).max(axis=(1, 2)) / ws.L_val
    return res


def kahler_residuals(ws: Workspace, pairs: int = 20, seed: int = 5) -> dict:
    B, n = ws.B, ws.n
    res = {}
    om_inv = kahler_coordinate_invariant(ws)
    om_loc = kahler_coordinate_local(ws)
    res["two_assemblies"] = np.abs(om_inv - om_loc).max(axis=(1, 2)) / ws.L_val
    om_ad = kahler_adapted(ws)
    res["antisymmetry"] = np.abs(om_ad + om_ad.transpose(0, 2, 1)).max(axis=(1, 2))
    det_om = np.linalg.det(om_loc)
    det_g = np.linalg.det(coordinate_metric(ws))
    res["volume_identity"] = np.abs(np.abs(det_om) - det_g) / np.abs(det_g)

    rng = np.random.default_rng(seed)
    u = rng.normal(size=(pairs, 2 * n))
    w = rng.normal(size=(pairs, 2 * n))
    lhs = np.einsum("pi,bij,qj->bpq", u, om_loc, w)
    Jc = complex_structure_matrix(ws)
    Gc = coordinate_metric(ws)
    rhs = np.einsum("bki,pi,bkj,qj->bpq", Jc, u, Gc, w)
    scale = np.abs(rhs).max(axis=(1, 2)) + ws.L_val
    diff = np.abs(lhs - rhs).max(axis=(1, 2))
    res["pairing_random"] = diff / scale
    return res


def compatibility_residuals(ws: Workspace) -> dict:
    """J-compatibility of G on frame pairs and pointwise closedness of Omega."""
    B, n = ws.B, ws.n
    rows = adapted_frame_rows(ws)
    Jc = complex_structure_matrix(ws)
    Gc = coordinate_metric(ws)
    jrows = np.einsum("bai,bji->baj", rows, Jc)
    gram = np.einsum("bai,bij,bcj->bac", rows, Gc, rows)
    jgram = np.einsum("bai,bij,bcj->bac", jrows, Gc, jrows)
    res = {"j_compatibility": np.abs(jgram - gram).max(axis=(1, 2)) / ws.L_val}

    fields = [ws.vf_dx(i) for i in range(n)] + [ws.vf_dy(i) for i in range(n)]
    dim = 2 * n
    bracket_val = {}
    for i, j in combinations(range(dim), 2):
        bracket_val[(i, j)] = components_values(bracket(fields[i], fields[j]), B)

    def om_jet(i, j):
        """Omega on adapted frame pairs: the mixed blocks are +-g_ij, the
        pure blocks vanish identically (Sasaki block-diagonality and J)."""
        if i < n <= j:
            return -1.0, ws.g[i][j - n]
        if j < n <= i:
            return 1.0, ws.g[j][i - n]
        return None

    def dir_term(k, pair):
        if pair is None:
            return 0.0
        sign, gij = pair
        return sign * ws.directional(fields[k], gij).value

    om_mat = kahler_coordinate_invariant(ws)

    def om_with(wv, k):
        rk = rows[:, k, :]
        return np.einsum("bi,bij,bj->b", wv, om_mat, rk)

    worst = np.zeros(B)
    for a, b, c in combinations(range(dim), 3):
        term = dir_term(a, om_jet(b, c)) - dir_term(b, om_jet(a, c)) + dir_term(c, om_jet(a, b))
        term = term - om_with(bracket_val[(a, b)], c)
        term = term + om_with(bracket_val[(a, c)], b)
        term = term - om_with(bracket_val[(b, c)], a)
        worst = np.maximum(worst, np.abs(term))
    res["closedness"] = worst
    return res


# -- public per-point API -----------------------------------------------------------


@dataclass(frozen=True)
class SasakiMetric:
    """The lifted metric at one point, in adapted and coordinate frames."""

    adapted: np.ndarray  # (2n, 2n) blockdiag(g, g)
    coordinate: np.ndarray  # (2n, 2n)
    at: TangentPoint


def sasaki(M: FinslerMetric, p: TangentPoint) -> SasakiMetric:
    ws = workspace_at(M, p)
    return SasakiMetric(adapted=adapted_metric(ws)[0], coordinate=coordinate_metric(ws)[0], at=p)


def kahler_form(M: FinslerMetric, p: TangentPoint) -> np.ndarray:
    """Omega in the adapted frame (antisymmetric exactly); the local and
    invariant coordinate assemblies are compared in compatibility_checks."""
    ws = workspace_at(M, p)
    return kahler_adapted(ws)[0]


def compatibility_checks(M: FinslerMetric, p: TangentPoint) -> dict:
    ws = workspace_at(M, p)
    out = {k: float(v[0]) for k, v in sasaki_residuals(ws).items()}
    out.update({k: float(v[0]) for k, v in kahler_residuals(ws).items()})
    out.update({k: float(v[0]) for k, v in compatibility_residuals(ws).items()})
    return out
