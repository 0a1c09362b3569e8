"""Liouville fields, the orthogonal vertical frame, and the adapted frame pack.

The vertical Liouville field Gamma = y^i d/dy^i and its horizontal image
xi = J Gamma generate the radial line distributions; the fields
bar_k = d/dy^k - t_k Gamma (with t_k = dF/dy^k / F) span the indicatrix
distribution orthogonal to Gamma inside the vertical bundle.  One of the n
bar-fields is dependent; we drop m = argmax |y^k| per point for conditioning.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .jets import TangentPoint
from .metrics import FinslerMetric
from .sasaki import complex_structure_matrix, coordinate_metric
from .spray import Workspace, bracket, components_values, workspace_at

# -- residual engines (batched over a Workspace) --------------------------------


def t_consistency_residuals(ws: Workspace) -> np.ndarray:
    """Agreement of the two expressions for t_k: y^i g_ki / F^2 vs dF/dy^k / F."""
    t_from_g = np.einsum("bi,bik->bk", ws.y, ws.g_val) / ws.L_val[:, None]
    yn = np.linalg.norm(ws.y, axis=1)
    return np.abs(t_from_g - ws.t_val).max(axis=1) * yn


def coefficient_identity_residuals(ws: Workspace) -> dict:
    """The six scalar identities satisfied by the t_k (dimensionless)."""
    n, yv = ws.n, ws.yvar
    y = ws.y
    yn = np.linalg.norm(y, axis=1)
    t = ws.t_val
    dt = np.stack(
        [np.stack([ws.t[l].deriv(yv(k)).value for k in range(n)], axis=1) for l in range(n)], axis=1
    )  # dt[b, l, k] = dt_l/dy^k
    gamma_t = np.einsum("blk,bk->bl", dt, y)  # Gamma(t_l)

    res = {}
    res["normalization"] = np.abs(np.einsum("bi,bi->b", y, t) - 1.0)
    res["radial_combination"] = np.abs(np.einsum("bk,bki->bi", y, ws.E_val)).max(axis=1)
    rhs = -2.0 * np.einsum("bk,bl->blk", t, t) + ws.g_val / ws.L_val[:, None, None]
    res["t_gradient"] = np.abs(dt - rhs).max(axis=(1, 2)) * yn**2
    res["t_radial_derivative"] = np.abs(gamma_t + t).max(axis=1) * yn
    res["t_gradient_contraction"] = np.abs(np.einsum("bj,bjk->bk", y, dt) + t).max(axis=1) * yn
    res["radial_pairing"] = np.abs(np.einsum("bi,bi->b", y, gamma_t) + 1.0)
    return res


def bar_bracket_residuals(ws: Workspace) -> dict:
    """Numeric brackets of the bar-frame vs their structural forms:
    [bar_i, bar_j] = t_i bar_j - t_j bar_i and [bar_i, Gamma] = bar_i."""
    n, B = ws.n, ws.B
    F = ws.F_val
    bars = [ws.vf_bar(k) for k in range(n)]
    bar_vals = np.stack([components_values(b, B) for b in bars], axis=1)  # (B, n, 2n)
    gamma = ws.vf_gamma()

    pair_res = np.zeros(B)
    for i in range(n):
        for j in range(i + 1, n):
            w = components_values(bracket(bars[i], bars[j]), B)
            structural = ws.t_val[:, i, None] * bar_vals[:, j] - ws.t_val[:, j, None] * bar_vals[:, i]
            pair_res = np.maximum(pair_res, np.abs(w - structural).max(axis=1))
    gamma_res = np.zeros(B)
    for i in range(n):
        w = components_values(bracket(bars[i], gamma), B)
        gamma_res = np.maximum(gamma_res, np.abs(w - bar_vals[:, i]).max(axis=1))
    return {"pair_brackets": pair_res * F, "radial_brackets": gamma_res * F}


def orthogonality_residuals(ws: Workspace) -> np.ndarray:
    """max_k |G(bar_k, Gamma)| / F^2."""
    inner = np.einsum("bij,bki,bj->bk", ws.g_val, ws.E_val, ws.y)
    return np.abs(inner).max(axis=1) / ws.L_val


def dependence_residuals(ws: Workspace) -> np.ndarray:
    """Residual of the dependent-field relation
    bar_m = -(1/y^m) sum_{a != m} y^a bar_a (componentwise)."""
    B, n = ws.B, ws.n
    m = ws.dropped_index
    ym = np.take_along_axis(ws.y, m[:, None], axis=1)[:, 0]
    Em = np.take_along_axis(ws.E_val, m[:, None, None], axis=1)[:, 0, :]
    total = np.einsum("ba,bai->bi", ws.y, ws.E_val)  # sum over all a of y^a bar_a
    rest = total - ym[:, None] * Em
    return np.abs(Em + rest / ym[:, None]).max(axis=1)


def bar_rank_ratios(ws: Workspace) -> np.ndarray:
    """Smallest/largest singular value of the kept coefficient rows."""
    kept = ws.kept_indices
    E_kept = np.take_along_axis(ws.E_val, kept[:, :, None], axis=1)
    sv = np.linalg.svd(E_kept, compute_uv=False)
    return sv[:, -1] / sv[:, 0]


# -- adapted frame pack ----------------------------------------------------------


def pack_rows(ws: Workspace):
    """Adapted frame rows (coordinate components) ordered
    {bar_delta_a (kept), xi, bar_a (kept), Gamma}: (B, 2n, 2n)."""
    B, n = ws.B, ws.n
    kept = ws.kept_indices
    E_kept = np.take_along_axis(ws.E_val, kept[:, :, None], axis=1)  # (B, n-1, n)
    bar_delta = np.concatenate([E_kept, -np.einsum("bai,bji->baj", E_kept, ws.N_val)], axis=2)
    xi = np.concatenate([ws.y, -np.einsum("bji,bi->bj", ws.N_val, ws.y)], axis=1)
    bar_rows = np.concatenate([np.zeros((B, n - 1, n)), E_kept], axis=2)
    gamma = np.concatenate([np.zeros((B, n)), ws.y], axis=1)
    return np.concatenate([bar_delta, xi[:, None, :], bar_rows, gamma[:, None, :]], axis=1)


def pack_residuals(ws: Workspace) -> dict:
    """Gram block-orthogonality and J-image residuals of the frame pack."""
    n = ws.n
    P = pack_rows(ws)
    Gc = coordinate_metric(ws)
    gram = np.einsum("bai,bij,bcj->bac", P, Gc, P)
    # zero out the four diagonal blocks {L'_xi, L_xi, L'_Gamma, L_Gamma}
    sizes = [n - 1, 1, n - 1, 1]
    off = gram.copy()
    start = 0
    for s in sizes:
        off[:, start : start + s, start : start + s] = 0.0
        start += s
    res_gram = np.abs(off).max(axis=(1, 2)) / ws.L_val

    Jc = complex_structure_matrix(ws)
    imaged = np.einsum("bai,bji->baj", P[:, n:, :], Jc)  # J of {bar kept, Gamma} rows
    res_j = np.abs(imaged - P[:, :n, :]).max(axis=(1, 2))
    return {"gram_offblock": res_gram, "j_images": res_j}


def pack_condition(ws: Workspace) -> np.ndarray:
    return np.linalg.cond(pack_rows(ws))


# -- Frobenius (involutivity) leakage ---------------------------------------------


def frobenius_residuals(ws: Workspace) -> dict:
    """Bracket leakage out of each integrable distribution, per point.

    Leakage is measured with the Sasaki metric and normalized by F^2 (for the
    Gamma-coefficient leakages) or F (for vector norms).
    """
    B, n = ws.B, ws.n
    F2 = ws.L_val
    gamma_vals = ws.gamma_values()
    bars = [ws.vf_bar(k) for k in range(n)]
    bar_deltas = [ws.vf_bar_delta(k) for k in range(n)]
    xi = ws.vf_xi()
    out = {}

    # vertical distribution: coordinate fields commute; leakage = horizontal part
    res = np.zeros(B)
    for i in range(n):
        for j in range(i + 1, n):
            w = components_values(bracket(ws.vf_dy(i), ws.vf_dy(j)), B)
            h = ws.horizontal_part_values(w)
            res = np.maximum(res, np.abs(h).max(axis=1))
    out["vertical"] = res

    # indicatrix distribution: leakage = Gamma coefficient of vertical brackets
    res = np.zeros(B)
    for i in range(n):
        for j in range(i + 1, n):
            w = components_values(bracket(bars[i], bars[j]), B)
            res = np.maximum(res, np.abs(ws.sasaki_values(w, gamma_vals)) / F2)
    out["indicatrix"] = res

    # level-set distribution (everything orthogonal to Gamma)
    fields = bar_deltas + [xi] + bars
    res = np.zeros(B)
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            w = components_values(bracket(fields[i], fields[j]), B)
            res = np.maximum(res, np.abs(ws.sasaki_values(w, gamma_vals)) / F2)
    out["level_set"] = res

    # line distributions: single spanning field, bracket with itself vanishes
    for name, f in (("radial_vertical", ws.vf_gamma()), ("radial_horizontal", xi)):
        w = components_values(bracket(f, f), B)
        out[name] = np.abs(w).max(axis=1)

    # plane spanned by Gamma and xi
    w = components_values(bracket(ws.vf_gamma(), xi), B)
    xi_vals = components_values(xi, B)
    leak = (
        w
        - (ws.sasaki_values(w, gamma_vals) / F2)[:, None] * gamma_vals
        - (ws.sasaki_values(w, xi_vals) / F2)[:, None] * xi_vals
    )
    out["radial_plane"] = np.sqrt(np.abs(ws.sasaki_values(leak, leak))) / ws.F_val
    return out


# -- public per-point API ----------------------------------------------------------


@dataclass(frozen=True)
class LiouvilleData:
    """t coefficients and the two Liouville fields at one point."""

    t: np.ndarray
    gamma: np.ndarray  # (2n,) coordinate components of y^i d/dy^i
    xi: np.ndarray  # (2n,) coordinate components of y^i delta/delta x^i
    consistency_residual: float
    at: TangentPoint


@dataclass(frozen=True)
class BarFrame:
    """The orthogonal vertical frame with its dependent index dropped."""

    E: np.ndarray  # (n-1, n) kept coefficient rows
    dropped: int
    full: np.ndarray  # (n, n) all rows, including the dependent one
    at: TangentPoint


@dataclass(frozen=True)
class FramePack:
    """Coordinate components of the adapted frame {bar_delta, xi, bar, Gamma}."""

    matrix: np.ndarray  # (2n, 2n); rows ordered L'_xi block, L_xi, L'_Gamma block, L_Gamma
    gram: np.ndarray  # (2n, 2n) Sasaki Gram matrix of the rows
    dropped: int
    condition: float
    block_sizes: tuple
    at: TangentPoint


def liouville(M: FinslerMetric, p: TangentPoint) -> LiouvilleData:
    ws = workspace_at(M, p)
    xi = np.concatenate([ws.y, -np.einsum("bji,bi->bj", ws.N_val, ws.y)], axis=1)
    return LiouvilleData(
        t=ws.t_val[0],
        gamma=ws.gamma_values()[0],
        xi=xi[0],
        consistency_residual=float(t_consistency_residuals(ws)[0]),
        at=p,
    )


def bar_frame(M: FinslerMetric, p: TangentPoint) -> BarFrame:
    ws = workspace_at(M, p)
    m = int(ws.dropped_index[0])
    kept = ws.kept_indices[0]
    return BarFrame(E=ws.E_val[0][kept], dropped=m, full=ws.E_val[0], at=p)


def liouville_coefficient_identities(M: FinslerMetric, p: TangentPoint) -> dict:
    ws = workspace_at(M, p)
    return {k: float(v[0]) for k, v in coefficient_identity_residuals(ws).items()}


def bar_frame_brackets(M: FinslerMetric, p: TangentPoint) -> dict:
    ws = workspace_at(M, p)
    return {k: float(v[0]) for k, v in bar_bracket_residuals(ws).items()}


def frame_pack(M: FinslerMetric, p: TangentPoint) -> FramePack:
    ws = workspace_at(M, p)
    P = pack_rows(ws)[0]
    Gc = coordinate_metric(ws)[0]
    cond = float(np.linalg.cond(P))
    if cond > 1e10:
        warnings.warn(f"frame pack ill-conditioned (cond={cond:.3e}) at x={p.x.tolist()}, y={p.y.tolist()}")
    n = ws.n
    return FramePack(
        matrix=P,
        gram=P @ Gc @ P.T,
        dropped=int(ws.dropped_index[0]),
        condition=cond,
        block_sizes=(n - 1, 1, n - 1, 1),
        at=p,
    )


def frobenius_checks(M: FinslerMetric, p: TangentPoint) -> dict:
    ws = workspace_at(M, p)
    return {k: float(v[0]) for k, v in frobenius_residuals(ws).items()}
