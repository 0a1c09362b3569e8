"""The adapted connection triple and its basicness checks.

Three connections live on the bundles split off by the vertical and radial
line foliations:

* the Vranceanu connection, whose horizontal restriction is basic with
  respect to the vertical foliation (its table simply has no
  vertical-direction term on horizontal sections);
* the Vaisman (second) connection on the vertical bundle, preserving the
  indicatrix/radial splitting, with leafwise coefficients built by the Koszul
  formula on the kept orthogonal vertical frame and mixed coefficients from
  the projected bracket (partial Bott connection);
* their direct sum on the orthogonal complement of the radial line field.

Every "basic" property is verified against its defining form: the connection
applied along the foliation equals the projected Lie bracket of an arbitrary
lift, with lift-independence checked by using two different lifts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import Jet, TangentPoint
from .metrics import FinslerMetric
from .spray import (
    Workspace,
    add_fields,
    bracket,
    components_values,
    scale_field,
    workspace_at,
)

# -- small utilities ----------------------------------------------------------------


def _gather_rows(arr: np.ndarray, idx: np.ndarray) -> np.ndarray:
    shape = idx.shape + (1,) * (arr.ndim - 2)
    return np.take_along_axis(arr, idx.reshape(shape), axis=1)


def jet_select(jets, idx: np.ndarray) -> Jet:
    """Per-point selection among a list of equally-shaped jets."""
    first = jets[0]
    B = first.value.shape[0]
    idx = idx.reshape(B)
    coeffs = []
    for r in range(first.order + 1):
        stacked = np.stack([j.coeffs[r] for j in jets], axis=1)
        sel = np.take_along_axis(stacked, idx.reshape((B, 1) + (1,) * r), axis=1)
        coeffs.append(sel[:, 0])
    return Jet(first.m, first.order, coeffs)


def random_poly_jet(ws: Workspace, rng: np.random.Generator, order: int = 2) -> Jet:
    """A random degree-2 polynomial in (x, y) as a jet (exact derivatives).

    Truncated to the order the consuming check needs (brackets and
    directional derivatives consume one order each), which keeps the
    random-section machinery off the expensive top-order arithmetic.
    """
    scalars = [s.truncated(order) for s in ws.xj + ws.yj]
    c = rng.uniform(-1.0, 1.0, size=1 + len(scalars))
    acc = scalars[0] * float(c[1]) + float(c[0])
    for i in range(1, len(scalars)):
        acc = acc + float(c[1 + i]) * scalars[i]
    i, j = rng.integers(0, len(scalars), size=2)
    acc = acc + float(rng.uniform(-0.5, 0.5)) * scalars[int(i)] * scalars[int(j)]
    return acc


def gamma_of(ws: Workspace, s: Jet) -> Jet:
    """Radial vertical derivative of a scalar jet."""
    acc = None
    for j in range(ws.n):
        term = ws.yj[j] * s.deriv(ws.yvar(j))
        acc = term if acc is None else acc + term
    return acc


# -- Vranceanu tables ------------------------------------------------------------------


def vertical_hessian_values(ws: Workspace) -> np.ndarray:
    """dgy[b, i, j, l] = dg_ij/dy^l."""
    n = ws.n
    return np.stack(
        [
            np.stack(
                [np.stack([ws.g[i][j].deriv(ws.yvar(l)).value for l in range(n)], axis=1) for j in range(n)],
                axis=1,
            )
            for i in range(n)
        ],
        axis=1,
    )


def horizontal_metric_derivative_values(ws: Workspace) -> np.ndarray:
    """dgx[b, i, j, k] = delta g_ij / delta x^k."""
    n = ws.n
    dx = np.stack(
        [
            np.stack(
                [np.stack([ws.g[i][j].deriv(k).value for k in range(n)], axis=1) for j in range(n)],
                axis=1,
            )
            for i in range(n)
        ],
        axis=1,
    )
    return dx - np.einsum("blk,bijl->bijk", ws.N_val, vertical_hessian_values(ws))


def vranceanu_values(ws: Workspace) -> dict:
    """Coefficient tables C[b,k,i,j], Gc[b,k,i,j], Fc[b,k,i,j] with k the
    output frame index, i the section index, j the direction index."""
    dgy = vertical_hessian_values(ws)
    dgx = horizontal_metric_derivative_values(ws)
    C = 0.5 * np.einsum("bkl,bijl->bkij", ws.ginv_val, dgy)
    Gc = ws.dN_val.transpose(0, 1, 3, 2)  # Gc^k_ij = dN^k_j/dy^i
    # symmetrized horizontal derivative: dg_il/dx^j + dg_jl/dx^i - dg_ij/dx^l
    sym = dgx.transpose(0, 1, 3, 2) + dgx.transpose(0, 3, 1, 2) - dgx
    Fc = 0.5 * np.einsum("bkl,bijl->bkij", ws.ginv_val, sym)
    return {"C": C, "Gc": Gc, "Fc": Fc}


def vranceanu_structure_residuals(ws: Workspace, tables: dict | None = None) -> dict:
    tables = vranceanu_values(ws) if tables is None else tables
    C = tables["C"]
    yn = np.linalg.norm(ws.y, axis=1)
    res = {}
    res["c_symmetry"] = np.abs(C - C.transpose(0, 1, 3, 2)).max(axis=(1, 2, 3)) * yn
    res["c_radial"] = np.abs(np.einsum("bkij,bi->bkj", C, ws.y)).max(axis=(1, 2))
    res["c_radial_trace"] = np.abs(np.einsum("bkij,bj->bki", C, ws.y)).max(axis=(1, 2))
    Fc = tables["Fc"]
    res["fc_symmetry"] = np.abs(Fc - Fc.transpose(0, 1, 3, 2)).max(axis=(1, 2, 3)) * yn
    return res


def vranceanu_basic_residuals(ws: Workspace, rng: np.random.Generator, samples: int = 10) -> np.ndarray:
    """Defining basicness of the horizontal restriction: for vertical X and an
    arbitrary lift Ytilde of a horizontal section, the connection derivative
    equals the horizontal projection of [X, Ytilde]."""
    B, n = ws.B, ws.n
    worst = np.zeros(B)
    dx_fields = [ws.vf_dx(i) for i in range(n)]
    for _ in range(samples):
        X = [0.0] * n + [random_poly_jet(ws, rng) for _ in range(n)]
        H = [random_poly_jet(ws, rng) for _ in range(n)]
        V = [random_poly_jet(ws, rng) for _ in range(n)]
        Yt = add_fields(*(scale_field(H[i], dx_fields[i]) for i in range(n)), [0.0] * n + V)
        # vertical directions act only on the horizontal coefficients
        lhs_h = np.stack([ws.directional(X, H[i]).value for i in range(n)], axis=1)
        lhs = np.concatenate([lhs_h, -np.einsum("bji,bi->bj", ws.N_val, lhs_h)], axis=1)
        rhs = ws.horizontal_part_values(components_values(bracket(X, Yt), B))
        worst = np.maximum(worst, np.abs(lhs - rhs).max(axis=1))
    return worst


# -- Vaisman connection ----------------------------------------------------------------


@dataclass(frozen=True)
class VaismanSolved:
    """Batched Vaisman coefficients in the kept orthogonal vertical frame."""

    kept: np.ndarray  # (B, n-1)
    gram_kept: np.ndarray  # (B, n-1, n-1)
    E_kept: np.ndarray  # (B, n-1, n)
    s_bar: np.ndarray  # (B, n-1, n-1, n-1): [direction a, section q, coeff e]
    beta: np.ndarray  # (B, n, n-1, n-1): [direction i, section a, coeff e]
    bar_gram_dirs: np.ndarray  # (B, n, n, n): bar_a(G(bar_i, bar_j)), full indices


def solve_vaisman(ws: Workspace) -> VaismanSolved:
    B, n = ws.B, ws.n
    kept = ws.kept_indices
    bars = [ws.vf_bar(k) for k in range(n)]

    gbar = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            gij = ws.sasaki(bars[i], bars[j])
            gbar[i][j] = gij
            gbar[j][i] = gij
    gbar_val = np.stack([np.stack([gbar[i][j].value for j in range(n)], axis=1) for i in range(n)], axis=1)
    dgbar_y = np.stack(
        [
            np.stack(
                [np.stack([gbar[i][j].deriv(ws.yvar(l)).value for l in range(n)], axis=1) for j in range(n)],
                axis=1,
            )
            for i in range(n)
        ],
        axis=1,
    )
    DG = np.einsum("bal,bijl->baij", ws.E_val, dgbar_y)  # bar_a(gbar_ij)

    gBR = np.zeros((B, n, n, n))  # G([bar_i, bar_j], bar_c)
    for i in range(n):
        for j in range(i + 1, n):
            w = components_values(bracket(bars[i], bars[j]), B)[:, n:]
            pair = np.einsum("bkl,bk,bcl->bc", ws.g_val, w, ws.E_val)
            gBR[:, i, j, :] = pair
            gBR[:, j, i, :] = -pair

    # Koszul right-hand side, indices [b, a(dir), q(section), c(pairing)]:
    # bar_a g(q,c) + bar_q g(a,c) - bar_c g(a,q)
    #   + G([a,q],c) - G([a,c],q) - G([q,c],a)
    rhs = (
        DG
        + DG.transpose(0, 2, 1, 3)
        - DG.transpose(0, 2, 3, 1)
        + gBR
        - gBR.transpose(0, 1, 3, 2)
        - gBR.transpose(0, 3, 1, 2)
    )

    barange = np.arange(B)[:, None, None, None]
    rhs_kept = rhs[barange, kept[:, :, None, None], kept[:, None, :, None], kept[:, None, None, :]]
    gram_kept = gbar_val[np.arange(B)[:, None, None], kept[:, :, None], kept[:, None, :]]
    s_bar = 0.5 * np.linalg.solve(gram_kept[:, None, None, :, :], rhs_kept[..., None])[..., 0]

    # mixed coefficients: projection of [delta/dx_i, bar_a] onto the indicatrix span
    E_kept = _gather_rows(ws.E_val, kept)
    beta = np.zeros((B, n, n - 1, n - 1))
    for i in range(n):
        dxi = ws.vf_dx(i)
        rows = []
        for kfull in range(n):
            w = components_values(bracket(dxi, bars[kfull]), B)
            w = ws.project_off_gamma(w)[:, n:]
            rows.append(np.einsum("bkl,bk,bcl->bc", ws.g_val, w, E_kept))
        rows = np.stack(rows, axis=1)  # (B, n(full section), n-1)
        rows_kept = _gather_rows(rows, kept)
        beta[:, i] = np.linalg.solve(gram_kept[:, None, :, :], rows_kept[..., None])[..., 0]

    return VaismanSolved(
        kept=kept, gram_kept=gram_kept, E_kept=E_kept, s_bar=s_bar, beta=beta, bar_gram_dirs=DG
    )


def apply_vaisman(ws: Workspace, vs: VaismanSolved, X, zeta) -> np.ndarray:
    """Vertical coefficient values (over d/dy) of the Vaisman derivative of
    the section sum_k zeta^k bar_k along the vector field X.

    zeta is a list of n scalar jets over the full bar system; the dependent
    field is eliminated through its linear relation, whose coefficients
    -y^a/y^m are differentiated along X as coordinate ratios.
    """
    B, n = ws.B, ws.n
    kept, m = vs.kept, ws.dropped_index
    Xval = components_values(X, B)
    Xh = Xval[:, :n]
    vvert = Xval[:, n:] + np.einsum("bji,bi->bj", ws.N_val, Xh)
    lam = np.einsum("bj,bj->b", ws.t_val, vvert)
    bar_part = vvert - lam[:, None] * ws.y
    mu_rhs = np.einsum("bai,bij,bj->ba", vs.E_kept, ws.g_val, bar_part)
    mu = np.linalg.solve(vs.gram_kept, mu_rhs[..., None])[..., 0]

    eye = np.broadcast_to(np.eye(n - 1), (B, n - 1, n - 1))
    coef = np.einsum("bc,bcae->bae", mu, vs.s_bar) - lam[:, None, None] * eye
    coef = coef + np.einsum("bi,biae->bae", Xh, vs.beta)

    zeta_val = np.stack([z.value for z in zeta], axis=1)
    Xzeta = np.stack([ws.directional(X, z).value for z in zeta], axis=1)
    out = np.einsum("bk,bki->bi", Xzeta, ws.E_val)

    z_kept = np.take_along_axis(zeta_val, kept, axis=1)
    z_m = np.take_along_axis(zeta_val, m[:, None], axis=1)[:, 0]
    y_kept = np.take_along_axis(ws.y, kept, axis=1)
    y_m = np.take_along_axis(ws.y, m[:, None], axis=1)[:, 0]
    c = -y_kept / y_m[:, None]
    Xy_kept = np.take_along_axis(Xval[:, n:], kept, axis=1)
    Xy_m = np.take_along_axis(Xval[:, n:], m[:, None], axis=1)[:, 0]
    Xc = -(Xy_kept * y_m[:, None] - y_kept * Xy_m[:, None]) / (y_m**2)[:, None]

    total_kept = z_kept + z_m[:, None] * c
    out = out + np.einsum("ba,bae,bei->bi", total_kept, coef, vs.E_kept)
    out = out + z_m[:, None] * np.einsum("ba,bai->bi", Xc, vs.E_kept)
    return out


def apply_vaisman_kept(ws: Workspace, vs: VaismanSolved, X, zeta_kept) -> np.ndarray:
    """Vaisman derivative of a section given over the kept frame positions."""
    B, n = ws.B, ws.n
    Xval = components_values(X, B)
    Xh = Xval[:, :n]
    vvert = Xval[:, n:] + np.einsum("bji,bi->bj", ws.N_val, Xh)
    lam = np.einsum("bj,bj->b", ws.t_val, vvert)
    bar_part = vvert - lam[:, None] * ws.y
    mu_rhs = np.einsum("bai,bij,bj->ba", vs.E_kept, ws.g_val, bar_part)
    mu = np.linalg.solve(vs.gram_kept, mu_rhs[..., None])[..., 0]
    eye = np.broadcast_to(np.eye(n - 1), (B, n - 1, n - 1))
    coef = np.einsum("bc,bcae->bae", mu, vs.s_bar) - lam[:, None, None] * eye
    coef = coef + np.einsum("bi,biae->bae", Xh, vs.beta)
    z_val = np.stack([z.value for z in zeta_kept], axis=1)
    Xz = np.stack([ws.directional(X, z).value for z in zeta_kept], axis=1)
    out = np.einsum("ba,bai->bi", Xz, vs.E_kept)
    out = out + np.einsum("ba,bae,bei->bi", z_val, coef, vs.E_kept)
    return out


def vaisman_line_residuals(ws: Workspace) -> np.ndarray:
    """Local basicness display on the vertical bundle: the projected bracket
    with the radial field has eigenvalue -1, pi_0[Gamma, bar_i] = -bar_i."""
    B, n = ws.B, ws.n
    gamma = ws.vf_gamma()
    worst = np.zeros(B)
    for i in range(n):
        w = components_values(bracket(gamma, ws.vf_bar(i)), B)
        w = ws.project_off_gamma(w)
        target = np.concatenate([np.zeros((B, n)), ws.E_val[:, i, :]], axis=1)
        worst = np.maximum(worst, np.abs(w + target).max(axis=1))
    return worst * ws.F_val


def jet_select_field(ws: Workspace, fields, idx: np.ndarray):
    """Per-point selection among vector fields (component lists)."""
    out = []
    for c in range(2 * ws.n):
        comps = []
        for f in fields:
            e = f[c]
            comps.append(e if isinstance(e, Jet) else Jet.constant(np.full(ws.B, float(e)), ws.dim, ws.order - 1))
        out.append(jet_select(comps, idx))
    return out


def vaisman_condition_residuals(ws: Workspace, vs: VaismanSolved) -> dict:
    """Residuals of the defining conditions of the second connection:
    splitting preservation, partial torsion, partial metricity."""
    B, n = ws.B, ws.n
    res = {}

    # splitting preservation: with coefficient tables the connection outputs
    # stay in their summands up to frame orthogonality
    inner = np.einsum("bij,bki,bj->bk", ws.g_val, ws.E_val, ws.y)
    res["splitting"] = np.abs(inner).max(axis=1) / ws.L_val

    bars = [ws.vf_bar(k) for k in range(n)]
    gamma = ws.vf_gamma()
    bars_kept = [jet_select_field(ws, bars, vs.kept[:, a]) for a in range(n - 1)]

    # torsion on indicatrix pairs: nabla_a q - nabla_q a - [bar_a, bar_q],
    # indicatrix component must vanish
    worst = np.zeros(B)
    for a in range(n - 1):
        for q in range(a + 1, n - 1):
            w = components_values(bracket(bars_kept[a], bars_kept[q]), B)
            w = ws.project_off_gamma(w)[:, n:]
            diff = np.einsum("be,bei->bi", vs.s_bar[:, a, q] - vs.s_bar[:, q, a], vs.E_kept) - w
            worst = np.maximum(worst, np.abs(diff).max(axis=1))
    res["torsion_indicatrix"] = worst * ws.F_val

    # torsion with the radial argument: bar_a - [bar_a, Gamma] must vanish
    worst = np.zeros(B)
    for i in range(n):
        w = components_values(bracket(bars[i], gamma), B)
        worst = np.maximum(worst, np.abs(w[:, n:] - ws.E_val[:, i, :]).max(axis=1))
    res["torsion_radial"] = worst * ws.F_val

    # mixed horizontal torsion: the beta system must reproduce the projected bracket
    worst = np.zeros(B)
    for i in range(n):
        dxi = ws.vf_dx(i)
        for a in range(n - 1):
            w = components_values(bracket(dxi, bars_kept[a]), B)
            w = ws.project_off_gamma(w)[:, n:]
            diff = np.einsum("be,bei->bi", vs.beta[:, i, a], vs.E_kept) - w
            worst = np.maximum(worst, np.abs(diff).max(axis=1))
    res["torsion_mixed"] = worst * ws.F_val

    # horizontal torsion with the radial field: [delta/dx_i, Gamma] = 0 by
    # homogeneity, consistent with a vanishing radial coefficient
    worst = np.zeros(B)
    for i in range(n):
        w = components_values(bracket(ws.vf_dx(i), gamma), B)
        worst = np.maximum(worst, np.abs(w).max(axis=1))
    res["torsion_horizontal_radial"] = worst

    # metric condition on kept triples
    barange = np.arange(B)[:, None, None, None]
    DG_kept = vs.bar_gram_dirs[
        barange, vs.kept[:, :, None, None], vs.kept[:, None, :, None], vs.kept[:, None, None, :]
    ]
    s_g = np.einsum("bqae,bec->bqac", vs.s_bar, vs.gram_kept)  # G(nabla_q a, c)
    metric_defect = DG_kept - s_g - s_g.transpose(0, 1, 3, 2)
    res["metric_indicatrix"] = np.abs(metric_defect).max(axis=(1, 2, 3)) / ws.L_val

    # metric condition on the radial span: Gamma(F^2) = 2 F^2 forces the unit
    # radial-radial coefficient
    gammaL = np.einsum("bj,bj->b", ws.y, np.stack([ws.L.deriv(ws.yvar(j)).value for j in range(n)], axis=1))
    res["metric_radial"] = np.abs(gammaL - 2.0 * ws.L_val) / ws.L_val
    return res


def vaisman_basic_residuals(ws: Workspace, vs: VaismanSolved, rng: np.random.Generator, samples: int = 10) -> dict:
    """Defining basicness with arbitrary lifts: nabla_{a Gamma} Z versus
    pi_0 [a Gamma, Z + b Gamma], for two independent lifts b."""
    B, n = ws.B, ws.n
    gamma = ws.vf_gamma()
    bars = [ws.vf_bar(k) for k in range(n)]
    worst = np.zeros(B)
    worst_gap = np.zeros(B)
    for _ in range(samples):
        zeta = [random_poly_jet(ws, rng) for _ in range(n)]
        a = random_poly_jet(ws, rng)
        X = [0.0] * n + [a * yj for yj in ws.yj]
        lhs_v = apply_vaisman(ws, vs, X, zeta)
        lhs = np.concatenate([np.zeros((B, n)), lhs_v], axis=1)
        res_two = []
        for _lift in range(2):
            b = random_poly_jet(ws, rng)
            Zt = add_fields(*(scale_field(zeta[k], bars[k]) for k in range(n)), scale_field(b, gamma))
            w = components_values(bracket(X, Zt), B)
            w = ws.project_off_gamma(w)
            res_two.append(np.abs(lhs - w).max(axis=1))
        worst = np.maximum(worst, np.maximum(*res_two))
        worst_gap = np.maximum(worst_gap, np.abs(res_two[0] - res_two[1]))
    return {"basic": worst, "lift_independence": worst_gap}


# -- composite connection ---------------------------------------------------------------


def composite_line_residuals(ws: Workspace) -> dict:
    """The two radial-derivative displays of the direct-sum connection,
    verified through projected brackets: pi_2[Gamma, delta/dx_i] = 0 and
    pi_2[Gamma, bar_i] = -bar_i."""
    B, n = ws.B, ws.n
    gamma = ws.vf_gamma()
    worst_h = np.zeros(B)
    for i in range(n):
        w = components_values(bracket(gamma, ws.vf_dx(i)), B)
        w = ws.project_off_gamma(w)
        worst_h = np.maximum(worst_h, np.abs(w).max(axis=1))
    return {"horizontal_display": worst_h, "vertical_display": vaisman_line_residuals(ws)}


def apply_horizontal_connection(ws: Workspace, Fc: np.ndarray, X, H) -> np.ndarray:
    """Horizontal-restriction derivative: coefficients (over delta/dx) of the
    derivative of sum_i H^i delta/dx_i along X."""
    B, n = ws.B, ws.n
    Xh = components_values(X, B)[:, :n]
    H_val = np.stack([h.value for h in H], axis=1)
    XH = np.stack([ws.directional(X, h).value for h in H], axis=1)
    return XH + np.einsum("bj,bkij,bi->bk", Xh, Fc, H_val)


def composite_basic_residuals(
    ws: Workspace, vs: VaismanSolved, Fc: np.ndarray, rng: np.random.Generator, samples: int = 10
) -> dict:
    """Defining basicness of the direct-sum connection on the orthogonal
    complement of the radial field, with lift independence."""
    B, n = ws.B, ws.n
    dx_fields = [ws.vf_dx(i) for i in range(n)]
    bars = [ws.vf_bar(k) for k in range(n)]
    gamma = ws.vf_gamma()
    worst = np.zeros(B)
    worst_gap = np.zeros(B)
    for _ in range(samples):
        a = random_poly_jet(ws, rng)
        X = [0.0] * n + [a * yj for yj in ws.yj]
        H = [random_poly_jet(ws, rng) for _ in range(n)]
        zeta = [random_poly_jet(ws, rng) for _ in range(n)]
        lhs_h = apply_horizontal_connection(ws, Fc, X, H)
        lhs_v = apply_vaisman(ws, vs, X, zeta)
        lhs = np.concatenate([lhs_h, -np.einsum("bji,bi->bj", ws.N_val, lhs_h) + lhs_v], axis=1)
        res_two = []
        for _lift in range(2):
            f = random_poly_jet(ws, rng)
            Yt = add_fields(
                *(scale_field(H[i], dx_fields[i]) for i in range(n)),
                *(scale_field(zeta[k], bars[k]) for k in range(n)),
                scale_field(f, gamma),
            )
            w = components_values(bracket(X, Yt), B)
            w = ws.project_off_gamma(w)
            res_two.append(np.abs(lhs - w).max(axis=1))
        worst = np.maximum(worst, np.maximum(*res_two))
        worst_gap = np.maximum(worst_gap, np.abs(res_two[0] - res_two[1]))
    return {"basic": worst, "lift_independence": worst_gap}


def splitting_compatibility_residuals(
    ws: Workspace, vs: VaismanSolved, Fc: np.ndarray, rng: np.random.Generator, samples: int = 10
) -> dict:
    """Compatibility of the triple through the exact sequence: embedding a
    vertical section commutes with the connections (full-system route versus
    kept-frame route), and the horizontal projection intertwines the
    composite with the horizontal restriction."""
    B, n = ws.B, ws.n
    m = ws.dropped_index
    worst_embed = np.zeros(B)
    worst_proj = np.zeros(B)
    for _ in range(samples):
        X = [random_poly_jet(ws, rng) for _ in range(2 * n)]
        zeta = [random_poly_jet(ws, rng) for _ in range(n)]
        H = [random_poly_jet(ws, rng) for _ in range(n)]

        dir_v = apply_vaisman(ws, vs, X, zeta)

        y_low = [yj.truncated(2) for yj in ws.yj]
        ym_jet = jet_select(y_low, m)
        zm_jet = jet_select(zeta, m)
        zeta_kept = []
        for a in range(n - 1):
            idx = vs.kept[:, a]
            za = jet_select(zeta, idx)
            ya = jet_select(y_low, idx)
            zeta_kept.append(za - zm_jet * (ya / ym_jet))
        kept_v = apply_vaisman_kept(ws, vs, X, zeta_kept)
        worst_embed = np.maximum(worst_embed, np.abs(dir_v - kept_v).max(axis=1))

        lhs_h = apply_horizontal_connection(ws, Fc, X, H)
        comps = np.concatenate([lhs_h, -np.einsum("bji,bi->bj", ws.N_val, lhs_h) + dir_v], axis=1)
        proj_h = ws.horizontal_part_values(comps)[:, :n]
        worst_proj = np.maximum(worst_proj, np.abs(proj_h - lhs_h).max(axis=1))
    return {"vertical_embedding": worst_embed, "horizontal_projection": worst_proj}


def line_curvature_residuals(
    ws: Workspace, rng: np.random.Generator, samples: int = 10
) -> np.ndarray:
    """Curvature of the direct-sum connection on the radial line span must
    vanish: K(a Gamma, b Gamma) Z = 0.  The assembly exercises the full
    nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y] pipeline with radial
    directions, whose frame derivatives are structural (0 and -1)."""
    B, n = ws.B, ws.n
    worst = np.zeros(B)

    def d_gamma(Hc, zc):
        return [gamma_of(ws, h) for h in Hc], [gamma_of(ws, z) - z for z in zc]

    def scale(f, pair):
        return [f * h for h in pair[0]], [f * z for z in pair[1]]

    for _ in range(samples):
        a = random_poly_jet(ws, rng, order=3)
        b = random_poly_jet(ws, rng, order=3)
        H = [random_poly_jet(ws, rng, order=3) for _ in range(n)]
        zeta = [random_poly_jet(ws, rng, order=3) for _ in range(n)]

        HY, zY = scale(b, d_gamma(H, zeta))
        HX, zX = scale(a, d_gamma(H, zeta))
        HXY, zXY = scale(a, d_gamma(HY, zY))
        HYX, zYX = scale(b, d_gamma(HX, zX))
        c = a * gamma_of(ws, b) - b * gamma_of(ws, a)
        Hc, zc = scale(c, d_gamma(H, zeta))

        KH = np.stack([(HXY[i] - HYX[i] - Hc[i]).value for i in range(n)], axis=1)
        Kz = np.stack([(zXY[k] - zYX[k] - zc[k]).value for k in range(n)], axis=1)
        total = np.abs(KH).max(axis=1) + np.abs(np.einsum("bk,bki->bi", Kz, ws.E_val)).max(axis=1)
        worst = np.maximum(worst, total)
    return worst


# -- special-case oracles ------------------------------------------------------------------


def euclidean_table_residuals(ws: Workspace, vs: VaismanSolved, tables: dict) -> np.ndarray:
    """For the flat euclidean metric every Vranceanu table vanishes and the
    leafwise coefficients reduce to the round-sphere values
    nabla_{bar_a} bar_q = -t_q bar_a, with vanishing mixed coefficients."""
    B, n = ws.B, ws.n
    res = np.abs(tables["C"]).max(axis=(1, 2, 3))
    res = np.maximum(res, np.abs(tables["Gc"]).max(axis=(1, 2, 3)))
    res = np.maximum(res, np.abs(tables["Fc"]).max(axis=(1, 2, 3)))
    t_kept = np.take_along_axis(ws.t_val, vs.kept, axis=1)
    eye = np.broadcast_to(np.eye(n - 1), (B, n - 1, n - 1))
    oracle = -np.einsum("bq,bae->baqe", t_kept, eye)
    res = np.maximum(res, np.abs(vs.s_bar - oracle).max(axis=(1, 2, 3)))
    res = np.maximum(res, np.abs(vs.beta).max(axis=(1, 2, 3)))
    return res


# -- public per-point API ---------------------------------------------------------------------


@dataclass(frozen=True)
class VranceanuTable:
    """Coefficient tables of the Vranceanu connection at one point,
    indexed [k, i, j] = output frame index, section index, direction index."""

    C: np.ndarray
    Gc: np.ndarray
    Fc: np.ndarray
    at: TangentPoint


@dataclass(frozen=True)
class VaismanTable:
    """Vaisman coefficients at one point, kept-frame indexed.

    The structural coefficients are stored explicitly: the radial derivative
    of a bar field is -1 times itself, bar-direction derivatives of the
    radial field vanish, the radial-radial coefficient is 1, and horizontal
    derivatives of the radial field vanish.
    """

    dropped: int
    kept: tuple
    s_bar: np.ndarray  # (n-1, n-1, n-1)
    beta: np.ndarray  # (n, n-1, n-1)
    radial_bar: float
    bar_radial: np.ndarray
    radial_radial: float
    horizontal_radial: np.ndarray
    at: TangentPoint


@dataclass(frozen=True)
class ConnectionTable:
    """Generic coefficient table of a connection on a tagged subbundle."""

    bundle: str
    frame: str
    coefficients: dict
    at: TangentPoint


def vranceanu(M: FinslerMetric, p: TangentPoint) -> VranceanuTable:
    ws = workspace_at(M, p)
    t = vranceanu_values(ws)
    return VranceanuTable(C=t["C"][0], Gc=t["Gc"][0], Fc=t["Fc"][0], at=p)


def vaisman(M: FinslerMetric, p: TangentPoint) -> VaismanTable:
    ws = workspace_at(M, p)
    vs = solve_vaisman(ws)
    n = ws.n
    return VaismanTable(
        dropped=int(ws.dropped_index[0]),
        kept=tuple(int(k) for k in vs.kept[0]),
        s_bar=vs.s_bar[0],
        beta=vs.beta[0],
        radial_bar=-1.0,
        bar_radial=np.zeros(n - 1),
        radial_radial=1.0,
        horizontal_radial=np.zeros(n),
        at=p,
    )


def composite_connection(M: FinslerMetric, p: TangentPoint) -> ConnectionTable:
    ws = workspace_at(M, p)
    vs = solve_vaisman(ws)
    tables = vranceanu_values(ws)
    return ConnectionTable(
        bundle="radial_complement",
        frame=f"delta/dx + bar(drop {int(ws.dropped_index[0])})",
        coefficients={
            "horizontal": tables["Fc"][0],
            "indicatrix": vs.s_bar[0],
            "mixed": vs.beta[0],
            "radial_horizontal": 0.0,
            "radial_indicatrix": -1.0,
        },
        at=p,
    )


def check_vranceanu_basic(M: FinslerMetric, p: TangentPoint, seed: int = 11) -> dict:
    ws = workspace_at(M, p)
    rng = np.random.default_rng(seed)
    return {
        "structural": 0.0,  # the table has no vertical-direction horizontal term
        "general": float(vranceanu_basic_residuals(ws, rng)[0]),
    }


def check_vaisman_basic(M: FinslerMetric, p: TangentPoint, seed: int = 11) -> dict:
    ws = workspace_at(M, p)
    vs = solve_vaisman(ws)
    rng = np.random.default_rng(seed)
    out = {"line_display": float(vaisman_line_residuals(ws)[0])}
    out.update({k: float(v[0]) for k, v in vaisman_basic_residuals(ws, vs, rng).items()})
    return out


def check_composite_basic(M: FinslerMetric, p: TangentPoint, seed: int = 11) -> dict:
    ws = workspace_at(M, p)
    vs = solve_vaisman(ws)
    Fc = vranceanu_values(ws)["Fc"]
    rng = np.random.default_rng(seed)
    out = {k: float(v[0]) for k, v in composite_line_residuals(ws).items()}
    out.update({k: float(v[0]) for k, v in composite_basic_residuals(ws, vs, Fc, rng).items()})
    return out


def splitting_compatibility(M: FinslerMetric, p: TangentPoint, seed: int = 11) -> dict:
    ws = workspace_at(M, p)
    vs = solve_vaisman(ws)
    Fc = vranceanu_values(ws)["Fc"]
    rng = np.random.default_rng(seed)
    return {k: float(v[0]) for k, v in splitting_compatibility_residuals(ws, vs, Fc, rng).items()}


def curvature_on_line(M: FinslerMetric, p: TangentPoint, seed: int = 11) -> float:
    ws = workspace_at(M, p)
    rng = np.random.default_rng(seed)
    return float(line_curvature_residuals(ws, rng)[0])
