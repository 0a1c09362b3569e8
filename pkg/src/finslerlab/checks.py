"""Check registry and verification sweep.

Every identity the package can verify is a registered check: a residual
function over a chunk of sampled points (or a global check such as the
finite-difference cross-validation), an identity string describing what is
tested, a tolerance class, and a pinned default tolerance.  The CLI sweep and
the acceptance suite both run through this registry, so they cannot drift
apart.

Determinism: points are sampled once from (n, count, seed); chunking is a
fixed partition (CHUNK_SIZE) independent of the thread count; every random
ingredient inside a check derives its generator from (seed, chunk index,
check tag), so residuals are bit-identical across runs and thread counts.
"""

from __future__ import annotations

import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from . import charts as ch
from . import connections as cn
from . import liouville as lv
from . import metrics as mt
from . import sasaki as sk
from . import spray as sp
from .jets import TangentPoint, fd_oracle
from .metrics import FinslerMetric, sample_points

CHUNK_SIZE = 256

TOLERANCE_CLASSES = {
    "exact": 0.0,
    "algebraic": 1e-10,
    "derivative": 1e-8,
    "bracket": 1e-8,
    "third": 1e-7,
}


class ChunkContext:
    """Lazy per-chunk pipeline state shared by all point-scope checks."""

    def __init__(self, metric: FinslerMetric, x: np.ndarray, y: np.ndarray, seed: int, index: int):
        self.metric = metric
        self.x = x
        self.y = y
        self.seed = seed
        self.index = index

    def rng(self, tag: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, self.index, zlib.crc32(tag.encode())])

    def memo(self, key: str, producer: Callable):
        """Cache a shared residual computation for this chunk (several check
        ids read different entries of one produced dict)."""
        cache = self.__dict__.setdefault("_memo", {})
        if key not in cache:
            cache[key] = producer()
        return cache[key]

    @cached_property
    def ws(self) -> sp.Workspace:
        return sp.Workspace(self.metric, self.x, self.y, order=4)

    @cached_property
    def vaisman(self) -> cn.VaismanSolved:
        return cn.solve_vaisman(self.ws)

    @cached_property
    def vranceanu(self) -> dict:
        return cn.vranceanu_values(self.ws)

    @cached_property
    def chart_maps(self) -> dict:
        return {c.name: c for c in ch.chart_catalog(self.metric.n)}

    def chart_target(self, name: str) -> sp.Workspace:
        """Order-3 pipeline of the pushed-forward metric at the image points,
        shared by all checks touching the same chart map."""
        cache = self.__dict__.setdefault("_chart_ws", {})
        if name not in cache:
            cmap = self.chart_maps[name]
            xt = cmap.apply(self.x)
            yt = np.einsum("bik,bk->bi", cmap.jacobian(self.x), self.y)
            cache[name] = sp.Workspace(ch.pushforward_metric(self.metric, cmap), xt, yt, order=3)
        return cache[name]

    def chart(self, name: str) -> dict:
        cache = self.__dict__.setdefault("_chart_cache", {})
        if name not in cache:
            cache[name] = ch.chart_residuals(
                self.metric, self.chart_maps[name], self.x, self.y,
                ws=self.ws, wt=self.chart_target(name),
            )
        return cache[name]


@dataclass(frozen=True)
class CheckDef:
    id: str
    identity: str
    klass: str
    tolerance: float
    fn: Callable  # ChunkContext -> (B,) residuals, or (metric, seed) -> array for globals
    scope: str = "point"  # "point" | "global"
    applies: Callable | None = None  # predicate on FinslerMetric

    def applicable(self, metric: FinslerMetric) -> bool:
        return self.applies is None or self.applies(metric)


CHECKS: list[CheckDef] = []


def _register(id, identity, klass, fn, tolerance=None, scope="point", applies=None):
    tol = TOLERANCE_CLASSES[klass] if tolerance is None else tolerance
    CHECKS.append(CheckDef(id, identity, klass, tol, fn, scope, applies))


def _pick(fn, key):
    return lambda ctx: ctx.memo(fn.__name__, lambda: fn(ctx))[key]


# -- homogeneity / fundamental tensor ---------------------------------------------------


def _euler(ctx):
    r1, r2, r3 = mt.euler_residuals(ctx.metric, ctx.x, ctx.y)
    return {"squared_norm": r1, "gradient": r2, "vertical_radial": r3}


def _radial_norm(ctx):
    gam = ctx.ws.gamma_values()
    return np.abs(ctx.ws.sasaki_values(gam, gam) - ctx.ws.L_val) / ctx.ws.L_val


def _g_homogeneity(ctx):
    g0, _ = mt.metric_matrices(ctx.metric, ctx.x, ctx.y)
    worst = np.zeros(g0.shape[0])
    for lam in (0.5, 2.0):
        g1, _ = mt.metric_matrices(ctx.metric, ctx.x, lam * ctx.y)
        worst = np.maximum(worst, np.abs(g1 - g0).max(axis=(1, 2)) / np.abs(g0).max(axis=(1, 2)))
    return worst


def _g_y_independence(ctx):
    g0, _ = mt.metric_matrices(ctx.metric, ctx.x, ctx.y)
    g1, _ = mt.metric_matrices(ctx.metric, ctx.x, np.roll(ctx.y, 1, axis=1) + 0.25)
    return np.abs(g1 - g0).max(axis=(1, 2))


def _t_scaling(ctx):
    worst = np.zeros(ctx.x.shape[0])
    t0 = ctx.ws.t_val
    for lam in (0.5, 2.0):
        ws1 = sp.Workspace(ctx.metric, ctx.x, lam * ctx.y, order=1)
        worst = np.maximum(worst, np.abs(lam * ws1.t_val - t0).max(axis=1) * ctx.ws.F_val)
    return worst


_register("euler.squared_norm", "F^2 = y^i y^j g_ij", "derivative", _pick(_euler, "squared_norm"))
_register("euler.gradient", "dF/dy^k = y^i g_ki / F", "derivative", _pick(_euler, "gradient"))
_register("euler.vertical_radial", "y^i dg_ij/dy^k = 0", "derivative", _pick(_euler, "vertical_radial"))
_register("euler.radial_norm", "G(Gamma, Gamma) = F^2 (Sasaki assembly)", "derivative", _radial_norm)
_register("metric.g_homogeneity", "g(x, lambda y) = g(x, y)", "algebraic", _g_homogeneity)
_register(
    "metric.g_y_independence",
    "riemannian: g independent of y",
    "exact",
    _g_y_independence,
    tolerance=1e-12,
    applies=lambda M: M.family == "riemannian",
)
_register("liouville.t_scaling", "t_k(x, lambda y) = t_k(x, y) / lambda", "algebraic", _t_scaling)

# -- Liouville coefficient identities -----------------------------------------------------

_LIOUVILLE_IDENTITIES = {
    "normalization": "y^i t_i = 1",
    "radial_combination": "y^i bar_i = 0 componentwise",
    "t_gradient": "dt_l/dy^k = -2 t_k t_l + g_kl / F^2",
    "t_radial_derivative": "Gamma(t_k) = -t_k",
    "t_gradient_contraction": "y^j dt_j/dy^i = -t_i",
    "radial_pairing": "y^i Gamma(t_i) = -1",
}

for key, text in _LIOUVILLE_IDENTITIES.items():
    _register(
        f"liouville.{key}",
        text,
        "derivative",
        (lambda k: lambda ctx: ctx.memo('liouville_ids', lambda: lv.coefficient_identity_residuals(ctx.ws))[k])(key),
    )

_register(
    "liouville.t_consistency",
    "y^i g_ki / F^2 = (dF/dy^k) / F",
    "algebraic",
    lambda ctx: lv.t_consistency_residuals(ctx.ws),
)

# -- bar-frame brackets --------------------------------------------------------------------

_register(
    "brackets.indicatrix_pairs",
    "[bar_i, bar_j] = t_i bar_j - t_j bar_i",
    "third",
    lambda ctx: ctx.memo('bar_brackets', lambda: lv.bar_bracket_residuals(ctx.ws))["pair_brackets"],
)
_register(
    "brackets.indicatrix_radial",
    "[bar_i, Gamma] = bar_i",
    "third",
    lambda ctx: ctx.memo('bar_brackets', lambda: lv.bar_bracket_residuals(ctx.ws))["radial_brackets"],
)

# -- frame pack ------------------------------------------------------------------------------

_register("frames.orthogonality", "G(bar_k, Gamma) = 0", "algebraic", lambda ctx: lv.orthogonality_residuals(ctx.ws))
_register(
    "frames.dependence",
    "bar_m = -(1/y^m) sum_{a != m} y^a bar_a",
    "algebraic",
    lambda ctx: lv.dependence_residuals(ctx.ws),
)
_register(
    "frames.rank",
    "kept bar rows have full rank (min/max singular value > 1e-10)",
    "exact",
    lambda ctx: np.where(lv.bar_rank_ratios(ctx.ws) > 1e-10, 0.0, 1.0),
    tolerance=0.0,
)
_register(
    "frames.gram_blocks",
    "adapted frame Gram is block diagonal over the four distributions",
    "algebraic",
    lambda ctx: ctx.memo('pack', lambda: lv.pack_residuals(ctx.ws))["gram_offblock"],
    tolerance=1e-9,
)
_register(
    "frames.j_images",
    "J(bar_a) = bar_delta_a and J(Gamma) = xi",
    "algebraic",
    lambda ctx: ctx.memo('pack', lambda: lv.pack_residuals(ctx.ws))["j_images"],
)
_register(
    "frames.pack_conditioning",
    "frame pack condition number below 1e10",
    "exact",
    lambda ctx: np.where(lv.pack_condition(ctx.ws) < 1e10, 0.0, 1.0),
    tolerance=0.0,
)
_register(
    "frames.coframe_duality",
    "pairing of {delta/dx, d/dy} with {dx, delta-y} is the identity",
    "algebraic",
    lambda ctx: _coframe_duality(ctx),
)


def _coframe_duality(ctx):
    ws = ctx.ws
    B, n = ws.B, ws.n
    frame = np.concatenate(
        [
            np.concatenate([np.broadcast_to(np.eye(n), (B, n, n)), -ws.N_val.transpose(0, 2, 1)], axis=2),
            np.concatenate([np.zeros((B, n, n)), np.broadcast_to(np.eye(n), (B, n, n))], axis=2),
        ],
        axis=1,
    )
    coframe = np.concatenate(
        [
            np.concatenate([np.broadcast_to(np.eye(n), (B, n, n)), np.zeros((B, n, n))], axis=2),
            np.concatenate([ws.N_val, np.broadcast_to(np.eye(n), (B, n, n))], axis=2),
        ],
        axis=1,
    )
    pairing = np.einsum("bai,bci->bac", coframe, frame)
    return np.abs(pairing - np.eye(2 * n)).max(axis=(1, 2))


# -- Sasaki / almost-Kahler -------------------------------------------------------------------

_register(
    "sasaki.coordinate_roundtrip",
    "coordinate Sasaki matrix transforms back to blockdiag(g, g)",
    "algebraic",
    lambda ctx: ctx.memo('sasaki', lambda: sk.sasaki_residuals(ctx.ws))["coordinate_roundtrip"],
)
_register(
    "sasaki.j_squared",
    "J^2 = -identity in the adapted frame (exact)",
    "exact",
    lambda ctx: _j_squared(ctx),
)


def _j_squared(ctx):
    B, n = ctx.ws.B, ctx.ws.n
    J = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    return np.full(B, np.abs(J @ J + np.eye(2 * n)).max())


_register(
    "sasaki.j_compatibility",
    "G(JX, JY) = G(X, Y) on adapted frame pairs",
    "algebraic",
    lambda ctx: ctx.memo('compat', lambda: sk.compatibility_residuals(ctx.ws))["j_compatibility"],
    tolerance=1e-9,
)
_register(
    "sasaki.kahler_two_ways",
    "Omega from G(J., .) equals Omega from g_ij delta-y^i wedge dx^j",
    "algebraic",
    lambda ctx: ctx.memo('kahler', lambda: sk.kahler_residuals(ctx.ws))["two_assemblies"],
)
_register(
    "sasaki.kahler_antisymmetry",
    "Omega + Omega^T = 0 exactly (adapted frame)",
    "exact",
    lambda ctx: ctx.memo('kahler', lambda: sk.kahler_residuals(ctx.ws))["antisymmetry"],
)
_register(
    "sasaki.kahler_volume",
    "|det Omega| = det G (coordinate frame)",
    "derivative",
    lambda ctx: ctx.memo('kahler', lambda: sk.kahler_residuals(ctx.ws))["volume_identity"],
)
_register(
    "sasaki.kahler_pairing",
    "Omega(u, w) = G(Ju, w) on random vector pairs",
    "algebraic",
    lambda ctx: ctx.memo('kahler', lambda: sk.kahler_residuals(ctx.ws))["pairing_random"],
)
_register(
    "sasaki.kahler_closed",
    "d Omega = 0 via the frame-field formula on all adapted triples",
    "third",
    lambda ctx: ctx.memo('compat', lambda: sk.compatibility_residuals(ctx.ws))["closedness"],
)

# -- Frobenius leakage --------------------------------------------------------------------------

_FROBENIUS_TOL = {
    "vertical": 1e-12,
    "indicatrix": 1e-8,
    "level_set": 1e-7,
    "radial_vertical": 1e-12,
    "radial_horizontal": 1e-12,
    "radial_plane": 1e-8,
}

for key, tol in _FROBENIUS_TOL.items():
    _register(
        f"frobenius.{key}",
        f"{key} distribution closed under brackets (leakage)",
        "bracket",
        (lambda k: lambda ctx: ctx.memo('frobenius', lambda: lv.frobenius_residuals(ctx.ws))[k])(key),
        tolerance=tol,
    )

# -- spray -----------------------------------------------------------------------------------


def _spray_homogeneity(ctx):
    ws2 = sp.Workspace(ctx.metric, ctx.x, 2.0 * ctx.y, order=3)
    scale = np.abs(ctx.ws.G_val).max(axis=1) + ctx.ws.L_val
    return np.abs(ws2.G_val - 4.0 * ctx.ws.G_val).max(axis=1) / scale


def _connection_homogeneity(ctx):
    contracted = np.einsum("bjik,bk->bji", ctx.ws.dN_val, ctx.ws.y)
    scale = np.abs(ctx.ws.N_val).max(axis=(1, 2)) + ctx.ws.F_val
    return np.abs(contracted - ctx.ws.N_val).max(axis=(1, 2)) / scale


def _radial_horizontal_commutator(ctx):
    ws = ctx.ws
    worst = np.zeros(ws.B)
    gamma = ws.vf_gamma()
    for i in range(ws.n):
        w = sp.components_values(sp.bracket(gamma, ws.vf_dx(i)), ws.B)
        worst = np.maximum(worst, np.abs(w).max(axis=1))
    return worst


def _vertical_bracket_containment(ctx):
    ws = ctx.ws
    worst = np.zeros(ws.B)
    for i in range(ws.n):
        dxi = ws.vf_dx(i)
        for j in range(ws.n):
            w = sp.components_values(sp.bracket(ws.vf_dy(j), dxi), ws.B)
            h = ws.horizontal_part_values(w)
            worst = np.maximum(worst, np.abs(h).max(axis=1))
    return worst


def _curvature_vs_bracket(ctx):
    ws = ctx.ws
    worst = np.zeros(ws.B)
    for i in range(ws.n):
        for j in range(i + 1, ws.n):
            w = sp.components_values(sp.bracket(ws.vf_dx(i), ws.vf_dx(j)), ws.B)
            target = -ws.R_val[:, :, i, j]
            worst = np.maximum(worst, np.abs(w[:, ws.n :] - target).max(axis=1))
            worst = np.maximum(worst, np.abs(w[:, : ws.n]).max(axis=1))
    return worst


_register("spray.homogeneity", "G^i(x, 2y) = 4 G^i(x, y)", "derivative", _spray_homogeneity, tolerance=1e-9)
_register(
    "spray.connection_homogeneity",
    "y^k dN^j_i/dy^k = N^j_i",
    "derivative",
    _connection_homogeneity,
    tolerance=1e-9,
)
_register(
    "spray.radial_horizontal_commutator",
    "[Gamma, delta/dx_i] = 0",
    "bracket",
    _radial_horizontal_commutator,
)
_register(
    "spray.vertical_bracket_containment",
    "[d/dy_j, delta/dx_i] is vertical",
    "algebraic",
    _vertical_bracket_containment,
)
_register(
    "spray.curvature_bracket",
    "[delta/dx_i, delta/dx_j] = -R^k_ij d/dy_k",
    "third",
    _curvature_vs_bracket,
)

# -- charts -------------------------------------------------------------------------------------

_CHART_TOL = {"identity": 1e-12, "linear": 1e-9, "cubic": 1e-7}
_CHART_KEYS = (
    "scalar_invariance",
    "covector_rule",
    "metric_tensor_rule",
    "bar_frame_rule",
    "kept_frame_rule",
    "radial_invariance",
    "determinant_formula",
    "horizontal_pushforward",
)

for map_name, tol in _CHART_TOL.items():
    for key in _CHART_KEYS:
        _register(
            f"charts.{map_name}.{key}",
            f"{key.replace('_', ' ')} under the {map_name} chart map",
            "third",
            (lambda mn, k: lambda ctx: ctx.chart(mn)[k])(map_name, key),
            tolerance=tol,
        )


def _chart_agreement(ctx):
    """The vertical-bundle basicness display evaluated in two overlapping
    charts gives the same residual (chart independence of the criterion)."""
    src = cn.vaisman_line_residuals(ctx.ws)
    tgt = cn.vaisman_line_residuals(ctx.chart_target("cubic"))
    return np.abs(src - tgt)


_register(
    "charts.criterion_agreement",
    "vertical basicness display residual agrees across overlapping charts",
    "bracket",
    _chart_agreement,
)

# -- connections ----------------------------------------------------------------------------------

_register(
    "vranceanu.c_symmetry",
    "C^k_ij symmetric in (i, j)",
    "exact",
    lambda ctx: ctx.memo('vran_struct', lambda: cn.vranceanu_structure_residuals(ctx.ws, ctx.vranceanu))["c_symmetry"],
    tolerance=1e-12,
)
_register(
    "vranceanu.c_radial",
    "C^k_ij y^i = 0",
    "algebraic",
    lambda ctx: ctx.memo('vran_struct', lambda: cn.vranceanu_structure_residuals(ctx.ws, ctx.vranceanu))["c_radial"],
)
_register(
    "vranceanu.c_radial_trace",
    "C^k_ij y^j = 0",
    "algebraic",
    lambda ctx: ctx.memo('vran_struct', lambda: cn.vranceanu_structure_residuals(ctx.ws, ctx.vranceanu))["c_radial_trace"],
)
_register(
    "vranceanu.fc_symmetry",
    "F^k_ij symmetric in (i, j)",
    "algebraic",
    lambda ctx: ctx.memo('vran_struct', lambda: cn.vranceanu_structure_residuals(ctx.ws, ctx.vranceanu))["fc_symmetry"],
)
_register(
    "vranceanu.structural",
    "vertical derivative of horizontal frame fields has no table term",
    "exact",
    lambda ctx: np.zeros(ctx.x.shape[0]),
)
_register(
    "vranceanu.basic",
    "horizontal restriction equals projected bracket for vertical directions",
    "third",
    lambda ctx: cn.vranceanu_basic_residuals(ctx.ws, ctx.rng("vranceanu.basic")),
)

_register(
    "vaisman.line_display",
    "projected bracket with Gamma acts as -1 on the bar frame",
    "algebraic",
    lambda ctx: cn.vaisman_line_residuals(ctx.ws),
)

_VAISMAN_CONDITIONS = {
    "splitting": ("connection preserves the indicatrix/radial splitting", 1e-9),
    "torsion_indicatrix": ("vertical torsion vanishes on indicatrix pairs", 1e-7),
    "torsion_radial": ("torsion with the radial argument vanishes", 1e-7),
    "torsion_mixed": ("mixed horizontal torsion reproduces the projected bracket", 1e-7),
    "metric_indicatrix": ("Koszul coefficients are metric on indicatrix triples", 1e-8),
    "metric_radial": ("radial metricity forces the unit radial coefficient", 1e-10),
}

for key, (text, tol) in _VAISMAN_CONDITIONS.items():
    _register(
        f"vaisman.{key}",
        text,
        "third",
        (lambda k: lambda ctx: ctx.memo('vaisman_cond', lambda: cn.vaisman_condition_residuals(ctx.ws, ctx.vaisman))[k])(key),
        tolerance=tol,
    )

_register(
    "vaisman.basic",
    "radial derivative equals projected bracket for arbitrary lifts",
    "bracket",
    lambda ctx: ctx.memo('vaisman_basic', lambda: cn.vaisman_basic_residuals(ctx.ws, ctx.vaisman, ctx.rng("vaisman.basic")))["basic"],
)
_register(
    "vaisman.lift_independence",
    "basicness residual independent of the chosen lift",
    "algebraic",
    lambda ctx: ctx.memo('vaisman_basic', lambda: cn.vaisman_basic_residuals(ctx.ws, ctx.vaisman, ctx.rng("vaisman.basic")))["lift_independence"],
)

_register(
    "composite.horizontal_display",
    "projected bracket of Gamma with delta/dx_i vanishes",
    "algebraic",
    lambda ctx: ctx.memo('comp_line', lambda: cn.composite_line_residuals(ctx.ws))["horizontal_display"],
)
_register(
    "composite.vertical_display",
    "projected bracket of Gamma acts as -1 on the bar frame",
    "algebraic",
    lambda ctx: ctx.memo('comp_line', lambda: cn.composite_line_residuals(ctx.ws))["vertical_display"],
)
_register(
    "composite.basic",
    "direct-sum connection equals projected bracket for arbitrary lifts",
    "third",
    lambda ctx: ctx.memo(
        'composite_basic',
        lambda: cn.composite_basic_residuals(ctx.ws, ctx.vaisman, ctx.vranceanu["Fc"], ctx.rng("composite.basic")),
    )["basic"],
)
_register(
    "composite.lift_independence",
    "composite basicness residual independent of the chosen lift",
    "algebraic",
    lambda ctx: ctx.memo(
        'composite_basic',
        lambda: cn.composite_basic_residuals(ctx.ws, ctx.vaisman, ctx.vranceanu["Fc"], ctx.rng("composite.basic")),
    )["lift_independence"],
)
_register(
    "connections.vertical_embedding",
    "embedding vertical sections commutes with the connections",
    "algebraic",
    lambda ctx: ctx.memo(
        'splitting',
        lambda: cn.splitting_compatibility_residuals(
            ctx.ws, ctx.vaisman, ctx.vranceanu["Fc"], ctx.rng("connections.splitting")
        ),
    )["vertical_embedding"],
    tolerance=1e-9,
)
_register(
    "connections.horizontal_projection",
    "horizontal projection intertwines composite and horizontal restriction",
    "algebraic",
    lambda ctx: ctx.memo(
        'splitting',
        lambda: cn.splitting_compatibility_residuals(
            ctx.ws, ctx.vaisman, ctx.vranceanu["Fc"], ctx.rng("connections.splitting")
        ),
    )["horizontal_projection"],
    tolerance=1e-9,
)
_register(
    "connections.line_curvature",
    "curvature of the direct-sum connection vanishes on the radial span",
    "third",
    lambda ctx: cn.line_curvature_residuals(ctx.ws, ctx.rng("connections.curvature")),
)

# -- special-case oracles ----------------------------------------------------------------------------


def _riemannian_cartan(ctx):
    return np.abs(ctx.vranceanu["C"]).max(axis=(1, 2, 3))


def _christoffel_oracle(ctx):
    """Independent spray oracle: finite differences of the quadratic-form
    coefficients give the Christoffel symbols, hence the spray."""
    a = ctx.metric.params["a"]
    n = ctx.metric.n
    B = ctx.x.shape[0]
    h = 1e-5

    def amat(xv):
        xs = list(xv.T)
        return np.stack(
            [
                np.stack([np.broadcast_to(mt._eval_coef(a[i][j], xs), (xv.shape[0],)) for j in range(n)], axis=1)
                for i in range(n)
            ],
            axis=1,
        )

    da = np.zeros((B, n, n, n))  # da[b, l, j, k] = d a_lj / d x^k
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        da[..., k] = (amat(ctx.x + e) - amat(ctx.x - e)) / (2 * h)
    ainv = np.linalg.inv(amat(ctx.x))
    # gamma^i_jk = 1/2 a^il (d_k a_lj + d_j a_lk - d_l a_jk), assembled entrywise
    gamma = np.zeros((B, n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                s = np.zeros(B)
                for l in range(n):
                    s += ainv[:, i, l] * (da[:, l, j, k] + da[:, l, k, j] - da[:, j, k, l])
                gamma[:, i, j, k] = 0.5 * s
    G_oracle = 0.5 * np.einsum("bijk,bj,bk->bi", gamma, ctx.y, ctx.y)
    scale = np.abs(ctx.ws.G_val).max(axis=1) + ctx.ws.L_val
    return np.abs(ctx.ws.G_val - G_oracle).max(axis=1) / scale


def _euclidean_tables(ctx):
    return cn.euclidean_table_residuals(ctx.ws, ctx.vaisman, ctx.vranceanu)


_register(
    "special.riemannian_cartan_zero",
    "riemannian: the vertical coefficient table vanishes",
    "exact",
    _riemannian_cartan,
    tolerance=1e-12,
    applies=lambda M: M.family == "riemannian",
)
_register(
    "special.spray_christoffel",
    "riemannian: spray equals the Christoffel oracle from finite differences",
    "derivative",
    _christoffel_oracle,
    tolerance=1e-6,
    applies=lambda M: M.family == "riemannian",
)
_register(
    "special.euclidean_tables",
    "euclidean: connection tables reduce to the round-indicatrix values",
    "algebraic",
    _euclidean_tables,
    applies=lambda M: M.family == "euclidean",
)

# -- global numerics checks ------------------------------------------------------------------------------


def _fd_cross_check(metric: FinslerMetric, seed: int, spots: int = 50) -> np.ndarray:
    """AD vs finite differences on random spot checks: derivatives of F^2 up
    to order 3, spray, nonlinear connection and its derivative."""
    rng = np.random.default_rng([seed, zlib.crc32(b"fd_cross")])
    n = metric.n
    x, y = sample_points(metric, spots, seed + 101)
    names = [f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)]
    f2 = metric.field_F2
    out = np.zeros(spots)

    def g_fun(i):
        def fn(xv, yv):
            return sp.spray_values(metric, np.asarray(xv)[None, :], np.asarray(yv)[None, :])[0, i]

        return fn

    def n_fun(j, i):
        def fn(xv, yv):
            ws = sp.Workspace(metric, np.asarray(xv)[None, :], np.asarray(yv)[None, :], order=3)
            return ws.N_val[0, j, i]

        return fn

    for s in range(spots):
        p = TangentPoint(x[s], y[s])
        kind = s % 5
        ws = sp.Workspace(metric, x[s][None, :], y[s][None, :], order=4)
        if kind in (0, 1, 2):
            order = kind + 1
            idx = [names[int(k)] for k in rng.integers(0, 2 * n, size=order)]
            fd = fd_oracle(f2, p, idx)
            jet = ws.L
            for nm in idx:
                slot = names.index(nm)
                jet = jet.deriv(slot)
            ad = float(jet.value[0])
        elif kind == 3:
            j, i = (int(v) for v in rng.integers(0, n, size=2))
            fd = _fd_scalar(g_fun(j), x[s], y[s], n + i)
            ad = float(ws.N_val[0, j, i])
        else:
            j, i = (int(v) for v in rng.integers(0, n, size=2))
            k = int(rng.integers(0, 2 * n))
            fd = _fd_scalar(n_fun(j, i), x[s], y[s], k)
            val = ws.N[j][i].deriv(k)
            ad = float(val.value[0])
        scale = max(abs(fd), abs(ad), 1.0)
        out[s] = abs(ad - fd) / scale
    return out


def _fd_scalar(fn, xv, yv, slot, h=1e-5):
    chart = np.concatenate([xv, yv])

    def at(c):
        return fn(c[: len(xv)], c[len(xv) :])

    def diff(hh):
        plus = chart.copy()
        plus[slot] += hh
        minus = chart.copy()
        minus[slot] -= hh
        return (at(plus) - at(minus)) / (2 * hh)

    return (4.0 * diff(h / 2) - diff(h)) / 3.0


def _rk4_order(metric: FinslerMetric, seed: int) -> np.ndarray:
    """Conserved-quantity drift must scale as dt^4: log2 of successive drift
    ratios within 1 of 4 across dt in {1e-2, 5e-3, 2.5e-3}."""
    rng = np.random.default_rng([seed, zlib.crc32(b"rk4")])
    x0 = rng.uniform(-0.15, 0.15, size=metric.n)
    y0 = rng.uniform(1.3, 1.7, size=metric.n)
    p0 = TangentPoint(x0, y0)
    T = 0.4
    drifts = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        res = sp.integrate_geodesic(metric, p0, int(round(T / dt)), dt)
        drifts.append(res.drift)
    out = []
    for a, b in zip(drifts, drifts[1:]):
        ratio = a / b if b > 0 else np.inf
        out.append(abs(np.log2(ratio) - 4.0))
    return np.array(out)


def _rk4_exact(metric: FinslerMetric, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, zlib.crc32(b"rk4")])
    x0 = rng.uniform(-0.3, 0.3, size=metric.n)
    y0 = rng.uniform(0.7, 1.2, size=metric.n)
    res = sp.integrate_geodesic(metric, TangentPoint(x0, y0), 200, 1e-3)
    return np.array([res.drift])


_register(
    "numerics.fd_cross",
    "AD derivatives match finite differences on random spot checks",
    "derivative",
    _fd_cross_check,
    tolerance=1e-5,
    scope="global",
)
_register(
    "numerics.rk4_order",
    "geodesic conserved-quantity drift scales as dt^4 (factor 2)",
    "derivative",
    _rk4_order,
    tolerance=1.0,
    scope="global",
    applies=lambda M: M.family != "euclidean",
)
_register(
    "numerics.rk4_exact",
    "euclidean geodesics are exactly straight (drift at roundoff)",
    "exact",
    _rk4_exact,
    tolerance=1e-12,
    scope="global",
    applies=lambda M: M.family == "euclidean",
)


# -- sweep runner ---------------------------------------------------------------------------------------


@dataclass
class CheckResult:
    check: CheckDef
    max_residual: float
    mean_residual: float
    worst_point: dict | None
    passed: bool


def select_checks(metric: FinslerMetric, patterns=None) -> list:
    chosen = []
    for c in CHECKS:
        if not c.applicable(metric):
            continue
        if patterns and not any(c.id == p or c.id.startswith(p.rstrip("*")) for p in patterns):
            continue
        chosen.append(c)
    return chosen


def run_verification(
    metric: FinslerMetric,
    points: int = 1000,
    seed: int = 42,
    checks=None,
    tolerance: float | None = None,
    tol_profile: dict | None = None,
    threads: int = 1,
) -> dict:
    """Run the check suite over sampled points and aggregate a report."""
    start = time.perf_counter()
    selected = select_checks(metric, checks)
    x, y = sample_points(metric, points, seed)
    bounds = [(i, min(i + CHUNK_SIZE, points)) for i in range(0, points, CHUNK_SIZE)]

    point_checks = [c for c in selected if c.scope == "point"]
    global_checks = [c for c in selected if c.scope == "global"]

    def run_chunk(args):
        index, (lo, hi) = args
        ctx = ChunkContext(metric, x[lo:hi], y[lo:hi], seed, index)
        return {c.id: np.asarray(c.fn(ctx)) for c in point_checks}

    chunk_results = [None] * len(bounds)
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for i, out in enumerate(pool.map(run_chunk, enumerate(bounds))):
                chunk_results[i] = out
    else:
        for i, b in enumerate(bounds):
            chunk_results[i] = run_chunk((i, b))

    results = []
    for c in point_checks:
        res = np.concatenate([cr[c.id] for cr in chunk_results])
        tol = _effective_tol(c, tolerance, tol_profile)
        k = int(np.argmax(res))
        results.append(
            CheckResult(
                check=c,
                max_residual=float(res.max()),
                mean_residual=float(res.mean()),
                worst_point={"x": x[k].tolist(), "y": y[k].tolist()},
                passed=bool(res.max() <= tol),
            )
        )
    for c in global_checks:
        res = np.asarray(c.fn(metric, seed))
        tol = _effective_tol(c, tolerance, tol_profile)
        results.append(
            CheckResult(
                check=c,
                max_residual=float(res.max()),
                mean_residual=float(res.mean()),
                worst_point=None,
                passed=bool(res.max() <= tol),
            )
        )

    wall = time.perf_counter() - start
    report = {
        "meta": {
            "tool": "finslerlab",
            "version": _version(),
            "metric": metric.name,
            "family": metric.family,
            "n": metric.n,
            "points": points,
            "seed": seed,
            "threads": threads,
            "chunk": CHUNK_SIZE,
            "checks_selected": [c.id for c in selected],
            "wall_time_s": wall,
        },
        "checks": [
            {
                "id": r.check.id,
                "identity": r.check.identity,
                "class": r.check.klass,
                "tolerance": _effective_tol(r.check, tolerance, tol_profile),
                "max_residual": r.max_residual,
                "mean_residual": r.mean_residual,
                "worst_point": r.worst_point,
                "pass": r.passed,
            }
            for r in results
        ],
        "pass": all(r.passed for r in results),
    }
    return report


def _effective_tol(check: CheckDef, tolerance, tol_profile) -> float:
    if tolerance is not None:
        return float(tolerance)
    if tol_profile and check.klass in tol_profile:
        return float(tol_profile[check.klass])
    return check.tolerance


def _version() -> str:
    from . import __version__

    return __version__
