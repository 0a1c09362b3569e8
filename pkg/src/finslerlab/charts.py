"""Two-chart consistency: tensor changing rules and the frame determinant.

Chart maps are polynomial diffeomorphisms with polynomial inverses, so exact
jets exist on both sides: the catalog holds linear maps and unipotent
triangular cubic shears composed with a linear map (their inverses come from
back substitution and stay polynomial).  The pushed-forward metric
Ftilde(xt, yt) = F(psi(xt), Dpsi(xt) yt) is evaluated through the same
generic arithmetic, so the target-chart pipeline is as exact as the source.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .jets import TangentPoint
from .metrics import FinslerMetric, Poly
from .spray import Workspace

# -- polynomial helpers (dict of powers -> coef) ----------------------------------


def _pconst(n, c):
    return {(0,) * n: float(c)} if c != 0.0 else {}


def _pvar(n, i):
    powers = tuple(1 if k == i else 0 for k in range(n))
    return {powers: 1.0}


def _padd(p, q):
    out = dict(p)
    for k, v in q.items():
        out[k] = out.get(k, 0.0) + v
    return {k: v for k, v in out.items() if v != 0.0}


def _pscale(p, c):
    return {k: c * v for k, v in p.items()} if c != 0.0 else {}


def _pmul(p, q):
    out = {}
    for kp, vp in p.items():
        for kq, vq in q.items():
            k = tuple(a + b for a, b in zip(kp, kq))
            out[k] = out.get(k, 0.0) + vp * vq
    return {k: v for k, v in out.items() if v != 0.0}


def _pdiff(p, i):
    out = {}
    for powers, coef in p.items():
        if powers[i] == 0:
            continue
        newp = tuple(e - 1 if k == i else e for k, e in enumerate(powers))
        out[newp] = out.get(newp, 0.0) + coef * powers[i]
    return out


def _psubst_linear(p, n, Binv):
    """Substitute z_k = sum_l Binv[k, l] x_l into polynomial p(z)."""
    out = {}
    for powers, coef in p.items():
        term = _pconst(n, coef)
        for k, e in enumerate(powers):
            lin = {}
            for l in range(n):
                if Binv[k, l] != 0.0:
                    lin = _padd(lin, _pscale(_pvar(n, l), Binv[k, l]))
            for _ in range(e):
                term = _pmul(term, lin)
        out = _padd(out, term)
    return out


def _to_poly(n, p):
    return Poly(n, tuple((coef, powers) for powers, coef in sorted(p.items())))


# -- chart map --------------------------------------------------------------------


@dataclass(frozen=True)
class ChartMap:
    """Polynomial diffeomorphism xtilde = phi(x) with exact polynomial inverse."""

    n: int
    name: str
    forward: tuple  # n Poly components of phi
    inverse: tuple  # n Poly components of psi = phi^{-1}
    d_forward: tuple  # d_forward[i][k] = d phi_i / d x_k (Poly)
    d_inverse: tuple
    d2_forward: tuple  # d2_forward[i][k][l] (Poly)

    @staticmethod
    def from_polys(n, name, fwd, inv, x_box=None):
        dfwd = tuple(tuple(_to_poly(n, _pdiff(f, k)) for k in range(n)) for f in fwd)
        dinv = tuple(tuple(_to_poly(n, _pdiff(f, k)) for k in range(n)) for f in inv)
        d2f = tuple(
            tuple(tuple(_to_poly(n, _pdiff(_pdiff(f, k), l)) for l in range(n)) for k in range(n)) for f in fwd
        )
        cm = ChartMap(
            n,
            name,
            tuple(_to_poly(n, f) for f in fwd),
            tuple(_to_poly(n, f) for f in inv),
            dfwd,
            dinv,
            d2f,
        )
        cm._probe(x_box)
        return cm

    def _probe(self, x_box, probes: int = 16):
        box = np.array([[-1.0, 1.0]] * self.n) if x_box is None else np.asarray(x_box, float)
        rng = np.random.default_rng(3)
        xs = rng.uniform(size=(probes, self.n)) * (box[:, 1] - box[:, 0]) + box[:, 0]
        J = self.jacobian(xs)
        dets = np.linalg.det(J)
        if np.any(np.abs(dets) <= 1e-3):
            raise ConfigError(f"chart map {self.name}: |det Dphi| <= 1e-3 on the domain box")
        # round trip must be identity to roundoff
        back = self.apply_inverse(self.apply(xs))
        if np.abs(back - xs).max() > 1e-9:
            raise ConfigError(f"chart map {self.name}: inverse is not exact")

    # evaluation (plain values, batched)

    def apply(self, x: np.ndarray) -> np.ndarray:
        xs = list(np.atleast_2d(np.asarray(x, float)).T)
        return np.stack([np.broadcast_to(f(xs), xs[0].shape) for f in self.forward], axis=1)

    def apply_inverse(self, xt: np.ndarray) -> np.ndarray:
        xs = list(np.atleast_2d(np.asarray(xt, float)).T)
        return np.stack([np.broadcast_to(f(xs), xs[0].shape) for f in self.inverse], axis=1)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Dphi with entries [b, i, k] = d phi_i / d x_k."""
        xs = list(np.atleast_2d(np.asarray(x, float)).T)
        B = xs[0].shape[0]
        rows = [[np.broadcast_to(self.d_forward[i][k](xs), (B,)) for k in range(self.n)] for i in range(self.n)]
        return np.stack([np.stack(r, axis=1) for r in rows], axis=1)

    def inverse_jacobian(self, xt: np.ndarray) -> np.ndarray:
        """Dpsi (= dx/dxtilde) evaluated at target points."""
        xs = list(np.atleast_2d(np.asarray(xt, float)).T)
        B = xs[0].shape[0]
        rows = [[np.broadcast_to(self.d_inverse[i][k](xs), (B,)) for k in range(self.n)] for i in range(self.n)]
        return np.stack([np.stack(r, axis=1) for r in rows], axis=1)

    def second_derivative(self, x: np.ndarray) -> np.ndarray:
        """D2phi with entries [b, i, k, l]."""
        xs = list(np.atleast_2d(np.asarray(x, float)).T)
        B = xs[0].shape[0]
        return np.stack(
            [
                np.stack(
                    [
                        np.stack([np.broadcast_to(self.d2_forward[i][k][l](xs), (B,)) for l in range(self.n)], axis=1)
                        for k in range(self.n)
                    ],
                    axis=1,
                )
                for i in range(self.n)
            ],
            axis=1,
        )


# -- catalog -----------------------------------------------------------------------


def identity_map(n: int) -> ChartMap:
    fwd = [_pvar(n, i) for i in range(n)]
    return ChartMap.from_polys(n, "identity", fwd, [dict(f) for f in fwd])


_LINEAR_MIX = 0.3


def _default_linear_matrix(n: int) -> np.ndarray:
    A = np.eye(n)
    for i in range(n):
        A[i, (i + 1) % n] += _LINEAR_MIX
        A[i, i] += 0.1 * i
    return A


def linear_map(n: int, A: np.ndarray | None = None) -> ChartMap:
    A = _default_linear_matrix(n) if A is None else np.asarray(A, float)
    if abs(np.linalg.det(A)) <= 1e-3:
        raise ConfigError("chart map linear: |det Dphi| <= 1e-3 on the domain box")
    Ainv = np.linalg.inv(A)
    fwd = [_padd({}, {k: v for k, v in _linrow(n, A[i]).items()}) for i in range(n)]
    inv = [_linrow(n, Ainv[i]) for i in range(n)]
    return ChartMap.from_polys(n, "linear", fwd, inv)


def _linrow(n, row):
    out = {}
    for l in range(n):
        if row[l] != 0.0:
            out = _padd(out, _pscale(_pvar(n, l), row[l]))
    return out


def cubic_map(n: int, eps: float = 0.3, A: np.ndarray | None = None) -> ChartMap:
    """phi = A o u with u a unipotent triangular cubic shear:
    u_0 = x_0, u_1 = x_1 + eps x_0^3, u_i = x_i + eps x_{i-2} x_{i-1} (i >= 2)."""
    A = _default_linear_matrix(n) if A is None else np.asarray(A, float)
    Ainv = np.linalg.inv(A)

    def shear_term(i, var_polys):
        if i == 0:
            return {}
        if i == 1:
            cube = _pmul(_pmul(var_polys[0], var_polys[0]), var_polys[0])
            return _pscale(cube, eps)
        return _pscale(_pmul(var_polys[i - 2], var_polys[i - 1]), eps)

    xvars = [_pvar(n, i) for i in range(n)]
    u = [_padd(xvars[i], shear_term(i, xvars)) for i in range(n)]
    fwd = [_linrow_combo(n, A[i], u) for i in range(n)]

    # invert u by back substitution (polynomials in the intermediate variable)
    uinv = []
    for i in range(n):
        uinv.append(_padd(xvars[i], _pscale(shear_term(i, uinv), -1.0)))
    # psi = u^{-1} o A^{-1}
    inv = [_psubst_linear(p, n, Ainv) for p in uinv]
    return ChartMap.from_polys(n, "cubic", fwd, inv)


def _linrow_combo(n, row, polys):
    out = {}
    for l in range(n):
        if row[l] != 0.0:
            out = _padd(out, _pscale(polys[l], row[l]))
    return out


def chart_catalog(n: int) -> list:
    return [identity_map(n), linear_map(n), cubic_map(n)]


# -- induced maps and pushforward ---------------------------------------------------


def induced_tangent_map(C: ChartMap, p: TangentPoint):
    """Image point and the 2n x 2n Jacobian of the induced map on the slit
    tangent bundle: (x, y) -> (phi(x), Dphi(x) y)."""
    xt = C.apply(p.x[None, :])[0]
    J = C.jacobian(p.x[None, :])[0]
    D2 = C.second_derivative(p.x[None, :])[0]
    yt = J @ p.y
    n = C.n
    full = np.zeros((2 * n, 2 * n))
    full[:n, :n] = J
    full[n:, n:] = J
    full[n:, :n] = np.einsum("ikl,k->il", D2, p.y)
    return TangentPoint(xt, yt), full


def pushforward_metric(M: FinslerMetric, C: ChartMap) -> FinslerMetric:
    """The same Finsler structure expressed in the target chart."""
    n = M.n
    from .metrics import MonomialCache

    def ev(xt, yt):
        cache = MonomialCache(xt)
        xs = [f(xt, cache) for f in C.inverse]
        ys = []
        for i in range(n):
            acc = None
            for k in range(n):
                d = C.d_inverse[i][k](xt, cache)
                term = d * yt[k]
                acc = term if acc is None else acc + term
            ys.append(acc)
        return M.evaluate(xs, ys)

    wide = np.array([[-1e6, 1e6]] * n)
    return FinslerMetric(n, M.family, ev, wide, name=f"{M.name}@{C.name}", params=M.params)


# -- two-chart residuals -------------------------------------------------------------


def _gather_rows(arr: np.ndarray, idx: np.ndarray) -> np.ndarray:
    shape = idx.shape + (1,) * (arr.ndim - 2)
    return np.take_along_axis(arr, idx.reshape(shape), axis=1)


def chart_residuals(
    M: FinslerMetric,
    C: ChartMap,
    x: np.ndarray,
    y: np.ndarray,
    order: int = 3,
    ws: Workspace | None = None,
    wt: Workspace | None = None,
) -> dict:
    """All two-chart consistency residuals at a batch of source points.

    Index conventions: J[b, i, k] = dphi_i/dx_k (dxtilde/dx) at the source
    points; Dpsi[b, i, k] = dpsi_i/dxtilde_k (dx/dxtilde) at the images.
    Vertical vectors push forward with J and pull back with Dpsi.
    Prebuilt source/target workspaces may be passed in to share pipelines.
    """
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    B, n = x.shape
    ws = Workspace(M, x, y, order=order) if ws is None else ws
    xt = C.apply(x)
    J = C.jacobian(x)
    yt = np.einsum("bik,bk->bi", J, y)
    if wt is None:
        wt = Workspace(pushforward_metric(M, C), xt, yt, order=order)
    Dpsi = C.inverse_jacobian(xt)

    res = {}
    res["scalar_invariance"] = np.abs(ws.F_val - wt.F_val) / ws.F_val

    # covector rule: ttilde_k1 = (dx^k/dxtilde^k1) t_k
    t_push = np.einsum("bki,bk->bi", Dpsi, ws.t_val)
    res["covector_rule"] = np.abs(wt.t_val - t_push).max(axis=1) * ws.F_val

    # fundamental tensor transforms as a (0,2) tensor in the y slot
    g_push = np.einsum("bki,bkl,blj->bij", Dpsi, ws.g_val, Dpsi)
    res["metric_tensor_rule"] = np.abs(wt.g_val - g_push).max(axis=(1, 2)) / np.abs(wt.g_val).max(axis=(1, 2))

    # vertical frame rule: bar-tilde_i1 = (dx^k/dxtilde^i1) bar_k, compared in
    # target coordinates (source coefficients pushed with J)
    rhs = np.einsum("bki,bjl,bkl->bij", Dpsi, J, ws.E_val)
    res["bar_frame_rule"] = np.abs(wt.E_val - rhs).max(axis=(1, 2))

    # Liouville field is natural: push of (0, y) equals (0, ytilde)
    res["radial_invariance"] = np.abs(np.einsum("bik,bk->bi", J, y) - yt).max(axis=1)

    # kept-frame relation: pull target kept fields back and expand them over
    # the kept source fields with Q[i, i1] = Dpsi[i, i1] - (y^i/y^m) Dpsi[m, i1]
    m = ws.dropped_index
    k = wt.dropped_index
    kept_s = ws.kept_indices
    kept_t = wt.kept_indices
    ym = np.take_along_axis(y, m[:, None], axis=1)[:, 0]
    Dm = np.take_along_axis(Dpsi, m[:, None, None], axis=1)[:, 0, :]
    Q = Dpsi - (y / ym[:, None])[:, :, None] * Dm[:, None, :]
    pulled = np.einsum("blj,bij->bil", Dpsi, wt.E_val)  # [b, target field i1, source coeff l]
    Qs = _gather_rows(Q, kept_s)  # rows over kept source i
    Es = _gather_rows(ws.E_val, kept_s)
    expansion = np.einsum("bqi,bql->bil", Qs, Es)  # [b, target index i1, coeff l]
    lhs_kept = _gather_rows(pulled, kept_t)
    rhs_kept = _gather_rows(expansion, kept_t)
    res["kept_frame_rule"] = np.abs(lhs_kept - rhs_kept).max(axis=(1, 2))

    # change-of-basis determinant between {bar (drop m), Gamma} and the pulled
    # target {bar-tilde (drop k), Gamma}: numeric vs closed form
    S = np.concatenate([Es, y[:, None, :]], axis=1)
    T = np.concatenate([lhs_kept, y[:, None, :]], axis=1)
    det_numeric = np.linalg.det(T) / np.linalg.det(S)
    ytk = np.take_along_axis(yt, k[:, None], axis=1)[:, 0]
    sign = np.where((m + k) % 2 == 0, 1.0, -1.0)
    det_closed = sign * (ytk / ym) * np.linalg.det(Dpsi)
    res["determinant_formula"] = np.abs(det_numeric - det_closed) / np.abs(det_closed)

    # horizontal frame pushes to horizontal frame (vertical leakage at image)
    D2 = C.second_derivative(x)
    Jfull = np.zeros((B, 2 * n, 2 * n))
    Jfull[:, :n, :n] = J
    Jfull[:, n:, n:] = J
    Jfull[:, n:, :n] = np.einsum("bikl,bk->bil", D2, y)
    hor_rows = np.concatenate(
        [np.broadcast_to(np.eye(n), (B, n, n)), -ws.N_val.transpose(0, 2, 1)], axis=2
    )
    pushed = np.einsum("bci,bai->bac", Jfull, hor_rows)
    vert = np.stack([wt.vertical_part_values(pushed[:, a, :]) for a in range(n)], axis=1)
    res["horizontal_pushforward"] = np.abs(vert).max(axis=(1, 2)) / (1.0 + np.abs(pushed).max(axis=(1, 2)))
    return res


# -- public per-point ops --------------------------------------------------------------


def check_tk_rule(M: FinslerMetric, C: ChartMap, p: TangentPoint) -> float:
    return float(chart_residuals(M, C, p.x[None, :], p.y[None, :])["covector_rule"][0])


def check_barframe_rule(M: FinslerMetric, C: ChartMap, p: TangentPoint) -> dict:
    r = chart_residuals(M, C, p.x[None, :], p.y[None, :])
    return {
        "bar_frame_rule": float(r["bar_frame_rule"][0]),
        "kept_frame_rule": float(r["kept_frame_rule"][0]),
        "radial_invariance": float(r["radial_invariance"][0]),
    }


def frame_change_determinant(M: FinslerMetric, C: ChartMap, p: TangentPoint):
    """(numeric determinant, closed-form value) of the vertical basis change."""
    x, y = p.x[None, :], p.y[None, :]
    ws = Workspace(M, x, y, order=3)
    xt = C.apply(x)
    J = C.jacobian(x)
    yt = np.einsum("bik,bk->bi", J, y)
    wt = Workspace(pushforward_metric(M, C), xt, yt, order=3)
    Dpsi = C.inverse_jacobian(xt)
    m, k = ws.dropped_index, wt.dropped_index
    ym = np.take_along_axis(y, m[:, None], axis=1)[:, 0]
    ytk = np.take_along_axis(yt, k[:, None], axis=1)[:, 0]
    pulled = np.einsum("blj,bij->bil", Dpsi, wt.E_val)  # [b, target field, source coeff]
    S = np.concatenate([_gather_rows(ws.E_val, ws.kept_indices), y[:, None, :]], axis=1)
    T = np.concatenate([_gather_rows(pulled, wt.kept_indices), y[:, None, :]], axis=1)
    numeric = float(np.linalg.det(T)[0] / np.linalg.det(S)[0])
    sign = 1.0 if (int(m[0]) + int(k[0])) % 2 == 0 else -1.0
    closed = float(sign * (ytk[0] / ym[0]) * np.linalg.det(Dpsi)[0])
    return numeric, closed
