"""Finsler metric catalog: families, fundamental tensor, homogeneity identities.

A metric is a positive, positively 1-homogeneous-in-y scalar field F on the
slit chart.  Coefficient data for the riemannian / randers families may be
constant or polynomial in x (degree <= 3), so exact jets are always available.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DegenerateMetricError
from .jets import Jet, ScalarField, TangentPoint, sqrt

CONDITION_LIMIT = 1e12

_HOMOGENEITY_LAMBDAS = (0.5, 2.0, 3.7)


class MonomialCache:
    """Shared monomial values for evaluating many polynomials at one point.

    Polynomials over the same scalars (floats or jets) share every power
    product, which matters when the scalars are jets: each multiply carries
    full derivative tensors.
    """

    def __init__(self, xs):
        self.xs = list(xs)
        self.values = {(0,) * len(self.xs): 1.0}

    def monomial(self, powers):
        got = self.values.get(powers)
        if got is not None:
            return got
        i = next(k for k, p in enumerate(powers) if p > 0)
        prev = tuple(p - 1 if k == i else p for k, p in enumerate(powers))
        val = self.monomial(prev) * self.xs[i]
        self.values[powers] = val
        return val


@dataclass(frozen=True)
class Poly:
    """Polynomial in the x-variables: sum of coef * prod x_i^powers_i."""

    n: int
    terms: tuple  # ((coef, powers), ...)

    def __call__(self, x, cache: MonomialCache | None = None):
        cache = MonomialCache(x) if cache is None else cache
        total = 0.0
        for coef, powers in self.terms:
            total = total + coef * cache.monomial(powers)
        return total

    def degree(self) -> int:
        return max((sum(p) for _, p in self.terms), default=0)


def _eval_coef(c, x, cache: MonomialCache | None = None):
    return c(x, cache) if isinstance(c, Poly) else c


@dataclass(frozen=True)
class FinslerMetric:
    """A Finsler function with declared dimension and chart domain.

    Immutable and shareable across threads; evaluation is pure.  `evaluate`
    runs on floats and jets alike.
    """

    n: int
    family: str
    evaluate: Callable = field(repr=False)
    x_box: np.ndarray = field(default=None)
    params: dict = field(default_factory=dict, repr=False)
    name: str = "metric"

    def __post_init__(self):
        box = self.x_box
        if box is None:
            box = np.array([[-1.0, 1.0]] * self.n)
        object.__setattr__(self, "x_box", np.asarray(box, dtype=float))

    @property
    def field_F(self) -> ScalarField:
        return ScalarField(self.n, self.evaluate)

    @property
    def field_F2(self) -> ScalarField:
        def f2(x, y):
            v = self.evaluate(x, y)
            return v * v

        return ScalarField(self.n, f2)

    def F(self, x, y) -> float:
        return float(self.evaluate(list(np.asarray(x, float)), list(np.asarray(y, float))))

    def in_box(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all((x >= self.x_box[:, 0]) & (x <= self.x_box[:, 1]), axis=1)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def euclidean(n: int, name: str = "euclidean") -> "FinslerMetric":
        def ev(x, y):
            q = y[0] * y[0]
            for i in range(1, n):
                q = q + y[i] * y[i]
            return sqrt(q)

        return FinslerMetric(n, "euclidean", ev, name=name)

    @staticmethod
    def riemannian(n: int, a, x_box=None, name: str = "riemannian") -> "FinslerMetric":
        a = _check_coef_matrix(a, n)

        def ev(x, y):
            cache = MonomialCache(x)
            q = 0.0
            for i in range(n):
                for j in range(i, n):
                    w = 1.0 if i == j else 2.0
                    q = q + w * _eval_coef(a[i][j], x, cache) * y[i] * y[j]
            return sqrt(q)

        return FinslerMetric(n, "riemannian", ev, x_box, {"a": a}, name)

    @staticmethod
    def randers(n: int, a, b, x_box=None, name: str = "randers") -> "FinslerMetric":
        a = _check_coef_matrix(a, n)
        b = _check_coef_vector(b, n)

        def ev(x, y):
            cache = MonomialCache(x)
            q = 0.0
            for i in range(n):
                for j in range(i, n):
                    w = 1.0 if i == j else 2.0
                    q = q + w * _eval_coef(a[i][j], x, cache) * y[i] * y[j]
            lin = 0.0
            for i in range(n):
                lin = lin + _eval_coef(b[i], x, cache) * y[i]
            return sqrt(q) + lin

        return FinslerMetric(n, "randers", ev, x_box, {"a": a, "b": b}, name)

    @staticmethod
    def custom(n: int, evaluator: Callable, x_box=None, name: str = "custom") -> "FinslerMetric":
        """User-supplied evaluator; smoothness on the slit chart is taken on
        trust (probes only warn)."""
        return FinslerMetric(n, "custom", evaluator, x_box, name=name)


def _check_coef_matrix(a, n):
    a = [list(row) for row in a]
    if len(a) != n or any(len(row) != n for row in a):
        raise ConfigError(f"coefficient matrix must be {n}x{n}")
    for i in range(n):
        for j in range(n):
            if isinstance(a[i][j], Poly):
                if a[i][j].degree() > 3:
                    raise ConfigError("polynomial coefficients limited to degree 3")
            else:
                a[i][j] = float(a[i][j])
    for i in range(n):
        for j in range(i):
            same = a[i][j] == a[j][i] if not isinstance(a[i][j], Poly) else a[i][j].terms == a[j][i].terms
            if not same:
                raise ConfigError("coefficient matrix must be symmetric")
    return tuple(tuple(row) for row in a)


def _check_coef_vector(b, n):
    b = list(b)
    if len(b) != n:
        raise ConfigError(f"coefficient vector must have length {n}")
    return tuple(c if isinstance(c, Poly) else float(c) for c in b)


# -- fundamental tensor ----------------------------------------------------


@dataclass(frozen=True)
class FundamentalTensor:
    """g_ij = half the y-Hessian of F^2, with its inverse, at one point."""

    g: np.ndarray
    g_inv: np.ndarray
    at: TangentPoint


def metric_matrices(M: FinslerMetric, x: np.ndarray, y: np.ndarray):
    """Batched fundamental tensor: g, g_inv with shape (B, n, n).

    Raises DegenerateMetricError when any sampled g has condition number above
    CONDITION_LIMIT, naming the offending point.
    """
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    B, n = y.shape
    ys = [Jet.variable(y[:, i], i, n, 2) for i in range(n)]
    xs = list(x.T)
    f = M.evaluate(xs, ys)
    L = f * f
    g = 0.5 * L.coeffs[2]
    cond = np.linalg.cond(g)
    bad = ~(cond < CONDITION_LIMIT)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise DegenerateMetricError(
            f"fundamental tensor singular or ill-conditioned (cond={cond[k]:.3e}) "
            f"at x={x[k].tolist()}, y={y[k].tolist()}",
            x=x[k],
            y=y[k],
        )
    return g, np.linalg.inv(g)


def fundamental_tensor(M: FinslerMetric, p: TangentPoint) -> FundamentalTensor:
    g, g_inv = metric_matrices(M, p.x[None, :], p.y[None, :])
    return FundamentalTensor(g=g[0], g_inv=g_inv[0], at=p)


# -- homogeneity identities --------------------------------------------------


@dataclass(frozen=True)
class EulerReport:
    """Dimensionless residuals of the three degree-1 homogeneity identities.

    norm_residual:    |F^2 - y^i y^j g_ij| / F^2
    gradient_residual: max_k |dF/dy^k - y^i g_ki / F| scaled by |y|/F
    vertical_residual: max_{j,k} |y^i dg_ij/dy^k| scaled by |y|^2/F^2
    """

    norm_residual: float
    gradient_residual: float
    vertical_residual: float


def euler_residuals(M: FinslerMetric, x: np.ndarray, y: np.ndarray):
    """Batched residual arrays (each shape (B,)) for the EulerReport fields."""
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    B, n = y.shape
    ys = [Jet.variable(y[:, i], i, n, 3) for i in range(n)]
    xs = list(x.T)
    F = M.evaluate(xs, ys)
    L = F * F
    F0 = F.value
    g = 0.5 * L.coeffs[2]
    dg = 0.5 * L.coeffs[3]
    yn = np.linalg.norm(y, axis=1)

    r_norm = np.abs(F0**2 - np.einsum("bi,bj,bij->b", y, y, g)) / F0**2
    grad_diff = F.coeffs[1] - np.einsum("bi,bik->bk", y, g) / F0[:, None]
    r_grad = np.abs(grad_diff).max(axis=1) * yn / F0
    r_vert = np.abs(np.einsum("bi,bijk->bjk", y, dg)).max(axis=(1, 2)) * yn**2 / F0**2
    return r_norm, r_grad, r_vert


def euler_identities(M: FinslerMetric, p: TangentPoint) -> EulerReport:
    r1, r2, r3 = euler_residuals(M, p.x[None, :], p.y[None, :])
    return EulerReport(float(r1[0]), float(r2[0]), float(r3[0]))


# -- sampling ---------------------------------------------------------------


def sample_points(M: FinslerMetric, count: int, seed: int):
    """Deterministic sample of chart points: x uniform in the domain box,
    y = (uniform radius in [0.5, 2]) x (uniform direction).

    Draw order is fixed (x block, then directions, then radii) so the sample
    depends only on (n, count, seed).
    """
    rng = np.random.default_rng(seed)
    lo, hi = M.x_box[:, 0], M.x_box[:, 1]
    x = rng.uniform(size=(count, M.n)) * (hi - lo) + lo
    direction = rng.normal(size=(count, M.n))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rng.uniform(0.5, 2.0, size=count)
    return x, direction * radius[:, None]


# -- configuration ----------------------------------------------------------

_TOP_FIELDS = {"family", "n", "a", "b", "domain", "name"}


def _parse_poly(entry, n, where):
    if isinstance(entry, (int, float)):
        return float(entry)
    if isinstance(entry, dict) and set(entry) == {"poly"}:
        terms = []
        for t in entry["poly"]:
            if set(t) != {"coef", "powers"} or len(t["powers"]) != n:
                raise ConfigError(f"bad polynomial term in {where}: {t}")
            powers = tuple(int(p) for p in t["powers"])
            if any(p < 0 for p in powers) or sum(powers) > 3:
                raise ConfigError(f"polynomial in {where} must have degree 0..3")
            terms.append((float(t["coef"]), powers))
        return Poly(n, tuple(terms))
    raise ConfigError(f"entry in {where} must be a number or {{'poly': [...]}}")


def load_metric(config) -> FinslerMetric:
    """Build a metric from a config document (dict, JSON string, or path).

    Unknown fields are rejected.  After construction, 1-homogeneity and
    positive-definiteness are probed at 8 seeded points; failures are
    reported as warnings naming the offending point.  A randers metric with
    |b|_a >= 1 (indicatrix convexity violated) is rejected outright.
    """
    if isinstance(config, str):
        text = config
        if not config.lstrip().startswith("{"):
            with open(config, "r", encoding="utf-8") as fh:
                text = fh.read()
        try:
            config = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(config) - _TOP_FIELDS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    family = config.get("family")
    if family not in ("euclidean", "riemannian", "randers"):
        raise ConfigError(
            f"unknown family {family!r}; config supports euclidean, riemannian, "
            "randers (custom metrics are constructed programmatically)"
        )
    try:
        n = int(config["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("config field 'n' must be a positive integer") from exc
    if n < 2:
        raise ConfigError("dimension n must be >= 2")
    name = config.get("name", family)

    x_box = None
    if "domain" in config:
        dom = config["domain"]
        if not isinstance(dom, dict) or set(dom) - {"x"}:
            raise ConfigError("domain must be {'x': [[lo, hi], ...]}")
        x_box = np.asarray(dom["x"], dtype=float)
        if x_box.shape != (n, 2) or np.any(x_box[:, 0] >= x_box[:, 1]):
            raise ConfigError("domain.x must be n rows of [lo, hi] with lo < hi")

    if family == "euclidean":
        if "a" in config or "b" in config:
            raise ConfigError("euclidean takes no coefficient fields")
        M = FinslerMetric.euclidean(n, name=name)
        M = FinslerMetric(n, "euclidean", M.evaluate, x_box, name=name)
    else:
        if "a" not in config:
            raise ConfigError(f"family {family} requires field 'a'")
        a_rows = config["a"]
        if not isinstance(a_rows, list) or len(a_rows) != n:
            raise ConfigError(f"'a' must be an {n}x{n} array")
        a = [[_parse_poly(e, n, f"a[{i}][{j}]") for j, e in enumerate(row)] for i, row in enumerate(a_rows)]
        if family == "riemannian":
            if "b" in config:
                raise ConfigError("riemannian takes no field 'b'")
            M = FinslerMetric.riemannian(n, a, x_box, name=name)
        else:
            if "b" not in config:
                raise ConfigError("randers requires field 'b'")
            b_row = config["b"]
            if not isinstance(b_row, list) or len(b_row) != n:
                raise ConfigError(f"'b' must have length {n}")
            b = [_parse_poly(e, n, f"b[{i}]") for i, e in enumerate(b_row)]
            M = FinslerMetric.randers(n, a, b, x_box, name=name)
            _check_randers_validity(M)

    _probe_metric(M)
    return M


def _check_randers_validity(M: FinslerMetric):
    """Reject |b|_a >= 1 anywhere on the probe set: g loses positive
    definiteness and the indicatrix stops being convex."""
    rng = np.random.default_rng(2024)
    lo, hi = M.x_box[:, 0], M.x_box[:, 1]
    xs = rng.uniform(size=(16, M.n)) * (hi - lo) + lo
    a = M.params["a"]
    b = M.params["b"]
    for x in xs:
        amat = np.array([[_eval_coef(a[i][j], x) for j in range(M.n)] for i in range(M.n)])
        bvec = np.array([_eval_coef(b[i], x) for i in range(M.n)])
        norm2 = float(bvec @ np.linalg.solve(amat, bvec))
        if norm2 >= 1.0:
            raise ConfigError(
                f"randers drift too large: |b|_a = {np.sqrt(norm2):.4f} >= 1 at "
                f"x={x.tolist()} (indicatrix convexity violated)"
            )


def _probe_metric(M: FinslerMetric, probes: int = 8, seed: int = 7):
    """Sanity probes after construction: warn (not fail) on violations."""
    x, y = sample_points(M, probes, seed)
    try:
        F = np.array([M.F(x[k], y[k]) for k in range(probes)])
        for lam in _HOMOGENEITY_LAMBDAS:
            Fs = np.array([M.F(x[k], lam * y[k]) for k in range(probes)])
            rel = np.abs(Fs - lam * F) / np.abs(lam * F)
            if np.any(rel > 1e-10):
                k = int(np.argmax(rel))
                warnings.warn(
                    f"{M.name}: F not 1-homogeneous at x={x[k].tolist()}, "
                    f"y={y[k].tolist()} (lambda={lam}, rel={rel[k]:.2e})",
                    stacklevel=2,
                )
                break
        if np.any(F <= 0):
            k = int(np.argmax(F <= 0))
            warnings.warn(f"{M.name}: F <= 0 at x={x[k].tolist()}, y={y[k].tolist()}", stacklevel=2)
        g, _ = metric_matrices(M, x, y)
        eigs = np.linalg.eigvalsh(g)
        if np.any(eigs <= 0):
            k = int(np.argmax(np.any(eigs <= 0, axis=1)))
            warnings.warn(
                f"{M.name}: fundamental tensor not positive definite at "
                f"x={x[k].tolist()}, y={y[k].tolist()}",
                stacklevel=2,
            )
    except DegenerateMetricError as exc:
        warnings.warn(f"{M.name}: degenerate at probe point: {exc}", stacklevel=2)
