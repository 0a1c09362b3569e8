"""Forward-mode jets: truncated derivative towers on a chart.

A `Jet` carries the value and all partial derivative tensors of a scalar
quantity up to a truncation order (0..4), with respect to a fixed set of m
active variables, batched over a leading axis of evaluation points.  The
arithmetic propagates the tensors exactly (no truncation error beyond
floating-point roundoff), so downstream identity residuals are pure roundoff.

Derivative tensors are kept symmetric to exact bitwise equality: products
and compositions assemble order-3/4 tensors through a canonical index gather
(every entry of a symmetric orbit is literally the same computed number),
orders <= 2 are symmetric term by term.

The public order-3 view (`Jet3`, `eval_jet3`) is what the rest of the
package's per-point API exposes; the batched engine and the order-4 tower are
used internally by the geometry pipelines.  `fd_oracle` is an independent
finite-difference estimator used only for cross-checks; it never touches the
jet arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import SingularEvaluationError

MAX_ORDER = 4

Number = (int, float, np.integer, np.floating)


@lru_cache(maxsize=None)
def _canonical_gather(m: int, rank: int):
    """Index arrays mapping every entry of a rank-`rank` tensor over m
    variables to its sorted-index representative."""
    idx = np.indices((m,) * rank)
    srt = np.sort(idx.reshape(rank, -1), axis=0).reshape(idx.shape)
    return tuple(srt[k] for k in range(rank))


def _symmetrize(arr: np.ndarray, m: int, rank: int) -> np.ndarray:
    """Replace each entry by its canonical (sorted-index) representative."""
    gather = _canonical_gather(m, rank)
    return arr[(slice(None),) + gather]


class Jet:
    """Batched truncated derivative tower of one scalar quantity.

    coeffs[r] has shape (B, m, ..., m) with r trailing axes; coeffs[0] is the
    value.  Instances are immutable by convention: no operation mutates its
    inputs.
    """

    __slots__ = ("m", "order", "coeffs")

    # make ndarray <op> Jet defer to the reflected Jet methods
    __array_ufunc__ = None

    def __init__(self, m: int, order: int, coeffs):
        self.m = m
        self.order = order
        self.coeffs = tuple(coeffs)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def variable(values: np.ndarray, index: int, m: int, order: int) -> "Jet":
        values = np.asarray(values, dtype=float)
        B = values.shape[0]
        coeffs = [values]
        if order >= 1:
            g = np.zeros((B, m))
            g[:, index] = 1.0
            coeffs.append(g)
        for r in range(2, order + 1):
            coeffs.append(np.zeros((B,) + (m,) * r))
        return Jet(m, order, coeffs)

    @staticmethod
    def constant(values, m: int, order: int, B: int | None = None) -> "Jet":
        values = np.asarray(values, dtype=float)
        if values.ndim == 0:
            if B is None:
                raise ValueError("batch size required for scalar constant")
            values = np.full(B, float(values))
        B = values.shape[0]
        coeffs = [values] + [np.zeros((B,) + (m,) * r) for r in range(1, order + 1)]
        return Jet(m, order, coeffs)

    # -- views ---------------------------------------------------------------

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    def deriv(self, index: int) -> "Jet":
        """Tower of the partial derivative with respect to variable `index`
        (one order lower)."""
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        coeffs = [self.coeffs[r + 1][:, index, ...] for r in range(self.order)]
        return Jet(self.m, self.order - 1, coeffs)

    def truncated(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        return Jet(self.m, order, self.coeffs[: order + 1])

    # -- arithmetic ----------------------------------------------------------

    def _lift_other(self, other):
        """Return (jet, jet) aligned to a common order, or (self, scalar)."""
        if isinstance(other, Jet):
            if other.m != self.m:
                raise ValueError("jets over different variable sets")
            order = min(self.order, other.order)
            return self.truncated(order), other.truncated(order)
        return self, other

    @staticmethod
    def _bcast(values, rank: int):
        """Reshape a (B,) factor to broadcast against a rank-`rank` tensor."""
        values = np.asarray(values)
        if values.ndim == 0:
            return values
        return values.reshape(values.shape[:1] + (1,) * rank)

    def __add__(self, other):
        a, b = self._lift_other(other)
        if isinstance(b, Jet):
            return Jet(a.m, a.order, [x + y for x, y in zip(a.coeffs, b.coeffs)])
        if isinstance(b, Number) or isinstance(b, np.ndarray):
            coeffs = list(self.coeffs)
            coeffs[0] = coeffs[0] + b
            return Jet(self.m, self.order, coeffs)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.m, self.order, [-c for c in self.coeffs])

    def __sub__(self, other):
        a, b = self._lift_other(other)
        if isinstance(b, Jet):
            return Jet(a.m, a.order, [x - y for x, y in zip(a.coeffs, b.coeffs)])
        if isinstance(b, Number) or isinstance(b, np.ndarray):
            coeffs = list(self.coeffs)
            coeffs[0] = coeffs[0] - b
            return Jet(self.m, self.order, coeffs)
        return NotImplemented

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        a, b = self._lift_other(other)
        if not isinstance(b, Jet):
            if isinstance(b, Number) or isinstance(b, np.ndarray):
                return Jet(
                    self.m,
                    self.order,
                    [c * self._bcast(b, r) for r, c in enumerate(self.coeffs)],
                )
            return NotImplemented
        order, m = a.order, a.m
        ac, bc = a.coeffs, b.coeffs
        out = [ac[0] * bc[0]]
        if order >= 1:
            out.append(ac[1] * self._bcast(bc[0], 1) + self._bcast(ac[0], 1) * bc[1])
        if order >= 2:
            cross = np.einsum("bi,bj->bij", ac[1], bc[1])
            out.append(
                ac[2] * self._bcast(bc[0], 2)
                + self._bcast(ac[0], 2) * bc[2]
                + cross
                + cross.swapaxes(1, 2)
            )
        if order >= 3:
            t = ac[3] * self._bcast(bc[0], 3) + self._bcast(ac[0], 3) * bc[3]
            for g, h in ((ac[1], bc[2]), (bc[1], ac[2])):
                t = t + np.einsum("bi,bjk->bijk", g, h)
                t = t + np.einsum("bj,bik->bijk", g, h)
                t = t + np.einsum("bk,bij->bijk", g, h)
            out.append(_symmetrize(t, m, 3))
        if order >= 4:
            t = ac[4] * self._bcast(bc[0], 4) + self._bcast(ac[0], 4) * bc[4]
            for g, h in ((ac[1], bc[3]), (bc[1], ac[3])):
                t = t + np.einsum("bi,bjkl->bijkl", g, h)
                t = t + np.einsum("bj,bikl->bijkl", g, h)
                t = t + np.einsum("bk,bijl->bijkl", g, h)
                t = t + np.einsum("bl,bijk->bijkl", g, h)
            for spec in ("bij,bkl", "bik,bjl", "bil,bjk", "bjk,bil", "bjl,bik", "bkl,bij"):
                t = t + np.einsum(spec + "->bijkl", ac[2], bc[2])
            out.append(_symmetrize(t, m, 4))
        return Jet(m, order, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self._lift_other(other)
        if isinstance(b, Jet):
            return a * b._reciprocal()
        if isinstance(b, Number) or isinstance(b, np.ndarray):
            return self * (1.0 / np.asarray(b, dtype=float))
        return NotImplemented

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def __pow__(self, exponent):
        if isinstance(exponent, (int, np.integer)):
            k = int(exponent)
            if k < 0:
                return self._reciprocal() ** (-k)
            if k == 0:
                return Jet.constant(np.ones_like(self.value), self.m, self.order)
            result = self
            for _ in range(k - 1):
                result = result * self
            return result
        p = float(exponent)
        u = self.value
        derivs = [u ** p]
        fac = 1.0
        for r in range(1, self.order + 1):
            fac *= p - (r - 1)
            derivs.append(fac * u ** (p - r))
        return self._compose(derivs)

    # -- elementary functions --------------------------------------------------

    def _compose(self, d: Sequence[np.ndarray]) -> "Jet":
        """Chain rule through the tower for a scalar function with derivative
        values d[0..order] at self.value (Faa di Bruno over set partitions)."""
        order, m = self.order, self.m
        u = self.coeffs
        bc = self._bcast
        out = [d[0]]
        if order >= 1:
            out.append(bc(d[1], 1) * u[1])
        if order >= 2:
            out.append(bc(d[1], 2) * u[2] + bc(d[2], 2) * np.einsum("bi,bj->bij", u[1], u[1]))
        if order >= 3:
            t = bc(d[1], 3) * u[3]
            pair = bc(d[2], 3)
            t = t + pair * np.einsum("bi,bjk->bijk", u[1], u[2])
            t = t + pair * np.einsum("bj,bik->bijk", u[1], u[2])
            t = t + pair * np.einsum("bk,bij->bijk", u[1], u[2])
            t = t + bc(d[3], 3) * np.einsum("bi,bj,bk->bijk", u[1], u[1], u[1])
            out.append(_symmetrize(t, m, 3))
        if order >= 4:
            t = bc(d[1], 4) * u[4]
            c2 = bc(d[2], 4)
            for spec in ("bijk,bl", "bijl,bk", "bikl,bj", "bjkl,bi"):
                t = t + c2 * np.einsum(spec + "->bijkl", u[3], u[1])
            for spec in ("bij,bkl", "bik,bjl", "bil,bjk"):
                t = t + c2 * np.einsum(spec + "->bijkl", u[2], u[2])
            c3 = bc(d[3], 4)
            for spec in ("bij,bk,bl", "bik,bj,bl", "bil,bj,bk", "bjk,bi,bl", "bjl,bi,bk", "bkl,bi,bj"):
                t = t + c3 * np.einsum(spec + "->bijkl", u[2], u[1], u[1])
            t = t + bc(d[4], 4) * np.einsum("bi,bj,bk,bl->bijkl", u[1], u[1], u[1], u[1])
            out.append(_symmetrize(t, m, 4))
        return Jet(m, order, out)

    def _reciprocal(self) -> "Jet":
        u = self.value
        derivs = [1.0 / u]
        sign, fac = -1.0, 1.0
        for r in range(1, self.order + 1):
            fac *= r
            derivs.append(sign * fac / u ** (r + 1))
            sign = -sign
        return self._compose(derivs)

    def sqrt(self) -> "Jet":
        s = np.sqrt(self.value)
        derivs = [s]
        coef = 0.5
        for r in range(1, self.order + 1):
            derivs.append(coef * self.value ** (0.5 - r))
            coef *= 0.5 - r
        return self._compose(derivs)

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self._compose([e] * (self.order + 1))

    def log(self) -> "Jet":
        u = self.value
        derivs = [np.log(u)]
        sign, fac = 1.0, 1.0
        for r in range(1, self.order + 1):
            derivs.append(sign * fac / u ** r)
            fac *= r
            sign = -sign
        return self._compose(derivs)

    def sin(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [s, c, -s, -c]
        return self._compose([cycle[r % 4] for r in range(self.order + 1)])

    def cos(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [c, -s, -c, s]
        return self._compose([cycle[r % 4] for r in range(self.order + 1)])


def sqrt(v):
    """sqrt usable on jets and plain numbers alike (for generic evaluators)."""
    if isinstance(v, Jet):
        return v.sqrt()
    return math.sqrt(v)


# -- public per-point types ----------------------------------------------------


@dataclass(frozen=True)
class TangentPoint:
    """A chart point (x, y) with y != 0 (point of the slit tangent bundle)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be equal-length 1-d arrays")
        if not np.any(self.y != 0.0):
            raise SingularEvaluationError(
                "y = 0 is excluded: t_k = y^i g_ki / F^2 is singular there; "
                "points must lie on the slit tangent bundle (y != 0)"
            )

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class ScalarField:
    """A scalar field on the 2n-dimensional chart.

    `evaluator(x, y)` receives two length-n sequences of scalars and must be
    written generically (arithmetic, **, and `jets.sqrt`), so the same code
    runs on floats and on jets.  Evaluation is pure and deterministic.
    """

    n: int
    evaluator: Callable

    def __call__(self, x, y):
        return self.evaluator(x, y)


@dataclass(frozen=True)
class Jet3:
    """Value and derivative tensors through order 3 at one point.

    grad/hess/third are indexed in the order the active variables were given;
    hess and third are symmetric to exact equality by construction.
    """

    value: float
    grad: np.ndarray
    hess: np.ndarray
    third: np.ndarray
    active: tuple = field(default=())


def variable_index(name: str, n: int) -> int:
    """Map a variable name 'x<i>'/'y<i>' (0-based i) to its chart index."""
    if len(name) < 2 or name[0] not in "xy":
        raise ValueError(f"bad variable name {name!r}; use 'x0'..'y{n-1}'")
    i = int(name[1:])
    if not 0 <= i < n:
        raise ValueError(f"variable index out of range in {name!r}")
    return i if name[0] == "x" else n + i


def _point_scalars(f: ScalarField, p: TangentPoint, active: Sequence[str], order: int):
    n = f.n
    if p.n != n:
        raise ValueError("point dimension does not match field dimension")
    m = len(active)
    slots = [variable_index(a, n) for a in active]
    if len(set(slots)) != m or m < 1:
        raise ValueError("active variables must be a nonempty set")
    chart = list(np.concatenate([p.x, p.y]))
    for j, slot in enumerate(slots):
        chart[slot] = Jet.variable(np.array([chart[slot]]), j, m, order)
    return chart[:n], chart[n:]


def eval_jet3(f: ScalarField, p: TangentPoint, active: Sequence[str]) -> Jet3:
    """All partials of f w.r.t. the active variables through order 3.

    Exact modulo roundoff: the evaluator runs on an order-3 jet arithmetic,
    with inactive variables held as plain numbers.
    """
    xs, ys = _point_scalars(f, p, active, order=3)
    try:
        with np.errstate(invalid="ignore", divide="ignore"):
            out = f(xs, ys)
    except (ZeroDivisionError, FloatingPointError, ValueError) as exc:
        raise SingularEvaluationError(f"field evaluation failed at {p}: {exc}") from exc
    if not isinstance(out, Jet):
        out = Jet.constant(np.array([float(out)]), len(active), 3)
    if not np.all(np.isfinite(out.value)):
        raise SingularEvaluationError(f"field evaluation not finite at {p}")
    return Jet3(
        value=float(out.coeffs[0][0]),
        grad=out.coeffs[1][0].copy(),
        hess=out.coeffs[2][0].copy(),
        third=out.coeffs[3][0].copy(),
        active=tuple(active),
    )


_FD_DEFAULT_STEPS = {1: 1e-5, 2: 5e-4, 3: 4e-3}


def fd_oracle(
    f: ScalarField,
    p: TangentPoint,
    multi_index: Sequence[str],
    step: float | None = None,
    richardson: bool = True,
) -> float:
    """Central-difference estimate of one mixed partial (order 1..3).

    Used only in tests, as the independent cross-check of the jet path.  The
    default step depends on the derivative order (1e-5 / 5e-4 / 4e-3): higher
    orders need larger steps to keep the difference quotient above roundoff.
    One Richardson level (h, h/2) cancels the leading h^2 error term.
    """
    order = len(multi_index)
    if not 1 <= order <= 3:
        raise ValueError("multi_index must have 1 to 3 entries")
    h = _FD_DEFAULT_STEPS[order] if step is None else float(step)
    slots = [variable_index(a, f.n) for a in multi_index]

    def value(chart):
        return float(f(list(chart[: f.n]), list(chart[f.n :])))

    def diff(chart, remaining, h):
        if not remaining:
            return value(chart)
        slot, rest = remaining[0], remaining[1:]
        plus = list(chart)
        plus[slot] += h
        minus = list(chart)
        minus[slot] -= h
        return (diff(plus, rest, h) - diff(minus, rest, h)) / (2.0 * h)

    chart = list(np.concatenate([p.x, p.y]))
    d_h = diff(chart, slots, h)
    if not richardson:
        return d_h
    d_h2 = diff(chart, slots, h / 2.0)
    return (4.0 * d_h2 - d_h) / 3.0
