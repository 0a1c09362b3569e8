"""Shared fixtures-in-plain-functions for the test suite."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from finslerlab.metrics import FinslerMetric, Poly, load_metric

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

CATALOG_NAMES = ("euclidean4", "riemann2", "riemann3", "randers2", "randers3")


def load_catalog_metric(name: str) -> FinslerMetric:
    return load_metric(str(CONFIG_DIR / f"{name}.json"))


def randers2() -> FinslerMetric:
    """x-dependent Randers metric on n = 2, the standard hard case."""
    a = [
        [Poly(2, ((1.0, (0, 0)), (0.3, (0, 2)))), 0.0],
        [0.0, Poly(2, ((1.0, (0, 0)), (0.3, (2, 0))))],
    ]
    return FinslerMetric.randers(2, a, [0.2, 0.1], name="randers2-test")


def randers3() -> FinslerMetric:
    a = [
        [Poly(3, ((1.0, (0, 0, 0)), (0.1, (0, 2, 0)))), 0.0, 0.0],
        [0.0, Poly(3, ((1.0, (0, 0, 0)), (0.1, (0, 0, 2)))), 0.0],
        [0.0, 0.0, Poly(3, ((1.0, (0, 0, 0)), (0.1, (2, 0, 0))))],
    ]
    b = [
        Poly(3, ((0.15, (0, 0, 0)), (0.1, (0, 1, 0)))),
        Poly(3, ((0.1, (0, 0, 1)),)),
        Poly(3, ((0.05, (1, 0, 0)),)),
    ]
    return FinslerMetric.randers(3, a, b, name="randers3-test")


def riemann2() -> FinslerMetric:
    a = [
        [Poly(2, ((1.0, (0, 0)), (0.25, (2, 0)))), Poly(2, ((0.1, (1, 1)),))],
        [Poly(2, ((0.1, (1, 1)),)), Poly(2, ((1.0, (0, 0)), (0.25, (0, 2))))],
    ]
    return FinslerMetric.riemannian(2, a, name="riemann2-test")


def riemann2_amatrix(x: np.ndarray) -> np.ndarray:
    """Closed form of the riemann2 coefficient matrix (for oracles)."""
    return np.array(
        [
            [1.0 + 0.25 * x[0] ** 2, 0.1 * x[0] * x[1]],
            [0.1 * x[0] * x[1], 1.0 + 0.25 * x[1] ** 2],
        ]
    )


def christoffel_spray_oracle(amatrix, x: np.ndarray, y: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Spray coefficients from central differences of a quadratic-form field:
    G^i = (1/2) gamma^i_jk y^j y^k with finite-difference Christoffel symbols."""
    n = x.shape[0]
    da = np.zeros((n, n, n))  # da[l, j, k] = d a_lj / d x^k
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        da[:, :, k] = (amatrix(x + e) - amatrix(x - e)) / (2 * h)
    ainv = np.linalg.inv(amatrix(x))
    gamma = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                s = 0.0
                for l in range(n):
                    s += ainv[i, l] * (da[l, j, k] + da[l, k, j] - da[j, k, l])
                gamma[i, j, k] = 0.5 * s
    return 0.5 * np.einsum("ijk,j,k->i", gamma, y, y)
