"""Jet arithmetic: exactness, symmetry, and the finite-difference oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finslerlab.errors import SingularEvaluationError
from finslerlab.jets import Jet, Jet3, ScalarField, TangentPoint, eval_jet3, fd_oracle, sqrt

from helpers import randers2


def quadratic_field():
    return ScalarField(2, lambda x, y: y[0] ** 2 + y[1] ** 2)


def test_polynomial_example():
    p = TangentPoint([0.0, 0.0], [3.0, 4.0])
    j = eval_jet3(quadratic_field(), p, ["y0", "y1"])
    assert j.value == 25.0
    assert np.array_equal(j.grad, [6.0, 8.0])
    assert np.array_equal(j.hess, 2.0 * np.eye(2))
    assert np.all(j.third == 0.0)


def test_constant_field():
    f = ScalarField(2, lambda x, y: 4.25)
    j = eval_jet3(f, TangentPoint([0.1, 0.2], [1.0, -1.0]), ["x0", "y1"])
    assert j.value == 4.25
    assert np.all(j.grad == 0.0) and np.all(j.hess == 0.0) and np.all(j.third == 0.0)


def test_linear_field_second_order_fd():
    f = ScalarField(2, lambda x, y: 3.0 * y[0] - 2.0 * y[1] + x[0])
    p = TangentPoint([0.5, 0.0], [1.0, 1.0])
    assert abs(fd_oracle(f, p, ["y0", "y1"])) < 1e-7


def test_fd_cubic_third_derivative():
    f = ScalarField(1, lambda x, y: y[0] ** 3)
    assert fd_oracle(f, TangentPoint([0.0], [1.3]), ["y0", "y0", "y0"]) == pytest.approx(6.0, abs=1e-6)


@pytest.mark.parametrize(
    "multi",
    [["y0"], ["x0"], ["y0", "y1"], ["x1", "y0"], ["y0", "y0", "y1"], ["x0", "y1", "y1"], ["y1", "y1", "y1"]],
)
def test_randers_jets_match_fd(multi):
    M = randers2()
    f = M.field_F
    p = TangentPoint([0.3, -0.5], [1.1, 0.6])
    active = ["x0", "x1", "y0", "y1"]
    j = eval_jet3(f, p, active)
    idx = [active.index(v) for v in multi]
    if len(idx) == 1:
        ad = j.grad[idx[0]]
    elif len(idx) == 2:
        ad = j.hess[idx[0], idx[1]]
    else:
        ad = j.third[idx[0], idx[1], idx[2]]
    fd = fd_oracle(f, p, multi)
    assert ad == pytest.approx(fd, rel=1e-6)


def test_active_variable_masking():
    M = randers2()
    p = TangentPoint([0.3, -0.5], [1.1, 0.6])
    full = eval_jet3(M.field_F, p, ["x0", "x1", "y0", "y1"])
    ysub = eval_jet3(M.field_F, p, ["y0", "y1"])
    assert ysub.value == full.value
    assert np.array_equal(ysub.grad, full.grad[2:])
    assert np.array_equal(ysub.hess, full.hess[2:, 2:])


def test_hessian_and_third_exactly_symmetric():
    M = randers2()
    j = eval_jet3(M.field_F, TangentPoint([0.2, 0.1], [0.9, -1.2]), ["x0", "x1", "y0", "y1"])
    assert np.array_equal(j.hess, j.hess.T)
    T = j.third
    for perm in [(0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]:
        assert np.array_equal(T, T.transpose(perm))


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-3, 3, allow_nan=False),
    b=st.floats(-3, 3, allow_nan=False),
    y0=st.floats(0.3, 2.0),
    y1=st.floats(-2.0, -0.3),
)
def test_linearity_exact(a, b, y0, y1):
    f = ScalarField(2, lambda x, y: y[0] * y[0] * y[1] + y[1] ** 3)
    g = ScalarField(2, lambda x, y: y[0] * y[1] + 2.0 * y[0])
    combo = ScalarField(2, lambda x, y: a * f(x, y) + b * g(x, y))
    p = TangentPoint([0.0, 0.0], [y0, y1])
    jf = eval_jet3(f, p, ["y0", "y1"])
    jg = eval_jet3(g, p, ["y0", "y1"])
    jc = eval_jet3(combo, p, ["y0", "y1"])
    assert jc.value == a * jf.value + b * jg.value
    assert np.array_equal(jc.grad, a * jf.grad + b * jg.grad)
    assert np.array_equal(jc.hess, a * jf.hess + b * jg.hess)
    assert np.array_equal(jc.third, a * jf.third + b * jg.third)


@settings(max_examples=25, deadline=None)
@given(y0=st.floats(0.4, 1.8), y1=st.floats(0.4, 1.8), x0=st.floats(-0.9, 0.9))
def test_leibniz_through_order_three(y0, y1, x0):
    def fe(x, y):
        return sqrt(y[0] * y[0] + y[1] * y[1]) + 0.2 * x[0] * y[0]

    def ge(x, y):
        return y[0] * y[1] + x[0] * x[0] + 1.5

    prod = ScalarField(2, lambda x, y: fe(x, y) * ge(x, y))
    p = TangentPoint([x0, 0.1], [y0, y1])
    active = ["x0", "y0", "y1"]
    jf = eval_jet3(ScalarField(2, fe), p, active)
    jg = eval_jet3(ScalarField(2, ge), p, active)
    jp = eval_jet3(prod, p, active)

    conv_val = jf.value * jg.value
    conv_grad = jf.grad * jg.value + jf.value * jg.grad
    conv_hess = (
        jf.hess * jg.value
        + jf.value * jg.hess
        + np.einsum("i,j->ij", jf.grad, jg.grad)
        + np.einsum("i,j->ij", jg.grad, jf.grad)
    )
    conv_third = jf.third * jg.value + jf.value * jg.third
    for g1, h2 in ((jf.grad, jg.hess), (jg.grad, jf.hess)):
        conv_third = conv_third + np.einsum("i,jk->ijk", g1, h2)
        conv_third = conv_third + np.einsum("j,ik->ijk", g1, h2)
        conv_third = conv_third + np.einsum("k,ij->ijk", g1, h2)

    scale = abs(conv_val) + 1.0
    assert jp.value == pytest.approx(conv_val, rel=1e-14)
    assert np.abs(jp.grad - conv_grad).max() <= 1e-14 * scale
    assert np.abs(jp.hess - conv_hess).max() <= 1e-14 * scale
    assert np.abs(jp.third - conv_third).max() <= 1e-13 * scale


def test_internal_tower_matches_compose_closed_forms():
    vals = np.array([1.5, 0.7, 2.0])
    v = Jet.variable(vals, 0, 2, 4)
    s = v.sqrt()
    assert np.abs(s.coeffs[4][:, 0, 0, 0, 0] - (-15.0 / 16.0) * vals**-3.5).max() < 1e-15
    r = 1.0 / v
    assert np.abs(r.coeffs[4][:, 0, 0, 0, 0] - 24.0 * vals**-5.0).max() < 1e-14


def test_zero_velocity_rejected():
    with pytest.raises(SingularEvaluationError, match="slit tangent bundle"):
        TangentPoint([0.0, 0.0], [0.0, 0.0])


def test_domain_error_reported_as_singular_evaluation():
    f = ScalarField(1, lambda x, y: sqrt(y[0] - 10.0))
    with pytest.raises(SingularEvaluationError):
        eval_jet3(f, TangentPoint([0.0], [1.0]), ["y0"])


def test_fd_oracle_step_override():
    f = ScalarField(1, lambda x, y: y[0] ** 2)
    p = TangentPoint([0.0], [1.0])
    assert fd_oracle(f, p, ["y0"], step=1e-4) == pytest.approx(2.0, rel=1e-9)
    assert fd_oracle(f, p, ["y0"], step=1e-4, richardson=False) == pytest.approx(2.0, rel=1e-7)


def test_jet3_dataclass_shape():
    j = eval_jet3(quadratic_field(), TangentPoint([0.0, 0.0], [1.0, 2.0]), ["y0", "y1"])
    assert isinstance(j, Jet3)
    assert j.grad.shape == (2,) and j.hess.shape == (2, 2) and j.third.shape == (2, 2, 2)
    assert j.active == ("y0", "y1")
