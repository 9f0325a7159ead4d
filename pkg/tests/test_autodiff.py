"""Autodiff oracles: finite differences, closed forms, and purity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhdpinn import jets as jm
from mhdpinn import tape as tp
from mhdpinn.autodiff import (
    evaluate_with_input_derivatives,
    fd_derivative,
    finite_difference_check,
    parameter_gradient,
)
from mhdpinn.jets import NonDifferentiablePrimitiveError
from mhdpinn.tape import ParameterVector, Tape, parameter_vector

RNG = np.random.default_rng(1234)


def test_tanh_at_zero_order2():
    b = evaluate_with_input_derivatives(lambda x: jm.tanh(x), 0.0, order=2)
    assert b.value() == 0.0
    assert b.derivative("x") == 1.0
    assert b.derivative("xx") == 0.0


def test_bilinear_product():
    b = evaluate_with_input_derivatives(lambda x, y: x * y, (2.0, 3.0), order=2)
    assert b.derivative("x") == 3.0
    assert b.derivative("y") == 2.0
    assert b.derivative("xy") == 1.0
    assert b.derivative("xx") == 0.0


def _tiny_net(w1, b1, w2):
    def fn(x, y):
        out = None
        for i in range(w1.shape[0]):
            z = w1[i, 0] * x + w1[i, 1] * y + b1[i]
            h = jm.tanh(z)
            term = w2[i] * h
            out = term if out is None else out + term
        return out

    return fn


def test_two_layer_net_matches_fd():
    w1 = RNG.normal(size=(8, 2))
    b1 = RNG.normal(size=8)
    w2 = RNG.normal(size=8)
    fn = _tiny_net(w1, b1, w2)
    pt = RNG.uniform(-0.5, 0.5, size=2)
    rep = finite_difference_check(fn, pt, step=1e-4, order=2)
    assert rep.max_discrepancy(floor=1.0) < 1e-6, str(rep)


PRIMS = {
    "sin": (jm.sin, (-3.0, 3.0)),
    "cos": (jm.cos, (-3.0, 3.0)),
    "exp": (jm.exp, (-2.0, 2.0)),
    "tanh": (jm.tanh, (-2.0, 2.0)),
    "sinh": (jm.sinh, (-2.0, 2.0)),
    "cosh": (jm.cosh, (-2.0, 2.0)),
    # keep singular primitives away from the pole so the FD oracle converges
    "log": (jm.log, (0.6, 3.0)),
    "sqrt": (jm.sqrt, (0.6, 3.0)),
    "reciprocal": (jm.reciprocal, (0.6, 3.0)),
}


@pytest.mark.parametrize("name", sorted(PRIMS))
def test_primitive_derivatives_against_fd(name):
    fn, (lo, hi) = PRIMS[name]
    pts = RNG.uniform(lo, hi, size=100)
    sp = jm.jet_space(("x",), 3)
    x = jm.seed_coordinates(sp, pts.reshape(-1, 1))["x"]
    out = fn(x)
    for order, tol, step in ((1, 1e-6, 1e-5), (2, 1e-6, 1e-4), (3, 1e-4, 1e-3)):
        alpha = (order,)
        fd = np.array([fd_derivative(lambda q: float(fn(q)), np.array([p]), alpha, step) for p in pts])
        an = out.derivative("x" * order)
        rel = np.abs(an - fd) / np.maximum(np.abs(fd), 1e-9)
        assert rel.max() < tol, f"{name} order {order}: {rel.max():.3g}"


def test_arithmetic_ops_against_fd():
    def fn(x, y):
        return (x + y) * (x - 0.5) / (2.0 + jm.cos(y)) + x ** 3

    for _ in range(20):
        pt = RNG.uniform(-1.0, 1.0, size=2)
        rep = finite_difference_check(fn, pt, step=1e-4, order=2)
        assert rep.max_discrepancy(floor=1.0) < 1e-6
        rep3 = finite_difference_check(fn, pt, step=1e-3, order=3)
        assert rep3.max_discrepancy(floor=1.0) < 1e-4


def test_integer_and_fractional_powers():
    sp = jm.jet_space(("x",), 3)
    pts = RNG.uniform(0.3, 2.0, size=50)
    x = jm.seed_coordinates(sp, pts.reshape(-1, 1))["x"]
    assert np.allclose((x ** 5).derivative("xxx"), 60.0 * pts ** 2, rtol=1e-12)
    p = 2.5
    got = jm.power(x, p).derivative("xx")
    assert np.allclose(got, p * (p - 1) * pts ** (p - 2), rtol=1e-12)
    # integer power at zero has no 0**negative pitfalls
    x0 = jm.seed_coordinates(sp, np.zeros((1, 1)))["x"]
    assert (x0 ** 3).derivative("xxx") == pytest.approx(6.0)


def test_mixed_partials_exact_on_polynomial():
    # f = x^2 y + x y^2: all third-order coefficients are constants
    def fn(x, y):
        return x * x * y + x * y * y

    b = evaluate_with_input_derivatives(fn, (0.7, -0.3), order=3)
    assert b.derivative("xxy") == pytest.approx(2.0, abs=1e-13)
    assert b.derivative("xyy") == pytest.approx(2.0, abs=1e-13)
    assert b.derivative("xxx") == pytest.approx(0.0, abs=1e-13)


def test_order_rejected():
    with pytest.raises(ValueError):
        evaluate_with_input_derivatives(lambda x: x, 0.0, order=4)
    with pytest.raises(ValueError):
        jm.jet_space(("x",), 5)


def test_non_differentiable_primitive():
    sp = jm.jet_space(("x",), 1)
    x = jm.seed_coordinates(sp, np.array([[0.5]]))["x"]
    with pytest.raises(NonDifferentiablePrimitiveError):
        jm.absolute(x)


def test_evaluation_is_pure():
    fn = _tiny_net(RNG.normal(size=(4, 2)), RNG.normal(size=4), RNG.normal(size=4))
    pt = np.array([0.3, -0.8])
    b1 = evaluate_with_input_derivatives(fn, pt, order=3)
    b2 = evaluate_with_input_derivatives(fn, pt, order=3)
    for a, b in zip(b1.outputs, b2.outputs):
        assert np.array_equal(a.data, b.data)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(-2, 2), min_size=4, max_size=4),
    st.floats(-1.5, 1.5),
    st.floats(-1.5, 1.5),
)
def test_product_rule_invariant(coeffs, px, py):
    """Leibniz rule holds exactly for jet products."""
    sp = jm.jet_space(("x", "y"), 2)
    c = jm.seed_coordinates(sp, np.array([[px, py]]))
    x, y = c["x"], c["y"]
    a = coeffs[0] + coeffs[1] * x + jm.sin(y)
    b = coeffs[2] * y + jm.cos(x * coeffs[3])
    prod = a * b
    lhs = prod.derivative("x")
    rhs = a.derivative("x") * b.value + a.value * b.derivative("x")
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_order_zero_projection_matches_plain(px, py):
    def fn(x, y):
        return jm.exp(jm.sin(x) * y) + x * x

    b = evaluate_with_input_derivatives(fn, (px, py), order=1)
    plain = float(np.exp(np.sin(px) * py) + px * px)
    assert b.value() == pytest.approx(plain, rel=1e-14, abs=1e-14)


# ---------------------------------------------------------------------------
# parameter gradients (forward-over-reverse)


def test_parameter_gradient_quadratic():
    params = parameter_vector([("theta", RNG.normal(size=7))])

    def loss(p: ParameterVector, tape):
        t = Tape() if tape is None else tape
        th = t.leaf(p, "theta")
        return tp.sum_all(tp.square(th))

    g = parameter_gradient(loss, params)
    assert np.allclose(g.values, 2 * params.values, rtol=1e-14)


def test_parameter_gradient_independent_loss():
    params = parameter_vector([("theta", RNG.normal(size=5))])

    def loss(p, tape):
        t = Tape() if tape is None else tape
        t.leaf(p, "theta")  # touched but unused
        return tp.constant(np.asarray(3.0))

    g = parameter_gradient(loss, params)
    assert np.all(g.values == 0.0)


def _derivative_loss_net(order: int):
    """L built from an input-derivative of a 1-hidden-unit tanh net."""

    space = jm.jet_space(("x",), order)
    pts = np.array([[0.3]])
    seed = jm.seed_coordinates(space, pts)["x"]
    x_tensor = tp.Tensor(seed.data.reshape(1, space.size, 1), space, None)
    pos = space.position((order,))
    fac = float(space.factorials[pos])

    def loss(p, tape):
        t = Tape() if tape is None else tape
        w1 = t.leaf(p, "w1")
        b1 = t.leaf(p, "b1")
        w2 = t.leaf(p, "w2")
        h = tp.compose("tanh", tp.bias_add(tp.matmul(w1, x_tensor), b1))
        u = tp.matmul(w2, h)
        du = tp.extract(u, 0, pos, fac)
        return tp.mean_all(tp.square(du))

    return loss


@pytest.mark.parametrize("order", [1, 2, 3])
def test_parameter_gradient_of_input_derivative_matches_fd(order):
    params = parameter_vector(
        [("w1", RNG.normal(size=(3, 1))), ("b1", RNG.normal(size=3)), ("w2", RNG.normal(size=(1, 3)))]
    )
    loss = _derivative_loss_net(order)
    rep = finite_difference_check(loss, params, step=1e-6, loss_fn=loss)
    # entries span several decades; FD resolves each one relative to the
    # gradient's own scale, not to its tiniest component
    gmax = max(abs(a) for _, a, _ in rep.entries)
    assert rep.max_discrepancy(floor=1e-3 * gmax) < 1e-5, str(rep)


def test_parameter_gradient_through_jet_product():
    """Nested gradient where the loss multiplies two jet quantities."""
    space = jm.jet_space(("x",), 2)
    seed = jm.seed_coordinates(space, np.array([[0.4], [-0.2]]).reshape(-1, 1))["x"]
    x_tensor = tp.Tensor(seed.data.reshape(1, space.size, -1), space, None)
    pos = space.position((2,))
    fac = float(space.factorials[pos])

    def loss(p, tape):
        t = Tape() if tape is None else tape
        w1 = t.leaf(p, "w1")
        b1 = t.leaf(p, "b1")
        h = tp.compose("tanh", tp.bias_add(tp.matmul(w1, x_tensor), b1))
        sq = tp.mul(h, h)  # jet product
        d2 = tp.extract(sq, 0, pos, fac)
        return tp.mean_all(tp.square(d2))

    params = parameter_vector([("w1", RNG.normal(size=(1, 1))), ("b1", RNG.normal(size=1))])
    rep = finite_difference_check(loss, params, step=1e-6, loss_fn=loss)
    gmax = max(abs(a) for _, a, _ in rep.entries)
    assert rep.max_discrepancy(floor=1e-3 * gmax) < 1e-5, str(rep)


def test_nonfinite_intermediate_flagged():
    params = parameter_vector([("theta", np.array([1000.0]))])

    def loss(p, tape):
        t = Tape() if tape is None else tape
        th = t.leaf(p, "theta")
        big = tp.compose("exp", tp.scale(th, 1000.0))
        return tp.sum_all(big)

    with np.errstate(over="ignore"):
        with pytest.raises(tp.NonFiniteIntermediateError) as e:
            parameter_gradient(loss, params)
    assert e.value.record_index >= 0


# ---------------------------------------------------------------------------
# finite_difference_check op examples


def test_fd_check_sin():
    rep = finite_difference_check(lambda x: jm.sin(x), 0.0, step=1e-5, order=1)
    assert rep.max_abs_discrepancy < 1e-9


def test_fd_check_cubic_second_derivative():
    rep = finite_difference_check(lambda x: x ** 3, 1.0, step=1e-4, order=2)
    by_label = {label: (a, n) for label, a, n in rep.entries}
    analytic, numeric = by_label["xx"]
    assert analytic == pytest.approx(6.0, abs=1e-10)
    assert numeric == pytest.approx(6.0, abs=1e-6)


def test_fd_check_random_mlp_third_derivative():
    fn = _tiny_net(RNG.normal(size=(6, 2)), RNG.normal(size=6), RNG.normal(size=6))
    pt = RNG.uniform(-0.5, 0.5, size=2)
    rep = finite_difference_check(fn, pt, step=1e-3, order=3)
    assert rep.max_discrepancy(floor=1.0) < 1e-4, str(rep)


def test_fd_check_rejects_bad_step():
    with pytest.raises(ValueError):
        finite_difference_check(lambda x: x, 0.0, step=0.0)


def test_parameter_vector_roundtrip():
    parts = [("a", RNG.normal(size=(3, 2))), ("b", RNG.normal(size=4))]
    pv = parameter_vector(parts)
    assert len(pv) == 10
    assert np.array_equal(pv.view("a"), parts[0][1])
    assert np.array_equal(pv.view("b"), parts[1][1])
    # flat mutation is visible through views (views share storage)
    pv.values[:] = 0.0
    assert np.all(pv.view("a") == 0.0)
