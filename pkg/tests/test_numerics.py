import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from p2prisk.errors import ShapeError
from p2prisk.numerics import (
    AdamState,
    activation_apply,
    adam_step,
    finite_diff_gradient,
    glorot_init,
    hadamard,
    make_rng,
    matvec,
    sigmoid,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def vec(n):
    return arrays(np.float64, n, elements=finite)


# --- rng -------------------------------------------------------------------

def test_reference_vector_seed_42():
    assert make_rng(42).raw(3) == [14276969152011380360, 8095878257575067585, 15838336090824644132]


def test_same_seed_same_stream():
    assert np.array_equal(make_rng(42).uniform(50), make_rng(42).uniform(50))


def test_distinct_seeds_differ():
    assert not np.array_equal(make_rng(1).uniform(100), make_rng(2).uniform(100))


def test_uniform_mean():
    u = make_rng(3).uniform(100_000)
    assert 0.49 <= u.mean() <= 0.51
    assert u.min() >= 0.0 and u.max() < 1.0


def test_normal_moments():
    z = make_rng(4).normal(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1.0) < 0.01


def test_spawn_is_reproducible_and_independent():
    a1, b1 = make_rng(9).spawn(2)
    a2, b2 = make_rng(9).spawn(2)
    assert a1.raw(4) == a2.raw(4)
    assert b1.raw(4) == b2.raw(4)
    a, b = make_rng(9).spawn(2)
    assert a.raw(4) != b.raw(4)


def test_seed_is_taken_mod_2_64():
    assert make_rng(-1).raw(2) == make_rng(2**64 - 1).raw(2)


# --- linear algebra ----------------------------------------------------------

def test_matvec_examples():
    assert np.array_equal(matvec(np.eye(2), np.array([3.0, 4.0])), [3.0, 4.0])
    assert np.array_equal(matvec(np.array([[1.0, 2.0], [3.0, 4.0]]), np.ones(2)), [3.0, 7.0])
    assert np.array_equal(matvec(np.zeros((3, 2)), np.array([5.0, -1.0])), np.zeros(3))


def test_matvec_dimension_mismatch():
    with pytest.raises(ShapeError):
        matvec(np.eye(2), np.ones(3))


def test_hadamard_examples():
    assert np.array_equal(hadamard(np.array([1.0, 2.0]), np.array([3.0, 4.0])), [3.0, 8.0])
    a = np.array([1.5, -2.0, 0.25])
    assert np.array_equal(hadamard(a, np.ones(3)), a)
    assert np.array_equal(hadamard(a, np.zeros(3)), np.zeros(3))
    with pytest.raises(ShapeError):
        hadamard(np.ones(2), np.ones(3))


@given(vec(4), vec(4))
def test_matvec_identity_and_distributes(v, w):
    m = make_rng(0).normal((3, 4))
    assert np.array_equal(matvec(np.eye(4), v), v)
    lhs = matvec(m, v + w)
    rhs = matvec(m, v) + matvec(m, w)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(v).max() + np.abs(w).max()) * 10)


@given(vec(5), vec(5), vec(5))
def test_hadamard_commutative_associative(a, b, c):
    assert np.array_equal(hadamard(a, b), hadamard(b, a))
    left = hadamard(hadamard(a, b), c)
    right = hadamard(a, hadamard(b, c))
    assert np.allclose(left, right, rtol=1e-12, atol=1e-300)


# --- activations -------------------------------------------------------------

def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(0.5) == pytest.approx(1 / (1 + math.exp(-0.5)), abs=1e-15)
    assert sigmoid(0.5) == pytest.approx(0.622459, abs=1e-6)
    assert activation_apply("tanh", np.zeros(2)).tolist() == [0.0, 0.0]
    assert activation_apply("linear", np.array([-2.0, 3.0])).tolist() == [-2.0, 3.0]


def test_sigmoid_extremes_are_finite():
    out = sigmoid(np.array([-800.0, 800.0]))
    assert np.all(np.isfinite(out))
    assert out[0] == 0.0 and out[1] == 1.0


def test_activation_unknown_kind():
    with pytest.raises(ValueError):
        activation_apply("relu", np.zeros(1))


@given(st.floats(-30, 30))
def test_sigmoid_symmetry(x):
    assert abs(sigmoid(x) + sigmoid(-x) - 1.0) <= 1e-12


# --- init --------------------------------------------------------------------

def test_glorot_bounds_2x4():
    m = glorot_init(make_rng(5), 2, 4)
    assert m.shape == (2, 4)
    assert np.all(np.abs(m) <= 1.0)
    assert np.array_equal(m, glorot_init(make_rng(5), 2, 4))


def test_glorot_mean_near_zero():
    r = make_rng(6)
    draws = np.concatenate([glorot_init(r, 3, 3).ravel() for _ in range(1112)])[:10_000]
    assert draws.size == 10_000
    assert -0.02 <= draws.mean() <= 0.02
    assert np.all(np.abs(draws) <= 1.0)


# --- adam ----------------------------------------------------------------------

def test_adam_zero_gradient_leaves_params():
    p = np.array([1.0, -2.0, 3.0])
    st0 = AdamState.zeros_like(p)
    p1, st1 = adam_step(st0, p, np.zeros(3))
    assert np.array_equal(p1, p)
    assert st1.step_count == 1


def test_adam_first_step_magnitude():
    p = np.array([1.0])
    p1, _ = adam_step(AdamState.zeros_like(p), p, np.array([1.0]))
    # m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
    assert p1[0] == pytest.approx(1.0 - 0.001 / (1.0 + 1e-7), abs=1e-15)


def test_adam_constant_gradient_monotone():
    p = np.array([1.0])
    state = AdamState.zeros_like(p)
    values = []
    for _ in range(100):
        p, state = adam_step(state, p, np.array([1.0]))
        values.append(p[0])
    assert all(b < a for a, b in zip(values, values[1:]))


def test_adam_is_pure():
    p = np.array([0.5, 0.5])
    state = AdamState.zeros_like(p)
    before = state.first_moment.copy()
    adam_step(state, p, np.array([1.0, 2.0]))
    assert np.array_equal(state.first_moment, before)
    assert state.step_count == 0
    assert p.tolist() == [0.5, 0.5]


def test_adam_shape_mismatch():
    with pytest.raises(ShapeError):
        adam_step(AdamState.zeros_like(np.zeros(2)), np.zeros(2), np.zeros(3))


def test_adam_custom_hyperparameters_kept():
    state = AdamState.zeros_like(np.zeros(1), learning_rate=0.01)
    p1, s1 = adam_step(state, np.zeros(1), np.array([-2.0]))
    assert s1.learning_rate == 0.01
    assert p1[0] == pytest.approx(0.01, rel=1e-6)


# --- finite differences -----------------------------------------------------------

def test_fd_square():
    g = finite_diff_gradient(lambda p: float(p[0] ** 2), np.array([3.0]))
    assert g[0] == pytest.approx(6.0, abs=1e-6)


def test_fd_constant_and_linear():
    p = np.array([0.3, -1.2, 4.0])
    assert np.allclose(finite_diff_gradient(lambda q: 7.0, p), 0.0)
    assert np.allclose(finite_diff_gradient(lambda q: float(q.sum()), p), 1.0, atol=1e-9)


@settings(max_examples=50)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), arrays(np.float64, 3, elements=st.floats(-2, 2)))
def test_fd_cubic_polynomials(coef, x):
    c0, c1, c2, c3 = coef

    def loss(p):
        return float(np.sum(c0 + c1 * p + c2 * p ** 2 + c3 * p ** 3))

    analytic = c1 + 2 * c2 * x + 3 * c3 * x ** 2
    numeric = finite_diff_gradient(loss, x)
    scale = np.maximum(np.abs(analytic), 1.0)
    assert np.all(np.abs(numeric - analytic) / scale <= 1e-6)
