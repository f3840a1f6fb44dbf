import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from servers.nnxp.errors import ShapeError
from servers.nnxp.mathcore import (
    elastic_net_grad,
    elastic_net_penalty,
    elastic_net_penalty_total,
    elu,
    elu_array,
    elu_deriv,
    elu_deriv_array,
    identity,
    identity_deriv,
    quadratic_data_loss,
    quadratic_loss,
    sgn,
    softmax,
    softmax_deriv,
    softmax_vjp,
)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


@given(finite)
def test_identity(x):
    assert identity(x) == x
    assert identity_deriv(x) == 1.0


def test_elu_values():
    assert elu(0.5, 3.0) == 3.0
    assert elu(0.5, 0.0) == 0.0
    assert elu(0.5, math.log(0.5)) == pytest.approx(-0.25, abs=1e-15)
    assert elu(1.0, -1e6) == pytest.approx(-1.0)


def test_elu_deriv_values():
    assert elu_deriv(0.5, 2.0) == 1.0
    assert elu_deriv(0.5, 0.0) == 0.5
    assert elu_deriv(0.5, math.log(0.5)) == pytest.approx(0.25, abs=1e-15)


@given(
    st.floats(min_value=0.05, max_value=3.0),
    st.floats(min_value=-20.0, max_value=20.0).filter(lambda x: abs(x) > 1e-3),
)
def test_elu_deriv_matches_finite_difference(alpha, x):
    h = 1e-7
    numeric = (elu(alpha, x + h) - elu(alpha, x - h)) / (2 * h)
    assert elu_deriv(alpha, x) == pytest.approx(numeric, abs=1e-6)


@given(st.floats(min_value=0.05, max_value=3.0))
def test_elu_is_continuous_at_zero(alpha):
    h = 1e-8
    assert abs(elu(alpha, h) - elu(alpha, -h)) <= 1e-7
    assert abs(elu(alpha, -h) - elu(alpha, 0.0)) <= 1e-7


def test_elu_arrays_match_scalars():
    xs = np.array([-5.0, -0.3, 0.0, 0.2, 40.0, 1e300])
    np.testing.assert_array_equal(elu_array(0.5, xs), [elu(0.5, x) for x in xs])
    np.testing.assert_allclose(elu_deriv_array(0.5, xs), [elu_deriv(0.5, x) for x in xs], rtol=1e-15)


def test_softmax_sums_to_one_and_is_shift_invariant():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        v = rng.uniform(-50.0, 50.0, size=rng.integers(1, 65))
        s = softmax(v)
        assert abs(s.sum() - 1.0) <= 1e-12
        shifted = softmax(v + rng.uniform(-1000.0, 1000.0))
        assert np.max(np.abs(shifted - s)) <= 1e-12


def test_softmax_extreme_inputs_stay_finite():
    s = softmax([1e308, -1e308, 0.0])
    assert np.all(np.isfinite(s))
    np.testing.assert_allclose(s, [1.0, 0.0, 0.0])
    assert np.all(np.isfinite(softmax([-1e308, -1e308])))
    np.testing.assert_allclose(softmax([7.0]), [1.0])


def test_softmax_rows():
    rows = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    out = softmax(rows)
    np.testing.assert_allclose(out[1], [1 / 3, 1 / 3, 1 / 3])
    np.testing.assert_allclose(out[0], softmax(rows[0]))


@pytest.mark.parametrize("bad", [[], [1.0, float("nan")], [float("inf"), 0.0]])
def test_softmax_rejects_bad_input(bad):
    with pytest.raises(ShapeError):
        softmax(bad)


def test_softmax_deriv():
    assert softmax_deriv(0.5) == 0.25
    assert softmax_deriv(1.0) == 0.0


def test_softmax_vjp_matches_explicit_jacobian():
    rng = np.random.default_rng(3)
    for _ in range(50):
        s = softmax(rng.normal(size=6))
        g = rng.normal(size=6)
        jacobian = np.diag(s) - np.outer(s, s)
        np.testing.assert_allclose(softmax_vjp(s, g), jacobian @ g, atol=1e-15)


@given(finite)
def test_sgn(w):
    expected = 1.0 if w > 0 else -1.0 if w < 0 else 0.0
    assert sgn(w) == expected


def test_elastic_net():
    assert elastic_net_penalty(-2.0, 0.1) == pytest.approx(0.6)
    assert elastic_net_penalty(3.0, 0.0) == 0.0
    assert elastic_net_grad(0.5, 0.1) == pytest.approx(0.1 * (1 + 1.0))
    assert elastic_net_grad(0.0, 0.1) == 0.0


@given(
    st.floats(min_value=-10.0, max_value=10.0).filter(lambda w: abs(w) > 1e-3),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_elastic_net_grad_matches_finite_difference(w, lam):
    h = 1e-6
    numeric = (elastic_net_penalty(w + h, lam) - elastic_net_penalty(w - h, lam)) / (2 * h)
    assert elastic_net_grad(w, lam) == pytest.approx(numeric, abs=1e-6)


@given(st.lists(st.floats(min_value=-10, max_value=10), max_size=20), st.floats(min_value=0, max_value=1))
def test_penalty_total_is_sum_of_parts(weights, lam):
    total = elastic_net_penalty_total(weights, lam)
    assert total == pytest.approx(sum(elastic_net_penalty(w, lam) for w in weights), abs=1e-9)


def test_penalty_total_over_arrays():
    arrays = [np.array([1.0, -2.0]), np.array([0.5])]
    assert elastic_net_penalty_total(arrays, 0.5) == pytest.approx(0.5 * (1 + 1 + 2 + 4 + 0.5 + 0.25))


def test_quadratic_loss_examples():
    assert quadratic_loss([1, 0], [0.5, 0.5], [], 0.0) == pytest.approx(0.25)
    assert quadratic_loss([1], [0.8], [2.0], 0.5) == pytest.approx(1.52)


@given(st.lists(st.floats(min_value=-5, max_value=5), min_size=1, max_size=10), st.floats(min_value=0, max_value=1))
def test_quadratic_loss_is_nonnegative(values, lam):
    targets = np.zeros(len(values))
    assert quadratic_loss(targets, values, values, lam) >= 0.0


def test_quadratic_loss_length_mismatch():
    with pytest.raises(ShapeError):
        quadratic_data_loss([1, 0], [1.0])
