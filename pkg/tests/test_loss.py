import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from apsm.loss import (
    SparsityLoss,
    WindowLoss,
    phi_subgrad,
    phi_value,
    uniform_active_weights,
    window_loss_eval,
)
from apsm.ops import project_hyperslab
from apsm.sparse import Hyperslab

from oracles import numeric_subgradient_check

ball = SparsityLoss(np.ones(2), 1.0)


@pytest.mark.parametrize("x, expected", [((0.5, 0.2), 0.0), ((2.0, 1.0), 2.0), ((0.6, 0.4), 0.0)])
def test_phi_value(x, expected):
    assert phi_value(ball, np.array(x)) == pytest.approx(expected)


@pytest.mark.parametrize(
    "x, expected", [((2.0, 1.0), (1.0, 1.0)), ((0.1, 0.1), (0.0, 0.0)), ((2.0, 0.0), (1.0, 0.0))]
)
def test_phi_subgrad(x, expected):
    np.testing.assert_array_equal(phi_subgrad(ball, np.array(x)), expected)


def test_phi_subgrad_zero_coordinate_is_valid(rng):
    x = np.array([2.0, 0.0])
    g = phi_subgrad(ball, x)
    ys = list(4 * rng.standard_normal((1000, 2)))
    assert numeric_subgradient_check(ball.value, g, x, ys) >= -1e-12


def test_sparsity_loss_bounds():
    SparsityLoss(np.array([0.5, 1.0]), 1.0, bounds=(0.5, 1.0))
    with pytest.raises(ValueError):
        SparsityLoss(np.array([0.4, 1.0]), 1.0, bounds=(0.5, 1.0))
    with pytest.raises(ValueError):
        SparsityLoss(np.array([0.0, 1.0]), 1.0)
    with pytest.raises(ValueError):
        SparsityLoss(np.ones(2), 0.0)


weights = arrays(float, 5, elements=st.floats(0.01, 100))
points = arrays(float, 5, elements=st.floats(-10, 10))


@given(w=weights, x=points, rho=st.floats(0.1, 20))
def test_phi_zero_iff_in_ball(w, x, rho):
    loss = SparsityLoss(w, rho)
    assert (phi_value(loss, x) == 0.0) == (float(np.sum(w * np.abs(x))) <= rho)


@given(w=weights, x=points, y=points, rho=st.floats(0.1, 20))
def test_phi_subgradient_inequality(w, x, y, rho):
    loss = SparsityLoss(w, rho)
    g = phi_subgrad(loss, x)
    assert loss.value(y) >= loss.value(x) + g @ (y - x) - 1e-9 * (1 + loss.value(y))
    # bounded by max weight times sqrt(L)
    assert np.linalg.norm(g) <= w.max() * np.sqrt(w.size) * (1 + 1e-12)


def test_uniform_weights():
    np.testing.assert_allclose(uniform_active_weights(4), [0.25] * 4)
    np.testing.assert_allclose(uniform_active_weights(1), [1.0])
    with pytest.raises(ValueError):
        uniform_active_weights(0)


def hyperplane(a, d):
    return Hyperslab(np.asarray(a, float), float(d), 0.0)


def test_window_idle():
    sets = [Hyperslab(np.array([1.0, 0.0]), 0.0, 1.0), Hyperslab(np.array([0.0, 1.0]), 0.0, 1.0)]
    ev = window_loss_eval(WindowLoss(sets, np.zeros(2)), np.zeros(2))
    assert ev.value == 0.0
    np.testing.assert_array_equal(ev.subgrad, [0.0, 0.0])


def test_window_single_active_matches_distance(rng):
    for _ in range(50):
        s = Hyperslab(rng.standard_normal(3), rng.standard_normal() + 5, 0.1)
        u = rng.standard_normal(3)
        if s.contains(u):
            continue
        ev = window_loss_eval(WindowLoss([s], u), u)
        p = project_hyperslab(u, s)
        dist = np.linalg.norm(u - p)
        assert ev.value == pytest.approx(dist)
        np.testing.assert_allclose(ev.subgrad, (u - p) / dist)
        assert np.linalg.norm(ev.subgrad) == pytest.approx(1.0)


def test_window_two_orthogonal_hyperplanes():
    window = WindowLoss([hyperplane([1, 0], 1), hyperplane([0, 1], 1)], np.zeros(2))
    ev = window_loss_eval(window, np.zeros(2))
    assert ev.scale == pytest.approx(1.0)
    assert ev.value == pytest.approx(1.0)
    np.testing.assert_allclose(ev.subgrad, [-0.5, -0.5])
    np.testing.assert_allclose(ev.projection_average, [0.5, 0.5])


def test_window_errors():
    with pytest.raises(ValueError, match="empty window"):
        WindowLoss([], np.zeros(2))
    window = WindowLoss([hyperplane([1, 0], 1)], np.zeros(2))
    with pytest.raises(ValueError, match="anchor"):
        window.subgrad(np.ones(2))
    with pytest.raises(ValueError):
        WindowLoss([hyperplane([1, 0], 1)] * 3, np.zeros(2), q=2)
    with pytest.raises(ValueError):
        WindowLoss([hyperplane([1, 0], 1), hyperplane([0, 1], 1)], np.zeros(2), omega=np.array([0.7, 0.7]))


def random_window(rng, L=4, q=6):
    sets = [
        Hyperslab(rng.standard_normal(L), rng.standard_normal(), rng.uniform(0, 0.5)) for _ in range(q)
    ]
    return sets, 2 * rng.standard_normal(L)


def test_window_subgradient_properties(rng):
    for _ in range(1000):
        sets, u = random_window(rng)
        window = WindowLoss(sets, u)
        g = window.subgrad(u)
        assert np.linalg.norm(g) <= 1 + 1e-12
        if window.is_idle:
            continue
        assert window.scale > 0
        for _ in range(10):
            y = u + 3 * rng.standard_normal(u.size)
            assert window.value(y) >= window.value(u) + g @ (y - u) - 1e-9


def test_window_level_set_is_intersection_of_active(rng):
    for _ in range(300):
        sets, u = random_window(rng, L=2, q=3)
        window = WindowLoss(sets, u)
        active = [sets[i] for i in window.active]
        for _ in range(20):
            x = 3 * rng.standard_normal(2)
            if rng.random() < 0.3 and active:
                x = project_hyperslab(x, active[0])
            violation = max((abs(s.d - s.a @ x) - s.xi for s in active), default=-1.0)
            if violation <= 0:
                assert window.value(x) <= 1e-12
            elif violation > 1e-9:
                assert window.value(x) > 0
