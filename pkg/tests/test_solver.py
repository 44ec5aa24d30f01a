import numpy as np
import pytest

from apsm.loss import SparsityLoss, WindowLoss
from apsm.ops import LossOracle, identity
from apsm.solver import (
    DiagnosticsLog,
    SolverError,
    SolverState,
    StepPolicy,
    apsm_step,
    equivalence_check,
    fused_step,
    run,
)
from apsm.sparse import Hyperslab, make_hyperslab


def hyperplane(a, d):
    return Hyperslab(np.asarray(a, float), float(d), 0.0)


def test_step_policy_validation():
    StepPolicy(lam=0.01, nu=1.99)
    for kw in ({"lam": 0.0}, {"lam": 2.0}, {"nu": 1.995}, {"epsilon_guard": 0.0}, {"zero_tol": -1}):
        with pytest.raises(ValueError):
            StepPolicy(**kw)


def test_apsm_step_zero_loss_is_noop():
    state = SolverState(np.array([1.0, 2.0]))
    zero = LossOracle(lambda x: 0.0, lambda x: np.zeros_like(x))
    apsm_step(state, zero, identity())
    np.testing.assert_array_equal(state.iterate, [1.0, 2.0])
    assert state.step_index == 1


@pytest.mark.parametrize("lam, expected", [(1.0, (1.0, 0.0)), (0.5, (0.5, 0.0))])
def test_apsm_step_distance_to_hyperplane(lam, expected):
    state = SolverState(np.zeros(2), policy=StepPolicy(lam=lam))
    dist = LossOracle(lambda x: abs(x[0] - 1.0), lambda x: np.array([np.sign(x[0] - 1.0), 0.0]))
    apsm_step(state, dist, identity())
    np.testing.assert_allclose(state.iterate, expected)


def test_apsm_step_nonfinite_reports_step():
    state = SolverState(np.zeros(2))
    state.step_index = 7
    bad = LossOracle(lambda x: np.nan, lambda x: np.zeros_like(x))
    with pytest.raises(SolverError) as err:
        apsm_step(state, bad, identity())
    assert err.value.step == 7
    assert "step 7" in str(err.value)


def test_fused_step_idle_window():
    state = SolverState(np.zeros(2), q=2)
    state.push(Hyperslab(np.array([1.0, 0.0]), 0.0, 1.0))
    _, report = fused_step(state, constraint=identity())
    assert report.m_n == 1.0 and report.active_count == 0
    np.testing.assert_array_equal(state.iterate, [0.0, 0.0])


def test_fused_step_symmetric_hyperplanes():
    state = SolverState(np.zeros(2), q=2)
    state.push(hyperplane([1, 0], 1))
    state.push(hyperplane([1, 0], -1))
    _, report = fused_step(state, constraint=identity())
    # the projections cancel; the step is zero and M falls back to 1
    assert report.m_n == 1.0
    np.testing.assert_allclose(state.iterate, [0.0, 0.0], atol=1e-15)


def test_fused_step_orthogonal_hyperplanes():
    state = SolverState(np.zeros(2), q=2)
    state.push(hyperplane([1, 0], 1))
    state.push(hyperplane([0, 1], 1))
    _, report = fused_step(state, constraint=identity())
    assert report.m_n == pytest.approx(2.0)
    assert report.mu_n == pytest.approx(2.0)
    np.testing.assert_allclose(state.iterate, [1.0, 1.0])


def test_fused_step_requires_window_and_operator():
    with pytest.raises(SolverError):
        fused_step(SolverState(np.zeros(2)), constraint=identity())
    state = SolverState(np.zeros(2))
    state.push(hyperplane([1, 0], 1))
    with pytest.raises(ValueError):
        fused_step(state)


def test_window_evicts_oldest():
    state = SolverState(np.zeros(2), q=2)
    for d in (1.0, 2.0, 3.0):
        state.push(hyperplane([1, 0], d))
    assert [s.d for s in state.window] == [2.0, 3.0]


def test_fused_matches_generic_single_step(rng):
    for _ in range(200):
        L = 6
        u = rng.standard_normal(L)
        sets = [Hyperslab(rng.standard_normal(L), rng.standard_normal(), 0.1) for _ in range(4)]
        g = SolverState(u, q=4)
        f = SolverState(u, q=4)
        for s in sets:
            g.push(s)
            f.push(s)
        apsm_step(g, WindowLoss(sets, u), identity())
        fused_step(f, constraint=identity())
        np.testing.assert_allclose(g.iterate, f.iterate, rtol=1e-10, atol=1e-12)


def sparse_stream(rng, x, steps, noise=0.0):
    L = x.size
    sig = rng.standard_normal(steps + L)
    for n in range(steps):
        a = sig[n : n + L][::-1]
        yield a, float(a @ x + noise * rng.standard_normal())


def sparse_truth(rng, L=20, k=3):
    x = np.zeros(L)
    x[rng.choice(L, k, replace=False)] = rng.standard_normal(k)
    return x


def test_equivalence_passes(rng):
    x = sparse_truth(rng)
    state = SolverState.zeros(20, q=5)
    report = equivalence_check(state, sparse_stream(rng, x, 60, 0.1), 60, xi=0.2, rho=3.0)
    assert report.discrepancies.size == 60
    assert report.passed, report.max_discrepancy


def test_equivalence_negative_control(rng):
    x = sparse_truth(rng)
    state = SolverState.zeros(20, q=5)
    report = equivalence_check(
        state, sparse_stream(rng, x, 30, 0.1), 30, xi=0.2, rho=3.0, apsm_policy=StepPolicy(lam=0.5)
    )
    assert not report.passed
    assert report.max_discrepancy > 1e-3


def test_run_zero_steps():
    state = SolverState(np.array([1.0, 2.0]))
    run(state, iter(()), 0, xi=0.1)
    np.testing.assert_array_equal(state.iterate, [1.0, 2.0])
    assert state.step_index == 0


def test_run_stops_when_source_exhausted():
    state = SolverState(np.zeros(2))
    run(state, [(np.array([1.0, 0.0]), 0.0)], 5, xi=0.1)
    assert state.step_index == 1


def test_run_rejects_negative_steps():
    with pytest.raises(ValueError):
        run(SolverState(np.zeros(2)), [], -1, xi=0.1)


def test_run_noiseless_start_at_truth_stays(rng):
    x = sparse_truth(rng)
    rho = float(np.sum(np.abs(x) / (np.abs(x) + 0.005))) + 1.0
    state = SolverState(x.copy(), q=5)
    run(state, sparse_stream(rng, x, 200), 200, xi=0.01, rho=rho)
    np.testing.assert_array_equal(state.iterate, x)


def test_run_wide_slab_constant_data(rng):
    # every sample is satisfied by u = 0 and the ball contains 0
    state = SolverState.zeros(4, q=3)
    data = [(rng.standard_normal(4), 0.0) for _ in range(50)]
    run(state, data, 50, xi=10.0)
    np.testing.assert_array_equal(state.iterate, np.zeros(4))


def test_run_nonfinite_data_carries_step_index():
    state = SolverState(np.zeros(2))
    data = [(np.array([1.0, 0.0]), 1.0), (np.array([1.0, 0.0]), 1.0), (np.array([np.inf, 0.0]), 1.0)]
    with pytest.raises(FloatingPointError) as err:
        run(state, data, 3, xi=0.1)
    assert "step 2" in str(err.value)


def noiseless_run(rng, steps, L=30, q=8):
    x = sparse_truth(rng, L=L, k=4)
    eps = 0.005
    # weights never exceed 1/eps, so this radius keeps x in every ball
    rho = float(np.sum(np.abs(x))) / eps
    state = SolverState.zeros(L, q=q, diagnostics=DiagnosticsLog(), reference=x)
    run(state, sparse_stream(rng, x, steps), steps, xi=0.01, rho=rho, eps_check=eps)
    return state


def test_fejer_monotone(rng):
    for _ in range(3):
        state = noiseless_run(rng, 300)
        dist = state.diagnostics.array("ref_dist")
        dist = np.append(dist, np.linalg.norm(state.iterate - state.reference))
        assert np.all(np.diff(dist) <= 1e-10)


def test_loss_vanishes_on_noiseless_data(rng):
    state = noiseless_run(rng, 600)
    log = state.diagnostics
    tenth = len(log) // 10
    for name in ("theta", "max_window_dist"):
        series = log.array(name)
        assert series[-tenth:].mean() <= 0.01 * series[:tenth].mean(), name


def test_step_invariants(rng):
    state = noiseless_run(rng, 300)
    log = state.diagnostics
    m, mu = log.array("m"), log.array("mu")
    assert np.all(m >= 1.0)
    assert np.all((mu > 0) & (mu < 2 * m))
    assert np.all(log.array("subgrad_norm") <= 1 + 1e-12)


def test_radius_rule_keeps_truth_in_ball(rng):
    # the sufficient radius sum|x|/eps bounds sum w_i |x_i| for any iterate
    for _ in range(200):
        x = sparse_truth(rng)
        u = 5 * rng.standard_normal(x.size)
        w = 1.0 / (np.abs(u) + 0.005)
        assert SparsityLoss(w, float(np.sum(np.abs(x))) / 0.005).value(x) == 0.0
