"""The adaptive projected subgradient recursion.

Two routes produce the same iterates for the window/weighted-l1 problem:

* :func:`apsm_step` is the generic recursion for any loss oracle and any
  attracting operator;
* :func:`fused_step` is the closed form obtained by substituting the
  window-loss subgradient, i.e. an extrapolated average of hyperslab
  projections followed by the weighted-l1 operator.

:func:`equivalence_check` runs both side by side.
"""

from __future__ import annotations

import copy
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .loss import SparsityLoss, WindowLoss, phi_value, uniform_active_weights
from .ops import AttractingOperator, ConvexLossOracle, identity, project_hyperslab
from .sparse import (
    WeightedL1Ball,
    exact_ball_operator,
    make_hyperslab,
    sparsity_projection_operator,
    update_weights,
)

log = logging.getLogger(__name__)

CONSTRAINTS = ("subgrad-ball", "exact-ball", "identity")


class SolverError(FloatingPointError):
    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class StepPolicy:
    """Constant step schedule.

    ``lam`` must lie in ``[epsilon_guard, 2 - epsilon_guard]`` and ``nu``
    in ``[nu_guard, 2 - nu_guard]``. ``zero_tol`` is relative: a
    subgradient ``g`` counts as zero when ``||g|| <= zero_tol (1 + ||u||)``.
    """

    lam: float = 1.0
    epsilon_guard: float = 0.01
    nu: float = 1.0
    nu_guard: float = 0.01
    zero_tol: float = 1e-12

    def __post_init__(self):
        for name, value, guard in (
            ("lam", self.lam, self.epsilon_guard),
            ("nu", self.nu, self.nu_guard),
        ):
            if not 0.0 < guard <= 1.0:
                raise ValueError(f"guard for {name} must lie in (0, 1], got {guard}")
            if not guard <= value <= 2.0 - guard:
                raise ValueError(f"{name}={value} outside [{guard}, {2.0 - guard}]")
        if self.zero_tol < 0:
            raise ValueError("zero_tol must be non-negative")


@dataclass
class DiagnosticsLog:
    """Append-only per-step records."""

    theta: list = field(default_factory=list)
    max_window_dist: list = field(default_factory=list)
    step_norm: list = field(default_factory=list)
    subgrad_norm: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    m: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    active_count: list = field(default_factory=list)
    ref_dist: list = field(default_factory=list)

    def __len__(self):
        return len(self.step_norm)

    def array(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)


@dataclass
class SolverState:
    """Mutable solver state; the step functions advance it in place."""

    iterate: np.ndarray
    q: int = 1
    policy: StepPolicy = field(default_factory=StepPolicy)
    step_index: int = 0
    window: deque = None
    diagnostics: Optional[DiagnosticsLog] = None
    reference: Optional[np.ndarray] = None

    def __post_init__(self):
        self.iterate = np.array(self.iterate, dtype=float)
        if self.q < 1:
            raise ValueError("window length q must be at least 1")
        if self.window is None:
            self.window = deque(maxlen=self.q)
        elif not isinstance(self.window, deque) or self.window.maxlen != self.q:
            self.window = deque(self.window, maxlen=self.q)
        if not np.all(np.isfinite(self.iterate)):
            raise ValueError("initial iterate must be finite")

    @classmethod
    def zeros(cls, L: int, **kwargs) -> "SolverState":
        return cls(np.zeros(L), **kwargs)

    def push(self, slab) -> None:
        """Append a hyperslab, evicting the oldest beyond ``q``."""
        self.window.append(slab)

    def copy(self) -> "SolverState":
        return copy.deepcopy(self)


@dataclass(frozen=True)
class FusedStepReport:
    m_n: float
    mu_n: float
    active_count: int
    theta_value: float
    phi_value: float


def _zero_threshold(policy: StepPolicy, u: np.ndarray) -> float:
    return policy.zero_tol * (1.0 + float(np.linalg.norm(u)))


def _max_window_distance(window, u) -> float:
    if not window:
        return 0.0
    return max(float(np.linalg.norm(u - project_hyperslab(u, s))) for s in window)


def _commit(state: SolverState, u_next: np.ndarray, record: Optional[dict]) -> SolverState:
    if not np.all(np.isfinite(u_next)):
        raise SolverError(state.step_index, "non-finite iterate")
    log_ = state.diagnostics
    if log_ is not None and record is not None:
        record["step_norm"] = float(np.linalg.norm(u_next - state.iterate))
        if state.reference is not None:
            record["ref_dist"] = float(np.linalg.norm(state.iterate - state.reference))
        for key, value in record.items():
            getattr(log_, key).append(value)
    state.iterate = u_next
    state.step_index += 1
    return state


def apsm_step(
    state: SolverState, loss: ConvexLossOracle, constraint: AttractingOperator
) -> SolverState:
    """``u+ = T(u - lam Theta(u) / ||Theta'(u)||^2 Theta'(u))``, or ``T(u)``
    when the subgradient vanishes."""
    u = state.iterate
    value = float(loss.value(u))
    g = np.asarray(loss.subgrad(u), dtype=float)
    if not np.isfinite(value) or not np.all(np.isfinite(g)):
        raise SolverError(state.step_index, "non-finite loss value or subgradient")
    g_norm = float(np.linalg.norm(g))
    if g_norm > _zero_threshold(state.policy, u):
        v = u - (state.policy.lam * value / g_norm**2) * g
    else:
        v = u
    u_next = np.asarray(constraint(v), dtype=float)
    record = None
    if state.diagnostics is not None:
        record = {
            "theta": value,
            "subgrad_norm": g_norm,
            "max_window_dist": _max_window_distance(state.window, u),
        }
    return _commit(state, u_next, record)


def fused_step(
    state: SolverState,
    sparsity: Optional[SparsityLoss] = None,
    constraint: Optional[AttractingOperator] = None,
) -> tuple[SolverState, FusedStepReport]:
    """Extrapolated parallel-projection step.

    ``u+ = T(u + mu (sum_i omega_i P_i(u) - u))`` with ``mu = lam M`` and
    ``M = sum_i omega_i d_i^2 / ||sum_i omega_i (u - P_i(u))||^2`` (or 1 if
    that average displacement vanishes). ``T`` defaults to the relaxed
    subgradient projection of ``sparsity`` with relaxation ``policy.nu``;
    pass ``constraint`` to use another operator (exact ball projection,
    identity).
    """
    if not state.window:
        raise SolverError(state.step_index, "window is empty")
    if constraint is None:
        if sparsity is None:
            raise ValueError("either a sparsity loss or a constraint is required")
        constraint = sparsity_projection_operator(
            WeightedL1Ball(sparsity.w, sparsity.rho), state.policy.nu
        )
    policy = state.policy
    u = state.iterate

    slabs = list(state.window)
    A = np.array([s.a for s in slabs])
    resid = A @ u - np.array([s.d for s in slabs])
    xi = np.array([s.xi for s in slabs])
    excess = np.abs(resid) - xi
    active = excess > 0
    k = int(active.sum())
    dists = np.zeros(len(slabs))

    if k:
        A_act = A[active]
        norms = np.sqrt(np.einsum("ij,ij->i", A_act, A_act))
        shift = np.sign(resid[active]) * excess[active] / norms**2
        dists_act = excess[active] / norms
        dists[active] = dists_act
        omega = uniform_active_weights(k)
        # P_i(u) - u = -shift_i a_i
        disp = -(omega * shift) @ A_act
        numer = float(omega @ dists_act**2)
        denom = float(disp @ disp)
        scale = float(omega @ dists_act)
        theta = numer / scale
        m_n = numer / denom if denom > _zero_threshold(policy, u) ** 2 else 1.0
        # M >= 1 by convexity of the squared norm; discard rounding below it
        m_n = max(m_n, 1.0)
    else:
        disp = np.zeros_like(u)
        m_n, theta = 1.0, 0.0

    mu_n = policy.lam * m_n
    u_next = np.asarray(constraint(u + mu_n * disp), dtype=float)
    if not np.isfinite(m_n) or not np.all(np.isfinite(u_next)):
        raise SolverError(state.step_index, "non-finite intermediate in fused step")
    phi_next = phi_value(sparsity, u_next) if sparsity is not None else 0.0
    report = FusedStepReport(m_n, mu_n, k, theta, phi_next)

    record = None
    if state.diagnostics is not None:
        record = {
            "theta": theta,
            "subgrad_norm": float(np.linalg.norm(disp)) / scale if k else 0.0,
            "max_window_dist": float(dists.max()),
            "phi": phi_value(sparsity, u) if sparsity is not None else 0.0,
            "m": m_n,
            "mu": mu_n,
            "active_count": k,
        }
    return _commit(state, u_next, record), report


def make_constraint(kind: str, sparsity: SparsityLoss, nu: float) -> AttractingOperator:
    if kind == "subgrad-ball":
        return sparsity_projection_operator(WeightedL1Ball(sparsity.w, sparsity.rho), nu)
    if kind == "exact-ball":
        return exact_ball_operator(WeightedL1Ball(sparsity.w, sparsity.rho))
    if kind == "identity":
        return identity()
    raise ValueError(f"unknown constraint {kind!r}; expected one of {CONSTRAINTS}")


def run(
    state: SolverState,
    data_source: Iterable,
    num_steps: int,
    *,
    xi: float,
    rho: float = 1.0,
    eps_check: float = 0.005,
    constraint: str = "subgrad-ball",
    observer: Optional[Callable[[int, np.ndarray], None]] = None,
) -> tuple[SolverState, Optional[DiagnosticsLog]]:
    """Drive :func:`fused_step` over a stream of ``(a_n, d_n)`` pairs.

    At every step the newest hyperslab enters the window and the weights
    are rebuilt from the current iterate. ``observer(n, u_n)`` is called
    before step ``n``. Zero regressors form no hyperslab and leave the
    iterate untouched. Stops early, without error, if the stream runs dry.
    """
    if num_steps < 0:
        raise ValueError("num_steps must be non-negative")
    it = iter(data_source)
    for _ in range(num_steps):
        try:
            a, d = next(it)
        except StopIteration:
            log.info("data source exhausted after %d steps", state.step_index)
            break
        if observer is not None:
            observer(state.step_index, state.iterate)
        a = np.asarray(a, dtype=float)
        if not np.all(np.isfinite(a)) or not np.isfinite(d):
            raise SolverError(state.step_index, "non-finite sample")
        if not np.any(a):
            state.step_index += 1
            continue
        state.push(make_hyperslab(a, d, xi))
        sparsity = SparsityLoss(update_weights(state.iterate, eps_check), rho)
        op = make_constraint(constraint, sparsity, state.policy.nu)
        fused_step(state, sparsity, op)
    return state, state.diagnostics


@dataclass(frozen=True)
class EquivalenceReport:
    discrepancies: np.ndarray
    tol: float

    @property
    def max_discrepancy(self) -> float:
        return float(self.discrepancies.max()) if self.discrepancies.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_discrepancy <= self.tol


def equivalence_check(
    state: SolverState,
    data_source: Iterable,
    steps: int,
    tol: float = 1e-9,
    *,
    xi: float,
    rho: float,
    eps_check: float = 0.005,
    apsm_policy: Optional[StepPolicy] = None,
    lockstep: bool = True,
) -> EquivalenceReport:
    """Compare the generic and fused recursions on the same data.

    The generic route gets the window loss anchored at its iterate and the
    relaxed subgradient projection of the weighted-l1 loss. With
    ``lockstep`` both routes start every step from the fused iterate, so
    the discrepancy measures one step of each formula. Without it the two
    trajectories evolve separately; the reweighting amplifies rounding
    differences geometrically, so only short horizons stay within 1e-9.

    The discrepancy is ``||u_generic - u_fused|| / (1 + ||u_fused||)``.
    ``apsm_policy`` overrides the generic route's policy (negative controls).
    """
    generic, fused = state.copy(), state.copy()
    if apsm_policy is not None:
        generic.policy = apsm_policy
    out = []
    it = iter(data_source)
    for _ in range(steps):
        try:
            a, d = next(it)
        except StopIteration:
            break
        if lockstep:
            generic.iterate = fused.iterate.copy()
        slab = make_hyperslab(a, d, xi)
        generic.push(slab)
        fused.push(slab)

        sp_g = SparsityLoss(update_weights(generic.iterate, eps_check), rho)
        window = WindowLoss(list(generic.window), generic.iterate, q=generic.q)
        T = sparsity_projection_operator(WeightedL1Ball(sp_g.w, rho), generic.policy.nu)
        apsm_step(generic, window, T)

        sp_f = SparsityLoss(update_weights(fused.iterate, eps_check), rho)
        fused_step(fused, sp_f)

        gap = np.linalg.norm(generic.iterate - fused.iterate)
        out.append(gap / (1.0 + np.linalg.norm(fused.iterate)))
    return EquivalenceReport(np.asarray(out, dtype=float), tol)
