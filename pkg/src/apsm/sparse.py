"""Sparse system recovery pieces: hyperslabs from streaming data, the
iterate-driven reweighting, and the operators that enforce a weighted-l1
ball."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .loss import SparsityLoss
from .ops import AttractingOperator, identity, subgradient_projection_step


@dataclass(frozen=True)
class Hyperslab:
    """The closed set ``{x : |d - a^T x| <= xi}``."""

    a: np.ndarray
    d: float
    xi: float

    def contains(self, x) -> bool:
        return abs(self.d - float(self.a @ x)) <= self.xi


def make_hyperslab(a, d: float, xi: float) -> Hyperslab:
    a = np.asarray(a, dtype=float)
    if xi < 0:
        raise ValueError(f"hyperslab tolerance must be non-negative, got {xi}")
    if not np.any(a):
        raise ValueError("zero regressor does not define a hyperslab")
    return Hyperslab(a.copy(), float(d), float(xi))


@dataclass(frozen=True)
class WeightedL1Ball:
    """``{x : sum_j w_j |x_j| <= rho}``."""

    w: np.ndarray
    rho: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("ball weights must be positive and finite")
        if not self.rho > 0:
            raise ValueError(f"ball radius must be positive, got {self.rho}")

    def contains(self, x) -> bool:
        return float(self.w @ np.abs(x)) <= self.rho

    def loss(self) -> SparsityLoss:
        return SparsityLoss(self.w, self.rho)


def update_weights(u, eps_check: float) -> np.ndarray:
    """Reweighting ``w_j = 1 / (|u_j| + eps_check)``."""
    if not eps_check > 0:
        raise ValueError(f"eps_check must be positive, got {eps_check}")
    return 1.0 / (np.abs(np.asarray(u, dtype=float)) + eps_check)


def project_weighted_l1(x, ball: WeightedL1Ball) -> np.ndarray:
    """Exact metric projection onto a weighted l1-ball.

    Coordinates are ranked by ``|x_j| / w_j``; the longest prefix whose
    members all survive the soft threshold fixes ``t``, and the result is
    ``sign(x_j) max(|x_j| - t w_j, 0)``. Cost is one sort.
    """
    x = np.asarray(x, dtype=float)
    w = ball.w
    ax = np.abs(x)
    if float(w @ ax) <= ball.rho:
        return x.copy()
    order = np.argsort(-ax / w, kind="stable")
    wx = np.cumsum(w[order] * ax[order])
    ww = np.cumsum(w[order] ** 2)
    t = (wx - ball.rho) / ww
    admissible = ax[order] > t * w[order]
    # admissible is true on a prefix; the first entry always qualifies
    l_star = int(np.flatnonzero(admissible)[-1])
    t_star = max(t[l_star], 0.0)
    return np.sign(x) * np.maximum(ax - t_star * w, 0.0)


def sparsity_projection_operator(ball: WeightedL1Ball, nu: float = 1.0) -> AttractingOperator:
    """Relaxed subgradient projection for the weighted-l1 loss, O(L) per call."""
    if not 0.0 < nu < 2.0:
        raise ValueError(f"relaxation nu must lie in (0, 2), got {nu}")
    loss = ball.loss()
    return AttractingOperator(
        lambda x: subgradient_projection_step(loss, x, nu),
        (2.0 - nu) / nu,
        "subgradient-projection",
        ball.contains,
    )


def exact_ball_operator(ball: WeightedL1Ball) -> AttractingOperator:
    return AttractingOperator(
        lambda x: project_weighted_l1(x, ball), 1.0, "relaxed-projection", ball.contains
    )


@dataclass(frozen=True)
class NlmsConfig:
    """Solver settings under which the fused step is exactly NLMS."""

    mu: float
    q: int = 1
    xi: float = 0.0

    def policy(self):
        from .solver import StepPolicy

        return StepPolicy(lam=self.mu, epsilon_guard=min(self.mu, 2.0 - self.mu))

    def constraint(self, ball=None) -> AttractingOperator:
        return identity()


def nlms_config(mu: float) -> NlmsConfig:
    if not 0.0 < mu < 2.0:
        raise ValueError(f"NLMS step must lie in (0, 2), got {mu}")
    return NlmsConfig(mu)
