"""Loss oracles: the sparsity-aware weighted-l1 loss and the sliding-window
weighted distance loss built from a set of hyperslabs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, TYPE_CHECKING

import numpy as np

from .ops import project_hyperslab

if TYPE_CHECKING:
    from .sparse import Hyperslab


@dataclass(frozen=True)
class SparsityLoss:
    """``Phi(x) = max(0, sum_j w_j |x_j| - rho)``.

    ``bounds = (eps_lo, eps_hi)`` is optional; when given, every weight
    must lie in it.
    """

    w: np.ndarray
    rho: float
    bounds: Optional[tuple[float, float]] = None

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        if w.ndim != 1:
            raise ValueError("weights must form a 1-D vector")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be positive and finite")
        if not self.rho > 0:
            raise ValueError(f"radius must be positive, got {self.rho}")
        if self.bounds is not None:
            lo, hi = self.bounds
            if not 0 < lo <= hi:
                raise ValueError("bounds must satisfy 0 < lo <= hi")
            if np.any(w < lo) or np.any(w > hi):
                raise ValueError("weights outside the declared bounds")

    def weighted_norm(self, x) -> float:
        return float(self.w @ np.abs(x))

    def value(self, x) -> float:
        return phi_value(self, x)

    def subgrad(self, x) -> np.ndarray:
        return phi_subgrad(self, x)

    def contains(self, x) -> bool:
        return self.weighted_norm(x) <= self.rho


def phi_value(loss: SparsityLoss, x) -> float:
    return max(0.0, loss.weighted_norm(x) - loss.rho)


def phi_subgrad(loss: SparsityLoss, x) -> np.ndarray:
    """Subgradient selection for the weighted-l1 loss.

    Outside the ball this is ``w * sign(x)`` with ``sign(0) = 0``, which
    belongs to the convex hull of the ``+-w_j`` choices on zero
    coordinates. On and inside the ball the zero vector is returned.
    """
    x = np.asarray(x, dtype=float)
    if loss.weighted_norm(x) <= loss.rho:
        return np.zeros_like(x)
    return loss.w * np.sign(x)


def uniform_active_weights(active_count: int) -> np.ndarray:
    if active_count < 1:
        raise ValueError("uniform weights need at least one active set")
    return np.full(active_count, 1.0 / active_count)


@dataclass(frozen=True)
class LossEval:
    value: float
    subgrad: np.ndarray
    # Window-loss extras: L_n and sum_i omega_i P_{S_i}(anchor)
    scale: float = 0.0
    projection_average: Optional[np.ndarray] = None


@dataclass(frozen=True)
class WindowLoss:
    """Weighted distance loss over the sets of a sliding window.

    Weights are formed at ``anchor`` (the current iterate): only sets not
    containing the anchor are active, and their contribution is scaled by
    ``omega_i d(anchor, S_i) / L`` with ``L = sum_i omega_i d(anchor, S_i)``.
    """

    sets: Sequence["Hyperslab"]
    anchor: np.ndarray
    omega: Optional[np.ndarray] = None
    q: Optional[int] = None
    active: tuple[int, ...] = field(init=False)
    projections: np.ndarray = field(init=False, repr=False)
    distances: np.ndarray = field(init=False)
    scale: float = field(init=False)

    def __post_init__(self):
        if len(self.sets) == 0:
            raise ValueError("empty window")
        if self.q is not None and len(self.sets) > self.q:
            raise ValueError(f"window holds {len(self.sets)} sets, more than q={self.q}")
        anchor = np.asarray(self.anchor, dtype=float)
        object.__setattr__(self, "anchor", anchor)
        projections, distances, active = [], [], []
        for i, s in enumerate(self.sets):
            p = project_hyperslab(anchor, s)
            dist = float(np.linalg.norm(anchor - p))
            if dist > 0.0:
                active.append(i)
                projections.append(p)
                distances.append(dist)
        object.__setattr__(self, "active", tuple(active))
        object.__setattr__(
            self, "projections", np.array(projections).reshape(len(active), anchor.size)
        )
        object.__setattr__(self, "distances", np.array(distances, dtype=float))

        if self.omega is None:
            omega = uniform_active_weights(len(active)) if active else np.zeros(0)
        else:
            omega = np.asarray(self.omega, dtype=float)
            if omega.shape != (len(active),):
                raise ValueError(f"need {len(active)} weights, one per active set")
            if active and (np.any(omega <= 0) or np.any(omega > 1) or abs(omega.sum() - 1) > 1e-12):
                raise ValueError("active weights must lie in (0, 1] and sum to 1")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "scale", float(omega @ self.distances))

    @property
    def is_idle(self) -> bool:
        return not self.active

    def value(self, x) -> float:
        if self.is_idle:
            return 0.0
        x = np.asarray(x, dtype=float)
        d_x = np.array([np.linalg.norm(x - project_hyperslab(x, self.sets[i])) for i in self.active])
        return float(np.sum(self.omega * self.distances * d_x) / self.scale)

    def subgrad(self, x) -> np.ndarray:
        """Subgradient at the anchor; other points are not supported."""
        x = np.asarray(x, dtype=float)
        if not np.array_equal(x, self.anchor):
            raise ValueError("the window-loss subgradient is only available at its anchor")
        if self.is_idle:
            return np.zeros_like(x)
        return (self.omega @ (x - self.projections)) / self.scale

    def max_distance(self) -> float:
        """``max_j d(anchor, S_j)`` over the whole window."""
        return float(self.distances.max()) if self.distances.size else 0.0


def window_loss_eval(window: WindowLoss, x) -> LossEval:
    x = np.asarray(x, dtype=float)
    g = window.subgrad(x)
    if window.is_idle:
        return LossEval(0.0, g, 0.0, x.copy())
    return LossEval(
        value=window.value(x),
        subgrad=g,
        scale=window.scale,
        projection_average=window.omega @ window.projections,
    )
