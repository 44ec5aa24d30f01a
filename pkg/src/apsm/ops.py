"""Strongly attracting quasi-nonexpansive mappings on R^L.

Every operator here is an :class:`AttractingOperator`: a pure callable
together with its attracting constant ``eta``, i.e. for every ``x`` and
every fixed point ``v``::

    eta * ||x - T(x)||^2 <= ||x - v||^2 - ||T(x) - v||^2

The identity is kept as a distinguished kind (``eta is None``) so that it
is absorbed by :func:`compose_attracting` instead of forcing infinities
into the arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

KINDS = (
    "relaxed-projection",
    "subgradient-projection",
    "composition",
    "inconsistent-prior",
    "identity",
    "custom",
)

# Threshold factor for declaring a subgradient numerically zero.
ZERO_TOL = 1e-12


class ConvexLossOracle(Protocol):
    """Anything exposing ``value(x)`` and a subgradient selection ``subgrad(x)``."""

    def value(self, x: np.ndarray) -> float: ...

    def subgrad(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class LossOracle:
    """Adapter turning two plain callables into a :class:`ConvexLossOracle`."""

    value_fn: Callable[[np.ndarray], float]
    subgrad_fn: Callable[[np.ndarray], np.ndarray]

    def value(self, x):
        return float(self.value_fn(x))

    def subgrad(self, x):
        return np.asarray(self.subgrad_fn(x), dtype=float)


@dataclass(frozen=True)
class AttractingOperator:
    """An eta-attracting quasi-nonexpansive mapping.

    Parameters
    ----------
    apply : callable
        The mapping itself. Must be pure.
    eta : float or None
        Attracting constant; ``None`` only for the identity.
    kind : str
        One of :data:`KINDS`.
    contains : callable, optional
        Membership predicate for ``Fix(T)``. Only used by tests and
        diagnostics; fixed point sets are not computed in general.
    """

    apply: Callable[[np.ndarray], np.ndarray]
    eta: Optional[float]
    kind: str = "custom"
    contains: Optional[Callable[[np.ndarray], bool]] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "identity":
            if self.eta is not None:
                raise ValueError("identity operator carries no attracting constant")
        elif self.eta is None or not self.eta > 0:
            raise ValueError(f"attracting constant must be positive, got {self.eta}")

    def __call__(self, x):
        return self.apply(np.asarray(x, dtype=float))

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"


def _identity_apply(x):
    return np.array(x, dtype=float, copy=True)


def identity() -> AttractingOperator:
    return AttractingOperator(_identity_apply, None, "identity", lambda x: True)


def _as_vec(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {x.shape}")
    return x


def project_hyperplane(x, a, b: float) -> np.ndarray:
    """Metric projection of ``x`` onto ``{y : a^T y = b}``."""
    x, a = _as_vec(x), _as_vec(a)
    aa = float(a @ a)
    if aa == 0.0:
        raise ValueError("degenerate hyperplane: normal vector is zero")
    return x + ((b - float(a @ x)) / aa) * a


def project_halfspace(x, a, b: float) -> np.ndarray:
    """Metric projection of ``x`` onto ``{y : a^T y <= b}``."""
    x, a = _as_vec(x), _as_vec(a)
    aa = float(a @ a)
    if aa == 0.0:
        raise ValueError("degenerate halfspace: normal vector is zero")
    excess = float(a @ x) - b
    if excess <= 0.0:
        return x.copy()
    return x - (excess / aa) * a


def project_hyperslab(x, slab) -> np.ndarray:
    """Metric projection onto ``{y : |d - a^T y| <= xi}``.

    ``slab`` is any object with ``a``, ``d`` and ``xi`` attributes. Points
    on the boundary are returned unchanged.
    """
    x, a = _as_vec(x), _as_vec(slab.a)
    aa = float(a @ a)
    if aa == 0.0:
        raise ValueError("degenerate hyperslab: regressor is zero")
    if slab.xi < 0:
        raise ValueError("hyperslab tolerance must be non-negative")
    r = float(a @ x) - slab.d
    if abs(r) <= slab.xi:
        return x.copy()
    # nearer bounding hyperplane: a^T y = d + xi if r > 0, d - xi otherwise
    shift = r - slab.xi if r > 0 else r + slab.xi
    return x - (shift / aa) * a


def relax(T, alpha: float) -> AttractingOperator:
    """Relaxation ``x -> x + alpha (T(x) - x)``.

    A plain callable is taken to be a metric projection (firmly
    nonexpansive, eta = 1), giving constant ``(2 - alpha) / alpha``. For a
    general eta-attracting ``T`` the averaged-map description yields
    ``(1 + eta - alpha) / alpha``, which needs ``alpha < 1 + eta``.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"relaxation parameter must lie in (0, 2), got {alpha}")
    if isinstance(T, AttractingOperator):
        if T.is_identity:
            return T
        eta, contains = T.eta, T.contains
        kind = T.kind if T.kind in ("relaxed-projection", "subgradient-projection") else "custom"
    else:
        eta, contains, kind = 1.0, None, "relaxed-projection"
    if not alpha < 1.0 + eta:
        raise ValueError(f"alpha={alpha} too large for an {eta}-attracting mapping")

    def apply(x):
        x = np.asarray(x, dtype=float)
        return x + alpha * (T(x) - x)

    return AttractingOperator(apply, (1.0 + eta - alpha) / alpha, kind, contains)


def _check_finite(value, g):
    if not np.isfinite(value) or not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite loss value or subgradient")


def subgradient_projection_step(loss: ConvexLossOracle, x, lam: float = 1.0) -> np.ndarray:
    """One relaxed subgradient projection step toward ``lev<=0 loss``."""
    if not 0.0 < lam < 2.0:
        raise ValueError(f"lambda must lie in (0, 2), got {lam}")
    x = _as_vec(x)
    value = loss.value(x)
    if not np.isfinite(value):
        raise FloatingPointError("non-finite loss value")
    if value <= 0.0:
        return x.copy()
    g = np.asarray(loss.subgrad(x), dtype=float)
    _check_finite(value, g)
    gg = float(g @ g)
    if np.sqrt(gg) <= ZERO_TOL * (1.0 + np.linalg.norm(x)):
        return x.copy()
    return x - (lam * value / gg) * g


def subgradient_projection_operator(loss: ConvexLossOracle, lam: float = 1.0) -> AttractingOperator:
    """The relaxed subgradient projection mapping as an operator.

    Its fixed point set is the zero level set of ``loss`` and it is
    ``(2 - lam) / lam``-attracting.
    """
    if not 0.0 < lam < 2.0:
        raise ValueError(f"lambda must lie in (0, 2), got {lam}")
    return AttractingOperator(
        lambda x: subgradient_projection_step(loss, x, lam),
        (2.0 - lam) / lam,
        "subgradient-projection",
        lambda x: loss.value(np.asarray(x, dtype=float)) <= 0.0,
    )


def compose_attracting(T1: AttractingOperator, T2: AttractingOperator) -> AttractingOperator:
    """``T1 o T2`` with constant ``eta1 eta2 / (eta1 + eta2)``.

    The caller is responsible for ``Fix(T1) & Fix(T2)`` being nonempty.
    """
    if T2.is_identity:
        return T1
    if T1.is_identity:
        return T2
    eta = T1.eta * T2.eta / (T1.eta + T2.eta)
    contains = None
    if T1.contains is not None and T2.contains is not None:
        c1, c2 = T1.contains, T2.contains
        contains = lambda x: c1(x) and c2(x)  # noqa: E731
    return AttractingOperator(lambda x: T1(T2(x)), eta, "composition", contains)


@dataclass(frozen=True)
class InconsistentPriorSpec:
    """Hard constraint ``Gamma`` plus soft constraints ``C_1..C_M``.

    ``betas`` are convex weights over the soft constraints and ``lam`` the
    gradient step on the proximity function
    ``p(x) = sum_m beta_m d(x, C_m)^2``.
    """

    hard_projection: Callable[[np.ndarray], np.ndarray]
    soft_projections: Sequence[Callable[[np.ndarray], np.ndarray]]
    betas: Sequence[float]
    lam: float

    def __post_init__(self):
        if len(self.soft_projections) == 0:
            raise ValueError("at least one soft constraint is required")
        if len(self.betas) != len(self.soft_projections):
            raise ValueError("one weight per soft constraint is required")
        betas = np.asarray(self.betas, dtype=float)
        if np.any(betas <= 0) or np.any(betas > 1):
            raise ValueError("weights must lie in (0, 1]")
        if abs(betas.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {betas.sum()!r}")
        if not 0.0 < self.lam < 2.0:
            raise ValueError(f"lambda must lie in (0, 2), got {self.lam}")


def proximity_gradient(spec: InconsistentPriorSpec, x) -> np.ndarray:
    """Gradient ``2 sum_m beta_m (x - P_{C_m}(x))`` of the proximity function."""
    x = _as_vec(x)
    grad = np.zeros_like(x)
    for beta, proj in zip(spec.betas, spec.soft_projections):
        grad += beta * (x - proj(x))
    return 2.0 * grad


def inconsistent_prior_operator(spec: InconsistentPriorSpec) -> AttractingOperator:
    """``P_Gamma(I - (lam/2) p')``, which is ``(1 - lam/2)``-attracting.

    The half-gradient step ``x - lam sum_m beta_m (x - P_{C_m}(x))`` is a
    ``lam``-relaxation of the averaged projection, so the constant holds
    on the whole range ``lam in (0, 2)``. A full step ``lam p'`` would only
    be ``(1 - lam)``-attracting for ``lam < 1``.
    """

    def apply(x):
        x = np.asarray(x, dtype=float)
        step = x - 0.5 * spec.lam * proximity_gradient(spec, x)
        return np.asarray(spec.hard_projection(step), dtype=float)

    return AttractingOperator(apply, 1.0 - spec.lam / 2.0, "inconsistent-prior")
