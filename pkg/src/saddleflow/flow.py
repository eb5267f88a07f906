"""Vector fields and coordinate transforms of the PID saddle-point flow.

The dual variable is driven by proportional-integral-derivative feedback on
the constraint violation. After the change of variables ``xi = ki * integral
of h``, the closed loop becomes a saddle-point flow of the augmented
Lagrangian

    L_aug(x, xi) = f(x) + xi' h(x) + (kp / 2) ||h(x)||^2

with primal metric ``M(x) = I + kd * J_h(x)' J_h(x)``:

    M(x) dx/dt = -grad_x L_aug(x, xi),      dxi/dt = ki * h(x).

The true multiplier is derived state, ``lam = xi + kp h(x) + kd J_h(x) dx``,
and is never integrated. With ``kd = 0`` the flow is conjugate, through
``T(x, lam) = (x, lam - kp h(x))``, to the PI-controlled dynamics in the
original ``(x, lam)`` coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_vector
from .problem import AffineConstraint, ConstrainedProblem

__all__ = [
    "Gains",
    "SaddleState",
    "FlowDiagnostics",
    "open_loop_rhs",
    "metric_apply_inverse",
    "augmented_lagrangian",
    "pid_spf_rhs",
    "pi_cmo_rhs",
    "transform_T",
    "transform_T_inverse",
    "reconstruct_multiplier",
    "SaddleFlow",
    "AffineSaddleFlow",
    "PiCmoFlow",
]


@dataclass(frozen=True)
class Gains:
    """PID gains on the dual variable.

    The integral gain must be strictly positive (it is what enforces
    feasibility); proportional and derivative gains may vanish.
    """

    kp: float
    ki: float
    kd: float = 0.0

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"gain {name} must be finite")
        if self.ki <= 0:
            raise ValueError(f"integral gain must be > 0, got ki={self.ki}")
        if self.kp < 0 or self.kd < 0:
            raise ValueError(f"kp and kd must be >= 0, got kp={self.kp}, kd={self.kd}")

    def tag(self) -> str:
        """Filesystem-safe label, e.g. ``kp15_ki100_kd0p1``."""

        def fmt(v: float) -> str:
            s = f"{v:g}"
            return s.replace(".", "p").replace("-", "m")

        return f"kp{fmt(self.kp)}_ki{fmt(self.ki)}_kd{fmt(self.kd)}"


@dataclass(frozen=True)
class SaddleState:
    """Flow state ``z = (x, xi)``: primal point and integral (dual) state."""

    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_vector(self.x, "x"))
        object.__setattr__(self, "xi", as_vector(self.xi, "xi"))

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, self.xi])

    @staticmethod
    def from_stacked(z: np.ndarray, n: int) -> "SaddleState":
        z = as_vector(z, "z")
        return SaddleState(x=z[:n], xi=z[n:])


@dataclass(frozen=True)
class FlowDiagnostics:
    """Pointwise diagnostics: ``||h(x)||``, augmented Lagrangian, multiplier."""

    constraint_violation: float
    lagrangian_aug: float
    multiplier: np.ndarray


def open_loop_rhs(problem: ConstrainedProblem, x, lam) -> np.ndarray:
    """Primal plant ``dx/dt = -grad f(x) - J_h(x)' lam`` with the multiplier as input."""
    x = as_vector(x, "x", problem.n)
    lam = as_vector(lam, "lam", problem.m)
    return -problem.objective.gradient(x) - problem.constraint.jacobian(x).T @ lam


def metric_apply_inverse(problem: ConstrainedProblem, gains: Gains, x, g) -> np.ndarray:
    """Apply ``M(x)^-1`` for ``M(x) = I + kd J_h(x)' J_h(x)``.

    For wide Jacobians (m <= n/2) the inverse is applied through the rank-m
    identity ``M^-1 = I - kd J'(I_m + kd J J')^-1 J`` without forming the n x n
    matrix; otherwise ``M`` is assembled and solved densely.
    """
    g = as_vector(g, "g", problem.n)
    if gains.kd == 0.0:
        return g.copy()
    J = problem.constraint.jacobian(as_vector(x, "x", problem.n))
    return _apply_metric_inverse(J, gains.kd, g)


def _apply_metric_inverse(J: np.ndarray, kd: float, g: np.ndarray) -> np.ndarray:
    m, n = J.shape
    if kd == 0.0:
        return g.copy()
    if 2 * m <= n:
        small = np.eye(m) + kd * (J @ J.T)
        return g - kd * (J.T @ np.linalg.solve(small, J @ g))
    M = np.eye(n) + kd * (J.T @ J)
    return np.linalg.solve(M, g)


def augmented_lagrangian(
    problem: ConstrainedProblem, gains: Gains, x, xi
) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and partial gradients of the augmented Lagrangian at ``(x, xi)``."""
    x = as_vector(x, "x", problem.n)
    xi = as_vector(xi, "xi", problem.m)
    h = problem.constraint.value(x)
    J = problem.constraint.jacobian(x)
    value = problem.objective.value(x) + float(xi @ h) + 0.5 * gains.kp * float(h @ h)
    grad_x = problem.objective.gradient(x) + J.T @ xi + gains.kp * (J.T @ h)
    return value, grad_x, h


def pid_spf_rhs(
    problem: ConstrainedProblem, gains: Gains, state: SaddleState, noise=None
) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side of the PID saddle-point flow at ``state``.

    ``noise``, when given, is added to every constraint evaluation in this
    call (one shared disturbance per step), modelling an inexact constraint
    oracle.
    """
    x = as_vector(state.x, "x", problem.n)
    xi = as_vector(state.xi, "xi", problem.m)
    h = problem.constraint.value(x)
    if noise is not None:
        h = h + as_vector(noise, "noise", problem.m)
    J = problem.constraint.jacobian(x)
    grad_x = problem.objective.gradient(x) + J.T @ xi + gains.kp * (J.T @ h)
    dx = _apply_metric_inverse(J, gains.kd, -grad_x)
    dxi = gains.ki * h
    return dx, dxi


def pi_cmo_rhs(
    problem: ConstrainedProblem, gains: Gains, x, lam
) -> tuple[np.ndarray, np.ndarray]:
    """PI-controlled multiplier dynamics in the original ``(x, lam)`` coordinates.

    ``dx = -grad f - J' lam`` and ``dlam = ki h + kp J dx``. Only defined for
    ``kd = 0``; the derivative term would couple through the primal
    acceleration and is handled via the saddle-point form instead.
    """
    if gains.kd != 0.0:
        raise ValueError("pi_cmo_rhs requires kd = 0; use the saddle-point flow for kd > 0")
    x = as_vector(x, "x", problem.n)
    lam = as_vector(lam, "lam", problem.m)
    h = problem.constraint.value(x)
    J = problem.constraint.jacobian(x)
    dx = -problem.objective.gradient(x) - J.T @ lam
    dlam = gains.ki * h + gains.kp * (J @ dx)
    return dx, dlam


def transform_T(gains: Gains, problem: ConstrainedProblem, x, lam) -> SaddleState:
    """Change of variables ``(x, lam) -> (x, xi = lam - kp h(x))``."""
    x = as_vector(x, "x", problem.n)
    lam = as_vector(lam, "lam", problem.m)
    return SaddleState(x=x, xi=lam - gains.kp * problem.constraint.value(x))


def transform_T_inverse(
    gains: Gains, problem: ConstrainedProblem, state: SaddleState
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse map ``(x, xi) -> (x, lam = xi + kp h(x))``."""
    x = as_vector(state.x, "x", problem.n)
    return x, state.xi + gains.kp * problem.constraint.value(x)


def reconstruct_multiplier(
    problem: ConstrainedProblem, gains: Gains, state: SaddleState, dx
) -> np.ndarray:
    """Recover the multiplier ``lam = xi + kp h(x) + kd J_h(x) dx``.

    ``dx`` must be the current flow velocity; at equilibrium the correction
    terms vanish and ``lam = xi``.
    """
    x = as_vector(state.x, "x", problem.n)
    dx = as_vector(dx, "dx", problem.n)
    lam = state.xi + gains.kp * problem.constraint.value(x)
    if gains.kd != 0.0:
        lam = lam + gains.kd * (problem.constraint.jacobian(x) @ dx)
    return lam


class SaddleFlow:
    """PID saddle-point flow bound to one problem and one gain triple.

    Provides the interface consumed by the integrator: a right-hand side,
    the constraint value for diagnostics, and the multiplier reconstruction.
    """

    def __init__(self, problem: ConstrainedProblem, gains: Gains):
        self.problem = problem
        self.gains = gains

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def m(self) -> int:
        return self.problem.m

    def rhs(self, state: SaddleState, noise=None) -> tuple[np.ndarray, np.ndarray]:
        return pid_spf_rhs(self.problem, self.gains, state, noise)

    def constraint_value(self, x) -> np.ndarray:
        return self.problem.constraint.value(x)

    def multiplier(self, state: SaddleState, dx) -> np.ndarray:
        return reconstruct_multiplier(self.problem, self.gains, state, dx)

    def diagnostics(self, state: SaddleState) -> FlowDiagnostics:
        value, _, h = augmented_lagrangian(self.problem, self.gains, state.x, state.xi)
        dx, _ = self.rhs(state)
        return FlowDiagnostics(
            constraint_violation=float(np.linalg.norm(h)),
            lagrangian_aug=value,
            multiplier=self.multiplier(state, dx),
        )


class AffineSaddleFlow(SaddleFlow):
    """Fast path for affine constraints: the metric inverse is precomputed.

    Evaluates the same vector field as :class:`SaddleFlow`; the factor
    ``(I + kd A'A)^-1`` is formed once at construction.
    """

    def __init__(self, problem: ConstrainedProblem, gains: Gains):
        if not isinstance(problem.constraint, AffineConstraint):
            raise ValueError("AffineSaddleFlow requires an affine constraint")
        super().__init__(problem, gains)
        A = problem.constraint.A
        self._A = A
        self._b = problem.constraint.b
        n = A.shape[1]
        self._minv = np.linalg.inv(np.eye(n) + gains.kd * (A.T @ A))

    def rhs(self, state: SaddleState, noise=None) -> tuple[np.ndarray, np.ndarray]:
        h = self._A @ state.x - self._b
        if noise is not None:
            h = h + noise
        grad_x = self.problem.objective.gradient(state.x) + self._A.T @ (
            state.xi + self.gains.kp * h
        )
        dx = -(self._minv @ grad_x)
        dxi = self.gains.ki * h
        return dx, dxi


class PiCmoFlow(SaddleFlow):
    """PI multiplier dynamics wrapped in the integrator interface.

    The state's second block holds the multiplier itself rather than the
    integral state; useful for stepping both coordinate systems side by side.
    """

    def __init__(self, problem: ConstrainedProblem, gains: Gains):
        if gains.kd != 0.0:
            raise ValueError("PiCmoFlow requires kd = 0")
        super().__init__(problem, gains)

    def rhs(self, state: SaddleState, noise=None) -> tuple[np.ndarray, np.ndarray]:
        if noise is not None:
            raise ValueError("PiCmoFlow does not support noisy constraint evaluations")
        return pi_cmo_rhs(self.problem, self.gains, state.x, state.xi)

    def multiplier(self, state: SaddleState, dx) -> np.ndarray:
        return state.xi.copy()
