"""Forward-Euler integration with trajectory recording and diagnostics.

The integrator steps ``z_{k+1} = z_k + dt * rhs(z_k)`` for a fixed step and
horizon. When a noise bound is set, every right-hand-side evaluation sees the
constraint value perturbed by one fresh draw from the noise ball, shared
across all uses of the constraint within that step. Recorded samples carry
the nominal (noise-free) constraint violation and reconstructed multiplier;
Lyapunov energy and weighted distance to a reference point can be attached
afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .certificate import Certificate
from .flow import SaddleFlow, SaddleState
from .linalg import as_vector, cholesky
from .problem import sample_noise

__all__ = [
    "DivergenceError",
    "IntegratorConfig",
    "Trajectory",
    "euler_integrate",
    "attach_diagnostics",
    "terminal_error_stats",
    "write_trajectory_csv",
    "read_trajectory_csv",
]


class DivergenceError(RuntimeError):
    """The integrated state left the range of finite floats."""

    def __init__(self, step: int):
        super().__init__(f"trajectory diverged (non-finite state) at step {step}")
        self.step = step


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step Euler settings.

    ``record_every`` thins the stored samples (the initial and final states
    are always kept). ``noise_bound`` is the radius of the per-step
    constraint disturbance; zero keeps the dynamics nominal and consumes no
    randomness. ``seed`` feeds the default noise stream when no generator is
    passed to the integrator.
    """

    dt: float = 0.01
    horizon: float = 20.0
    record_every: int = 1
    noise_bound: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if self.dt > self.horizon:
            raise ValueError("dt must not exceed the horizon")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.noise_bound < 0:
            raise ValueError("noise_bound must be >= 0")

    @property
    def steps(self) -> int:
        return int(math.ceil(self.horizon / self.dt))


@dataclass(frozen=True)
class Trajectory:
    """Recorded flow samples plus per-sample diagnostics.

    ``times`` starts at 0 and is strictly increasing; all series share its
    length. ``lyapunov`` and ``weighted_distance`` stay ``None`` until
    :func:`attach_diagnostics` fills them against a reference equilibrium.
    """

    times: np.ndarray
    xs: np.ndarray
    xis: np.ndarray
    constraint_violation: np.ndarray
    multipliers: np.ndarray | None = None
    lyapunov: np.ndarray | None = None
    weighted_distance: np.ndarray | None = None

    def __len__(self) -> int:
        return self.times.shape[0]

    def state(self, k: int) -> SaddleState:
        return SaddleState(x=self.xs[k], xi=self.xis[k])

    @property
    def n(self) -> int:
        return self.xs.shape[1]

    @property
    def m(self) -> int:
        return self.xis.shape[1]


def euler_integrate(
    flow: SaddleFlow,
    z0: SaddleState,
    config: IntegratorConfig,
    rng: np.random.Generator | None = None,
) -> Trajectory:
    """Integrate ``flow`` from ``z0`` with fixed-step forward Euler.

    Raises :class:`DivergenceError` as soon as the state stops being finite,
    reporting the offending step. Deterministic for a fixed generator (or
    ``config.seed`` when none is given).
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    x = np.array(z0.x, dtype=float)
    xi = np.array(z0.xi, dtype=float)
    m = xi.shape[0]
    dt = config.dt
    steps = config.steps
    noisy = config.noise_bound > 0.0

    times = [0.0]
    xs = [x.copy()]
    xis = [xi.copy()]

    for k in range(1, steps + 1):
        noise = sample_noise(config.noise_bound, m, rng) if noisy else None
        state = SaddleState(x=x, xi=xi)
        dx, dxi = flow.rhs(state, noise)
        x = x + dt * dx
        xi = xi + dt * dxi
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
            raise DivergenceError(k)
        if k % config.record_every == 0 or k == steps:
            times.append(k * dt)
            xs.append(x.copy())
            xis.append(xi.copy())

    times = np.asarray(times)
    xs = np.asarray(xs)
    xis = np.asarray(xis)
    violations = np.empty(len(times))
    multipliers = np.empty((len(times), m))
    for i in range(len(times)):
        state = SaddleState(x=xs[i], xi=xis[i])
        h = flow.constraint_value(xs[i])
        violations[i] = float(np.linalg.norm(h))
        dx, _ = flow.rhs(state)
        multipliers[i] = flow.multiplier(state, dx)
    return Trajectory(
        times=times,
        xs=xs,
        xis=xis,
        constraint_violation=violations,
        multipliers=multipliers,
    )


def _distance_series(
    traj: Trajectory, z_star: np.ndarray, chol_factor: np.ndarray | None
) -> np.ndarray:
    """Weighted distances of recorded states (or their primal part) to ``z_star``."""
    if z_star.shape[0] == traj.n + traj.m:
        pts = np.hstack([traj.xs, traj.xis])
    elif z_star.shape[0] == traj.n:
        pts = traj.xs
    else:
        raise ValueError(
            f"z_star length {z_star.shape[0]} matches neither the full state "
            f"({traj.n + traj.m}) nor the primal part ({traj.n})"
        )
    deltas = pts - z_star
    if chol_factor is None:
        return np.linalg.norm(deltas, axis=1)
    return np.linalg.norm(deltas @ chol_factor, axis=1)


def attach_diagnostics(
    traj: Trajectory, cert: Certificate | None, z_star: SaddleState
) -> Trajectory:
    """Fill the Lyapunov and weighted-distance series against an equilibrium.

    With a certificate the metric is its ``P``; without one the Euclidean
    metric is used. By construction ``weighted_distance**2 == lyapunov``.
    """
    ref = z_star.stacked
    R = cholesky(cert.P) if cert is not None else None
    dists = _distance_series(traj, ref, R)
    return replace(traj, lyapunov=dists**2, weighted_distance=dists)


def terminal_error_stats(
    trajs: list[Trajectory],
    z_star,
    window_fraction: float,
    metric: np.ndarray | None = None,
) -> tuple[float, float, float]:
    """Mean/min/max across trajectories of the trailing-window average distance.

    Each trajectory contributes the time average of ``||z - z_star||_metric``
    over its last ``window_fraction`` of recorded samples. ``z_star`` may
    address the full state or only the primal part (matched by length);
    ``metric`` defaults to the identity.
    """
    if not trajs:
        raise ValueError("need at least one trajectory")
    if not (0 < window_fraction <= 1):
        raise ValueError(f"window_fraction must be in (0, 1], got {window_fraction}")
    z_star = as_vector(np.asarray(z_star, dtype=float).ravel(), "z_star")
    R = cholesky(metric) if metric is not None else None
    averages = []
    for traj in trajs:
        dists = _distance_series(traj, z_star, R)
        k0 = min(len(dists) - 1, int(math.floor((1.0 - window_fraction) * len(dists))))
        averages.append(float(np.mean(dists[k0:])))
    return float(np.mean(averages)), float(np.min(averages)), float(np.max(averages))


# Trajectory CSV layout: one row per recorded sample, doubles at full
# precision so a parse reproduces the arrays bit for bit.


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n, m = traj.n, traj.m
    header = (
        ["t"]
        + [f"x_{i}" for i in range(n)]
        + [f"xi_{j}" for j in range(m)]
        + ["constraint_violation", "lyapunov", "weighted_distance"]
    )
    lyap = traj.lyapunov if traj.lyapunov is not None else np.full(len(traj), np.nan)
    wdist = (
        traj.weighted_distance
        if traj.weighted_distance is not None
        else np.full(len(traj), np.nan)
    )
    lines = [",".join(header)]
    for k in range(len(traj)):
        row = (
            [traj.times[k]]
            + list(traj.xs[k])
            + list(traj.xis[k])
            + [traj.constraint_violation[k], lyap[k], wdist[k]]
        )
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory_csv(path) -> Trajectory:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        data = np.array(
            [[float(tok) for tok in line.strip().split(",")] for line in fh if line.strip()]
        )
    n = sum(1 for name in header if name.startswith("x_"))
    m = sum(1 for name in header if name.startswith("xi_"))
    lyap = data[:, 1 + n + m + 1]
    wdist = data[:, 1 + n + m + 2]
    return Trajectory(
        times=data[:, 0],
        xs=data[:, 1 : 1 + n],
        xis=data[:, 1 + n : 1 + n + m],
        constraint_violation=data[:, 1 + n + m],
        lyapunov=None if np.all(np.isnan(lyap)) else lyap,
        weighted_distance=None if np.all(np.isnan(wdist)) else wdist,
    )
