"""Closed-form contraction certificates and their numerical verification.

For the affine flow the Jacobian is a scaled saddle matrix

    S = [-M^-1 B',  -M^-1 A';  ki A,  0],    B' = hess f + kp A'A,

and a weighted norm ``||.||_P`` with

    P = [M, alpha A'; alpha A, (1/ki) I]

makes the flow contract at an explicit rate ``c``. The coupling ``alpha``
and rate come from spectral bounds alone, so the same closed form applies
to any saddle matrix whose blocks satisfy two-sided bounds. ``lmi_verify``
and ``verify_flow_contraction`` check the resulting linear matrix
inequality and log-norm bound numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import Gains, SaddleState
from .linalg import (
    NotPositiveDefiniteError,
    as_matrix,
    as_vector,
    cholesky,
    lognorm_weighted,
)
from .problem import QpInstance

__all__ = [
    "CertificateInput",
    "Certificate",
    "certificate_general",
    "certificate_affine",
    "saddle_matrix",
    "lmi_verify",
    "verify_flow_contraction",
    "lyapunov_value",
]


@dataclass(frozen=True)
class CertificateInput:
    """Spectral bounds defining a family of scaled saddle matrices.

    ``m_min I <= M <= m_max I`` for the metric block, ``b_min I <= B <= b_max I``
    for the curvature block, ``a_min I <= A A' <= a_max I`` for the constraint
    Gram matrix, and ``tau > 0`` the dual scaling.
    """

    m_min: float
    m_max: float
    b_min: float
    b_max: float
    a_min: float
    a_max: float
    tau: float

    def __post_init__(self):
        pairs = [
            ("m_min", "m_max", self.m_min, self.m_max),
            ("b_min", "b_max", self.b_min, self.b_max),
            ("a_min", "a_max", self.a_min, self.a_max),
        ]
        for lo_name, hi_name, lo, hi in pairs:
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError(f"{lo_name}/{hi_name} must be finite")
            if not (0 < lo <= hi):
                raise ValueError(f"need 0 < {lo_name} <= {hi_name}, got {lo}, {hi}")
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be > 0, got {self.tau}")


@dataclass(frozen=True)
class Certificate:
    """Contraction certificate ``(P, alpha, rate)`` for an affine flow."""

    P: np.ndarray
    alpha: float
    rate: float
    input: CertificateInput

    def __post_init__(self):
        cholesky(self.P)  # P must be positive definite
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not self.rate > 0:
            raise ValueError("rate must be > 0")


def certificate_general(inp: CertificateInput) -> tuple[float, float]:
    """Coupling and contraction rate for the bound family ``inp``.

    ``alpha = min(m_min / b_max, tau * b_min / a_max) / 2`` and
    ``rate = alpha * a_min / (2 * tau * m_max)``.
    """
    alpha = 0.5 * min(inp.m_min / inp.b_max, inp.tau * inp.b_min / inp.a_max)
    rate = 0.5 * alpha * inp.a_min / (inp.tau * inp.m_max)
    return alpha, rate


def certificate_affine(qp: QpInstance, gains: Gains) -> Certificate:
    """Certificate for the PID saddle-point flow on an affine-constrained QP.

    The flow Jacobian falls into the scaled-saddle family with
    ``m_min/m_max = 1 + kd * a_min/max``, ``b_min/max = rho/L + kp * a_min/max``
    and ``tau = 1/ki``, where ``a_min/max`` bound the constraint Gram matrix.
    Assembles ``P`` from the instance and returns the full certificate.
    """
    if qp.rho is None or qp.lsmooth is None:
        raise NotPositiveDefiniteError("instance lacks declared curvature constants")
    bounds = qp.constraint.gram_bounds
    a_min, a_max = bounds.lower, bounds.upper
    inp = CertificateInput(
        m_min=1.0 + gains.kd * a_min,
        m_max=1.0 + gains.kd * a_max,
        b_min=qp.rho + gains.kp * a_min,
        b_max=qp.lsmooth + gains.kp * a_max,
        a_min=a_min,
        a_max=a_max,
        tau=1.0 / gains.ki,
    )
    alpha, rate = certificate_general(inp)
    A = qp.A
    n, m = qp.n, qp.m
    M = np.eye(n) + gains.kd * (A.T @ A)
    P = np.block([[M, alpha * A.T], [alpha * A, np.eye(m) / gains.ki]])
    return Certificate(P=P, alpha=alpha, rate=rate, input=inp)


def saddle_matrix(M, B, A, tau: float) -> np.ndarray:
    """Assemble the scaled saddle matrix ``[-M^-1 B, -M^-1 A'; A/tau, 0]``."""
    M = as_matrix(M, "M")
    B = as_matrix(B, "B")
    A = as_matrix(A, "A")
    cholesky(M)  # require M positive definite
    m, n = A.shape
    if M.shape != (n, n) or B.shape != (n, n):
        raise ValueError("M and B must be n x n with A of shape m x n")
    if tau <= 0:
        raise ValueError("tau must be > 0")
    minv_b = np.linalg.solve(M, B)
    minv_at = np.linalg.solve(M, A.T)
    return np.block([[-minv_b, -minv_at], [A / tau, np.zeros((m, m))]])


def lmi_verify(S, P, rate: float) -> float:
    """Margin of the contraction LMI ``S'P + PS <= -2 rate P``.

    Returns the largest eigenvalue of ``Rinv (S'P + PS + 2 rate P) Rinv'``
    for ``P = R R'``; values at or below the working tolerance mean the LMI
    holds with the given rate.
    """
    S = as_matrix(S, "S")
    P = as_matrix(P, "P")
    R = cholesky(P)
    G = S.T @ P + P @ S + 2.0 * rate * P
    W = np.linalg.solve(R, np.linalg.solve(R, G).T).T
    return float(np.linalg.eigvalsh(0.5 * (W + W.T))[-1])


def flow_jacobian(qp: QpInstance, gains: Gains) -> np.ndarray:
    """Jacobian of the affine PID saddle-point flow (state independent)."""
    A = qp.A
    B = 2.0 * qp.Q + gains.kp * (A.T @ A)
    M = np.eye(qp.n) + gains.kd * (A.T @ A)
    return saddle_matrix(M, B, A, tau=1.0 / gains.ki)


def verify_flow_contraction(
    qp: QpInstance, gains: Gains, samples: int, seed: int
) -> float:
    """Worst weighted log-norm of the flow Jacobian over sampled states.

    Draws ``samples`` random states, evaluates the Jacobian at each, and
    returns the maximum of ``lognorm_weighted(P, J)``. The certificate
    guarantees this is at most ``-rate``; for quadratic objectives the
    Jacobian is constant, so all samples agree.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    cert = certificate_affine(qp, gains)
    rng = np.random.default_rng(seed)
    A = qp.A
    M = np.eye(qp.n) + gains.kd * (A.T @ A)
    hess = qp.objective().hessian
    worst = -np.inf
    for _ in range(samples):
        x = rng.uniform(-10.0, 10.0, qp.n)
        B = hess(x) + gains.kp * (A.T @ A)
        S = saddle_matrix(M, B, A, tau=1.0 / gains.ki)
        worst = max(worst, lognorm_weighted(cert.P, S))
    return worst


def lyapunov_value(cert: Certificate, state: SaddleState, equilibrium: SaddleState) -> float:
    """Quadratic energy ``(z - z*)' P (z - z*)`` of a state about an equilibrium."""
    dz = state.stacked - equilibrium.stacked
    if dz.shape[0] != cert.P.shape[0]:
        raise ValueError(
            f"state dimension {dz.shape[0]} does not match P ({cert.P.shape[0]})"
        )
    dz = as_vector(dz, "dz")
    return float(dz @ cert.P @ dz)
