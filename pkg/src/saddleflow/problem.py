"""Problem instances: smooth objectives, equality constraints, generators.

A problem couples a differentiable objective with an equality-constraint map
``h(x) = 0``. Affine constraints ``h(x) = A x - b`` carry their Gram spectral
bounds so downstream certificates can be evaluated without re-factoring.
Random quadratic programs pin the declared curvature constants exactly, and
the bilevel helper rewrites a strongly convex lower level into an equivalent
equality-constrained program over the stacked variable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .linalg import (
    RankDeficientError,
    NotPositiveDefiniteError,
    SpectralBounds,
    as_matrix,
    as_vector,
    cholesky,
    spectral_bounds_gram,
)

__all__ = [
    "SmoothObjective",
    "ConstraintMap",
    "AffineConstraint",
    "ConstrainedProblem",
    "QpInstance",
    "BilevelInstance",
    "generate_qp",
    "kkt_solve",
    "bilevel_reformulate",
    "sample_noise",
    "instance_to_json",
    "instance_from_json",
]


class SmoothObjective:
    """Differentiable objective given by value/gradient (and optional Hessian) oracles.

    ``rho`` and ``lsmooth`` are declared strong-convexity and gradient-Lipschitz
    constants; they are metadata used by certificates, not enforced here.
    """

    def __init__(self, dimension, value, gradient, hessian=None, rho=None, lsmooth=None):
        if dimension < 1:
            raise ValueError("objective dimension must be >= 1")
        if rho is not None and lsmooth is not None and not (0 < rho <= lsmooth):
            raise ValueError(f"need 0 < rho <= lsmooth, got rho={rho}, lsmooth={lsmooth}")
        self.dimension = int(dimension)
        self._value = value
        self._gradient = gradient
        self._hessian = hessian
        self.rho = rho
        self.lsmooth = lsmooth

    def value(self, x) -> float:
        return float(self._value(as_vector(x, "x", self.dimension)))

    def gradient(self, x) -> np.ndarray:
        return as_vector(self._gradient(as_vector(x, "x", self.dimension)), "gradient")

    @property
    def has_hessian(self) -> bool:
        return self._hessian is not None

    def hessian(self, x) -> np.ndarray:
        if self._hessian is None:
            raise ValueError("no Hessian oracle was provided")
        return as_matrix(self._hessian(as_vector(x, "x", self.dimension)), "hessian")


class ConstraintMap:
    """Equality-constraint map ``h: R^n -> R^m`` with a Jacobian oracle."""

    def __init__(self, dim_in, dim_out, value, jacobian):
        if dim_out < 1 or dim_in < 1:
            raise ValueError("constraint dimensions must be >= 1")
        if dim_out > dim_in:
            raise ValueError(f"need m <= n, got m={dim_out}, n={dim_in}")
        self.dim_in = int(dim_in)
        self.dim_out = int(dim_out)
        self._value = value
        self._jacobian = jacobian

    def value(self, x) -> np.ndarray:
        return as_vector(self._value(as_vector(x, "x", self.dim_in)), "h(x)", self.dim_out)

    def jacobian(self, x) -> np.ndarray:
        J = as_matrix(self._jacobian(as_vector(x, "x", self.dim_in)), "J_h(x)")
        if J.shape != (self.dim_out, self.dim_in):
            raise ValueError(f"Jacobian shape {J.shape} != ({self.dim_out}, {self.dim_in})")
        return J


class AffineConstraint(ConstraintMap):
    """Affine constraint ``h(x) = A x - b`` with cached Gram spectral bounds."""

    def __init__(self, A, b):
        A = as_matrix(A, "A")
        b = as_vector(b, "b", A.shape[0])
        self.A = A
        self.b = b
        self.gram_bounds: SpectralBounds = spectral_bounds_gram(A)
        super().__init__(
            dim_in=A.shape[1],
            dim_out=A.shape[0],
            value=lambda x: self.A @ x - self.b,
            jacobian=lambda x: self.A,
        )


@dataclass(frozen=True)
class ConstrainedProblem:
    """Objective plus equality constraint over the same primal space."""

    objective: SmoothObjective
    constraint: ConstraintMap

    def __post_init__(self):
        if self.objective.dimension != self.constraint.dim_in:
            raise ValueError(
                f"objective dimension {self.objective.dimension} != "
                f"constraint input dimension {self.constraint.dim_in}"
            )

    @property
    def n(self) -> int:
        return self.objective.dimension

    @property
    def m(self) -> int:
        return self.constraint.dim_out


class QpInstance:
    """Quadratic program ``min x'Qx  s.t.  Ax = b`` with pinned curvature.

    The Hessian of the objective is ``2Q``; its extreme eigenvalues equal the
    declared ``rho`` and ``lsmooth``.
    """

    def __init__(self, Q, A, b, rho, lsmooth):
        Q = as_matrix(Q, "Q")
        if Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if not (0 < rho <= lsmooth):
            raise ValueError(f"need 0 < rho <= lsmooth, got {rho}, {lsmooth}")
        self.Q = 0.5 * (Q + Q.T)
        self.constraint = AffineConstraint(A, b)
        if self.constraint.dim_in != Q.shape[0]:
            raise ValueError("A and Q have inconsistent dimensions")
        self.rho = float(rho)
        self.lsmooth = float(lsmooth)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.constraint.dim_out

    @property
    def A(self) -> np.ndarray:
        return self.constraint.A

    @property
    def b(self) -> np.ndarray:
        return self.constraint.b

    def objective(self) -> SmoothObjective:
        Q = self.Q
        return SmoothObjective(
            dimension=self.n,
            value=lambda x: x @ Q @ x,
            gradient=lambda x: 2.0 * (Q @ x),
            hessian=lambda x: 2.0 * Q,
            rho=self.rho,
            lsmooth=self.lsmooth,
        )

    def to_problem(self) -> ConstrainedProblem:
        return ConstrainedProblem(self.objective(), self.constraint)


class BilevelInstance:
    """Leader-follower instance with a strongly convex quadratic lower level.

    Upper objective over the stacked pair ``(x, y)``:
    ``logsumexp(x) + upper_weight * ||C x - y||^2``. Lower objective:
    ``0.5 y'Qlow y + (Alow x + blow)' y``, whose stationarity condition
    ``Alow x + Qlow y + blow = 0`` becomes the equality constraint after
    reformulation. ``noise_bound`` is the radius of the bounded disturbance
    added to constraint evaluations in noisy runs.
    """

    def __init__(self, Qlow, Alow, blow, C, upper_weight, noise_bound=0.0):
        Qlow = as_matrix(Qlow, "Qlow")
        Alow = as_matrix(Alow, "Alow")
        self.m = Qlow.shape[0]
        self.n = Alow.shape[1]
        if Qlow.shape != (self.m, self.m):
            raise ValueError("Qlow must be square")
        if Alow.shape != (self.m, self.n):
            raise ValueError("Alow must be m x n")
        try:
            cholesky(Qlow)
        except NotPositiveDefiniteError as exc:
            raise ValueError("lower level is not strongly convex: Qlow is not positive definite") from exc
        self.Qlow = 0.5 * (Qlow + Qlow.T)
        self.Alow = Alow
        self.blow = as_vector(blow, "blow", self.m)
        self.C = as_matrix(C, "C")
        if self.C.shape != (self.m, self.n):
            raise ValueError("C must be m x n")
        if not upper_weight > 0:
            raise ValueError("upper_weight must be > 0")
        if noise_bound < 0:
            raise ValueError("noise_bound must be >= 0")
        self.upper_weight = float(upper_weight)
        self.noise_bound = float(noise_bound)

    def lower_level_solution(self, x) -> np.ndarray:
        """Unique lower-level minimizer ``y(x) = -Qlow^-1 (Alow x + blow)``."""
        x = as_vector(x, "x", self.n)
        return np.linalg.solve(self.Qlow, -(self.Alow @ x + self.blow))


def _random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def generate_qp(n: int, m: int, rho: float, lsmooth: float, seed: int) -> QpInstance:
    """Random QP with Hessian spectrum exactly spanning ``[rho, lsmooth]``.

    The Hessian ``2Q`` is an orthogonal similarity of a diagonal with one
    eigenvalue pinned at ``rho``, one at ``lsmooth``, and the rest uniform in
    between. The constraint matrix is Gaussian, redrawn while rank-deficient,
    then scaled so its Gram matrix has unit spectral norm; this keeps the
    paper-style gain magnitudes well inside the stability region of the
    default integrator step. Deterministic in ``seed``.
    """
    if not (0 < rho <= lsmooth):
        raise ValueError(f"need 0 < rho <= lsmooth, got {rho}, {lsmooth}")
    if not (1 <= m <= n):
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    if n == 1 and rho != lsmooth:
        raise ValueError("n = 1 admits a single eigenvalue; need rho == lsmooth")
    rng = np.random.default_rng(seed)
    v = _random_orthogonal(n, rng)
    eigs = rng.uniform(rho, lsmooth, size=n)
    eigs[0] = rho
    eigs[-1] = lsmooth
    Q = 0.5 * (v * eigs) @ v.T
    while True:
        A = rng.standard_normal((m, n))
        gram = np.linalg.eigvalsh(A @ A.T)
        if gram[0] > 1e-6:
            break
    A = A / np.sqrt(gram[-1])
    b = rng.standard_normal(m)
    return QpInstance(Q=Q, A=A, b=b, rho=rho, lsmooth=lsmooth)


def kkt_solve(qp: QpInstance) -> tuple[np.ndarray, np.ndarray]:
    """Reference solution of the equality-constrained QP via its KKT system.

    Solves ``[2Q, A'; A, 0] (x, lam) = (0, b)`` directly and returns the
    primal-dual pair ``(x_star, lambda_star)``.
    """
    n, m = qp.n, qp.m
    K = np.block([[2.0 * qp.Q, qp.A.T], [qp.A, np.zeros((m, m))]])
    rhs = np.concatenate([np.zeros(n), qp.b])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientError("KKT matrix is singular") from exc
    return sol[:n], sol[n:]


def _logsumexp(x: np.ndarray) -> float:
    c = float(np.max(x))
    return c + float(np.log(np.sum(np.exp(x - c))))


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - np.max(x))
    return e / np.sum(e)


def bilevel_reformulate(inst: BilevelInstance) -> tuple[SmoothObjective, AffineConstraint]:
    """Rewrite a bilevel instance as an equality-constrained program.

    The lower-level argmin is replaced by its stationarity condition, which is
    affine in the stacked variable ``v = (x, y)``:
    ``h(v) = Alow x + Qlow y + blow = [Alow Qlow] v - (-blow)``.
    Returns the upper objective over ``v`` and that affine constraint.
    """
    n, m = inst.n, inst.m
    C, w = inst.C, inst.upper_weight

    def split(v):
        return v[:n], v[n:]

    def value(v):
        x, y = split(v)
        r = C @ x - y
        return _logsumexp(x) + w * float(r @ r)

    def gradient(v):
        x, y = split(v)
        r = C @ x - y
        return np.concatenate([_softmax(x) + 2.0 * w * (C.T @ r), -2.0 * w * r])

    def hessian(v):
        x, _ = split(v)
        s = _softmax(x)
        hxx = np.diag(s) - np.outer(s, s) + 2.0 * w * (C.T @ C)
        hxy = -2.0 * w * C.T
        hyy = 2.0 * w * np.eye(m)
        return np.block([[hxx, hxy], [hxy.T, hyy]])

    objective = SmoothObjective(
        dimension=n + m, value=value, gradient=gradient, hessian=hessian
    )
    constraint = AffineConstraint(
        A=np.hstack([inst.Alow, inst.Qlow]), b=-inst.blow
    )
    return objective, constraint


def sample_noise(noise_bound: float, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a disturbance uniformly from the ball of radius ``noise_bound``.

    Direction uniform on the sphere, radius ``noise_bound * u**(1/dim)`` with
    ``u`` uniform on [0, 1]. Deterministic per generator position; the zero
    bound consumes no randomness and returns the zero vector.
    """
    if noise_bound < 0:
        raise ValueError("noise_bound must be >= 0")
    if noise_bound == 0.0:
        return np.zeros(dim)
    g = rng.standard_normal(dim)
    norm = np.linalg.norm(g)
    if norm == 0.0:  # probability zero; keep the draw inside the ball anyway
        return np.zeros(dim)
    radius = noise_bound * rng.random() ** (1.0 / dim)
    return (radius / norm) * g


def instance_to_json(instance) -> str:
    """Serialize a QP or bilevel instance to its JSON document."""
    if isinstance(instance, QpInstance):
        doc = {
            "qp": {
                "Q": instance.Q.tolist(),
                "A": instance.A.tolist(),
                "b": instance.b.tolist(),
                "rho": instance.rho,
                "L": instance.lsmooth,
            }
        }
    elif isinstance(instance, BilevelInstance):
        doc = {
            "bilevel": {
                "Qlow": instance.Qlow.tolist(),
                "Alow": instance.Alow.tolist(),
                "blow": instance.blow.tolist(),
                "C": instance.C.tolist(),
                "upper_weight": instance.upper_weight,
                "noise_bound": instance.noise_bound,
            }
        }
    else:
        raise TypeError(f"cannot serialize {type(instance).__name__}")
    return json.dumps(doc, indent=2)


def instance_from_json(text: str):
    """Inverse of :func:`instance_to_json`."""
    doc = json.loads(text)
    if "qp" in doc:
        q = doc["qp"]
        return QpInstance(Q=q["Q"], A=q["A"], b=q["b"], rho=q["rho"], lsmooth=q["L"])
    if "bilevel" in doc:
        b = doc["bilevel"]
        return BilevelInstance(
            Qlow=b["Qlow"],
            Alow=b["Alow"],
            blow=b["blow"],
            C=b["C"],
            upper_weight=b["upper_weight"],
            noise_bound=b.get("noise_bound", 0.0),
        )
    raise ValueError("document contains neither a 'qp' nor a 'bilevel' entry")
