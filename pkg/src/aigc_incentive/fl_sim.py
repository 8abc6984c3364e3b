"""Synthetic federated local SGD on strongly convex quadratics.

Every client owns ``F_k(w) = 1/2 (w - c_k)^T A (w - c_k)`` with one shared
curvature ``A``.  The global objective is the datasize-weighted sum, whose
minimiser is the weighted mean centre ``c_bar``, and the gradient gap of
client ``k`` is the constant vector ``A (c_bar - c_k)``.  Centres are placed
so those gaps have prescribed norms, which makes every quantity in the
convergence bound measurable on the instance.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .complete import Cohort
from .core import ClientAttributes, LearningParams, QualityModel, kappa1_for
from .errors import NumericError, ParameterError, PreconditionError

DEFAULT_DIMENSION = 10
CENTER_RADIUS = 5.0
DIVERGENCE_FACTOR = 1e3
BOUND_ATOL = 1e-9
PARTITION_TRIES = 64


@dataclass(frozen=True)
class QuadraticClient:
    curvature: np.ndarray
    center: np.ndarray
    noise_bound: float
    datasize: int

    def loss(self, w) -> float:
        diff = np.asarray(w) - self.center
        return 0.5 * float(diff @ self.curvature @ diff)

    def gradient(self, w) -> np.ndarray:
        return self.curvature @ (np.asarray(w) - self.center)


def random_curvature(dimension: int, mu: float, rho: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Random SPD matrix whose spectrum spans exactly ``[mu, rho]``."""
    if not 0 < mu <= rho:
        raise PreconditionError(f"need 0 < mu <= rho, got mu={mu}, rho={rho}")
    eig = rng.uniform(mu, rho, size=dimension)
    eig[0] = mu
    if dimension > 1:
        eig[-1] = rho
    basis, _ = np.linalg.qr(rng.standard_normal((dimension, dimension)))
    A = (basis * eig) @ basis.T
    return 0.5 * (A + A.T)


def weighted_center(clients: Sequence[QuadraticClient]) -> np.ndarray:
    d = np.array([c.datasize for c in clients], dtype=float)
    centers = np.stack([c.center for c in clients])
    return (d / d.sum()) @ centers


def measured_lambdas(clients: Sequence[QuadraticClient]) -> np.ndarray:
    c_bar = weighted_center(clients)
    return np.array([np.linalg.norm(c.curvature @ (c_bar - c.center)) for c in clients])


def _three_groups(sides: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Assign each side to one of three groups whose sums obey the triangle inequality."""
    total = sides.sum()

    def closes(groups):
        sums = np.bincount(groups, weights=sides, minlength=3)
        return sums.max() <= total - sums.max() + 1e-12 * total

    for _ in range(PARTITION_TRIES):
        groups = rng.integers(0, 3, size=sides.size)
        if closes(groups):
            return groups
    # longest-processing-time greedy always closes when no side exceeds half the total
    groups = np.empty(sides.size, dtype=int)
    sums = np.zeros(3)
    for k in np.argsort(-sides, kind="stable"):
        g = int(np.argmin(sums))
        groups[k] = g
        sums[g] += sides[k]
    return groups


def _gap_vectors(targets: np.ndarray, nu: np.ndarray, dimension: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Vectors ``g_k`` with ``|g_k| = targets[k]`` and ``sum nu_k g_k = 0``."""
    K = targets.size
    out = np.zeros((K, dimension))
    sides = nu * targets
    total = sides.sum()
    if total == 0:
        return out
    if sides.max() > total - sides.max() + 1e-12 * total:
        raise ParameterError(
            "infeasible gradient-gap targets: the largest weighted target exceeds "
            "the sum of the others, so no centres can realise them")
    if dimension < 2:
        raise ParameterError("non-zero gradient gaps need dimension >= 2")
    groups = _three_groups(sides, rng)
    L = np.bincount(groups, weights=sides, minlength=3)
    order = np.argsort(-L, kind="stable")
    L1, L2, L3 = L[order]
    # triangle with sides L1, L2, L3 in a plane: u1 + u2 + u3 = 0
    cos_a = np.clip((L3 ** 2 - L1 ** 2 - L2 ** 2) / (2.0 * L1 * L2), -1.0, 1.0) if L2 > 0 else -1.0
    u = np.zeros((3, 2))
    u[0] = (L1, 0.0)
    u[1] = L2 * np.array([cos_a, math.sqrt(max(0.0, 1.0 - cos_a ** 2))])
    u[2] = -(u[0] + u[1])
    plane, _ = np.linalg.qr(rng.standard_normal((dimension, 2)))
    directions = np.zeros((3, 2))
    for slot, g in enumerate(order):
        norm = np.linalg.norm(u[slot])
        directions[g] = u[slot] / norm if norm > 0 else (1.0, 0.0)
    for k in range(K):
        out[k] = targets[k] * (plane @ directions[groups[k]])
    return out


def build_federation(num_clients: int, dimension: int, target_lambdas: Sequence[float],
                     lp: LearningParams, seed: int,
                     datasizes: Optional[Sequence[int]] = None,
                     center_radius: float = CENTER_RADIUS) -> list:
    """Quadratic clients whose gradient gaps have the requested norms.

    The curvature spectrum spans ``[mu, rho]``; ``c_bar`` sits at a random
    point at distance ``center_radius`` from the origin, and each centre is
    ``c_bar - A^{-1} g_k`` with the gap vectors ``g_k`` chained into a closed
    weighted polygon.  Perturbation norms are ``psi / sqrt(d_k / h)``.
    """
    if int(num_clients) != num_clients or num_clients < 1:
        raise PreconditionError(f"num_clients must be a positive integer, got {num_clients}")
    if int(dimension) != dimension or dimension < 1:
        raise PreconditionError(f"dimension must be a positive integer, got {dimension}")
    targets = np.asarray(target_lambdas, dtype=float)
    if targets.shape != (num_clients,):
        raise PreconditionError(f"need {num_clients} target lambdas, got {targets.shape}")
    if np.any(targets < 0) or not np.all(np.isfinite(targets)):
        raise PreconditionError("target lambdas must be finite and >= 0")
    rng = np.random.default_rng(seed)
    A = random_curvature(int(dimension), lp.mu, lp.rho, rng)
    if datasizes is None:
        datasizes = rng.integers(100, 301, size=num_clients)
    d = np.asarray(datasizes, dtype=int)
    if d.shape != (num_clients,) or np.any(d < 1):
        raise PreconditionError("datasizes must be positive, one per client")
    nu = d / d.sum()
    direction = rng.standard_normal(int(dimension))
    c_bar = center_radius * direction / np.linalg.norm(direction)
    gaps = _gap_vectors(targets, nu, int(dimension), rng)
    offsets = np.linalg.solve(A, gaps.T).T
    return [QuadraticClient(A, c_bar - offsets[k], lp.psi / math.sqrt(d[k] / lp.h), int(d[k]))
            for k in range(num_clients)]


def federation_for_cohort(population: Sequence[ClientAttributes], cohort: Cohort,
                          q: QualityModel, lp: LearningParams, seed: int,
                          dimension: int = DEFAULT_DIMENSION) -> list:
    """Federation of the cohort members, AIGC users built with gap ``theta * lambda_k``."""
    members = sorted(cohort.members)
    if not members:
        raise PreconditionError("cohort is empty")
    targets = [q.theta * population[k].quality if k in cohort.aigc_set
               else population[k].quality for k in members]
    return build_federation(len(members), dimension, targets, lp, seed,
                            datasizes=[population[k].datasize for k in members])


@dataclass
class TrainingTrace:
    gap: np.ndarray
    bound: np.ndarray
    theta_gap: float
    lambda_bar: float
    beta_eff: float
    kappa1_eff: float

    def __post_init__(self):
        if len(self.gap) != len(self.bound):
            raise PreconditionError("gap and bound series must have equal length")

    @property
    def margin(self) -> np.ndarray:
        return self.bound - self.gap

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("t", "gap", "bound", "margin"))
        for t, (g, b) in enumerate(zip(self.gap, self.bound)):
            writer.writerow((t, repr(float(g)), repr(float(b)), repr(float(b - g))))
        return buf.getvalue()


@dataclass(frozen=True)
class BoundReport:
    max_violation: float
    passed: bool
    worst_t: int


def bound_check(trace: TrainingTrace, atol: float = BOUND_ATOL) -> BoundReport:
    excess = trace.gap - trace.bound
    t = int(np.argmax(excess))
    worst = float(excess[t])
    return BoundReport(worst, worst <= atol, t)


def _unit_rows(rng, n, dim):
    v = rng.standard_normal((n, dim))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    return v / np.where(norms > 0, norms, 1.0)


def run_rounds(clients: Sequence[QuadraticClient], lp: LearningParams, T: int, seed: int,
               cohort: Optional[Sequence[int]] = None,
               w0: Optional[np.ndarray] = None) -> TrainingTrace:
    """``T`` global iterations of ``h`` perturbed local steps plus weighted averaging.

    The bound uses the instance's exact initial gap, the measured gradient
    gaps, and ``beta_eff``: the configured ``beta`` raised to the largest
    client gradient norm met along the run, since a quadratic is only
    Lipschitz on bounded sets.
    """
    if int(T) != T or T < 0:
        raise PreconditionError(f"T must be an integer >= 0, got {T}")
    if lp.eta >= 1.0 / lp.rho:
        raise PreconditionError("learning rate must satisfy eta < 1/rho")
    members = list(range(len(clients))) if cohort is None else sorted(cohort)
    if not members:
        raise PreconditionError("cohort is empty")
    chosen = [clients[k] for k in members]
    A = chosen[0].curvature
    centers = np.stack([c.center for c in chosen])
    d = np.array([c.datasize for c in chosen], dtype=float)
    nu = d / d.sum()
    noise = np.array([c.noise_bound for c in chosen])
    c_bar = nu @ centers
    dim = centers.shape[1]
    w = np.zeros(dim) if w0 is None else np.asarray(w0, dtype=float).copy()

    def global_gap(x):
        diff = x - c_bar
        return 0.5 * float(diff @ A @ diff)

    theta_gap = global_gap(w)
    lam = np.linalg.norm((c_bar - centers) @ A, axis=1)
    lambda_bar = float(nu @ (noise + lam))
    rng = np.random.default_rng(seed)

    def max_grad(points):
        return float(np.max(np.linalg.norm((points - centers) @ A, axis=-1)))

    gaps = [theta_gap]
    beta_seen = max_grad(np.broadcast_to(w, centers.shape))
    for _ in range(int(T)):
        local = np.broadcast_to(w, centers.shape).copy()
        for _ in range(lp.h):
            grad = (local - centers) @ A
            beta_seen = max(beta_seen, float(np.max(np.linalg.norm(grad, axis=1))))
            grad += noise[:, None] * _unit_rows(rng, len(chosen), dim)
            local -= lp.eta * grad
        w = nu @ local
        beta_seen = max(beta_seen, max_grad(np.broadcast_to(w, centers.shape)))
        gap = global_gap(w)
        if not math.isfinite(gap) or gap > DIVERGENCE_FACTOR * max(theta_gap, 1e-300):
            raise NumericError(f"training diverged: gap {gap} exceeds {DIVERGENCE_FACTOR} x Theta")
        gaps.append(gap)

    beta_eff = max(lp.beta, beta_seen)
    kappa1 = kappa1_for(beta_eff, lp.eta, lp.rho, lp.phi, lp.h)
    a = lp.phi_h ** np.arange(int(T) + 1)
    bound = a * theta_gap + (1.0 - a) * kappa1 * lambda_bar
    return TrainingTrace(np.array(gaps), bound, theta_gap, lambda_bar, beta_eff, kappa1)
