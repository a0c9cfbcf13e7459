"""Pilot power allocators, one power per surface.

All allocators spread a fixed total training energy: with counts M_k
and average power p_avg, the per-surface powers satisfy
sum_k M_k p_k = (sum_k M_k) * p_avg. Inside a surface every element
trains at its surface's power, which is optimal by symmetry of the
gain formula. Three closed forms cover the moderate-SNR, many-element
and equal-count regimes; the numeric solver maximizes the exact
objective by projected gradient ascent on the budget hyperplane.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .analysis import objective_phi, stationarity_residual
from .estimation import PilotAllocation
from .scenario import LargeScale, Scenario

__all__ = [
    "PerRisPowers",
    "InfeasibleAllocationError",
    "UniformFallbackWarning",
    "NonConvergenceError",
    "SolverDiagnostics",
    "allocate_average",
    "allocate_moderate_snr",
    "allocate_large_m",
    "allocate_equal_m",
    "allocate_exact_numeric",
    "exact_solver_diagnostics",
    "ALLOCATOR_IDS",
    "resolve_allocator",
    "run_allocator",
]


class InfeasibleAllocationError(ValueError):
    """Closed-form weights are undefined for the given inputs."""

    def __init__(self, message: str, ris_indices=()):
        super().__init__(message)
        self.ris_indices = tuple(ris_indices)


class UniformFallbackWarning(UserWarning):
    """Some surfaces got uniform power because their weight degenerated."""


class NonConvergenceError(RuntimeError):
    """The numeric solver hit its iteration cap before the tolerance."""

    def __init__(self, message: str, best_powers: np.ndarray, residuals: np.ndarray):
        super().__init__(message)
        self.best_powers = best_powers
        self.residuals = residuals


@dataclass(frozen=True, eq=False)
class PerRisPowers:
    """One pilot power per surface, in watts."""

    p_k: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.p_k, dtype=np.float64).copy()
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("p_k must be a nonempty 1-D array")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
            raise ValueError("every per-surface power must be finite and positive")
        arr.setflags(write=False)
        object.__setattr__(self, "p_k", arr)

    @property
    def num_ris(self) -> int:
        return self.p_k.size

    def per_element(self, element_counts, p_avg: float) -> PilotAllocation:
        return PilotAllocation.from_per_ris(self.p_k, element_counts, p_avg)


def _counts(element_counts) -> np.ndarray:
    counts = np.asarray(element_counts, dtype=np.int64)
    if counts.ndim != 1 or counts.size < 1 or np.any(counts < 1):
        raise ValueError("element counts must be a nonempty 1-D array of positive integers")
    return counts


def _check_inputs(ls: LargeScale, counts: np.ndarray, p_avg: float):
    if counts.size != ls.num_ris:
        raise ValueError(f"{counts.size} element counts for {ls.num_ris} surfaces")
    if p_avg <= 0.0:
        raise ValueError(f"average pilot power must be positive, got {p_avg}")


def allocate_average(s: Scenario) -> PerRisPowers:
    """Every surface trains at the average power."""
    return PerRisPowers(p_k=np.full(s.num_ris, s.p_avg))


def allocate_moderate_snr(ls: LargeScale, element_counts, p_avg: float) -> PerRisPowers:
    """Closed form for the regime where estimation noise is a perturbation.

    Weights are sqrt(S / beta_k - 1) with S the count-weighted sum of
    the cascade amplitudes, normalized to the budget. The radicand is
    nonnegative whenever the inputs are mutually consistent; an exactly
    zero radicand (single surface with a single element) degenerates to
    uniform power for the affected surfaces, with a warning.
    """
    counts = _counts(element_counts)
    _check_inputs(ls, counts, p_avg)
    s_amp = float(np.dot(counts.astype(np.float64), ls.beta))
    ratio = s_amp / ls.beta
    radicand = ratio - 1.0
    bad = radicand < -1e-12 * ratio
    if np.any(bad):
        idx = np.flatnonzero(bad)
        raise InfeasibleAllocationError(
            f"negative weight radicand for surface index {idx.tolist()}, inputs are inconsistent",
            ris_indices=idx,
        )
    degenerate = radicand <= 1e-12 * ratio
    w = np.sqrt(np.where(degenerate, 0.0, radicand))
    total = int(counts.sum())
    p = np.empty(ls.num_ris)
    if np.any(degenerate):
        warnings.warn(
            f"uniform fallback for surface index {np.flatnonzero(degenerate).tolist()}: "
            "degenerate moderate-SNR weight",
            UniformFallbackWarning,
            stacklevel=2,
        )
        p[degenerate] = p_avg
        live = ~degenerate
        if np.any(live):
            budget_live = float((total - int(counts[degenerate].sum())) * p_avg)
            p[live] = w[live] * budget_live / float(np.dot(counts[live], w[live]))
    else:
        p = w * (total * p_avg) / float(np.dot(counts.astype(np.float64), w))
    return PerRisPowers(p_k=p)


def allocate_equal_m(ls: LargeScale, num_ris: int, p_avg: float) -> PerRisPowers:
    """Closed form when every surface has the same element count.

    Power goes with the inverse square root of the cascade amplitude,
    so p_k * sqrt(beta_k) is the same for every surface.
    """
    if num_ris != ls.num_ris:
        raise ValueError(f"num_ris {num_ris} does not match the {ls.num_ris} cascaded gains")
    if p_avg <= 0.0:
        raise ValueError(f"average pilot power must be positive, got {p_avg}")
    root_beta = np.sqrt(ls.beta)
    denom = root_beta * float(np.sum(1.0 / root_beta))
    return PerRisPowers(p_k=num_ris * p_avg / denom)


def allocate_large_m(ls: LargeScale, element_counts, p_avg: float) -> PerRisPowers:
    """Closed form for many elements per surface.

    Reduces exactly to the equal-count form when all counts agree, and
    that case is routed through it so the two agree bit for bit.
    """
    counts = _counts(element_counts)
    _check_inputs(ls, counts, p_avg)
    if np.all(counts == counts[0]):
        return allocate_equal_m(ls, ls.num_ris, p_avg)
    root_beta = np.sqrt(ls.beta)
    denom = root_beta * float(np.sum(counts / root_beta))
    return PerRisPowers(p_k=int(counts.sum()) * p_avg / denom)


def _phi_reduced(b2: np.ndarray, counts: np.ndarray, p: np.ndarray, sigma_z_sq: float) -> float:
    c = b2 + sigma_z_sq / p
    intra = float(np.sum(b2**2 * counts * (counts - 1.0) / c))
    g = counts * b2 / np.sqrt(c)
    total = float(np.sum(g))
    return intra + float(np.dot(g, total - g))


def allocate_exact_numeric(
    ls: LargeScale,
    element_counts,
    p_avg: float,
    sigma_z_sq: float,
    tol: float = 1e-10,
    *,
    max_iter: int = 100_000,
    start: np.ndarray | None = None,
) -> PerRisPowers:
    """Maximize the exact gain objective over the budget hyperplane.

    Projected gradient ascent from the uniform point (or a caller
    supplied start), with a backtracking step. Convergence is declared
    when the in-plane gradient norm falls below tol times the raw
    gradient norm at the uniform point. Iterates are floored at
    1e-6 * p_avg and rescaled back onto the budget, which keeps them
    strictly feasible. Non-convergence raises, carrying the best
    iterate and its stationarity residuals.
    """
    counts = _counts(element_counts)
    _check_inputs(ls, counts, p_avg)
    if sigma_z_sq < 0.0:
        raise ValueError(f"noise power must be nonnegative, got {sigma_z_sq}")
    m = counts.astype(np.float64)
    b2 = ls.beta_sq
    budget = float(counts.sum() * p_avg)
    floor = 1e-6 * p_avg
    m_dot_m = float(np.dot(m, m))

    def grad(p):
        return m * stationarity_residual(ls, counts, p, sigma_z_sq)

    def project(g):
        return g - (float(np.dot(m, g)) / m_dot_m) * m

    uniform = np.full(ls.num_ris, p_avg)
    ref = float(np.linalg.norm(grad(uniform)))
    if ref == 0.0:
        # flat objective (noiseless training): every allocation is optimal
        return PerRisPowers(p_k=uniform)

    p = uniform.copy() if start is None else np.asarray(start, dtype=np.float64).copy()
    if p.size != ls.num_ris or np.any(p <= 0.0):
        raise ValueError("start must be a positive vector with one entry per surface")
    p = np.maximum(p, floor)
    p *= budget / float(np.dot(m, p))

    phi = _phi_reduced(b2, m, p, sigma_z_sq)
    gp = project(grad(p))
    gp_norm = float(np.linalg.norm(gp))
    best_p, best_phi = p.copy(), phi
    eta = 0.1 * p_avg / gp_norm if gp_norm > 0.0 else 0.0

    for _ in range(max_iter):
        if gp_norm < tol * ref:
            return PerRisPowers(p_k=p)
        cand = np.maximum(p + eta * gp, floor)
        cand *= budget / float(np.dot(m, cand))
        phi_c = _phi_reduced(b2, m, cand, sigma_z_sq)
        if phi_c > phi:
            p, phi = cand, phi_c
            eta *= 1.25
        elif phi_c >= phi - 1e-13 * abs(phi):
            # float plateau near the optimum: keep sliding, damp the step
            p, phi = cand, phi_c
            eta *= 0.7
        else:
            eta *= 0.5
        if phi > best_phi:
            best_p, best_phi = p.copy(), phi
        gp = project(grad(p))
        gp_norm = float(np.linalg.norm(gp))
        if eta * gp_norm < 1e-18 * p_avg:
            break

    if gp_norm < tol * ref:
        return PerRisPowers(p_k=p)
    raise NonConvergenceError(
        f"no convergence within {max_iter} iterations: "
        f"gradient ratio {gp_norm / ref:.3e} vs tol {tol:.1e}",
        best_powers=best_p,
        residuals=stationarity_residual(ls, counts, best_p, sigma_z_sq),
    )


@dataclass(frozen=True, eq=False)
class SolverDiagnostics:
    """What the numeric solver can certify about its answer.

    The solver only finds a stationary point. multistart_max_rel_dev
    reports how far solutions from random feasible starts deviate from
    the uniform-start solution, relative to p_avg; small values support
    (but do not prove) that the point is the global maximum.
    """

    powers: np.ndarray
    residuals: np.ndarray
    multiplier_spread: float
    phi: float
    multistart_max_rel_dev: float


def exact_solver_diagnostics(
    ls: LargeScale,
    element_counts,
    p_avg: float,
    sigma_z_sq: float,
    tol: float = 1e-10,
    *,
    random_starts: int = 4,
    seed: int = 0,
) -> SolverDiagnostics:
    counts = _counts(element_counts)
    sol = allocate_exact_numeric(ls, counts, p_avg, sigma_z_sq, tol)
    res = stationarity_residual(ls, counts, sol.p_k, sigma_z_sq)
    scale = float(np.max(np.abs(res)))
    spread = float((res.max() - res.min()) / scale) if scale > 0.0 else 0.0
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    max_dev = 0.0
    for _ in range(random_starts):
        start = gen.uniform(0.1, 1.0, counts.size) * p_avg
        other = allocate_exact_numeric(ls, counts, p_avg, sigma_z_sq, tol, start=start)
        max_dev = max(max_dev, float(np.max(np.abs(other.p_k - sol.p_k))) / p_avg)
    phi = _phi_reduced(ls.beta_sq, counts.astype(np.float64), sol.p_k, sigma_z_sq)
    return SolverDiagnostics(
        powers=sol.p_k,
        residuals=res,
        multiplier_spread=spread,
        phi=phi,
        multistart_max_rel_dev=max_dev,
    )


# CLI vocabulary for the allocators, with spelled-out aliases
ALLOCATOR_IDS = ("uniform", "eq27", "eq28", "eq29", "exact")
_ALIASES = {
    "average": "uniform",
    "moderate-snr": "eq27",
    "large-m": "eq28",
    "equal-m": "eq29",
    "numeric": "exact",
}


def resolve_allocator(name: str) -> str:
    canonical = _ALIASES.get(name, name)
    if canonical not in ALLOCATOR_IDS:
        raise ValueError(
            f"unknown allocator {name!r}, expected one of {', '.join(ALLOCATOR_IDS)}"
        )
    return canonical


def run_allocator(name: str, s: Scenario, ls: LargeScale) -> PerRisPowers:
    canonical = resolve_allocator(name)
    counts = s.element_counts
    if canonical == "uniform":
        return allocate_average(s)
    if canonical == "eq27":
        return allocate_moderate_snr(ls, counts, s.p_avg)
    if canonical == "eq28":
        return allocate_large_m(ls, counts, s.p_avg)
    if canonical == "eq29":
        if not np.all(counts == counts[0]):
            raise ValueError("allocator 'eq29' needs equal element counts on every surface")
        return allocate_equal_m(ls, s.num_ris, s.p_avg)
    return allocate_exact_numeric(ls, counts, s.p_avg, s.sigma_z_sq)
