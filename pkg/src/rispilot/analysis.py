"""Closed-form ergodic gain of the aligned composite channel.

With independent zero-mean complex Gaussian cascades and conjugate
alignment against noisy LS estimates, the expected composite power
splits into an incoherent part plus two structured sums: coherent
combining across elements of the same surface, and coherent combining
across surfaces. Both structured sums are damped per element by
1 / sqrt(beta_sq + mse), which is where the pilot powers enter.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .estimation import PilotAllocation
from .scenario import LargeScale, Scenario

__all__ = [
    "GainBreakdown",
    "ModelAssumptionWarning",
    "alignment_mean",
    "ergodic_gain_closed_form",
    "objective_phi",
    "stationarity_residual",
]

_HALF_SQRT_PI = 0.5 * math.sqrt(math.pi)
_QUARTER_PI = 0.25 * math.pi


class ModelAssumptionWarning(UserWarning):
    """The closed form was evaluated outside its channel model."""


def alignment_mean(beta_sq: float, delta_sq: float) -> float:
    """Mean real part of one conjugate-aligned coefficient.

    For h ~ CN(0, beta_sq) aligned against h + eps, eps ~ CN(0, delta_sq):
    sqrt(pi) * beta_sq / (2 * sqrt(beta_sq + delta_sq)). The imaginary
    part has mean zero by circular symmetry.
    """
    if beta_sq <= 0.0:
        raise ValueError(f"beta_sq must be positive, got {beta_sq}")
    if delta_sq < 0.0:
        raise ValueError(f"delta_sq must be nonnegative, got {delta_sq}")
    return _HALF_SQRT_PI * beta_sq / math.sqrt(beta_sq + delta_sq)


@dataclass(frozen=True)
class GainBreakdown:
    """Ergodic composite power, split by combining mechanism."""

    incoherent: float
    intra_ris: float
    inter_ris: float
    total: float
    model_valid: bool = True


def _check_shapes(ls: LargeScale, element_counts, alloc: PilotAllocation) -> np.ndarray:
    counts = np.asarray(element_counts, dtype=np.int64)
    if counts.size != ls.num_ris:
        raise ValueError(f"{counts.size} element counts for {ls.num_ris} surfaces")
    if np.any(counts < 1):
        raise ValueError("element counts must be positive")
    if [b.size for b in alloc.powers] != list(counts):
        raise ValueError("allocation blocks do not match the element counts")
    return counts


def _structured_sums(ls: LargeScale, alloc: PilotAllocation, sigma_z_sq: float):
    """The two coupling sums of the gain formula, without the pi/4 factor."""
    intra = 0.0
    b_terms = np.empty(ls.num_ris)
    for k in range(ls.num_ris):
        damping = 1.0 / np.sqrt(ls.beta_sq[k] + sigma_z_sq / alloc.powers[k])
        s_k = float(np.sum(damping))
        # sum over ordered pairs of distinct elements, factored per element
        intra += ls.beta_sq[k] ** 2 * float(np.dot(damping, s_k - damping))
        b_terms[k] = ls.beta_sq[k] * s_k
    b_total = float(np.sum(b_terms))
    inter = float(np.dot(b_terms, b_total - b_terms))
    return intra, inter


def ergodic_gain_closed_form(
    ls: LargeScale,
    element_counts,
    alloc: PilotAllocation,
    sigma_z_sq: float,
    *,
    scenario: Scenario | None = None,
) -> GainBreakdown:
    """Expected composite power under conjugate alignment to LS estimates.

    Exact for independent CN(0, beta_sq) cascades, which is the
    deterministic-BS-link, fully-scattered-user-link model. Passing the
    scenario lets the function flag configurations outside that model;
    the value is still returned but model_valid is cleared and a
    ModelAssumptionWarning is emitted.
    """
    counts = _check_shapes(ls, element_counts, alloc)
    if sigma_z_sq < 0.0:
        raise ValueError(f"noise power must be nonnegative, got {sigma_z_sq}")
    incoherent = float(np.dot(counts.astype(np.float64), ls.beta_sq))
    intra_raw, inter_raw = _structured_sums(ls, alloc, sigma_z_sq)
    intra = _QUARTER_PI * intra_raw
    inter = _QUARTER_PI * inter_raw
    valid = True
    if scenario is not None:
        valid = math.isinf(scenario.rician_k_br) and scenario.rician_k_ru == 0.0
        if not valid:
            warnings.warn(
                "closed form assumes a deterministic BS link and a fully "
                "scattered user link; this scenario violates that",
                ModelAssumptionWarning,
                stacklevel=2,
            )
    return GainBreakdown(
        incoherent=incoherent,
        intra_ris=intra,
        inter_ris=inter,
        total=incoherent + intra + inter,
        model_valid=valid,
    )


def objective_phi(
    ls: LargeScale,
    element_counts,
    alloc: PilotAllocation,
    sigma_z_sq: float,
) -> float:
    """Allocation-dependent part of the ergodic gain.

    total gain = incoherent + (pi/4) * objective_phi, so maximizing this
    over the pilot powers maximizes the gain.
    """
    _check_shapes(ls, element_counts, alloc)
    if sigma_z_sq < 0.0:
        raise ValueError(f"noise power must be nonnegative, got {sigma_z_sq}")
    intra_raw, inter_raw = _structured_sums(ls, alloc, sigma_z_sq)
    return intra_raw + inter_raw


def stationarity_residual(
    ls: LargeScale,
    element_counts,
    per_ris_powers,
    sigma_z_sq: float,
) -> np.ndarray:
    """Per-surface candidate for the budget multiplier.

    With equal power inside each surface, the optimality condition says
    this quantity is the same for every surface (it equals the budget
    constraint's multiplier). The spread across surfaces therefore
    measures how far an allocation is from stationary.
    """
    counts = np.asarray(element_counts, dtype=np.float64)
    p = np.asarray(per_ris_powers, dtype=np.float64)
    if counts.size != ls.num_ris or p.size != ls.num_ris:
        raise ValueError("element counts and powers must have one entry per surface")
    if np.any(p <= 0.0):
        raise ValueError("per-surface pilot powers must be positive")
    if sigma_z_sq < 0.0:
        raise ValueError(f"noise power must be nonnegative, got {sigma_z_sq}")
    b2 = ls.beta_sq
    c = b2 + sigma_z_sq / p
    coupling = float(np.sum(b2 * counts / np.sqrt(c)))
    lead = b2 * sigma_z_sq / (p**2 * np.sqrt(c**3))
    return lead * coupling - b2**2 * sigma_z_sq / (p**2 * c**2)
