"""Phase configuration from estimates, composite channel, rate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import PURPOSE_PHASE, ChannelRealization, RngStream, substream
from .estimation import ChannelEstimate

__all__ = [
    "PhaseConfig",
    "configure_phases",
    "random_phases",
    "composite_channel",
    "achievable_rate",
    "rate_from_gain",
]


@dataclass(frozen=True, eq=False)
class PhaseConfig:
    """Unit-modulus reflection coefficients, grouped per RIS."""

    coefficients: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(self.coefficients))
        for block in self.coefficients:
            if np.any(np.abs(np.abs(block) - 1.0) > 1e-12):
                raise ValueError("reflection coefficients must be unit modulus")


def configure_phases(est: ChannelEstimate) -> PhaseConfig:
    """Conjugate-align each element to its estimated coefficient.

    A zero estimate carries no phase information; those elements fall
    back to coefficient 1.
    """
    blocks = []
    for e in est.estimates:
        mag = np.abs(e)
        safe = np.where(mag > 0.0, mag, 1.0)
        phi = np.where(mag > 0.0, np.conj(e) / safe, 1.0 + 0.0j)
        blocks.append(phi)
    return PhaseConfig(coefficients=tuple(blocks))


def random_phases(element_counts, rng: RngStream) -> PhaseConfig:
    """Uniform random phases, the no-CSI reference configuration."""
    blocks = []
    for k, m in enumerate(element_counts):
        gen = substream(rng, PURPOSE_PHASE, k)
        theta = gen.uniform(0.0, 2.0 * math.pi, int(m))
        blocks.append(np.exp(1j * theta))
    return PhaseConfig(coefficients=tuple(blocks))


def composite_channel(h: ChannelRealization, phases: PhaseConfig) -> complex:
    """Sum of reflected coefficients under the given configuration."""
    if len(phases.coefficients) != len(h.coefficients):
        raise ValueError("phase blocks do not match channel blocks")
    total = 0.0 + 0.0j
    for hk, pk in zip(h.coefficients, phases.coefficients):
        if hk.size != pk.size:
            raise ValueError("phase blocks do not match channel blocks")
        total += complex(np.sum(pk * hk))
    return total


def rate_from_gain(gain: float, q: float, sigma_n_sq: float) -> float:
    """Spectral efficiency for a given composite power gain."""
    if q <= 0.0 or sigma_n_sq <= 0.0:
        raise ValueError("transmit power and noise power must be positive")
    if gain < 0.0:
        raise ValueError(f"power gain cannot be negative, got {gain}")
    return math.log2(1.0 + q * gain / sigma_n_sq)


def achievable_rate(composite: complex, q: float, sigma_n_sq: float) -> float:
    return rate_from_gain(abs(composite) ** 2, q, sigma_n_sq)
