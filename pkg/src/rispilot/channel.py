"""Small-scale fading draws for the cascaded reflect channels.

Randomness is counter-based (Philox). A draw is addressed by
(seed, stream_id, purpose, ris), so any element can be regenerated
independently of execution order. Serial and parallel runs therefore
see bit-identical numbers for the same seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import LargeScale, Scenario, path_loss

__all__ = [
    "RngStream",
    "ChannelRealization",
    "substream",
    "standard_complex_normal",
    "sample_channels",
]

_U64_MAX = 2**64 - 1

# counter-word assignments: one purpose per independent draw family
PURPOSE_RIS_USER = 0
PURPOSE_BS_RIS = 1
PURPOSE_PILOT_NOISE = 2
PURPOSE_PHASE = 3


@dataclass(frozen=True)
class RngStream:
    """Handle for one reproducible stream of draws.

    Identical (seed, stream_id) always reproduces identical draws.
    Monte Carlo code uses stream_id as the trial index.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not (0 <= v <= _U64_MAX):
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        return substream(self, PURPOSE_RIS_USER, 0)


def substream(rng: RngStream, purpose: int, ris: int) -> np.random.Generator:
    """Generator for one (purpose, ris) slot of a stream.

    The slot goes into the upper Philox counter words, so slots never
    overlap as long as a single slot draws fewer than 2^64 blocks.
    """
    key = np.array([rng.seed, rng.stream_id], dtype=np.uint64)
    counter = np.array([0, rng.stream_id, purpose, ris], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def standard_complex_normal(gen: np.random.Generator, n: int) -> np.ndarray:
    """n i.i.d. draws of a circularly symmetric unit-variance complex normal."""
    flat = gen.standard_normal(2 * n)
    return flat.view(np.complex128) * math.sqrt(0.5)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One draw of every cascaded coefficient, grouped per RIS."""

    coefficients: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(self.coefficients))
        for arr in self.coefficients:
            if arr.ndim != 1:
                raise ValueError("each per-RIS coefficient block must be 1-D")

    @property
    def element_counts(self) -> np.ndarray:
        return np.array([c.size for c in self.coefficients], dtype=np.int64)


def _rician_unit(k_factor: float, gen, n: int) -> np.ndarray:
    # unit-mean-power link fading; deterministic part carries zero phase
    if math.isinf(k_factor):
        return np.ones(n, dtype=np.complex128)
    los = math.sqrt(k_factor / (k_factor + 1.0))
    nlos = math.sqrt(1.0 / (k_factor + 1.0))
    return los + nlos * standard_complex_normal(gen, n)


def sample_channels(s: Scenario, ls: LargeScale, rng: RngStream) -> ChannelRealization:
    """Draw every cascaded coefficient for one realization.

    With a deterministic BS-side link the cascade reduces to a zero-mean
    complex Gaussian whose variance is the cascaded gain, so only ls is
    consulted and the scale is taken from it verbatim. With a scattered
    BS-side link the two hop gains matter individually and are rebuilt
    from the geometry.
    """
    if ls.num_ris != s.num_ris:
        raise ValueError(f"ls has {ls.num_ris} entries for {s.num_ris} surfaces")
    blocks = []
    for k, r in enumerate(s.ris_list):
        m = r.element_count
        gen_ru = substream(rng, PURPOSE_RIS_USER, k)
        if math.isinf(s.rician_k_br):
            v = _rician_unit(s.rician_k_ru, gen_ru, m)
            h = ls.beta[k] * np.conj(v)
        else:
            pl_br = path_loss(s.bs_position.distance_to(r.position), s.c0_db, s.alpha_br)
            pl_ru = path_loss(r.position.distance_to(s.user_position), s.c0_db, s.alpha_ru)
            gen_br = substream(rng, PURPOSE_BS_RIS, k)
            u = math.sqrt(pl_br) * _rician_unit(s.rician_k_br, gen_br, m)
            v = math.sqrt(pl_ru) * _rician_unit(s.rician_k_ru, gen_ru, m)
            h = u * np.conj(v)
        blocks.append(h)
    return ChannelRealization(coefficients=tuple(blocks))
