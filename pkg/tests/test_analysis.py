import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rispilot.analysis import (
    GainBreakdown,
    ModelAssumptionWarning,
    alignment_mean,
    ergodic_gain_closed_form,
    objective_phi,
    stationarity_residual,
)
from rispilot.estimation import PilotAllocation
from rispilot.scenario import LargeScale, from_large_scale


def _ls(*beta_sq):
    return LargeScale(beta_sq=np.array(beta_sq, dtype=np.float64))


def _alloc(per_ris_powers, counts):
    blocks = tuple(np.full(int(m), float(p)) for p, m in zip(per_ris_powers, counts))
    budget = float(sum(float(p) * int(m) for p, m in zip(per_ris_powers, counts)))
    return PilotAllocation(powers=blocks, budget=budget)


def test_alignment_mean_reference_values():
    assert alignment_mean(1.0, 0.0) == pytest.approx(0.886226925452758, rel=1e-12)
    assert alignment_mean(1.0, 1.0) == pytest.approx(0.6266570686577501, rel=1e-12)
    assert alignment_mean(4.0, 0.0) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    with pytest.raises(ValueError):
        alignment_mean(0.0, 1.0)
    with pytest.raises(ValueError):
        alignment_mean(1.0, -0.5)


def test_alignment_mean_monte_carlo_oracle():
    rng = np.random.default_rng(2024)
    n = 200_000
    h = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(0.5)
    eps = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(0.5)
    est = h + eps
    stat = h * np.conj(est) / np.abs(est)
    se = np.std(stat.real, ddof=1) / math.sqrt(n)
    assert abs(np.mean(stat.real) - alignment_mean(1.0, 1.0)) < 4.0 * se
    se_im = np.std(stat.imag, ddof=1) / math.sqrt(n)
    assert abs(np.mean(stat.imag)) < 4.0 * se_im


def test_gain_single_element_is_pure_incoherent():
    g = ergodic_gain_closed_form(_ls(1.0), [1], PilotAllocation.uniform([1], 5.0), 1.0)
    assert g.intra_ris == 0.0 and g.inter_ris == 0.0
    assert g.total == pytest.approx(1.0, rel=1e-12)
    assert g.model_valid is True


def test_gain_two_elements_perfect_estimates():
    g = ergodic_gain_closed_form(_ls(1.0), [2], PilotAllocation.uniform([2], 1.0), 0.0)
    assert g.total == pytest.approx(2.0 + math.pi / 2.0, rel=1e-12)
    assert g.incoherent == pytest.approx(2.0, rel=1e-12)
    assert g.inter_ris == 0.0


def test_gain_two_elements_unit_noise():
    g = ergodic_gain_closed_form(_ls(1.0), [2], PilotAllocation.uniform([2], 1.0), 1.0)
    assert g.total == pytest.approx(2.0 + math.pi / 4.0, rel=1e-12)


def test_surface_split_does_not_change_the_gain():
    # two single-element surfaces with equal strength behave like one
    # two-element surface: the pairwise coupling is the same either way
    merged = ergodic_gain_closed_form(_ls(1.0), [2], PilotAllocation.uniform([2], 1.3), 0.7)
    split = ergodic_gain_closed_form(
        _ls(1.0, 1.0), [1, 1], PilotAllocation.uniform([1, 1], 1.3), 0.7
    )
    assert split.total == pytest.approx(merged.total, rel=1e-12)


def test_gain_monte_carlo_oracle_mixed_surfaces():
    beta_sq = np.array([1.0, 0.25])
    counts = [8, 4]
    powers = [2.0, 0.5]
    sigma_z_sq = 1.0
    rng = np.random.default_rng(99)
    n = 40_000
    total = np.zeros(n, dtype=np.complex128)
    for b2, m, p in zip(beta_sq, counts, powers):
        h = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) * math.sqrt(b2 / 2.0)
        d2 = sigma_z_sq / p
        eps = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) * math.sqrt(d2 / 2.0)
        est = h + eps
        total += np.sum(h * np.conj(est) / np.abs(est), axis=1)
    gains = np.abs(total) ** 2
    se = np.std(gains, ddof=1) / math.sqrt(n)
    closed = ergodic_gain_closed_form(
        _ls(*beta_sq), counts, _alloc(powers, counts), sigma_z_sq
    )
    assert abs(np.mean(gains) - closed.total) < 4.0 * se


@given(
    st.lists(st.floats(min_value=0.01, max_value=10.0), min_size=1, max_size=4),
    st.data(),
)
@settings(max_examples=40, deadline=None)
def test_total_decomposes_through_objective(beta_sq, data):
    k = len(beta_sq)
    counts = data.draw(st.lists(st.integers(min_value=1, max_value=6), min_size=k, max_size=k))
    powers = data.draw(
        st.lists(st.floats(min_value=0.05, max_value=20.0), min_size=k, max_size=k)
    )
    ls = _ls(*beta_sq)
    alloc = _alloc(powers, counts)
    g = ergodic_gain_closed_form(ls, counts, alloc, 0.8)
    phi = objective_phi(ls, counts, alloc, 0.8)
    assert g.total == pytest.approx(g.incoherent + 0.25 * math.pi * phi, rel=1e-12)


def test_gain_strictly_increases_with_pilot_power():
    ls = _ls(1.0, 0.25)
    counts = [8, 8]
    totals = [
        ergodic_gain_closed_form(
            ls, counts, PilotAllocation.uniform(counts, p), 1.0
        ).total
        for p in (0.01, 0.1, 1.0, 10.0, 100.0)
    ]
    assert totals == sorted(totals) and len(set(totals)) == len(totals)


def test_gain_approaches_perfect_csi_limit():
    ls = _ls(2.0, 0.5)
    counts = [4, 6]
    noisy = ergodic_gain_closed_form(
        ls, counts, PilotAllocation.uniform(counts, 1e12), 1.0
    ).total
    ideal = ergodic_gain_closed_form(
        ls, counts, PilotAllocation.uniform(counts, 1.0), 0.0
    ).total
    assert noisy == pytest.approx(ideal, rel=1e-9)
    assert noisy <= ideal


def test_model_validity_flag_and_warning():
    s, ls = from_large_scale([1.0], [2], sigma_z_sq=1.0, sigma_n_sq=1.0, q=1.0, p_avg=1.0)
    alloc = PilotAllocation.uniform([2], 1.0)
    g = ergodic_gain_closed_form(ls, [2], alloc, 1.0, scenario=s)
    assert g.model_valid is True
    bad = dataclasses.replace(s, rician_k_br=5.0)
    with pytest.warns(ModelAssumptionWarning):
        g_bad = ergodic_gain_closed_form(ls, [2], alloc, 1.0, scenario=bad)
    assert g_bad.model_valid is False
    assert g_bad.total == pytest.approx(g.total, rel=1e-15)


def test_shape_mismatches_rejected():
    alloc = PilotAllocation.uniform([2, 2], 1.0)
    with pytest.raises(ValueError):
        ergodic_gain_closed_form(_ls(1.0), [2, 2], alloc, 1.0)
    with pytest.raises(ValueError):
        ergodic_gain_closed_form(_ls(1.0, 1.0), [2, 3], alloc, 1.0)


def test_residual_equal_under_symmetry():
    r = stationarity_residual(_ls(1.0, 1.0, 1.0), [8, 8, 8], [2.0, 2.0, 2.0], 1.0)
    assert r[0] == r[1] == r[2]


def test_residual_matches_objective_derivative():
    ls = _ls(1.0, 0.25)
    counts = [8, 16]
    p = np.array([3.0, 2.0])
    sigma_z_sq = 1.0
    r = stationarity_residual(ls, counts, p, sigma_z_sq)

    def phi_at(powers):
        alloc = _alloc(powers, counts)
        return objective_phi(ls, counts, alloc, sigma_z_sq)

    for k in range(2):
        h = 1e-5 * p[k]
        up, dn = p.copy(), p.copy()
        up[k] += h
        dn[k] -= h
        fd = (phi_at(up) - phi_at(dn)) / (2.0 * h)
        assert fd == pytest.approx(counts[k] * r[k], rel=1e-5)


def test_residual_vanishes_with_perfect_estimates():
    r = stationarity_residual(_ls(1.0, 0.25), [8, 16], [1e12, 1e12], 1.0)
    assert np.max(np.abs(r)) < 1e-12
    r0 = stationarity_residual(_ls(1.0, 0.25), [8, 16], [1.0, 1.0], 0.0)
    assert np.all(r0 == 0.0)


def test_residual_input_validation():
    with pytest.raises(ValueError):
        stationarity_residual(_ls(1.0), [1, 2], [1.0], 1.0)
    with pytest.raises(ValueError):
        stationarity_residual(_ls(1.0), [1], [0.0], 1.0)


def test_breakdown_is_frozen():
    g = GainBreakdown(incoherent=1.0, intra_ris=0.0, inter_ris=0.0, total=1.0)
    with pytest.raises(dataclasses.FrozenInstanceError):
        g.total = 2.0
