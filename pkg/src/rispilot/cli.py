"""YAML-driven command line: allocation tables, check reports, sweep CSVs.

Config files are YAML. Every power is a string with an explicit unit
("-13 dBm", "0.2 W", "5 mW") and the path-loss reference is a "dB"
string; bare numbers for those fields are rejected so units can never
be silently wrong. Exit codes: 0 success, 1 validation check failed,
2 config error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
import time
from collections import namedtuple
from datetime import datetime, timezone

import numpy as np
import yaml

from . import __version__
from .allocation import (
    ALLOCATOR_IDS,
    InfeasibleAllocationError,
    NonConvergenceError,
    allocate_average,
    allocate_equal_m,
    allocate_large_m,
    resolve_allocator,
    run_allocator,
)
from .analysis import (
    alignment_mean,
    ergodic_gain_closed_form,
    objective_phi,
    stationarity_residual,
)
from .channel import RngStream, standard_complex_normal, substream, PURPOSE_RIS_USER
from .estimation import PilotAllocation
from .montecarlo import TrialConfig, simulate_metrics, sweep_user, trial_gains
from .scenario import (
    Scenario,
    cascaded_large_scale,
    dbm_to_watts,
    from_large_scale,
    two_ris_layout,
    watts_to_dbm,
)

METRICS_CSV = "metrics.csv"
POWERS_CSV = "powers.csv"
MANIFEST_FILE = "run_manifest.yaml"
REPORT_FILE = "validation_report.yaml"

_PowerRow = namedtuple("_PowerRow", ["d_m", "allocator", "powers_w"])

_VALIDATE_DEFAULT_TRIALS = 100_000
_SWEEP_DEFAULT_TRIALS = 1000


class ConfigError(ValueError):
    """A config field is missing, malformed, or inconsistent."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected a mapping, got {type(value).__name__}")
    return value


def _reject_unknown(mapping: dict, allowed, path: str):
    extra = sorted(set(mapping) - set(allowed))
    if extra:
        raise ConfigError(
            f"{path}.{extra[0]}" if path else str(extra[0]),
            f"unknown field (known fields: {', '.join(sorted(allowed))})",
        )


def _get(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
    return mapping[key]


def _float_value(value, path: str, *, positive=False, nonneg=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    x = float(value)
    if math.isnan(x):
        raise ConfigError(path, "must not be NaN")
    if positive and x <= 0.0:
        raise ConfigError(path, f"must be positive, got {x}")
    if nonneg and x < 0.0:
        raise ConfigError(path, f"must be nonnegative, got {x}")
    return x


def _power_watts(value, path: str, *, nonneg_ok=False) -> float:
    """Parse a power string with a mandatory unit suffix into watts."""
    if isinstance(value, (int, float)):
        raise ConfigError(path, "power needs an explicit unit suffix: 'dBm', 'W', or 'mW'")
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a power string, got {type(value).__name__}")
    text = value.strip()
    for suffix, scale in (("dBm", None), ("mW", 1e-3), ("W", 1.0)):
        if text.endswith(suffix):
            body = text[: -len(suffix)].strip()
            try:
                x = float(body)
            except ValueError:
                raise ConfigError(path, f"cannot parse power value {value!r}") from None
            watts = dbm_to_watts(x) if scale is None else x * scale
            if watts < 0.0 or (watts == 0.0 and not nonneg_ok):
                raise ConfigError(path, f"power must be positive, got {value!r}")
            return watts
    raise ConfigError(path, f"missing unit suffix on {value!r}: use 'dBm', 'W', or 'mW'")


def _db_value(value, path: str) -> float:
    if isinstance(value, (int, float)):
        raise ConfigError(path, "needs an explicit 'dB' suffix")
    if not isinstance(value, str) or not value.strip().endswith("dB") or value.strip().endswith("dBm"):
        raise ConfigError(path, f"expected a 'dB' string, got {value!r}")
    body = value.strip()[:-2].strip()
    try:
        return float(body)
    except ValueError:
        raise ConfigError(path, f"cannot parse dB value {value!r}") from None


def _element_counts(value, path: str) -> list[int]:
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a nonempty list of element counts")
    counts = []
    for i, item in enumerate(value):
        if isinstance(item, bool) or not isinstance(item, int) or item < 1:
            raise ConfigError(f"{path}[{i}]", f"element count must be a positive integer, got {item!r}")
        counts.append(item)
    return counts


@dataclasses.dataclass(frozen=True)
class ScenarioSettings:
    """Resolved scenario description, all powers in watts."""

    element_counts: tuple[int, ...]
    p_avg_w: float
    q_w: float
    sigma_z_sq_w: float
    sigma_n_sq_w: float
    geometry: dict | None = None  # d0, d_v, d_h, d_u, user_y, c0_db, alphas, rician
    beta_sq: tuple[float, ...] | None = None

    @property
    def can_sweep(self) -> bool:
        return self.geometry is not None

    def scenario_at(self, d: float) -> Scenario:
        if self.geometry is None:
            raise ConfigError("scenario.geometry", "user sweeps need a geometric layout")
        g = self.geometry
        base = two_ris_layout(
            g["d0"], d, self.element_counts[0], self.element_counts[1],
            d_v=g["d_v"], d_h=g["d_h"], d_u=g["d_u"],
        )
        return dataclasses.replace(
            base,
            c0_db=g["c0_db"], alpha_br=g["alpha_br"], alpha_ru=g["alpha_ru"],
            rician_k_br=g["k_br"], rician_k_ru=g["k_ru"],
            sigma_z_sq=self.sigma_z_sq_w, sigma_n_sq=self.sigma_n_sq_w,
            q=self.q_w, p_avg=self.p_avg_w,
        )

    def fixed_scenario(self):
        """(scenario, large_scale) at the configured user position."""
        if self.geometry is not None:
            s = self.scenario_at(self.geometry["user_y"])
            return s, cascaded_large_scale(s)
        return from_large_scale(
            list(self.beta_sq), list(self.element_counts),
            sigma_z_sq=self.sigma_z_sq_w, sigma_n_sq=self.sigma_n_sq_w,
            q=self.q_w, p_avg=self.p_avg_w,
        )

    def as_dict(self) -> dict:
        out = {
            "element_counts": list(self.element_counts),
            "p_avg_w": self.p_avg_w,
            "q_w": self.q_w,
            "sigma_z_sq_w": self.sigma_z_sq_w,
            "sigma_n_sq_w": self.sigma_n_sq_w,
        }
        if self.geometry is not None:
            out["geometry"] = dict(self.geometry)
        else:
            out["beta_sq"] = list(self.beta_sq)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioSettings":
        """Rebuild from as_dict output (manifest replay path)."""
        geometry = dict(raw["geometry"]) if "geometry" in raw else None
        beta_sq = tuple(float(b) for b in raw["beta_sq"]) if "beta_sq" in raw else None
        return cls(
            element_counts=tuple(int(m) for m in raw["element_counts"]),
            p_avg_w=float(raw["p_avg_w"]),
            q_w=float(raw["q_w"]),
            sigma_z_sq_w=float(raw["sigma_z_sq_w"]),
            sigma_n_sq_w=float(raw["sigma_n_sq_w"]),
            geometry=geometry,
            beta_sq=beta_sq,
        )


_SCENARIO_KEYS = {"element_counts", "p_avg", "q", "sigma_z", "sigma_n", "geometry", "channel"}
_GEOMETRY_KEYS = {"d0", "d_v", "d_h", "d_u", "user_y", "c0", "alpha_br", "alpha_ru", "k_br", "k_ru"}
_RUN_KEYS = {"seed", "trials", "csi_mode", "estimate_mode", "allocators", "d_range", "workers"}


def _parse_scenario(raw: dict) -> ScenarioSettings:
    block = _require_mapping(_get(raw, "scenario", ""), "scenario")
    _reject_unknown(block, _SCENARIO_KEYS, "scenario")
    counts = _element_counts(_get(block, "element_counts", "scenario"), "scenario.element_counts")
    p_avg = _power_watts(_get(block, "p_avg", "scenario"), "scenario.p_avg")
    q = _power_watts(_get(block, "q", "scenario"), "scenario.q")
    sigma_z = _power_watts(_get(block, "sigma_z", "scenario"), "scenario.sigma_z", nonneg_ok=True)
    sigma_n = _power_watts(_get(block, "sigma_n", "scenario"), "scenario.sigma_n")

    has_geometry = "geometry" in block
    has_channel = "channel" in block
    if has_geometry == has_channel:
        raise ConfigError(
            "scenario", "exactly one of 'geometry' and 'channel' must be present"
        )

    if has_geometry:
        g = _require_mapping(block["geometry"], "scenario.geometry")
        _reject_unknown(g, _GEOMETRY_KEYS, "scenario.geometry")
        if len(counts) != 2:
            raise ConfigError(
                "scenario.element_counts",
                f"the geometric layout places exactly two surfaces, got {len(counts)} counts",
            )
        geometry = {
            "d0": _float_value(_get(g, "d0", "scenario.geometry"), "scenario.geometry.d0", positive=True),
            "d_v": _float_value(g.get("d_v", 10.0), "scenario.geometry.d_v", positive=True),
            "d_h": _float_value(g.get("d_h", 10.0), "scenario.geometry.d_h", positive=True),
            "d_u": _float_value(g.get("d_u", 2.0), "scenario.geometry.d_u", positive=True),
            "user_y": _float_value(g.get("user_y", 0.0), "scenario.geometry.user_y"),
            "c0_db": _db_value(_get(g, "c0", "scenario.geometry"), "scenario.geometry.c0"),
            "alpha_br": _float_value(_get(g, "alpha_br", "scenario.geometry"), "scenario.geometry.alpha_br", positive=True),
            "alpha_ru": _float_value(_get(g, "alpha_ru", "scenario.geometry"), "scenario.geometry.alpha_ru", positive=True),
            "k_br": _float_value(g.get("k_br", math.inf), "scenario.geometry.k_br", nonneg=True),
            "k_ru": _float_value(g.get("k_ru", 0.0), "scenario.geometry.k_ru", nonneg=True),
        }
        return ScenarioSettings(
            element_counts=tuple(counts), p_avg_w=p_avg, q_w=q,
            sigma_z_sq_w=sigma_z, sigma_n_sq_w=sigma_n, geometry=geometry,
        )

    ch = _require_mapping(block["channel"], "scenario.channel")
    _reject_unknown(ch, {"beta_sq"}, "scenario.channel")
    raw_beta = _get(ch, "beta_sq", "scenario.channel")
    if not isinstance(raw_beta, list) or not raw_beta:
        raise ConfigError("scenario.channel.beta_sq", "expected a nonempty list")
    beta_sq = []
    for i, b in enumerate(raw_beta):
        beta_sq.append(
            _float_value(b, f"scenario.channel.beta_sq[{i}]", positive=True)
        )
    if len(beta_sq) != len(counts):
        raise ConfigError(
            "scenario.channel.beta_sq",
            f"{len(beta_sq)} gains for {len(counts)} element counts",
        )
    return ScenarioSettings(
        element_counts=tuple(counts), p_avg_w=p_avg, q_w=q,
        sigma_z_sq_w=sigma_z, sigma_n_sq_w=sigma_n, beta_sq=tuple(beta_sq),
    )


def _parse_run_block(raw: dict) -> dict:
    block = raw.get("run", {})
    if block is None:
        block = {}
    block = _require_mapping(block, "run")
    _reject_unknown(block, _RUN_KEYS, "run")
    out = {}
    if "seed" in block:
        seed = block["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("run.seed", f"seed must be an integer in [0, 2^64), got {seed!r}")
        out["seed"] = seed
    if "trials" in block:
        trials = block["trials"]
        if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
            raise ConfigError("run.trials", f"trials must be a positive integer, got {trials!r}")
        out["trials"] = trials
    if "csi_mode" in block:
        out["csi_mode"] = _mode_value(block["csi_mode"], "run.csi_mode", ("estimated", "perfect", "random-phase"))
    if "estimate_mode" in block:
        out["estimate_mode"] = _mode_value(block["estimate_mode"], "run.estimate_mode", ("shortcut", "protocol"))
    if "allocators" in block:
        names = block["allocators"]
        if isinstance(names, str):
            names = [t for t in names.split(",") if t]
        if not isinstance(names, list) or not names:
            raise ConfigError("run.allocators", "expected a nonempty list of allocator names")
        out["allocators"] = _resolve_allocators(names, "run.allocators")
    if "d_range" in block:
        out["d_range"] = str(block["d_range"])
    if "workers" in block:
        workers = block["workers"]
        if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
            raise ConfigError("run.workers", f"workers must be a positive integer, got {workers!r}")
        out["workers"] = workers
    return out


def _mode_value(value, path: str, choices) -> str:
    if value not in choices:
        raise ConfigError(path, f"expected one of {', '.join(choices)}; got {value!r}")
    return value


def _resolve_allocators(names, path: str) -> list[str]:
    resolved = []
    for i, name in enumerate(names):
        try:
            canonical = resolve_allocator(str(name).strip())
        except ValueError as exc:
            raise ConfigError(f"{path}[{i}]", str(exc)) from None
        if canonical not in resolved:
            resolved.append(canonical)
    return sorted(resolved)


def _parse_d_range(text: str, path: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(path, f"expected 'start:stop:step', got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(path, f"expected 'start:stop:step', got {text!r}") from None
    if step <= 0.0:
        raise ConfigError(path, f"step must be positive, got {step}")
    if stop < start:
        raise ConfigError(path, f"empty range: start {start} exceeds stop {stop}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(n)]


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise ConfigError(path, f"not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(path, "top level of the config must be a mapping")
    _reject_unknown(raw, {"scenario", "run"}, "")
    return raw


# ---------------------------------------------------------------- output


def _fmt(x: float) -> str:
    return "%.17g" % x


def _write_metrics_csv(path: str, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("d_m,allocator,mean_gain,se_gain,mean_rate_bps_hz,se_rate,closed_form_gain\n")
        for r in rows:
            f.write(
                ",".join(
                    (
                        _fmt(r.d_m), r.allocator, _fmt(r.mean_gain), _fmt(r.se_gain),
                        _fmt(r.mean_rate), _fmt(r.se_rate), _fmt(r.closed_form_gain),
                    )
                )
                + "\n"
            )


def _write_powers_csv(path: str, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("d_m,allocator,ris_index,pilot_power_w,pilot_power_dbm\n")
        for r in rows:
            for k, p in enumerate(r.powers_w):
                f.write(
                    ",".join(
                        (_fmt(r.d_m), r.allocator, str(k), _fmt(p), _fmt(watts_to_dbm(p)))
                    )
                    + "\n"
                )


def _write_yaml(path: str, payload: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        yaml.safe_dump(payload, f, sort_keys=True, default_flow_style=False)


def _manifest(command: str, scn: ScenarioSettings, *, seed, trials, estimate_mode,
              csi_mode, workers, allocators=None, d_values=None, duration_s=None) -> dict:
    out = {
        "command": command,
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seed": seed,
        "trials": trials,
        "estimate_mode": estimate_mode,
        "csi_mode": csi_mode,
        "workers": workers,
        "scenario": scn.as_dict(),
    }
    if allocators is not None:
        out["allocators"] = list(allocators)
    if d_values is not None:
        out["d_values"] = [float(d) for d in d_values]
    if duration_s is not None:
        out["duration_s"] = duration_s
    return out


# ---------------------------------------------------------------- commands


def _settings(args, cfg_run: dict, key: str, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    return cfg_run.get(key, default)


def _load_settings_and_run(args) -> tuple[ScenarioSettings, dict]:
    raw = load_config(args.config)
    return _parse_scenario(raw), _parse_run_block(raw)


def _allocators_for(args, cfg_run, scn, default):
    if args.allocators is not None:
        names = _resolve_allocators(
            [t for t in args.allocators.split(",") if t] or [""], "--allocators"
        )
    elif "allocators" in cfg_run:
        names = cfg_run["allocators"]
    else:
        names = _resolve_allocators(default, "run.allocators")
    counts = scn.element_counts
    if "eq29" in names and any(m != counts[0] for m in counts):
        raise ConfigError(
            "run.allocators",
            "'eq29' expects equal element counts on every surface; use 'eq28'",
        )
    return names


def cmd_allocate(args) -> int:
    scn, cfg_run = _load_settings_and_run(args)
    defaults = ["uniform", "eq27", "eq28", "exact"]
    if len(set(scn.element_counts)) == 1:
        defaults.append("eq29")
    names = _allocators_for(args, cfg_run, scn, defaults)
    seed = _settings(args, cfg_run, "seed", 0)
    s, ls = scn.fixed_scenario()
    counts = s.element_counts

    header = f"{'allocator':<10} {'ris':>3} {'power_w':>24} {'power_dbm':>12} {'phi':>14} {'gain':>14}"
    lines = [header]
    rows = []
    for name in names:
        powers = run_allocator(name, s, ls)
        per_element = powers.per_element(counts, s.p_avg)
        phi = objective_phi(ls, counts, per_element, s.sigma_z_sq)
        gain = ergodic_gain_closed_form(ls, counts, per_element, s.sigma_z_sq).total
        rows.append((name, powers, phi, gain))
        for k, p in enumerate(powers.p_k):
            lines.append(
                f"{name:<10} {k:>3} {p:>24.17g} {watts_to_dbm(float(p)):>12.4f} "
                f"{phi:>14.6e} {gain:>14.6e}"
            )
    print("\n".join(lines))

    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        power_rows = [
            _PowerRow(0.0, name, tuple(float(p) for p in powers.p_k))
            for name, powers, _, _ in rows
        ]
        _write_powers_csv(os.path.join(args.out, POWERS_CSV), power_rows)
        manifest = _manifest(
            "allocate", scn, seed=seed, trials=0, estimate_mode="shortcut",
            csi_mode="estimated", workers=1, allocators=names,
        )
        _write_yaml(os.path.join(args.out, MANIFEST_FILE), manifest)
        print(f"wrote {os.path.join(args.out, POWERS_CSV)}")
    return 0


def _check(name, observed, expected, tol, margin, detail="") -> dict:
    if margin > tol:
        status = "inconclusive"
    elif abs(observed - expected) <= tol:
        status = "pass"
    else:
        status = "fail"
    return {
        "name": name, "status": status, "observed": float(observed),
        "expected": float(expected), "tolerance": float(tol),
        "noise_margin": float(margin), "detail": detail,
    }


def _exact_check(name, ok: bool, observed, expected, detail="") -> dict:
    return {
        "name": name, "status": "pass" if ok else "fail", "observed": float(observed),
        "expected": float(expected), "tolerance": 0.0, "noise_margin": 0.0,
        "detail": detail,
    }


def _validation_checks(s, ls, trials: int, seed: int, workers: int) -> list[dict]:
    checks = []
    counts = s.element_counts
    countsf = counts.astype(np.float64)
    uniform = allocate_average(s)

    # per-surface aligned-coefficient mean, against the closed form
    for k in range(s.num_ris):
        b2 = float(ls.beta_sq[k])
        d2 = s.sigma_z_sq / s.p_avg
        gen = substream(RngStream(seed, stream_id=2**63 + k), PURPOSE_RIS_USER, 0)
        h = math.sqrt(b2) * standard_complex_normal(gen, trials)
        est = h + math.sqrt(d2) * standard_complex_normal(gen, trials)
        stat = (h * np.conj(est) / np.abs(est)).real
        expected = alignment_mean(b2, d2)
        se = float(np.std(stat, ddof=1) / math.sqrt(trials))
        checks.append(
            _check(f"alignment-mean[{k}]", float(np.mean(stat)), expected,
                   0.02 * expected, 4.0 * se)
        )

    # closed-form ergodic gain against the simulated pipeline
    cfg = TrialConfig(trials=trials, seed=seed)
    metrics = simulate_metrics(s, uniform, cfg, ls=ls, workers=workers)
    closed = ergodic_gain_closed_form(
        ls, counts, uniform.per_element(counts, s.p_avg), s.sigma_z_sq
    ).total
    checks.append(
        _check("ergodic-gain", metrics.mean_gain, closed, 0.02 * closed,
               4.0 * metrics.se_gain)
    )

    # perfect-estimation limit of the closed form
    if s.sigma_z_sq > 0.0:
        p_big = 1e12 * s.sigma_z_sq / float(np.min(ls.beta_sq))
    else:
        p_big = 1.0
    limit = ergodic_gain_closed_form(
        ls, counts, PilotAllocation.uniform(counts, p_big), s.sigma_z_sq
    ).total
    m_beta = float(np.dot(countsf, ls.beta))
    m_beta_sq = float(np.dot(countsf, ls.beta_sq))
    ideal = m_beta_sq + 0.25 * math.pi * (m_beta**2 - m_beta_sq)
    checks.append(
        _exact_check("perfect-csi-limit", abs(limit - ideal) <= 1e-9 * ideal, limit, ideal)
    )

    # every allocator must spend exactly the budget
    budget = float(int(counts.sum()) * s.p_avg)
    allocator_powers = {}
    for name in ALLOCATOR_IDS:
        if name == "eq29" and len(set(counts.tolist())) != 1:
            continue
        try:
            powers = run_allocator(name, s, ls)
        except NonConvergenceError as exc:
            checks.append(_exact_check(f"budget[{name}]", False, math.nan, budget, str(exc)))
            continue
        allocator_powers[name] = powers
        spent = float(np.dot(countsf, powers.p_k))
        checks.append(
            _exact_check(f"budget[{name}]", abs(spent - budget) <= 1e-9 * budget, spent, budget)
        )

    # the two many-element forms must agree bit for bit on equal counts
    if len(set(counts.tolist())) == 1:
        a = allocate_large_m(ls, counts, s.p_avg).p_k
        b = allocate_equal_m(ls, s.num_ris, s.p_avg).p_k
        checks.append(
            _exact_check("equal-count-identity", bool(np.array_equal(a, b)),
                         float(a[0]), float(b[0]))
        )

    # the numeric solution equalizes the budget multiplier
    if "exact" in allocator_powers and s.sigma_z_sq > 0.0:
        r = stationarity_residual(ls, counts, allocator_powers["exact"].p_k, s.sigma_z_sq)
        scale = float(np.max(np.abs(r)))
        spread = float((r.max() - r.min()) / scale) if scale > 0.0 else 0.0
        checks.append(_exact_check("solver-stationarity", spread < 1e-6, spread, 0.0))

    # more channel knowledge can only help, trial by trial
    n_h = min(trials, 20_000)
    cfg_h = lambda mode: TrialConfig(trials=n_h, seed=seed, csi_mode=mode)
    gains = {
        mode: trial_gains(s, uniform, cfg_h(mode), ls=ls, workers=workers)
        for mode in ("perfect", "estimated", "random-phase")
    }
    for name, top, bottom in (
        ("hierarchy-perfect-vs-estimated", "perfect", "estimated"),
        ("hierarchy-estimated-vs-random", "estimated", "random-phase"),
    ):
        diff = gains[top] - gains[bottom]
        mean = float(np.mean(diff))
        se = float(np.std(diff, ddof=1) / math.sqrt(n_h)) if n_h > 1 else 0.0
        checks.append(
            {
                "name": name, "status": "pass" if mean >= -3.0 * se else "fail",
                "observed": mean, "expected": 0.0, "tolerance": 3.0 * se,
                "noise_margin": 3.0 * se, "detail": "paired mean difference",
            }
        )
    return checks


def cmd_validate(args) -> int:
    scn, cfg_run = _load_settings_and_run(args)
    seed = _settings(args, cfg_run, "seed", 0)
    trials = _settings(args, cfg_run, "trials", _VALIDATE_DEFAULT_TRIALS)
    workers = _settings(args, cfg_run, "workers", 1)
    s, ls = scn.fixed_scenario()

    t0 = time.monotonic()
    checks = _validation_checks(s, ls, trials, seed, workers)
    duration = time.monotonic() - t0

    width = max(len(c["name"]) for c in checks)
    for c in checks:
        print(
            f"{c['status']:<13} {c['name']:<{width}}  observed={c['observed']:.10g}  "
            f"expected={c['expected']:.10g}  tol={c['tolerance']:.3g}  "
            f"noise={c['noise_margin']:.3g}"
        )
    summary = {
        status: sum(1 for c in checks if c["status"] == status)
        for status in ("pass", "fail", "inconclusive")
    }
    print(
        f"{summary['pass']} passed, {summary['fail']} failed, "
        f"{summary['inconclusive']} inconclusive"
    )

    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        report = {
            "command": "validate", "version": __version__, "seed": seed,
            "trials": trials, "checks": checks, "summary": summary,
        }
        _write_yaml(os.path.join(args.out, REPORT_FILE), report)
        manifest = _manifest(
            "validate", scn, seed=seed, trials=trials, estimate_mode="shortcut",
            csi_mode="estimated", workers=workers, duration_s=round(duration, 3),
        )
        _write_yaml(os.path.join(args.out, MANIFEST_FILE), manifest)
        print(f"wrote {os.path.join(args.out, REPORT_FILE)}")
    return 1 if summary["fail"] else 0


def _sweep_from(scn: ScenarioSettings, *, d_values, names, trials, seed, estimate_mode,
                csi_mode, workers, out_dir) -> int:
    if not scn.can_sweep:
        raise ConfigError("scenario.geometry", "user sweeps need a geometric layout")
    cfg = TrialConfig(trials=trials, seed=seed, estimate_mode=estimate_mode, csi_mode=csi_mode)
    t0 = time.monotonic()
    result = sweep_user(scn.scenario_at, d_values, names, cfg, workers=workers)
    duration = time.monotonic() - t0

    os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, METRICS_CSV)
    powers_path = os.path.join(out_dir, POWERS_CSV)
    _write_metrics_csv(metrics_path, result.rows)
    _write_powers_csv(powers_path, result.rows)
    manifest = _manifest(
        "sweep", scn, seed=seed, trials=trials, estimate_mode=estimate_mode,
        csi_mode=csi_mode, workers=workers, allocators=names, d_values=d_values,
        duration_s=round(duration, 3),
    )
    _write_yaml(os.path.join(out_dir, MANIFEST_FILE), manifest)
    print(
        f"wrote {metrics_path} ({len(result.rows)} rows), {powers_path}, "
        f"{os.path.join(out_dir, MANIFEST_FILE)}"
    )
    return 0


def cmd_sweep(args) -> int:
    if args.manifest is not None:
        with open(args.manifest, "r", encoding="utf-8") as f:
            try:
                saved = yaml.safe_load(f)
            except yaml.YAMLError as exc:
                raise ConfigError(args.manifest, f"not valid YAML: {exc}") from None
        if not isinstance(saved, dict) or saved.get("command") != "sweep":
            raise ConfigError(args.manifest, "not a sweep manifest")
        scn = ScenarioSettings.from_dict(saved["scenario"])
        return _sweep_from(
            scn,
            d_values=[float(d) for d in saved["d_values"]],
            names=list(saved["allocators"]),
            trials=int(saved["trials"]),
            seed=int(saved["seed"]),
            estimate_mode=str(saved["estimate_mode"]),
            csi_mode=str(saved["csi_mode"]),
            workers=args.workers if args.workers is not None else int(saved["workers"]),
            out_dir=args.out if args.out is not None else ".",
        )

    scn, cfg_run = _load_settings_and_run(args)
    names = _allocators_for(args, cfg_run, scn, ["uniform", "exact"])
    d_text = args.d_range if args.d_range is not None else cfg_run.get("d_range")
    if d_text is None:
        raise ConfigError("run.d_range", "missing required field (or pass --d-range)")
    d_values = _parse_d_range(d_text, "run.d_range")
    return _sweep_from(
        scn,
        d_values=d_values,
        names=names,
        trials=_settings(args, cfg_run, "trials", _SWEEP_DEFAULT_TRIALS),
        seed=_settings(args, cfg_run, "seed", 0),
        estimate_mode=cfg_run.get("estimate_mode", "shortcut"),
        csi_mode=_settings(args, cfg_run, "csi_mode", "estimated"),
        workers=_settings(args, cfg_run, "workers", 1),
        out_dir=args.out if args.out is not None else ".",
    )


# ---------------------------------------------------------------- entry


def _add_common(p: argparse.ArgumentParser, *, config_required=True):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--seed", type=int, help="base RNG seed (64-bit unsigned)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials")
    p.add_argument("--out", help="output directory")
    p.add_argument(
        "--allocators",
        help=f"comma-separated allocators from: {', '.join(ALLOCATOR_IDS)}",
    )
    p.add_argument(
        "--csi-mode", dest="csi_mode",
        choices=("estimated", "perfect", "random-phase"),
        help="how reflection phases are chosen",
    )
    p.add_argument("--workers", type=int, help="parallel trial workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rispilot",
        description="Pilot power allocation and ergodic gain analysis for "
        "multi-surface reflected links",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_alloc = sub.add_parser("allocate", help="print per-surface pilot powers")
    _add_common(p_alloc)
    p_alloc.set_defaults(func=cmd_allocate)

    p_val = sub.add_parser("validate", help="check closed forms against simulation")
    _add_common(p_val)
    p_val.set_defaults(func=cmd_validate)

    p_sweep = sub.add_parser("sweep", help="sweep the user position, write CSVs")
    _add_common(p_sweep)
    p_sweep.add_argument("--d-range", dest="d_range", help="user offsets as start:stop:step, inclusive")
    p_sweep.add_argument("--manifest", help="replay a saved run manifest")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sweep":
        if args.manifest is not None and args.config is not None:
            print("config error: --manifest and --config are mutually exclusive", file=sys.stderr)
            return 2
        if args.manifest is None and args.config is None:
            print("config error: one of --config or --manifest is required", file=sys.stderr)
            return 2
    elif args.config is None:
        print("config error: --config is required", file=sys.stderr)
        return 2
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("config error: --seed must be in [0, 2^64)", file=sys.stderr)
        return 2
    if args.trials is not None and args.trials < 1:
        print("config error: --trials must be positive", file=sys.stderr)
        return 2
    if args.workers is not None and args.workers < 1:
        print("config error: --workers must be positive", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleAllocationError, NonConvergenceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
