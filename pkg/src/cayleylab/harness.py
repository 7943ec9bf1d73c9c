"""Experiment orchestration: configs, seed streams, worker pool, fits.

Reproducibility contract: every trial owns the PCG64 stream seeded by
``SeedSequence(master_seed, spawn_key=(observable id, radius, trial))``,
and aggregation sorts by trial index before any floating-point reduction.
Results are therefore bit-identical regardless of worker count or
scheduling, and the trials at one radius never perturb another radius.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from multiprocessing import get_context
from typing import Optional, Sequence

import numpy as np

from .errors import ExperimentError, FitError, InputError, SamplingError
from .groups import parse_group
from .metric import DEFAULT_MAX_ELEMENTS, build_ball
from .stats import EstimateRecord, summarize
from .walk import (DEFAULT_HORIZON, make_step_distribution,
                   estimate_return_probability, sample_exit_time,
                   sample_hits_target, sample_occupation_time)
from .wsf import (build_wired_ball, ray_decomposition_trace, wilson_wired,
                  wilson_rooted_at_infinity_truncated)

#: Observable identifiers; part of the seed derivation, do not renumber.
OBS_IDS = {
    "occupation": 1,
    "exit": 2,
    "wsf_volume": 3,
    "wsf_component": 4,
    "ray": 5,
    "return_prob": 6,
    "hitting": 7,
}

#: Per-trial value labels, in output order.
OBS_LABELS = {
    "occupation": ("L",),
    "exit": ("tau",),
    "wsf_volume": ("T", "C", "N"),
    "wsf_component": ("T", "C", "N"),
    "ray": ("xi", "cover"),
    "return_prob": ("p",),
    "hitting": ("hit",),
}

#: Experiments abort if more than this fraction of trials raise sampling errors.
FAILURE_TOLERANCE = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a group, an observable, radii, and trial counts.

    For ``return_prob`` the "radii" are step counts m; for ``hitting`` they
    are target distances.
    """

    group: str
    observable: str
    radii: tuple[int, ...]
    trials: int
    seed: int = 0
    lazy: bool = True
    escape_factor: float = 8.0
    horizon: int = DEFAULT_HORIZON
    wired_factor: int = 2
    workers: int = 1
    max_elements: int = DEFAULT_MAX_ELEMENTS

    def validate(self) -> None:
        if self.observable not in OBS_IDS:
            raise InputError(f"unknown observable {self.observable!r}")
        if not self.radii:
            raise InputError("need at least one radius")
        if any(r < 0 for r in self.radii):
            raise InputError("radii must be nonnegative")
        if list(self.radii) != sorted(set(self.radii)):
            raise InputError("radii must be strictly increasing")
        if self.trials < 30:
            raise InputError("need >= 30 trials per radius for CI validity")
        if self.workers < 1 or self.wired_factor < 1:
            raise InputError("workers and wired_factor must be >= 1")
        parse_group(self.group)


def trial_rng(seed: int, observable: str, radius: int, trial: int) -> np.random.Generator:
    """The PCG64 stream owned by one (observable, radius, trial) task."""
    key = np.random.SeedSequence(entropy=seed,
                                 spawn_key=(OBS_IDS[observable], radius, trial))
    return np.random.default_rng(key)


# ---------------------------------------------------------------------------
# per-radius state and single trials


def _build_state(config: ExperimentConfig, radius: int) -> dict:
    model = parse_group(config.group)
    dist = make_step_distribution(model, config.lazy)
    state = {"model": model, "dist": dist}
    obs = config.observable
    if obs in ("occupation", "exit"):
        if not model.lower_bound_is_exact:
            state["oracle"] = build_ball(model, radius, config.max_elements)
        else:
            state["oracle"] = None
    elif obs == "wsf_volume":
        big_r = config.wired_factor * radius
        oracle = build_ball(model, big_r, config.max_elements)
        state["oracle"] = oracle
        state["graph"] = build_wired_ball(dist, oracle, big_r)
    elif obs == "wsf_component":
        state["oracle"] = build_ball(model, radius, config.max_elements)
        state["escape_radius"] = max(
            4 * radius, int(math.ceil(config.escape_factor * max(radius, 1))))
    elif obs == "ray":
        if not model.lower_bound_is_exact:
            state["oracle"] = build_ball(model, 2 * radius, config.max_elements)
        else:
            state["oracle"] = None
    elif obs == "hitting":
        oracle = build_ball(model, radius, config.max_elements)
        state["target"] = oracle.first_at_distance(radius)
        state["escape_radius"] = int(math.ceil(config.escape_factor * max(radius, 1)))
    return state


def _run_trial(config: ExperimentConfig, state: dict, radius: int,
               trial: int) -> tuple[tuple[float, ...], bool]:
    rng = trial_rng(config.seed, config.observable, radius, trial)
    obs = config.observable
    dist = state["dist"]
    if obs == "occupation":
        res = sample_occupation_time(dist, state["oracle"], radius, rng,
                                     escape_factor=config.escape_factor,
                                     horizon=config.horizon)
        return (float(res.count),), res.truncated
    if obs == "exit":
        tau = sample_exit_time(dist, state["oracle"], radius, rng,
                               horizon=config.horizon)
        return (float(tau),), False
    if obs == "wsf_volume":
        forest = wilson_wired(state["graph"], rng)
        stats = forest.component_stats(radius)
        return (float(stats.size_t_ball), float(stats.size_c), float(stats.n_r)), False
    if obs == "wsf_component":
        forest = wilson_rooted_at_infinity_truncated(
            dist, state["oracle"], radius, state["escape_radius"], rng,
            horizon=config.horizon)
        stats = forest.component_stats(radius)
        return (float(stats.size_t_ball), float(stats.size_c), float(stats.n_r)), False
    if obs == "ray":
        trace = ray_decomposition_trace(dist, state["oracle"], radius, rng,
                                        escape_factor=max(4.0, config.escape_factor),
                                        horizon=config.horizon)
        return (float(trace.xi), float(trace.cover_bound)), False
    if obs == "return_prob":
        rec = estimate_return_probability(dist, radius, 1, rng)
        return (rec.mean,), False
    if obs == "hitting":
        hit = sample_hits_target(dist, state["target"], state["escape_radius"],
                                 rng, horizon=config.horizon)
        return (1.0 if hit else 0.0,), False
    raise InputError(f"unknown observable {obs!r}")


# ---------------------------------------------------------------------------
# worker pool plumbing

_WORKER_STATE: dict = {}


def _config_key(config: ExperimentConfig) -> tuple:
    return tuple(sorted(dataclasses.asdict(config).items()))


def _run_chunk(args):
    config_dict, radius, lo, hi = args
    config = ExperimentConfig(**config_dict)
    key = (_config_key(config), radius)
    state = _WORKER_STATE.get(key)
    if state is None:
        state = _build_state(config, radius)
        _WORKER_STATE[key] = state
    out = []
    for trial in range(lo, hi):
        try:
            values, truncated = _run_trial(config, state, radius, trial)
            out.append((trial, values, truncated, None))
        except SamplingError as exc:
            out.append((trial, None, False, str(exc)))
    return radius, out


def run_trials_raw(config: ExperimentConfig) -> dict[int, list]:
    """All per-trial outcomes, sorted by trial index within each radius.

    Each entry is (trial, values tuple or None, truncated, error or None).
    Deterministic given the master seed, independent of worker count.
    """
    config.validate()
    config_dict = dataclasses.asdict(config)
    per_radius: dict[int, list] = {r: [] for r in config.radii}
    if config.workers == 1:
        for radius in config.radii:
            _, entries = _run_chunk((config_dict, radius, 0, config.trials))
            per_radius[radius] = entries
    else:
        chunk = max(1, math.ceil(config.trials / (config.workers * 4)))
        tasks = []
        for radius in config.radii:
            for lo in range(0, config.trials, chunk):
                tasks.append((config_dict, radius, lo,
                              min(lo + chunk, config.trials)))
        ctx = get_context("fork")
        with ProcessPoolExecutor(max_workers=config.workers,
                                 mp_context=ctx) as pool:
            for radius, entries in pool.map(_run_chunk, tasks):
                per_radius[radius].extend(entries)
    return {r: sorted(entries) for r, entries in per_radius.items()}


def run_experiment(config: ExperimentConfig) -> list[EstimateRecord]:
    """Run all (radius, trial) tasks and summarize one record per label.

    A radius whose sampling errors exceed 1% of trials fails the experiment.
    """
    started = time.perf_counter()
    per_radius = run_trials_raw(config)
    records = []
    labels = OBS_LABELS[config.observable]
    for radius in config.radii:
        entries = per_radius[radius]
        failures = [err for _, _, _, err in entries if err is not None]
        if len(failures) > FAILURE_TOLERANCE * config.trials:
            raise ExperimentError(
                f"radius {radius}: {len(failures)}/{config.trials} trials "
                f"failed sampling (first: {failures[0]})")
        good = [(t, v, tr) for t, v, tr, err in entries if err is None]
        truncated_fraction = (sum(1 for _, _, tr in good if tr) / len(good)
                              if good else 0.0)
        provenance = f"seed={config.seed}/{config.observable}/r={radius}"
        wall = time.perf_counter() - started
        for i, label in enumerate(labels):
            rec = summarize([v[i] for _, v, _ in good], label=label, r=radius,
                            truncated_fraction=truncated_fraction,
                            seed_provenance=provenance)
            rec.wall_time = wall
            records.append(rec)
    return records


# ---------------------------------------------------------------------------
# exponent fitting


@dataclass
class ExponentFit:
    """OLS fit of log mean against log r (r >= 2 only)."""

    slope: float
    intercept: float
    slope_se: float
    r_squared: float
    n_points: int


def fit_exponent(records: Sequence[EstimateRecord], *, min_r: int = 2,
                 weighted: bool = False) -> ExponentFit:
    """Least-squares exponent of mean ~ r^slope on log-log axes.

    The slope standard error propagates the per-point sems by the delta
    method var(log mean) ~ (sem/mean)^2. ``weighted=True`` uses inverse
    variances as weights (falls back to OLS if any variance is zero).
    """
    pts = [(rec.r, rec.mean, rec.sem) for rec in records if rec.r >= min_r]
    if len(pts) < 3:
        raise FitError(f"need >= 3 records with r >= {min_r}, got {len(pts)}")
    if any(mean <= 0 for _, mean, _ in pts):
        raise FitError("exponent fit needs positive means")
    xs = np.array([math.log(r) for r, _, _ in pts])
    ys = np.array([math.log(mean) for _, mean, _ in pts])
    var = np.array([(sem / mean) ** 2 for _, mean, sem in pts])
    if weighted and (var > 0).all():
        w = 1.0 / var
    else:
        w = np.ones_like(xs)
    wsum = w.sum()
    xbar = float((w * xs).sum() / wsum)
    ybar = float((w * ys).sum() / wsum)
    sxx = float((w * (xs - xbar) ** 2).sum())
    if sxx == 0:
        raise FitError("all radii identical after filtering")
    slope = float((w * (xs - xbar) * (ys - ybar)).sum() / sxx)
    intercept = ybar - slope * xbar
    fitted = intercept + slope * xs
    ss_res = float(((ys - fitted) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    coeffs = w * (xs - xbar) / sxx
    slope_se = float(np.sqrt((coeffs ** 2 * var).sum()))
    return ExponentFit(slope, intercept, slope_se, r_squared, len(pts))


# ---------------------------------------------------------------------------
# serialization (fixed formats; no wall times, so outputs are byte-stable)

RECORD_COLUMNS = ("label", "r", "trials", "mean", "sem", "ci_low", "ci_high",
                  "truncated_fraction")


def format_value(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_value(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def records_to_csv(records: Sequence[EstimateRecord],
                   columns: Sequence[str] = RECORD_COLUMNS) -> str:
    return rows_to_csv([rec.as_row() for rec in records], columns)


def records_to_json(records: Sequence[EstimateRecord]) -> str:
    return json.dumps({"records": [rec.as_row() for rec in records]},
                      sort_keys=True) + "\n"


def wide_wsf_rows(records: Sequence[EstimateRecord]) -> list[dict]:
    """Pivot (T, C, N) records into one row per radius."""
    by_radius: dict[int, dict] = {}
    for rec in records:
        row = by_radius.setdefault(rec.r, {"r": rec.r, "trials": rec.trials})
        name = {"T": "T", "C": "C", "N": "Nr"}[rec.label]
        row[f"mean_{name}"] = rec.mean
        row[f"sem_{name}"] = rec.sem
    return [by_radius[r] for r in sorted(by_radius)]


def load_config_file(path: str) -> dict[str, str]:
    """Flat key=value config text; same keys as the CLI flags."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputError(f"bad config line: {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
