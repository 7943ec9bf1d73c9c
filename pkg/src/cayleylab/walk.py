"""Symmetric (optionally lazy) random walks and their observables.

Walk increments are i.i.d. over a finite symmetric support; the default is
uniform over the model's generators, with optional 1/2 laziness. Observables:

* occupation time of B(o, r), truncated at a certified escape radius,
* first exit time of B(o, r),
* Monte Carlo return probability p_m(o, o).

Ball membership always refers to the word metric of the model's standard
generators (the Cayley graph), regardless of the walk's support. Families
with a closed-form word length are tested directly; the others go through a
:class:`~cayleylab.metric.DistanceOracle` table. Escape past a large radius
is certified through the per-family lower bounds, never estimated.

All samplers draw move indices in fixed-size chunks from their stream, so
the vectorized ZPower fast paths and the generic element-by-element path
consume randomness identically and produce identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import InputError, SamplingError
from .groups import Element, GroupModel, ZPower
from .metric import DistanceOracle
from .stats import EstimateRecord, summarize

#: Move indices are drawn from the stream in blocks of this many steps.
CHUNK = 1024

DEFAULT_HORIZON = 10_000_000


@dataclass(frozen=True)
class StepDistribution:
    """Finite-support step law: non-identity moves plus a hold weight."""

    model: GroupModel
    support: tuple[tuple[Element, float], ...]
    lazy_weight: float = 0.0

    def validate(self, tol: float = 1e-12) -> None:
        """Check normalization, symmetry, and the laziness convention."""
        model = self.model
        o = model.identity()
        probs = {}
        total = self.lazy_weight
        for g, p in self.support:
            model.check_element(g)
            if g == o:
                raise InputError("identity belongs in lazy_weight, not support")
            if p <= 0:
                raise InputError(f"non-positive probability {p} for {g!r}")
            if g in probs:
                raise InputError(f"duplicate support element {g!r}")
            probs[g] = p
            total += p
        if abs(total - 1.0) > tol:
            raise InputError(f"probabilities sum to {total}, not 1")
        for g, p in probs.items():
            q = probs.get(model.inverse(g))
            if q is None or abs(p - q) > tol:
                raise InputError(f"support not symmetric at {g!r}")
        if 0 < self.lazy_weight < 0.5:
            raise InputError("lazy walks hold with probability >= 1/2")

    @property
    def is_lazy(self) -> bool:
        return self.lazy_weight > 0


def make_step_distribution(model: GroupModel, lazy: bool = False) -> StepDistribution:
    """Uniform step law on the generators, with 1/2 laziness if requested."""
    gens = model.generators
    d = len(gens)
    if lazy:
        dist = StepDistribution(model, tuple((g, 0.5 / d) for g in gens), 0.5)
    else:
        dist = StepDistribution(model, tuple((g, 1.0 / d) for g in gens), 0.0)
    dist.validate()
    return dist


class _StepSampler:
    """Chunked sampling of move indices: 0 = hold, j >= 1 = support[j-1]."""

    def __init__(self, dist: StepDistribution):
        self.moves = tuple(g for g, _ in dist.support)
        cum = np.cumsum([dist.lazy_weight] + [p for _, p in dist.support])
        cum[-1] = 1.0  # guard against float round-off in the last cell
        self.cum = cum

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.searchsorted(self.cum, rng.random(n), side="right")


def _zpower_move_table(dist: StepDistribution) -> np.ndarray:
    d = dist.model.d
    table = np.zeros((len(dist.support) + 1, d), dtype=np.int64)
    for j, (g, _) in enumerate(dist.support, start=1):
        table[j] = g
    return table


def _membership_test(model: GroupModel, oracle: Optional[DistanceOracle],
                     r: int) -> Callable[[Element], bool]:
    """Exact d(x) <= r predicate, via formula or the oracle table."""
    if model.lower_bound_is_exact:
        lb = model.distance_lower_bound
        return lambda x: lb(x) <= r
    if oracle is None:
        raise InputError(f"{model.name} needs a distance oracle for membership")
    if r > oracle.r_max:
        raise ValueError(f"r={r} beyond oracle radius {oracle.r_max}")
    table = oracle._table
    def member(x, _table=table, _r=r):
        d = _table.get(x)
        return d is not None and d <= _r
    return member


# ---------------------------------------------------------------------------
# occupation time


@dataclass
class OccupationResult:
    """Truncated occupation count of B(o, r) for one trajectory."""

    count: int
    truncated: bool
    escape_radius_used: int
    horizon_used: int


def _transience_guard(model: GroupModel) -> None:
    if not model.is_transient:
        raise InputError(
            f"{model.name} is recurrent (growth degree <= 2); "
            "occupation time of a ball is a.s. infinite")


def sample_occupation_time(dist: StepDistribution, oracle: Optional[DistanceOracle],
                           r: int, rng: np.random.Generator, *,
                           escape_factor: float = 8.0,
                           horizon: int = DEFAULT_HORIZON) -> OccupationResult:
    """Count steps spent in B(o, r) until certified escape or the horizon.

    Stops once the certified distance exceeds ``escape_factor * max(r, 1)``;
    hitting the horizon first flags the result as truncated instead.
    """
    model = dist.model
    _transience_guard(model)
    if escape_factor < 2:
        raise InputError("escape_factor must be >= 2")
    escape_radius = int(math.ceil(escape_factor * max(r, 1)))
    if isinstance(model, ZPower):
        return _occupation_zpower(dist, r, escape_radius, horizon, rng)
    member = _membership_test(model, oracle, r)
    return _occupation_generic(dist, member, r, escape_radius, horizon, rng)


def _occupation_generic(dist: StepDistribution, member, r: int,
                        escape_radius: int, horizon: int,
                        rng: np.random.Generator) -> OccupationResult:
    model = dist.model
    lb = model.distance_lower_bound
    sampler = _StepSampler(dist)
    moves = sampler.moves
    multiply = model.multiply
    x = model.identity()
    count = 1  # S_0 = o is in the ball
    inside = True
    t = 0
    while True:
        take = min(CHUNK, horizon - t)
        if take == 0:
            return OccupationResult(count, True, escape_radius, horizon)
        for j in sampler.draw(rng, take):
            t += 1
            if j:
                x = multiply(x, moves[j - 1])
                if member(x):
                    count += 1
                    inside = True
                else:
                    inside = False
                    if lb(x) > escape_radius:
                        return OccupationResult(count, False, escape_radius, horizon)
            elif inside:
                count += 1


def _occupation_zpower(dist: StepDistribution, r: int, escape_radius: int,
                       horizon: int, rng: np.random.Generator) -> OccupationResult:
    sampler = _StepSampler(dist)
    table = _zpower_move_table(dist)
    pos = np.zeros(dist.model.d, dtype=np.int64)
    count = 1
    t = 0
    while True:
        take = min(CHUNK, horizon - t)
        if take == 0:
            return OccupationResult(count, True, escape_radius, horizon)
        idx = sampler.draw(rng, take)
        path = pos + np.cumsum(table[idx], axis=0)
        norms = np.abs(path).sum(axis=1)
        escaped = norms > escape_radius
        if escaped.any():
            stop = int(np.argmax(escaped))
            count += int(np.count_nonzero(norms[:stop] <= r))
            return OccupationResult(count, False, escape_radius, horizon)
        count += int(np.count_nonzero(norms <= r))
        pos = path[-1]
        t += take


# ---------------------------------------------------------------------------
# exit time


def sample_exit_time(dist: StepDistribution, oracle: Optional[DistanceOracle],
                     r: int, rng: np.random.Generator, *,
                     horizon: int = DEFAULT_HORIZON) -> int:
    """First t with S_t outside B(o, r); raises if the horizon runs out.

    Exit times feed the Theorem-style inequalities, so an exhausted horizon
    raises :class:`SamplingError` rather than truncating.
    """
    model = dist.model
    if isinstance(model, ZPower):
        return _exit_zpower(dist, r, horizon, rng)
    member = _membership_test(model, oracle, r)
    return _exit_generic(dist, member, r, horizon, rng)


def _exit_generic(dist: StepDistribution, member, r: int, horizon: int,
                  rng: np.random.Generator) -> int:
    model = dist.model
    sampler = _StepSampler(dist)
    moves = sampler.moves
    multiply = model.multiply
    x = model.identity()
    t = 0
    while True:
        take = min(CHUNK, horizon - t)
        if take == 0:
            raise SamplingError(
                f"exit of B(o,{r}) on {model.name} not reached in {horizon} steps")
        for j in sampler.draw(rng, take):
            t += 1
            if j:
                x = multiply(x, moves[j - 1])
                if not member(x):
                    return t


def _exit_zpower(dist: StepDistribution, r: int, horizon: int,
                 rng: np.random.Generator) -> int:
    sampler = _StepSampler(dist)
    table = _zpower_move_table(dist)
    pos = np.zeros(dist.model.d, dtype=np.int64)
    t = 0
    while True:
        take = min(CHUNK, horizon - t)
        if take == 0:
            raise SamplingError(
                f"exit of B(o,{r}) on {dist.model.name} not reached in {horizon} steps")
        idx = sampler.draw(rng, take)
        path = pos + np.cumsum(table[idx], axis=0)
        norms = np.abs(path).sum(axis=1)
        outside = norms > r
        if outside.any():
            return t + int(np.argmax(outside)) + 1
        pos = path[-1]
        t += take


# ---------------------------------------------------------------------------
# return probability


def estimate_return_probability(dist: StepDistribution, m: int, trials: int,
                                rng: np.random.Generator) -> EstimateRecord:
    """Unbiased Monte Carlo estimate of p_m(o, o) over ``trials`` walks."""
    if m < 0 or trials < 1:
        raise InputError("need m >= 0 and trials >= 1")
    model = dist.model
    if m == 0:
        return summarize([1.0] * trials, label="p_m", r=0)
    if isinstance(model, ZPower):
        hits = _returns_zpower(dist, m, trials, rng)
    else:
        sampler = _StepSampler(dist)
        moves = sampler.moves
        multiply = model.multiply
        o = model.identity()
        hits = []
        for _ in range(trials):
            x = o
            done = 0
            while done < m:
                take = min(CHUNK, m - done)
                for j in sampler.draw(rng, take):
                    if j:
                        x = multiply(x, moves[j - 1])
                done += take
            hits.append(1.0 if x == o else 0.0)
    return summarize(hits, label="p_m", r=m)


def _returns_zpower(dist: StepDistribution, m: int, trials: int,
                    rng: np.random.Generator) -> list[float]:
    # whole trials vectorized in blocks; the op owns a single stream
    sampler = _StepSampler(dist)
    table = _zpower_move_table(dist)
    hits: list[float] = []
    block = max(1, (1 << 22) // (m * dist.model.d))
    done = 0
    while done < trials:
        take = min(block, trials - done)
        idx = np.searchsorted(sampler.cum, rng.random((take, m)), side="right")
        pos = table[idx].sum(axis=1)
        hits.extend((~pos.any(axis=1)).astype(np.float64).tolist())
        done += take
    return hits


def sample_hits_target(dist: StepDistribution, target: Element,
                       escape_radius: int, rng: np.random.Generator, *,
                       horizon: int = DEFAULT_HORIZON) -> bool:
    """Whether a walk from o hits ``target`` before certified escape."""
    model = dist.model
    model.check_element(target)
    o = model.identity()
    if target == o:
        return True
    lb = model.distance_lower_bound
    sampler = _StepSampler(dist)
    moves = sampler.moves
    multiply = model.multiply
    x = o
    t = 0
    while True:
        take = min(CHUNK, horizon - t)
        if take == 0:
            raise SamplingError(
                f"hit-or-escape unresolved after {horizon} steps")
        for j in sampler.draw(rng, take):
            t += 1
            if not j:
                continue
            x = multiply(x, moves[j - 1])
            if x == target:
                return True
            if lb(x) > escape_radius:
                return False


# ---------------------------------------------------------------------------
# full trajectories (used by loop erasure and by pathwise tests)


@dataclass(frozen=True)
class HitSet:
    """Stop when the walk enters the target set."""

    targets: frozenset


@dataclass(frozen=True)
class EscapeRadius:
    """Stop once the certified distance lower bound exceeds ``radius``."""

    radius: int


StopRule = Union[HitSet, EscapeRadius]


@dataclass
class Trajectory:
    """A finite walk path S_0..S_T with the reason sampling stopped."""

    steps: list[Element]
    stop_reason: str  # "hit_target" | "escaped" | "horizon"

    def occupation_count(self, member: Callable[[Element], bool]) -> int:
        return sum(1 for x in self.steps if member(x))

    def exit_index(self, member: Callable[[Element], bool]) -> Optional[int]:
        for t, x in enumerate(self.steps):
            if not member(x):
                return t
        return None


def sample_trajectory(dist: StepDistribution, rng: np.random.Generator,
                      stop: StopRule, *, start: Optional[Element] = None,
                      horizon: int = DEFAULT_HORIZON) -> Trajectory:
    """Run one walk from ``start`` (default o) until the stop rule fires."""
    model = dist.model
    x = model.identity() if start is None else start
    model.check_element(x)
    steps = [x]
    if isinstance(stop, HitSet) and x in stop.targets:
        return Trajectory(steps, "hit_target")
    lb = model.distance_lower_bound
    sampler = _StepSampler(dist)
    moves = sampler.moves
    multiply = model.multiply
    t = 0
    while True:
        take = min(CHUNK, horizon - t)
        if take == 0:
            return Trajectory(steps, "horizon")
        for j in sampler.draw(rng, take):
            t += 1
            if j:
                x = multiply(x, moves[j - 1])
            steps.append(x)
            if isinstance(stop, HitSet):
                if x in stop.targets:
                    return Trajectory(steps, "hit_target")
            elif lb(x) > stop.radius:
                return Trajectory(steps, "escaped")
