"""Estimate records and order-independent sample aggregation.

Workers may deliver trial results in any order; :class:`SampleAccumulator`
stores (trial index, value) pairs and all statistics are computed from the
index-sorted sequence, so merged accumulators give bit-identical results no
matter how trials were partitioned across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

#: Normal 95% two-sided quantile used for all confidence intervals.
Z95 = 1.96


@dataclass
class EstimateRecord:
    """One Monte Carlo estimate at one radius (or step count, for p_m)."""

    label: str
    r: int
    trials: int
    mean: float
    sem: float
    ci_low: float
    ci_high: float
    truncated_fraction: float = 0.0
    sem_defined: bool = True
    seed_provenance: str = ""
    wall_time: Optional[float] = None  # never serialized; outputs stay byte-stable

    def as_row(self) -> dict:
        return {
            "label": self.label,
            "r": self.r,
            "trials": self.trials,
            "mean": self.mean,
            "sem": self.sem,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "truncated_fraction": self.truncated_fraction,
        }


def summarize(values: Iterable[float], *, label: str = "", r: int = 0,
              truncated_fraction: float = 0.0,
              seed_provenance: str = "") -> EstimateRecord:
    """Mean, unbiased variance, sem and normal 95% CI of the samples.

    A single sample yields sem 0 with ``sem_defined=False``.
    """
    vals = list(values)
    n = len(vals)
    if n == 0:
        raise ValueError("summarize needs at least one sample")
    mean = math.fsum(vals) / n
    if n == 1:
        return EstimateRecord(label, r, 1, mean, 0.0, mean, mean,
                              truncated_fraction, sem_defined=False,
                              seed_provenance=seed_provenance)
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    sem = math.sqrt(var / n)
    return EstimateRecord(label, r, n, mean, sem,
                          mean - Z95 * sem, mean + Z95 * sem,
                          truncated_fraction, seed_provenance=seed_provenance)


@dataclass
class SampleAccumulator:
    """Mergeable bag of (trial index, value) pairs.

    Merging is list concatenation; statistics are taken over the
    index-sorted values, so merge order cannot change any result.
    """

    pairs: list[tuple[int, float]] = field(default_factory=list)

    def add(self, trial: int, value: float) -> None:
        self.pairs.append((trial, value))

    def merge(self, other: "SampleAccumulator") -> "SampleAccumulator":
        out = SampleAccumulator(self.pairs + other.pairs)
        return out

    def sorted_values(self) -> list[float]:
        return [v for _, v in sorted(self.pairs)]

    def summarize(self, **kwargs) -> EstimateRecord:
        return summarize(self.sorted_values(), **kwargs)
