"""Chronological loop erasure and loop-erased random walk sampling.

The eraser is the online stack algorithm: append each vertex, and on a
revisit pop back to the previous occurrence. This realizes the
chronological (last-exit) definition in amortized O(length) and can run
interleaved with the walk, which is what Wilson's algorithm needs.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .errors import InputError, SamplingError
from .groups import Element
from .walk import CHUNK, EscapeRadius, HitSet, StepDistribution, StopRule, _StepSampler


class _Eraser:
    """Online loop erasure: a stack of vertices plus their stack positions."""

    def __init__(self, start: Element):
        self.stack = [start]
        self.pos = {start: 0}

    def push(self, v: Element) -> None:
        at = self.pos.get(v)
        if at is None:
            self.pos[v] = len(self.stack)
            self.stack.append(v)
        else:
            for u in self.stack[at + 1:]:
                del self.pos[u]
            del self.stack[at + 1:]


def loop_erase(path: Sequence[Element]) -> list[Element]:
    """Forward (chronological) loop erasure of a nonempty path.

    Output is a simple path from the first to the last vertex of the input.
    """
    if not path:
        raise InputError("cannot loop-erase an empty path")
    it = iter(path)
    eraser = _Eraser(next(it))
    for v in it:
        eraser.push(v)
    return list(eraser.stack)


def sample_lerw(dist: StepDistribution, start: Element, stop: StopRule,
                rng: np.random.Generator, *,
                horizon: int = 10_000_000) -> list[Element]:
    """Loop erasure of a walk from ``start`` run until the stop rule fires.

    For :class:`HitSet` the last vertex lies in the target set; for
    :class:`EscapeRadius` the walk is truncated once its certified distance
    exceeds the radius and the erasure of the truncated path is returned.
    """
    model = dist.model
    model.check_element(start)
    if isinstance(stop, HitSet) and start in stop.targets:
        return [start]
    lb = model.distance_lower_bound
    sampler = _StepSampler(dist)
    moves = sampler.moves
    multiply = model.multiply
    eraser = _Eraser(start)
    x = start
    t = 0
    while True:
        take = min(CHUNK, horizon - t)
        if take == 0:
            raise SamplingError(
                f"LERW stop rule did not fire within {horizon} steps")
        for j in sampler.draw(rng, take):
            t += 1
            if not j:
                continue
            x = multiply(x, moves[j - 1])
            eraser.push(x)
            if isinstance(stop, HitSet):
                if x in stop.targets:
                    return list(eraser.stack)
            elif lb(x) > stop.radius:
                return list(eraser.stack)
