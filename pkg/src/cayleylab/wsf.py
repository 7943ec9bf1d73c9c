"""Wired spanning forest sampling and the ball observables built on it.

Two samplers:

* :func:`wilson_wired` draws an exact uniform spanning tree of the wired
  ball B(o, R) (exterior collapsed to one root, parallel edges kept), the
  primary route: on the wired finite graph Wilson's algorithm is exact and
  the wired measures converge to the WSF as R grows.
* :func:`wilson_rooted_at_infinity_truncated` runs Wilson's method rooted
  at infinity directly on the group, declaring a walk escaped once its
  certified distance exceeds a radius M. It cross-validates the wired
  sampler and handles exponential-growth families whose wired balls exceed
  the memory cap.

From a sampled forest, :func:`component_stats` extracts |T_o ∩ B(o,r)|,
|C(o,r)| and the ray count N_r, computed locally around o so that large
forests cost O(V(r)) per sample, not O(V(R)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._kernels import wilson_parents
from .errors import InputError, SamplingError
from .groups import Element, GroupModel
from .lerw import _Eraser
from .metric import DistanceOracle
from .walk import CHUNK, StepDistribution, _membership_test, _StepSampler


class _DisjointSets:
    """Union-find over arbitrary hashable handles."""

    def __init__(self):
        self._parent = {}

    def find(self, x):
        parent = self._parent
        root = x
        while parent.setdefault(root, root) != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self._parent[rb] = ra


@dataclass
class ComponentStats:
    """Sizes of T_o ∩ B(o,r), C(o,r) and Ray(o,r) for one forest sample."""

    size_t_ball: int
    size_c: int
    n_r: int
    r: int
    big_r: int

    def check(self, ball_volume: int) -> None:
        assert 1 <= self.n_r <= self.size_c <= self.size_t_ball <= ball_volume


# ---------------------------------------------------------------------------
# wired ball graph and the exact sampler


class WiredBallGraph:
    """B(o, R) with the exterior identified to a single wired root.

    Vertices are indexed in BFS order from o (o = 0); the root is index n.
    ``adjacency[v, j]`` is the endpoint of support move j from vertex v,
    so parallel edges to the root keep their multiplicity and the walk on
    the wired graph has exactly the original transition probabilities.
    """

    def __init__(self, model: GroupModel, big_r: int, elements: list[Element],
                 adjacency: np.ndarray, move_probs: np.ndarray,
                 distances: np.ndarray):
        self.model = model
        self.big_r = big_r
        self.elements = elements
        self.adjacency = adjacency
        self.move_probs = move_probs
        self.distances = distances

    @property
    def n_inner(self) -> int:
        return self.adjacency.shape[0]

    @property
    def root_index(self) -> int:
        return self.n_inner

    def root_multiplicity(self, v: int) -> int:
        """Number of parallel edges from inner vertex v to the wired root."""
        return int(np.count_nonzero(self.adjacency[v] == self.root_index))

    def ball_size(self, r: int) -> int:
        return int(np.count_nonzero(self.distances <= r))


def build_wired_ball(dist: StepDistribution, oracle: DistanceOracle,
                     big_r: int) -> WiredBallGraph:
    """Index B(o, R) and wire every support move leaving it to the root.

    Laziness is dropped: self-loops only add erased loops to Wilson walks
    and do not change the spanning forest measure.
    """
    if big_r > oracle.r_max:
        raise ValueError(f"R={big_r} beyond oracle radius {oracle.r_max}")
    model = dist.model
    elements = []
    dists = []
    for x, d in oracle.items():
        if d > big_r:
            break
        elements.append(x)
        dists.append(d)
    index = {x: i for i, x in enumerate(elements)}
    n = len(elements)
    moves = [g for g, _ in dist.support]
    raw = np.array([p for _, p in dist.support], dtype=np.float64)
    move_probs = raw / raw.sum()
    adjacency = np.empty((n, len(moves)), dtype=np.int64)
    multiply = model.multiply
    for i, x in enumerate(elements):
        for j, g in enumerate(moves):
            adjacency[i, j] = index.get(multiply(x, g), n)
    return WiredBallGraph(model, big_r, elements, adjacency, move_probs,
                          np.array(dists, dtype=np.int32))


class WiredForest:
    """A spanning tree of a wired ball, stored as a parent-index array."""

    def __init__(self, graph: WiredBallGraph, parent: np.ndarray):
        self.graph = graph
        self.parent = parent
        self._anchor_memo: dict[int, int] = {}

    @property
    def root_index(self) -> int:
        return self.graph.root_index

    def check_spanning(self) -> None:
        """Every inner vertex has a parent and its chain reaches the root."""
        n = self.graph.n_inner
        assert (self.parent >= 0).all() and (self.parent <= n).all()
        for v in range(n):
            self.anchor(v)  # raises/loops forever only on a broken forest

    def anchor(self, v: int) -> int:
        """Last inner vertex on the parent path from v before the root."""
        memo = self._anchor_memo
        parent = self.parent
        root = self.root_index
        chain = []
        a = -1
        while True:
            known = memo.get(v)
            if known is not None:
                a = known
                break
            p = int(parent[v])
            if p == root:
                a = v
                break
            chain.append(v)
            v = p
            assert len(chain) <= self.graph.n_inner, "cycle in forest"
        memo[v] = a
        for u in chain:
            memo[u] = a
        return a

    def ray_from_origin(self) -> list[int]:
        """Parent path from o to the wired root, root excluded."""
        chain = []
        v = 0
        root = self.root_index
        while v != root:
            chain.append(v)
            v = int(self.parent[v])
        return chain

    def component_stats(self, r: int) -> ComponentStats:
        graph = self.graph
        if r > graph.big_r:
            raise ValueError(f"r={r} beyond wired radius {graph.big_r}")
        dist = graph.distances
        ball = np.nonzero(dist <= r)[0]
        anchor_o = self.anchor(0)
        t_ball = [int(v) for v in ball if self.anchor(int(v)) == anchor_o]
        in_ball = set(int(v) for v in ball)
        dsu = _DisjointSets()
        root = self.root_index
        for v in in_ball:
            p = int(self.parent[v])
            if p != root and p in in_ball:
                dsu.union(v, p)
        comp_o = dsu.find(0)
        c_members = {v for v in in_ball if dsu.find(v) == comp_o}
        n_r = sum(1 for v in self.ray_from_origin() if v in c_members)
        stats = ComponentStats(len(t_ball), len(c_members), n_r, r, graph.big_r)
        stats.check(len(in_ball))
        return stats


def wilson_wired(graph: WiredBallGraph, rng: np.random.Generator,
                 vertex_order: Optional[Sequence[int]] = None) -> WiredForest:
    """Exact uniform spanning tree of the wired ball, rooted at the root.

    The default visit order is BFS from o with o first, so the tree ray
    from o is sampled first. Any order yields the same distribution.
    """
    n = graph.n_inner
    if vertex_order is None:
        order = np.arange(n, dtype=np.int64)
    else:
        order = np.asarray(vertex_order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(n)):
            raise InputError("vertex_order must be a permutation of the inner vertices")
    probs = graph.move_probs
    uniform = bool(np.allclose(probs, probs[0]))
    seed = np.uint64(rng.integers(0, 2**64, dtype=np.uint64))
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    parent = wilson_parents(graph.adjacency, order, cum, uniform, seed)
    return WiredForest(graph, parent)


# ---------------------------------------------------------------------------
# Wilson's method rooted at infinity, truncated at a certified escape radius


class TruncatedForest:
    """Partial WSF from truncated Wilson walks, keyed by group elements.

    Tree tops (walks declared escaped) have parent ``None``; each top is
    the root of its own component, standing in for a ray to infinity.
    """

    def __init__(self, model: GroupModel, oracle: DistanceOracle, r_build: int,
                 parents: dict[Element, Optional[Element]], escape_radius: int):
        self.model = model
        self.oracle = oracle
        self.r_build = r_build
        self.parents = parents
        self.escape_radius = escape_radius
        self._anchor_memo: dict[Element, Element] = {}

    def anchor(self, x: Element) -> Element:
        memo = self._anchor_memo
        parents = self.parents
        chain = []
        while True:
            known = memo.get(x)
            if known is not None:
                a = known
                break
            p = parents[x]
            if p is None:
                a = x
                break
            chain.append(x)
            x = p
            assert len(chain) <= len(parents), "cycle in forest"
        memo[x] = a
        for u in chain:
            memo[u] = a
        return a

    def ray_from_origin(self) -> list[Element]:
        chain = []
        v = self.model.identity()
        while v is not None:
            chain.append(v)
            v = self.parents[v]
        return chain

    def component_stats(self, r: int) -> ComponentStats:
        if r > self.r_build:
            raise ValueError(f"r={r} beyond seeded radius {self.r_build}")
        ball = self.oracle.ball_elements(r)
        o = self.model.identity()
        anchor_o = self.anchor(o)
        t_ball = [x for x in ball if self.anchor(x) == anchor_o]
        in_ball = set(ball)
        dsu = _DisjointSets()
        for x in in_ball:
            p = self.parents.get(x)
            if p is not None and p in in_ball:
                dsu.union(x, p)
        comp_o = dsu.find(o)
        c_members = {x for x in in_ball if dsu.find(x) == comp_o}
        n_r = sum(1 for x in self.ray_from_origin() if x in c_members)
        stats = ComponentStats(len(t_ball), len(c_members), n_r, r,
                               self.escape_radius)
        stats.check(len(in_ball))
        return stats


def wilson_rooted_at_infinity_truncated(
        dist: StepDistribution, oracle: DistanceOracle, r: int,
        escape_radius: int, rng: np.random.Generator, *,
        vertex_order: Optional[Sequence[Element]] = None,
        horizon: int = 10_000_000) -> TruncatedForest:
    """Approximate WSF around B(o, r): walks absorb into the forest or escape.

    Walks follow the group itself (no wired ball), are loop-erased online,
    and are declared escaped once the certified distance lower bound exceeds
    ``escape_radius`` (required to be at least 4r).
    """
    model = dist.model
    if escape_radius < 4 * r:
        raise InputError("escape_radius must be at least 4r")
    if r > oracle.r_max:
        raise ValueError(f"r={r} beyond oracle radius {oracle.r_max}")
    seeds = list(vertex_order) if vertex_order is not None else oracle.ball_elements(r)
    lb = model.distance_lower_bound
    multiply = model.multiply
    moves = [g for g, _ in dist.support]
    raw = np.array([p for _, p in dist.support], dtype=np.float64)
    cum = np.cumsum(raw / raw.sum())
    cum[-1] = 1.0
    parents: dict[Element, Optional[Element]] = {}
    for v in seeds:
        if v in parents:
            continue
        eraser = _Eraser(v)
        x = v
        hit: Optional[Element] = None
        t = 0
        done = False
        while not done:
            if t >= horizon:
                raise SamplingError(
                    f"Wilson walk from {v!r} unresolved after {horizon} steps")
            take = min(CHUNK, horizon - t)
            for j in np.searchsorted(cum, rng.random(take), side="right"):
                t += 1
                x = multiply(x, moves[j])
                if x in parents:
                    hit = x
                    done = True
                    break
                eraser.push(x)
                if lb(x) > escape_radius:
                    done = True
                    break
        stack = eraser.stack
        for a, b in zip(stack, stack[1:]):
            parents[a] = b
        parents[stack[-1]] = hit
    return TruncatedForest(model, oracle, r, parents, escape_radius)


def component_stats(forest, oracle: DistanceOracle, r: int) -> ComponentStats:
    """Extract |T_o ∩ B(o,r)|, |C(o,r)| and N_r from a forest sample.

    T_o is the component of o after deleting the (wired or infinity) root;
    C(o,r) is the component of o in the forest restricted to B(o,r); the
    ray is o's parent path, root excluded.
    """
    stats = forest.component_stats(r)
    if oracle is not None and r <= oracle.r_max:
        assert stats.size_t_ball <= oracle.volume(r)
    return stats


# ---------------------------------------------------------------------------
# exit/return decomposition of the ray (Figure-style trace)


@dataclass
class RayTrace:
    """Alternating return/exit times of one walk around B(o,r) and B(o,2r).

    ``pairs[i]`` is (rho_i, tau_i): the i-th return into the frozen loop
    erasure inside B(o,r) (rho_0 = 0) and the following exit of B(o,2r).
    ``xi`` is the number of finite returns; ``cover_bound`` is the sum of
    tau_i - rho_i, an upper bound for the ray count N_r.
    """

    pairs: list[tuple[int, int]]
    xi: int
    cover_bound: int
    escape_radius: int


def ray_decomposition_trace(dist: StepDistribution, oracle: Optional[DistanceOracle],
                            r: int, rng: np.random.Generator, *,
                            escape_factor: float = 8.0,
                            horizon: int = 10_000_000) -> RayTrace:
    """Simulate one walk from o recording the (rho_i, tau_i) decomposition.

    rho_i is the first time after tau_{i-1} that the walk re-enters the loop
    erasure of its own past (frozen at tau_{i-1}) inside B(o,r); tau_i is the
    next exit of B(o,2r). The trace ends when escape past
    ``escape_factor * max(r,1)`` certifies rho = infinity.
    """
    model = dist.model
    if not model.is_transient:
        raise InputError(f"{model.name} is recurrent; the trace needs transience")
    if escape_factor < 4:
        raise InputError("escape_factor must be >= 4 so escape certifies no return")
    member_r = _membership_test(model, oracle, r)
    member_2r = _membership_test(model, oracle, 2 * r)
    escape_radius = int(math.ceil(escape_factor * max(r, 1)))
    lb = model.distance_lower_bound
    multiply = model.multiply
    sampler = _StepSampler(dist)
    moves = sampler.moves
    o = model.identity()
    eraser = _Eraser(o)
    x = o
    t = 0
    pairs: list[tuple[int, int]] = []
    rho = 0  # rho_0 = 0
    waiting_exit = True
    snapshot: set = set()
    while True:
        if t >= horizon:
            raise SamplingError(f"ray trace unresolved after {horizon} steps")
        take = min(CHUNK, horizon - t)
        for j in sampler.draw(rng, take):
            t += 1
            if not j:
                continue
            x = multiply(x, moves[j - 1])
            eraser.push(x)
            if waiting_exit:
                if not member_2r(x):
                    pairs.append((rho, t))
                    snapshot = {u for u in eraser.stack if member_r(u)}
                    waiting_exit = False
            else:
                if x in snapshot:
                    rho = t
                    waiting_exit = True
                elif lb(x) > escape_radius:
                    return RayTrace(pairs, len(pairs),
                                    sum(tau - rho for rho, tau in pairs),
                                    escape_radius)
