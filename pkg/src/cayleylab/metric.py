"""Word-metric distance oracle and ball volumes via breadth-first search.

The oracle stores exact distances for every element within a build radius.
Distances past the build radius are reported as the :data:`BEYOND` sentinel,
never as an estimate; callers that only need "has the walk left B(o, M)" for
large M should use the per-family certified lower bounds from
:mod:`cayleylab.groups` instead of building giant oracles.
"""

from __future__ import annotations

from typing import Iterator, Optional

from .errors import CapacityError
from .groups import Element, GroupModel

#: Default cap on the number of ball elements held in memory.
DEFAULT_MAX_ELEMENTS = 20_000_000


class _Beyond:
    __slots__ = ()

    def __repr__(self):
        return "BEYOND"


#: Sentinel returned by :meth:`DistanceOracle.distance` past the build radius.
BEYOND = _Beyond()


class DistanceOracle:
    """Exact word distances on B(o, r_max), built by :func:`build_ball`."""

    def __init__(self, model: GroupModel, r_max: int,
                 table: dict[Element, int], sphere_sizes: list[int]):
        self.model = model
        self.r_max = r_max
        self._table = table  # insertion order = BFS order from the identity
        self.sphere_sizes = tuple(sphere_sizes)
        vols = []
        total = 0
        for s in sphere_sizes:
            total += s
            vols.append(total)
        self._volumes = tuple(vols)

    def __len__(self) -> int:
        return len(self._table)

    def distance(self, x: Element):
        """Exact word length of ``x`` if within r_max, else :data:`BEYOND`."""
        d = self._table.get(x)
        return BEYOND if d is None else d

    def contains(self, x: Element, r: int) -> bool:
        """Whether ``x`` lies in B(o, r). Requires ``r <= r_max``."""
        if r > self.r_max:
            raise ValueError(f"r={r} beyond oracle radius {self.r_max}")
        d = self._table.get(x)
        return d is not None and d <= r

    def volume(self, r: int) -> int:
        """V(r), the number of elements within distance r."""
        if not 0 <= r <= self.r_max:
            raise ValueError(f"r={r} outside [0, {self.r_max}]")
        return self._volumes[r]

    def items(self) -> Iterator[tuple[Element, int]]:
        """(element, distance) pairs in BFS order (identity first)."""
        return iter(self._table.items())

    def ball_elements(self, r: Optional[int] = None) -> list[Element]:
        """Elements of B(o, r) in BFS order; defaults to the full ball."""
        if r is None or r >= self.r_max:
            return list(self._table)
        cutoff = self._volumes[r]
        out = []
        for x in self._table:
            if len(out) == cutoff:
                break
            out.append(x)
        return out

    def first_at_distance(self, n: int) -> Element:
        """The BFS-first element at distance exactly ``n``."""
        if not 0 <= n <= self.r_max:
            raise ValueError(f"n={n} outside [0, {self.r_max}]")
        if self.sphere_sizes[n] == 0:
            raise ValueError(f"no elements at distance {n}")
        skip = self._volumes[n - 1] if n else 0
        for i, x in enumerate(self._table):
            if i == skip:
                return x
        raise AssertionError("unreachable")


def build_ball(model: GroupModel, r_max: int,
               max_elements: int = DEFAULT_MAX_ELEMENTS) -> DistanceOracle:
    """BFS from the identity out to radius ``r_max``.

    Raises :class:`CapacityError` (reporting the last fully explored radius)
    if the ball exceeds ``max_elements``.
    """
    if r_max < 0:
        raise ValueError("r_max must be >= 0")
    o = model.identity()
    table: dict[Element, int] = {o: 0}
    sphere_sizes = [1]
    frontier = [o]
    gens = model.generators
    multiply = model.multiply
    for k in range(1, r_max + 1):
        nxt = []
        for x in frontier:
            for g in gens:
                y = multiply(x, g)
                if y not in table:
                    if len(table) >= max_elements:
                        raise CapacityError(
                            f"ball of {model.name} exceeded {max_elements} "
                            f"elements at radius {k} (radius {k - 1} complete)",
                            radius_reached=k - 1)
                    table[y] = k
                    nxt.append(y)
        sphere_sizes.append(len(nxt))
        frontier = nxt
    return DistanceOracle(model, r_max, table, sphere_sizes)
