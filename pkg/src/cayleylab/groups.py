"""Concrete finitely generated groups with exact element arithmetic.

Every group model exposes the same small interface: identity, multiply,
inverse, a symmetric generator list, and a canonical byte key per element.
Elements are plain immutable tuples in a family-specific normal form, so
they hash fast and can be shared freely across worker processes:

* ``ZPower(d)``          -- length-``d`` tuple of ints
* ``Heisenberg3``        -- ``(a, b, c)`` with product
                            ``(a,b,c)(a',b',c') = (a+a', b+b', c+c'+a*b')``
* ``LamplighterZ2OverZ`` -- ``(frozenset(lit positions), cursor)``
* ``FreeGroup(k)``       -- fully reduced word as a tuple of signed
                            generator indices in ``{-k..-1, 1..k}``
* ``ProductGroup``       -- tuple of component elements

Textual descriptors (used by the CLI and the experiment harness):
``"Z"`` or ``"Z^d"``, ``"H3"``, ``"LL"``, ``"Fk"``, and products joined
with ``x``, e.g. ``"Z^2xF2"``.
"""

from __future__ import annotations

import math
import struct
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

from .errors import InputError

# All element normal forms are tuples (the lamplighter's lamp set is a
# frozenset inside a tuple), hashable and immutable.
Element = tuple

# Coordinates are kept well below 2**62 so packing into int64 keys is safe.
# Experiments use radii far below 2**30; overflow is asserted, not handled.
_COORD_LIMIT = 1 << 62


def _pack_ints(values) -> bytes:
    out = bytearray()
    for v in values:
        assert -_COORD_LIMIT < v < _COORD_LIMIT, "coordinate overflow"
        out += struct.pack("<q", v)
    return bytes(out)


class GroupModel(ABC):
    """A finitely generated group with a fixed symmetric generating set."""

    @abstractmethod
    def identity(self) -> Element:
        """Normal form of the group identity."""

    @abstractmethod
    def multiply(self, a: Element, b: Element) -> Element:
        """Normal form of ``a * b``."""

    @abstractmethod
    def inverse(self, a: Element) -> Element:
        """Normal form of ``a^{-1}``."""

    @abstractmethod
    def check_element(self, a: Element) -> None:
        """Raise :class:`InputError` if ``a`` is not a valid normal form."""

    @cached_property
    def generators(self) -> tuple[Element, ...]:
        """The symmetric generating set X ∪ X⁻¹, duplicate-free, identity excluded."""
        gens = self._generators()
        seen = []
        for g in gens:
            if g != self.identity() and g not in seen:
                seen.append(g)
        for g in seen:
            assert self.inverse(g) in seen, "generator set not symmetric"
        return tuple(seen)

    @abstractmethod
    def _generators(self) -> list[Element]:
        ...

    @abstractmethod
    def canonical_key(self, a: Element) -> bytes:
        """Injective, deterministic byte encoding of the normal form."""

    @abstractmethod
    def growth_degree(self) -> Optional[int]:
        """Polynomial growth degree, or None for superpolynomial growth."""

    @property
    def is_transient(self) -> bool:
        """Whether simple random walk on the model is transient.

        By Varopoulos' classification the walk is recurrent exactly for
        polynomial growth of degree at most 2 (covers Z, Z^2, F1 here).
        """
        d = self.growth_degree()
        return d is None or d >= 3

    @property
    def lower_bound_is_exact(self) -> bool:
        """True when :meth:`distance_lower_bound` equals the word length."""
        return True

    @abstractmethod
    def distance_lower_bound(self, a: Element) -> int:
        """A certified lower bound on the word length of ``a``.

        Exact for families with a closed-form word length (see
        :attr:`lower_bound_is_exact`); always ``<=`` the true distance.
        """

    @property
    @abstractmethod
    def name(self) -> str:
        ...

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


@dataclass(frozen=True, repr=False)
class ZPower(GroupModel):
    """Z^d with the standard basis generators."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise InputError("ZPower needs d >= 1")

    def identity(self) -> Element:
        return (0,) * self.d

    def multiply(self, a, b):
        self.check_element(a)
        self.check_element(b)
        return tuple(x + y for x, y in zip(a, b))

    def inverse(self, a):
        self.check_element(a)
        return tuple(-x for x in a)

    def check_element(self, a):
        if not (isinstance(a, tuple) and len(a) == self.d
                and all(isinstance(x, int) for x in a)):
            raise InputError(f"not a Z^{self.d} element: {a!r}")

    def _generators(self):
        gens = []
        for i in range(self.d):
            e = [0] * self.d
            e[i] = 1
            gens.append(tuple(e))
            e[i] = -1
            gens.append(tuple(e))
        return gens

    def canonical_key(self, a):
        return _pack_ints(a)

    def growth_degree(self):
        return self.d

    def distance_lower_bound(self, a):
        # L1 norm is the exact word length for the standard generators.
        return sum(abs(x) for x in a)

    @property
    def name(self):
        return f"Z^{self.d}"


@dataclass(frozen=True, repr=False)
class Heisenberg3(GroupModel):
    """Discrete Heisenberg group in (a, b, c) coordinates.

    (a, b, c) encodes the upper-unitriangular matrix with first row
    (1, a, c) and second row (0, 1, b); generators are the two matrix
    generators and their inverses.
    """

    def identity(self) -> Element:
        return (0, 0, 0)

    def multiply(self, x, y):
        self.check_element(x)
        self.check_element(y)
        a, b, c = x
        a2, b2, c2 = y
        return (a + a2, b + b2, c + c2 + a * b2)

    def inverse(self, x):
        self.check_element(x)
        a, b, c = x
        return (-a, -b, a * b - c)

    def check_element(self, a):
        if not (isinstance(a, tuple) and len(a) == 3
                and all(isinstance(x, int) for x in a)):
            raise InputError(f"not a Heisenberg element: {a!r}")

    def _generators(self):
        return [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)]

    def canonical_key(self, a):
        return _pack_ints(a)

    def growth_degree(self):
        return 4

    @property
    def lower_bound_is_exact(self):
        return False

    def distance_lower_bound(self, x):
        # |a|+|b| is the word length of the abelianized image; the c
        # coordinate moves by at most t after t steps along the walk,
        # so n steps change |c| by at most n(n-1)/2.
        a, b, c = x
        ab = abs(a) + abs(b)
        c = abs(c)
        if c == 0:
            return ab
        n = (1 + math.isqrt(1 + 8 * c)) // 2
        while n * (n - 1) // 2 < c:
            n += 1
        return max(ab, n)

    @property
    def name(self):
        return "H3"


@dataclass(frozen=True, repr=False)
class LamplighterZ2OverZ(GroupModel):
    """Lamplighter group Z2 wr Z with "walk or switch" generators.

    Elements are (frozenset of lit lamp positions, cursor). Generators
    are cursor moves t, t^{-1} and the involution s toggling the lamp at
    the cursor.
    """

    def identity(self) -> Element:
        return (frozenset(), 0)

    def multiply(self, x, y):
        self.check_element(x)
        self.check_element(y)
        lamps1, p1 = x
        lamps2, p2 = y
        shifted = frozenset(q + p1 for q in lamps2)
        return (lamps1 ^ shifted, p1 + p2)

    def inverse(self, x):
        self.check_element(x)
        lamps, p = x
        return (frozenset(q - p for q in lamps), -p)

    def check_element(self, a):
        if not (isinstance(a, tuple) and len(a) == 2
                and isinstance(a[0], frozenset) and isinstance(a[1], int)
                and all(isinstance(q, int) for q in a[0])):
            raise InputError(f"not a lamplighter element: {a!r}")

    def _generators(self):
        t = (frozenset(), 1)
        s = (frozenset({0}), 0)
        return [t, self.inverse(t), s]

    def canonical_key(self, a):
        lamps, p = a
        return _pack_ints([p, len(lamps), *sorted(lamps)])

    def growth_degree(self):
        return None

    def distance_lower_bound(self, x):
        # Exact word length: one toggle per lit lamp plus the shortest
        # cursor tour from 0 that visits every lit position and ends at p.
        lamps, p = x
        lo = min(min(lamps), 0, p) if lamps else min(0, p)
        hi = max(max(lamps), 0, p) if lamps else max(0, p)
        span = hi - lo
        travel = span + min((0 - lo) + (hi - p), (hi - 0) + (p - lo))
        return len(lamps) + travel

    @property
    def name(self):
        return "LL"


@dataclass(frozen=True, repr=False)
class FreeGroup(GroupModel):
    """Free group on k generators; elements are fully reduced words."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise InputError("FreeGroup needs k >= 1")

    def identity(self) -> Element:
        return ()

    def multiply(self, a, b):
        self.check_element(a)
        self.check_element(b)
        out = list(a)
        n = len(out)
        for x in b:
            if n and out[n - 1] == -x:
                n -= 1
            else:
                if n < len(out):
                    out[n] = x
                else:
                    out.append(x)
                n += 1
        return tuple(out[:n])

    def inverse(self, a):
        self.check_element(a)
        return tuple(-x for x in reversed(a))

    def check_element(self, a):
        if not isinstance(a, tuple):
            raise InputError(f"not a free-group word: {a!r}")
        for x in a:
            if not isinstance(x, int) or x == 0 or abs(x) > self.k:
                raise InputError(f"bad letter {x!r} for F{self.k}")
        for u, v in zip(a, a[1:]):
            if u == -v:
                raise InputError(f"word not reduced: {a!r}")

    def _generators(self):
        gens = []
        for i in range(1, self.k + 1):
            gens.append((i,))
            gens.append((-i,))
        return gens

    def canonical_key(self, a):
        assert self.k < (1 << 15)
        return struct.pack(f"<{len(a)}h", *a)

    def growth_degree(self):
        return 1 if self.k == 1 else None

    def distance_lower_bound(self, a):
        # Reduced word length is the exact distance.
        return len(a)

    @property
    def name(self):
        return f"F{self.k}"


@dataclass(frozen=True, repr=False)
class ProductGroup(GroupModel):
    """Direct product; generators are factor generators embedded coordinatewise."""

    factors: tuple[GroupModel, ...]

    def __post_init__(self):
        if len(self.factors) < 2:
            raise InputError("ProductGroup needs at least 2 factors")

    def identity(self) -> Element:
        return tuple(f.identity() for f in self.factors)

    def multiply(self, a, b):
        self.check_element(a)
        self.check_element(b)
        return tuple(f.multiply(x, y) for f, x, y in zip(self.factors, a, b))

    def inverse(self, a):
        self.check_element(a)
        return tuple(f.inverse(x) for f, x in zip(self.factors, a))

    def check_element(self, a):
        if not (isinstance(a, tuple) and len(a) == len(self.factors)):
            raise InputError(f"not a product element: {a!r}")
        for f, x in zip(self.factors, a):
            f.check_element(x)

    def _generators(self):
        gens = []
        for i, f in enumerate(self.factors):
            base = [g.identity() for g in self.factors]
            for x in f.generators:
                e = list(base)
                e[i] = x
                gens.append(tuple(e))
        return gens

    def canonical_key(self, a):
        parts = []
        for f, x in zip(self.factors, a):
            key = f.canonical_key(x)
            parts.append(struct.pack("<I", len(key)))
            parts.append(key)
        return b"".join(parts)

    def growth_degree(self):
        total = 0
        for f in self.factors:
            d = f.growth_degree()
            if d is None:
                return None
            total += d
        return total

    @property
    def lower_bound_is_exact(self):
        return all(f.lower_bound_is_exact for f in self.factors)

    def distance_lower_bound(self, a):
        # Word length in a direct product with embedded factor generators
        # is the sum of factor word lengths.
        return sum(f.distance_lower_bound(x) for f, x in zip(self.factors, a))

    @property
    def name(self):
        return "x".join(f.name for f in self.factors)


def parse_group(descriptor: str) -> GroupModel:
    """Parse a textual group descriptor.

    Grammar: atoms ``Z``, ``Z^d``, ``H3``, ``LL``, ``Fk`` joined by ``x``
    for direct products, e.g. ``"Z^3"``, ``"LL"``, ``"Z^2xF2"``.
    """
    text = descriptor.strip()
    if not text:
        raise InputError("empty group descriptor")
    atoms = []
    for token in text.split("x"):
        token = token.strip()
        if token == "Z":
            atoms.append(ZPower(1))
        elif token.startswith("Z^"):
            try:
                atoms.append(ZPower(int(token[2:])))
            except ValueError:
                raise InputError(f"bad ZPower descriptor: {token!r}") from None
        elif token == "H3":
            atoms.append(Heisenberg3())
        elif token == "LL":
            atoms.append(LamplighterZ2OverZ())
        elif token.startswith("F"):
            try:
                atoms.append(FreeGroup(int(token[1:])))
            except ValueError:
                raise InputError(f"bad FreeGroup descriptor: {token!r}") from None
        else:
            raise InputError(f"unknown group descriptor: {token!r}")
    if len(atoms) == 1:
        return atoms[0]
    return ProductGroup(tuple(atoms))
