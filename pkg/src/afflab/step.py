"""Piecewise-constant functions on Q_p with exact values.

A step function is a finite family of balls, each carrying a value, plus a default.  The
value at ``x`` is the value of the smallest family ball containing ``x`` (the default if
none does).  Any finite set of p-adic balls is laminar, so the family needs no disjointness
bookkeeping; the punctured-region view (``pieces``) is derived from it: each ball minus its
maximal family sub-balls.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Callable, Iterable

from .ultrametric import (
    Ball,
    Region,
    ResolutionError,
    _same_prime,
    as_region,
    check_prime,
    parse_rational,
    to_rational_string,
    to_scalar,
    truncate,
    valuation,
)

Key = tuple  # (canonical center, level)


class InconsistentAssignment(ValueError):
    """The same ball was given two different values."""


class NotIntegrable(ValueError):
    pass


def _key(b: Ball) -> Key:
    return (b.center, b.level)


class StepFunction:
    """Immutable step function; build with :meth:`from_balls`, :meth:`from_regions` or helpers."""

    __slots__ = ("prime", "default", "_entries", "_levels", "_tree")

    def __init__(self, prime: int, entries: dict[Key, tuple[Ball, Any]], default):
        self.prime = prime
        self.default = default
        self._entries = entries
        self._levels = sorted({k[1] for k in entries})
        self._tree = None

    # -- construction ------------------------------------------------------------------

    @classmethod
    def from_balls(cls, prime: int, items: Iterable[tuple[Ball, Any]], default) -> StepFunction:
        """Normalize a nested-ball assignment (finest containing ball wins)."""
        check_prime(prime)
        raw: dict[Key, tuple[Ball, Any]] = {}
        for b, v in items:
            if b.prime != prime:
                _same_prime(b, _PrimeTag(prime))
            k = _key(b)
            if k in raw and raw[k][1] != v:
                raise InconsistentAssignment(f"{b!r} assigned both {raw[k][1]!r} and {v!r}")
            raw[k] = (b, v)
        return cls(prime, _normalize(prime, raw, default), default)

    @classmethod
    def constant(cls, prime: int, value) -> StepFunction:
        return cls(check_prime(prime), {}, value)

    @classmethod
    def from_regions(cls, prime: int, pieces: Iterable[tuple[Ball | Region, Any]], default) -> StepFunction:
        """Step function equal to ``value`` on each (pairwise-disjoint) region, else ``default``."""
        pieces = [(as_region(r), v) for r, v in pieces]
        pieces = [(r, v) for r, v in pieces if not r.is_empty]
        balls: dict[Key, Ball] = {}
        for r, _ in pieces:
            balls[_key(r.ball)] = r.ball
            for e in r.exclusions:
                balls[_key(e)] = e
        items = []
        for b in balls.values():
            # the finest region base wins, so nested plain balls read as "finest ball wins"
            value, level = default, None
            for r, v in pieces:
                if b.within(r.ball) and not any(b.within(e) for e in r.exclusions):
                    if level is None or r.ball.level < level:
                        value, level = v, r.ball.level
            items.append((b, value))
        return cls.from_balls(prime, items, default)

    @classmethod
    def indicator(cls, region: Ball | Region, value=Fraction(1), default=Fraction(0)) -> StepFunction:
        region = as_region(region)
        return cls.from_regions(region.prime, [(region, value)], default)

    # -- inspection --------------------------------------------------------------------

    def balls(self) -> list[Ball]:
        return [b for b, _ in self._entries.values()]

    def items(self) -> list[tuple[Ball, Any]]:
        return list(self._entries.values())

    def values(self) -> set:
        return {v for _, v in self._entries.values()} | {self.default}

    def is_constant(self) -> bool:
        return not self._entries

    def finest_level(self) -> int | None:
        return self._levels[0] if self._levels else None

    def __len__(self):
        return len(self._entries)

    def __repr__(self):
        body = ", ".join(f"{b!r}: {v}" for b, v in self._entries.values())
        return f"StepFunction(p={self.prime}, {{{body}}}, default={self.default})"

    def _structure(self):
        """(parent key or None, direct children keys) for every family ball."""
        if self._tree is None:
            parent: dict[Key, Key | None] = {}
            children: dict[Key, list[Key]] = {k: [] for k in self._entries}
            for k in self._entries:
                parent[k] = self._ancestor(k[0], k[1] + 1)
                if parent[k] is not None:
                    children[parent[k]].append(k)
            self._tree = (parent, children)
        return self._tree

    def _ancestor(self, center: Fraction, from_level: int) -> Key | None:
        p = self.prime
        for lvl in self._levels:
            if lvl < from_level:
                continue
            k = (truncate(center, p, lvl), lvl)
            if k in self._entries:
                return k
        return None

    def value_on(self, b: Ball):
        """Value on the part of ``b`` not covered by strictly finer family balls."""
        k = self._ancestor(b.center, b.level)
        return self.default if k is None else self._entries[k][1]

    def __call__(self, x, resolution: int | None = None):
        if resolution is not None and self._levels and self._levels[0] < resolution:
            raise ResolutionError(
                f"step function has cells at level {self._levels[0]}, below resolution {resolution}"
            )
        x = to_scalar(x)
        p = self.prime
        for lvl in self._levels:
            k = (truncate(x, p, lvl), lvl)
            if k in self._entries:
                return self._entries[k][1]
        return self.default

    evaluate = __call__

    def pieces(self) -> list[tuple[Region, Any]]:
        """Disjoint punctured regions carrying non-default values."""
        _, children = self._structure()
        out = []
        for k, (b, v) in self._entries.items():
            r = Region(b, tuple(self._entries[c][0] for c in children[k]))
            if v != self.default and not r.is_empty:
                out.append((r, v))
        return out

    def support(self) -> list[Region]:
        return [r for r, _ in self.pieces()]

    # -- algebra -----------------------------------------------------------------------

    def combine(self, other: StepFunction, op: Callable[[Any, Any], Any]) -> StepFunction:
        if self.prime != other.prime:
            _same_prime(_PrimeTag(self.prime), _PrimeTag(other.prime))
        entries = {}
        for k, (b, _) in list(self._entries.items()) + list(other._entries.items()):
            if k not in entries:
                entries[k] = (b, op(self.value_on(b), other.value_on(b)))
        default = op(self.default, other.default)
        return StepFunction(self.prime, _normalize(self.prime, entries, default), default)

    def map(self, fn: Callable[[Any], Any]) -> StepFunction:
        entries = {k: (b, fn(v)) for k, (b, v) in self._entries.items()}
        default = fn(self.default)
        return StepFunction(self.prime, _normalize(self.prime, entries, default), default)

    def __add__(self, other):
        if isinstance(other, StepFunction):
            return self.combine(other, lambda u, v: u + v)
        return self.map(lambda u: u + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, StepFunction):
            return self.combine(other, lambda u, v: u - v)
        return self.map(lambda u: u - other)

    def __rsub__(self, other):
        return self.map(lambda u: other - u)

    def __mul__(self, other):
        if isinstance(other, StepFunction):
            return self.combine(other, lambda u, v: u * v)
        return self.map(lambda u: u * other)

    __rmul__ = __mul__

    def __neg__(self):
        return self.map(lambda u: -u)

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        if self.prime != other.prime:
            return False
        diff = self.combine(other, lambda u, v: u == v)
        return diff.is_constant() and diff.default is True

    __hash__ = None

    def integrate(self) -> Fraction:
        """Exact Haar integral; the default must be 0."""
        if self.default != 0:
            raise NotIntegrable(f"default value {self.default} != 0 has infinite mass")
        return sum((r.measure * v for r, v in self.pieces()), Fraction(0))

    # -- serialization -----------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "default": encode_value(self.default),
            "pieces": [
                {"region": b.to_json(), "value": encode_value(v)}
                for b, v in sorted(self._entries.values(), key=lambda e: e[0].sort_key())
            ],
        }

    @classmethod
    def from_json(cls, data: dict, prime: int) -> StepFunction:
        default = decode_value(data.get("default", "0/1"))
        pieces = []
        for item in data.get("pieces", []):
            pieces.append((Region.from_json(item["region"], prime), decode_value(item["value"])))
        return cls.from_regions(prime, pieces, default)


class _PrimeTag:
    def __init__(self, prime):
        self.prime = prime


def encode_value(v):
    if isinstance(v, (int, Fraction)):
        return to_rational_string(v)
    if isinstance(v, (float, complex)):
        c = complex(v)
        return [c.real, c.imag]
    raise TypeError(f"cannot serialize step value {v!r}")


def decode_value(v):
    if isinstance(v, list):
        return complex(v[0], v[1])
    return parse_rational(v)


def _normalize(prime: int, entries: dict[Key, tuple[Ball, Any]], default) -> dict[Key, tuple[Ball, Any]]:
    entries = dict(entries)
    p = prime

    # complete sibling sets with a common value collapse into their parent ball
    pending = sorted({k[1] for k in entries})
    seen_levels = set()
    while pending:
        lvl = pending.pop(0)
        if lvl in seen_levels:
            continue
        seen_levels.add(lvl)
        groups: dict[Key, list] = {}
        for (c, l), (b, v) in entries.items():
            if l == lvl:
                groups.setdefault((truncate(c, p, lvl + 1), lvl + 1), []).append(((c, l), v))
        for pk, kids in groups.items():
            vals = [v for _, v in kids]
            if len(vals) == p and all(v == vals[0] for v in vals[1:]):
                for k, _ in kids:
                    del entries[k]
                entries[pk] = (Ball(pk[0], pk[1], p), vals[0])
                if pk[1] not in seen_levels and pk[1] not in pending:
                    pending.append(pk[1])
                    pending.sort()

    def links(ents):
        levels = sorted({k[1] for k in ents})
        parent = {}
        for c, l in ents:
            par = None
            for lv in levels:
                if lv <= l:
                    continue
                k = (truncate(c, p, lv), lv)
                if k in ents:
                    par = k
                    break
            parent[(c, l)] = par
        return parent

    parent = links(entries)
    covered: dict[Key, Fraction] = {}
    for k, par in parent.items():
        if par is not None:
            covered[par] = covered.get(par, 0) + entries[k][0].measure
    empty = [k for k, m in covered.items() if m == entries[k][0].measure]
    for k in empty:
        del entries[k]
    if empty:
        parent = links(entries)

    out = {}
    for k, (b, v) in entries.items():
        par = parent[k]
        inherited = default if par is None else entries[par][1]
        if v != inherited:
            out[k] = (b, v)
    return dict(sorted(out.items(), key=lambda kv: kv[1][0].sort_key()))


# -- module-level operations -------------------------------------------------------------

def normalize(prime: int, pieces: Iterable[tuple[Ball | Region, Any]], default) -> StepFunction:
    """Canonical step function from possibly nested pieces (finest piece wins)."""
    items = []
    for r, v in pieces:
        r = as_region(r)
        if r.exclusions:
            raise ValueError("normalize takes plain balls; use StepFunction.from_regions for punctured regions")
        items.append((r.ball, v))
    return StepFunction.from_balls(prime, items, default)


def evaluate(f: StepFunction, x, resolution: int | None = None):
    return f(x, resolution)


def combine(f: StepFunction, g: StepFunction, op) -> StepFunction:
    return f.combine(g, op)


def integrate(f: StepFunction) -> Fraction:
    return f.integrate()


def support(f: StepFunction) -> list[Region]:
    return f.support()


IDENTITY_PAIR = (Fraction(1), Fraction(0))


def compose_affine(f: StepFunction, coefficients: StepFunction) -> StepFunction:
    """``x -> f((x + b(x)) / a(x))`` where ``coefficients`` is step-valued ``(a, b)``.

    On every cell of ``coefficients`` the map is a fixed affine bijection ``T``, so ``f o T``
    is again a step function there (its balls are the preimages ``a * D - b``); the pieces
    are spliced together cell by cell.
    """
    if f.prime != coefficients.prime:
        _same_prime(_PrimeTag(f.prime), _PrimeTag(coefficients.prime))
    p = f.prime
    parent, children = coefficients._structure()
    tops = [k for k, par in parent.items() if par is None]
    cbox = coefficients._entries
    fitems = f.items()
    items: list[tuple[Ball, Any]] = []

    for b, v in fitems:
        if not any(b.within(cbox[t][0]) for t in tops):
            items.append((b, v))

    for k, (cell_ball, (a, shift)) in cbox.items():
        kids = [cbox[c][0] for c in children[k]]
        if a == 1 and shift == 0:
            pre = fitems
        else:
            dv = valuation(a, p)
            pre = [(Ball(a * b.center - shift, b.level - dv, p), v) for b, v in fitems]
        top_value = f.default
        best = None
        for b, v in pre:
            if cell_ball.within(b) and (best is None or b.level < best):
                best, top_value = b.level, v
            elif b.within(cell_ball) and b != cell_ball and not any(b.within(c) for c in kids):
                items.append((b, v))
        items.append((cell_ball, top_value))
    return StepFunction.from_balls(p, items, f.default)


def pullback(f: StepFunction, g) -> StepFunction:
    """``(g f)(x) = f(g(x) x)`` for an affine element ``g``."""
    return compose_affine(f, g.coefficients)
