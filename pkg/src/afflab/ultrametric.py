"""Exact arithmetic on Q_p restricted to rationals: valuations, balls, punctured regions.

A ball ``B(c, k)`` is ``{x : v_p(x - c) >= -k}``; it has Haar measure ``p**k`` with the
unit ball ``Z_p = B(0, 0)`` normalized to 1.  Centers are stored in canonical form (the
finite p-adic digit expansion of ``c`` truncated below the ball's radius), so two equal
balls compare and hash equal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

INF = math.inf

Scalar = Fraction


class ResolutionError(ValueError):
    """A membership query was asked below the resolution a point was sampled at."""


class PrimeMismatch(ValueError):
    pass


@lru_cache(maxsize=None)
def check_prime(p: int) -> int:
    if not isinstance(p, int) or p < 2:
        raise ValueError(f"prime must be an integer >= 2, got {p!r}")
    if any(p % d == 0 for d in range(2, math.isqrt(p) + 1)):
        raise ValueError(f"{p} is not prime")
    return p


def to_scalar(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floats are not exact scalars; pass a Fraction, int or 'num/den' string")
    return Fraction(x)


@lru_cache(maxsize=1 << 16)
def _strip(n: int, p: int) -> tuple[int, int]:
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v, n


def valuation(x, p: int) -> int | float:
    """p-adic valuation of a rational; ``INF`` for zero."""
    x = to_scalar(x)
    if x == 0:
        return INF
    vn, _ = _strip(x.numerator, p)
    vd, _ = _strip(x.denominator, p)
    return vn - vd


def norm(x, p: int) -> Fraction:
    """``|x|_p = p**(-v_p(x))`` as an exact rational."""
    v = valuation(x, p)
    if v == INF:
        return Fraction(0)
    return Fraction(p) ** (-v)


@lru_cache(maxsize=1 << 18)
def truncate(x: Fraction, p: int, level: int) -> Fraction:
    """Canonical representative of ``x`` modulo ``p**(-level) Z_p``.

    The result is ``sum d_i p**i`` over the digits of ``x`` with ``i < -level``, with
    ``0 <= d_i < p``.
    """
    if x == 0:
        return x
    t = -level
    vn, un = _strip(x.numerator, p)
    vd, ud = _strip(x.denominator, p)
    v = vn - vd
    if v >= t:
        return Fraction(0)
    m = t - v
    mod = p**m
    digits = (un * pow(ud, -1, mod)) % mod
    return Fraction(digits) * Fraction(p) ** v


def to_rational_string(x) -> str:
    x = to_scalar(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(s) -> Fraction:
    if isinstance(s, (int, Fraction)):
        return Fraction(s)
    if isinstance(s, str):
        return Fraction(s.strip())
    raise TypeError(f"cannot read a rational from {s!r}")


class Relation(enum.Enum):
    DISJOINT = "disjoint"
    EQUAL = "equal"
    SUBSET = "subset"  # first ball strictly inside the second
    SUPERSET = "superset"


@dataclass(frozen=True, order=False)
class Ball:
    center: Fraction
    level: int
    prime: int = 3

    def __post_init__(self):
        check_prime(self.prime)
        object.__setattr__(self, "center", truncate(to_scalar(self.center), self.prime, self.level))

    def __repr__(self):
        return f"B({self.center}, {self.level})"

    @property
    def measure(self) -> Fraction:
        return Fraction(self.prime) ** self.level

    @property
    def radius(self) -> Fraction:
        return self.measure

    def sort_key(self):
        return (-self.level, self.center)

    def contains(self, x, resolution: int | None = None) -> bool:
        if resolution is not None and self.level < resolution:
            raise ResolutionError(
                f"membership in {self!r} needs digits below sampled resolution {resolution}"
            )
        return truncate(to_scalar(x), self.prime, self.level) == self.center

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def within(self, other: Ball) -> bool:
        """True when ``self`` is a (not necessarily proper) sub-ball of ``other``."""
        _same_prime(self, other)
        return self.level <= other.level and truncate(self.center, self.prime, other.level) == other.center

    def relate(self, other: Ball) -> Relation:
        _same_prime(self, other)
        if self == other:
            return Relation.EQUAL
        if self.within(other):
            return Relation.SUBSET
        if other.within(self):
            return Relation.SUPERSET
        return Relation.DISJOINT

    def parent(self, levels: int = 1) -> Ball:
        return Ball(self.center, self.level + levels, self.prime)

    def split(self) -> list[Ball]:
        p = self.prime
        step = Fraction(p) ** (-self.level)
        return [Ball(self.center + d * step, self.level - 1, p) for d in range(p)]

    def affine_image(self, a, b) -> Ball:
        """Image under ``x -> (x + b) / a``."""
        a, b = to_scalar(a), to_scalar(b)
        if a == 0:
            raise ZeroDivisionError("affine_image needs a != 0")
        return Ball((self.center + b) / a, self.level + valuation(a, self.prime), self.prime)

    def to_json(self) -> dict:
        return {"center": to_rational_string(self.center), "level": self.level}

    @classmethod
    def from_json(cls, data: dict, prime: int) -> Ball:
        return cls(parse_rational(data["center"]), int(data["level"]), prime)


def _same_prime(*objs):
    primes = {o.prime for o in objs}
    if len(primes) > 1:
        raise PrimeMismatch(f"objects live over different primes {sorted(primes)}")


def ball(center, level: int, prime: int = 3) -> Ball:
    return Ball(to_scalar(center), level, prime)


def relate(b1: Ball, b2: Ball) -> Relation:
    return b1.relate(b2)


def hull(balls: Iterable[Ball]) -> Ball:
    """Smallest ball containing all given balls."""
    balls = list(balls)
    if not balls:
        raise ValueError("hull of nothing")
    _same_prime(*balls)
    h = balls[0]
    for b in balls[1:]:
        lvl = max(h.level, b.level)
        while truncate(h.center, h.prime, lvl) != truncate(b.center, h.prime, lvl):
            lvl += 1
        h = Ball(h.center, lvl, h.prime)
    return h


def origin_level(b: Ball) -> int:
    """Smallest K with ``b`` inside ``B(0, K)``."""
    v = valuation(b.center, b.prime)
    return b.level if v == INF else max(b.level, -v)


@dataclass(frozen=True)
class Region:
    """A ball with finitely many pairwise-disjoint proper sub-balls removed."""

    ball: Ball
    exclusions: tuple[Ball, ...] = ()

    def __post_init__(self):
        excl = tuple(sorted(set(self.exclusions), key=Ball.sort_key))
        for e in excl:
            if e.relate(self.ball) is not Relation.SUBSET:
                raise ValueError(f"exclusion {e!r} is not a proper sub-ball of {self.ball!r}")
        for i, e in enumerate(excl):
            for f in excl[i + 1:]:
                if e.relate(f) is not Relation.DISJOINT:
                    raise ValueError(f"exclusions {e!r} and {f!r} overlap")
        object.__setattr__(self, "exclusions", excl)

    @property
    def prime(self) -> int:
        return self.ball.prime

    @property
    def level(self) -> int:
        return self.ball.level

    @property
    def measure(self) -> Fraction:
        return self.ball.measure - sum((e.measure for e in self.exclusions), Fraction(0))

    @property
    def is_empty(self) -> bool:
        return self.measure == 0

    def finest_level(self) -> int:
        return min([self.ball.level] + [e.level for e in self.exclusions])

    def contains(self, x, resolution: int | None = None) -> bool:
        if not self.ball.contains(x, resolution):
            return False
        return not any(e.contains(x, resolution) for e in self.exclusions)

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def affine_image(self, a, b) -> Region:
        return Region(self.ball.affine_image(a, b), tuple(e.affine_image(a, b) for e in self.exclusions))

    def representative(self) -> Fraction:
        """Some exact point of the region."""
        if self.is_empty:
            raise ValueError("empty region has no points")
        stack = [self.ball]
        while stack:
            b = stack.pop()
            inner = [e for e in self.exclusions if e.within(b)]
            if not inner:
                return b.center
            if any(e == b for e in inner):
                continue
            stack.extend(reversed(b.split()))
        raise ValueError("region is empty")  # pragma: no cover

    def to_json(self) -> dict:
        out = self.ball.to_json()
        if self.exclusions:
            out["exclusions"] = [e.to_json() for e in self.exclusions]
        return out

    @classmethod
    def from_json(cls, data: dict, prime: int) -> Region:
        return cls(Ball.from_json(data, prime), tuple(Ball.from_json(e, prime) for e in data.get("exclusions", ())))


def as_region(r: Ball | Region) -> Region:
    return r if isinstance(r, Region) else Region(r)


def measure(r: Ball | Region) -> Fraction:
    return r.measure


def split(b: Ball) -> list[Ball]:
    return b.split()


def affine_image(r: Ball | Region, a, b):
    return r.affine_image(a, b)


# --- sampling -------------------------------------------------------------------------

def stream(seed: int, lane: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, lane)``; lanes never share state."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(lane,))))


def _uniform_digits(rng: np.random.Generator, p: int, n: int) -> int:
    """Uniform integer on ``[0, p**n)``."""
    bound = p**n
    if bound < 2**62:
        return int(rng.integers(0, bound))
    return sum(int(d) * p**i for i, d in enumerate(rng.integers(0, p, size=n)))


def sample_uniform(region: Ball | Region, resolution: int, rng: np.random.Generator, size: int | None = None):
    """Haar-uniform point(s) of ``region``, exact to ``resolution``.

    The point is ``center + p**(-level) * N`` with ``N`` uniform on ``[0, p**(level-resolution))``;
    digits finer than ``resolution`` are zero.  Exclusions are handled by rejection.
    """
    region = as_region(region)
    if region.is_empty:
        raise ValueError("cannot sample from an empty region")
    if region.finest_level() < resolution:
        raise ResolutionError(f"region {region!r} is finer than sampling resolution {resolution}")
    b = region.ball
    p = b.prime
    step = Fraction(p) ** (-b.level)
    n_digits = b.level - resolution

    def one():
        while True:
            x = b.center + _uniform_digits(rng, p, n_digits) * step
            if not any(e.contains(x) for e in region.exclusions):
                return x

    if size is None:
        return one()
    return [one() for _ in range(size)]


def finest_level(regions: Sequence[Ball | Region]) -> int:
    return min(as_region(r).finest_level() for r in regions)
