"""Seeded random scenarios: balls, step functions, marks and stratified affine elements."""

from __future__ import annotations

import zlib
from fractions import Fraction

import numpy as np

from .group import (
    AffineElement,
    is_bijective,
    product_motion,
    product_pointwise,
    scaling,
    swap,
    translation,
)
from .step import StepFunction
from .ultrametric import Ball, Region, stream

WINDOW_LEVEL = 1
FINEST_LEVEL = -2

BIJECTIVE_KINDS = ("translation", "swap", "unit-scaling", "composite")
NON_BIJECTIVE_KINDS = ("scaling", "far-translation", "pointwise-mix")
DEFAULT_MIX = {"translation": 2, "swap": 2, "unit-scaling": 2, "composite": 2,
               "scaling": 1, "far-translation": 1, "pointwise-mix": 1}


def rng_for(seed: int, *labels) -> np.random.Generator:
    """Stream keyed by ``seed`` and a stable label, e.g. ``rng_for(7, "core", 3)``."""
    lane = zlib.crc32(":".join(str(x) for x in labels).encode())
    return stream(seed, lane)


def random_ball(rng, p: int, lo: int = FINEST_LEVEL, hi: int = WINDOW_LEVEL - 1,
                inside: Ball | None = None) -> Ball:
    outer = inside or Ball(0, WINDOW_LEVEL, p)
    hi = min(hi, outer.level if inside is not None else hi)
    lo = min(lo, hi)
    level = int(rng.integers(lo, hi + 1))
    digits = outer.level - level
    n = int(rng.integers(0, p**digits)) if digits > 0 else 0
    return Ball(outer.center + n * Fraction(p) ** (-outer.level), level, p)


def _small_rational(rng, p: int, allow_zero: bool = True) -> Fraction:
    pool = [Fraction(1, 2), Fraction(2), Fraction(3), Fraction(1, 3), Fraction(5, 4), Fraction(-1),
            Fraction(7), Fraction(p), Fraction(1, p), Fraction(-2, 5)]
    if allow_zero:
        pool.append(Fraction(0))
    return pool[int(rng.integers(0, len(pool)))]


def random_step(rng, p: int, pieces: int | None = None, default=Fraction(0)) -> StepFunction:
    """Random rational step function; nested balls allowed."""
    k = pieces if pieces is not None else int(rng.integers(1, 5))
    items = {}
    for _ in range(k):
        b = random_ball(rng, p)
        items[b] = _small_rational(rng, p)
    return StepFunction.from_balls(p, items.items(), default)


def random_mark(rng, p: int, pieces: int | None = None, allow_zero: bool = True) -> StepFunction:
    """Random nonnegative rational mark with default 1."""
    pool = [Fraction(2), Fraction(1, 2), Fraction(3), Fraction(1, 3), Fraction(5, 2), Fraction(4)]
    if allow_zero:
        pool.append(Fraction(0))
    k = pieces if pieces is not None else int(rng.integers(1, 4))
    items = {}
    for _ in range(k):
        items[random_ball(rng, p)] = pool[int(rng.integers(0, len(pool)))]
    return StepFunction.from_balls(p, items.items(), Fraction(1))


def probe_mark(rng, elements, p: int) -> StepFunction:
    """Mark with its own value on every cell and image cell, so products see each point map."""
    pool = [Fraction(2), Fraction(3), Fraction(5), Fraction(1, 2), Fraction(7, 3), Fraction(4)]
    balls = {}
    for g in elements:
        for r in g.regions():
            for b in (r.ball, *r.exclusions):
                balls[b] = pool[int(rng.integers(0, len(pool)))]
    return StepFunction.from_balls(p, balls.items(), Fraction(1))


def _unit(rng, p: int) -> Fraction:
    while True:
        num = int(rng.integers(1, 12)) * (1 if rng.random() < 0.8 else -1)
        den = int(rng.integers(1, 6))
        if num % p and den % p and Fraction(num, den) != 1:
            return Fraction(num, den)


def in_ball_translation(rng, p: int) -> AffineElement:
    b = random_ball(rng, p, hi=WINDOW_LEVEL - 1)
    # |h| <= radius(B): v(h) >= -level
    h = int(rng.integers(1, p**2 + 1)) * Fraction(p) ** (-b.level + int(rng.integers(0, 2)))
    return translation(b, h)


def ball_swap(rng, p: int) -> AffineElement:
    parent = random_ball(rng, p, lo=FINEST_LEVEL + 1)
    i, j = rng.choice(p, size=2, replace=False)
    kids = parent.split()
    return swap(kids[int(i)], kids[int(j)])


def unit_scaling(rng, p: int) -> AffineElement:
    b = random_ball(rng, p)
    a = _unit(rng, p)
    return scaling(b, a, b.center * (a - 1))


def bijective_composite(rng, p: int) -> AffineElement:
    makers = (in_ball_translation, ball_swap, unit_scaling)
    g = makers[int(rng.integers(0, 3))](rng, p)
    for _ in range(int(rng.integers(1, 3))):
        g = product_motion(makers[int(rng.integers(0, 3))](rng, p), g)
    return g


def non_bijective_scaling(rng, p: int) -> AffineElement:
    b = random_ball(rng, p, hi=0)
    a = _unit(rng, p) * Fraction(p) ** (1 if rng.random() < 0.5 else -1)
    return scaling(b, a, _small_rational(rng, p))


def far_translation(rng, p: int) -> AffineElement:
    b = random_ball(rng, p, hi=0)
    # |h| > radius(B) moves B off itself
    h = Fraction(int(rng.integers(1, p))) * Fraction(p) ** (-b.level - 1)
    return translation(b, h)


def pointwise_mix(rng, p: int) -> AffineElement:
    makers = (in_ball_translation, ball_swap, unit_scaling, non_bijective_scaling)
    g1 = makers[int(rng.integers(0, 4))](rng, p)
    g2 = makers[int(rng.integers(0, 4))](rng, p)
    return product_pointwise(g2, g1)


MAKERS = {
    "translation": in_ball_translation,
    "swap": ball_swap,
    "unit-scaling": unit_scaling,
    "composite": bijective_composite,
    "scaling": non_bijective_scaling,
    "far-translation": far_translation,
    "pointwise-mix": pointwise_mix,
}


def random_element(rng, p: int, kind: str) -> AffineElement:
    return MAKERS[kind](rng, p)


def element_population(rng, p: int, count: int, mix: dict[str, int] | None = None) -> list[tuple[str, AffineElement]]:
    """``count`` elements cycling through the stratified mix (deterministic order)."""
    mix = mix or DEFAULT_MIX
    schedule = [k for k, w in mix.items() for _ in range(w)]
    return [(schedule[i % len(schedule)], random_element(rng, p, schedule[i % len(schedule)]))
            for i in range(count)]


def bijective_population(rng, p: int, count: int) -> list[tuple[str, AffineElement]]:
    out = []
    i = 0
    while len(out) < count:
        kind = BIJECTIVE_KINDS[i % len(BIJECTIVE_KINDS)]
        g = random_element(rng, p, kind)
        if is_bijective(g).verdict:
            out.append((kind, g))
        i += 1
    return out


def random_region_set(rng, p: int, pieces: int | None = None) -> list[Region]:
    """Disjoint balls (as regions) inside the unit window."""
    k = pieces if pieces is not None else int(rng.integers(1, 3))
    out: list[Ball] = []
    while len(out) < k:
        b = random_ball(rng, p, hi=0)
        if all(not (b.within(c) or c.within(b)) for c in out):
            out.append(b)
    return [Region(b) for b in out]
