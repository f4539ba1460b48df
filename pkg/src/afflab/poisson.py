"""Configurations, the Poisson measure with Haar intensity, and its Laplace functional.

Everything is reduced to a finite window ``B(0, K)`` outside of which all multiplicative
marks equal 1 and all one-particle functions vanish.  Two sampling paths share one
stream layout:

* :func:`sample_configuration` returns exact :class:`Configuration` objects;
* :class:`Lattice` draws points as integer codes ``N`` (the point is ``N * p**-K``) and
  evaluates step functions by table lookup, which is what the 10**5-sample estimators use.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .group import AffineElement, pushforward_density
from .step import StepFunction
from .ultrametric import (
    Ball,
    Region,
    ResolutionError,
    as_region,
    origin_level,
    sample_uniform,
    stream,
    to_rational_string,
    to_scalar,
    valuation,
)

GUARD_DIGITS = 2
MC_LANES = 8
MAX_TABLE = 1 << 22


class EmptyScenario(ValueError):
    pass


class NegativeMark(ValueError):
    pass


@dataclass(frozen=True)
class WindowSpec:
    regions: tuple[Region, ...]

    def __post_init__(self):
        if not self.regions:
            raise ValueError("window needs at least one region")
        for i, r in enumerate(self.regions):
            for s in self.regions[i + 1:]:
                if r.ball.within(s.ball) or s.ball.within(r.ball):
                    raise ValueError("window regions must be disjoint balls")
        if self.total_mass <= 0:
            raise ValueError("window has no mass")

    @property
    def prime(self) -> int:
        return self.regions[0].prime

    @property
    def total_mass(self) -> Fraction:
        return sum((r.measure for r in self.regions), Fraction(0))

    @classmethod
    def ball(cls, b: Ball) -> WindowSpec:
        return cls((Region(b),))


@dataclass(frozen=True)
class Configuration:
    """Finite multiset of points, kept sorted; ``resolution`` is the sampled digit depth."""

    points: tuple[Fraction, ...]
    prime: int
    window: tuple[Region, ...] = ()
    resolution: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(sorted(to_scalar(x) for x in self.points)))

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def to_json(self) -> list[str]:
        return [to_rational_string(x) for x in self.points]


def _regions_of(obj) -> list[Region]:
    if isinstance(obj, (Ball, Region)):
        return [as_region(obj)]
    if isinstance(obj, StepFunction):
        return [Region(b) for b in obj.balls()]
    if isinstance(obj, AffineElement):
        return obj.regions()
    if hasattr(obj, "step_functions"):
        out = []
        for f in obj.step_functions():
            out.extend(_regions_of(f))
        return out
    if isinstance(obj, (list, tuple)):
        out = []
        for o in obj:
            out.extend(_regions_of(o))
        return out
    raise TypeError(f"cannot extract regions from {obj!r}")


def window_for(objects: Sequence, prime: int | None = None) -> WindowSpec:
    """Smallest ``B(0, K)`` holding every support, cell and image cell of ``objects``."""
    objects = list(objects)
    if not objects:
        raise EmptyScenario("no objects to build a window for")
    regions = _regions_of(objects)
    if prime is None:
        prime = _prime_of(objects)
    if not regions:
        return WindowSpec.ball(Ball(0, 0, prime))
    K = max(origin_level(r.ball) for r in regions)
    return WindowSpec.ball(Ball(0, K, prime))


def _prime_of(objects) -> int:
    for o in objects:
        if hasattr(o, "prime"):
            return o.prime
        if isinstance(o, (list, tuple)) and o:
            return _prime_of(o)
    raise EmptyScenario("cannot infer the prime")


def sampling_resolution(objects: Sequence, guard: int = GUARD_DIGITS) -> int:
    """Finest level among all cells of ``objects`` minus ``guard`` digits."""
    regions = _regions_of(list(objects))
    levels = [r.finest_level() for r in regions]
    window = window_for(objects)
    levels.append(window.regions[0].level)
    return min(levels) - guard


def _poisson_counts(rng: np.random.Generator, mass: float, size: int) -> np.ndarray:
    # inverse CDF; the rational mass is converted to float here and nowhere else
    if mass == 0:
        return np.zeros(size, dtype=np.int64)
    return stats.poisson.ppf(rng.random(size), mass).astype(np.int64)


def sample_configuration(w: WindowSpec, rng: np.random.Generator, resolution: int) -> Configuration:
    """One draw from the Poisson measure restricted to the window."""
    mass = w.total_mass
    n = int(_poisson_counts(rng, float(mass), 1)[0])
    weights = np.array([float(r.measure / mass) for r in w.regions])
    pts = []
    for _ in range(n):
        i = int(rng.choice(len(w.regions), p=weights)) if len(w.regions) > 1 else 0
        pts.append(sample_uniform(w.regions[i], resolution, rng))
    return Configuration(tuple(pts), w.prime, w.regions, resolution)


def sample_configurations(w: WindowSpec, count: int, seed: int, resolution: int) -> list[Configuration]:
    rng = stream(seed)
    return [sample_configuration(w, rng, resolution) for _ in range(count)]


def pairing(f: StepFunction, gamma: Configuration):
    """``<f, gamma> = sum over points of f(x)``, with multiplicity."""
    return sum((f(x, gamma.resolution) for x in gamma.points), Fraction(0) if f.default == 0 else 0)


def product_over(phi: StepFunction, gamma: Configuration):
    out = Fraction(1)
    for x in gamma.points:
        out *= phi(x, gamma.resolution)
    return out


def push_configuration(g: AffineElement, gamma: Configuration) -> Configuration:
    """Image multiset ``{g(x) x : x in gamma}``; coinciding images keep their multiplicity."""
    res = gamma.resolution
    if res is not None:
        res += max(valuation(a, g.prime) for a in g.a.values())
    pts = tuple(g(x, gamma.resolution) for x in gamma.points)
    return Configuration(pts, gamma.prime, (), res)


def _check_mark(phi: StepFunction, name: str = "phi"):
    if phi.default != 1:
        raise ValueError(f"{name} must equal 1 away from a bounded set")
    if any(v < 0 for v in phi.values()):
        raise NegativeMark(f"{name} takes a negative value")


def laplace_exact(phi: StepFunction) -> tuple[Fraction, float]:
    """``E[prod phi(x)] = exp(integral of (phi - 1) dm)``: exact exponent and its exp."""
    _check_mark(phi)
    e = (phi - 1).integrate()
    return e, math.exp(e)


def laplace_exact_wrt(phi: StepFunction, rho: StepFunction) -> tuple[Fraction, float]:
    """Same functional under the Poisson measure with intensity ``rho * m``."""
    _check_mark(phi)
    _check_mark(rho, "rho")
    e = ((phi - 1) * rho).integrate()
    return e, math.exp(e)


# -- lattice engine ----------------------------------------------------------------------

@dataclass(frozen=True)
class Lattice:
    """Codes ``0 <= N < p**(K - r)`` for the points ``N * p**-K`` of ``B(0, K)`` at resolution ``r``."""

    window: Ball
    resolution: int

    def __post_init__(self):
        if self.window.center != 0:
            raise ValueError("lattice windows are centered at 0")
        if self.window.level < self.resolution:
            raise ResolutionError("window is finer than the resolution")
        if self.size > MAX_TABLE:
            raise ResolutionError(f"lattice of {self.size} cells is too large; coarsen the scenario")

    @classmethod
    def for_objects(cls, objects: Sequence, guard: int = GUARD_DIGITS) -> Lattice:
        w = window_for(objects)
        return cls(w.regions[0].ball, sampling_resolution(objects, guard))

    @property
    def prime(self) -> int:
        return self.window.prime

    @property
    def size(self) -> int:
        return self.prime ** (self.window.level - self.resolution)

    @property
    def cell_mass(self) -> Fraction:
        return Fraction(self.prime) ** self.resolution

    @property
    def mass(self) -> Fraction:
        return self.window.measure

    def point(self, code: int) -> Fraction:
        return Fraction(int(code)) * Fraction(self.prime) ** (-self.window.level)

    def code(self, x) -> int:
        x = to_scalar(x) * Fraction(self.prime) ** self.window.level
        if x.denominator != 1 or not 0 <= x.numerator < self.size:
            raise ValueError(f"{x} is not a lattice point")
        return x.numerator

    def cell(self, b: Ball) -> tuple[int, int] | None:
        """(offset, stride) of the codes inside ``b``; ``None`` if disjoint from the window."""
        if self.window.within(b):
            return (0, 1)
        if not b.within(self.window):
            return None
        if b.level < self.resolution:
            raise ResolutionError(f"{b!r} is finer than lattice resolution {self.resolution}")
        offset = b.center * Fraction(self.prime) ** self.window.level
        return int(offset), self.prime ** (self.window.level - b.level)

    def tabulate(self, f: StepFunction, exact: bool = False, transform=None) -> np.ndarray:
        """Values of ``f`` on every lattice point, coarse balls first so finer ones override."""
        conv = transform or ((lambda v: v) if exact else complex if _is_complex(f) else float)
        dtype = object if exact else (complex if _is_complex(f) else float)
        table = np.empty(self.size, dtype=dtype)
        table[:] = conv(f.default)
        for b, v in sorted(f.items(), key=lambda e: e[0].sort_key()):
            sl = self.cell(b)
            if sl is not None:
                table[sl[0]::sl[1]] = conv(v)
        return table

    def sample(self, n: int, rng: np.random.Generator, intensity: np.ndarray | None = None) -> LatticeSample:
        """``n`` Poisson configurations; ``intensity`` is a density table against Haar measure."""
        if intensity is None:
            counts = _poisson_counts(rng, float(self.mass), n)
            codes = rng.integers(0, self.size, size=int(counts.sum()))
        else:
            w = np.asarray(intensity, dtype=float) * float(self.cell_mass)
            total = float(w.sum())
            counts = _poisson_counts(rng, total, n)
            codes = rng.choice(self.size, size=int(counts.sum()), p=w / total) if total > 0 else np.zeros(0, int)
        return LatticeSample(self, counts, codes)

    def sample_lanes(self, n: int, seed: int, intensity=None, lanes: int = MC_LANES) -> list[LatticeSample]:
        """Fixed lane split of ``n`` draws; results do not depend on the worker count."""
        sizes = [n // lanes + (1 if i < n % lanes else 0) for i in range(lanes)]

        def run(i):
            return self.sample(sizes[i], stream(seed, i), intensity)

        with ThreadPoolExecutor(max_workers=worker_count()) as ex:
            return list(ex.map(run, range(lanes)))


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("AFFLAB_THREADS", "1")))
    except ValueError:
        return 1


def _is_complex(f: StepFunction) -> bool:
    return any(isinstance(v, complex) for v in f.values())


@dataclass
class LatticeSample:
    lattice: Lattice
    counts: np.ndarray
    codes: np.ndarray

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def owner(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.counts)

    def sums(self, table: np.ndarray) -> np.ndarray:
        """Per-configuration ``<f, gamma>`` for a float/complex table."""
        vals = table[self.codes]
        if np.iscomplexobj(vals):
            return (np.bincount(self.owner, weights=vals.real, minlength=self.n)
                    + 1j * np.bincount(self.owner, weights=vals.imag, minlength=self.n))
        return np.bincount(self.owner, weights=vals, minlength=self.n)

    def products(self, table: np.ndarray) -> np.ndarray:
        """Per-configuration ``prod phi(x)`` for a nonnegative float table."""
        vals = table[self.codes]
        zeros = np.bincount(self.owner, weights=(vals == 0).astype(float), minlength=self.n)
        with np.errstate(divide="ignore"):
            logs = np.where(vals > 0, np.log(np.where(vals > 0, vals, 1.0)), 0.0)
        out = np.exp(np.bincount(self.owner, weights=logs, minlength=self.n))
        out[zeros > 0] = 0.0
        return out

    def configurations(self) -> list[Configuration]:
        lat = self.lattice
        out, pos = [], 0
        for c in self.counts:
            pts = tuple(lat.point(x) for x in self.codes[pos:pos + c])
            out.append(Configuration(pts, lat.prime, (Region(lat.window),), lat.resolution))
            pos += c
        return out

    def exact_products(self, table: np.ndarray) -> list:
        """Exact per-configuration products from an object table."""
        out, pos = [], 0
        for c in self.counts:
            acc = Fraction(1)
            for x in self.codes[pos:pos + c]:
                acc *= table[x]
            out.append(acc)
            pos += c
        return out

    def exact_sums(self, table: np.ndarray) -> list:
        out, pos = [], 0
        for c in self.counts:
            out.append(sum((table[x] for x in self.codes[pos:pos + c]), Fraction(0)))
            pos += c
        return out


def concat_samples(parts: Iterable[LatticeSample]) -> LatticeSample:
    parts = list(parts)
    return LatticeSample(parts[0].lattice, np.concatenate([s.counts for s in parts]),
                         np.concatenate([s.codes for s in parts]))


def density_table(lattice: Lattice, g: AffineElement) -> np.ndarray:
    return lattice.tabulate(pushforward_density(g))


def mean_and_stderr(values: np.ndarray) -> tuple[complex | float, float]:
    n = len(values)
    mean = values.mean()
    if n < 2:
        return mean, 0.0
    return mean, float(np.sqrt(np.var(values, ddof=1) / n))
