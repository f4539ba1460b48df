"""Elements ``g = (a, b)`` of the affine group with step coefficients.

``g`` moves a point by ``x -> (x + b(x)) / a(x)``.  Two products are provided:

* :func:`product_pointwise` multiplies coefficient pairs at the same argument,
  ``(a1 a2, b1 + a1 b2)``; this is a group law on coefficient pairs.
* :func:`product_motion` evaluates the outer factor at the moved point, so that
  ``act_point(product_motion(g2, g1), x) == act_point(g2, act_point(g1, x))``.

For constant coefficients the two agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

from .step import IDENTITY_PAIR, StepFunction, compose_affine
from .ultrametric import Ball, Region, check_prime, norm, to_scalar
from .ultrametric import to_rational_string as q


class NonBijectiveElement(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AffineElement:
    a: StepFunction
    b: StepFunction

    def __post_init__(self):
        if self.a.prime != self.b.prime:
            raise ValueError("coefficients over different primes")
        if self.a.default != 1 or self.b.default != 0:
            raise ValueError("coefficients must be trivial far away: a -> 1, b -> 0")
        if any(v == 0 for v in self.a.values()):
            raise ValueError("a(x) must be invertible everywhere")

    @property
    def prime(self) -> int:
        return self.a.prime

    @cached_property
    def coefficients(self) -> StepFunction:
        """The pair ``(a, b)`` as one step function."""
        return self.a.combine(self.b, lambda u, v: (u, v))

    @classmethod
    def from_pairs(cls, pairs: StepFunction) -> AffineElement:
        return cls(pairs.map(lambda t: t[0]), pairs.map(lambda t: t[1]))

    @classmethod
    def from_pieces(cls, prime: int, pieces) -> AffineElement:
        """Element with constant ``(a, b)`` on each of the given disjoint regions."""
        pairs = StepFunction.from_regions(
            prime, [(r, (to_scalar(a), to_scalar(b))) for r, a, b in pieces], IDENTITY_PAIR
        )
        return cls.from_pairs(pairs)

    def cells(self) -> list[tuple[Region, Fraction, Fraction]]:
        """Regions where the coefficients differ from the identity, with their constants."""
        return [(r, a, b) for r, (a, b) in self.coefficients.pieces() if (a, b) != IDENTITY_PAIR]

    def section(self, x, resolution: int | None = None) -> tuple[Fraction, Fraction]:
        return self.coefficients(x, resolution)

    def __call__(self, x, resolution: int | None = None) -> Fraction:
        a, b = self.section(x, resolution)
        return (to_scalar(x) + b) / a

    def __eq__(self, other):
        if not isinstance(other, AffineElement):
            return NotImplemented
        return self.a == other.a and self.b == other.b

    __hash__ = None

    def __repr__(self):
        cells = ", ".join(f"{r.ball!r}{'*' if r.exclusions else ''}: ({a}, {b})" for r, a, b in self.cells())
        return f"AffineElement(p={self.prime}, [{cells}])"

    def regions(self) -> list[Region]:
        """All cells and their images, for window and resolution bookkeeping."""
        out = []
        for r, a, b in self.cells():
            out.append(r)
            out.append(r.affine_image(a, b))
        return out

    def to_json(self) -> dict:
        return {"prime": self.prime, "a": self.a.to_json(), "b": self.b.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> AffineElement:
        p = int(data["prime"])
        a = StepFunction.from_json(data.get("a", {"default": "1/1", "pieces": []}), p)
        b = StepFunction.from_json(data.get("b", {"default": "0/1", "pieces": []}), p)
        return cls(a, b)


# -- constructors ----------------------------------------------------------------------

def identity(prime: int = 3) -> AffineElement:
    check_prime(prime)
    return AffineElement(StepFunction.constant(prime, Fraction(1)), StepFunction.constant(prime, Fraction(0)))


def translation(region: Ball | Region, h) -> AffineElement:
    """``(1, h 1_B)``: shifts the points of ``B`` by ``h``."""
    r = region if isinstance(region, Region) else Region(region)
    return AffineElement.from_pieces(r.prime, [(r, 1, h)])


def scaling(region: Ball | Region, a, b=0) -> AffineElement:
    r = region if isinstance(region, Region) else Region(region)
    return AffineElement.from_pieces(r.prime, [(r, a, b)])


def swap(b1: Ball, b2: Ball) -> AffineElement:
    """Exchanges two disjoint balls of equal level by translation."""
    if b1.level != b2.level or b1.within(b2) or b2.within(b1):
        raise ValueError("swap needs disjoint balls of the same level")
    d = b2.center - b1.center
    return AffineElement.from_pieces(b1.prime, [(Region(b1), 1, d), (Region(b2), 1, -d)])


# -- group operations ------------------------------------------------------------------

def section(g: AffineElement, x, resolution: int | None = None):
    return g.section(x, resolution)


def act_point(g: AffineElement, x, resolution: int | None = None) -> Fraction:
    return g(x, resolution)


def _pair_product(outer, inner):
    a2, b2 = outer
    a1, b1 = inner
    return (a1 * a2, b1 + a1 * b2)


def product_pointwise(g2: AffineElement, g1: AffineElement) -> AffineElement:
    """``g2 g1 = (a1 a2, b1 + a1 b2)``, all evaluated at the same argument."""
    return AffineElement.from_pairs(g2.coefficients.combine(g1.coefficients, _pair_product))


def product_motion(g2: AffineElement, g1: AffineElement) -> AffineElement:
    """Element whose point map is ``g2`` after ``g1``."""
    moved = compose_affine(g2.coefficients, g1.coefficients)
    return AffineElement.from_pairs(moved.combine(g1.coefficients, _pair_product))


def inverse_pointwise(g: AffineElement) -> AffineElement:
    """``(1/a, -b/a)`` pointwise; the inverse for :func:`product_pointwise`."""
    return AffineElement.from_pairs(g.coefficients.map(lambda t: (1 / t[0], -t[1] / t[0])))


@dataclass
class BijectivityCertificate:
    verdict: bool
    non_trivial_pieces: list = field(default_factory=list)
    images: list = field(default_factory=list)
    witness: dict | None = None

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "non_trivial_pieces": [
                {"region": r.to_json(), "a": q(a), "b": q(b)} for r, a, b in self.non_trivial_pieces
            ],
            "images": [c.to_json() for c in self.images],
            "witness": self.witness,
        }


def is_bijective(g: AffineElement) -> BijectivityCertificate:
    """Exact check that the images of the non-trivial cells tile the union of those cells."""
    p = g.prime
    cells = g.cells()
    images = [r.affine_image(a, b) for r, a, b in cells]
    zero = StepFunction.constant(p, 0)
    covered = zero
    for c in images:
        covered = covered + StepFunction.indicator(c, 1, 0)
    source = StepFunction.from_regions(p, [(r, 1) for r, _, _ in cells], 0)
    mismatch = covered.combine(source, lambda u, v: (u, v))
    # report overlaps first, then images leaving the support, then holes
    bad = [(0 if img >= 2 else 1 if img > src else 2, region, img)
           for region, (img, src) in mismatch.pieces() if img != src]
    if not bad:
        return BijectivityCertificate(True, cells, images, None)
    rank, region, img = min(bad, key=lambda t: t[0])
    x = region.representative()
    if rank == 0:
        hits = [i for i, c in enumerate(images) if c.contains(x)]
        witness = {"kind": "overlapping-images", "point": q(x), "cells": hits[:2], "region": region.to_json()}
    elif rank == 1:
        witness = {"kind": "image-outside-support", "point": q(x), "region": region.to_json()}
    else:
        witness = {"kind": "uncovered", "point": q(x), "region": region.to_json()}
    return BijectivityCertificate(False, cells, images, witness)


def inverse_motion(g: AffineElement) -> AffineElement:
    """Inverse point map: ``(1/a_k, -b_k/a_k)`` on each image cell ``C_k``."""
    cert = is_bijective(g)
    if not cert.verdict:
        raise NonBijectiveElement(f"point map of {g!r} is not a bijection: {cert.witness}")
    pieces = [(c, 1 / a, -b / a) for (r, a, b), c in zip(cert.non_trivial_pieces, cert.images)]
    return AffineElement.from_pieces(g.prime, pieces)


def pushforward_density(g: AffineElement) -> StepFunction:
    """Density of ``g^* m`` against Haar measure; overlapping image cells add up."""
    p = g.prime
    rho = StepFunction.constant(p, Fraction(1))
    for r, a, b in g.cells():
        rho = rho + StepFunction.indicator(r.affine_image(a, b), norm(a, p), Fraction(0))
        rho = rho - StepFunction.indicator(r, Fraction(1), Fraction(0))
    return rho


def mass_defect(g: AffineElement) -> Fraction:
    """``integral of (1 - rho_g) dm``."""
    return (1 - pushforward_density(g)).integrate()


def rn_integrability(g: AffineElement) -> Fraction:
    """``integral of |rho_g - 1| dm``."""
    return (pushforward_density(g) - 1).map(abs).integrate()
