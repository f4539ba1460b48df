"""Functions on configurations and the operators ``V_g``, ``U_g``.

A :class:`RepFunction` is

    F(gamma) = c * exp(shift) * prod phi(x) * prod sqrt(sigma(x)) * psi(<f_1,gamma>, ..., <f_n,gamma>)

with rational step marks ``phi, sigma`` (default 1) and ``psi`` from a small closed algebra
(sums of monomials times ``exp(i * sum t_j s_j)``).  ``sigma`` is carried squared so that
``|F|**2`` stays rational; it is where ``U_g`` puts the Radon-Nikodym factor.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .group import (
    AffineElement,
    inverse_motion,
    inverse_pointwise,
    is_bijective,
    mass_defect,
    NonBijectiveElement,
    pushforward_density,
)
from .poisson import (
    pairing,
    Configuration,
    Lattice,
    concat_samples,
    mean_and_stderr,
    product_over,
)
from .step import StepFunction, decode_value, encode_value, pullback
from .ultrametric import parse_rational, to_rational_string


class NotInExactClass(ValueError):
    pass


# -- psi ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    coeff: object = Fraction(1)
    powers: tuple[int, ...] = ()
    freqs: tuple[float, ...] = ()

    def padded(self, n: int) -> Term:
        return Term(self.coeff, self.powers + (0,) * (n - len(self.powers)),
                    self.freqs + (0.0,) * (n - len(self.freqs)))

    @property
    def oscillates(self) -> bool:
        return any(t != 0 for t in self.freqs)


@dataclass(frozen=True)
class Psi:
    """``sum coeff * prod s_j**e_j * exp(i * sum t_j s_j)`` over ``nslots`` arguments."""

    nslots: int = 0
    terms: tuple[Term, ...] = (Term(),)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(t.padded(self.nslots) for t in self.terms))

    @classmethod
    def one(cls) -> Psi:
        return cls(0, (Term(),))

    @classmethod
    def linear(cls, nslots: int, slot: int = 0) -> Psi:
        powers = tuple(1 if j == slot else 0 for j in range(nslots))
        return cls(nslots, (Term(Fraction(1), powers),))

    @classmethod
    def polynomial(cls, nslots: int, monomials: dict[tuple[int, ...], object]) -> Psi:
        return cls(nslots, tuple(Term(c, tuple(e)) for e, c in monomials.items()))

    @classmethod
    def characteristic(cls, freqs: Sequence[float]) -> Psi:
        return cls(len(freqs), (Term(Fraction(1), (), tuple(float(t) for t in freqs)),))

    @property
    def is_constant(self) -> bool:
        return all(not any(t.powers) and not t.oscillates for t in self.terms)

    @property
    def is_exact(self) -> bool:
        return all(not t.oscillates and isinstance(t.coeff, (int, Fraction)) for t in self.terms)

    def constant_value(self):
        return sum((t.coeff for t in self.terms), Fraction(0))

    def __call__(self, *s):
        out = 0
        for t in self.terms:
            v = t.coeff
            for x, e in zip(s, t.powers):
                if e:
                    v = v * x**e
            if t.oscillates:
                v = v * cmath.exp(1j * sum(float(tj) * float(x) for tj, x in zip(t.freqs, s)))
            out = out + v
        return out

    def vectorized(self, slots: list[np.ndarray], n: int) -> np.ndarray:
        out = np.zeros(n, dtype=complex)
        for t in self.terms:
            v = np.full(n, complex(t.coeff))
            for x, e in zip(slots, t.powers):
                if e:
                    v = v * x**e
            if t.oscillates:
                v = v * np.exp(1j * sum(tj * x for tj, x in zip(t.freqs, slots)))
            out += v
        return out

    def conj(self) -> Psi:
        return Psi(self.nslots, tuple(
            Term(t.coeff.conjugate() if isinstance(t.coeff, complex) else t.coeff, t.powers,
                 tuple(-f for f in t.freqs)) for t in self.terms))

    def times(self, other: Psi) -> Psi:
        """Product with ``other``'s slots appended after this one's."""
        n = self.nslots + other.nslots
        terms = []
        for t in self.terms:
            for u in other.terms:
                terms.append(Term(t.coeff * u.coeff, t.powers + u.powers, t.freqs + u.freqs))
        return Psi(n, tuple(terms))

    def to_json(self) -> dict:
        return {"nslots": self.nslots, "terms": [
            {"coeff": encode_value(t.coeff), "powers": list(t.powers), "freqs": list(t.freqs)}
            for t in self.terms]}

    @classmethod
    def from_json(cls, data: dict) -> Psi:
        return cls(int(data["nslots"]), tuple(
            Term(decode_value(t.get("coeff", "1/1")), tuple(t.get("powers", ())), tuple(t.get("freqs", ())))
            for t in data.get("terms", [{}])))


@dataclass(frozen=True)
class CallablePsi:
    """Arbitrary vectorized ``psi``; only usable by the Monte Carlo engine."""

    nslots: int
    fn: Callable

    is_constant = False
    is_exact = False

    def __call__(self, *s):
        return self.fn(*s)

    def vectorized(self, slots, n):
        return np.asarray(self.fn(*slots), dtype=complex) * np.ones(n)

    def conj(self):
        return CallablePsi(self.nslots, lambda *s: np.conj(self.fn(*s)))

    def times(self, other):
        k = self.nslots
        return CallablePsi(k + other.nslots, lambda *s: self(*s[:k]) * other(*s[k:]))


# -- RepFunction -------------------------------------------------------------------------

def _sqrt_rational(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if n * n == q.numerator and d * d == q.denominator:
        return Fraction(n, d)
    return None


@dataclass(frozen=True, eq=False)
class RepFunction:
    phi: StepFunction
    sigma: StepFunction
    slots: tuple[StepFunction, ...] = ()
    psi: Psi | CallablePsi = field(default_factory=Psi.one)
    prefactor: object = Fraction(1)
    shift: Fraction = Fraction(0)

    def __post_init__(self):
        if self.phi.default != 1 or self.sigma.default != 1:
            raise ValueError("multiplicative marks must default to 1")
        if any(f.default != 0 for f in self.slots):
            raise ValueError("one-particle functions must default to 0")
        if len(self.slots) != self.psi.nslots:
            raise ValueError(f"psi takes {self.psi.nslots} arguments, got {len(self.slots)} functions")

    @property
    def prime(self) -> int:
        return self.phi.prime

    @classmethod
    def multiplicative(cls, phi: StepFunction, prefactor=Fraction(1)) -> RepFunction:
        one = StepFunction.constant(phi.prime, Fraction(1))
        return cls(phi, one, (), Psi.one(), prefactor)

    @classmethod
    def cylinder(cls, fs: Sequence[StepFunction], psi: Psi | CallablePsi, prefactor=Fraction(1)) -> RepFunction:
        one = StepFunction.constant(fs[0].prime, Fraction(1))
        return cls(one, one, tuple(fs), psi, prefactor)

    @classmethod
    def constant(cls, prime: int, c=Fraction(1)) -> RepFunction:
        return cls.multiplicative(StepFunction.constant(prime, Fraction(1)), c)

    def step_functions(self) -> list[StepFunction]:
        return [self.phi, self.sigma, *self.slots]

    def conj(self) -> RepFunction:
        pre = self.prefactor.conjugate() if isinstance(self.prefactor, complex) else self.prefactor
        return replace(self, psi=self.psi.conj(), prefactor=pre)

    def __mul__(self, other: RepFunction) -> RepFunction:
        sigma = self.sigma * other.sigma
        phi = self.phi * other.phi
        roots = {v: _sqrt_rational(v) for v in sigma.values()}
        if all(r is not None for r in roots.values()):
            phi = phi * sigma.map(lambda v: roots[v])
            sigma = StepFunction.constant(self.prime, Fraction(1))
        return RepFunction(phi, sigma, self.slots + other.slots, self.psi.times(other.psi),
                           self.prefactor * other.prefactor, self.shift + other.shift)

    def abs2(self) -> RepFunction:
        """``|F|**2`` as a function of the same class."""
        return self * self.conj()

    # -- pointwise evaluation ---------------------------------------------------------

    def mark(self, gamma: Configuration):
        """``prod phi * prod sqrt(sigma)``; exact when the sigma product is a rational square."""
        m = product_over(self.phi, gamma)
        s = product_over(self.sigma, gamma)
        r = _sqrt_rational(s)
        return m * r if r is not None else float(m) * math.sqrt(s)

    def mark_squared(self, gamma: Configuration) -> Fraction:
        m = product_over(self.phi, gamma)
        return m * m * product_over(self.sigma, gamma)

    def _scale(self):
        return self.prefactor if self.shift == 0 else self.prefactor * math.exp(self.shift)

    def __call__(self, gamma: Configuration):
        args = [pairing(f, gamma) for f in self.slots]
        return self._scale() * self.mark(gamma) * self.psi(*args)

    def modulus_squared(self, gamma: Configuration):
        """``|F(gamma)|**2``, exact for rational prefactor, zero shift and exact psi."""
        args = [pairing(f, gamma) for f in self.slots]
        ps = self.psi(*args)
        ps2 = ps * ps.conjugate() if isinstance(ps, complex) else ps * ps
        pre = self.prefactor
        pre2 = pre * pre.conjugate() if isinstance(pre, complex) else pre * pre
        scale = pre2 if self.shift == 0 else pre2 * math.exp(2 * self.shift)
        return scale * self.mark_squared(gamma) * ps2

    # -- lattice evaluation -----------------------------------------------------------

    def lattice_values(self, sample) -> np.ndarray:
        lat = sample.lattice
        marks = sample.products(lat.tabulate(self.phi)) * np.sqrt(sample.products(lat.tabulate(self.sigma)))
        if self.slots:
            args = [sample.sums(lat.tabulate(f)) for f in self.slots]
            ps = self.psi.vectorized(args, sample.n)
        else:
            ps = self.psi.vectorized([], sample.n)
        vals = complex(self._scale()) * marks * ps
        if np.all(vals.imag == 0):
            return vals.real
        return vals

    def exact_modulus_squared(self, sample) -> list[Fraction]:
        """``|F|**2`` per sampled configuration by exact table lookup."""
        if not (self.psi.is_exact and self.shift == 0 and not isinstance(self.prefactor, (float, complex))):
            raise NotInExactClass("exact evaluation needs rational prefactor, zero shift and exact psi")
        lat = sample.lattice
        m = sample.exact_products(lat.tabulate(self.phi, exact=True))
        s = sample.exact_products(lat.tabulate(self.sigma, exact=True))
        if self.slots:
            args = [sample.exact_sums(lat.tabulate(f, exact=True)) for f in self.slots]
            ps = [self.psi(*a) for a in zip(*args)]
        else:
            ps = [self.psi()] * sample.n
        pre2 = self.prefactor * self.prefactor
        return [pre2 * mi * mi * si * q * q for mi, si, q in zip(m, s, ps)]

    def exact_values(self, sample) -> list:
        """``F`` per sampled configuration, exactly; needs rational ``sqrt(sigma)``."""
        if not (self.psi.is_exact and self.shift == 0 and not isinstance(self.prefactor, (float, complex))):
            raise NotInExactClass("exact evaluation needs rational prefactor, zero shift and exact psi")
        lat = sample.lattice
        m = sample.exact_products(lat.tabulate(effective_mark(self), exact=True))
        if self.slots:
            args = [sample.exact_sums(lat.tabulate(f, exact=True)) for f in self.slots]
            ps = [self.psi(*a) for a in zip(*args)]
        else:
            ps = [self.psi()] * sample.n
        return [self.prefactor * mi * q for mi, q in zip(m, ps)]

    def to_json(self) -> dict:
        if isinstance(self.psi, CallablePsi):
            raise TypeError("callable psi has no JSON form")
        return {
            "prime": self.prime,
            "prefactor": encode_value(self.prefactor),
            "shift": to_rational_string(self.shift),
            "multiplicative": self.phi.to_json(),
            "sqrt_multiplicative": self.sigma.to_json(),
            "cylinder": {"psi": self.psi.to_json(), "functions": [f.to_json() for f in self.slots]},
        }

    @classmethod
    def from_json(cls, data: dict) -> RepFunction:
        p = int(data["prime"])
        one = {"default": "1/1", "pieces": []}
        cyl = data.get("cylinder", {"psi": {"nslots": 0}, "functions": []})
        return cls(
            StepFunction.from_json(data.get("multiplicative", one), p),
            StepFunction.from_json(data.get("sqrt_multiplicative", one), p),
            tuple(StepFunction.from_json(f, p) for f in cyl.get("functions", [])),
            Psi.from_json(cyl.get("psi", {"nslots": 0})),
            decode_value(data.get("prefactor", "1/1")),
            parse_rational(data.get("shift", "0/1")),
        )


def evaluate(F: RepFunction, gamma: Configuration):
    return F(gamma)


# -- operators ---------------------------------------------------------------------------

def apply_V(g: AffineElement, F: RepFunction) -> RepFunction:
    """``(V_g F)(gamma)``: every one-particle ingredient is pulled back by ``g``."""
    return replace(
        F,
        phi=pullback(F.phi, g),
        sigma=pullback(F.sigma, g),
        slots=tuple(pullback(f, g) for f in F.slots),
    )


def group_inverse(g: AffineElement, mode: str = "motion") -> AffineElement:
    if mode == "motion":
        return inverse_motion(g)
    if mode == "pointwise":
        return inverse_pointwise(g)
    raise ValueError(f"unknown inverse mode {mode!r}")


def apply_U(g: AffineElement, F: RepFunction, mode: str = "motion") -> RepFunction:
    """``(U_g F)(gamma) = R(g^-1, gamma)**(1/2) (V_g F)(gamma)``.

    ``mode="motion"`` (default) needs a bijective point map and raises
    :class:`NonBijectiveElement` otherwise; ``mode="pointwise"`` uses ``(1/a, -b/a)``.
    """
    ginv = group_inverse(g, mode)
    rho = pushforward_density(ginv)
    V = apply_V(g, F)
    return replace(V, sigma=V.sigma * rho, shift=V.shift + mass_defect(ginv) / 2)


@dataclass(frozen=True)
class RadonNikodym:
    """``R(g, gamma) = product * exp(exponent)``."""

    product: Fraction
    exponent: Fraction

    @property
    def exact(self) -> Fraction | None:
        return self.product if self.exponent == 0 else None

    @property
    def value(self) -> float:
        return float(self.product) * math.exp(self.exponent)


def radon_nikodym(g: AffineElement, gamma: Configuration) -> RadonNikodym:
    rho = pushforward_density(g)
    return RadonNikodym(product_over(rho, gamma), mass_defect(g))


def rn_function(g: AffineElement) -> RepFunction:
    """``gamma -> R(g, gamma)`` as a multiplicative function."""
    return RepFunction(pushforward_density(g), StepFunction.constant(g.prime, Fraction(1)),
                       shift=mass_defect(g))


# -- expectations ------------------------------------------------------------------------

@dataclass
class ExpectationResult:
    kind: str
    value: complex | float
    exponent: Fraction | None = None
    stderr: float = 0.0
    n: int = 0
    seed: int | None = None

    def to_json(self) -> dict:
        v = self.value
        return {
            "kind": self.kind,
            "exponent": None if self.exponent is None else to_rational_string(self.exponent),
            "value": [v.real, v.imag] if isinstance(v, complex) else float(v),
            "stderr": self.stderr,
            "n": self.n,
            "seed": self.seed,
        }


def effective_mark(F: RepFunction) -> StepFunction:
    """``phi * sqrt(sigma)`` when every sigma value is a rational square."""
    roots = {v: _sqrt_rational(v) for v in F.sigma.values()}
    if any(r is None for r in roots.values()):
        raise NotInExactClass("sqrt of the Radon-Nikodym mark is irrational")
    return F.phi * F.sigma.map(lambda v: roots[v])


def expectation_exact(F: RepFunction) -> ExpectationResult:
    """``E[F] = c * exp(shift + integral of (phi - 1) dm)`` for purely multiplicative ``F``."""
    if not F.psi.is_constant:
        raise NotInExactClass("psi is not constant; use expectation_mc")
    mark = effective_mark(F)
    if any(v < 0 for v in mark.values()):
        raise NotInExactClass("negative multiplicative mark")
    exponent = F.shift + (mark - 1).integrate()
    c = F.prefactor * F.psi.constant_value()
    return ExpectationResult("exact", c * math.exp(exponent), exponent)


def expectation_closed_form(F: RepFunction) -> complex:
    """Float closed form for ``psi`` built from oscillating exponentials (no powers)."""
    if any(any(t.powers) for t in F.psi.terms):
        raise NotInExactClass("closed form only for exponential psi")
    mark = F.phi.map(float) * F.sigma.map(lambda v: math.sqrt(v))
    total = 0j
    for t in F.psi.terms:
        osc = StepFunction.constant(F.prime, 0.0)
        for tj, f in zip(t.freqs, F.slots):
            if tj:
                osc = osc + f.map(lambda v, tj=tj: tj * float(v))
        integrand = (mark * osc.map(lambda u: cmath.exp(1j * u))).map(lambda v: complex(v) - 1)
        integral = sum((r.measure * v for r, v in integrand.pieces()), 0j)
        if integrand.default != 0:
            raise NotInExactClass("integrand does not vanish far away")
        total += complex(t.coeff) * cmath.exp(integral)
    return complex(F.prefactor) * math.exp(F.shift) * total


def expectation_mc(F: RepFunction, n: int, seed: int, lattice: Lattice | None = None,
                   intensity: StepFunction | None = None) -> ExpectationResult:
    """Monte Carlo mean of ``F`` over ``n`` Poisson configurations (intensity ``m`` or ``rho m``)."""
    objs = [F] + ([intensity] if intensity is not None else [])
    lat = lattice or Lattice.for_objects(objs)
    table = lat.tabulate(intensity) if intensity is not None else None
    sample = concat_samples(lat.sample_lanes(n, seed, table))
    vals = F.lattice_values(sample)
    mean, se = mean_and_stderr(vals)
    return ExpectationResult("mc", mean, None, se, n, seed)


def inner_product(F: RepFunction, G: RepFunction, mode: str = "exact", n: int = 10**5, seed: int = 0):
    """``E[F conj(G)]``."""
    H = F * G.conj()
    if mode == "exact":
        return expectation_exact(H)
    if mode == "mc":
        return expectation_mc(H, n, seed)
    raise ValueError(f"unknown mode {mode!r}")


__all__ = [
    "Psi", "Term", "CallablePsi", "RepFunction", "apply_V", "apply_U", "radon_nikodym", "rn_function",
    "RadonNikodym", "expectation_exact", "expectation_mc", "expectation_closed_form", "inner_product",
    "ExpectationResult", "NotInExactClass", "NonBijectiveElement", "is_bijective", "evaluate",
]
