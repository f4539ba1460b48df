"""Brute-force reference implementations used as test oracles.

Nothing here touches the package's normalization, combination or integration code: step
functions are evaluated from raw (center, level, value) lists and integrals are finite sums
over a lattice of cell representatives.
"""

from fractions import Fraction


def val(x, p):
    x = Fraction(x)
    if x == 0:
        return float("inf")
    v, n, d = 0, x.numerator, x.denominator
    while n % p == 0:
        n //= p
        v += 1
    while d % p == 0:
        d //= p
        v -= 1
    return v


def in_ball(x, center, level, p):
    return val(Fraction(x) - Fraction(center), p) >= -level


def naive_step(items, default, p):
    """Finest containing ball wins; ``items`` is [(center, level, value), ...]."""

    def f(x):
        best = None
        for c, k, v in items:
            if in_ball(x, c, k, p) and (best is None or k < best[0]):
                best = (k, v)
        return default if best is None else best[1]

    return f


def cells(window_level, resolution, p):
    """(representative, mass) for every level-``resolution`` cell of B(0, window_level)."""
    base = Fraction(p) ** (-window_level)
    mass = Fraction(p) ** resolution
    return [(n * base, mass) for n in range(p ** (window_level - resolution))]


def brute_integral(fn, window_level, resolution, p):
    return sum((fn(x) * m for x, m in cells(window_level, resolution, p)), Fraction(0))
