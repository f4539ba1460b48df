import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from afflab.ultrametric import (
    INF,
    Ball,
    Region,
    Relation,
    ResolutionError,
    affine_image,
    check_prime,
    hull,
    measure,
    norm,
    parse_rational,
    relate,
    sample_uniform,
    split,
    stream,
    to_rational_string,
    truncate,
    valuation,
)

from oracles import in_ball, val

primes = st.sampled_from([2, 3, 5, 7])
nonzero = st.fractions(max_denominator=10**4).filter(lambda x: x != 0)


def test_valuation_examples():
    assert valuation(9, 3) == 2
    assert valuation(Fraction(1, 3), 3) == -1
    assert valuation(0, 3) == INF


@given(nonzero, primes)
def test_valuation_matches_oracle(x, p):
    assert valuation(x, p) == val(x, p)
    assert norm(x, p) == Fraction(p) ** (-val(x, p))


@given(nonzero, nonzero, primes)
def test_valuation_is_multiplicative_and_ultrametric(x, y, p):
    assert valuation(x * y, p) == valuation(x, p) + valuation(y, p)
    if x + y != 0:
        assert valuation(x + y, p) >= min(valuation(x, p), valuation(y, p))


def test_prime_validation():
    for bad in (0, 1, 4, 9, -3):
        with pytest.raises(ValueError):
            check_prime(bad)
    with pytest.raises(ValueError):
        Ball(0, 0, 6)


def test_floats_rejected():
    with pytest.raises(TypeError):
        valuation(0.5, 3)


def test_rational_strings_round_trip():
    assert to_rational_string(Fraction(2)) == "2/1"
    assert parse_rational("0") == 0
    assert parse_rational("-7/3") == Fraction(-7, 3)


@given(st.fractions(max_denominator=500), st.integers(-4, 4), primes)
def test_truncate_keeps_ball(x, level, p):
    c = truncate(x, p, level)
    assert in_ball(x, c, level, p)
    assert truncate(c, p, level) == c


def test_relate_examples():
    assert relate(Ball(0, -1), Ball(1, -1)) is Relation.DISJOINT
    assert relate(Ball(0, -1), Ball(0, 0)) is Relation.SUBSET
    assert relate(Ball(0, 0), Ball(0, -1)) is Relation.SUPERSET
    assert relate(Ball(0, 0), Ball(5, 0)) is Relation.EQUAL


@settings(max_examples=200)
@given(st.integers(0, 80), st.integers(-2, 1), st.integers(0, 80), st.integers(-2, 1), primes,
       st.lists(st.integers(-200, 200), min_size=20, max_size=20))
def test_relate_agrees_with_membership(c1, k1, c2, k2, p, probes):
    b1, b2 = Ball(Fraction(c1, 9), k1, p), Ball(Fraction(c2, 9), k2, p)
    r = relate(b1, b2)
    pts = [Fraction(n, p**2) for n in probes] + [b1.center, b2.center]
    for x in pts:
        m1, m2 = in_ball(x, b1.center, k1, p), in_ball(x, b2.center, k2, p)
        if r is Relation.DISJOINT:
            assert not (m1 and m2)
        elif r is Relation.SUBSET:
            assert m2 or not m1
        elif r is Relation.EQUAL:
            assert m1 == m2
    if r is not Relation.DISJOINT:
        assert (k1 <= k2) == (r in (Relation.SUBSET, Relation.EQUAL))


def test_split_examples():
    assert split(Ball(0, 0, 3)) == [Ball(0, -1, 3), Ball(1, -1, 3), Ball(2, -1, 3)]
    assert split(Ball(0, 0, 2)) == [Ball(0, -1, 2), Ball(1, -1, 2)]
    for x in (0, 1, 2, Fraction(1, 2)):
        hits = [b for b in split(Ball(0, 0, 3)) if x in b]
        assert len(hits) == (1 if val(x, 3) >= 0 else 0)


@given(st.integers(-3, 3), primes)
def test_children_measures_sum(level, p):
    b = Ball(0, level, p)
    assert sum(c.measure for c in b.split()) == b.measure == Fraction(p) ** level


def test_measure_examples():
    assert measure(Ball(0, 0)) == 1
    assert measure(Ball(0, 2)) == 9
    assert measure(Region(Ball(0, 0), (Ball(0, -1),))) == Fraction(2, 3)


def test_region_validation():
    with pytest.raises(ValueError):
        Region(Ball(0, 0), (Ball(0, 0),))
    with pytest.raises(ValueError):
        Region(Ball(0, 0), (Ball(0, -1), Ball(0, -2)))
    with pytest.raises(ValueError):
        Region(Ball(0, 0), (Ball(Fraction(1, 3), -1),))


def test_region_membership_and_representative():
    r = Region(Ball(0, 0), (Ball(0, -1), Ball(1, -1)))
    x = r.representative()
    assert x in r and in_ball(x, 2, -1, 3)
    assert 3 not in r and 4 not in r


def test_affine_image_examples():
    assert affine_image(Ball(0, 0), 3, 0) == Ball(0, 1)
    assert affine_image(Ball(0, -1), 1, 1) == Ball(1, -1)
    assert affine_image(Ball(2, -1), 1, 0) == Ball(2, -1)


@settings(max_examples=100)
@given(st.integers(0, 26), st.integers(-2, 1), st.sampled_from([Fraction(3), Fraction(1, 3), Fraction(2), Fraction(-5, 7)]),
       st.fractions(max_denominator=9, min_value=-5, max_value=5), st.integers(-50, 50))
def test_affine_image_membership(c, k, a, b, n):
    B = Ball(c, k)
    x = B.center + n * Fraction(3) ** (-k)
    assert x in B
    assert (x + b) / a in affine_image(B, a, b)


def test_hull():
    assert hull([Ball(0, -1), Ball(1, -1)]) == Ball(0, 0)
    assert hull([Ball(0, -2), Ball(Fraction(1, 3), -2)]) == Ball(0, 1)
    assert hull([Ball(4, -1)]) == Ball(4, -1)


def test_contains_resolution_guard():
    with pytest.raises(ResolutionError):
        Ball(0, -3).contains(0, resolution=-2)


def test_sampler_proportion_in_subball():
    rng = stream(11)
    n = 100_000
    pts = sample_uniform(Ball(0, 0, 3), -4, rng, size=n)
    hits = sum(1 for x in pts if val(x, 3) >= 1)
    sd = math.sqrt(n * (1 / 3) * (2 / 3))
    assert abs(hits - n / 3) <= 4 * sd


def test_sampler_respects_exclusions():
    rng = stream(3)
    pts = sample_uniform(Region(Ball(0, 0), (Ball(0, -1),)), -3, rng, size=2000)
    assert all(x.numerator % 3 != 0 for x in pts)


def test_sampler_determinism_and_guard():
    a = sample_uniform(Ball(0, 1), -2, stream(5), size=50)
    b = sample_uniform(Ball(0, 1), -2, stream(5), size=50)
    assert a == b
    with pytest.raises(ResolutionError):
        sample_uniform(Ball(0, -3), -2, stream(5))


def test_ball_json_round_trip():
    b = Ball(Fraction(7, 3), -1, 5)
    assert Ball.from_json(b.to_json(), 5) == b
    r = Region(Ball(0, 0), (Ball(1, -1),))
    assert Region.from_json(r.to_json(), 3) == r
