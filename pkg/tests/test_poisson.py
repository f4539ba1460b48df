import math
from fractions import Fraction

import numpy as np
import pytest

from afflab import generators as gen
from afflab.group import identity, pushforward_density, scaling, swap, translation
from afflab.poisson import (
    Configuration,
    EmptyScenario,
    Lattice,
    NegativeMark,
    WindowSpec,
    concat_samples,
    laplace_exact,
    laplace_exact_wrt,
    mean_and_stderr,
    pairing,
    product_over,
    push_configuration,
    sample_configurations,
    window_for,
)
from afflab.step import StepFunction, pullback
from afflab.ultrametric import Ball, Region

Q = Fraction


def conf(*pts, p=3, res=-4):
    return Configuration(tuple(Q(x) for x in pts), p, (), res)


def test_window_examples():
    f = StepFunction.indicator(Ball(0, 0))
    assert window_for([f]).regions[0].ball == Ball(0, 0)
    assert window_for([f, scaling(Ball(0, 0), 3)]).regions[0].ball == Ball(0, 1)
    assert window_for([StepFunction.indicator(Ball(Q(1, 9), -3))]).regions[0].ball == Ball(0, 2)
    with pytest.raises(EmptyScenario):
        window_for([])


def test_window_spec_validation():
    with pytest.raises(ValueError):
        WindowSpec((Region(Ball(0, 0)), Region(Ball(0, -1))))
    assert WindowSpec((Region(Ball(0, -1)), Region(Ball(1, -1)))).total_mass == Q(2, 3)


def test_pairing_examples():
    f = StepFunction.indicator(Ball(0, 0))
    assert pairing(f, conf()) == 0
    assert pairing(f, conf(0, 9, Q(1, 3))) == 2


def test_push_examples():
    g = translation(Ball(0, -1), 1)
    assert push_configuration(g, conf(0, 1)).points == (1, 1)
    assert push_configuration(swap(Ball(0, -1), Ball(1, -1)), conf(0, 1)).points == (0, 1)
    gamma = conf(0, Q(1, 3), 2)
    assert push_configuration(identity(3), gamma).points == gamma.points


@pytest.mark.parametrize("p", [2, 3, 5])
def test_pairing_transport(p):
    rng = gen.rng_for(1, "transport", p)
    pop = gen.element_population(rng, p, 20)
    for (_, g), gamma in zip(pop, sample_configurations(WindowSpec.ball(Ball(0, 1, p)), 20, 3, -3)):
        f = gen.random_step(rng, p)
        assert pairing(f, push_configuration(g, gamma)) == pairing(pullback(f, g), gamma)


def test_laplace_examples():
    phi = StepFunction.indicator(Ball(0, 0), 2, 1)
    assert laplace_exact(phi) == (1, math.e)
    assert laplace_exact(StepFunction.constant(3, Q(1)))[0] == 0
    assert laplace_exact(StepFunction.indicator(Ball(0, 0), 0, 1))[0] == -1
    rho = pushforward_density(scaling(Ball(0, 0), 3))
    assert laplace_exact_wrt(phi, rho)[0] == Q(1, 3)
    assert laplace_exact_wrt(phi, StepFunction.constant(3, Q(1)))[0] == 1
    shifted = pushforward_density(translation(Ball(0, -1), 1))
    assert laplace_exact_wrt(StepFunction.indicator(Ball(0, -1), 5, 1), shifted)[0] == 0
    with pytest.raises(NegativeMark):
        laplace_exact(StepFunction.indicator(Ball(0, 0), -1, 1))


def test_product_over():
    phi = StepFunction.indicator(Ball(0, 0), 2, 1)
    assert product_over(phi, conf(0, Q(1, 3))) == 2


@pytest.mark.parametrize("p", [2, 3, 5])
def test_tabulate_matches_evaluate(p):
    rng = gen.rng_for(2, "table", p)
    for _ in range(20):
        f = gen.random_step(rng, p)
        lat = Lattice.for_objects([f])
        table = lat.tabulate(f, exact=True)
        assert all(table[c] == f(lat.point(c)) for c in range(lat.size))


def test_lattice_codes():
    lat = Lattice(Ball(0, 1), -2)
    assert lat.size == 27
    assert lat.point(lat.code(Q(7, 3))) == Q(7, 3)
    with pytest.raises(ValueError):
        lat.code(Q(1, 27))


def test_sample_sums_and_products_match_exact():
    p = 3
    rng = gen.rng_for(3, "sums", p)
    f, phi = gen.random_step(rng, p), gen.random_mark(rng, p)
    lat = Lattice.for_objects([f, phi])
    s = concat_samples(lat.sample_lanes(500, 9))
    confs = s.configurations()
    assert np.allclose(s.sums(lat.tabulate(f)), [float(pairing(f, g)) for g in confs])
    assert np.allclose(s.products(lat.tabulate(phi)), [float(product_over(phi, g)) for g in confs])
    assert s.exact_products(lat.tabulate(phi, exact=True)) == [product_over(phi, g) for g in confs]


def test_mean_count_and_pair_correlation():
    n = 100_000
    lat = Lattice(Ball(0, 0), -3)
    s = concat_samples(lat.sample_lanes(n, 17))
    mean, se = mean_and_stderr(s.counts.astype(float))
    assert abs(mean - 1) <= 4 * math.sqrt(1 / n)
    a = s.sums(lat.tabulate(StepFunction.indicator(Ball(0, -1))))
    b = s.sums(lat.tabulate(StepFunction.indicator(Ball(2, -2))))
    mean, se = mean_and_stderr(a * b)
    assert abs(mean - 1 / 27) <= 4 * se


def test_intensity_sampling_mean():
    n = 100_000
    g = scaling(Ball(0, 0), 3)
    lat = Lattice.for_objects([g])
    rho = lat.tabulate(pushforward_density(g))
    s = concat_samples(lat.sample_lanes(n, 4, rho))
    inner = s.sums(lat.tabulate(StepFunction.indicator(Ball(0, 0))))
    mean, _ = mean_and_stderr(inner)
    # the image intensity puts mass 1/3 on B(0,0)
    assert abs(mean - 1 / 3) <= 4 * math.sqrt((1 / 3) / n)


def test_determinism_across_worker_counts(monkeypatch):
    lat = Lattice(Ball(0, 1, 5), -2)
    monkeypatch.setenv("AFFLAB_THREADS", "1")
    a = concat_samples(lat.sample_lanes(5000, 21))
    monkeypatch.setenv("AFFLAB_THREADS", "4")
    b = concat_samples(lat.sample_lanes(5000, 21))
    assert np.array_equal(a.counts, b.counts) and np.array_equal(a.codes, b.codes)


def test_sample_configurations_reproducible():
    w = WindowSpec.ball(Ball(0, 1))
    first = sample_configurations(w, 30, 7, -1)
    assert first == sample_configurations(w, 30, 7, -1)
    assert all(x in Ball(0, 1) for g in first for x in g.points)
