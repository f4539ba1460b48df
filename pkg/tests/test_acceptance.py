"""Acceptance criteria, one test per criterion at the stated counts and tolerances.

Each test records a one-line verdict; the lines are printed at the end of the pytest run
(see ``conftest.py``) and directly when this file is executed as a script.
"""

import time
from contextlib import contextmanager
from fractions import Fraction

import pytest

from afflab import generators as gen
from afflab import lab
from afflab.group import is_bijective
from afflab.representation import RepFunction
from afflab.step import StepFunction
from afflab.ultrametric import Ball, Region

PRIMES = (2, 3, 5)
N_MC = 100_000
SEED = 20240601
RESULTS: list[str] = []


@contextmanager
def criterion(num, title, budget=None):
    start = time.perf_counter()
    info = {}
    try:
        yield info
    except BaseException as e:
        elapsed = time.perf_counter() - start
        RESULTS.append(f"FAIL  criterion {num:<3} {title} ({elapsed:.1f}s): {str(e).splitlines()[0][:160]}")
        raise
    elapsed = time.perf_counter() - start
    info["elapsed"] = elapsed
    if budget is not None and elapsed > budget:
        RESULTS.append(f"FAIL  criterion {num:<3} {title}: runtime {elapsed:.1f}s over {budget}s")
        raise AssertionError(f"runtime {elapsed:.1f}s exceeds {budget}s")
    RESULTS.append(f"PASS  criterion {num:<3} {title} ({info.get('detail', '')}; {elapsed:.1f}s)")


def _failures(records):
    return [r for r in records if r.outcome != lab.PASS]


@pytest.fixture(scope="module")
def population():
    out = {}
    for p in PRIMES:
        rng = gen.rng_for(SEED, "acceptance", p)
        elems = gen.element_population(rng, p, 100)
        fs = [[gen.random_step(rng, p) for _ in range(5)] for _ in elems]
        out[p] = (elems, fs)
    return out


TIMES = {}


def test_criterion_01_change_of_variables(population):
    with criterion(1, "change of variables", budget=30) as c:
        records, kinds = [], {True: 0, False: 0}
        for p in PRIMES:
            elems, fs = population[p]
            for (_, g), flist in zip(elems, fs):
                kinds[is_bijective(g).verdict] += 1
                records += [lab.check_change_of_variables(g, f) for f in flist]
        assert kinds[True] and kinds[False], "population must mix bijective and non-bijective elements"
        bad = _failures(records)
        assert not bad, f"{len(bad)} unequal integrals, first {bad[0].certificate}"
        c["detail"] = f"{len(records)} exact equalities, {kinds[True]} bijective / {kinds[False]} not"
    TIMES[1] = c["elapsed"]


def test_criterion_02_mass_defect(population):
    with criterion(2, "mass defect vanishes") as c:
        records = [lab.check_mass_defect(g) for p in PRIMES for _, g in population[p][0]]
        bad = _failures(records)
        assert not bad, f"nonzero mass defect {bad[0].certificate}"
        c["detail"] = f"{len(records)} elements"
    # runs inside criterion 1's budget
    assert TIMES.get(1, 0) + c["elapsed"] <= 30, "criteria 1 and 2 together exceed 30s"


def test_criterion_03_pushforward_lemma():
    with criterion(3, "pushforward lemma (exact + paired MC)", budget=120) as c:
        records = []
        for p in PRIMES:
            rng = gen.rng_for(SEED, "lemma-v", p)
            for _, g in gen.element_population(rng, p, 100):
                records.append(lab.check_pushforward_lemma(g, gen.random_mark(rng, p)))
        rng = gen.rng_for(SEED, "lemma-v-mc", 3)
        mc = []
        for i, (_, g) in enumerate(gen.element_population(rng, 3, 10)):
            mc.append(lab.check_pushforward_lemma(g, gen.random_mark(rng, 3), N_MC, SEED + 2 * i))
        bad = _failures(records + mc)
        assert not bad, f"{len(bad)} failures, first {bad[0].certificate}"
        c["detail"] = f"{len(records)} exact pairs, {len(mc)} MC pairs at n={N_MC}"


def test_criterion_04_unitarity():
    with criterion(4, "unitarity on certified-bijective elements", budget=120) as c:
        records = []
        for p in PRIMES:
            rng = gen.rng_for(SEED, "unitarity", p)
            for _, g in gen.bijective_population(rng, p, 50):
                assert is_bijective(g).verdict
                records.append(lab.check_isometry(g, gen.random_mark(rng, p), mode="motion"))
        rng = gen.rng_for(SEED, "unitarity-mc", 3)
        mc = [lab.check_isometry(g, gen.random_mark(rng, 3), "motion", N_MC, SEED + i)
              for i, (_, g) in enumerate(gen.bijective_population(rng, 3, 5))]
        bad = _failures(records + mc)
        assert not bad, f"{len(bad)} failures, first {bad[0].certificate}"
        c["detail"] = f"{len(records)} exact exponent identities, {len(mc)} paired MC checks"


def _u_pairs():
    rng = gen.rng_for(SEED, "u-composition", 3)
    out = []
    for _ in range(20):
        (_, g1), (_, g2) = gen.bijective_population(rng, 3, 2)
        F = RepFunction.multiplicative(gen.probe_mark(rng, (g1, g2), 3))
        out.append((g1, g2, F))
    return out


def test_criterion_05_representation_property():
    """Literal statement: |U_{g2} U_{g1} F|^2 = |U_{g2 o g1} F|^2 with g2 o g1 = g2 after g1."""
    with criterion(5, "representation property, literal order", budget=60) as c:
        records = [lab.check_u_composition(g1, g2, F, "literal", 1000, SEED + i)
                   for i, (g1, g2, F) in enumerate(_u_pairs())]
        bad = [r for r in records if r.outcome != lab.PASS]
        assert not bad, (f"{len(bad)}/{len(records)} pairs differ, e.g. {bad[0].certificate['mismatches']} "
                         f"of 1000 configurations")
        c["detail"] = f"{len(records)} pairs x 1000 configurations"


def test_criterion_05_companion_anti_order():
    """The operators compose as U_{g2} U_{g1} = U_{g1 o g2}; checked on the same pairs."""
    with criterion("5b", "representation property, composed in reverse order", budget=60) as c:
        records = [lab.check_u_composition(g1, g2, F, "anti", 1000, SEED + i)
                   for i, (g1, g2, F) in enumerate(_u_pairs())]
        bad = _failures(records)
        assert not bad, f"{len(bad)} pairs differ"
        c["detail"] = f"{len(records)} pairs x 1000 configurations, all exact"


def _marks_on(rng, regions, p):
    pool = [Fraction(2), Fraction(1, 2), Fraction(3), Fraction(0), Fraction(5, 2)]
    return StepFunction.from_regions(p, [(r, pool[int(rng.integers(0, len(pool)))]) for r in regions], Fraction(1))


def test_criterion_06_factorization():
    with criterion(6, "factorization via separator", budget=30) as c:
        records = []
        for p in PRIMES:
            rng = gen.rng_for(SEED, "factorization", p)
            for _ in range(50):
                l1, l2 = gen.random_region_set(rng, p), gen.random_region_set(rng, p)
                sep = lab.find_separator(l1, l2)
                assert sep.certificate["valid"], sep.certificate
                records.append(lab.check_factorization(_marks_on(rng, l1, p), _marks_on(rng, l2, p)))
        bad = _failures(records)
        assert not bad, f"{len(bad)} failures, first {bad[0].certificate}"
        assert all(r.certificate["translation_invariant"] for r in records)
        c["detail"] = f"{len(records)} separators certified, factorization and invariance exact"


def test_criterion_07_support_shift():
    with criterion(7, "support shift", budget=10) as c:
        records = []
        for p in PRIMES:
            rng = gen.rng_for(SEED, "support-shift", p)
            for _ in range(50):
                B = gen.random_ball(rng, p, lo=-1, hi=1)
                lam = [Region(gen.random_ball(rng, p, hi=B.level - 1, inside=B))]
                f = _marks_on(rng, lam, p) - 1
                h = Fraction(int(rng.integers(-20, 21)), int(rng.choice([1, p, p * p])))
                records.append(lab.check_support_shift(B, h, lam, f))
        bad = _failures(records)
        assert not bad, f"{len(bad)} failures, first {bad[0].certificate}"
        c["detail"] = f"{len(records)} instances"


def test_criterion_08_rn_normalization(population):
    with criterion(8, "Radon-Nikodym normalization") as c:
        records = [lab.check_rn_normalization(g) for p in PRIMES for _, g in population[p][0]]
        mc = [lab.check_rn_normalization(g, N_MC, SEED + i) for i, (_, g) in enumerate(population[3][0][:5])]
        bad = _failures(records + mc)
        assert not bad, f"{len(bad)} failures, first {bad[0].certificate}"
        c["detail"] = f"{len(records)} exact cancellations, {len(mc)} MC means at n={N_MC}"


def test_criterion_09_sampler_statistics():
    with criterion(9, "sampler cell counts and pair correlation") as c:
        windows = [Ball(0, 0, 3), Ball(0, 1, 2), Ball(0, -1, 5)]
        records = [lab.check_sampler(w, N_MC, SEED + i) for i, w in enumerate(windows)]
        bad = _failures(records)
        assert not bad, f"{len(bad)} failures, first {bad[0].certificate}"
        worst = max(r.certificate["worst_cell_z"] for r in records)
        c["detail"] = f"3 windows, worst cell z = {worst:.2f}"


def test_criterion_10_counterexample_registry():
    with criterion(10, "counterexample registry") as c:
        records = {r.check_id: r for r in lab.counterexample_registry()}
        assert lab.registry_complete(records.values()), "registry entry missing"
        pw = records["registry.pointwise_composition"].certificate["witness"]
        assert pw["composed_point"] != pw["product_point"]
        inv = records["registry.literal_invariance"].certificate
        assert Fraction(inv["lhs"]) == 0 and Fraction(inv["rhs"]) > 0 and inv["hypothesis_holds"]
        iso = records["registry.nonbijective_isometry"].certificate
        assert (Fraction(iso["lhs"]), Fraction(iso["rhs"])) == (0, 1) and not iso["bijective"]
        assert all(r.outcome == lab.DOCUMENTED for r in records.values())
        assert all(lab.reverify(r.to_json()) for r in records.values())
        c["detail"] = f"{len(records)} documented entries with witnesses"


def test_criterion_11_determinism():
    with criterion(11, "byte-identical reports") as c:
        a = lab.run_suite(lab.LabConfig(seed=7))
        b = lab.run_suite(lab.LabConfig(seed=7))
        assert a.report_lines() == b.report_lines()
        assert a.exit_code == 0, a.summary()
        c["detail"] = f"{len(a.records)} records identical across two runs"


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
