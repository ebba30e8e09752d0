import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import necklace_count

from ergopt.ergodic import (
    CompensatedSum,
    birkhoff_sum,
    birkhoff_sums,
    estimate_max_average,
    excursion_averages,
    periodic_orbits,
)
from ergopt.maps import eval_map, make_map


def test_necklace_oracle_small_values():
    assert [necklace_count(p) for p in range(1, 9)] == [2, 1, 2, 3, 6, 9, 18, 30]


@pytest.mark.parametrize("max_period", [1, 4, 8])
def test_periodic_orbit_count(mp, max_period):
    orbs = periodic_orbits(mp, max_period)
    assert len(orbs) == sum(necklace_count(p) for p in range(1, max_period + 1))


def test_periodic_orbit_count_period_12(mp):
    assert len(periodic_orbits(mp, 12)) == 747


def test_periodic_points_are_periodic(mp):
    for orb in periodic_orbits(mp, 9):
        x = orb.points[0]
        for _ in range(len(orb.word)):
            x = eval_map(mp, x)
        assert abs(x - orb.points[0]) <= 1e-9
        assert np.all((orb.points > mp.cut) == np.array(orb.word, dtype=bool)) or len(orb.word) == 1


def test_fixed_point_zero_included(mp):
    orbs = periodic_orbits(mp, 3)
    assert orbs[0].word == (0,) and orbs[0].points[0] == 0.0


def test_single_branch_map_has_only_zero():
    assert len(periodic_orbits(make_map("farey-g", rho=1.0), 5)) == 1


def test_birkhoff_sum_matches_loop(mp):
    f = lambda x: np.sin(7 * np.asarray(x))
    x, n = 0.123, 500
    ref, y = [], x
    for _ in range(n):
        ref.append(math.sin(7 * y))
        y = eval_map(mp, y)
    assert birkhoff_sum(mp, f, x, n) == math.fsum(ref)
    assert birkhoff_sums(mp, f, np.array([x]), n)[0] == pytest.approx(math.fsum(ref), abs=1e-12)


def test_compensated_sum_cancellation():
    acc = CompensatedSum((1,))
    for v in (1e16, 1.0, -1e16):
        acc.add(np.array([v]))
    assert acc.value[0] == 1.0


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=200))
@settings(max_examples=100, deadline=None)
def test_compensated_sum_accuracy(values):
    acc = CompensatedSum(())
    for v in values:
        acc.add(v)
    exact = math.fsum(values)
    assert abs(float(acc.value) - exact) <= 1e-15 * max(1.0, sum(abs(v) for v in values))


def test_max_average_fixed_point_witness(mp):
    est = estimate_max_average(mp, lambda x: -np.asarray(x), max_period=6, orbit_budget=2000)
    assert est.value == 0.0
    assert est.witness["kind"] == "fixed_point"


def test_max_average_periodic_witness(mp):
    est = estimate_max_average(mp, lambda x: np.asarray(x), max_period=6, orbit_budget=0)
    assert est.witness["kind"] == "periodic"
    assert est.value == pytest.approx(est.best_periodic)
    # The fixed point of the right branch is the largest single point.
    assert est.value <= 1.0


def test_excursion_averages_match_enumerated_orbits(mp):
    f = lambda x: np.cos(5 * np.asarray(x))
    ns = np.arange(1, 12)
    avgs, starts = excursion_averages(mp, f, ns)
    words = {orb.word: orb for orb in periodic_orbits(mp, 12)}
    for n, a, x in zip(ns, avgs, starts):
        orb = words[(0,) * int(n) + (1,)]
        assert a == pytest.approx(np.mean(f(orb.points)), abs=1e-12)
        assert x == pytest.approx(orb.points[0], rel=1e-9)


def test_long_excursion_witness(mp):
    # Rises slowly away from 0 then drops: long visits near 0 but not at 0 pay best.
    f = lambda x: np.minimum(np.asarray(x) ** 0.5, 0.3) - 0.5 * np.asarray(x)
    est = estimate_max_average(mp, f, max_period=6, orbit_budget=0)
    assert est.witness["kind"] == "excursion"
    assert est.value > est.best_periodic
