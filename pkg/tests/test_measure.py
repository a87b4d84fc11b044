# tests/test_measure.py

import math

import numpy as np
import pytest

from app.core.errors import NegativeWeight
from app.core.measure import (
    DiscreteMeasure, Interval, difference, make_measure, mass_at, measure_from_arrays, restrict,
    total_variation
)
from app.reference.closed_form import outflow_state


def test_make_measure_empty_is_zero():
    m = make_measure([])
    assert len(m) == 0
    assert total_variation(m) == 0
    assert m.is_zero()


def test_make_measure_single_atom():
    assert make_measure([(1.0, 1.0)]).atoms == [(1.0, 1.0)]


def test_make_measure_merges_duplicates():
    assert make_measure([(2.0, 0.5), (2.0, 0.5)]).atoms == [(2.0, 1.0)]


def test_make_measure_merges_within_position_tolerance():
    m = make_measure([(1.0, 0.25), (1.0 + 1e-14, 0.75)])
    assert len(m) == 1
    assert m.total_mass == pytest.approx(1.0)


def test_make_measure_sorts():
    m = make_measure([(3.0, 1.0), (-1.0, 2.0), (0.5, 0.5)])
    assert m.positions.tolist() == [-1.0, 0.5, 3.0]
    assert m.weights.tolist() == [2.0, 0.5, 1.0]


def test_negative_weight_rejected():
    with pytest.raises(NegativeWeight):
        make_measure([(0.0, 1.0), (1.0, -0.1)])


def test_make_measure_is_idempotent():
    m = make_measure([(0.3, 0.2), (0.1, 0.7), (0.3, 0.1)])
    assert make_measure(m.atoms) == m


def test_measure_is_immutable():
    m = make_measure([(0.0, 1.0)])
    with pytest.raises(ValueError):
        m.weights[0] = 2.0


def test_total_variation_is_additive():
    assert total_variation(make_measure([(0.0, 0.3), (1.0, 0.7)])) == pytest.approx(1.0)


def test_drop_tolerance_folds_mass_into_nearest_atom():
    m = measure_from_arrays([0.0, 1.0, 1.1], [1.0, 1e-20, 1.0], drop_tolerance=1e-14)
    assert m.positions.tolist() == [0.0, 1.1]
    assert m.total_mass == pytest.approx(2.0)


def test_mass_at():
    m = DiscreteMeasure.dirac(1.0)
    assert mass_at(m, 1.0) == 1.0
    assert mass_at(m, 1.1) == 0.0
    assert mass_at(DiscreteMeasure.zero(), 1.0) == 0.0


def test_mass_at_parked_atom_after_outflow():
    m = outflow_state(1.0, 1.0, 0.2, 100)
    assert mass_at(m, 1.0) == pytest.approx(math.exp(-0.2))


def test_restrict_respects_endpoints():
    m = DiscreteMeasure.dirac(1.0)
    assert restrict(m, Interval.left_open(0.0, 1.0)) == m
    assert restrict(m, Interval.left_open(1.0, 2.0)).is_zero()
    three = make_measure([(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)])
    assert restrict(three, Interval.open(0.0, 2.0)).atoms == [(1.0, 1.0)]


@pytest.mark.parametrize("interval", [
    Interval.left_open(0.0, 1.0),
    Interval.open(0.5, 2.0),
    Interval.closed(1.0, 1.0),
])
def test_restrict_split_preserves_mass(interval):
    m = make_measure([(0.0, 0.5), (0.5, 0.25), (1.0, 1.0), (2.0, 2.0)])
    pieces = [restrict(m, interval)] + [restrict(m, part) for part in interval.complement()]
    assert sum(total_variation(p) for p in pieces) == pytest.approx(total_variation(m))


def test_singleton_interval_needs_closed_ends():
    with pytest.raises(ValueError):
        Interval.open(1.0, 1.0)


def test_difference_examples():
    same = difference(DiscreteMeasure.dirac(0.0), DiscreteMeasure.dirac(0.0))
    assert same.positions.tolist() == [0.0]
    assert same.weights.tolist() == [0.0]

    eps = 0.1
    shifted = difference(DiscreteMeasure.dirac(0.0), DiscreteMeasure.dirac(eps))
    assert shifted.positions.tolist() == [0.0, eps]
    assert shifted.weights.tolist() == [1.0, -1.0]

    heavier = difference(make_measure([(0.0, 2.0)]), make_measure([(0.0, 1.0)]))
    assert heavier.weights.tolist() == [1.0]


def test_difference_negation_is_antisymmetric(rng):
    a = measure_from_arrays(rng.uniform(0, 2, 5), rng.uniform(0, 1, 5))
    b = measure_from_arrays(rng.uniform(0, 2, 4), rng.uniform(0, 1, 4))
    assert -difference(a, b) == difference(b, a)


def test_positive_and_negative_parts():
    signed = difference(make_measure([(0.0, 2.0), (1.0, 0.5)]), make_measure([(0.0, 1.0), (1.0, 1.5)]))
    np.testing.assert_allclose(signed.positive_part().weights, [1.0, 0.0])
    np.testing.assert_allclose(signed.negative_part().weights, [0.0, 1.0])
    assert signed.total_variation() == pytest.approx(2.0)
