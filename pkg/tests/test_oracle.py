# tests/test_oracle.py

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.core.errors import NeedsGrid, TooLarge
from app.core.measure import DiscreteMeasure, make_measure
from app.metrics.distances import compute_metric
from app.metrics.grid import BreakpointGrid, MetricKind
from app.metrics.oracle import metric_oracle

GRID = BreakpointGrid.from_points([0.0, 1.0, 2.0])

small = st.lists(
    st.tuples(st.integers(-2, 10).map(lambda k: 0.25 * k), st.floats(0.0, 2.0, allow_nan=False)),
    max_size=2,
).map(make_measure)
smaller = st.lists(
    st.tuples(st.integers(-2, 10).map(lambda k: 0.25 * k), st.floats(0.0, 2.0, allow_nan=False)),
    max_size=3,
).map(make_measure)


def test_oracle_examples():
    near, far = DiscreteMeasure.dirac(1.0), DiscreteMeasure.dirac(1.25)
    assert metric_oracle(MetricKind.FLAT, near, far) == pytest.approx(0.25)
    assert metric_oracle(MetricKind.MT, near, far, GRID) == pytest.approx(2.0)
    assert metric_oracle(MetricKind.NORM, near, far) == pytest.approx(2.0)
    split = make_measure([(0.0, 0.5), (2.0, 0.5)])
    assert metric_oracle(MetricKind.WASSERSTEIN1, split, near) == pytest.approx(1.0)


@pytest.mark.parametrize("kind", list(MetricKind))
def test_oracle_identity(kind):
    m = make_measure([(0.5, 1.0), (1.5, 0.5)])
    assert metric_oracle(kind, m, m, GRID) == pytest.approx(0.0, abs=1e-12)


def test_oracle_rejects_large_supports():
    big = make_measure([(0.1 * k, 1.0) for k in range(7)])
    with pytest.raises(TooLarge):
        metric_oracle(MetricKind.FLAT, big, DiscreteMeasure.zero())


def test_mt_oracle_needs_grid():
    with pytest.raises(NeedsGrid):
        metric_oracle(MetricKind.MT, DiscreteMeasure.dirac(0.0), DiscreteMeasure.dirac(0.5))


@settings(max_examples=60, deadline=None)
@given(small, smaller)
def test_fast_metrics_match_oracle(a, b):
    for kind in (MetricKind.NORM, MetricKind.FLAT, MetricKind.MT):
        assert compute_metric(kind, a, b, GRID) == pytest.approx(metric_oracle(kind, a, b, GRID), abs=1e-9)
