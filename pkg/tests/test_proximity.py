import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupsense.errors import DegenerateRange, NonPositiveDistance, UnknownRssi
from groupsense.evaluation import average_precision
from groupsense.proximity import (
    PlmParams, normalized_proximity, np_scores, pair_distances, plm_distance, plm_rssi,
)


def test_plm_distance_examples():
    p = PlmParams(measured_power=-59.0)
    assert plm_distance(-59.0, p) == 1.0
    assert plm_distance(-74.0, p) == pytest.approx(10.0, rel=1e-12)
    assert plm_distance(-66.5, p) == pytest.approx(3.16227766, rel=1e-8)


def test_obstacle_loss_shortens_estimate():
    assert plm_distance(-80, PlmParams(obstacle_loss=5)) < plm_distance(-80, PlmParams())


def test_plm_rssi_inverse_points():
    p = PlmParams(measured_power=-75.0)
    assert plm_rssi(1.0, p) == -75.0
    assert plm_rssi(10.0, p) == pytest.approx(-90.0, abs=1e-12)


def test_plm_errors():
    with pytest.raises(UnknownRssi):
        plm_distance(None)
    with pytest.raises(UnknownRssi):
        plm_distance(float("nan"))
    with pytest.raises(NonPositiveDistance):
        plm_rssi(0.0)
    with pytest.raises(ValueError):
        PlmParams(path_loss_exponent=0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 20), st.floats(-100, -30), st.floats(0.5, 5), st.floats(0, 10))
def test_plm_round_trip(d, mp, n, x):
    p = PlmParams(mp, n, x)
    assert plm_distance(plm_rssi(d, p), p) == pytest.approx(d, rel=1e-9)


def test_plm_monotone():
    r = np.linspace(-110, -20, 200)
    assert np.all(np.diff(plm_distance(r)) < 0)


def test_normalized_proximity():
    d = np.array([1.0, 3.0, 5.0])
    assert normalized_proximity(d).tolist() == [1.0, 0.5, 0.0]
    assert normalized_proximity(np.array([2.0]), x_min=1.0, x_max=3.0)[0] == 0.5
    with pytest.raises(DegenerateRange):
        normalized_proximity(np.full(4, 2.0))


def test_np_ranking_equals_negative_distance(small_session, small_clean):
    pairs, D = pair_distances(small_clean)
    pairs2, S = np_scores(small_clean)
    assert pairs == pairs2 == small_session[0].labels.pairs
    y = small_session[0].labels.labels.ravel()
    assert average_precision(S.ravel(), y) == pytest.approx(average_precision(-D.ravel(), y), abs=1e-12)
    assert S.min() == 0.0 and S.max() == 1.0
