import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupsense.core import ParticipantMeta
from groupsense.errors import WindowTooShort
from groupsense.features import (
    ALL_GROUPS, DEFAULT_GROUPS, INTERPERSONAL, FeatureOptions, FeatureTable, build_feature_table,
    ceiling_diff, device_position_onehot, feature_schema, interpersonal_features, past_window_stats,
    time_since_moving, time_since_moving_diff, xcorr_all_pairs, xcorr_features,
)
from groupsense.preprocess import clean_session
from groupsense.simulator import ScenarioConfig, simulate_session
from oracles import brute_xcorr


def test_interpersonal_examples():
    assert interpersonal_features(-60, -70) == (-65.0, 10.0)
    assert interpersonal_features(-80, -80) == (-80.0, 0.0)
    assert interpersonal_features(-100, -60) == (-80.0, 40.0)


def test_device_position_onehot():
    L = ParticipantMeta("A", "Left", "Right", 1)
    R = ParticipantMeta("B", "Right", "Left", 2)
    for mi, mj, key in [(L, L, "LL"), (L, R, "LR"), (R, L, "RL"), (R, R, "RR")]:
        v = device_position_onehot(mi, mj)
        assert v[f"device_position_{key}"] == 1.0
        assert sum(v.values()) == 1.0


def test_ceiling_diff():
    assert ceiling_diff([2.0], [2.0])[0] == 0.0
    assert ceiling_diff([1.0], [4.5])[0] == 3.5
    a, b = np.array([1.0, 7.0, 3.0]), np.array([2.5, 1.0, 3.0])
    assert np.array_equal(ceiling_diff(a, b), ceiling_diff(b, a))


def _still_then(seconds_still, total, hz=100):
    x = np.zeros(total * hz)
    x[: (total - seconds_still) * hz] = 0.5
    return x


def test_time_since_moving_diff():
    i = _still_then(10, 30)
    j = _still_then(7, 30)
    assert time_since_moving_diff(i, j, s=29) == 3.0
    moving = np.full(3000, 0.5)
    assert np.isnan(time_since_moving_diff(moving, moving, s=29))
    assert time_since_moving_diff(i, i.copy(), s=29) == 0.0


def test_time_since_moving_never_moved():
    assert time_since_moving(np.zeros(4, bool)).tolist() == [1.0, 2.0, 3.0, 4.0]
    assert time_since_moving(np.array([1, 0, 0, 1, 0], bool)).tolist() == [0.0, 1.0, 2.0, 0.0, 1.0]


def test_xcorr_identical_and_constant():
    rng = np.random.default_rng(4)
    x = rng.normal(size=1000)
    peak, lag = xcorr_features(x, x)
    assert peak == pytest.approx(1.0, abs=1e-12) and lag == 0.0
    assert xcorr_features(np.ones(1000), x) == (0.0, 0.0)
    with pytest.raises(WindowTooShort):
        xcorr_features(x[:999], x)


def test_xcorr_matches_brute_force():
    rng = np.random.default_rng(9)
    for _ in range(20):
        n = int(rng.integers(40, 80))
        a = rng.normal(size=n) + np.sin(np.arange(n) / 3)
        b = np.roll(a, int(rng.integers(-5, 6))) + rng.normal(scale=rng.uniform(0.1, 2), size=n)
        ref = brute_xcorr(a, b, 5, n / 5, 3.0)
        got = xcorr_features(a, b, sample_rate=5, window_s=n / 5, max_lag_s=3.0)
        assert got[0] == pytest.approx(ref[0], abs=1e-9)
        assert got[1] == ref[1]


def test_planted_two_second_lag():
    rng = np.random.default_rng(5)
    base = np.convolve(rng.normal(size=1400), np.ones(15) / 15, mode="same")
    a = base[200:1200]
    b = base[0:1000]  # b[t + 200] = a[t]: j trails i by 2 s
    peak, lag = xcorr_features(a, b)
    assert lag == pytest.approx(2.0)
    assert peak > 0.7
    assert xcorr_features(b, a)[1] == pytest.approx(-2.0)


def test_xcorr_all_pairs_matches_single():
    rng = np.random.default_rng(6)
    sigs = [rng.normal(size=2500) for _ in range(3)]
    sigs[1][:] = 1.0
    out = xcorr_all_pairs({"s": sigs}, [0, 0, 1], [1, 2, 2], 25,
                          FeatureOptions(xcorr_chunk_s=7))
    peak, lag = out["s"]
    assert np.isnan(peak[:, :9]).all()
    for p, (a, b) in enumerate([(0, 1), (0, 2), (1, 2)]):
        for s in range(9, 25):
            ref = xcorr_features(sigs[a][: (s + 1) * 100], sigs[b][: (s + 1) * 100])
            assert peak[p, s] == pytest.approx(ref[0], abs=1e-12)
            assert lag[p, s] == ref[1]
    parallel = xcorr_all_pairs({"s": sigs}, [0, 0, 1], [1, 2, 2], 25, FeatureOptions(xcorr_chunk_s=7), jobs=2)
    assert np.array_equal(parallel["s"][0], peak, equal_nan=True)


def test_past_window_stats():
    lo, hi, mean, std = past_window_stats(np.full(12, 3.0))
    assert (lo[-1], hi[-1], mean[-1], std[-1]) == (3.0, 3.0, 3.0, 0.0)
    lo, hi, mean, std = past_window_stats(np.arange(1.0, 11.0))
    assert (lo[-1], hi[-1], mean[-1]) == (1.0, 10.0, 5.5)
    assert std[-1] == pytest.approx(2.8722813, abs=1e-7)
    assert (lo[1], hi[1], mean[1]) == (1.0, 2.0, 1.5)
    nan = past_window_stats(np.full(5, np.nan))
    assert all(np.isnan(v).all() for v in nan)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.one_of(st.none(), st.floats(-100, 100)), min_size=1, max_size=30))
def test_window_stats_properties(xs):
    x = np.array([np.nan if v is None else v for v in xs])
    lo, hi, mean, std = past_window_stats(x, 10)
    ok = ~np.isnan(lo)
    assert np.all(lo[ok] <= mean[ok]) and np.all(mean[ok] <= hi[ok])
    assert np.all(std[ok] >= 0)
    flat = ok & (lo == hi)
    assert np.all(std[flat] == 0)
    # population std never exceeds half the range
    assert np.all(std[ok] <= (hi[ok] - lo[ok]) / 2 * (1 + 1e-12) + 1e-300)


def test_schema_families():
    names = [n for n, _ in feature_schema([INTERPERSONAL])]
    assert names[:2] == ["prox_rssi_mean", "prox_rssi_diff"]
    assert len(names) == 10
    assert len(feature_schema(DEFAULT_GROUPS)) == 49
    full = [n for n, _ in feature_schema(ALL_GROUPS)]
    assert len(full) == 74
    assert "ceiling_beacon_5_diff_std" in full and "device_position_RR" in full
    assert "device_rotation_rate_ccf_lag_mean" in full


def test_table_shape_three_by_sixty():
    ds, _ = simulate_session(ScenarioConfig(n_participants=3, duration_s=60, rng_seed=2))
    table = build_feature_table(clean_session(ds), ds.labels, ALL_GROUPS)
    assert table.X.shape == (180, 74)
    assert np.array_equal(table.labels, ds.labels.labels.ravel())


def test_table_invariants(small_table):
    t = small_table
    X, names = t.X, t.feature_names
    onehot = X[:, [names.index(f"device_position_{p}") for p in ("LL", "LR", "RL", "RR")]]
    assert np.all(onehot.sum(axis=1) == 1)
    for sig in ("linear_acc", "gravity", "rotation_rate"):
        m = X[:, names.index(f"device_{sig}_ccf_max")]
        lag = X[:, names.index(f"device_{sig}_ccf_lag")]
        ok = ~np.isnan(m)
        assert np.all(np.abs(m[ok]) <= 1 + 1e-12)
        assert np.all(np.abs(lag[ok]) <= 5.0)
        assert np.isnan(m[t.second < 9]).all() and ok[t.second >= 9].all()
    stds = [i for i, n in enumerate(names) if n.endswith("_std")]
    assert np.nanmin(X[:, stds]) >= 0


def test_symmetric_features_under_swap(small_clean):
    c = small_clean
    mean, diff = interpersonal_features(c.coin_rssi[0, 1], c.coin_rssi[1, 0])
    mean2, diff2 = interpersonal_features(c.coin_rssi[1, 0], c.coin_rssi[0, 1])
    assert np.array_equal(mean, mean2) and np.array_equal(diff, diff2)
    a = c.motion[c.participant_ids[0]].linear_acc_mag
    b = c.motion[c.participant_ids[1]].linear_acc_mag
    assert np.array_equal(time_since_moving_diff(a, b), time_since_moving_diff(b, a), equal_nan=True)
    p1, l1 = xcorr_features(a[:2000], b[:2000])
    p2, l2 = xcorr_features(b[:2000], a[:2000])
    assert p1 == pytest.approx(p2, abs=1e-12) and l1 == -l2


def test_csv_round_trip(tmp_path, small_table):
    path = tmp_path / "features.csv"
    small_table.to_csv(path)
    back = FeatureTable.from_csv(path)
    assert back.feature_names == small_table.feature_names
    assert np.array_equal(back.X, small_table.X, equal_nan=True)
    assert np.array_equal(back.labels, small_table.labels)
    assert np.array_equal(back.pair_index, small_table.pair_index)


def test_without_groups(small_table):
    t = small_table.without_groups(["motion", "indoor_positioning", "device_position"])
    assert len(t.feature_names) == 10
