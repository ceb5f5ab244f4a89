import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupsense.core import build_label_grid
from groupsense.errors import NoPositives
from groupsense.evaluation import (
    DEFAULT_RESOLUTIONS, average_precision, best_resolution, confusion, match_groups, npc_baseline,
    pr_curve, select_threshold, sweep_resolution,
)
from oracles import brute_force_ap


def test_ap_hand_fixture():
    assert average_precision([0.9, 0.8, 0.7], [1, 0, 1]) == pytest.approx(5 / 6, abs=1e-15)
    curve = pr_curve([0.9, 0.8, 0.7], [1, 0, 1])
    assert curve.points == [(0.5, 1.0), (0.5, 0.5), (1.0, 2 / 3)]
    assert curve.thresholds.tolist() == [0.9, 0.8, 0.7]


def test_ap_perfect_and_constant():
    assert average_precision([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    y = np.array([1, 0, 0, 0, 1, 0, 0, 0])
    assert average_precision(np.full(8, 0.3), y) == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(NoPositives):
        average_precision([0.1, 0.2], [0, 0])


def test_ap_brute_force_random():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 51))
        y = rng.integers(0, 2, n)
        y[rng.integers(n)] = 1
        s = rng.integers(0, 8, n) / 7.0 if rng.random() < 0.5 else rng.random(n)
        assert average_precision(s, y) == pytest.approx(brute_force_ap(s, y), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-500, 500), st.integers(0, 1)), min_size=1, max_size=40)
       .filter(lambda r: any(y for _, y in r)))
def test_ap_rank_invariance(rows):
    s = np.array([v / 100 for v, _ in rows])
    y = np.array([t for _, t in rows])
    ap = average_precision(s, y)
    assert 0 <= ap <= 1
    assert average_precision(np.exp(s) * 3 + 1, y) == pytest.approx(ap, abs=1e-12)
    rec = pr_curve(s, y).recall
    assert np.all(np.diff(rec) >= 0)


def test_npc():
    y = np.zeros(1000, dtype=int)
    y[:63] = 1
    npc = npc_baseline(y)
    assert npc.prior == 0.063
    assert average_precision(npc.predict(len(y)), y) == pytest.approx(0.063, abs=1e-15)
    bal = np.array([0, 1] * 50)
    assert average_precision(npc_baseline(bal).predict(100), bal) == pytest.approx(0.5)


def test_select_threshold_gap_and_ties():
    s = np.array([0.95, 0.9, 0.8, 0.3, 0.2, 0.1])
    y = np.array([1, 1, 1, 0, 0, 0])
    assert select_threshold(s, y) == 0.8
    with pytest.raises(NoPositives):
        select_threshold(s, np.zeros(6))


def test_select_threshold_beta():
    # precision falls monotonically as the cut is lowered
    s = np.linspace(1.0, 0.1, 10)
    y = np.array([1, 1, 1, 0, 1, 1, 0, 1, 0, 0])
    p1 = select_threshold(s, y, beta=1.0)
    p_half = select_threshold(s, y, beta=0.5)
    p2 = select_threshold(s, y, beta=2.0)
    assert p_half >= p1 >= p2
    assert p_half == pytest.approx(0.8)
    assert p1 == pytest.approx(0.3)


def test_confusion_table_values():
    tp, fp, fn, tn = 20870, 5940, 3269, 123762
    y = np.r_[np.ones(tp), np.zeros(fp), np.ones(fn), np.zeros(tn)]
    s = np.r_[np.full(tp + fp, 0.9), np.full(fn + tn, 0.1)]
    c = confusion(s, y, 0.61)
    assert (c.tp, c.fp, c.fn, c.tn) == (tp, fp, fn, tn)
    assert c.precision == pytest.approx(0.7784, abs=1e-4)
    assert c.recall == pytest.approx(0.8645, abs=1e-4)
    assert c.tp + c.fp + c.fn + c.tn == 153841


def test_confusion_edge_cases():
    c = confusion([0.1, 0.2], [1, 0], 0.5)
    assert c.tp == c.fp == 0 and c.precision == 0.0 and not c.precision_defined
    p = confusion([0.9, 0.1], [1, 0], 0.5)
    assert p.precision == p.recall == p.accuracy == 1.0


def test_match_groups_examples():
    r = match_groups([set("ABC")], [set("ABC")])
    assert r.group_correct == 1 and r.node_correct == 3
    r = match_groups([set("AB")], [set("ABC")])
    assert r.group_correct == 0 and r.node_correct == 2 and r.node_total == 3
    r = match_groups([set("AB"), set("CD")], [set("ABCD")])
    assert r.matches[0][2] == 0.5 and r.matches[0][0] == frozenset("AB")
    assert r.group_correct == 0 and r.node_correct == 2
    assert r.group_total == 1


def test_match_groups_singletons_and_population():
    r = match_groups([set("AB")], [set("AB")], participants="ABCDE")
    assert r.node_accuracy == 1.0 and r.group_accuracy == 1.0
    r = match_groups([set("ABC")], [set("AB")], participants="ABCD")
    assert r.node_correct == 3  # A, B in the match; D alone; C wrongly grouped
    r = match_groups([set("AB"), set("CD")], [set("AB"), set("CD")], participants="ABCDE")
    assert r.node_accuracy == 1.0 and r.group_correct == 2


def test_match_is_one_to_one():
    r = match_groups([set("ABC"), set("AB")], [set("AB")])
    assert len(r.matches) == 1 and r.matches[0][0] == frozenset("AB")


def _planted_case(noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    pids = [f"P{i}" for i in range(8)]
    grid = build_label_grid([(set(pids[:3]), 0, 40), (set(pids[3:5]), 10, 40), (set(pids[5:7]), 0, 20)],
                            pids, 40)
    background = rng.uniform(0, 0.05, grid.labels.shape)  # below the edge floor
    strong = np.clip(0.9 + rng.normal(0, noise, grid.labels.shape), 0, 1)
    return grid, np.where(grid.labels == 1, strong, background)


def test_sweep_planted_recovery():
    grid, probs = _planted_case(0.05)
    rows = sweep_resolution(probs, grid.pairs, grid.participant_ids, grid)
    assert [r["resolution"] for r in rows] == list(DEFAULT_RESOLUTIONS)
    at_half = rows[4]
    assert at_half["node_accuracy"] >= 0.9
    assert at_half["node_total"] == 8 * 40
    assert at_half["group_total"] == 3 * 10 + 2 * 10 + 2 * 20
    best = best_resolution(rows)
    assert best["node_accuracy"] == max(r["node_accuracy"] for r in rows)


def test_sweep_jobs_independent():
    grid, probs = _planted_case(0.3, seed=1)
    a = sweep_resolution(probs, grid.pairs, grid.participant_ids, grid, (0.3, 0.7), jobs=1)
    b = sweep_resolution(probs, grid.pairs, grid.participant_ids, grid, (0.3, 0.7), jobs=3)
    assert a == b


def test_best_resolution_ties():
    rows = [{"resolution": 0.3, "node_accuracy": 0.8, "group_accuracy": 0.7},
            {"resolution": 0.2, "node_accuracy": 0.8, "group_accuracy": 0.7},
            {"resolution": 0.1, "node_accuracy": 0.8, "group_accuracy": 0.6}]
    assert best_resolution(rows)["resolution"] == 0.2
