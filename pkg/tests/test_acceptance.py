"""End-to-end acceptance checks; each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``. The pipeline checks simulate
full-size sessions and take several minutes on one core.
"""
import time

import numpy as np
import pytest

from groupsense import pipeline
from groupsense.cli import main
from groupsense.community import InteractionGraph, louvain, modularity
from groupsense.config import RunConfig
from groupsense.core import positive_weight
from groupsense.evaluation import ablation, average_precision
from groupsense.features import DEFAULT_GROUPS, build_feature_table, xcorr_features
from groupsense.gbdt import GbdtConfig, cross_validate, fit, fit_rows, logistic_grad_hess
from groupsense.preprocess import clean_session
from groupsense.proximity import PlmParams, plm_distance, plm_rssi
from groupsense.simulator import ScenarioConfig, generate_scenario, simulate_session
from oracles import (
    brute_force_ap, brute_xcorr, louvain_hit_rate, modularity_matrix_all, planted_graph,
    random_graph,
)

pytestmark = pytest.mark.acceptance

SEEDS = (1, 2, 3, 4, 5)
# tuning protocol for the link-level runs: learning rate picked by pair-grouped
# CV on the tuning pairs, then out-of-fold predictions on the remaining pairs
LINK_RUN = dict(grid_enabled=True, grid={"learning_rate": [0.05, 0.1, 0.2]}, tune_folds=3, cv_folds=3)


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")
    assert ok, detail


def graph_from_matrix(A):
    n = A.shape[0]
    verts = tuple(f"v{i}" for i in range(n))
    edges = {frozenset((verts[i], verts[j])): float(A[i, j])
             for i in range(n) for j in range(i + 1, n) if A[i, j] > 0}
    return InteractionGraph(verts, edges)


def run_link(seed, sigma):
    """Simulate, tune on the tuning pairs and predict every row of one session."""
    cfg = RunConfig(seed=seed, **LINK_RUN)
    ds, _ = simulate_session(ScenarioConfig(rng_seed=seed, rssi_noise_sigma=sigma))
    _, table, nps = pipeline.build_tables(cfg, ds)
    info = pipeline.tune(table, nps, cfg)
    gcfg = GbdtConfig(**info["config"])
    rows = pipeline.eval_rows(table, info["tuning_pairs"])
    cv = cross_validate(table.X[rows], table.labels[rows], table.pair_index[rows], gcfg, cfg.cv_folds, seed)
    return dict(cfg=cfg, table=table, np=nps, info=info, gcfg=gcfg, rows=rows, oof=cv.predictions)


@pytest.fixture(scope="module")
def link_runs():
    t0 = time.perf_counter()
    runs = [run_link(s, 6.0) for s in SEEDS]
    return runs, time.perf_counter() - t0


def test_1_plm_round_trip(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for d in rng.uniform(0.1, 20, 1000):
        p = PlmParams(rng.uniform(-100, -30), rng.uniform(0.5, 5), rng.uniform(0, 10))
        worst = max(worst, abs(plm_distance(plm_rssi(d, p), p) - d) / d)
    dt = time.perf_counter() - t0
    report(capsys, 1, worst <= 1e-9 and dt < 1, f"max relative error {worst:.2e}, {dt:.3f} s")


def test_2_average_precision_oracle(capsys):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 51))
        y = rng.integers(0, 2, n)
        y[rng.integers(n)] = 1
        s = rng.integers(0, 6, n) / 5.0 if rng.random() < 0.5 else rng.random(n)
        worst = max(worst, abs(average_precision(s, y) - brute_force_ap(s, y)))
    hand = average_precision([0.9, 0.8, 0.7], [1, 0, 1])
    ok = worst <= 1e-12 and abs(hand - 5 / 6) <= 1e-12
    report(capsys, 2, ok, f"max |AP - oracle| {worst:.1e}, fixture AP {hand:.6f}")


def test_3_gbdt_correctness(capsys):
    # (a) gradient and hessian against central differences of the weighted log loss
    def loss(y, z, w):
        p = 1 / (1 + np.exp(-z))
        return -w * (y * np.log(p) + (1 - y) * np.log(1 - p))

    rng = np.random.default_rng(3)
    err = 0.0
    for _ in range(200):
        y, z, w = rng.integers(0, 2), rng.uniform(-4, 4), rng.uniform(0.1, 20)
        g, h = logistic_grad_hess(y, 1 / (1 + np.exp(-z)), w)
        fd_g = (loss(y, z + 1e-5, w) - loss(y, z - 1e-5, w)) / 2e-5
        e = 1e-3  # five-point stencil keeps both truncation and rounding error small
        fd_h = (-loss(y, z + 2 * e, w) + 16 * loss(y, z + e, w) - 30 * loss(y, z, w)
                + 16 * loss(y, z - e, w) - loss(y, z - 2 * e, w)) / (12 * e * e)
        err = max(err, abs(g - fd_g), abs(h - fd_h))
    ok_a = err <= 1e-6

    # (b) depth-1 stump on the six-row fixture; hand values: threshold 2.5,
    # Missing right, leaves -2/3 and 1/2
    X6 = np.array([[1.0], [2.0], [3.0], [4.0], [5.0], [np.nan]])
    Y6 = np.array([0, 0, 1, 0, 1, 1])
    stump = GbdtConfig(n_trees=1, max_depth=1, colsample_bytree=1.0, subsample=1.0, learning_rate=1.0,
                       min_child_weight=0.0)
    t = fit(X6, Y6, stump).trees[0]
    ok_b = (t.feature[0] == 0 and t.threshold[0] == 2.5 and not t.default_left[0]
            and t.value[t.left[0]] == -2 / 3 and t.value[t.right[0]] == 0.5)

    # (c) training loss over 50 full-sample trees on a simulated session
    ds, _ = simulate_session(ScenarioConfig(n_participants=10, duration_s=900, rng_seed=3))
    table = build_feature_table(clean_session(ds), ds.labels, DEFAULT_GROUPS)
    full = GbdtConfig(n_trees=50, colsample_bytree=1.0, subsample=1.0)
    m = fit(table.X, table.labels, full, record_loss=True)
    steps = np.diff(m.train_loss)
    ok_c = len(m.train_loss) == 51 and bool(np.all(steps <= 1e-12))

    # (d) seeded determinism of a subsampled fit
    cfg = GbdtConfig(n_trees=20, rng_seed=11)
    ok_d = fit(table.X, table.labels, cfg).to_json() == fit(table.X, table.labels, cfg).to_json()

    report(capsys, 3, ok_a and ok_b and ok_c and ok_d,
           f"(a) fd error {err:.1e} (b) stump {'ok' if ok_b else 'wrong'} "
           f"(c) largest loss step {steps.max():.2e} over {len(steps)} trees "
           f"(d) {'identical' if ok_d else 'different'}")


def test_4_louvain(capsys):
    t0 = time.perf_counter()
    A = np.zeros((8, 8))
    for block in (range(4), range(4, 8)):
        for i in block:
            for j in block:
                if i != j:
                    A[i, j] = 1.0
    A[3, 4] = A[4, 3] = 1.0
    part = louvain(graph_from_matrix(A))
    c = part.community_of
    ok_cliques = len({c[f"v{i}"] for i in range(4)}) == 1 and len({c[f"v{i}"] for i in range(4, 8)}) == 1 \
        and c["v0"] != c["v4"]
    T = np.zeros((6, 6))
    for tri in ((0, 1, 2), (3, 4, 5)):
        for i in tri:
            for j in tri:
                if i != j:
                    T[i, j] = 1.0
    gt = graph_from_matrix(T)
    q_tri = modularity(gt, louvain(gt))
    ok_tri = abs(q_tri - 0.5) <= 1e-12 and abs(modularity_matrix_all(T)[1].max() - 0.5) <= 1e-12
    planted = louvain_hit_rate(louvain, modularity, graph_from_matrix, planted_graph)
    unstructured = louvain_hit_rate(louvain, modularity, graph_from_matrix, random_graph)
    dt = time.perf_counter() - t0
    ok = ok_cliques and ok_tri and planted >= 0.95 and dt < 30
    report(capsys, 4, ok, f"two cliques {'recovered' if ok_cliques else 'missed'}, triangles Q={q_tri:.12f}, "
                          f"exhaustive-max rate {planted:.3f} (community-structured graphs; "
                          f"{unstructured:.3f} on unstructured graphs), {dt:.1f} s")


def test_5_link_level(capsys, link_runs):
    runs, elapsed = link_runs
    model, base, npc = [], [], []
    for r in runs:
        y = r["table"].labels[r["rows"]]
        model.append(average_precision(r["oof"], y))
        base.append(average_precision(r["np"][r["rows"]], y))
        npc.append(y.mean())
    m, b, p = np.mean(model), np.mean(base), np.mean(npc)
    ok = m - b >= 0.10 and b > p and m > p and elapsed < 600
    per_seed = ", ".join(f"{a:.3f}/{c:.3f}" for a, c in zip(model, base))
    report(capsys, 5, ok, f"mean AP model {m:.4f}, NP {b:.4f}, NPC {p:.4f}, gap {100 * (m - b):.2f} points; "
                          f"per seed model/NP {per_seed}; {elapsed:.0f} s")


def test_6_ablation(capsys, link_runs):
    r = link_runs[0][0]
    sub = r["table"].rows(r["rows"])
    aps = ablation(sub, ("interpersonal", "motion"), r["gcfg"], r["cfg"].cv_folds, r["cfg"].seed)
    prev = sub.labels.mean()
    drop_inter = aps["none"] - aps["interpersonal"]
    drop_motion = aps["none"] - aps["motion"]
    ok = aps["interpersonal"] < 1.5 * prev and drop_motion < drop_inter
    report(capsys, 6, ok, f"AP all {aps['none']:.4f}, without interpersonal {aps['interpersonal']:.4f} "
                          f"({aps['interpersonal'] / prev:.2f}x prevalence), without motion {aps['motion']:.4f}")


def test_7_group_detection(capsys):
    r = run_link(1, 3.0)
    table, info, gcfg, cfg = r["table"], r["info"], r["gcfg"], r["cfg"]
    model = fit_rows(table.X, table.labels, gcfg, None, r["rows"])
    prob, _ = pipeline.predict_all(table, info, gcfg, model, cfg)
    metrics, _ = pipeline.evaluate(table, r["np"], prob, info, cfg)
    best = metrics["groups"]["model"]["best"]
    np_best = metrics["groups"]["np"]["best"]
    ok = (best["node_accuracy"] >= 0.85 and best["group_accuracy"] >= 0.80
          and best["node_accuracy"] > np_best["node_accuracy"]
          and best["group_accuracy"] > np_best["group_accuracy"])
    report(capsys, 7, ok, f"model best resolution {best['resolution']}: node {best['node_accuracy']:.4f}, "
                          f"group {best['group_accuracy']:.4f}; NP best resolution {np_best['resolution']}: "
                          f"node {np_best['node_accuracy']:.4f}, group {np_best['group_accuracy']:.4f}")


def test_8_imbalance_weight(capsys):
    labels = generate_scenario(ScenarioConfig(rng_seed=8)).label_grid().labels
    pos = int(np.count_nonzero(labels))
    neg = labels.size - pos
    w = positive_weight(labels)
    y = np.zeros(607563 + 38332, dtype=np.uint8)
    y[:38332] = 1
    published = positive_weight(y)
    ok = w == neg / pos and published == 607563 / 38332 and abs(published - 15.850021) < 1e-6
    report(capsys, 8, ok, f"simulator {neg}/{pos} = {w:.6f}; published counts {published:.6f}")


def test_9_cross_correlation(capsys):
    rng = np.random.default_rng(9)
    worst, lag_ok = 0.0, True
    for _ in range(100):
        n = int(rng.integers(1000, 1300))
        a = np.convolve(rng.normal(size=n + 40), np.ones(rng.integers(1, 40)), mode="same")[:n]
        shift = int(rng.integers(-400, 401))
        b = np.roll(a, shift) + rng.normal(scale=rng.uniform(0.05, 3) * a.std(), size=n)
        peak, lag = xcorr_features(a, b)
        ref_peak, ref_lag = brute_xcorr(a, b, 100, 10, 5.0)
        worst = max(worst, abs(peak - ref_peak))
        lag_ok &= lag == ref_lag
    base = np.convolve(rng.normal(size=1400), np.ones(15) / 15, mode="same")
    _, planted = xcorr_features(base[200:1200], base[0:1000])
    ok = worst <= 1e-9 and lag_ok and planted == 2.0
    report(capsys, 9, ok, f"max |peak - oracle| {worst:.1e}, lags {'agree' if lag_ok else 'differ'}, "
                          f"planted 2.0 s shift recovered as {planted} s")


def test_10_determinism(capsys, tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[gbdt]\nn_trees = 20\ncv_folds = 4\ntuning_fraction = 0.4\n\n[grid]\ntune_folds = 3\n\n"
                   "[simulator]\nn_participants = 10\nduration_s = 600\n")
    outputs = []
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "2")):
        code = main(["pipeline", "--config", str(ini), "--data-dir", str(tmp_path / f"data_{name}"),
                     "--out-dir", str(tmp_path / name), "--seed", "7", "--jobs", jobs, "--format", "json"])
        assert code == 0
        outputs.append((tmp_path / name / "metrics.json").read_bytes())
    ok = outputs[0] == outputs[1] == outputs[2]
    report(capsys, 10, ok, f"metrics.json {'byte-identical' if ok else 'differs'} across two runs and --jobs 1/2 "
                           f"({len(outputs[0])} bytes)")
