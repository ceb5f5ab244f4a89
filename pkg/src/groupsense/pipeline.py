"""Pipeline stages shared by the command line and the acceptance suite.

Each stage reads and writes files under the run's output directory so stages
can be re-run independently:

    features.csv      one row per (pair, second) with the feature slots and label
    np_baseline.csv   pair_id, second, score, label
    tuning.json       selected configuration, tuning pairs, decision thresholds
    model.json        trained ensemble
    predictions.csv   pair_id, second, probability, label, split
    partitions.csv    second, participant_id, community_id
    metrics.json      link-, node- and group-level results
    pr_curve.csv      curve, recall, precision, threshold
"""
from __future__ import annotations

import json
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import community as com
from .config import RunConfig
from .core import ingest_session
from .errors import InputMissing
from .evaluation import (
    ablation,
    average_precision,
    best_resolution,
    confusion,
    npc_baseline,
    pr_curve,
    select_threshold,
    sweep_resolution,
)
from .features import FeatureTable, build_feature_table
from .gbdt import GbdtConfig, GbdtModel, Presorted, cross_validate, fit_rows, grid_search
from .preprocess import clean_session
from .proximity import np_scores
from .simulator import write_scenario

FILES = {
    "features": "features.csv",
    "np": "np_baseline.csv",
    "tuning": "tuning.json",
    "model": "model.json",
    "predictions": "predictions.csv",
    "partitions": "partitions.csv",
    "metrics": "metrics.json",
    "pr_curve": "pr_curve.csv",
}


def _out(cfg, key):
    return Path(cfg.out_dir) / FILES[key]


def _need(path):
    path = Path(path)
    if not path.exists():
        raise InputMissing(f"required input not found: {path} (run the producing stage first)")
    return path


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _clean_floats(obj):
    """Round-trip-safe JSON values: numpy scalars to python, NaN kept as NaN."""
    if isinstance(obj, dict):
        return {str(k): _clean_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean_floats(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# stages


def stage_simulate(cfg: RunConfig):
    trace = write_scenario(replace(cfg.simulator, rng_seed=cfg.seed), cfg.data_dir)
    return {"data_dir": str(cfg.data_dir), "participants": len(trace.participant_ids),
            "seconds": trace.duration_s, "configurations": len(trace.intervals)}


def build_tables(cfg: RunConfig, dataset=None):
    """Clean a session and build its feature table and NP baseline scores."""
    ds = dataset if dataset is not None else ingest_session(_need(cfg.data_dir))
    clean = clean_session(ds, cfg.plm, cfg.ceiling_path_loss_exponent, cfg.ceiling_measured_power)
    table = build_feature_table(clean, ds.labels, cfg.feature_groups, cfg.features, cfg.jobs)
    _, scores = np_scores(clean)
    return ds, table, scores.reshape(-1)


def stage_features(cfg: RunConfig, dataset=None):
    _, table, scores = build_tables(cfg, dataset)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(_out(cfg, "features"))
    labels = -1 if table.labels is None else table.labels.astype(int)
    pd.DataFrame({"pair_id": table.pair_ids(), "second": table.second, "score": scores,
                  "label": labels}).to_csv(_out(cfg, "np"), index=False)
    return {"rows": len(table), "features": len(table.feature_names),
            "positive_fraction": float(table.labels.mean()) if table.labels is not None else None}


def load_features(cfg):
    table = FeatureTable.from_csv(_need(_out(cfg, "features")))
    if table.labels is None:
        raise InputMissing("features.csv has no labels; supervised stages need labels.csv in the session")
    return table


def load_np(cfg):
    df = pd.read_csv(_need(_out(cfg, "np")), float_precision="round_trip")
    return df["score"].to_numpy(float)


def split_tuning_pairs(n_pairs, fraction, seed):
    """Seeded choice of tuning pairs; the rest are evaluation pairs."""
    n_tune = max(1, int(round(fraction * n_pairs)))
    perm = np.random.default_rng([seed, 7]).permutation(n_pairs)
    return np.sort(perm[:n_tune])


def tune(table, np_score, cfg: RunConfig):
    """Select a configuration on the tuning pairs and the decision thresholds there."""
    tune_pairs = split_tuning_pairs(len(table.pairs), cfg.tuning_fraction, cfg.seed)
    rows = np.flatnonzero(np.isin(table.pair_index, tune_pairs))
    X, y, pi = table.X[rows], table.labels[rows], table.pair_index[rows]
    ps = Presorted.build(X)
    base = cfg.gbdt.with_(rng_seed=cfg.seed)
    results = []
    if cfg.grid_enabled:
        best, results = grid_search(X, y, pi, cfg.grid, base, cfg.tune_folds, cfg.seed, presorted=ps,
                                    jobs=cfg.jobs)
    else:
        best = base
    cv = cross_validate(X, y, pi, best, cfg.tune_folds, cfg.seed, ps, jobs=cfg.jobs)
    return {
        "config": asdict(best),
        "tuning_pairs": [int(p) for p in tune_pairs],
        "tuning_ap": average_precision(cv.predictions, y),
        "threshold": select_threshold(cv.predictions, y, cfg.beta),
        "np_threshold": select_threshold(np_score[rows], y, cfg.beta),
        "grid": [{"params": p, "ap": ap} for p, ap in results],
    }


def stage_tune(cfg: RunConfig):
    table = load_features(cfg)
    info = tune(table, load_np(cfg), cfg)
    _dump_json(_clean_floats(info), _out(cfg, "tuning"))
    return {"tuning_ap": info["tuning_ap"], "threshold": info["threshold"], "config": info["config"]}


def _load_tuning(cfg):
    with open(_need(_out(cfg, "tuning"))) as fh:
        info = json.load(fh)
    return info, GbdtConfig(**info["config"])


def eval_rows(table, tuning_pairs):
    return np.flatnonzero(~np.isin(table.pair_index, np.asarray(tuning_pairs, dtype=np.int64)))


def stage_train(cfg: RunConfig):
    table = load_features(cfg)
    info, gcfg = _load_tuning(cfg)
    rows = eval_rows(table, info["tuning_pairs"])
    model = fit_rows(table.X, table.labels, gcfg, None, rows, feature_names=table.feature_names)
    model.save(_out(cfg, "model"))
    return {"trees": len(model.trees), "training_rows": int(len(rows))}


def predict_all(table, info, gcfg, model, cfg):
    """Out-of-fold probabilities on evaluation pairs; final-model probabilities on tuning pairs."""
    rows = eval_rows(table, info["tuning_pairs"])
    prob = np.empty(len(table))
    split = np.empty(len(table), dtype=object)
    sub = table.X[rows]
    cv = cross_validate(sub, table.labels[rows], table.pair_index[rows], gcfg, cfg.cv_folds, cfg.seed,
                        jobs=cfg.jobs)
    prob[rows] = cv.predictions
    split[rows] = "evaluation"
    tune_rows = np.setdiff1d(np.arange(len(table)), rows)
    if len(tune_rows):
        prob[tune_rows] = model.predict_proba(table.X[tune_rows])
        split[tune_rows] = "tuning"
    return prob, split


def stage_predict(cfg: RunConfig):
    table = load_features(cfg)
    info, gcfg = _load_tuning(cfg)
    model = GbdtModel.load(_need(_out(cfg, "model")))
    prob, split = predict_all(table, info, gcfg, model, cfg)
    pd.DataFrame({"pair_id": table.pair_ids(), "second": table.second, "probability": prob,
                  "label": table.labels.astype(int), "split": split}).to_csv(
        _out(cfg, "predictions"), index=False, float_format=None)
    return {"rows": len(table)}


def load_predictions(cfg):
    df = pd.read_csv(_need(_out(cfg, "predictions")), float_precision="round_trip")
    return df


def _grid_from_rows(pair_ids, seconds, values):
    """(pairs, P x T array) in canonical pair order from row-wise values."""
    pairs = sorted({tuple(p.split("|")) for p in set(pair_ids)})
    lookup = {f"{a}|{b}": i for i, (a, b) in enumerate(pairs)}
    T = int(seconds.max()) + 1
    out = np.full((len(pairs), T), np.nan)
    out[[lookup[p] for p in pair_ids], seconds] = values
    return pairs, out


def truth_from_labels(pairs, labels):
    """Truth groups per second from pair labels (connected components of positive pairs)."""
    pids = sorted({m for p in pairs for m in p})

    def at(s):
        parent = {p: p for p in pids}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for (a, b), lab in zip(pairs, labels[:, s]):
            if lab:
                parent[find(a)] = find(b)
        comp = {}
        for p in pids:
            comp.setdefault(find(p), set()).add(p)
        return [frozenset(c) for c in comp.values() if len(c) >= 2]

    return pids, at


def detect_groups(prob_grid, pairs, pids, resolution, edge_floor, seed):
    rows = []
    for s in range(prob_grid.shape[1]):
        col = prob_grid[:, s]
        g = com.build_graph({pairs[i]: float(col[i]) for i in np.flatnonzero(col >= edge_floor)},
                            pids, edge_floor, s)
        part = com.louvain(g, resolution, seed)
        rows.extend((s, p, part.community_of[p]) for p in pids)
    return pd.DataFrame(rows, columns=["second", "participant_id", "community_id"])


def stage_groups(cfg: RunConfig, resolution=None):
    df = load_predictions(cfg)
    pairs, grid = _grid_from_rows(df["pair_id"].to_numpy(str), df["second"].to_numpy(int),
                                  df["probability"].to_numpy(float))
    pids = sorted({m for p in pairs for m in p})
    gamma = cfg.resolution if resolution is None else resolution
    parts = detect_groups(grid, pairs, pids, gamma, cfg.edge_floor, cfg.seed)
    parts.to_csv(_out(cfg, "partitions"), index=False)
    return {"rows": len(parts), "resolution": gamma}


def evaluate(table, np_score, prob, info, cfg, presorted=None):
    """Metrics dictionary for one run. ``prob`` holds per-row probabilities."""
    rows = eval_rows(table, info["tuning_pairs"])
    y = table.labels
    ye = y[rows]
    curve = pr_curve(prob[rows], ye)
    np_curve = pr_curve(np_score[rows], ye)
    npc = npc_baseline(ye)
    npc_ap = average_precision(npc.predict(len(ye)), ye)
    cm = confusion(prob[rows], ye, info["threshold"])
    np_cm = confusion(np_score[rows], ye, info["np_threshold"])

    P, T = len(table.pairs), table.n_seconds
    prob_grid = np.full((P, T), np.nan)
    prob_grid[table.pair_index, table.second] = prob
    np_grid = np.full((P, T), np.nan)
    np_grid[table.pair_index, table.second] = np_score
    lab_grid = np.zeros((P, T), dtype=np.uint8)
    lab_grid[table.pair_index, table.second] = y
    pids, truth = truth_from_labels(table.pairs, lab_grid)
    sweep = sweep_resolution(prob_grid, table.pairs, pids, truth, cfg.resolutions, cfg.edge_floor,
                             cfg.seed, cfg.jobs)
    np_sweep = sweep_resolution(np_grid, table.pairs, pids, truth, cfg.resolutions, cfg.edge_floor,
                                cfg.seed, cfg.jobs)
    metrics = {
        "rows": {"evaluation": int(len(rows)), "tuning": int(len(table) - len(rows))},
        "prevalence": float(ye.mean()),
        "link": {
            "model": {"ap": curve.ap, "threshold": info["threshold"], **cm.to_dict()},
            "np": {"ap": np_curve.ap, "threshold": info["np_threshold"], **np_cm.to_dict()},
            "npc": {"ap": npc_ap, "prior": npc.prior},
        },
        "groups": {
            "model": {"sweep": sweep, "best": best_resolution(sweep)},
            "np": {"sweep": np_sweep, "best": best_resolution(np_sweep)},
            "edge_floor": cfg.edge_floor,
        },
        "tuning": {"ap": info["tuning_ap"], "config": info["config"]},
    }
    if cfg.ablation:
        gcfg = GbdtConfig(**info["config"])
        sub = table.rows(rows)
        metrics["ablation"] = ablation(sub, cfg.ablation, gcfg, cfg.cv_folds, cfg.seed)
    curves = {"model": curve, "np": np_curve}
    return _clean_floats(metrics), curves


def write_curves(curves, path):
    frames = []
    for name, c in curves.items():
        frames.append(pd.DataFrame({"curve": name, "recall": c.recall, "precision": c.precision,
                                    "threshold": c.thresholds}))
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)


def stage_evaluate(cfg: RunConfig):
    _need(_out(cfg, "model"))
    table = load_features(cfg)
    info, _ = _load_tuning(cfg)
    df = load_predictions(cfg)
    if len(df) != len(table) or not np.array_equal(df["second"].to_numpy(), table.second):
        raise InputMissing("predictions.csv does not match features.csv; re-run predict")
    metrics, curves = evaluate(table, load_np(cfg), df["probability"].to_numpy(float), info, cfg)
    _dump_json(metrics, _out(cfg, "metrics"))
    write_curves(curves, _out(cfg, "pr_curve"))
    return summary(metrics)


def summary(metrics):
    link = metrics["link"]
    out = {"ap": link["model"]["ap"], "np_ap": link["np"]["ap"], "npc_ap": link["npc"]["ap"],
           "precision": link["model"]["precision"], "recall": link["model"]["recall"]}
    best = metrics["groups"]["model"]["best"]
    out.update(best_resolution=best["resolution"], node_accuracy=best["node_accuracy"],
               group_accuracy=best["group_accuracy"])
    if "ablation" in metrics:
        out["ablation"] = metrics["ablation"]
    return out


def stage_report(cfg: RunConfig):
    from .plots import write_plots

    with open(_need(_out(cfg, "metrics"))) as fh:
        metrics = json.load(fh)
    curves = pd.read_csv(_need(_out(cfg, "pr_curve")), float_precision="round_trip")
    files = write_plots(metrics, curves, cfg.out_dir)
    return {**summary(metrics), "plots": [str(f) for f in files]}


def stage_pipeline(cfg: RunConfig):
    out = {}
    for name, fn in (("simulate", stage_simulate), ("features", stage_features), ("tune", stage_tune),
                     ("train", stage_train), ("predict", stage_predict), ("groups", stage_groups),
                     ("evaluate", stage_evaluate), ("report", stage_report)):
        out[name] = fn(cfg)
    return out
