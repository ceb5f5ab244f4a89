"""Link-, node- and group-level evaluation."""
from __future__ import annotations

import multiprocessing as mp
from dataclasses import dataclass, field

import numpy as np

from .community import DEFAULT_EDGE_FLOOR, build_graph, extract_groups, louvain
from .errors import NoPositives

DEFAULT_RESOLUTIONS = tuple(round(0.1 * k, 1) for k in range(1, 11))


@dataclass(frozen=True, eq=False)
class PrCurve:
    recall: np.ndarray      # one entry per distinct threshold, descending score
    precision: np.ndarray
    thresholds: np.ndarray
    ap: float

    @property
    def points(self):
        return list(zip(self.recall.tolist(), self.precision.tolist()))


def _cumulative_counts(scores, labels):
    """TP and FP counts when predicting positive for score >= each distinct threshold."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if np.isnan(s).any():
        raise ValueError("scores contain NaN")
    if not y.any():
        raise NoPositives("no positive labels; precision-recall is undefined")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    return s[last], tp, fp, int(y.sum())


def pr_curve(scores, labels):
    thr, tp, fp, n_pos = _cumulative_counts(scores, labels)
    recall = tp / n_pos
    precision = tp / (tp + fp)
    ap = float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
    return PrCurve(recall, precision, thr, ap)


def average_precision(scores, labels):
    return pr_curve(scores, labels).ap


@dataclass(frozen=True)
class NpcBaseline:
    """Constant predictor scoring every row with the training positive rate."""
    prior: float

    def predict(self, n_rows):
        return np.full(int(n_rows), self.prior)


def npc_baseline(labels):
    y = np.asarray(labels)
    return NpcBaseline(float(np.count_nonzero(y)) / y.size if y.size else 0.0)


def f_beta(precision, recall, beta=1.0):
    b2 = beta * beta
    denom = b2 * precision + recall
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, (1 + b2) * precision * recall / np.where(denom > 0, denom, 1), 0.0)


def select_threshold(scores, labels, beta=1.0):
    """Score cut maximising F-beta (predict positive when score >= cut).

    Candidates are the distinct scores; ties go to the larger cut.
    """
    thr, tp, fp, n_pos = _cumulative_counts(scores, labels)
    f = f_beta(tp / (tp + fp), tp / n_pos, beta)
    best = np.flatnonzero(f == f.max())
    return float(thr[best].max())


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    accuracy: float
    precision_defined: bool = True
    recall_defined: bool = True

    def to_dict(self):
        return dict(self.__dict__)


def confusion(scores, labels, threshold):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    pred = s >= threshold
    tp = int(np.count_nonzero(pred & y))
    fp = int(np.count_nonzero(pred & ~y))
    fn = int(np.count_nonzero(~pred & y))
    tn = int(np.count_nonzero(~pred & ~y))
    n = tp + fp + fn + tn
    return Confusion(tp, fp, fn, tn,
                     tp / (tp + fp) if tp + fp else 0.0,
                     tp / (tp + fn) if tp + fn else 0.0,
                     (tp + tn) / n if n else 0.0,
                     tp + fp > 0, tp + fn > 0)


# ---------------------------------------------------------------------------
# group matching


@dataclass(frozen=True)
class GroupMatchResult:
    matches: list = field(default_factory=list)  # (detected, truth, jaccard)
    node_correct: int = 0
    node_total: int = 0
    group_correct: int = 0
    group_total: int = 0

    @property
    def node_accuracy(self):
        return self.node_correct / self.node_total if self.node_total else float("nan")

    @property
    def group_accuracy(self):
        return self.group_correct / self.group_total if self.group_total else float("nan")


def match_groups(detected, truth, participants=None):
    """Greedy one-to-one matching of detected and truth groups by Jaccard similarity.

    Only sets of two or more members count as groups. A group is correct when
    its match is identical. A grouped node is correct when it lies in the
    intersection of its truth group and that group's match; an ungrouped node
    is correct when it is not in any detected group. ``participants`` sets the
    node population (defaults to everyone mentioned).
    """
    det = [frozenset(d) for d in detected if len(d) >= 2]
    tru = [frozenset(t) for t in truth if len(t) >= 2]
    if participants is None:
        participants = set().union(*det, *tru) if det or tru else set()
    participants = set(participants)

    cands = []
    for d in det:
        for t in tru:
            inter = len(d & t)
            if inter:
                cands.append((-inter / len(d | t), -inter, sorted(d), sorted(t), d, t))
    cands.sort(key=lambda c: c[:4])
    used_d, used_t, matches = set(), set(), []
    match_of = {}
    for negj, _, _, _, d, t in cands:
        if d in used_d or t in used_t:
            continue
        used_d.add(d)
        used_t.add(t)
        matches.append((d, t, -negj))
        match_of[t] = d

    in_det = set().union(*det) if det else set()
    truth_of = {v: t for t in tru for v in t}
    node_correct = 0
    for v in participants:
        t = truth_of.get(v)
        if t is None:
            node_correct += v not in in_det
        else:
            node_correct += v in match_of.get(t, ())
    group_correct = sum(d == t for d, t, _ in matches)
    return GroupMatchResult(matches, node_correct, len(participants), group_correct, len(tru))


# ---------------------------------------------------------------------------
# resolution sweep

_SWEEP_CTX = {}


def _sweep_seconds(task):
    seconds = task
    c = _SWEEP_CTX
    probs, pairs, pids, truth = c["probs"], c["pairs"], c["pids"], c["truth"]
    out = np.zeros((len(c["gammas"]), 4), dtype=np.int64)
    for s in seconds:
        col = probs[:, s]
        keep = np.flatnonzero(col >= c["edge_floor"])
        graph = build_graph({pairs[i]: float(col[i]) for i in keep}, pids, c["edge_floor"], s)
        t_groups = truth(s)
        for gi, gamma in enumerate(c["gammas"]):
            groups, _ = extract_groups(louvain(graph, gamma, c["seed"]))
            r = match_groups(groups, t_groups, pids)
            out[gi] += (r.node_correct, r.node_total, r.group_correct, r.group_total)
    return out


def sweep_resolution(probabilities, pairs, participants, truth, resolutions=DEFAULT_RESOLUTIONS,
                     edge_floor=DEFAULT_EDGE_FLOOR, seed=0, jobs=1, seconds=None):
    """Node- and group-level accuracy per resolution value.

    ``probabilities`` is a (pairs, seconds) array aligned with ``pairs``;
    ``truth`` is a LabelGrid or a callable mapping a second to its truth groups.
    Counts are pooled over seconds before dividing.
    """
    probs = np.asarray(probabilities, dtype=float)
    truth_fn = truth.groups_at if hasattr(truth, "groups_at") else truth
    secs = np.arange(probs.shape[1]) if seconds is None else np.asarray(seconds)
    _SWEEP_CTX.update(probs=probs, pairs=list(pairs), pids=tuple(participants), truth=truth_fn,
                      gammas=tuple(resolutions), edge_floor=edge_floor, seed=seed)
    try:
        chunks = [c for c in np.array_split(secs, max(1, min(len(secs), 8 * jobs))) if len(c)]
        if jobs > 1 and len(chunks) > 1:
            with mp.get_context("fork").Pool(jobs) as pool:
                parts = pool.map(_sweep_seconds, chunks)
        else:
            parts = [_sweep_seconds(c) for c in chunks]
    finally:
        _SWEEP_CTX.clear()
    tot = np.sum(parts, axis=0)
    rows = []
    for gamma, (nc, nt, gc, gt) in zip(resolutions, tot):
        rows.append({"resolution": float(gamma),
                     "node_correct": int(nc), "node_total": int(nt),
                     "group_correct": int(gc), "group_total": int(gt),
                     "node_accuracy": nc / nt if nt else float("nan"),
                     "group_accuracy": gc / gt if gt else float("nan")})
    return rows


def best_resolution(rows):
    """Row with the highest node accuracy; ties by group accuracy, then smaller resolution."""
    return min(rows, key=lambda r: (-r["node_accuracy"], -r["group_accuracy"], r["resolution"]))


# ---------------------------------------------------------------------------
# ablation


def ablation(table, drop=(), cfg=None, k=10, seed=0, grid=None, tune_folds=5, presorted=None):
    """Cross-validated AP with all features and with each feature group removed.

    ``drop`` lists feature groups; each entry is removed on its own. With a
    ``grid`` the configuration is re-tuned for every feature subset.
    Returns ``{"none": ap, group: ap, ...}``.
    """
    from .features import group_of_feature
    from .gbdt import GbdtConfig, Presorted, cross_validate, grid_search

    cfg = GbdtConfig() if cfg is None else cfg
    ps = presorted if presorted is not None else Presorted.build(table.X)
    out = {}
    for name in ("none",) + tuple(drop):
        cols = [i for i, n in enumerate(table.feature_names) if group_of_feature(n) != name]
        if not cols:
            out[name] = float("nan")
            continue
        use = cfg
        if grid is not None:
            use, _ = grid_search(table.X, table.labels, table.pair_index, grid, cfg, tune_folds, seed,
                                 columns=cols, presorted=ps)
        cv = cross_validate(table.X, table.labels, table.pair_index, use, k, seed, ps, columns=cols,
                            feature_names=[table.feature_names[i] for i in cols])
        out[name] = average_precision(cv.predictions, table.labels)
    return out
