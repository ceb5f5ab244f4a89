"""Gradient-boosted regression trees with a logistic link.

Second-order boosting: every tree is grown level-wise with exact greedy
split search over the sorted present values of each candidate feature.
Missing values (NaN) are never enumerated; at each split they follow a
learned default direction.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import EmptySchema, SchemaMismatch, SingleClass
from . import _kernels

FORMAT_NAME = "groupsense-gbdt"
FORMAT_VERSION = 1
MIN_SPLIT_GAIN = 1e-12


@dataclass(frozen=True)
class GbdtConfig:
    n_trees: int = 50
    max_depth: int = 4
    colsample_bytree: float = 0.2
    subsample: float = 0.5
    learning_rate: float = 0.05
    positive_weight: float | None = None  # None: count(neg) / count(pos) of the training rows
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    base_score: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("colsample_bytree", "subsample"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.base_score < 1:
            raise ValueError("base_score must be in (0, 1)")
        if self.positive_weight is not None and not self.positive_weight > 0:
            raise ValueError("positive_weight must be positive")
        if self.min_child_weight < 0 or self.reg_lambda < 0:
            raise ValueError("min_child_weight and reg_lambda must be >= 0")

    def with_(self, **kw):
        return replace(self, **kw)


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def logit(p):
    return math.log(p / (1.0 - p))


def logistic_grad_hess(y, p, w=1.0):
    """Gradient and hessian of weighted log-loss with respect to the logit."""
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    g = w * (p - y)
    h = w * p * (1.0 - p)
    if g.ndim == 0:
        return float(g), float(h)
    return g, h


def split_gain(G_L, H_L, G_R, H_R, lam=1.0):
    return 0.5 * (G_L ** 2 / (H_L + lam) + G_R ** 2 / (H_R + lam)
                  - (G_L + G_R) ** 2 / (H_L + H_R + lam))


def weighted_logloss(y, p, w):
    eps = 1e-15
    p = np.clip(p, eps, 1 - eps)
    return float(np.sum(w * -(y * np.log(p) + (1 - y) * np.log(1 - p))) / np.sum(w))


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray       # -1 for leaves
    threshold: np.ndarray
    default_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray         # leaf contribution to the logit (learning rate applied)

    def __len__(self):
        return len(self.feature)

    def add_to(self, X, out):
        _kernels.add_tree_output(X, self.feature, self.threshold, self.default_left,
                                 self.left, self.right, self.value, out)

    def equals(self, other):
        return all(np.array_equal(getattr(self, a), getattr(other, a))
                   for a in ("feature", "threshold", "default_left", "left", "right", "value"))

    def to_dict(self, names, node=0):
        if self.feature[node] < 0:
            return {"nodeid": node, "leaf": float(self.value[node])}
        return {"nodeid": node,
                "split": names[self.feature[node]],
                "split_index": int(self.feature[node]),
                "threshold": float(self.threshold[node]),
                "missing": "left" if self.default_left[node] else "right",
                "children": [self.to_dict(names, int(self.left[node])),
                             self.to_dict(names, int(self.right[node]))]}

    @classmethod
    def from_dict(cls, d):
        nodes = {}

        def walk(n):
            nodes[n["nodeid"]] = n
            for c in n.get("children", ()):
                walk(c)

        walk(d)
        size = max(nodes) + 1
        feat = np.full(size, -1, dtype=np.int64)
        thr = np.zeros(size)
        dl = np.zeros(size, dtype=np.bool_)
        lc = np.full(size, -1, dtype=np.int64)
        rc = np.full(size, -1, dtype=np.int64)
        val = np.zeros(size)
        for i, n in nodes.items():
            if "leaf" in n:
                val[i] = n["leaf"]
            else:
                feat[i] = n["split_index"]
                thr[i] = n["threshold"]
                dl[i] = n["missing"] == "left"
                lc[i], rc[i] = n["children"][0]["nodeid"], n["children"][1]["nodeid"]
        return cls(feat, thr, dl, lc, rc, val)


@dataclass(eq=False)
class GbdtModel:
    trees: list
    config: GbdtConfig
    feature_names: list
    positive_weight: float = 1.0
    train_loss: list = field(default_factory=list)

    @property
    def base_margin(self):
        return logit(self.config.base_score)

    def _matrix(self, X):
        if isinstance(X, dict):
            if set(X) != set(self.feature_names):
                missing = sorted(set(self.feature_names) - set(X))
                extra = sorted(set(X) - set(self.feature_names))
                raise SchemaMismatch(f"row keys differ from schema (missing {missing}, extra {extra})")
            X = [[X[n] for n in self.feature_names]]
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.feature_names):
            raise SchemaMismatch(f"expected {len(self.feature_names)} features, got {X.shape[1]}")
        return np.ascontiguousarray(X)

    def predict_margin(self, X):
        X = self._matrix(X)
        out = np.full(X.shape[0], self.base_margin)
        for t in self.trees:
            t.add_to(X, out)
        return out

    def predict_proba(self, X):
        """Probability of interaction. A dict row returns a float."""
        single = isinstance(X, dict) or np.ndim(X) == 1
        p = sigmoid(self.predict_margin(X))
        return float(p[0]) if single else p

    def equals(self, other):
        return (self.config == other.config and self.feature_names == other.feature_names
                and len(self.trees) == len(other.trees)
                and all(a.equals(b) for a, b in zip(self.trees, other.trees)))

    def to_dict(self):
        return {"format": FORMAT_NAME, "version": FORMAT_VERSION,
                "config": asdict(self.config), "features": list(self.feature_names),
                "positive_weight": self.positive_weight,
                "trees": [t.to_dict(self.feature_names) for t in self.trees]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT_NAME or d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {d.get('format')!r} v{d.get('version')}")
        return cls([Tree.from_dict(t) for t in d["trees"]], GbdtConfig(**d["config"]),
                   list(d["features"]), d["positive_weight"])

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True, eq=False)
class Presorted:
    """Per-feature row order of present values, reusable across folds and column subsets."""

    order: np.ndarray        # flat int32 row indices, present values ascending per feature
    values: np.ndarray       # X values aligned with ``order``
    starts: np.ndarray       # (F + 1,) offsets into ``order``
    missing: np.ndarray      # flat int32 row indices with NaN per feature
    miss_starts: np.ndarray  # (F + 1,) offsets into ``missing``

    @classmethod
    def build(cls, X):
        parts, vals, miss, starts, mstarts = [], [], [], [0], [0]
        for f in range(X.shape[1]):
            col = X[:, f]
            nan = np.isnan(col)
            present = np.flatnonzero(~nan)
            o = present[np.argsort(col[present], kind="stable")]
            parts.append(o.astype(np.int32))
            vals.append(col[o])
            miss.append(np.flatnonzero(nan).astype(np.int32))
            starts.append(starts[-1] + len(o))
            mstarts.append(mstarts[-1] + len(miss[-1]))

        def cat(a, dtype):
            return np.concatenate(a) if a else np.empty(0, dtype=dtype)

        return cls(cat(parts, np.int32), cat(vals, float), np.asarray(starts, dtype=np.int64),
                   cat(miss, np.int32), np.asarray(mstarts, dtype=np.int64))


def _restrict(ps, cols, node_of, n_features):
    selected = np.zeros(n_features, dtype=np.bool_)
    selected[cols] = True
    parts = _kernels.compact_presort(ps.order, ps.values, ps.starts, ps.missing, ps.miss_starts,
                                     selected, node_of >= 0)
    return Presorted(*parts)


def _grow_tree(X, ps, cols, node_of, gh, cfg):
    """Grow one tree over rows with ``node_of == 0``; features are X column indices."""
    lam, mcw = cfg.reg_lambda, cfg.min_child_weight
    feature, threshold, default_left, left, right, value = [], [], [], [], [], []

    def new_node():
        for lst, v in ((feature, -1), (threshold, 0.0), (default_left, False),
                       (left, -1), (right, -1), (value, 0.0)):
            lst.append(v)
        return len(feature) - 1

    level = [new_node()]
    for depth in range(cfg.max_depth + 1):
        m = len(level)
        G, H, cnt = _kernels.node_totals(node_of, gh, m)
        if depth == cfg.max_depth:
            bf = np.full(m, -1, dtype=np.int64)
            bt = np.zeros(m)
            bl = np.zeros(m, dtype=np.bool_)
        else:
            bf, bt, bl, _ = _kernels.find_best_splits(ps.order, ps.values, ps.starts, ps.missing,
                                                      ps.miss_starts, cols, node_of, gh,
                                                      G, H, cnt, lam, mcw, MIN_SPLIT_GAIN)
        child_of = np.full(m, -1, dtype=np.int64)
        nxt = []
        for k, nid in enumerate(level):
            if bf[k] < 0:
                value[nid] = float(-G[k] / (H[k] + lam) * cfg.learning_rate)
                continue
            lc, rc = new_node(), new_node()
            feature[nid], threshold[nid], default_left[nid] = int(bf[k]), float(bt[k]), bool(bl[k])
            left[nid], right[nid] = lc, rc
            child_of[k] = len(nxt)
            nxt += [lc, rc]
        if not nxt:
            break
        _kernels.apply_splits(X, node_of, bf, bt, bl, child_of)
        level = nxt
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(default_left, dtype=np.bool_),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64), np.array(value))


def fit_rows(X, y, cfg, presorted=None, train_rows=None, columns=None, feature_names=None,
             record_loss=False):
    """Fit on a subset of rows and columns of ``X`` without copying it.

    ``train_rows`` are row indices (default: all) and ``columns`` the X
    column indices forming the model schema (default: all). The returned
    model expects matrices with exactly ``columns``, in that order.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y)
    n, F = X.shape
    columns = np.arange(F) if columns is None else np.asarray(columns, dtype=np.int64)
    if len(columns) == 0:
        raise EmptySchema("no features to train on")
    names = list(feature_names) if feature_names is not None else [f"f{c}" for c in columns]
    if len(names) != len(columns):
        raise SchemaMismatch("feature_names must match the selected columns")
    rows = np.arange(n) if train_rows is None else np.asarray(train_rows, dtype=np.int64)
    yt = y[rows].astype(float)
    n_pos = int(yt.sum())
    if n_pos == 0 or n_pos == len(rows):
        raise SingleClass("training rows contain a single class")
    pw = cfg.positive_weight if cfg.positive_weight is not None else (len(rows) - n_pos) / n_pos
    ps = presorted if presorted is not None else Presorted.build(X)

    w = np.where(yt == 1, pw, 1.0)
    rng = np.random.default_rng(cfg.rng_seed)
    n_cols = max(1, int(cfg.colsample_bytree * len(columns)))
    n_rows = max(1, int(cfg.subsample * len(rows)))
    margin = np.full(len(rows), logit(cfg.base_score))
    trees, losses = [], []
    gh = np.zeros((n, 2))
    node_of = np.empty(n, dtype=np.int32)
    for _ in range(cfg.n_trees):
        p = sigmoid(margin)
        if record_loss:
            losses.append(weighted_logloss(yt, p, w))
        g, h = logistic_grad_hess(yt, p, w)
        gh[rows, 0] = g
        gh[rows, 1] = h
        sampled = rows if n_rows == len(rows) else np.sort(rng.choice(rows, n_rows, replace=False))
        cols = columns if n_cols == len(columns) else np.sort(rng.choice(columns, n_cols, replace=False))
        node_of.fill(-1)
        node_of[sampled] = 0
        tree = _grow_tree(X, _restrict(ps, cols, node_of, F), cols, node_of, gh, cfg)
        _kernels.add_tree_output_rows(X, rows, tree.feature, tree.threshold, tree.default_left,
                                      tree.left, tree.right, tree.value, margin)
        trees.append(tree)
    if record_loss:
        losses.append(weighted_logloss(yt, sigmoid(margin), w))

    # re-index split features from X columns to schema positions
    pos = {int(c): i for i, c in enumerate(columns)}
    remapped = []
    for t in trees:
        feat = np.array([pos[int(f)] if f >= 0 else -1 for f in t.feature], dtype=np.int64)
        remapped.append(Tree(feat, t.threshold, t.default_left, t.left, t.right, t.value))
    return GbdtModel(remapped, cfg, names, float(pw), losses)


def fit(X, y, cfg=GbdtConfig(), feature_names=None, record_loss=False):
    """Train a boosted ensemble on the full matrix.

    ``X`` is a (rows, features) float matrix with NaN for Missing, ``y`` the
    0/1 labels.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] == 0:
        raise EmptySchema("feature matrix has no columns")
    return fit_rows(X, y, cfg, feature_names=feature_names, record_loss=record_loss)


def predict_proba(model, X):
    return model.predict_proba(X)
