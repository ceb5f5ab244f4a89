"""Pair-wise cross-validation and grid search for the boosted ensemble."""
from __future__ import annotations

import itertools
import multiprocessing as mp
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyGrid, TooFewPairs
from .model import GbdtConfig, Presorted, fit_rows

DEFAULT_GRID = {
    "max_depth": [4, 6, 8, 10],
    "colsample_bytree": [0.2, 0.4, 0.6, 0.8, 1.0],
    "subsample": [0.5, 0.75, 1.0],
    "learning_rate": [0.01, 0.05, 0.1],
}


def pair_folds(pair_ids, k, seed=0):
    """Assign each distinct pair to one of ``k`` folds after a seeded shuffle.

    Returns ``{pair: fold}``. Fold sizes differ by at most one pair.
    """
    uniq = np.unique(pair_ids)
    if len(uniq) < k:
        raise TooFewPairs(f"{len(uniq)} pairs cannot fill {k} folds")
    perm = np.random.default_rng(seed).permutation(uniq)
    return {int(p): f for f, chunk in enumerate(np.array_split(perm, k)) for p in chunk}


@dataclass(frozen=True, eq=False)
class CvResult:
    predictions: np.ndarray   # out-of-fold probability per row
    fold_of_row: np.ndarray
    folds: list               # per fold: (test row indices, predictions)
    models: list


_CV_CTX = {}


def _cv_fold(f):
    c = _CV_CTX
    X, y, fold_of_row, cols = c["X"], c["y"], c["fold_of_row"], c["cols"]
    test = np.flatnonzero(fold_of_row == f)
    train = np.flatnonzero(fold_of_row != f)
    model = fit_rows(X, y, c["cfg"], c["ps"], train, c["columns"], c["feature_names"])
    return test, model.predict_proba(X[np.ix_(test, cols)]), model


def cross_validate(X, y, pair_index, cfg=GbdtConfig(), k=10, seed=0, presorted=None,
                   columns=None, feature_names=None, keep_models=False, jobs=1):
    """k-fold cross-validation split by pair, so no pair is in train and test of a fold.

    Folds run in ``jobs`` worker processes when ``jobs > 1``; each fold's
    model is fully determined by its inputs, so results do not depend on it.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y)
    pair_index = np.asarray(pair_index)
    assign = pair_folds(pair_index, k, seed)
    lookup = np.full(int(pair_index.max()) + 1, -1, dtype=np.int64)
    for p, f in assign.items():
        lookup[p] = f
    fold_of_row = lookup[pair_index]
    ps = presorted if presorted is not None else Presorted.build(X)
    cols = np.arange(X.shape[1]) if columns is None else np.asarray(columns)
    _CV_CTX.update(X=X, y=y, fold_of_row=fold_of_row, cols=cols, cfg=cfg, ps=ps, columns=columns,
                   feature_names=feature_names)
    try:
        if jobs > 1:
            with mp.get_context("fork").Pool(min(jobs, k)) as pool:
                results = pool.map(_cv_fold, range(k), chunksize=1)
        else:
            results = [_cv_fold(f) for f in range(k)]
    finally:
        _CV_CTX.clear()
    preds = np.full(len(y), np.nan)
    folds, models = [], []
    for test, p, model in results:
        preds[test] = p
        folds.append((test, p))
        if keep_models:
            models.append(model)
    return CvResult(preds, fold_of_row, folds, models)


def expand_grid(grid):
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise EmptyGrid("parameter grid is empty")
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def grid_search(X, y, pair_index, grid=DEFAULT_GRID, base=GbdtConfig(), folds=5, seed=0,
                columns=None, presorted=None, jobs=1):
    """Exhaustive search maximising pooled out-of-fold Average Precision.

    Ties go to the smaller ``max_depth``, then the smaller ``learning_rate``,
    then the earlier grid entry. Returns ``(best_config, results)`` where
    results is a list of ``(params, ap)`` in grid order.
    """
    from ..evaluation import average_precision

    combos = expand_grid(grid)
    ps = presorted if presorted is not None else Presorted.build(np.ascontiguousarray(X, dtype=float))
    results = []
    for params in combos:
        cfg = base.with_(**params)
        cv = cross_validate(X, y, pair_index, cfg, folds, seed, ps, columns, jobs=jobs)
        results.append((params, average_precision(cv.predictions, y)))

    def key(i):
        params, ap = results[i]
        return (-ap, params.get("max_depth", base.max_depth),
                params.get("learning_rate", base.learning_rate), i)

    best = min(range(len(results)), key=key)
    return base.with_(**results[best][0]), results
