"""Per-(pair, second) feature vectors.

Feature families:

* interpersonal: mean and absolute difference of the two directional coin RSSI values
* device position: one-hot of the two phones' pockets (canonical pair orientation)
* indoor positioning: absolute difference of distances to each ceiling beacon
* motion: time-since-moving difference and cross-correlation peak/lag of the
  linear acceleration, gravity and rotation-rate magnitudes

Every time-series feature also gets min/max/mean/std over a trailing window.
Missing values stay NaN; the learner routes them natively.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import multiprocessing as mp

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sfft

from .core import Pocket, canonical_pairs
from .errors import WindowTooShort

INTERPERSONAL = "interpersonal"
DEVICE_POSITION = "device_position"
INDOOR_POSITIONING = "indoor_positioning"
MOTION = "motion"
ALL_GROUPS = (INTERPERSONAL, DEVICE_POSITION, INDOOR_POSITIONING, MOTION)
# indoor positioning is opt-in (see FeatureOptions and the features.groups config key)
DEFAULT_GROUPS = (INTERPERSONAL, DEVICE_POSITION, MOTION)

MOTION_SIGNALS = (("linear_acc", "linear_acc_mag"),
                  ("gravity", "gravity_mag"),
                  ("rotation_rate", "rotation_rate_mag"))
STATS = ("min", "max", "mean", "std")
POSITIONS = ("LL", "LR", "RL", "RR")


@dataclass(frozen=True)
class FeatureOptions:
    window_s: int = 10
    max_lag_s: float = 5.0
    move_threshold_g: float = 0.15
    sample_rate: int = 100
    xcorr_chunk_s: int = 300

    def __post_init__(self):
        if self.window_s < 1:
            raise ValueError("window_s must be >= 1")
        if not 0 <= self.max_lag_s < self.window_s:
            raise ValueError("max_lag_s must be in [0, window_s)")
        if self.move_threshold_g <= 0:
            raise ValueError("move_threshold_g must be positive")


def feature_schema(groups=ALL_GROUPS, n_ceiling=5):
    """Ordered ``(name, group)`` slots for the requested feature families."""
    groups = set(groups)
    unknown = groups - set(ALL_GROUPS)
    if unknown:
        raise ValueError(f"unknown feature groups {sorted(unknown)}")
    base, series = [], []
    if INTERPERSONAL in groups:
        series += [("prox_rssi_mean", INTERPERSONAL), ("prox_rssi_diff", INTERPERSONAL)]
    if DEVICE_POSITION in groups:
        base += [(f"device_position_{p}", DEVICE_POSITION) for p in POSITIONS]
    if INDOOR_POSITIONING in groups:
        series += [(f"ceiling_beacon_{k}_diff", INDOOR_POSITIONING) for k in range(1, n_ceiling + 1)]
    if MOTION in groups:
        series.append(("time_since_moving_diff", MOTION))
        for sig, _ in MOTION_SIGNALS:
            series += [(f"device_{sig}_ccf_lag", MOTION), (f"device_{sig}_ccf_max", MOTION)]
    # family order: interpersonal, device position, indoor, motion
    order = {g: i for i, g in enumerate(ALL_GROUPS)}
    current = sorted(base + series, key=lambda s: order[s[1]])
    window = [(f"{name}_{st}", g) for name, g in series for st in STATS]
    return current + window


def group_of_feature(name):
    if name.startswith("prox_rssi"):
        return INTERPERSONAL
    if name.startswith("device_position"):
        return DEVICE_POSITION
    if name.startswith("ceiling_beacon"):
        return INDOOR_POSITIONING
    if name.startswith(("time_since_moving", "device_")):
        return MOTION
    raise ValueError(f"unrecognised feature {name!r}")


# ---------------------------------------------------------------------------
# single-feature operations


def interpersonal_features(rssi_ij, rssi_ji):
    a = np.asarray(rssi_ij, dtype=float)
    b = np.asarray(rssi_ji, dtype=float)
    mean, diff = (a + b) / 2.0, np.abs(a - b)
    if mean.ndim == 0:
        return float(mean), float(diff)
    return mean, diff


def device_position_onehot(meta_i, meta_j):
    key = ("L" if Pocket(meta_i.device_pocket) == Pocket.LEFT else "R") + \
          ("L" if Pocket(meta_j.device_pocket) == Pocket.LEFT else "R")
    return {f"device_position_{p}": float(p == key) for p in POSITIONS}


def ceiling_diff(d_i, d_j):
    return np.abs(np.asarray(d_i, dtype=float) - np.asarray(d_j, dtype=float))


def moving_seconds(lin_acc_mag, sample_rate=100, threshold_g=0.15, n_seconds=None):
    """A participant is moving at second s iff any sample in it exceeds the threshold."""
    x = np.asarray(lin_acc_mag, dtype=float)
    T = len(x) // sample_rate if n_seconds is None else n_seconds
    return (x[:T * sample_rate].reshape(T, sample_rate) > threshold_g).any(axis=1)


def time_since_moving(moving):
    """Seconds since the last moving second (0 while moving; s+1 if never moved)."""
    moving = np.asarray(moving, dtype=bool)
    idx = np.arange(moving.shape[-1])
    last = np.maximum.accumulate(np.where(moving, idx, -1), axis=-1)
    return (idx - last).astype(float)


def time_since_moving_diff(lin_acc_i, lin_acc_j, s=None, sample_rate=100, threshold_g=0.15):
    """``|tsm_i - tsm_j|`` per second, NaN while both participants are moving.

    Returns the full per-second series, or the value at second ``s``.
    """
    mi = moving_seconds(lin_acc_i, sample_rate, threshold_g)
    mj = moving_seconds(lin_acc_j, sample_rate, threshold_g)
    out = _tsm_diff(mi, mj)
    return out if s is None else float(out[s])


def _tsm_diff(mi, mj):
    out = np.abs(time_since_moving(mi) - time_since_moving(mj))
    out[mi & mj] = np.nan
    return out


def _zscore_windows(w):
    """Zero-mean, unit-variance rows; constant rows become zeros and are flagged."""
    mu = w.mean(axis=1, keepdims=True)
    sd = w.std(axis=1, keepdims=True)
    flat = np.ptp(w, axis=1) == 0
    sd[flat] = 1.0
    z = (w - mu) / sd
    z[flat] = 0.0
    return z, flat


def _peak(ccf, max_lag, sample_rate, flat):
    """Peak value and lag (seconds) of correlation rows ordered by lag -max_lag..max_lag."""
    arg = np.argmax(ccf, axis=1)
    peak = ccf[np.arange(len(arg)), arg]
    lag = (arg - max_lag) / sample_rate
    peak[flat] = 0.0
    lag[flat] = 0.0
    return peak, lag


def _xcorr_spectra_pair(fa, fb, n, nfft, max_lag):
    c = sfft.irfft(np.conj(fa) * fb, n=nfft, axis=1) / n
    return np.concatenate([c[:, nfft - max_lag:], c[:, :max_lag + 1]], axis=1)


def xcorr_features(sig_i, sig_j, sample_rate=100, window_s=10, max_lag_s=5.0):
    """Peak normalized cross-correlation over the trailing window and its lag.

    Both windows are z-scored; the correlation at lag L is
    ``mean_t z_i[t] * z_j[t + L]`` (zero outside the window), so a positive
    lag means participant j's signal trails i's. Returns ``(max_corr, lag_s)``;
    ``(0.0, 0.0)`` when either window has zero variance.
    """
    n = int(window_s * sample_rate)
    a = np.asarray(sig_i, dtype=float)
    b = np.asarray(sig_j, dtype=float)
    if len(a) < n or len(b) < n:
        raise WindowTooShort(f"need {n} samples, got {min(len(a), len(b))}")
    za, fa_flat = _zscore_windows(a[-n:][None, :])
    zb, fb_flat = _zscore_windows(b[-n:][None, :])
    max_lag = int(round(max_lag_s * sample_rate))
    nfft = sfft.next_fast_len(n + max_lag, real=True)
    ccf = _xcorr_spectra_pair(sfft.rfft(za, n=nfft, axis=1), sfft.rfft(zb, n=nfft, axis=1),
                              n, nfft, max_lag)
    peak, lag = _peak(ccf, max_lag, sample_rate, fa_flat | fb_flat)
    return float(peak[0]), float(lag[0])


def past_window_stats(series, window=10):
    """Trailing-window min, max, mean and population std at every position.

    The window at position s covers ``[s - window + 1, s]`` (truncated at the
    start). NaN entries are skipped; an all-NaN window yields NaN for all four.
    """
    x = np.asarray(series, dtype=float)
    pad = np.full(x.shape[:-1] + (window - 1,), np.nan)
    v = sliding_window_view(np.concatenate([pad, x], axis=-1), window, axis=-1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        lo = np.nanmin(v, axis=-1)
        hi = np.nanmax(v, axis=-1)
        mean = np.clip(np.nanmean(v, axis=-1), lo, hi)
        std = np.nanstd(v, axis=-1)
    std[lo == hi] = 0.0
    return lo, hi, mean, std


# ---------------------------------------------------------------------------
# batched cross-correlation over all pairs

_XCORR_CTX = {}


def _xcorr_chunk(task):
    sig_name, s0, s1 = task
    ctx = _XCORR_CTX
    signals, ia, ib = ctx["signals"][sig_name], ctx["ia"], ctx["ib"]
    hz, n, max_lag, nfft = ctx["hz"], ctx["n"], ctx["max_lag"], ctx["nfft"]
    starts = (np.arange(s0, s1) + 1) * hz - n
    spectra, flats = [], []
    for sig in signals:
        z, flat = _zscore_windows(sliding_window_view(sig, n)[starts])
        spectra.append(sfft.rfft(z, n=nfft, axis=1))
        flats.append(flat)
    peak = np.empty((len(ia), s1 - s0))
    lag = np.empty((len(ia), s1 - s0))
    for p, (a, b) in enumerate(zip(ia, ib)):
        ccf = _xcorr_spectra_pair(spectra[a], spectra[b], n, nfft, max_lag)
        peak[p], lag[p] = _peak(ccf, max_lag, hz, flats[a] | flats[b])
    return sig_name, s0, s1, peak, lag


def xcorr_all_pairs(signals, ia, ib, n_seconds, options=FeatureOptions(), jobs=1):
    """Per-second cross-correlation features for every pair and motion signal.

    ``signals`` maps a signal name to a list of per-participant 100 Hz arrays.
    Returns ``{name: (peak, lag)}`` with ``(n_pairs, n_seconds)`` arrays; seconds
    before a full window has elapsed are NaN.
    """
    hz = options.sample_rate
    n = options.window_s * hz
    max_lag = int(round(options.max_lag_s * hz))
    first = options.window_s - 1
    _XCORR_CTX.clear()
    _XCORR_CTX.update(signals=signals, ia=list(ia), ib=list(ib), hz=hz, n=n, max_lag=max_lag,
                      nfft=sfft.next_fast_len(n + max_lag, real=True))
    out = {name: (np.full((len(ia), n_seconds), np.nan), np.full((len(ia), n_seconds), np.nan))
           for name in signals}
    tasks = [(name, s0, min(s0 + options.xcorr_chunk_s, n_seconds))
             for name in signals for s0 in range(first, n_seconds, options.xcorr_chunk_s)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(jobs, mp_context=mp.get_context("fork")) as pool:
            results = list(pool.map(_xcorr_chunk, tasks))
    else:
        results = map(_xcorr_chunk, tasks)
    for name, s0, s1, peak, lag in results:
        out[name][0][:, s0:s1] = peak
        out[name][1][:, s0:s1] = lag
    _XCORR_CTX.clear()
    return out


# ---------------------------------------------------------------------------
# feature table


@dataclass(eq=False)
class FeatureTable:
    X: np.ndarray              # (rows, features), NaN = Missing
    feature_names: list
    participant_ids: tuple
    pairs: list
    pair_index: np.ndarray     # (rows,) index into pairs
    second: np.ndarray         # (rows,)
    labels: np.ndarray | None  # (rows,) uint8

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_seconds(self):
        return int(self.second.max()) + 1 if len(self.second) else 0

    def pair_ids(self):
        return np.array([f"{a}|{b}" for a, b in self.pairs])[self.pair_index]

    def select(self, names):
        cols = [self.feature_names.index(n) for n in names]
        return FeatureTable(self.X[:, cols], list(names), self.participant_ids, self.pairs,
                            self.pair_index, self.second, self.labels)

    def without_groups(self, groups):
        groups = set(groups)
        return self.select([n for n in self.feature_names if group_of_feature(n) not in groups])

    def rows(self, mask):
        return FeatureTable(self.X[mask], self.feature_names, self.participant_ids, self.pairs,
                            self.pair_index[mask], self.second[mask],
                            None if self.labels is None else self.labels[mask])

    def to_frame(self):
        df = pd.DataFrame(self.X, columns=self.feature_names)
        df.insert(0, "pair_id", self.pair_ids())
        df.insert(1, "second", self.second)
        df.insert(2, "label", -1 if self.labels is None else self.labels.astype(int))
        return df

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path):
        df = pd.read_csv(path, float_precision="round_trip")
        pair_ids = df["pair_id"].astype(str).to_numpy()
        pairs = sorted({tuple(p.split("|")) for p in set(pair_ids)})
        lookup = {f"{a}|{b}": i for i, (a, b) in enumerate(pairs)}
        pair_index = np.array([lookup[p] for p in pair_ids], dtype=np.int64)
        pids = tuple(sorted({m for p in pairs for m in p}))
        labels = df["label"].to_numpy()
        names = [c for c in df.columns if c not in ("pair_id", "second", "label")]
        return cls(df[names].to_numpy(dtype=float), names, pids, pairs, pair_index,
                   df["second"].to_numpy(dtype=np.int64),
                   None if (labels < 0).all() else labels.astype(np.uint8))


def build_feature_table(clean, grid=None, feature_groups=ALL_GROUPS, options=FeatureOptions(), jobs=1):
    """One row per (pair, second), pair-major; slots outside ``feature_groups`` are omitted."""
    pids = clean.participant_ids
    T = clean.duration_s
    pairs = canonical_pairs(pids)
    if grid is not None and list(grid.pairs) != pairs:
        raise ValueError("label grid pairs do not match the session participants")
    index = {p: i for i, p in enumerate(pids)}
    ia = np.array([index[a] for a, _ in pairs], dtype=np.intp)
    ib = np.array([index[b] for _, b in pairs], dtype=np.intp)
    P = len(pairs)
    schema = feature_schema(feature_groups, clean.n_ceiling)
    names = [n for n, _ in schema]
    current = {}

    if INTERPERSONAL in feature_groups:
        mean, diff = interpersonal_features(clean.coin_rssi[ia, ib], clean.coin_rssi[ib, ia])
        current["prox_rssi_mean"], current["prox_rssi_diff"] = mean, diff
    if DEVICE_POSITION in feature_groups:
        metas = clean.participants
        for p, (a, b) in enumerate(zip(ia, ib)):
            for name, v in device_position_onehot(metas[a], metas[b]).items():
                current.setdefault(name, np.zeros((P, T)))[p] = v
    if INDOOR_POSITIONING in feature_groups:
        diff = ceiling_diff(clean.ceiling_dist[ia], clean.ceiling_dist[ib])
        for k in range(clean.n_ceiling):
            current[f"ceiling_beacon_{k + 1}_diff"] = diff[:, k]
    if MOTION in feature_groups:
        hz = options.sample_rate
        moving = np.array([moving_seconds(clean.motion[p].linear_acc_mag, hz, options.move_threshold_g, T)
                           for p in pids])
        current["time_since_moving_diff"] = np.stack([_tsm_diff(moving[a], moving[b])
                                                      for a, b in zip(ia, ib)])
        signals = {sig: [getattr(clean.motion[p], attr) for p in pids] for sig, attr in MOTION_SIGNALS}
        xc = xcorr_all_pairs(signals, ia, ib, T, options, jobs)
        for sig, _ in MOTION_SIGNALS:
            current[f"device_{sig}_ccf_max"], current[f"device_{sig}_ccf_lag"] = xc[sig]

    X = np.empty((P * T, len(names)))
    col = {n: i for i, n in enumerate(names)}
    for name, arr in current.items():
        X[:, col[name]] = arr.reshape(-1)
        if f"{name}_min" in col:
            for st, vals in zip(STATS, past_window_stats(arr, options.window_s)):
                X[:, col[f"{name}_{st}"]] = vals.reshape(-1)
    labels = None if grid is None else grid.labels.reshape(-1).copy()
    return FeatureTable(X, names, pids, pairs, np.repeat(np.arange(P), T), np.tile(np.arange(T), P), labels)
