"""Resampling, magnitudes and RSSI imputation.

Turns a :class:`~groupsense.core.SessionDataset` into a gap-free
:class:`CleanSession`: motion at exactly 100 Hz, per-second directional
coin-beacon RSSI with out-of-range seconds filled, and per-second distances
to every ceiling beacon with gaps interpolated.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CEILING, COIN, MOTION_HZ, MotionSeries
from .errors import AllMissing, NonMonotonicTimestamps, TooFewSamples
from .proximity import PlmParams, plm_distance

DEFAULT_CEILING_MEASURED_POWER = -65.0


def magnitude(xyz):
    xyz = np.asarray(xyz, dtype=float)
    return np.sqrt(np.sum(xyz * xyz, axis=-1))


def resample_motion(t, samples, duration_s=None, target_hz=MOTION_HZ, participant_id="", t0=0.0):
    """Linearly interpolate raw axis samples onto a uniform grid, then take magnitudes.

    ``samples`` has nine columns: linear acceleration, gravity and rotation
    rate triples. Grid points outside the raw span take the nearest endpoint.
    """
    t = np.asarray(t, dtype=float)
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 9:
        raise ValueError("expected (n, 9) raw motion samples")
    if len(t) < 2:
        raise TooFewSamples(f"{participant_id or 'motion'}: need at least 2 samples, got {len(t)}")
    if np.any(np.diff(t) <= 0):
        raise NonMonotonicTimestamps(participant_id)
    if duration_s is None:
        duration_s = int(np.floor(t[-1])) + 1
    grid = np.arange(int(round(duration_s * target_hz))) / target_hz
    res = np.empty((len(grid), 9))
    for c in range(9):
        res[:, c] = np.interp(grid, t, samples[:, c])
    return MotionSeries(participant_id, float(target_hz), magnitude(res[:, 0:3]),
                        magnitude(res[:, 3:6]), magnitude(res[:, 6:9]), t0)


def impute_ceiling(distances, participant="?", beacon="?"):
    """Fill gaps (NaN) in a per-second distance series.

    Interior gaps are linearly interpolated; leading and trailing gaps take the
    nearest observed value.
    """
    d = np.asarray(distances, dtype=float)
    seen = np.flatnonzero(~np.isnan(d))
    if seen.size == 0:
        raise AllMissing(participant, beacon)
    if seen.size == d.size:
        return d.copy()
    return np.interp(np.arange(d.size), seen, d[seen])


def impute_coin(distances, global_max_distance):
    """Replace out-of-range seconds with the dataset-wide maximum distance.

    Returns the filled series and a boolean mask of filled entries.
    """
    d = np.asarray(distances, dtype=float)
    filled = np.isnan(d)
    return np.where(filled, global_max_distance, d), filled


@dataclass(frozen=True, eq=False)
class CleanSession:
    participants: tuple
    duration_s: int
    motion: dict
    coin_rssi: np.ndarray       # (N, N, T) receiver i, broadcaster j
    coin_filled: np.ndarray     # (N, N, T) bool
    coin_distance: np.ndarray   # (N, N, T)
    ceiling_dist: np.ndarray    # (N, K, T)
    max_coin_distance: float
    min_coin_rssi: float
    coin_params: PlmParams

    @property
    def participant_ids(self):
        return tuple(p.participant_id for p in self.participants)

    @property
    def n_ceiling(self):
        return self.ceiling_dist.shape[1]


def _per_second_mean(shape, flat_index, values):
    size = int(np.prod(shape))
    sums = np.bincount(flat_index, weights=values, minlength=size)
    counts = np.bincount(flat_index, minlength=size)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = sums / counts
    out[counts == 0] = np.nan
    return out.reshape(shape)


def clean_session(ds, coin_params=PlmParams(), ceiling_exponent=1.5,
                  ceiling_measured_power=DEFAULT_CEILING_MEASURED_POWER):
    pids = ds.participant_ids
    N, T = len(pids), ds.duration_s
    s = ds.sightings
    sec = np.floor(s.t).astype(np.int64)
    known = ~np.isnan(s.rssi) & (sec >= 0) & (sec < T)

    minor_to_idx = {p.beacon_minor: i for i, p in enumerate(ds.participants)}
    coin = known & (s.kind == COIN)
    src = np.array([minor_to_idx.get(int(m), -1) for m in s.source_id[coin]], dtype=np.int64)
    rcv = s.receiver[coin].astype(np.int64)
    own = src == rcv  # a phone hearing its own participant's beacon carries no pair information
    flat = (rcv * N + src) * T + sec[coin]
    coin_rssi = _per_second_mean((N, N, T), flat[~own], s.rssi[coin][~own])

    observed = ~np.isnan(coin_rssi)
    if observed.any():
        min_rssi = float(np.nanmin(coin_rssi))
    else:
        min_rssi = -120.0
    dist_obs = plm_distance(coin_rssi, coin_params)
    max_dist = float(plm_distance(min_rssi, coin_params))
    coin_distance, coin_filled = impute_coin(dist_obs, max_dist)
    coin_rssi = np.where(coin_filled, min_rssi, coin_rssi)
    diag = np.arange(N)
    coin_filled[diag, diag, :] = False
    coin_rssi[diag, diag, :] = np.nan
    coin_distance[diag, diag, :] = 0.0

    ceil = known & (s.kind == CEILING)
    K = int(s.source_id[ceil].max()) if ceil.any() else 0
    ceiling_dist = np.empty((N, K, T))
    if K:
        k_idx = s.source_id[ceil].astype(np.int64) - 1
        flat = (s.receiver[ceil].astype(np.int64) * K + k_idx) * T + sec[ceil]
        mean_rssi = _per_second_mean((N, K, T), flat, s.rssi[ceil])
        mp = s.measured_power[ceil]
        mp = np.where(np.isnan(mp), ceiling_measured_power, mp)
        mean_mp = _per_second_mean((N, K, T), flat, mp)
        d = 10.0 ** ((mean_mp - mean_rssi) / (10.0 * ceiling_exponent))
        for i in range(N):
            for k in range(K):
                ceiling_dist[i, k] = impute_ceiling(d[i, k], pids[i], k + 1)

    return CleanSession(ds.participants, T, ds.motion, coin_rssi, coin_filled, coin_distance,
                        ceiling_dist, max_dist, min_rssi, coin_params)
