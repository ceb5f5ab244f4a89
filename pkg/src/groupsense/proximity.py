"""RSSI to distance conversion and the normalized-proximity baseline score."""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRange, NonPositiveDistance, UnknownRssi

# coin beacons at the lowest broadcast power; calibration constant, not a measured value
DEFAULT_COIN_MEASURED_POWER = -75.0
DEFAULT_PATH_LOSS_EXPONENT = 1.5


@dataclass(frozen=True)
class PlmParams:
    measured_power: float = DEFAULT_COIN_MEASURED_POWER
    path_loss_exponent: float = DEFAULT_PATH_LOSS_EXPONENT
    obstacle_loss: float = 0.0

    def __post_init__(self):
        if not self.path_loss_exponent > 0:
            raise ValueError("path_loss_exponent must be positive")


def plm_distance(rssi, params=PlmParams()):
    """Log-distance path loss model: RSSI (dBm) to metres.

    Accepts scalars or arrays. ``None`` or NaN inputs raise :class:`UnknownRssi`
    for scalars; array inputs propagate NaN so callers can impute afterwards.
    """
    if rssi is None:
        raise UnknownRssi("cannot convert an Unknown RSSI to distance")
    if np.ndim(rssi) == 0:
        if np.isnan(rssi):
            raise UnknownRssi("cannot convert an Unknown RSSI to distance")
        return float(10.0 ** ((params.measured_power - rssi - params.obstacle_loss)
                              / (10.0 * params.path_loss_exponent)))
    rssi = np.asarray(rssi, dtype=float)
    return 10.0 ** ((params.measured_power - rssi - params.obstacle_loss)
                    / (10.0 * params.path_loss_exponent))


def plm_rssi(distance, params=PlmParams()):
    """Inverse of :func:`plm_distance`."""
    d = np.asarray(distance, dtype=float)
    if np.any(~(d > 0)):
        raise NonPositiveDistance(f"distance must be > 0, got {distance!r}")
    out = params.measured_power - params.obstacle_loss - 10.0 * params.path_loss_exponent * np.log10(d)
    return float(out) if np.ndim(distance) == 0 else out


def normalized_proximity(distances, x_min=None, x_max=None):
    """Min-max normalize distances into an interaction score in [0, 1].

    The closest observed distance maps to 1 and the farthest to 0. Bounds
    default to the extrema over the whole array (all pairs and seconds).
    """
    d = np.asarray(distances, dtype=float)
    lo = np.nanmin(d) if x_min is None else x_min
    hi = np.nanmax(d) if x_max is None else x_max
    if not hi > lo:
        raise DegenerateRange(f"x_max ({hi}) must exceed x_min ({lo})")
    return (hi - d) / (hi - lo)


def pair_distances(clean):
    """Per-pair, per-second distance from the mean of both directions' filled RSSI.

    Rows follow the canonical pair order of the session. Returns ``(pairs, D)``
    with ``D`` of shape ``(n_pairs, n_seconds)``.
    """
    from .core import canonical_pairs

    pids = clean.participant_ids
    pairs = canonical_pairs(pids)
    index = {p: i for i, p in enumerate(pids)}
    ia = np.array([index[a] for a, _ in pairs], dtype=np.intp)
    ib = np.array([index[b] for _, b in pairs], dtype=np.intp)
    mean_rssi = (clean.coin_rssi[ia, ib] + clean.coin_rssi[ib, ia]) / 2.0
    return pairs, plm_distance(mean_rssi, clean.coin_params)


def np_scores(clean, x_min=None, x_max=None):
    """Normalized-proximity interaction score per pair and second."""
    pairs, d = pair_distances(clean)
    return pairs, normalized_proximity(d, x_min, x_max)
