"""Synthetic sessions with planted group formations.

Agents stand in circular formations facing the centroid, walk between
formations at a fixed speed, or wait alone as hosts that others may walk up
to. From the per-second trace the module synthesises phone-received beacon
RSSI (path loss, body-orientation loss, noise, dropouts) and raw 50 Hz motion
axes, and packages them in the on-disk session layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import truncnorm

from .core import (
    BEACON_COLUMNS,
    MOTION_COLUMNS,
    UNKNOWN_RSSI,
    GroupInterval,
    ParticipantMeta,
    Pocket,
    RawSession,
    assemble_session,
    build_label_grid,
    write_raw_session,
)
from .errors import InfeasibleDensity
from .proximity import PlmParams, plm_rssi

PACKING_SPACING_M = 0.5
_MIN_DISTANCE_M = 0.1


@dataclass(frozen=True)
class ScenarioConfig:
    n_participants: int = 22
    duration_s: int = 2700
    room_width: float = 10.60
    room_depth: float = 8.16
    area_width: float = 6.57
    area_depth: float = 5.36
    beacon_height: float = 3.27
    phone_height: float = 0.8
    ceiling_beacons: tuple | None = None    # (x, y) per beacon; None: quincunx over the area
    pair_mean_s: float = 254.9
    pair_sd_s: float = 161.7
    group_mean_s: float = 117.2
    group_sd_s: float = 139.4
    min_duration_s: float = 5.0
    max_group_size: int = 5
    radius_range: tuple = (0.5, 0.75)
    walk_speed: float = 1.0
    idle_mean_s: float = 40.0
    p_join: float = 0.25                     # walk to an existing formation
    p_pair: float = 0.6                      # walk to a waiting host
    p_wander: float = 0.15                   # walk to a free spot and wait there
    initial_sizes: tuple = (0.15, 0.6, 0.2, 0.05)  # share of agents starting alone, in 2s, 3s, 4s
    min_spacing: float = 1.5                 # gap between people of different units (m)
    rssi_noise_sigma: float = 6.0
    packets_per_second: int = 1
    sensitivity_floor: float = -95.0
    quantize: bool = True
    unknown_rate: float = 0.005
    ceiling_drop_rate: float = 0.0586
    motion_hz: float = 50.0
    coin_params: PlmParams = field(default_factory=PlmParams)
    ceiling_params: PlmParams = field(default_factory=lambda: PlmParams(measured_power=-65.0))
    orientation: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_participants < 2:
            raise ValueError("need at least two participants")
        if self.duration_s < 1:
            raise ValueError("duration_s must be >= 1")
        for name in ("pair_mean_s", "group_mean_s", "walk_speed", "idle_mean_s", "motion_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.area_width > self.room_width or self.area_depth > self.room_depth:
            raise ValueError("interaction area must fit in the room")
        lo, hi = self.radius_range
        if not 0 < lo <= hi:
            raise ValueError("radius_range must satisfy 0 < low <= high")
        if self.max_group_size < 2:
            raise ValueError("max_group_size must be >= 2")
        if self.rssi_noise_sigma < 0:
            raise ValueError("rssi_noise_sigma must be >= 0")
        if self.packets_per_second < 1:
            raise ValueError("packets_per_second must be >= 1")
        if not 0 <= self.unknown_rate < 1 or not 0 <= self.ceiling_drop_rate < 1:
            raise ValueError("rates must be in [0, 1)")
        if min(self.p_join, self.p_pair, self.p_wander) < 0 or self.p_join + self.p_pair + self.p_wander <= 0:
            raise ValueError("action weights must be non-negative and not all zero")

    @property
    def area_origin(self):
        return ((self.room_width - self.area_width) / 2, (self.room_depth - self.area_depth) / 2)

    def beacon_positions(self):
        if self.ceiling_beacons is not None:
            return np.asarray(self.ceiling_beacons, dtype=float).reshape(-1, 2)
        cx, cy = self.room_width / 2, self.room_depth / 2
        dx, dy = self.area_width / 3, self.area_depth / 3
        return np.array([[cx - dx, cy - dy], [cx + dx, cy - dy], [cx, cy],
                         [cx - dx, cy + dy], [cx + dx, cy + dy]])

    def participant_ids(self):
        width = len(str(self.n_participants))
        return [f"P{i + 1:0{width}d}" for i in range(self.n_participants)]


@dataclass(frozen=True, eq=False)
class GroundTruthTrace:
    participant_ids: tuple
    positions: np.ndarray   # (N, T, 2) metres
    headings: np.ndarray    # (N, T) degrees, 0 = +x, counter-clockwise
    moving: np.ndarray      # (N, T) bool, walking during the second
    formation: np.ndarray   # (N, T) int, formation configuration index or -1
    intervals: tuple        # GroupInterval per configuration
    config: ScenarioConfig

    @property
    def duration_s(self):
        return self.positions.shape[1]

    def label_grid(self, min_duration_s=5):
        return build_label_grid(self.intervals, self.participant_ids, self.duration_s, min_duration_s)


# ---------------------------------------------------------------------------
# orientation


_DEFAULT_SIDE_LOSS = {0: 0.0, 1: 3.0, 2: 9.0, 3: 15.0}  # by deviation in 45 degree steps
_POCKET_SIDE_EXTRA = 2.0


@dataclass(frozen=True, eq=False)
class OrientationAttenuation:
    """Extra path loss in dB indexed by relative-bearing bins (receiver, source).

    Bin ``a`` covers bearings ``45 * a`` degrees (counter-clockwise from the
    body's facing direction) for a body with its device or beacon in the left
    pocket. A right-pocket body uses the mirrored bin. ``inf`` means Blocked.
    """

    grid: np.ndarray  # (8, 8)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.shape != (8, 8):
            raise ValueError("attenuation grid must be 8 x 8")
        if np.any(g < 0) or np.isnan(g).any():
            raise ValueError("attenuation must be non-negative")
        object.__setattr__(self, "grid", g)

    @classmethod
    def default(cls):
        g = np.empty((8, 8))
        for a in range(8):
            for b in range(8):
                da, db = min(a, 8 - a), min(b, 8 - b)
                if da + db >= 4:
                    g[a, b] = np.inf
                    continue
                g[a, b] = _DEFAULT_SIDE_LOSS[da] + _DEFAULT_SIDE_LOSS[db]
                # body between the pocket and the other person on the far side
                g[a, b] += _POCKET_SIDE_EXTRA * (a in (1, 2, 3)) + _POCKET_SIDE_EXTRA * (b in (1, 2, 3))
        return cls(g)

    @classmethod
    def none(cls):
        return cls(np.zeros((8, 8)))

    def loss(self, bin_rx, bin_tx, rx_right=False, tx_right=False):
        bin_rx = np.where(rx_right, (8 - np.asarray(bin_rx)) % 8, bin_rx)
        bin_tx = np.where(tx_right, (8 - np.asarray(bin_tx)) % 8, bin_tx)
        return self.grid[bin_rx, bin_tx]


def bearing_bin(angle_deg):
    return np.rint(np.mod(angle_deg, 360.0) / 45.0).astype(np.int64) % 8


# ---------------------------------------------------------------------------
# scenario generation


def packing_capacity(cfg):
    return int(cfg.area_width // PACKING_SPACING_M) * int(cfg.area_depth // PACKING_SPACING_M)


class _World:
    """Mutable state of the agent-based schedule; one instance per generate call."""

    FREE, HOST, WALK, MEMBER = range(4)

    def __init__(self, cfg, rng):
        self.cfg, self.rng = cfg, rng
        n = cfg.n_participants
        self.pos = np.zeros((n, 2))
        self.heading = np.zeros(n)
        self.state = np.full(n, self.FREE)
        self.idle_until = np.zeros(n)
        self.reserved = np.zeros(n, dtype=bool)     # host awaiting a walker
        self.target = np.zeros((n, 2))
        self.goal = [None] * n                      # ("join", fid) | ("pair", host) | ("spot",)
        self.formation_of = np.full(n, -1)
        self.formations = {}                        # fid -> dict
        self.next_fid = 0
        self.intervals = []
        ox, oy = cfg.area_origin
        self.lo = np.array([ox, oy])
        self.hi = self.lo + [cfg.area_width, cfg.area_depth]

    # -- sampling helpers
    def duration(self, size):
        c = self.cfg
        mean, sd = (c.pair_mean_s, c.pair_sd_s) if size == 2 else (c.group_mean_s, c.group_sd_s)
        if sd == 0:
            return max(mean, c.min_duration_s)
        a = (c.min_duration_s - mean) / sd
        return float(truncnorm.rvs(a, np.inf, loc=mean, scale=sd, random_state=self.rng))

    def idle_time(self):
        return float(self.rng.exponential(self.cfg.idle_mean_s))

    def occupied_points(self, exclude=-1):
        """(points, radii) of everything a new spot must keep clear of."""
        pts = [f["centroid"] for f in self.formations.values()]
        rad = [f["radius"] for f in self.formations.values()]
        for i in np.flatnonzero(self.state == self.HOST):
            if i != exclude:
                pts.append(self.pos[i])
                rad.append(self.cfg.radius_range[1])
        for i in np.flatnonzero(self.state == self.WALK):
            if i != exclude:
                pts.append(self.target[i])
                rad.append(self.cfg.radius_range[1] if self.goal[i] and self.goal[i][0] != "join" else 0.0)
        return np.array(pts).reshape(-1, 2), np.asarray(rad, dtype=float)

    def clearance(self, p, radius=0.0, exclude=-1, occ=None):
        pts, rad = self.occupied_points(exclude) if occ is None else occ
        if not len(pts):
            return np.inf
        return float(np.min(np.hypot(*(pts - p).T) - rad)) - radius

    def free_spot(self, exclude=-1, radius=0.0, margin=0.75):
        """A point whose people stay at least ``min_spacing`` from everyone else.

        The interaction area is tried first; when it is full the search widens
        to the whole room. Falls back to the most isolated candidate seen.
        """
        occ = self.occupied_points(exclude)
        room_lo = np.full(2, margin + radius)
        room_hi = np.array([self.cfg.room_width, self.cfg.room_depth]) - margin - radius
        best, best_d = None, -np.inf
        for lo, hi in ((self.lo + margin, self.hi - margin), (room_lo, room_hi)):
            for _ in range(200):
                p = lo + self.rng.random(2) * (hi - lo)
                d = self.clearance(p, radius, occ=occ)
                if d >= self.cfg.min_spacing:
                    return p
                if d > best_d:
                    best, best_d = p, d
        return best

    # -- formations
    def open_formation(self, members, centroid, radius, t, angles):
        fid = self.next_fid
        self.next_fid += 1
        f = {"members": list(members), "centroid": np.asarray(centroid, float), "radius": radius,
             "angle": dict(zip(members, angles)), "start": t, "pending": {}}
        f["ends"] = t + self.duration(len(members))
        self.formations[fid] = f
        for m, a in zip(members, angles):
            self.place_member(fid, m, a)
        return fid

    def place_member(self, fid, m, angle):
        f = self.formations[fid]
        f["angle"][m] = angle
        self.pos[m] = f["centroid"] + f["radius"] * np.array([math.cos(angle), math.sin(angle)])
        self.heading[m] = math.degrees(angle + math.pi) % 360.0
        self.state[m] = self.MEMBER
        self.formation_of[m] = fid

    def close_config(self, fid, t):
        f = self.formations[fid]
        if len(f["members"]) >= 2 and t > f["start"]:
            self.intervals.append(GroupInterval(f"g{len(self.intervals)}", frozenset(f["members"]),
                                                int(f["start"]), int(t)))

    def free_slot_angle(self, fid):
        f = self.formations[fid]
        angles = sorted(a % (2 * math.pi) for a in list(f["angle"].values()) + list(f["pending"].values()))
        gaps = [((angles[(k + 1) % len(angles)] - a) % (2 * math.pi) or 2 * math.pi, a)
                for k, a in enumerate(angles)]
        size, start = max(gaps)
        return start + size / 2

    # -- agent decisions
    def dispatch(self, i, t, avoid_fid=-1):
        """Agent ``i`` (just freed) picks a destination and starts walking."""
        c = self.cfg
        self.state[i] = self.WALK
        self.formation_of[i] = -1
        joinable = [fid for fid, f in self.formations.items()
                    if fid != avoid_fid and len(f["members"]) + len(f["pending"]) < c.max_group_size]
        hosts = [h for h in np.flatnonzero((self.state == self.HOST) & ~self.reserved) if h != i]
        options, weights = [], []
        if joinable:
            options.append("join")
            weights.append(c.p_join)
        if hosts:
            options.append("pair")
            weights.append(c.p_pair)
        options.append("spot")
        weights.append(c.p_wander)
        w = np.asarray(weights, dtype=float)
        if w.sum() == 0:
            w = np.ones_like(w)
        choice = options[int(self.rng.choice(len(options), p=w / w.sum()))]
        if choice == "join":
            fid = joinable[int(self.rng.integers(len(joinable)))]
            f = self.formations[fid]
            angle = self.free_slot_angle(fid)
            f["pending"][i] = angle
            self.target[i] = f["centroid"] + f["radius"] * np.array([math.cos(angle), math.sin(angle)])
            self.goal[i] = ("join", fid)
        elif choice == "pair":
            h = int(hosts[int(self.rng.integers(len(hosts)))])
            self.reserved[h] = True
            r = float(self.rng.uniform(*c.radius_range))
            # stand on whichever side of the host leaves the pair most room
            occ = self.occupied_points(exclude=i)
            keep = np.hypot(*(occ[0] - self.pos[h]).T) > 1e-9
            occ = (occ[0][keep], occ[1][keep])
            lo, hi = np.full(2, 0.25), np.array([c.room_width, c.room_depth]) - 0.25
            best, best_d = None, -np.inf
            for a in self.rng.uniform(0, 2 * math.pi) + np.arange(12) * math.pi / 6:
                tgt = self.pos[h] + 2 * r * np.array([math.cos(a), math.sin(a)])
                if np.any(tgt < lo) or np.any(tgt > hi):
                    continue
                d = self.clearance((self.pos[h] + tgt) / 2, r, occ=occ)
                if d > best_d:
                    best, best_d = tgt, d
            self.target[i] = best if best is not None else np.clip(self.pos[h], lo, hi)
            self.goal[i] = ("pair", h)
        else:
            self.target[i] = self.free_spot(exclude=i)
            self.goal[i] = ("spot",)

    def arrive(self, i, t):
        goal = self.goal[i]
        self.goal[i] = None
        if goal[0] == "join" and goal[1] in self.formations:
            fid = goal[1]
            f = self.formations[fid]
            f["pending"].pop(i, None)
            self.close_config(fid, t)
            f["members"].append(i)
            f["start"] = t
            f["ends"] = t + self.duration(len(f["members"]))
            d = self.pos[i] - f["centroid"]
            self.place_member(fid, i, math.atan2(d[1], d[0]))
            return
        if goal[0] == "pair":
            h = goal[1]
            self.reserved[h] = False
            if self.state[h] == self.HOST:
                centroid = (self.pos[h] + self.pos[i]) / 2
                d = self.pos[h] - centroid
                a = math.atan2(d[1], d[0])
                radius = max(float(np.hypot(*d)), 1e-6)
                self.state[h] = self.MEMBER
                self.open_formation([int(h), i], centroid, radius, t, [a, a + math.pi])
                return
        self.state[i] = self.HOST
        self.idle_until[i] = t + self.idle_time()

    def leave(self, fid, t):
        f = self.formations[fid]
        self.close_config(fid, t)
        k = int(self.rng.integers(len(f["members"])))
        leaver = f["members"].pop(k)
        del f["angle"][leaver]
        if len(f["members"]) >= 2:
            f["start"] = t
            f["ends"] = t + self.duration(len(f["members"]))
        else:
            for m in f["members"]:
                self.state[m] = self.HOST
                self.formation_of[m] = -1
                self.idle_until[m] = t + self.idle_time()
            del self.formations[fid]
            for j in range(len(self.goal)):
                g = self.goal[j]
                if g is not None and g[0] == "join" and g[1] == fid:
                    self.goal[j] = ("spot",)
        self.dispatch(leaver, t, avoid_fid=fid)

    # -- initial layout
    def populate(self, ids_order):
        c = self.cfg
        shares = np.asarray(c.initial_sizes, dtype=float)
        shares = shares / shares.sum()
        k = 0
        n = len(ids_order)
        while k < n:
            size = int(self.rng.choice(len(shares), p=shares)) + 1
            size = min(size, n - k, c.max_group_size)
            members = [int(m) for m in ids_order[k:k + size]]
            k += size
            r = float(self.rng.uniform(*c.radius_range)) if size > 1 else 0.0
            spot = self.free_spot(radius=r)
            if size == 1:
                m = members[0]
                self.pos[m] = spot
                self.heading[m] = float(self.rng.uniform(0, 360))
                self.state[m] = self.HOST
                self.idle_until[m] = self.idle_time()
                continue
            phase = float(self.rng.uniform(0, 2 * math.pi))
            angles = [phase + 2 * math.pi * q / size for q in range(size)]
            fid = self.open_formation(members, spot, r, 0, angles)
            # already mid-conversation when recording starts
            f = self.formations[fid]
            f["ends"] = max(c.min_duration_s, f["ends"] * float(self.rng.uniform(0.2, 1.0)))

    def step_walkers(self, t):
        walking = np.flatnonzero(self.state == self.WALK)
        arrived = []
        for i in walking:
            d = self.target[i] - self.pos[i]
            dist = float(np.hypot(*d))
            if dist > 1e-9:
                self.heading[i] = math.degrees(math.atan2(d[1], d[0])) % 360.0
            if dist <= self.cfg.walk_speed:
                self.pos[i] = self.target[i]
                arrived.append(int(i))
            else:
                self.pos[i] = self.pos[i] + d / dist * self.cfg.walk_speed
        return arrived


def generate_scenario(cfg=ScenarioConfig()):
    """Simulate the per-second ground truth for a session."""
    cap = packing_capacity(cfg)
    if cfg.n_participants > cap:
        raise InfeasibleDensity(f"{cfg.n_participants} agents exceed the {cap} positions available "
                                f"at {PACKING_SPACING_M} m spacing in the interaction area")
    rng = np.random.default_rng(cfg.rng_seed)
    w = _World(cfg, rng)
    n, T = cfg.n_participants, cfg.duration_s
    w.populate(rng.permutation(n))

    positions = np.zeros((n, T, 2))
    headings = np.zeros((n, T))
    moving = np.zeros((n, T), dtype=bool)
    formation = np.full((n, T), -1, dtype=np.int64)
    for t in range(T):
        for fid in sorted(w.formations):
            if fid in w.formations and w.formations[fid]["ends"] <= t:
                w.leave(fid, t)
        for i in np.flatnonzero((w.state == w.HOST) & ~w.reserved & (w.idle_until <= t)):
            if w.state[i] == w.HOST and not w.reserved[i]:
                w.dispatch(int(i), t)
        positions[:, t] = w.pos
        headings[:, t] = w.heading
        formation[:, t] = np.where(w.state == w.MEMBER, w.formation_of, -1)
        moving[:, t] = w.state == w.WALK
        for i in w.step_walkers(t):
            w.arrive(i, t + 1)
        # headings recorded for walkers reflect the direction of travel this second
        headings[moving[:, t], t] = w.heading[moving[:, t]]
    for fid in sorted(w.formations):
        w.close_config(fid, T)

    intervals = tuple(sorted(w.intervals, key=lambda g: (g.start_s, sorted(g.members))))
    intervals = tuple(GroupInterval(f"g{k}", g.members, g.start_s, g.end_s) for k, g in enumerate(intervals))
    pids = cfg.participant_ids()
    named = tuple(GroupInterval(g.group_id, frozenset(pids[m] for m in g.members), g.start_s, g.end_s)
                  for g in intervals)
    return GroundTruthTrace(tuple(pids), positions, headings, moving, formation, named, cfg)


# ---------------------------------------------------------------------------
# sensor synthesis


def _substream(seed, stream, agent):
    return np.random.default_rng([int(seed), stream, agent])


def participant_metadata(cfg):
    rng = _substream(cfg.rng_seed, 0, 0)
    out = []
    for k, pid in enumerate(cfg.participant_ids()):
        left = bool(rng.random() < 0.5)
        out.append(ParticipantMeta(pid, Pocket.LEFT if left else Pocket.RIGHT,
                                   Pocket.RIGHT if left else Pocket.LEFT, k + 1))
    return out


def synth_rssi(trace, participants, plm=None, atten=None, noise_sigma=None, seed=None):
    """Beacon sightings per receiving phone as DataFrames in the beacon log layout."""
    cfg = trace.config
    plm = cfg.coin_params if plm is None else plm
    if atten is None:
        atten = OrientationAttenuation.default() if cfg.orientation else OrientationAttenuation.none()
    sigma = cfg.rssi_noise_sigma if noise_sigma is None else noise_sigma
    seed = cfg.rng_seed if seed is None else seed
    N, T = len(participants), trace.duration_s
    pos, head = trace.positions, trace.headings
    dev_right = np.array([p.device_pocket == Pocket.RIGHT for p in participants])
    bcn_right = np.array([p.beacon_pocket == Pocket.RIGHT for p in participants])
    minors = np.array([p.beacon_minor for p in participants])
    beacons = trace.config.beacon_positions()
    dz = cfg.beacon_height - cfg.phone_height
    secs = np.arange(T)

    out = {}
    for i, p in enumerate(participants):
        rng = _substream(seed, 1, i)
        frames = []
        others = np.array([j for j in range(N) if j != i])
        diff = pos[others] - pos[i][None]                       # (N-1, T, 2)
        dist = np.maximum(np.hypot(diff[..., 0], diff[..., 1]), _MIN_DISTANCE_M)
        bearing_ij = np.degrees(np.arctan2(diff[..., 1], diff[..., 0]))
        rel_rx = bearing_ij - head[i][None]
        rel_tx = bearing_ij + 180.0 - head[others]
        loss = atten.loss(bearing_bin(rel_rx), bearing_bin(rel_tx), dev_right[i], bcn_right[others][:, None])
        base = plm_rssi(dist, plm) - loss
        for _ in range(cfg.packets_per_second):
            rssi = base + (rng.normal(0.0, sigma, base.shape) if sigma > 0 else 0.0)
            if cfg.quantize:
                rssi = np.rint(rssi)
            keep = np.isfinite(rssi) & (rssi >= cfg.sensitivity_floor)
            rssi = np.minimum(rssi, 0.0)
            unknown = rng.random(base.shape) < cfg.unknown_rate
            jo, js = np.nonzero(keep | unknown)
            vals = np.where(unknown[jo, js], UNKNOWN_RSSI, rssi[jo, js])
            frames.append(pd.DataFrame({"t": js + rng.random(len(js)), "source_kind": "coin",
                                        "source_id": minors[others][jo], "rssi": vals,
                                        "measured_power": plm.measured_power}))
        # ceiling beacons: 3-D distance, no orientation term
        cd = np.sqrt(np.sum((pos[i][:, None, :] - beacons[None]) ** 2, axis=-1) + dz * dz)  # (T, K)
        crssi = plm_rssi(cd, cfg.ceiling_params) + (rng.normal(0.0, sigma, cd.shape) if sigma > 0 else 0.0)
        if cfg.quantize:
            crssi = np.rint(crssi)
        keep = (rng.random(cd.shape) >= cfg.ceiling_drop_rate) & (crssi >= cfg.sensitivity_floor)
        ts, ks = np.nonzero(keep)
        frames.append(pd.DataFrame({"t": secs[ts] + rng.random(len(ts)), "source_kind": "ceiling",
                                    "source_id": ks + 1, "rssi": np.minimum(crssi[ts, ks], 0.0),
                                    "measured_power": cfg.ceiling_params.measured_power}))
        df = pd.concat(frames, ignore_index=True)
        df = df.sort_values("t", kind="mergesort").reset_index(drop=True)
        df["source_id"] = df["source_id"].astype(np.int64)
        df["rssi"] = df["rssi"].astype(float)
        df["measured_power"] = df["measured_power"].astype(float)
        out[p.participant_id] = df[BEACON_COLUMNS]
    return out


GAIT_HZ = 1.8
STILL_NOISE_G = 0.02
_GAIT_DIR = np.array([0.6, 0.0, 0.8])


def synth_motion(trace, seed=None, rate_hz=None):
    """Raw motion axes (g and rad/s) per participant at a jittered native rate."""
    cfg = trace.config
    seed = cfg.rng_seed if seed is None else seed
    hz = cfg.motion_hz if rate_hz is None else rate_hz
    T = trace.duration_s
    n = int(T * hz)
    out = {}
    for i, pid in enumerate(trace.participant_ids):
        rng = _substream(seed, 2, i)
        t = np.arange(n) / hz
        t[1:] += rng.uniform(-0.2, 0.2, n - 1) / hz
        sec = np.minimum(np.floor(t).astype(np.int64), T - 1)
        walk = trace.moving[i, sec]
        phase = rng.uniform(0, 2 * math.pi)
        gait = np.where(walk, 0.3 + 0.2 * np.sin(2 * math.pi * GAIT_HZ * t + phase), 0.0)
        lin = gait[:, None] * _GAIT_DIR[None] + rng.normal(0.0, STILL_NOISE_G, (n, 3))
        tilt = rng.normal(0.0, 0.01, (n, 3))
        grav = np.column_stack([tilt[:, 0], tilt[:, 1], 1.0 + tilt[:, 2] + 0.05 * gait])
        turn = np.diff(np.unwrap(np.radians(trace.headings[i])), append=np.radians(trace.headings[i, -1]))
        rot = rng.normal(0.0, 0.02, (n, 3))
        rot[:, 2] += turn[sec] + np.where(walk, 0.3 * np.sin(2 * math.pi * GAIT_HZ * t + phase + 1.0), 0.0)
        out[pid] = pd.DataFrame(np.column_stack([t, lin, grav, rot]), columns=MOTION_COLUMNS)
    return out


def simulate_raw(cfg=ScenarioConfig()):
    """Run the scenario and sensor models; returns ``(RawSession, trace)``."""
    trace = generate_scenario(cfg)
    participants = participant_metadata(cfg)
    beacons = synth_rssi(trace, participants)
    motion = synth_motion(trace)
    raw = RawSession(participants, beacons, motion, list(trace.intervals), True)
    return raw, trace


def simulate_session(cfg=ScenarioConfig()):
    """In-memory :class:`~groupsense.core.SessionDataset` plus its ground-truth trace."""
    raw, trace = simulate_raw(cfg)
    return assemble_session(raw), trace


def write_scenario(cfg, out_dir):
    raw, trace = simulate_raw(cfg)
    write_raw_session(raw, out_dir)
    return trace
