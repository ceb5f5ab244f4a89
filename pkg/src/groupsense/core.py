"""Domain types, session log ingestion and the per-second pair label grid.

On-disk layout of a session directory::

    metadata.csv          participant_id,device_pocket,beacon_pocket,beacon_minor
    <pid>_beacon.csv      t,source_kind,source_id,rssi,measured_power
    <pid>_motion.csv      t,lin_acc_x,lin_acc_y,lin_acc_z,grav_x,grav_y,grav_z,rot_x,rot_y,rot_z
    labels.csv            group_id,member_ids,start_s,end_s   (optional)

All times inside the toolkit are float seconds from session start; the
per-second index of a timestamp is ``floor(t)``.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
import pandas as pd

from .errors import (
    DuplicateParticipant,
    MalformedRow,
    MissingFile,
    NonMonotonicTimestamps,
    NoPositives,
    OverlappingMembership,
)

UNKNOWN_RSSI = -1
MIN_GROUP_SECONDS = 5
MOTION_HZ = 100

METADATA_COLUMNS = ["participant_id", "device_pocket", "beacon_pocket", "beacon_minor"]
BEACON_COLUMNS = ["t", "source_kind", "source_id", "rssi", "measured_power"]
MOTION_COLUMNS = ["t", "lin_acc_x", "lin_acc_y", "lin_acc_z",
                  "grav_x", "grav_y", "grav_z", "rot_x", "rot_y", "rot_z"]
LABEL_COLUMNS = ["group_id", "member_ids", "start_s", "end_s"]

COIN, CEILING = 0, 1
_KIND_NAMES = {COIN: "coin", CEILING: "ceiling"}
_KIND_CODES = {v: k for k, v in _KIND_NAMES.items()}


class Pocket(str, enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"


@dataclass(frozen=True)
class ParticipantMeta:
    participant_id: str
    device_pocket: Pocket
    beacon_pocket: Pocket
    beacon_minor: int

    def __post_init__(self):
        object.__setattr__(self, "device_pocket", Pocket(self.device_pocket))
        object.__setattr__(self, "beacon_pocket", Pocket(self.beacon_pocket))
        if self.device_pocket == self.beacon_pocket:
            raise ValueError(f"{self.participant_id}: phone and beacon must be in opposite pockets")


@dataclass(frozen=True)
class BeaconSighting:
    t: float
    receiver_id: str
    source_kind: str          # "coin" or "ceiling"
    source_id: int            # beacon minor for coins, 1..K for ceiling beacons
    rssi: float | None        # None means Unknown
    measured_power: float | None = None


@dataclass(frozen=True, eq=False)
class SightingTable:
    """Columnar store of beacon sightings; iterating yields :class:`BeaconSighting`."""

    participant_ids: tuple
    t: np.ndarray
    receiver: np.ndarray        # index into participant_ids
    kind: np.ndarray            # COIN or CEILING
    source_id: np.ndarray
    rssi: np.ndarray            # NaN for Unknown
    measured_power: np.ndarray  # NaN when absent

    def __len__(self):
        return len(self.t)

    def __iter__(self) -> Iterator[BeaconSighting]:
        for i in range(len(self.t)):
            rssi = None if np.isnan(self.rssi[i]) else float(self.rssi[i])
            mp = None if np.isnan(self.measured_power[i]) else float(self.measured_power[i])
            yield BeaconSighting(float(self.t[i]), self.participant_ids[self.receiver[i]],
                                 _KIND_NAMES[int(self.kind[i])], int(self.source_id[i]), rssi, mp)

    def equals(self, other):
        cols = ("t", "receiver", "kind", "source_id", "rssi", "measured_power")
        return self.participant_ids == other.participant_ids and all(
            np.array_equal(getattr(self, c), getattr(other, c), equal_nan=True) for c in cols)


@dataclass(frozen=True, eq=False)
class MotionSeries:
    participant_id: str
    sample_rate: float
    linear_acc_mag: np.ndarray
    gravity_mag: np.ndarray
    rotation_rate_mag: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        n = len(self.linear_acc_mag)
        if len(self.gravity_mag) != n or len(self.rotation_rate_mag) != n:
            raise ValueError("motion arrays must have equal length")

    def __len__(self):
        return len(self.linear_acc_mag)

    def equals(self, other):
        return (self.participant_id == other.participant_id
                and self.sample_rate == other.sample_rate
                and all(np.array_equal(getattr(self, a), getattr(other, a))
                        for a in ("linear_acc_mag", "gravity_mag", "rotation_rate_mag")))


@dataclass(frozen=True)
class GroupInterval:
    group_id: str
    members: frozenset
    start_s: int
    end_s: int  # exclusive

    @property
    def duration(self):
        return self.end_s - self.start_s


def canonical_pairs(participant_ids):
    """All unordered pairs, lexicographically smaller id first, in a fixed order."""
    return list(itertools.combinations(sorted(participant_ids), 2))


@dataclass(frozen=True, eq=False)
class LabelGrid:
    participant_ids: tuple
    pairs: list
    labels: np.ndarray    # (n_pairs, T) uint8
    group_of: np.ndarray  # (n_participants, T) int, -1 when not in a group
    intervals: tuple = ()
    group_names: tuple = ()

    @property
    def n_seconds(self):
        return self.labels.shape[1]

    def pair_index(self, a, b):
        key = (a, b) if a < b else (b, a)
        return self._pair_lookup()[key]

    def _pair_lookup(self):
        lookup = self.__dict__.get("_lookup")
        if lookup is None:
            lookup = {p: i for i, p in enumerate(self.pairs)}
            object.__setattr__(self, "_lookup", lookup)
        return lookup

    def label(self, pair, s):
        return int(self.labels[self.pair_index(*pair), s])

    def group_id(self, participant, s):
        g = int(self.group_of[self.participant_ids.index(participant), s])
        return None if g < 0 else self.group_names[g]

    def groups_at(self, s):
        """Truth groups (frozensets of ids) active at second ``s``."""
        col = self.group_of[:, s]
        out = {}
        for idx, g in enumerate(col):
            if g >= 0:
                out.setdefault(int(g), set()).add(self.participant_ids[idx])
        return [frozenset(m) for _, m in sorted(out.items())]

    def positive_fraction(self):
        return float(self.labels.mean())


@dataclass(frozen=True, eq=False)
class SessionDataset:
    participants: tuple
    sightings: SightingTable
    motion: dict
    duration_s: int
    labels: LabelGrid | None = None

    @property
    def participant_ids(self):
        return tuple(p.participant_id for p in self.participants)

    def meta(self, pid):
        return self.participants[self.participant_ids.index(pid)]


def build_label_grid(groups, participant_ids, duration_s, min_duration_s=MIN_GROUP_SECONDS):
    """Per-second binary pair labels from group membership intervals.

    ``groups`` is an iterable of ``(members, start_s, end_s)`` tuples or
    :class:`GroupInterval` objects, with ``end_s`` exclusive. Intervals shorter
    than ``min_duration_s`` are kept in ``intervals`` but produce no labels.
    """
    pids = tuple(sorted(participant_ids))
    index = {p: i for i, p in enumerate(pids)}
    T = int(duration_s)
    intervals = []
    for k, g in enumerate(groups):
        if not isinstance(g, GroupInterval):
            members, start, end = g
            g = GroupInterval(str(k), frozenset(members), int(start), int(end))
        if len(g.members) < 2:
            raise ValueError(f"group {g.group_id} has fewer than two members")
        unknown = set(g.members) - index.keys()
        if unknown:
            raise ValueError(f"group {g.group_id} references unknown participants {sorted(unknown)}")
        if not (0 <= g.start_s < g.end_s <= T):
            raise ValueError(f"group {g.group_id} interval [{g.start_s}, {g.end_s}) outside [0, {T})")
        intervals.append(g)

    group_of = np.full((len(pids), T), -1, dtype=np.int32)
    names = []
    for g in intervals:
        if g.duration < min_duration_s:
            continue
        gi = len(names)
        names.append(g.group_id)
        for m in sorted(g.members):
            row = group_of[index[m], g.start_s:g.end_s]
            busy = np.flatnonzero(row >= 0)
            if busy.size:
                raise OverlappingMembership(m, g.start_s + int(busy[0]))
            row[:] = gi

    pairs = canonical_pairs(pids)
    ia = np.array([index[a] for a, _ in pairs], dtype=np.intp)
    ib = np.array([index[b] for _, b in pairs], dtype=np.intp)
    ga, gb = group_of[ia], group_of[ib]
    labels = ((ga == gb) & (ga >= 0)).astype(np.uint8)
    return LabelGrid(pids, pairs, labels, group_of, tuple(intervals), tuple(names))


def positive_weight(labels):
    """Instance weight for positives: count(label 0) / count(label 1)."""
    y = labels.labels if isinstance(labels, LabelGrid) else np.asarray(labels)
    pos = int(np.count_nonzero(y))
    if pos == 0:
        raise NoPositives("label set contains no positives")
    return (y.size - pos) / pos


# ---------------------------------------------------------------------------
# raw logs <-> dataset


@dataclass(eq=False)
class RawSession:
    """Logs as they sit on disk: raw axis triples at the device's native rate."""

    participants: list
    beacons: dict          # pid -> DataFrame[BEACON_COLUMNS], rssi -1 for Unknown
    motion: dict           # pid -> DataFrame[MOTION_COLUMNS]
    groups: list = field(default_factory=list)  # GroupInterval
    has_labels: bool = False


def _read_csv(path, columns):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise MalformedRow(path, 1, f"header lacks columns {missing}")
    return df[columns]


def _numeric(df, path, cols, allow_empty=()):
    out = {}
    for c in cols:
        raw = df[c].str.strip()
        if c in allow_empty:
            raw = raw.replace("", "nan")
        try:
            # python float parsing keeps repr-formatted values bit-exact
            out[c] = raw.to_numpy().astype(float)
        except ValueError:
            vals = pd.to_numeric(raw, errors="coerce")
            bad = vals.isna() & ~raw.eq("nan")
            line = int(np.flatnonzero(bad.to_numpy())[0]) + 2
            raise MalformedRow(path, line, f"column {c!r} is not numeric") from None
        if c not in allow_empty and np.isnan(out[c]).any():
            raise MalformedRow(path, int(np.flatnonzero(np.isnan(out[c]))[0]) + 2,
                               f"column {c!r} is not numeric")
    return out


def read_raw_session(log_dir):
    log_dir = Path(log_dir)
    meta_path = log_dir / "metadata.csv"
    meta = _read_csv(meta_path, METADATA_COLUMNS)
    participants, seen, minors = [], set(), set()
    for i, row in enumerate(meta.itertuples(index=False), start=2):
        pid = row.participant_id.strip()
        if not pid:
            raise MalformedRow(meta_path, i, "empty participant_id")
        if pid in seen:
            raise DuplicateParticipant(pid)
        try:
            minor = int(row.beacon_minor)
            p = ParticipantMeta(pid, row.device_pocket.strip(), row.beacon_pocket.strip(), minor)
        except ValueError as exc:
            raise MalformedRow(meta_path, i, str(exc)) from None
        if minor in minors:
            raise MalformedRow(meta_path, i, f"beacon minor {minor} used twice")
        seen.add(pid)
        minors.add(minor)
        participants.append(p)

    for path in sorted(log_dir.glob("*_beacon.csv")) + sorted(log_dir.glob("*_motion.csv")):
        pid = path.name.rsplit("_", 1)[0]
        if pid not in seen:
            raise MalformedRow(path, None, f"log for unregistered participant {pid!r}")

    beacons, motion = {}, {}
    for p in participants:
        pid = p.participant_id
        bpath = log_dir / f"{pid}_beacon.csv"
        b = _read_csv(bpath, BEACON_COLUMNS)
        kinds = b["source_kind"].str.strip()
        bad = ~kinds.isin(list(_KIND_CODES))
        if bad.any():
            raise MalformedRow(bpath, int(np.flatnonzero(bad.to_numpy())[0]) + 2, "unknown source_kind")
        num = _numeric(b, bpath, ["t", "source_id", "rssi", "measured_power"],
                       allow_empty=("measured_power",))
        beacons[pid] = pd.DataFrame({"t": num["t"], "source_kind": kinds.to_numpy(),
                                     "source_id": num["source_id"].astype(np.int64),
                                     "rssi": num["rssi"], "measured_power": num["measured_power"]})
        mpath = log_dir / f"{pid}_motion.csv"
        m = _read_csv(mpath, MOTION_COLUMNS)
        num = _numeric(m, mpath, MOTION_COLUMNS)
        motion[pid] = pd.DataFrame(num, columns=MOTION_COLUMNS)

    groups, has_labels = [], False
    lpath = log_dir / "labels.csv"
    if lpath.is_file():
        has_labels = True
        lab = _read_csv(lpath, LABEL_COLUMNS)
        num = _numeric(lab, lpath, ["start_s", "end_s"])
        for i, row in enumerate(lab.itertuples(index=False)):
            members = frozenset(m.strip() for m in row.member_ids.split(";") if m.strip())
            if not members <= seen:
                raise MalformedRow(lpath, i + 2, f"unregistered member in {row.member_ids!r}")
            groups.append(GroupInterval(row.group_id.strip(), members,
                                        int(num["start_s"][i]), int(num["end_s"][i])))
    return RawSession(participants, beacons, motion, groups, has_labels)


def assemble_session(raw, target_hz=MOTION_HZ, min_group_s=MIN_GROUP_SECONDS):
    """Validate raw logs and turn them into a :class:`SessionDataset`."""
    from .preprocess import resample_motion

    participants = tuple(sorted(raw.participants, key=lambda p: p.participant_id))
    pids = tuple(p.participant_id for p in participants)
    if len(set(pids)) != len(pids):
        dup = next(p for p in pids if pids.count(p) > 1)
        raise DuplicateParticipant(dup)
    minors = {p.beacon_minor for p in participants}

    starts, ends = [], []
    for pid in pids:
        b, m = raw.beacons[pid], raw.motion[pid]
        bt, mt = b["t"].to_numpy(float), m["t"].to_numpy(float)
        if np.any(np.diff(bt) < 0) or np.any(np.diff(mt) <= 0):
            raise NonMonotonicTimestamps(pid)
        for arr in (bt, mt):
            if arr.size:
                starts.append(arr[0])
        if mt.size:
            ends.append(mt[-1])
        coin = b["source_kind"].to_numpy() == "coin"
        stray = coin & ~np.isin(b["source_id"].to_numpy(), list(minors))
        if stray.any():
            raise MalformedRow(f"{pid}_beacon.csv", int(np.flatnonzero(stray)[0]) + 2,
                               "coin beacon minor not registered to any participant")
        rssi = b["rssi"].to_numpy(float)
        bad = (rssi != UNKNOWN_RSSI) & ((rssi < -120) | (rssi > 0))
        if bad.any():
            raise MalformedRow(f"{pid}_beacon.csv", int(np.flatnonzero(bad)[0]) + 2,
                               "rssi outside [-120, 0]")
    if not ends:
        raise MalformedRow("motion logs", None, "no motion samples")
    t0 = min(starts)
    duration = int(math.floor(max(ends) - t0)) + 1

    cols = {k: [] for k in ("t", "receiver", "kind", "source_id", "rssi", "measured_power")}
    motion = {}
    for i, pid in enumerate(pids):
        b = raw.beacons[pid]
        n = len(b)
        cols["t"].append(b["t"].to_numpy(float) - t0)
        cols["receiver"].append(np.full(n, i, dtype=np.int32))
        cols["kind"].append(np.where(b["source_kind"].to_numpy() == "coin", COIN, CEILING).astype(np.int8))
        cols["source_id"].append(b["source_id"].to_numpy(np.int64))
        rssi = b["rssi"].to_numpy(float).copy()
        rssi[rssi == UNKNOWN_RSSI] = np.nan
        cols["rssi"].append(rssi)
        cols["measured_power"].append(b["measured_power"].to_numpy(float))
        m = raw.motion[pid]
        motion[pid] = resample_motion(m["t"].to_numpy(float) - t0, m.iloc[:, 1:].to_numpy(float),
                                      duration, target_hz, participant_id=pid, t0=t0)
    sightings = SightingTable(pids, *(np.concatenate(cols[k]) for k in cols))

    labels = None
    if raw.has_labels:
        labels = build_label_grid(raw.groups, pids, duration, min_group_s)
    return SessionDataset(participants, sightings, motion, duration, labels)


def ingest_session(log_dir, target_hz=MOTION_HZ, min_group_s=MIN_GROUP_SECONDS):
    """Read a session directory into a :class:`SessionDataset`.

    RSSI values of -1 become Unknown and all timestamps are shifted so the
    earliest log entry sits at t=0.
    """
    return assemble_session(read_raw_session(log_dir), target_hz, min_group_s)


def _fmt(x):
    return repr(float(x))


def write_raw_session(raw, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([[p.participant_id, p.device_pocket.value, p.beacon_pocket.value, p.beacon_minor]
                  for p in raw.participants], columns=METADATA_COLUMNS).to_csv(out / "metadata.csv", index=False)
    for p in raw.participants:
        pid = p.participant_id
        b = raw.beacons[pid].copy()
        b["rssi"] = [_fmt(v) if v != UNKNOWN_RSSI else str(UNKNOWN_RSSI) for v in b["rssi"]]
        b["measured_power"] = ["" if np.isnan(v) else _fmt(v) for v in b["measured_power"]]
        b.to_csv(out / f"{pid}_beacon.csv", index=False, columns=BEACON_COLUMNS)
        raw.motion[pid].to_csv(out / f"{pid}_motion.csv", index=False, columns=MOTION_COLUMNS)
    if raw.has_labels:
        pd.DataFrame([[g.group_id, ";".join(sorted(g.members)), g.start_s, g.end_s] for g in raw.groups],
                     columns=LABEL_COLUMNS).to_csv(out / "labels.csv", index=False)


def to_raw_session(ds):
    """Inverse of :func:`assemble_session` for an already-resampled dataset.

    Magnitudes are written on the x axis, which the magnitude step maps back
    to themselves exactly.
    """
    s = ds.sightings
    beacons, motion = {}, {}
    for i, p in enumerate(ds.participants):
        sel = s.receiver == i
        rssi = s.rssi[sel].copy()
        rssi[np.isnan(rssi)] = UNKNOWN_RSSI
        beacons[p.participant_id] = pd.DataFrame({
            "t": s.t[sel], "source_kind": [_KIND_NAMES[int(k)] for k in s.kind[sel]],
            "source_id": s.source_id[sel], "rssi": rssi, "measured_power": s.measured_power[sel]})
        ms = ds.motion[p.participant_id]
        n = len(ms)
        zero = np.zeros(n)
        motion[p.participant_id] = pd.DataFrame(
            np.column_stack([np.arange(n) / ms.sample_rate, ms.linear_acc_mag, zero, zero,
                             ms.gravity_mag, zero, zero, ms.rotation_rate_mag, zero, zero]),
            columns=MOTION_COLUMNS)
    groups = list(ds.labels.intervals) if ds.labels is not None else []
    return RawSession(list(ds.participants), beacons, motion, groups, ds.labels is not None)


def write_session(ds, out_dir):
    write_raw_session(to_raw_session(ds), out_dir)
