"""Triplet selection for charting-network training.

A triplet is (anchor, positive, negative) indices into one dataset, built so
the anchor is expected to lie closer in physical space to the positive than
to the negative. Three rules are provided:

* time-based: positive within ``t_c`` seconds of the anchor,
* genie: positive within ``d_c`` meters of the anchor (uses ground truth),
* simulated trajectories: positives within ``t_c`` pseudo-seconds on one
  simulated straight-line path, negatives from a different path.

All rules draw with uniform probability, exclude the anchor itself from the
positive and negative roles, leave the negative otherwise unrestricted, and
are deterministic functions of their seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import (
    ContainerHeaderError,
    ContainerTruncatedError,
    ContainerVersionError,
    TripletSelectionError,
)

DEFAULT_TIME_WINDOW = 1.5  # seconds
DEFAULT_DISTANCE_BALL = 1.5  # meters
DEFAULT_TRAJECTORY_SPEED = 1.0  # m/s
DEFAULT_CORRIDOR = 0.25  # meters

CCTS_MAGIC = b"CCTS"
CCTS_VERSION = 1
_CCTS_HEADER = struct.Struct("<4sIQ")


@dataclass(frozen=True)
class TripletSet:
    """Immutable batch of (anchor, positive, negative) index triples."""

    anchors: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray
    rule: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        for name in ("anchors", "positives", "negatives"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.uint64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.anchors) == len(self.positives) == len(self.negatives)):
            raise TripletSelectionError("anchor/positive/negative arrays must share one length")
        if np.any(self.positives == self.anchors):
            raise TripletSelectionError("positive must differ from anchor")
        if np.any(self.negatives == self.anchors):
            raise TripletSelectionError("negative must differ from anchor")

    def __len__(self) -> int:
        return len(self.anchors)


@dataclass(frozen=True)
class TimeSelectionConfig:
    t_c: float = DEFAULT_TIME_WINDOW
    count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.t_c <= 0:
            raise TripletSelectionError(f"t_c must be positive, got {self.t_c}")
        if self.count < 1:
            raise TripletSelectionError(f"count must be >= 1, got {self.count}")


@dataclass(frozen=True)
class GenieSelectionConfig:
    d_c: float = DEFAULT_DISTANCE_BALL
    count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.d_c <= 0:
            raise TripletSelectionError(f"d_c must be positive, got {self.d_c}")
        if self.count < 1:
            raise TripletSelectionError(f"count must be >= 1, got {self.count}")


@dataclass(frozen=True)
class SimTrajectory:
    """A straight-line constant-velocity path through the point cloud.

    ``member_indices`` are the datapoints within the corridor, ordered by
    their projection onto the segment; ``pseudo_times`` are the projected
    arclengths divided by speed.
    """

    start: np.ndarray
    end: np.ndarray
    speed: float
    member_indices: np.ndarray
    pseudo_times: np.ndarray

    def __len__(self) -> int:
        return len(self.member_indices)


def _draw_excluding(rng: np.random.Generator, n: int, excluded: np.ndarray) -> np.ndarray:
    """Uniform draw from [0, n) \\ {excluded[i]} for each slot, vectorized."""
    raw = rng.integers(0, n - 1, size=len(excluded))
    return raw + (raw >= excluded)


def select_time_based(dataset: Dataset, config: TimeSelectionConfig) -> TripletSet:
    """Positives within ``t_c`` seconds of the anchor; anchors and negatives
    uniform over the whole dataset (anchor excluded from both roles)."""
    n = len(dataset)
    t = dataset.timestamps
    lo_all = np.searchsorted(t, t - config.t_c, side="left")
    hi_all = np.searchsorted(t, t + config.t_c, side="right")
    counts = hi_all - lo_all - 1  # window always contains the anchor itself
    if np.any(counts < 1):
        idx = int(np.flatnonzero(counts < 1)[0])
        raise TripletSelectionError(
            f"datapoint {idx} has no other datapoint within {config.t_c} s", index=idx
        )

    rng = np.random.default_rng(config.seed)
    anchors = rng.integers(0, n, size=config.count)
    lo = lo_all[anchors]
    pos = lo + rng.integers(0, counts[anchors])
    pos += pos >= anchors
    negatives = _draw_excluding(rng, n, anchors)
    return TripletSet(
        anchors=anchors,
        positives=pos,
        negatives=negatives,
        rule="time",
        params={"t_c": config.t_c},
        seed=config.seed,
    )


class _GridIndex:
    """Uniform-cell spatial hash over D-dimensional positions for radius queries."""

    def __init__(self, positions: np.ndarray, cell: float):
        self.positions = positions
        self.cell = cell
        ids = np.floor(positions / cell).astype(np.int64)
        self.dim = positions.shape[1]
        self.buckets: dict[tuple, np.ndarray] = {}
        order = np.lexsort(ids.T[::-1])
        sorted_ids = ids[order]
        change = np.flatnonzero(np.any(np.diff(sorted_ids, axis=0) != 0, axis=1)) + 1
        starts = np.concatenate([[0], change, [len(order)]])
        for a, b in zip(starts[:-1], starts[1:]):
            self.buckets[tuple(sorted_ids[a])] = order[a:b]
        self._offsets = np.stack(
            np.meshgrid(*([np.arange(-1, 2)] * self.dim), indexing="ij"), axis=-1
        ).reshape(-1, self.dim)

    def neighbors_within(self, index: int, radius: float) -> np.ndarray:
        """Indices (excluding ``index``) within ``radius`` of point ``index``."""
        center = self.positions[index]
        cell_id = np.floor(center / self.cell).astype(np.int64)
        chunks = []
        for off in self._offsets:
            bucket = self.buckets.get(tuple(cell_id + off))
            if bucket is not None:
                chunks.append(bucket)
        cand = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
        cand = cand[cand != index]
        if cand.size == 0:
            return cand
        dist = np.linalg.norm(self.positions[cand] - center, axis=1)
        return np.sort(cand[dist <= radius])


def select_genie(dataset: Dataset, config: GenieSelectionConfig) -> TripletSet:
    """Positives within ``d_c`` meters of the anchor in ground truth; anchors
    and negatives uniform over the whole dataset (anchor excluded)."""
    n = len(dataset)
    positions = dataset.positions
    grid = _GridIndex(positions, config.d_c)
    for i in range(n):
        if grid.neighbors_within(i, config.d_c).size == 0:
            raise TripletSelectionError(
                f"datapoint {i} has no neighbor within {config.d_c} m", index=i
            )

    rng = np.random.default_rng(config.seed)
    anchors = rng.integers(0, n, size=config.count)
    positives = np.empty(config.count, dtype=np.int64)
    uniq, inverse = np.unique(anchors, return_inverse=True)
    slot_order = np.argsort(inverse, kind="stable")
    group_sizes = np.bincount(inverse, minlength=len(uniq))
    starts = np.concatenate([[0], np.cumsum(group_sizes)])
    for ui, anchor in enumerate(uniq):
        cand = grid.neighbors_within(int(anchor), config.d_c)
        slots = slot_order[starts[ui] : starts[ui + 1]]
        positives[slots] = cand[rng.integers(0, cand.size, size=len(slots))]
    negatives = _draw_excluding(rng, n, anchors)
    return TripletSet(
        anchors=anchors,
        positives=positives,
        negatives=negatives,
        rule="genie",
        params={"d_c": config.d_c},
        seed=config.seed,
    )


def simulate_trajectories(
    dataset: Dataset,
    r: int,
    speed: float = DEFAULT_TRAJECTORY_SPEED,
    corridor: float = DEFAULT_CORRIDOR,
    seed: int = 0,
    max_attempts_per_segment: int = 200,
) -> list[SimTrajectory]:
    """Sample ``r`` straight-line segments with endpoints uniform in the
    bounding box of the (projected 2-D) ground-truth positions.

    A segment's members are the datapoints within ``corridor`` meters of it
    whose projection falls between the endpoints; members get pseudo-times
    equal to projected arclength / speed. Segments with fewer than two
    members are resampled under a bounded retry budget.
    """
    if r < 1:
        raise TripletSelectionError(f"r must be >= 1, got {r}")
    if speed <= 0 or corridor <= 0:
        raise TripletSelectionError("speed and corridor must be positive")
    pts = dataset.positions[:, :2]
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    rng = np.random.default_rng(seed)
    trajectories: list[SimTrajectory] = []
    budget = r * max_attempts_per_segment
    attempts = 0
    while len(trajectories) < r:
        if attempts >= budget:
            raise TripletSelectionError(
                f"could not place {r} trajectories with >= 2 members within "
                f"{budget} attempts (corridor {corridor} m)"
            )
        attempts += 1
        start = rng.uniform(lo, hi)
        end = rng.uniform(lo, hi)
        seg = end - start
        length = float(np.linalg.norm(seg))
        if length == 0.0:
            continue
        unit = seg / length
        rel = pts - start
        along = rel @ unit
        perp = np.linalg.norm(rel - along[:, None] * unit[None, :], axis=1)
        mask = (along >= 0.0) & (along <= length) & (perp <= corridor)
        members = np.flatnonzero(mask)
        if members.size < 2:
            continue
        order = np.lexsort((members, along[members]))
        members = members[order]
        trajectories.append(
            SimTrajectory(
                start=start,
                end=end,
                speed=speed,
                member_indices=members,
                pseudo_times=along[members] / speed,
            )
        )
    return trajectories


def select_sim_trajectory_triplets(
    trajectories: list[SimTrajectory],
    t_c: float = DEFAULT_TIME_WINDOW,
    count: int = 1,
    seed: int = 0,
    max_rounds: int = 200,
) -> TripletSet:
    """Anchor and positive from one uniformly chosen trajectory within ``t_c``
    pseudo-seconds; negative from a uniformly chosen different trajectory.

    Anchors whose trajectory window holds no other member are resampled, as
    are negatives that land on the anchor datapoint, under a bounded number
    of rounds.
    """
    n_traj = len(trajectories)
    if n_traj < 2:
        raise TripletSelectionError("need at least 2 trajectories to draw negatives from")
    if t_c <= 0:
        raise TripletSelectionError(f"t_c must be positive, got {t_c}")
    if count < 1:
        raise TripletSelectionError(f"count must be >= 1, got {count}")
    for ti, traj in enumerate(trajectories):
        if len(traj) < 2:
            raise TripletSelectionError(f"trajectory {ti} has fewer than 2 members", index=ti)

    sizes = np.array([len(traj) for traj in trajectories], dtype=np.int64)
    rng = np.random.default_rng(seed)
    anchors = np.empty(count, dtype=np.int64)
    positives = np.empty(count, dtype=np.int64)
    negatives = np.empty(count, dtype=np.int64)
    anchor_traj = np.empty(count, dtype=np.int64)

    pending = np.arange(count)
    for _ in range(max_rounds):
        if pending.size == 0:
            break
        traj_ids = rng.integers(0, n_traj, size=pending.size)
        slots = rng.integers(0, sizes[traj_ids])
        window_offsets = rng.random(pending.size)  # consumed per slot for determinism
        filled = np.zeros(pending.size, dtype=bool)
        for ti in np.unique(traj_ids):
            traj = trajectories[ti]
            times = traj.pseudo_times
            here = np.flatnonzero(traj_ids == ti)
            a_slots = slots[here]
            lo = np.searchsorted(times, times[a_slots] - t_c, side="left")
            hi = np.searchsorted(times, times[a_slots] + t_c, side="right")
            m = hi - lo - 1
            ok = m >= 1
            if not np.any(ok):
                continue
            pick = lo[ok] + np.minimum((window_offsets[here[ok]] * m[ok]).astype(np.int64), m[ok] - 1)
            pick += pick >= a_slots[ok]
            rows = pending[here[ok]]
            anchors[rows] = traj.member_indices[a_slots[ok]]
            positives[rows] = traj.member_indices[pick]
            anchor_traj[rows] = ti
            filled[here[ok]] = True
        pending = pending[~filled]
    if pending.size:
        raise TripletSelectionError(
            f"{pending.size} anchors still lack a positive within t_c={t_c} after "
            f"{max_rounds} resampling rounds"
        )

    pending = np.arange(count)
    for _ in range(max_rounds):
        if pending.size == 0:
            break
        other = rng.integers(0, n_traj - 1, size=pending.size)
        other += other >= anchor_traj[pending]
        neg_slots = rng.integers(0, sizes[other])
        neg = np.array(
            [trajectories[t].member_indices[s] for t, s in zip(other, neg_slots)], dtype=np.int64
        )
        ok = neg != anchors[pending]
        negatives[pending[ok]] = neg[ok]
        pending = pending[~ok]
    if pending.size:
        raise TripletSelectionError(
            f"{pending.size} negatives kept colliding with their anchor datapoint after "
            f"{max_rounds} resampling rounds"
        )

    return TripletSet(
        anchors=anchors,
        positives=positives,
        negatives=negatives,
        rule="simtraj",
        params={"t_c": t_c, "trajectories": n_traj},
        seed=seed,
    )


def violation_rate(triplets: TripletSet, dataset: Dataset) -> float:
    """Fraction of triplets whose anchor is strictly farther from its positive
    than from its negative in ground truth."""
    pos = dataset.positions
    a = triplets.anchors.astype(np.int64)
    p = triplets.positives.astype(np.int64)
    ng = triplets.negatives.astype(np.int64)
    if len(triplets) == 0:
        return 0.0
    if max(a.max(), p.max(), ng.max()) >= len(dataset):
        raise TripletSelectionError("triplet indices exceed dataset size")
    d_pos = np.linalg.norm(pos[a] - pos[p], axis=1)
    d_neg = np.linalg.norm(pos[a] - pos[ng], axis=1)
    return float(np.mean(d_pos > d_neg))


def save_triplets(triplets: TripletSet, path) -> None:
    """Persist a TripletSet as a CCTS file (u64 index triples, little-endian)."""
    count = len(triplets)
    records = np.empty((count, 3), dtype="<u8")
    records[:, 0] = triplets.anchors
    records[:, 1] = triplets.positives
    records[:, 2] = triplets.negatives
    with open(path, "wb") as fh:
        fh.write(_CCTS_HEADER.pack(CCTS_MAGIC, CCTS_VERSION, count))
        fh.write(records.tobytes())


def load_triplets(path) -> TripletSet:
    """Load a CCTS file. Rule metadata is not stored on disk; the result's
    rule is marked "loaded"."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _CCTS_HEADER.size:
        raise ContainerTruncatedError("file shorter than the CCTS header", offset=len(buf))
    magic, version, count = _CCTS_HEADER.unpack_from(buf, 0)
    if magic != CCTS_MAGIC:
        raise ContainerHeaderError(f"bad magic {magic!r}, expected {CCTS_MAGIC!r}", offset=0)
    if version != CCTS_VERSION:
        raise ContainerVersionError(f"unsupported version {version}", offset=4)
    expected = _CCTS_HEADER.size + 24 * count
    if len(buf) != expected:
        raise ContainerTruncatedError(
            f"expected {expected} bytes total, file has {len(buf)}", offset=min(len(buf), expected)
        )
    records = np.frombuffer(buf, dtype="<u8", count=count * 3, offset=_CCTS_HEADER.size).reshape(count, 3)
    return TripletSet(
        anchors=records[:, 0],
        positives=records[:, 1],
        negatives=records[:, 2],
        rule="loaded",
        params={},
        seed=0,
    )
