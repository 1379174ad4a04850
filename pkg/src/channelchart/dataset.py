"""CSI datasets: the CCDS container codec, subcarrier reduction and
line-of-sight synthesis.

A dataset is an ordered collection of (csi, position, timestamp) records
sharing one array geometry: ``csi`` is a B x W complex matrix (antennas x
subcarriers), ``position`` is a 2-D or 3-D ground-truth location in meters,
``timestamp`` is seconds since the dataset epoch. Records are kept sorted by
nondecreasing timestamp; ties preserve insertion order.

Container layout (little-endian throughout)::

    magic   "CCDS"          4 bytes
    version u32 = 1
    N       u64             record count
    B       u32             antennas
    W       u32             subcarriers
    D       u32             position dimensionality (2 or 3)
    N records:
        timestamp f64
        position  D x f64
        csi       B*W x (f32 real, f32 imag), antenna-major row order
"""

from __future__ import annotations

import os.path
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ContainerHeaderError,
    ContainerTruncatedError,
    ContainerValueError,
    ContainerVersionError,
    DatasetError,
)

CCDS_MAGIC = b"CCDS"
CCDS_VERSION = 1
_HEADER = struct.Struct("<4sIQIII")

SPEED_OF_LIGHT = 299792458.0


@dataclass(frozen=True)
class CsiDatapoint:
    """One measurement: B x W channel matrix, ground-truth position, timestamp."""

    csi: np.ndarray
    position: np.ndarray
    timestamp: float


class Dataset:
    """In-memory CSI dataset, kept sorted by timestamp.

    Construction validates all invariants (finite entries, shared geometry,
    N >= 1) and stably sorts records by timestamp, so every live Dataset is
    already in canonical order. Arrays are frozen after construction and safe
    to share across workers.
    """

    def __init__(self, name: str, csi: np.ndarray, positions: np.ndarray, timestamps: np.ndarray):
        csi = np.asarray(csi, dtype=np.complex64)
        positions = np.asarray(positions, dtype=np.float64)
        timestamps = np.asarray(timestamps, dtype=np.float64)

        if csi.ndim != 3:
            raise DatasetError(f"csi must have shape (N, B, W), got {csi.shape}")
        n, b, w = csi.shape
        if n < 1:
            raise DatasetError("dataset must contain at least one datapoint")
        if b < 1 or w < 1:
            raise DatasetError(f"antenna and subcarrier counts must be >= 1, got B={b}, W={w}")
        if positions.shape[0] != n or positions.ndim != 2:
            raise DatasetError(f"positions must have shape (N, D), got {positions.shape}")
        if positions.shape[1] not in (2, 3):
            raise DatasetError(f"position dimensionality must be 2 or 3, got {positions.shape[1]}")
        if timestamps.shape != (n,):
            raise DatasetError(f"timestamps must have shape (N,), got {timestamps.shape}")
        if not np.all(np.isfinite(csi)):
            raise DatasetError("csi contains non-finite entries")
        if not np.all(np.isfinite(positions)):
            raise DatasetError("positions contain non-finite entries")
        if not np.all(np.isfinite(timestamps)):
            raise DatasetError("timestamps contain non-finite entries")

        order = np.argsort(timestamps, kind="stable")
        self.name = name
        self._csi = np.ascontiguousarray(csi[order])
        self._positions = np.ascontiguousarray(positions[order])
        self._timestamps = np.ascontiguousarray(timestamps[order])
        for arr in (self._csi, self._positions, self._timestamps):
            arr.setflags(write=False)

    @property
    def csi(self) -> np.ndarray:
        """(N, B, W) complex64 channel coefficients."""
        return self._csi

    @property
    def positions(self) -> np.ndarray:
        """(N, D) float64 ground-truth positions in meters."""
        return self._positions

    @property
    def timestamps(self) -> np.ndarray:
        """(N,) float64 seconds, nondecreasing."""
        return self._timestamps

    @property
    def antenna_count(self) -> int:
        return self._csi.shape[1]

    @property
    def subcarrier_count(self) -> int:
        return self._csi.shape[2]

    @property
    def position_dim(self) -> int:
        return self._positions.shape[1]

    def __len__(self) -> int:
        return self._csi.shape[0]

    def __getitem__(self, index: int) -> CsiDatapoint:
        return CsiDatapoint(
            csi=self._csi[index],
            position=self._positions[index],
            timestamp=float(self._timestamps[index]),
        )

    def datapoints(self):
        """Iterate datapoints in timestamp order."""
        for i in range(len(self)):
            yield self[i]


class ReducedDataset:
    """Dataset whose CSI has been collapsed to one length-B vector per record."""

    def __init__(self, name: str, h: np.ndarray, positions: np.ndarray, timestamps: np.ndarray):
        h = np.asarray(h, dtype=np.complex128)
        if h.ndim != 2 or h.shape[0] != len(timestamps):
            raise DatasetError(f"h must have shape (N, B), got {h.shape}")
        if not np.all(np.isfinite(h)):
            raise DatasetError("reduced csi contains non-finite entries")
        self.name = name
        self.h = h
        self.positions = positions
        self.timestamps = timestamps

    @property
    def antenna_count(self) -> int:
        return self.h.shape[1]

    def __len__(self) -> int:
        return self.h.shape[0]


def _record_dtype(b: int, w: int, d: int) -> np.dtype:
    return np.dtype([("t", "<f8"), ("pos", "<f8", (d,)), ("csi", "<f4", (b, w, 2))])


def load_container(path) -> Dataset:
    """Load a CCDS container file.

    Validation failures raise distinct errors naming the byte offset:
    bad magic or header fields, unsupported version, truncated or oversized
    payload, non-finite values.
    """
    with open(path, "rb") as fh:
        buf = fh.read()

    if len(buf) < _HEADER.size:
        raise ContainerTruncatedError("file shorter than the 28-byte header", offset=len(buf))
    magic, version, n, b, w, d = _HEADER.unpack_from(buf, 0)
    if magic != CCDS_MAGIC:
        raise ContainerHeaderError(f"bad magic {magic!r}, expected {CCDS_MAGIC!r}", offset=0)
    if version != CCDS_VERSION:
        raise ContainerVersionError(f"unsupported version {version}, expected {CCDS_VERSION}", offset=4)
    if n == 0:
        raise ContainerHeaderError("record count is zero", offset=8)
    if b == 0:
        raise ContainerHeaderError("antenna count is zero", offset=16)
    if w == 0:
        raise ContainerHeaderError("subcarrier count is zero", offset=20)
    if d not in (2, 3):
        raise ContainerHeaderError(f"position dimensionality {d} not in (2, 3)", offset=24)

    rec = _record_dtype(b, w, d)
    expected = _HEADER.size + n * rec.itemsize
    if len(buf) < expected:
        raise ContainerTruncatedError(
            f"payload ends early: expected {expected} bytes total, file has {len(buf)}",
            offset=len(buf),
        )
    if len(buf) > expected:
        raise ContainerTruncatedError(
            f"{len(buf) - expected} trailing bytes after the last record", offset=expected
        )

    records = np.frombuffer(buf, dtype=rec, count=n, offset=_HEADER.size)
    timestamps = records["t"]
    positions = records["pos"]
    csi_pairs = np.ascontiguousarray(records["csi"])
    _reject_non_finite(timestamps, positions, csi_pairs, rec.itemsize, d)
    csi = csi_pairs.view(np.complex64)[..., 0]

    name = os.path.splitext(os.path.basename(str(path)))[0]
    return Dataset(name=name, csi=csi, positions=positions, timestamps=timestamps)


def _reject_non_finite(timestamps, positions, csi_pairs, record_size, d):
    base = _HEADER.size
    bad_t = np.flatnonzero(~np.isfinite(timestamps))
    bad_p = np.flatnonzero(~np.isfinite(positions).all(axis=1))
    bad_c = np.flatnonzero(~np.isfinite(csi_pairs).all(axis=(1, 2, 3)))
    candidates = []
    if bad_t.size:
        i = int(bad_t[0])
        candidates.append((i, f"non-finite timestamp in record {i}", base + i * record_size))
    if bad_p.size:
        i = int(bad_p[0])
        k = int(np.flatnonzero(~np.isfinite(positions[i]))[0])
        candidates.append(
            (i, f"non-finite position component {k} in record {i}", base + i * record_size + 8 + 8 * k)
        )
    if bad_c.size:
        i = int(bad_c[0])
        flat = int(np.flatnonzero(~np.isfinite(csi_pairs[i]).reshape(-1))[0])
        candidates.append(
            (i, f"non-finite csi entry in record {i}", base + i * record_size + 8 + 8 * d + 4 * flat)
        )
    if candidates:
        candidates.sort(key=lambda c: c[2])
        _, message, offset = candidates[0]
        raise ContainerValueError(message, offset=offset)


def save_container(dataset: Dataset, path) -> None:
    """Write a Dataset as a CCDS container; ``load_container`` round-trips bit-exactly."""
    n = len(dataset)
    b, w, d = dataset.antenna_count, dataset.subcarrier_count, dataset.position_dim
    records = np.empty(n, dtype=_record_dtype(b, w, d))
    records["t"] = dataset.timestamps
    records["pos"] = dataset.positions
    records["csi"][..., 0] = dataset.csi.real
    records["csi"][..., 1] = dataset.csi.imag
    header = _HEADER.pack(CCDS_MAGIC, CCDS_VERSION, n, b, w, d)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(records.tobytes())


def subcarrier_average(dataset: Dataset, w_start: int, w_count: int) -> ReducedDataset:
    """Collapse each B x W csi matrix to a length-B vector by averaging the
    subcarrier window ``[w_start, w_start + w_count)`` per antenna."""
    if w_count < 1:
        raise DatasetError(f"w_count must be >= 1, got {w_count}")
    if w_start < 0 or w_start + w_count > dataset.subcarrier_count:
        raise DatasetError(
            f"subcarrier window [{w_start}, {w_start + w_count}) out of range "
            f"for W={dataset.subcarrier_count}"
        )
    h = dataset.csi[:, :, w_start : w_start + w_count].mean(axis=2, dtype=np.complex128)
    return ReducedDataset(dataset.name, h, dataset.positions, dataset.timestamps)


@dataclass(frozen=True)
class SynthConfig:
    """Line-of-sight synthesis parameters.

    Positions follow a meandering or random-waypoint trajectory through
    ``area`` at constant ``speed``; antennas default to a ring around the
    area. Entry (b, w) of each csi matrix is ``d_b**(-pl/2) *
    exp(-j*2*pi*f_w*d_b/c)`` with ``d_b`` the distance to antenna b and
    ``f_w`` the subcarrier frequency.
    """

    n: int
    b: int
    w: int = 16
    area: tuple = ((0.0, 10.0), (0.0, 10.0))
    antenna_positions: tuple | None = None
    carrier_freq: float = 1.272e9
    bandwidth: float = 50e6
    path_loss_exponent: float = 2.0
    trajectory: str = "meander"
    speed: float = 1.0
    rows: int = 0
    waypoints: int = 0
    seed: int = 0
    name: str = "synthetic"

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "b": self.b,
            "w": self.w,
            "area": [list(self.area[0]), list(self.area[1])],
            "carrier_freq": self.carrier_freq,
            "bandwidth": self.bandwidth,
            "path_loss_exponent": self.path_loss_exponent,
            "trajectory": self.trajectory,
            "speed": self.speed,
            "rows": self.rows,
            "waypoints": self.waypoints,
            "seed": self.seed,
            "name": self.name,
        }
        if self.antenna_positions is not None:
            out["antenna_positions"] = [list(p) for p in self.antenna_positions]
        return out

    @staticmethod
    def from_dict(data: dict) -> "SynthConfig":
        kwargs = dict(data)
        if "area" in kwargs:
            kwargs["area"] = tuple(tuple(ax) for ax in kwargs["area"])
        if kwargs.get("antenna_positions") is not None:
            kwargs["antenna_positions"] = tuple(tuple(p) for p in kwargs["antenna_positions"])
        return SynthConfig(**kwargs)


def _meander_vertices(area, rows: int) -> np.ndarray:
    (x0, x1), (y0, y1) = area
    ys = np.linspace(y0, y1, rows) if rows > 1 else np.array([(y0 + y1) / 2.0])
    verts = []
    for i, y in enumerate(ys):
        if i % 2 == 0:
            verts.append((x0, y))
            verts.append((x1, y))
        else:
            verts.append((x1, y))
            verts.append((x0, y))
    return np.asarray(verts, dtype=np.float64)


def _waypoint_vertices(area, count: int, rng: np.random.Generator) -> np.ndarray:
    (x0, x1), (y0, y1) = area
    xs = rng.uniform(x0, x1, count)
    ys = rng.uniform(y0, y1, count)
    return np.stack([xs, ys], axis=1)


def _sample_polyline(verts: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Place n points at equal arclength spacing along a polyline.

    Returns (points, arclengths). A zero-length polyline degenerates to n
    copies of its first vertex at arclength 0.
    """
    seg = np.diff(verts, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    if n == 1 or total == 0.0:
        s = np.zeros(n)
        return np.tile(verts[0], (n, 1)), s
    s = np.linspace(0.0, total, n)
    seg_idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    local = s - cum[seg_idx]
    denom = seg_len[seg_idx]
    frac = np.where(denom > 0, local / np.maximum(denom, 1e-300), 0.0)
    pts = verts[seg_idx] + frac[:, None] * seg[seg_idx]
    return pts, s


def _default_antennas(b: int, area) -> np.ndarray:
    # Ring of antennas outside the area so no datapoint can coincide with one.
    (x0, x1), (y0, y1) = area
    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    radius = 0.6 * np.hypot(x1 - x0, y1 - y0) + 1.0
    angles = 2.0 * np.pi * np.arange(b) / b + 0.37
    return np.stack([cx + radius * np.cos(angles), cy + radius * np.sin(angles)], axis=1)


def synthesize_los_dataset(config: SynthConfig) -> Dataset:
    """Generate a deterministic line-of-sight dataset from the config's seed."""
    if config.n < 1:
        raise DatasetError("n must be >= 1")
    if config.b < 1 or config.w < 1:
        raise DatasetError("b and w must be >= 1")
    if config.speed <= 0:
        raise DatasetError("speed must be positive")
    if config.trajectory not in ("meander", "waypoint"):
        raise DatasetError(f"unknown trajectory style {config.trajectory!r}")

    rng = np.random.default_rng(config.seed)
    if config.trajectory == "meander":
        rows = config.rows if config.rows >= 1 else max(2, int(round(np.sqrt(config.n / 2.0))))
        verts = _meander_vertices(config.area, rows)
    else:
        count = config.waypoints if config.waypoints >= 2 else max(2, int(round(np.sqrt(config.n))))
        verts = _waypoint_vertices(config.area, count, rng)
    positions, arclength = _sample_polyline(verts, config.n)
    timestamps = arclength / config.speed

    if config.antenna_positions is not None:
        antennas = np.asarray(config.antenna_positions, dtype=np.float64)
        if antennas.ndim != 2 or antennas.shape != (config.b, 2):
            raise DatasetError(f"antenna_positions must have shape ({config.b}, 2), got {antennas.shape}")
        if len(np.unique(antennas, axis=0)) != config.b:
            raise DatasetError("antenna positions must be distinct")
    else:
        antennas = _default_antennas(config.b, config.area)

    dist = np.linalg.norm(positions[:, None, :] - antennas[None, :, :], axis=2)  # (N, B)
    if np.any(dist < 1e-9):
        n_idx, b_idx = np.argwhere(dist < 1e-9)[0]
        raise DatasetError(f"datapoint {n_idx} coincides with antenna {b_idx}")

    amplitude = dist ** (-config.path_loss_exponent / 2.0)
    delta_f = config.bandwidth / config.w
    freqs = config.carrier_freq + (np.arange(config.w) - (config.w - 1) / 2.0) * delta_f
    phase = (-2.0 * np.pi / SPEED_OF_LIGHT) * dist[:, :, None] * freqs[None, None, :]
    csi = (amplitude[:, :, None] * np.exp(1j * phase)).astype(np.complex64)

    return Dataset(name=config.name, csi=csi, positions=positions, timestamps=timestamps)
