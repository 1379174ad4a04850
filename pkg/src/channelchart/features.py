"""Feature engineering: scaled raw-second-moment (R2M) vectors.

A reduced CSI vector h of length B is compressed against path loss and
expanded to a real feature vector of length B*B:

    h_bar = h * ||h||**(2/sigma - 1)
    H     = outer(h_bar, conj(h_bar))          (B x B, Hermitian)
    f     = real(vec(H))                        (row-major)

``sigma`` is the estimated path-loss exponent; the Frobenius norm of H then
grows like ``||h||**(4/sigma)``, so magnitude differences between near and
far datapoints are strongly damped while the phase geometry of the outer
product is kept. A global phase on h cancels in the outer product.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .dataset import ReducedDataset
from .errors import ContainerHeaderError, ContainerTruncatedError, ContainerVersionError, FeatureError

DEFAULT_SIGMA = 8.0

CCFT_MAGIC = b"CCFT"
CCFT_VERSION = 1
_CCFT_HEADER = struct.Struct("<4sIQI")


@dataclass(frozen=True)
class FeatureConfig:
    """Parameters of the scaled-R2M transform."""

    sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        if self.sigma <= 0:
            raise FeatureError(f"sigma must be positive, got {self.sigma}")

    def feature_dim(self, antenna_count: int) -> int:
        return antenna_count * antenna_count


def scaled_r2m(h: np.ndarray, config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Transform one complex vector of length B into its real feature vector
    of length B*B. A zero vector maps to the zero feature vector."""
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 1:
        raise FeatureError(f"h must be one-dimensional, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise FeatureError("h contains non-finite entries")
    norm = np.linalg.norm(h)
    if norm == 0.0:
        return np.zeros(h.size * h.size, dtype=np.float64)
    h_bar = h * norm ** (2.0 / config.sigma - 1.0)
    outer = np.outer(h_bar, np.conj(h_bar))
    return outer.real.reshape(-1)


def featurize_dataset(reduced: ReducedDataset, config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Compute the dense N x B*B feature matrix (float32, row n = scaled_r2m(h_n)).

    float32 is the storage and training dtype; rows match ``scaled_r2m``
    within single-precision rounding.
    """
    h = reduced.h
    if not np.all(np.isfinite(h)):
        raise FeatureError("reduced csi contains non-finite entries")
    norms = np.linalg.norm(h, axis=1)
    scale = np.ones_like(norms)
    nz = norms > 0
    scale[nz] = norms[nz] ** (2.0 / config.sigma - 1.0)
    h_bar = h * scale[:, None]
    h_bar[~nz] = 0.0
    outer = np.einsum("ni,nj->nij", h_bar, np.conj(h_bar))
    n, b = h.shape
    return np.ascontiguousarray(outer.real.reshape(n, b * b), dtype=np.float32)


def save_feature_matrix(matrix: np.ndarray, path) -> None:
    """Persist a feature matrix as a CCFT cache file (f32 little-endian)."""
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.ndim != 2:
        raise FeatureError(f"feature matrix must be 2-D, got shape {matrix.shape}")
    n, dim = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_CCFT_HEADER.pack(CCFT_MAGIC, CCFT_VERSION, n, dim))
        fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def load_feature_matrix(path) -> np.ndarray:
    """Load a CCFT cache file back into an N x dim float32 matrix."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _CCFT_HEADER.size:
        raise ContainerTruncatedError("file shorter than the CCFT header", offset=len(buf))
    magic, version, n, dim = _CCFT_HEADER.unpack_from(buf, 0)
    if magic != CCFT_MAGIC:
        raise ContainerHeaderError(f"bad magic {magic!r}, expected {CCFT_MAGIC!r}", offset=0)
    if version != CCFT_VERSION:
        raise ContainerVersionError(f"unsupported version {version}", offset=4)
    expected = _CCFT_HEADER.size + 4 * n * dim
    if len(buf) != expected:
        raise ContainerTruncatedError(
            f"expected {expected} bytes total, file has {len(buf)}", offset=min(len(buf), expected)
        )
    flat = np.frombuffer(buf, dtype="<f4", count=n * dim, offset=_CCFT_HEADER.size)
    return flat.reshape(n, dim).copy()
