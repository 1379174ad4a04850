"""The forward charting function: a small rectifier MLP mapping feature
vectors to 2-D chart coordinates, trained with triplet loss.

One parameter set is shared by the three roles of a triplet: anchor,
positive and negative are pushed through the same network and the hinge

    loss = max(0, ||z_a - z_p|| - ||z_a - z_n|| + margin)

is minimized with mini-batch adaptive-moment gradient descent. The backward
pass is hand-rolled; ``gradient_check`` verifies it against central finite
differences. Subgradient conventions: 0 at the hinge boundary, at the
rectifier kink, and for the norm gradient at coincident points.

Parameters are float32 end to end, matching the CCNN weights file, so a
save/load round-trip is bit-exact. Input features are standardized
per-dimension with statistics frozen at training time and stored alongside
the weights, so a trained network can be applied to unseen data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ContainerHeaderError,
    ContainerTruncatedError,
    ContainerVersionError,
    NetworkError,
    TrainingDivergedError,
)
from .triplets import TripletSet

DEFAULT_HIDDEN_LAYERS = (128, 64, 32)
DEFAULT_MARGIN = 1.0
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_BATCH_SIZE = 512
DEFAULT_EPOCHS = 8

CCNN_MAGIC = b"CCNN"
CCNN_VERSION = 1
_CCNN_HEADER = struct.Struct("<4sII")


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    hidden_layers: tuple = DEFAULT_HIDDEN_LAYERS
    output_dim: int = 2
    init_seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1:
            raise NetworkError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.output_dim != 2:
            raise NetworkError(f"chart dimensionality is fixed at 2, got {self.output_dim}")
        if any(width < 1 for width in self.hidden_layers):
            raise NetworkError(f"hidden widths must be >= 1, got {self.hidden_layers}")
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))

    @property
    def dims(self) -> tuple:
        return (self.input_dim, *self.hidden_layers, self.output_dim)


@dataclass(frozen=True)
class TrainConfig:
    margin: float = DEFAULT_MARGIN
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    epochs: int = DEFAULT_EPOCHS
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.margin <= 0:
            raise NetworkError(f"margin must be positive, got {self.margin}")
        if self.batch_size < 1:
            raise NetworkError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise NetworkError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0:
            raise NetworkError("learning_rate must be positive")


class ChartingNetwork:
    """Affine-plus-rectifier stack with per-dimension input standardization."""

    def __init__(self, config: NetworkConfig, weights, biases, feature_mean=None, feature_scale=None):
        dims = config.dims
        if len(weights) != len(dims) - 1 or len(biases) != len(dims) - 1:
            raise NetworkError("layer count does not match config")
        self.weights = []
        self.biases = []
        for i, (w, b) in enumerate(zip(weights, biases)):
            w = np.ascontiguousarray(w, dtype=np.float32)
            b = np.ascontiguousarray(b, dtype=np.float32)
            if w.shape != (dims[i], dims[i + 1]):
                raise NetworkError(
                    f"layer {i} weights have shape {w.shape}, expected {(dims[i], dims[i + 1])}"
                )
            if b.shape != (dims[i + 1],):
                raise NetworkError(f"layer {i} biases have shape {b.shape}, expected {(dims[i + 1],)}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NetworkError(f"layer {i} parameters contain non-finite values")
            self.weights.append(w)
            self.biases.append(b)
        self.config = config
        if feature_mean is None:
            feature_mean = np.zeros(config.input_dim, dtype=np.float32)
        if feature_scale is None:
            feature_scale = np.ones(config.input_dim, dtype=np.float32)
        self.feature_mean = np.ascontiguousarray(feature_mean, dtype=np.float32)
        self.feature_scale = np.ascontiguousarray(feature_scale, dtype=np.float32)
        if self.feature_mean.shape != (config.input_dim,) or self.feature_scale.shape != (config.input_dim,):
            raise NetworkError("normalization vectors must have length input_dim")

    @staticmethod
    def initialize(config: NetworkConfig) -> "ChartingNetwork":
        """Fan-in-scaled uniform weights, zero biases, from the config seed."""
        rng = np.random.default_rng(config.init_seed)
        dims = config.dims
        weights = []
        biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(np.float32))
            biases.append(np.zeros(fan_out, dtype=np.float32))
        return ChartingNetwork(config, weights, biases)

    def standardize(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float32)
        return (x - self.feature_mean) / self.feature_scale


def _forward_layers(weights, biases, x):
    """Run the stack; returns (activations, preactivations). activations[0]
    is the input, activations[-1] the linear output layer."""
    acts = [x]
    pres = []
    a = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        pres.append(z)
        a = np.maximum(z, 0.0) if i < last else z
        acts.append(a)
    return acts, pres


def forward(net: ChartingNetwork, f) -> np.ndarray:
    """Map one feature vector (or an N x dim batch) to chart coordinates."""
    x = np.asarray(f, dtype=np.float32)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.config.input_dim:
        raise NetworkError(f"feature dimension {x.shape[-1]} does not match input_dim {net.config.input_dim}")
    acts, _ = _forward_layers(net.weights, net.biases, net.standardize(x))
    out = acts[-1]
    return out[0] if single else out


def map_features(net: ChartingNetwork, features: np.ndarray) -> np.ndarray:
    """Chart every row of a feature matrix; returns an N x 2 float32 array."""
    return np.asarray(forward(net, np.atleast_2d(features)), dtype=np.float32)


def triplet_loss(z_a, z_p, z_n, margin: float = DEFAULT_MARGIN) -> float:
    """Hinge on the chart-space distance gap of one triplet."""
    z_a = np.asarray(z_a, dtype=np.float64)
    z_p = np.asarray(z_p, dtype=np.float64)
    z_n = np.asarray(z_n, dtype=np.float64)
    d_pos = float(np.linalg.norm(z_a - z_p))
    d_neg = float(np.linalg.norm(z_a - z_n))
    return max(0.0, d_pos - d_neg + margin)


def _safe_unit(vec, dist):
    out = np.zeros_like(vec)
    nz = dist > 0
    out[nz] = vec[nz] / dist[nz, None]
    return out


def _batch_loss_and_grads(weights, biases, xa, xp, xn, margin):
    """Mean triplet loss over a batch plus gradients for every parameter.

    The three roles run through one stacked forward pass so weight sharing
    is structural; gradient accumulation order is fixed, keeping training
    deterministic.
    """
    m = xa.shape[0]
    x = np.concatenate([xa, xp, xn], axis=0)
    acts, pres = _forward_layers(weights, biases, x)
    z = acts[-1]
    za, zp, zn = z[:m], z[m : 2 * m], z[2 * m :]
    dp_vec = za - zp
    dn_vec = za - zn
    dp = np.linalg.norm(dp_vec, axis=1)
    dn = np.linalg.norm(dn_vec, axis=1)
    raw = dp - dn + margin
    losses = np.maximum(raw, 0.0)
    loss = float(losses.mean())

    scale = (raw > 0).astype(x.dtype) / x.dtype.type(m)
    up = _safe_unit(dp_vec, dp)
    un = _safe_unit(dn_vec, dn)
    grad_out = np.concatenate(
        [
            (up - un) * scale[:, None],
            -up * scale[:, None],
            un * scale[:, None],
        ],
        axis=0,
    )

    n_layers = len(weights)
    grads_w = [None] * n_layers
    grads_b = [None] * n_layers
    delta = grad_out
    for layer in reversed(range(n_layers)):
        grads_w[layer] = acts[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (pres[layer - 1] > 0)
    return loss, grads_w, grads_b


def train(
    features: np.ndarray,
    triplets: TripletSet,
    net_config: NetworkConfig | None = None,
    train_config: TrainConfig = TrainConfig(),
) -> tuple[ChartingNetwork, list[float]]:
    """Train a charting network on a feature matrix and a TripletSet.

    One epoch is a pass over all triplets in seeded shuffled order. Returns
    the trained network and the per-epoch mean loss. Raises
    TrainingDivergedError the moment a batch loss goes non-finite.
    """
    feats = np.ascontiguousarray(features, dtype=np.float32)
    if feats.ndim != 2:
        raise NetworkError(f"features must be 2-D, got shape {feats.shape}")
    n, dim = feats.shape
    idx_max = max(
        int(triplets.anchors.max(initial=0)),
        int(triplets.positives.max(initial=0)),
        int(triplets.negatives.max(initial=0)),
    )
    if len(triplets) and idx_max >= n:
        raise NetworkError(f"triplet index {idx_max} out of range for {n} feature rows")
    if net_config is None:
        net_config = NetworkConfig(input_dim=dim)
    if net_config.input_dim != dim:
        raise NetworkError(f"net input_dim {net_config.input_dim} does not match feature dim {dim}")

    mean = feats.mean(axis=0, dtype=np.float64)
    std = feats.std(axis=0, dtype=np.float64)
    scale = np.where(std > 1e-12, std, 1.0)
    net = ChartingNetwork.initialize(net_config)
    net.feature_mean = mean.astype(np.float32)
    net.feature_scale = scale.astype(np.float32)

    standardized = net.standardize(feats)
    anchors = triplets.anchors.astype(np.int64)
    positives = triplets.positives.astype(np.int64)
    negatives = triplets.negatives.astype(np.int64)

    params = net.weights + net.biases
    moment1 = [np.zeros_like(p) for p in params]
    moment2 = [np.zeros_like(p) for p in params]
    step = 0
    lr = np.float32(train_config.learning_rate)
    b1 = np.float32(train_config.beta1)
    b2 = np.float32(train_config.beta2)
    eps = np.float32(train_config.adam_eps)

    rng = np.random.default_rng(train_config.seed)
    history: list[float] = []
    count = len(triplets)
    for epoch in range(train_config.epochs):
        order = rng.permutation(count)
        epoch_loss = 0.0
        for batch_index, start in enumerate(range(0, count, train_config.batch_size)):
            batch = order[start : start + train_config.batch_size]
            loss, grads_w, grads_b = _batch_loss_and_grads(
                net.weights,
                net.biases,
                standardized[anchors[batch]],
                standardized[positives[batch]],
                standardized[negatives[batch]],
                np.float32(train_config.margin),
            )
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch=epoch, batch=batch_index)
            epoch_loss += loss * len(batch)
            step += 1
            grads = grads_w + grads_b
            bias1 = np.float32(1.0 - train_config.beta1**step)
            bias2 = np.float32(1.0 - train_config.beta2**step)
            for p, g, m1, m2 in zip(params, grads, moment1, moment2):
                m1 *= b1
                m1 += (1 - b1) * g
                m2 *= b2
                m2 += (1 - b2) * (g * g)
                p -= lr * (m1 / bias1) / (np.sqrt(m2 / bias2) + eps)
        history.append(epoch_loss / count)
    return net, history


def batch_is_safe(net: ChartingNetwork, xa, xp, xn, margin: float, epsilon: float) -> bool:
    """True when the batch sits far enough from every non-smooth point
    (rectifier kinks, the loss hinge, coincident chart points) for a central
    finite difference of half-width epsilon to be trustworthy."""
    guard = 10.0 * epsilon
    w64 = [w.astype(np.float64) for w in net.weights]
    b64 = [b.astype(np.float64) for b in net.biases]
    x = np.concatenate([xa, xp, xn], axis=0).astype(np.float64)
    acts, pres = _forward_layers(w64, b64, net.standardize(x).astype(np.float64))
    for z in pres[:-1]:
        if np.min(np.abs(z)) < guard:
            return False
    m = xa.shape[0]
    z = acts[-1]
    dp = np.linalg.norm(z[:m] - z[m : 2 * m], axis=1)
    dn = np.linalg.norm(z[:m] - z[2 * m :], axis=1)
    if np.min(dp) < guard or np.min(dn) < guard:
        return False
    return bool(np.min(np.abs(dp - dn + margin)) >= guard)


def gradient_check(
    net: ChartingNetwork,
    xa,
    xp,
    xn,
    margin: float = DEFAULT_MARGIN,
    epsilon: float = 1e-4,
) -> float:
    """Worst relative error between analytic parameter gradients and central
    finite differences, evaluated in float64.

    The error is normalized by the largest gradient magnitude so parameters
    with near-zero individual gradients do not inflate the result; a batch
    whose loss is identically zero reports 0.
    """
    if epsilon <= 0:
        raise NetworkError("epsilon must be positive")
    xa = net.standardize(xa).astype(np.float64)
    xp = net.standardize(xp).astype(np.float64)
    xn = net.standardize(xn).astype(np.float64)
    weights = [w.astype(np.float64) for w in net.weights]
    biases = [b.astype(np.float64) for b in net.biases]
    _, grads_w, grads_b = _batch_loss_and_grads(weights, biases, xa, xp, xn, float(margin))
    analytic = grads_w + grads_b
    params = weights + biases

    def loss_now() -> float:
        loss, _, _ = _batch_loss_and_grads(weights, biases, xa, xp, xn, float(margin))
        return loss

    worst_abs = 0.0
    largest = max((float(np.max(np.abs(g))) for g in analytic), default=0.0)
    for p, g in zip(params, analytic):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            saved = flat_p[i]
            flat_p[i] = saved + epsilon
            plus = loss_now()
            flat_p[i] = saved - epsilon
            minus = loss_now()
            flat_p[i] = saved
            numeric = (plus - minus) / (2.0 * epsilon)
            worst_abs = max(worst_abs, abs(float(flat_g[i]) - numeric))
            largest = max(largest, abs(numeric))
    if largest == 0.0:
        return 0.0
    return worst_abs / largest


def save_weights(net: ChartingNetwork, path) -> None:
    """Persist a network as a CCNN file: per-layer (rows=fan_in, cols=fan_out)
    f32 row-major weights and f32 biases, then the normalization vectors."""
    chunks = [_CCNN_HEADER.pack(CCNN_MAGIC, CCNN_VERSION, len(net.weights))]
    for w, b in zip(net.weights, net.biases):
        rows, cols = w.shape
        chunks.append(struct.pack("<II", rows, cols))
        chunks.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    chunks.append(np.ascontiguousarray(net.feature_mean, dtype="<f4").tobytes())
    chunks.append(np.ascontiguousarray(net.feature_scale, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_weights(path) -> ChartingNetwork:
    """Load a CCNN file; layer shapes must chain input -> hidden -> 2 and the
    byte count must match the header exactly."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _CCNN_HEADER.size:
        raise ContainerTruncatedError("file shorter than the CCNN header", offset=len(buf))
    magic, version, n_layers = _CCNN_HEADER.unpack_from(buf, 0)
    if magic != CCNN_MAGIC:
        raise ContainerHeaderError(f"bad magic {magic!r}, expected {CCNN_MAGIC!r}", offset=0)
    if version != CCNN_VERSION:
        raise ContainerVersionError(f"unsupported version {version}", offset=4)
    if n_layers < 1:
        raise ContainerHeaderError("layer count is zero", offset=8)
    offset = _CCNN_HEADER.size
    weights = []
    biases = []
    for layer in range(n_layers):
        if offset + 8 > len(buf):
            raise ContainerTruncatedError(f"layer {layer} header missing", offset=len(buf))
        rows, cols = struct.unpack_from("<II", buf, offset)
        offset += 8
        need = 4 * (rows * cols + cols)
        if offset + need > len(buf):
            raise ContainerTruncatedError(f"layer {layer} payload truncated", offset=len(buf))
        w = np.frombuffer(buf, dtype="<f4", count=rows * cols, offset=offset).reshape(rows, cols)
        offset += 4 * rows * cols
        b = np.frombuffer(buf, dtype="<f4", count=cols, offset=offset)
        offset += 4 * cols
        weights.append(w.copy())
        biases.append(b.copy())
    for layer in range(1, n_layers):
        if weights[layer].shape[0] != weights[layer - 1].shape[1]:
            raise NetworkError(
                f"layer {layer} fan_in {weights[layer].shape[0]} does not chain from "
                f"previous fan_out {weights[layer - 1].shape[1]}"
            )
    input_dim = weights[0].shape[0]
    output_dim = weights[-1].shape[1]
    if output_dim != 2:
        raise NetworkError(f"weights file maps to {output_dim} outputs, expected 2")
    remaining = len(buf) - offset
    if remaining != 8 * input_dim:
        raise ContainerTruncatedError(
            f"expected {8 * input_dim} bytes of normalization vectors, found {remaining}",
            offset=offset,
        )
    mean = np.frombuffer(buf, dtype="<f4", count=input_dim, offset=offset).copy()
    scale = np.frombuffer(buf, dtype="<f4", count=input_dim, offset=offset + 4 * input_dim).copy()
    hidden = tuple(w.shape[1] for w in weights[:-1])
    config = NetworkConfig(input_dim=input_dim, hidden_layers=hidden, output_dim=2)
    return ChartingNetwork(config, weights, biases, feature_mean=mean, feature_scale=scale)
