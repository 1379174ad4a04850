"""End-to-end orchestration: load/synthesize -> reduce -> featurize ->
select triplets -> train -> chart -> evaluate, plus parameter sweeps,
transfer evaluation on unseen data still using the training-set feature
statistics, and static SVG emission.

Every stochastic stage is seeded: the run seed deterministically derives
per-stage seeds, every intermediate artifact is persisted, and re-running
any stage from its persisted inputs reproduces its outputs byte-exactly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import chartnet, features, metrics, plots, triplets
from .dataset import Dataset, SynthConfig, load_container, save_container, subcarrier_average, synthesize_los_dataset
from .errors import ChannelChartError, ConfigError, StageError
from .features import DEFAULT_SIGMA, FeatureConfig
from .metrics import MetricsReport

_RULES = ("time", "genie", "simtraj")


@dataclass(frozen=True)
class RunConfig:
    """Complete, serializable description of one pipeline run."""

    output_dir: str
    dataset_path: str | None = None
    synth: SynthConfig | None = None
    w_start: int | None = None
    w_count: int | None = None
    sigma: float = DEFAULT_SIGMA
    rule: str = "genie"
    triplet_count: int = 100_000
    t_c: float = triplets.DEFAULT_TIME_WINDOW
    d_c: float = triplets.DEFAULT_DISTANCE_BALL
    trajectories: int = 1000
    trajectory_speed: float = triplets.DEFAULT_TRAJECTORY_SPEED
    corridor: float = triplets.DEFAULT_CORRIDOR
    hidden_layers: tuple = chartnet.DEFAULT_HIDDEN_LAYERS
    margin: float = chartnet.DEFAULT_MARGIN
    learning_rate: float = chartnet.DEFAULT_LEARNING_RATE
    batch_size: int = chartnet.DEFAULT_BATCH_SIZE
    epochs: int = chartnet.DEFAULT_EPOCHS
    metrics_k: int | None = None
    subsample: int | None = None
    seed: int = 0

    def __post_init__(self):
        if (self.dataset_path is None) == (self.synth is None):
            raise ConfigError("exactly one of dataset_path or synth must be given")
        if self.rule not in _RULES:
            raise ConfigError(f"rule must be one of {_RULES}, got {self.rule!r}")
        if self.triplet_count < 1:
            raise ConfigError("triplet_count must be >= 1")
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["hidden_layers"] = list(self.hidden_layers)
        out["synth"] = self.synth.to_dict() if self.synth is not None else None
        return out

    @staticmethod
    def from_dict(data: dict) -> "RunConfig":
        allowed = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if kwargs.get("synth") is not None:
            try:
                kwargs["synth"] = SynthConfig.from_dict(kwargs["synth"])
            except TypeError as exc:
                raise ConfigError(f"bad synth config: {exc}") from exc
        if "hidden_layers" in kwargs:
            kwargs["hidden_layers"] = tuple(kwargs["hidden_layers"])
        try:
            return RunConfig(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class ChartResult:
    """Per-datapoint chart coordinates with ground truth and provenance."""

    indices: np.ndarray
    z: np.ndarray
    x: np.ndarray
    timestamps: np.ndarray
    provenance: dict

    def __len__(self) -> int:
        return len(self.indices)


def derived_seeds(master: int) -> dict:
    """Per-stage seeds derived deterministically from the run seed."""
    state = np.random.SeedSequence(master).generate_state(4)
    return {
        "triplets": int(state[0]),
        "net_init": int(state[1]),
        "train": int(state[2]),
        "subsample": int(state[3]),
    }


def _row_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence((master, index)).generate_state(1)[0])


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (ChannelChartError, OSError) as exc:
        raise StageError(name, exc) from exc


def default_window(subcarrier_count: int, w_start: int | None, w_count: int | None) -> tuple[int, int]:
    """Center band of up to 8 subcarriers unless overridden."""
    if w_count is None:
        w_count = min(8, subcarrier_count)
    if w_start is None:
        w_start = (subcarrier_count - w_count) // 2
    return w_start, w_count


def write_chart_csv(result: ChartResult, path) -> None:
    d = result.x.shape[1]
    x_cols = ",".join(f"x{i + 1}" for i in range(d))
    lines = [f"index,z1,z2,{x_cols},timestamp"]
    for i in range(len(result)):
        xs = ",".join(repr(float(v)) for v in result.x[i])
        lines.append(
            f"{int(result.indices[i])},{repr(float(result.z[i, 0]))},{repr(float(result.z[i, 1]))},"
            f"{xs},{repr(float(result.timestamps[i]))}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_chart_csv(path) -> ChartResult:
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise ConfigError(f"chart file {path} is empty")
    header = lines[0].split(",")
    if header[:3] != ["index", "z1", "z2"] or header[-1] != "timestamp":
        raise ConfigError(f"unexpected chart header {lines[0]!r}")
    d = len(header) - 4
    if d not in (2, 3):
        raise ConfigError(f"chart header carries {d} ground-truth columns, expected 2 or 3")
    rows = [line.split(",") for line in lines[1:]]
    data = np.asarray(rows, dtype=np.float64)
    return ChartResult(
        indices=data[:, 0].astype(np.int64),
        z=data[:, 1:3],
        x=data[:, 3 : 3 + d],
        timestamps=data[:, 3 + d],
        provenance={},
    )


def emit_plot(result: ChartResult, path) -> None:
    """Chart scatter colored by normalized ground-truth position."""
    if len(result) == 0:
        raise ConfigError("cannot plot an empty chart result")
    colors = plots.position_colors(result.x)
    svg = plots.scatter_svg(result.z, colors, "Channel chart", "z1", "z2")
    with open(path, "w") as fh:
        fh.write(svg)


def emit_truth_plot(result: ChartResult, path) -> None:
    """Ground-truth scatter with the same point colors as the chart plot."""
    if len(result) == 0:
        raise ConfigError("cannot plot an empty chart result")
    colors = plots.position_colors(result.x)
    svg = plots.scatter_svg(result.x[:, :2], colors, "Ground truth", "x1", "x2")
    with open(path, "w") as fh:
        fh.write(svg)


def _select_triplets(dataset: Dataset, config: RunConfig, seed: int) -> triplets.TripletSet:
    if config.rule == "time":
        return triplets.select_time_based(
            dataset, triplets.TimeSelectionConfig(t_c=config.t_c, count=config.triplet_count, seed=seed)
        )
    if config.rule == "genie":
        return triplets.select_genie(
            dataset, triplets.GenieSelectionConfig(d_c=config.d_c, count=config.triplet_count, seed=seed)
        )
    trajs = triplets.simulate_trajectories(
        dataset,
        r=config.trajectories,
        speed=config.trajectory_speed,
        corridor=config.corridor,
        seed=seed,
    )
    return triplets.select_sim_trajectory_triplets(
        trajs, t_c=config.t_c, count=config.triplet_count, seed=seed
    )


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def run_pipeline(config: RunConfig) -> tuple[ChartResult, MetricsReport]:
    """Execute all stages, persisting every intermediate artifact under
    config.output_dir. Stage failures raise StageError naming the stage."""
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    seeds = derived_seeds(config.seed)

    with _stage("dataset"):
        if config.synth is not None:
            dataset = synthesize_los_dataset(config.synth)
            save_container(dataset, os.path.join(out, "dataset.ccds"))
            dataset_ref = "dataset.ccds"
        else:
            dataset = load_container(config.dataset_path)
            dataset_ref = str(config.dataset_path)

    with _stage("reduce"):
        w_start, w_count = default_window(dataset.subcarrier_count, config.w_start, config.w_count)
        reduced = subcarrier_average(dataset, w_start, w_count)

    with _stage("features"):
        feature_matrix = features.featurize_dataset(reduced, FeatureConfig(sigma=config.sigma))
        features.save_feature_matrix(feature_matrix, os.path.join(out, "features.ccft"))

    with _stage("triplets"):
        triplet_set = _select_triplets(dataset, config, seeds["triplets"])
        triplets.save_triplets(triplet_set, os.path.join(out, "triplets.ccts"))

    with _stage("train"):
        net_config = chartnet.NetworkConfig(
            input_dim=feature_matrix.shape[1],
            hidden_layers=config.hidden_layers,
            init_seed=seeds["net_init"],
        )
        train_config = chartnet.TrainConfig(
            margin=config.margin,
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            epochs=config.epochs,
            seed=seeds["train"],
        )
        net, history = chartnet.train(feature_matrix, triplet_set, net_config, train_config)
        chartnet.save_weights(net, os.path.join(out, "weights.ccnn"))

    with _stage("chart"):
        z = chartnet.map_features(net, feature_matrix)
        result = ChartResult(
            indices=np.arange(len(dataset), dtype=np.int64),
            z=z,
            x=np.asarray(dataset.positions, dtype=np.float64),
            timestamps=np.asarray(dataset.timestamps, dtype=np.float64),
            provenance={},
        )
        write_chart_csv(result, os.path.join(out, "chart.csv"))

    with _stage("metrics"):
        report = metrics.evaluate(
            result.x,
            result.z,
            k=config.metrics_k,
            subsample=config.subsample,
            seed=seeds["subsample"],
        )
        with open(os.path.join(out, "metrics.json"), "w") as fh:
            fh.write(report.to_json() + "\n")

    with _stage("plots"):
        emit_plot(result, os.path.join(out, "chart.svg"))
        emit_truth_plot(result, os.path.join(out, "truth.svg"))

    config_json = json.dumps(config.to_dict(), sort_keys=True)
    result.provenance = {
        "config": config.to_dict(),
        "config_digest": hashlib.sha256(config_json.encode()).hexdigest(),
        "derived_seeds": seeds,
        "dataset": dataset_ref,
        "subcarrier_window": [w_start, w_count],
        "loss_history": history,
        "weights_digest": _sha256(os.path.join(out, "weights.ccnn")),
        "artifacts": [
            "features.ccft",
            "triplets.ccts",
            "weights.ccnn",
            "chart.csv",
            "metrics.json",
            "chart.svg",
            "truth.svg",
        ],
    }
    with open(os.path.join(out, "provenance.json"), "w") as fh:
        json.dump(result.provenance, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result, report


def _write_sweep_table(path, key: str, rows: list[dict]) -> None:
    lines = [f"{key},ct,tw,ks"]
    for row in rows:
        lines.append(f"{row[key]},{row['ct']!r},{row['tw']!r},{row['ks']!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _sweep(config: RunConfig, key: str, values, assign, log_x: bool) -> list[dict]:
    os.makedirs(config.output_dir, exist_ok=True)
    rows = []
    for i, value in enumerate(values):
        sub = dataclasses.replace(
            config,
            output_dir=os.path.join(config.output_dir, f"{key}_{value}"),
            seed=_row_seed(config.seed, i),
            **assign(value),
        )
        _, report = run_pipeline(sub)
        rows.append({key: value, "ct": report.ct, "tw": report.tw, "ks": report.ks})
    _write_sweep_table(os.path.join(config.output_dir, f"sweep_{key}.csv"), key, rows)
    svg = plots.line_chart_svg(
        [row[key] for row in rows],
        {
            "CT": [row["ct"] for row in rows],
            "TW": [row["tw"] for row in rows],
            "KS": [row["ks"] for row in rows],
        },
        f"Metrics vs {key}",
        key,
        log_x=log_x,
    )
    with open(os.path.join(config.output_dir, f"sweep_{key}.svg"), "w") as fh:
        fh.write(svg)
    return rows


def sweep_dc(config: RunConfig, dc_values) -> list[dict]:
    """One full run per positive-ball radius; rows are independent runs with
    derived per-row seeds."""
    if config.rule != "genie":
        raise ConfigError("sweep_dc requires the genie rule")
    return _sweep(config, "d_c", list(dc_values), lambda v: {"d_c": float(v)}, log_x=False)


def sweep_r(config: RunConfig, r_values) -> list[dict]:
    """One full run per simulated-trajectory count."""
    if config.rule != "simtraj":
        raise ConfigError("sweep_r requires the simtraj rule")
    return _sweep(config, "trajectories", list(r_values), lambda v: {"trajectories": int(v)}, log_x=True)


def transfer_evaluate(
    weights_path,
    dataset: Dataset | str,
    *,
    w_start: int | None = None,
    w_count: int | None = None,
    sigma: float = DEFAULT_SIGMA,
    metrics_k: int | None = None,
    subsample: int | None = None,
    seed: int = 0,
    output_dir: str | None = None,
) -> tuple[ChartResult, MetricsReport]:
    """Apply a trained charting network to a dataset it never saw: featurize
    with the same transform, reuse the stored training-set normalization, and
    evaluate without any training."""
    with _stage("dataset"):
        if not isinstance(dataset, Dataset):
            dataset = load_container(dataset)
    with _stage("load_weights"):
        net = chartnet.load_weights(weights_path)
    with _stage("reduce"):
        w_start, w_count = default_window(dataset.subcarrier_count, w_start, w_count)
        reduced = subcarrier_average(dataset, w_start, w_count)
    with _stage("features"):
        feature_matrix = features.featurize_dataset(reduced, FeatureConfig(sigma=sigma))
    with _stage("chart"):
        z = chartnet.map_features(net, feature_matrix)
        result = ChartResult(
            indices=np.arange(len(dataset), dtype=np.int64),
            z=z,
            x=np.asarray(dataset.positions, dtype=np.float64),
            timestamps=np.asarray(dataset.timestamps, dtype=np.float64),
            provenance={
                "weights_digest": _sha256(weights_path),
                "dataset": dataset.name,
                "subcarrier_window": [w_start, w_count],
                "sigma": sigma,
            },
        )
    with _stage("metrics"):
        report = metrics.evaluate(result.x, result.z, k=metrics_k, subsample=subsample, seed=seed)
    if output_dir is not None:
        os.makedirs(output_dir, exist_ok=True)
        write_chart_csv(result, os.path.join(output_dir, "chart.csv"))
        with open(os.path.join(output_dir, "metrics.json"), "w") as fh:
            fh.write(report.to_json() + "\n")
        emit_plot(result, os.path.join(output_dir, "chart.svg"))
        emit_truth_plot(result, os.path.join(output_dir, "truth.svg"))
        with open(os.path.join(output_dir, "provenance.json"), "w") as fh:
            json.dump(result.provenance, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return result, report
