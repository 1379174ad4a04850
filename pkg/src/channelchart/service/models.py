"""Pydantic request/response models for the charting service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class SynthSpec(BaseModel):
    n: int = Field(ge=1)
    b: int = Field(ge=1)
    w: int = Field(default=16, ge=1)
    area: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 10.0), (0.0, 10.0))
    antenna_positions: Optional[list[tuple[float, float]]] = None
    carrier_freq: float = 1.272e9
    bandwidth: float = 50e6
    path_loss_exponent: float = 2.0
    trajectory: Literal["meander", "waypoint"] = "meander"
    speed: float = Field(default=1.0, gt=0)
    rows: int = 0
    waypoints: int = 0
    seed: int = 0
    name: str = "synthetic"


class SynthesizeRequest(BaseModel):
    config: SynthSpec
    out_path: str


class DatasetInfo(BaseModel):
    path: str
    name: str
    n: int
    b: int
    w: int
    d: int
    t_min: float
    t_max: float


class FeaturizeRequest(BaseModel):
    dataset_path: str
    w_start: Optional[int] = None
    w_count: Optional[int] = None
    sigma: float = Field(default=8.0, gt=0)
    out_path: str


class FeatureInfo(BaseModel):
    path: str
    n: int
    dim: int


class TripletsRequest(BaseModel):
    dataset_path: str
    rule: Literal["time", "genie", "simtraj"]
    count: int = Field(ge=1)
    seed: int = 0
    t_c: float = Field(default=1.5, gt=0)
    d_c: float = Field(default=1.5, gt=0)
    trajectories: int = Field(default=1000, ge=1)
    trajectory_speed: float = Field(default=1.0, gt=0)
    corridor: float = Field(default=0.25, gt=0)
    out_path: str


class TripletsInfo(BaseModel):
    path: str
    rule: str
    count: int
    violation_rate: float


class TrainRequest(BaseModel):
    features_path: str
    triplets_path: str
    hidden_layers: list[int] = [128, 64, 32]
    margin: float = Field(default=1.0, gt=0)
    learning_rate: float = Field(default=1e-3, gt=0)
    batch_size: int = Field(default=512, ge=1)
    epochs: int = Field(default=8, ge=0)
    seed: int = 0
    init_seed: int = 0
    out_path: str


class TrainInfo(BaseModel):
    weights_path: str
    epochs: int
    loss_history: list[float]


class ChartRequest(BaseModel):
    weights_path: str
    dataset_path: str
    w_start: Optional[int] = None
    w_count: Optional[int] = None
    sigma: float = Field(default=8.0, gt=0)
    out_path: str


class ChartInfo(BaseModel):
    path: str
    n: int


class EvalRequest(BaseModel):
    chart_path: str
    dataset_path: Optional[str] = None
    k: Optional[int] = None
    subsample: Optional[int] = None
    seed: int = 0


class MetricsModel(BaseModel):
    ct: float
    tw: float
    ks: float
    k_used: int
    n_used: int
    seed: int


class RunSpec(BaseModel):
    output_dir: str
    dataset_path: Optional[str] = None
    synth: Optional[SynthSpec] = None
    w_start: Optional[int] = None
    w_count: Optional[int] = None
    sigma: float = Field(default=8.0, gt=0)
    rule: Literal["time", "genie", "simtraj"] = "genie"
    triplet_count: int = Field(default=100_000, ge=1)
    t_c: float = Field(default=1.5, gt=0)
    d_c: float = Field(default=1.5, gt=0)
    trajectories: int = Field(default=1000, ge=1)
    trajectory_speed: float = Field(default=1.0, gt=0)
    corridor: float = Field(default=0.25, gt=0)
    hidden_layers: list[int] = [128, 64, 32]
    margin: float = Field(default=1.0, gt=0)
    learning_rate: float = Field(default=1e-3, gt=0)
    batch_size: int = Field(default=512, ge=1)
    epochs: int = Field(default=8, ge=0)
    metrics_k: Optional[int] = None
    subsample: Optional[int] = None
    seed: int = 0


class RunResponse(BaseModel):
    output_dir: str
    metrics: MetricsModel
    artifacts: dict[str, str]
    loss_history: list[float]


class SweepDcRequest(BaseModel):
    run: RunSpec
    dc_values: list[float]


class SweepRRequest(BaseModel):
    run: RunSpec
    r_values: list[int]


class SweepRow(BaseModel):
    value: float
    ct: float
    tw: float
    ks: float


class SweepResponse(BaseModel):
    key: str
    rows: list[SweepRow]
    table_path: str
    plot_path: str


class TransferRequest(BaseModel):
    weights_path: str
    dataset_path: str
    w_start: Optional[int] = None
    w_count: Optional[int] = None
    sigma: float = Field(default=8.0, gt=0)
    k: Optional[int] = None
    subsample: Optional[int] = None
    seed: int = 0
    output_dir: Optional[str] = None


class PlotRequest(BaseModel):
    chart_path: str
    out_path: str
    kind: Literal["chart", "truth"] = "chart"


class PlotInfo(BaseModel):
    path: str


class HealthInfo(BaseModel):
    status: str
    version: str
