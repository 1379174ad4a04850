"""FastAPI service wrapping the charting toolkit.

Endpoints operate on files reachable from the server process and return
structured summaries. Domain failures map to HTTP 400 with a ``kind`` field
("config" for invalid configurations, "stage" for pipeline stage failures,
"domain" otherwise) so thin clients can translate them into exit codes.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, chartnet, features, metrics, pipeline, triplets
from ..dataset import SynthConfig, load_container, save_container, subcarrier_average, synthesize_los_dataset
from ..errors import ChannelChartError, ConfigError, StageError
from ..features import FeatureConfig
from . import models


def _run_config(spec: models.RunSpec) -> pipeline.RunConfig:
    data = spec.model_dump()
    data["hidden_layers"] = tuple(data["hidden_layers"])
    if data.get("synth") is not None:
        synth = dict(data["synth"])
        synth["area"] = tuple(tuple(ax) for ax in synth["area"])
        if synth.get("antenna_positions") is not None:
            synth["antenna_positions"] = tuple(tuple(p) for p in synth["antenna_positions"])
        data["synth"] = SynthConfig(**synth)
    return pipeline.RunConfig(**data)


def _metrics_model(report: metrics.MetricsReport) -> models.MetricsModel:
    return models.MetricsModel(**report.to_dict())


def create_app() -> FastAPI:
    app = FastAPI(title="channelchart", version=__version__)

    @app.exception_handler(ChannelChartError)
    async def _domain_error(request: Request, exc: ChannelChartError):
        if isinstance(exc, ConfigError):
            payload = {"detail": str(exc), "kind": "config"}
        elif isinstance(exc, StageError):
            payload = {"detail": str(exc), "kind": "stage", "stage": exc.stage}
        else:
            payload = {"detail": str(exc), "kind": "domain"}
        return JSONResponse(status_code=400, content=payload)

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(request: Request, exc: FileNotFoundError):
        return JSONResponse(status_code=400, content={"detail": str(exc), "kind": "config"})

    @app.get("/health", response_model=models.HealthInfo)
    def health():
        return models.HealthInfo(status="ok", version=__version__)

    @app.post("/datasets/synthesize", response_model=models.DatasetInfo)
    def synthesize(req: models.SynthesizeRequest):
        cfg = req.config.model_dump()
        cfg["area"] = tuple(tuple(ax) for ax in cfg["area"])
        if cfg.get("antenna_positions") is not None:
            cfg["antenna_positions"] = tuple(tuple(p) for p in cfg["antenna_positions"])
        dataset = synthesize_los_dataset(SynthConfig(**cfg))
        os.makedirs(os.path.dirname(os.path.abspath(req.out_path)), exist_ok=True)
        save_container(dataset, req.out_path)
        return models.DatasetInfo(
            path=req.out_path,
            name=dataset.name,
            n=len(dataset),
            b=dataset.antenna_count,
            w=dataset.subcarrier_count,
            d=dataset.position_dim,
            t_min=float(dataset.timestamps[0]),
            t_max=float(dataset.timestamps[-1]),
        )

    @app.get("/datasets/info", response_model=models.DatasetInfo)
    def dataset_info(path: str):
        dataset = load_container(path)
        return models.DatasetInfo(
            path=path,
            name=dataset.name,
            n=len(dataset),
            b=dataset.antenna_count,
            w=dataset.subcarrier_count,
            d=dataset.position_dim,
            t_min=float(dataset.timestamps[0]),
            t_max=float(dataset.timestamps[-1]),
        )

    @app.post("/features", response_model=models.FeatureInfo)
    def featurize(req: models.FeaturizeRequest):
        dataset = load_container(req.dataset_path)
        w_start, w_count = pipeline.default_window(dataset.subcarrier_count, req.w_start, req.w_count)
        reduced = subcarrier_average(dataset, w_start, w_count)
        matrix = features.featurize_dataset(reduced, FeatureConfig(sigma=req.sigma))
        features.save_feature_matrix(matrix, req.out_path)
        return models.FeatureInfo(path=req.out_path, n=matrix.shape[0], dim=matrix.shape[1])

    @app.post("/triplets", response_model=models.TripletsInfo)
    def make_triplets(req: models.TripletsRequest):
        dataset = load_container(req.dataset_path)
        if req.rule == "time":
            ts = triplets.select_time_based(
                dataset, triplets.TimeSelectionConfig(t_c=req.t_c, count=req.count, seed=req.seed)
            )
        elif req.rule == "genie":
            ts = triplets.select_genie(
                dataset, triplets.GenieSelectionConfig(d_c=req.d_c, count=req.count, seed=req.seed)
            )
        else:
            trajs = triplets.simulate_trajectories(
                dataset,
                r=req.trajectories,
                speed=req.trajectory_speed,
                corridor=req.corridor,
                seed=req.seed,
            )
            ts = triplets.select_sim_trajectory_triplets(trajs, t_c=req.t_c, count=req.count, seed=req.seed)
        triplets.save_triplets(ts, req.out_path)
        return models.TripletsInfo(
            path=req.out_path,
            rule=ts.rule,
            count=len(ts),
            violation_rate=triplets.violation_rate(ts, dataset),
        )

    @app.post("/train", response_model=models.TrainInfo)
    def train_network(req: models.TrainRequest):
        matrix = features.load_feature_matrix(req.features_path)
        ts = triplets.load_triplets(req.triplets_path)
        net_config = chartnet.NetworkConfig(
            input_dim=matrix.shape[1],
            hidden_layers=tuple(req.hidden_layers),
            init_seed=req.init_seed,
        )
        train_config = chartnet.TrainConfig(
            margin=req.margin,
            learning_rate=req.learning_rate,
            batch_size=req.batch_size,
            epochs=req.epochs,
            seed=req.seed,
        )
        net, history = chartnet.train(matrix, ts, net_config, train_config)
        chartnet.save_weights(net, req.out_path)
        return models.TrainInfo(weights_path=req.out_path, epochs=req.epochs, loss_history=history)

    @app.post("/charts", response_model=models.ChartInfo)
    def make_chart(req: models.ChartRequest):
        result, _ = pipeline.transfer_evaluate(
            req.weights_path,
            req.dataset_path,
            w_start=req.w_start,
            w_count=req.w_count,
            sigma=req.sigma,
        )
        pipeline.write_chart_csv(result, req.out_path)
        return models.ChartInfo(path=req.out_path, n=len(result))

    @app.post("/metrics", response_model=models.MetricsModel)
    def evaluate_chart(req: models.EvalRequest):
        result = pipeline.read_chart_csv(req.chart_path)
        x = result.x
        if req.dataset_path is not None:
            x = load_container(req.dataset_path).positions
            if len(x) != len(result):
                raise ConfigError(
                    f"chart has {len(result)} rows but dataset has {len(x)} datapoints"
                )
        report = metrics.evaluate(x, result.z, k=req.k, subsample=req.subsample, seed=req.seed)
        return _metrics_model(report)

    @app.post("/pipeline/run", response_model=models.RunResponse)
    def run(req: models.RunSpec):
        config = _run_config(req)
        result, report = pipeline.run_pipeline(config)
        return models.RunResponse(
            output_dir=config.output_dir,
            metrics=_metrics_model(report),
            artifacts={
                name: os.path.join(config.output_dir, name)
                for name in result.provenance["artifacts"]
            },
            loss_history=result.provenance["loss_history"],
        )

    @app.post("/pipeline/sweep-dc", response_model=models.SweepResponse)
    def run_sweep_dc(req: models.SweepDcRequest):
        config = _run_config(req.run)
        rows = pipeline.sweep_dc(config, req.dc_values)
        return models.SweepResponse(
            key="d_c",
            rows=[models.SweepRow(value=row["d_c"], ct=row["ct"], tw=row["tw"], ks=row["ks"]) for row in rows],
            table_path=os.path.join(config.output_dir, "sweep_d_c.csv"),
            plot_path=os.path.join(config.output_dir, "sweep_d_c.svg"),
        )

    @app.post("/pipeline/sweep-r", response_model=models.SweepResponse)
    def run_sweep_r(req: models.SweepRRequest):
        config = _run_config(req.run)
        rows = pipeline.sweep_r(config, req.r_values)
        return models.SweepResponse(
            key="trajectories",
            rows=[
                models.SweepRow(value=row["trajectories"], ct=row["ct"], tw=row["tw"], ks=row["ks"])
                for row in rows
            ],
            table_path=os.path.join(config.output_dir, "sweep_trajectories.csv"),
            plot_path=os.path.join(config.output_dir, "sweep_trajectories.svg"),
        )

    @app.post("/pipeline/transfer", response_model=models.RunResponse)
    def transfer(req: models.TransferRequest):
        result, report = pipeline.transfer_evaluate(
            req.weights_path,
            req.dataset_path,
            w_start=req.w_start,
            w_count=req.w_count,
            sigma=req.sigma,
            metrics_k=req.k,
            subsample=req.subsample,
            seed=req.seed,
            output_dir=req.output_dir,
        )
        artifacts = {}
        if req.output_dir is not None:
            artifacts = {
                name: os.path.join(req.output_dir, name)
                for name in ("chart.csv", "metrics.json", "chart.svg", "truth.svg", "provenance.json")
            }
        return models.RunResponse(
            output_dir=req.output_dir or "",
            metrics=_metrics_model(report),
            artifacts=artifacts,
            loss_history=[],
        )

    @app.post("/plots", response_model=models.PlotInfo)
    def plot(req: models.PlotRequest):
        result = pipeline.read_chart_csv(req.chart_path)
        if req.kind == "chart":
            pipeline.emit_plot(result, req.out_path)
        else:
            pipeline.emit_truth_plot(result, req.out_path)
        return models.PlotInfo(path=req.out_path)

    return app


app = create_app()
