"""Thin command-line client for the charting service.

Every subcommand (except ``serve``) builds a request and sends it through
the HTTP API: against a remote server when ``--server URL`` is given,
otherwise against an in-process instance of the app, so single-machine use
needs no running daemon. Exit codes: 0 success, 2 config error, 3 stage or
operation failure.
"""

from __future__ import annotations

import argparse
import json
import sys


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app, raise_server_exceptions=False)


def _emit(response) -> int:
    try:
        body = response.json()
    except ValueError:
        body = {"detail": response.text}
    if response.status_code == 200:
        print(json.dumps(body, indent=2, sort_keys=True))
        return 0
    detail = body.get("detail", body)
    kind = body.get("kind", "")
    print(f"error: {detail}", file=sys.stderr)
    if response.status_code == 422 or kind == "config":
        return 2
    return 3


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v != ""]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v != ""]


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read config {path}: {exc}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="channelchart", description=__doc__)
    parser.add_argument("--server", default=None, help="remote service URL (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    p = sub.add_parser("info", help="inspect a CCDS container")
    p.add_argument("--dataset", required=True)

    p = sub.add_parser("synth", help="synthesize a line-of-sight dataset")
    p.add_argument("--synth-config", required=True, help="JSON file with the synthesis parameters")
    p.add_argument("--out", required=True)

    p = sub.add_parser("features", help="compute the feature matrix of a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--sigma", type=float, default=8.0)
    p.add_argument("--w-start", type=int, default=None)
    p.add_argument("--w-count", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("triplets", help="generate training triplets")
    p.add_argument("--dataset", required=True)
    p.add_argument("--rule", required=True, choices=["time", "genie", "simtraj"])
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tc", type=float, default=1.5, help="time window for positives [s]")
    p.add_argument("--dc", type=float, default=1.5, help="distance ball for positives [m]")
    p.add_argument("--r", type=int, default=1000, help="number of simulated trajectories")
    p.add_argument("--speed", type=float, default=1.0)
    p.add_argument("--corridor", type=float, default=0.25)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a charting network")
    p.add_argument("--features", required=True)
    p.add_argument("--triplets", required=True)
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--hidden", default="128,64,32", help="comma-separated hidden widths")
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=512)
    p.add_argument("--out", required=True)

    p = sub.add_parser("chart", help="map a dataset through trained weights")
    p.add_argument("--weights", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--sigma", type=float, default=8.0)
    p.add_argument("--w-start", type=int, default=None)
    p.add_argument("--w-count", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score a chart CSV against ground truth")
    p.add_argument("--chart", required=True)
    p.add_argument("--truth", default=None, help="CCDS dataset for ground-truth positions")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--subsample", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("run", help="run the full pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", default=None, help="override the config's output_dir")
    p.add_argument("--seed", type=int, default=None, help="override the config's seed")

    p = sub.add_parser("sweep-dc", help="sweep the genie positive-ball radius")
    p.add_argument("--config", required=True)
    p.add_argument("--dc", required=True, help="comma-separated d_c values [m]")

    p = sub.add_parser("sweep-r", help="sweep the simulated-trajectory count")
    p.add_argument("--config", required=True)
    p.add_argument("--r", required=True, help="comma-separated trajectory counts")

    p = sub.add_parser("transfer", help="apply trained weights to unseen data")
    p.add_argument("--weights", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--sigma", type=float, default=8.0)
    p.add_argument("--w-start", type=int, default=None)
    p.add_argument("--w-count", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--subsample", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)

    p = sub.add_parser("plot", help="render a chart CSV as SVG")
    p.add_argument("--chart", required=True)
    p.add_argument("--kind", choices=["chart", "truth"], default="chart")
    p.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    client = _client(args.server)
    if args.command == "info":
        return _emit(client.get("/datasets/info", params={"path": args.dataset}))

    if args.command == "synth":
        config = _load_json(args.synth_config)
        return _emit(client.post("/datasets/synthesize", json={"config": config, "out_path": args.out}))

    if args.command == "features":
        return _emit(
            client.post(
                "/features",
                json={
                    "dataset_path": args.dataset,
                    "sigma": args.sigma,
                    "w_start": args.w_start,
                    "w_count": args.w_count,
                    "out_path": args.out,
                },
            )
        )

    if args.command == "triplets":
        return _emit(
            client.post(
                "/triplets",
                json={
                    "dataset_path": args.dataset,
                    "rule": args.rule,
                    "count": args.count,
                    "seed": args.seed,
                    "t_c": args.tc,
                    "d_c": args.dc,
                    "trajectories": args.r,
                    "trajectory_speed": args.speed,
                    "corridor": args.corridor,
                    "out_path": args.out,
                },
            )
        )

    if args.command == "train":
        return _emit(
            client.post(
                "/train",
                json={
                    "features_path": args.features,
                    "triplets_path": args.triplets,
                    "hidden_layers": _ints(args.hidden),
                    "margin": args.margin,
                    "learning_rate": args.lr,
                    "batch_size": args.batch,
                    "epochs": args.epochs,
                    "seed": args.seed,
                    "init_seed": args.init_seed,
                    "out_path": args.out,
                },
            )
        )

    if args.command == "chart":
        return _emit(
            client.post(
                "/charts",
                json={
                    "weights_path": args.weights,
                    "dataset_path": args.dataset,
                    "sigma": args.sigma,
                    "w_start": args.w_start,
                    "w_count": args.w_count,
                    "out_path": args.out,
                },
            )
        )

    if args.command == "eval":
        return _emit(
            client.post(
                "/metrics",
                json={
                    "chart_path": args.chart,
                    "dataset_path": args.truth,
                    "k": args.k,
                    "subsample": args.subsample,
                    "seed": args.seed,
                },
            )
        )

    if args.command == "run":
        config = _load_json(args.config)
        if args.output_dir is not None:
            config["output_dir"] = args.output_dir
        if args.seed is not None:
            config["seed"] = args.seed
        return _emit(client.post("/pipeline/run", json=config))

    if args.command == "sweep-dc":
        config = _load_json(args.config)
        return _emit(client.post("/pipeline/sweep-dc", json={"run": config, "dc_values": _floats(args.dc)}))

    if args.command == "sweep-r":
        config = _load_json(args.config)
        return _emit(client.post("/pipeline/sweep-r", json={"run": config, "r_values": _ints(args.r)}))

    if args.command == "transfer":
        return _emit(
            client.post(
                "/pipeline/transfer",
                json={
                    "weights_path": args.weights,
                    "dataset_path": args.dataset,
                    "sigma": args.sigma,
                    "w_start": args.w_start,
                    "w_count": args.w_count,
                    "k": args.k,
                    "subsample": args.subsample,
                    "seed": args.seed,
                    "output_dir": args.out_dir,
                },
            )
        )

    if args.command == "plot":
        return _emit(
            client.post(
                "/plots",
                json={"chart_path": args.chart, "out_path": args.out, "kind": args.kind},
            )
        )

    raise AssertionError(f"unhandled command {args.command}")


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
