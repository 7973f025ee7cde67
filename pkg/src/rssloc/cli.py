"""Command-line interface: a thin client of the HTTP service.

All compute goes through the service endpoints. By default the app is
mounted in-process (no server needed); pass --server to talk to a running
instance instead. `rssloc serve` starts one.

Subcommands: simulate, run, eval, plot-data, serve.
The RSSLOC_SEED environment variable overrides any configured seed; the
effective seed is always echoed into the report.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import httpx

from .dataset import DatasetError, load_config_file, load_dataset
from .gp import ConstantMean
from .pipeline import RunReport, emit_gp_grid, emit_plot_data, gp_hyperparams_from, parse_windows

SEED_ENV = "RSSLOC_SEED"


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from starlette.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise SystemExit(f"error: {path} failed ({resp.status_code}): {detail}")
    return resp.json()


def _seed_override(cfg: dict) -> dict:
    env = os.environ.get(SEED_ENV)
    if env is not None:
        cfg = {**cfg, "seed": int(env), "rng_seed": int(env)}
    return cfg


def _write_jsonl(path: Path, records: list[dict]):
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def cmd_simulate(args) -> int:
    cfg = load_config_file(args.config) if args.config else {}
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg = _seed_override(cfg)
    with _client(args.server) as client:
        out = _post(client, "/simulate", {k: v for k, v in cfg.items()})
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = out["dataset"]
    _write_jsonl(out_dir / "steps.jsonl", ds["steps"])
    _write_jsonl(out_dir / "scans.jsonl", ds["scans"])
    if ds.get("truth"):
        _write_jsonl(out_dir / "truth.jsonl", ds["truth"])
    meta = (
        f"# scenario echo\nseed = {out['seed']}\n"
        f"start_x = {out['start_x']}\nstart_y = {out['start_y']}\n"
        f"start_theta = {out['start_theta']}\nsteps_per_lap = {out['steps_per_lap']}\n"
    )
    (out_dir / "scenario.cfg").write_text(meta, encoding="utf-8")
    print(f"dataset written to {out_dir} ({len(ds['steps'])} steps, {len(ds['scans'])} scans)")
    return 0


def _dataset_payload(dataset_dir: str) -> dict:
    from .service.app import dataset_to_payload

    return dataset_to_payload(load_dataset(dataset_dir)).model_dump()


def cmd_run(args) -> int:
    cfg = load_config_file(args.config) if args.config else {}
    for override in args.set or []:
        key, _, value = override.partition("=")
        from .dataset import _coerce

        cfg[key.strip()] = _coerce(value.strip())
    cfg = _seed_override(cfg)
    payload = {
        "dataset": _dataset_payload(args.dataset),
        "config": cfg,
        "methods": args.method or ["proposed"],
    }
    with _client(args.server) as client:
        report = _post(client, "/run", payload)
    Path(args.out).write_text(json.dumps(report, indent=2), encoding="utf-8")
    times = ", ".join(
        f"{name}: {entry['engine_time_s']:.3f}s" for name, entry in report["methods"].items()
    )
    print(f"report written to {args.out} ({times})")
    return 0


def cmd_eval(args) -> int:
    report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    payload: dict = {"report": report}
    if args.truth:
        truth = [
            json.loads(line)
            for line in Path(args.truth).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        payload["truth"] = truth
    if args.windows:
        payload["windows"] = parse_windows(args.windows)
    with _client(args.server) as client:
        out = _post(client, "/eval", payload)
    print(f"{'method':<10} {'window':<14} mean error [m]")
    for row in out["metrics"]:
        a, b = row["window"]
        print(f"{row['method']:<10} {f'{a}:{b}':<14} {row['mean_error_m']:.3f}")
    return 0


def cmd_plot_data(args) -> int:
    report = RunReport.from_dict(json.loads(Path(args.report).read_text(encoding="utf-8")))
    written = emit_plot_data(report, args.out)
    if args.gp_map:
        if not args.dataset:
            raise SystemExit("error: --gp-map requires --dataset")
        method = args.gp_method or next(iter(report.methods))
        if method not in report.methods:
            raise SystemExit(f"error: method {method!r} not in report")
        dataset = load_dataset(args.dataset)
        traj = report.methods[method].trajectory
        xs = [p[0] for p in traj]
        ys = [p[1] for p in traj]
        bounds = (
            tuple(float(v) for v in args.bounds.split(","))
            if args.bounds
            else (min(xs) - 5, min(ys) - 5, max(xs) + 5, max(ys) + 5)
        )
        hp = gp_hyperparams_from(report.config)
        mean = ConstantMean(float(report.config.get("gp_mean_constant", -75.0)))
        path = emit_gp_grid(
            dataset, traj, args.gp_map, hp, mean, bounds, args.resolution,
            Path(args.out) / f"gp_map_{args.gp_map}.csv",
        )
        written.append(path)
    for path in written:
        print(path)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rssloc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_server(p):
        p.add_argument("--server", help="base URL of a running service (default: in-process)")

    p = sub.add_parser("simulate", help="generate a synthetic dataset directory")
    p.add_argument("--config", help="scenario config file (key=value)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, help="override scenario seed")
    add_server(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="run one or more methods over a dataset")
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--config", help="run config file (key=value)")
    p.add_argument("--method", action="append", choices=["raw", "proposed", "gp"],
                   help="method to run (repeatable; default proposed)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="config override (repeatable)")
    p.add_argument("--out", required=True, help="report JSON output path")
    add_server(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="print per-window mean errors from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--truth", help="truth.jsonl (needed if the report has no errors)")
    p.add_argument("--windows", help="epoch windows, e.g. 100:171,271:342")
    add_server(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot-data", help="emit trajectory/error CSVs from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--gp-map", metavar="AP_ID", help="also emit a GP RSS surface for this AP")
    p.add_argument("--gp-method", help="report method whose trajectory trains the map")
    p.add_argument("--dataset", help="dataset directory (required with --gp-map)")
    p.add_argument("--bounds", help="grid bounds x0,y0,x1,y1 (default: trajectory bbox +5m)")
    p.add_argument("--resolution", type=int, default=40)
    p.set_defaults(func=cmd_plot_data)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
