"""Command line entry point.

Every subcommand runs in-process by default. With ``--server URL`` (or the
KRYLOV_DISTANCE_SERVER environment variable) the request is sent to a running
``krylov-distance serve`` instance instead and only the response is handled here.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any

SERVER_ENV = "KRYLOV_DISTANCE_SERVER"


class RemoteError(RuntimeError):
    pass


def _client(server: str):
    import httpx

    return httpx.Client(base_url=server.rstrip("/"), timeout=None)


def _call(server: str, method: str, path: str, payload: dict | None = None) -> Any:
    with _client(server) as client:
        resp = client.request(method, path, json=payload)
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail")
        except ValueError:
            detail = resp.text
        raise RemoteError(f"{method} {path}: HTTP {resp.status_code}: {detail}")
    return resp.json()


def _mesh_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mesh-start", type=float, default=0.05)
    p.add_argument("--mesh-stop", type=float, default=2.0)
    p.add_argument("--mesh-step", type=float, default=0.05)


def _print_fit(label: str, rec: dict) -> None:
    status = "usable" if rec["usable"] else ("concave" if rec["concave_at_floor"] else "unusable")
    print(f"{label}: a={rec['a']:g} y={rec['y']:.9f} L={rec['L']:.9f} "
          f"y-L={rec['y'] - rec['L']:.3e} residual={rec['residual']:.3e} [{status}]")


def cmd_probe(args: argparse.Namespace) -> int:
    from .io import write_series
    from .lanczos import DistanceSeries

    params = {
        "d": args.d, "n_max": args.n_max, "M": args.M, "c": args.c, "seed": args.seed,
        "convention": args.convention, "crop": args.crop, "include_coefficients": True,
    }
    mesh = {"mesh_start": args.mesh_start, "mesh_stop": args.mesh_stop, "mesh_step": args.mesh_step}
    if args.server:
        resp = _call(args.server, "POST", "/probe", {**params, **mesh})
    else:
        from .runner import probe_record
        from .scaling import make_mesh

        resp = probe_record(**params, mesh=make_mesh(*mesh.values()))
    series = DistanceSeries(
        c=resp["c"], seed=resp["seed"], n_max=resp["n_max"], values=resp["distances"],
        truncation_flag=resp["truncation_flag"], breakdown_step=resp["breakdown_step"],
        d=resp["d"], M=resp["M"], convention=resp["convention"], alpha=resp["alpha"], beta=resp["beta"],
    )
    if args.out:
        out = Path(args.out)
        if out.suffix != ".csv":
            out.mkdir(parents=True, exist_ok=True)
            out = out / "series.csv"
        else:
            out.parent.mkdir(parents=True, exist_ok=True)
        write_series(out, series)
        print(f"wrote {out}")
    print(f"D^{series.n_max} = {series.values[-1]:.12f}"
          + (" (truncated)" if series.truncation_flag else ""))
    if resp.get("fit"):
        _print_fit(f"c={series.c:g} seed={series.seed}", resp["fit"])
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    from .runner import analyze
    from .scaling import make_mesh

    failed = 0
    if args.server:
        from .io import read_series

        for path in args.files:
            try:
                s = read_series(path)
                rec = _call(args.server, "POST", "/analyze", {
                    "distances": s.values.tolist(), "crop": args.crop, "c": None if s.c != s.c else s.c,
                    "seed": s.seed if s.seed >= 0 else None, "mesh_start": args.mesh_start, "mesh_stop": args.mesh_stop,
                    "mesh_step": args.mesh_step,
                })
                print(json.dumps({"file": str(path), **rec}))
            except Exception as exc:  # per-file failures are reported and counted
                failed += 1
                print(json.dumps({"file": str(path), "error": str(exc)}))
        return 1 if failed else 0
    mesh = make_mesh(args.mesh_start, args.mesh_stop, args.mesh_step)
    for entry in analyze(args.files, args.crop, mesh):
        failed += entry.fit is None
        print(json.dumps(entry.record()))
    return 1 if failed else 0


def cmd_run(args: argparse.Namespace) -> int:
    from .runner import format_report, load_config, run_sweep

    config = load_config(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    if args.workers:
        config.worker_count = args.workers
    if args.server:
        body = config.to_dict()
        if not args.output_dir:
            body["output_dir"] = None
        job = _call(args.server, "POST", "/sweeps", body)
        print(f"submitted sweep {job['id']} -> {job['output_dir']}")
        while job["status"] in ("queued", "running"):
            time.sleep(args.poll)
            job = _call(args.server, "GET", f"/sweeps/{job['id']}")
        if job["error"]:
            print(job["error"], file=sys.stderr)
            return 1
        failed = [m for m in job["manifest"] if m["status"] != "done"]
        report = _call(args.server, "GET", f"/sweeps/{job['id']}/report")
        print(report["text"])
    else:
        outcome = run_sweep(config)
        failed = outcome.failed
        from .runner import build_report

        print(format_report(build_report(
            outcome.output_dir, crop=config.crop, mesh=config.mesh, l_threshold=config.l_threshold,
            gap_threshold=config.gap_threshold, expected_c=config.c_values,
        )) if outcome.results else "no cell completed")
    for m in failed:
        print(f"FAILED c={m['c']} r={m['r_index']}: {m.get('error')}", file=sys.stderr)
    return 1 if failed else 0


def cmd_report(args: argparse.Namespace) -> int:
    if args.server:
        resp = _call(args.server, "POST", "/report", {"results_dir": args.results_dir, "crop": args.crop})
        print(resp["text"])
        return 0
    from .runner import format_report, write_report

    print(format_report(write_report(args.results_dir, crop=args.crop)))
    return 0


def cmd_bulk(args: argparse.Namespace) -> int:
    out = args.out or str(Path(os.environ.get("KRYLOV_DISTANCE_OUTPUT_DIR", "runs")) / "bulk")
    if args.server:
        rows = _call(args.server, "POST", "/bulk", {
            "c_values": args.c, "n": args.n, "realizations": args.realizations, "d": args.d, "M": args.M,
            "master_seed": args.seed, "kind": args.kind, "convention": args.convention, "output_dir": out,
        })
        summary = {r["c"]: r["E"] for r in rows}
    else:
        from .runner import run_bulk

        averaged = run_bulk(out, args.c, args.n, args.realizations, d=args.d, M=args.M,
                            master_seed=args.seed, kind=args.kind, convention=args.convention,
                            plots=args.plots)
        summary = {c: p.values.tolist() for c, p in averaged.items()}
    for c, E in summary.items():
        peak = max(range(len(E)), key=E.__getitem__)
        print(f"c={c:g}: peak shell l={peak}, E={E[peak]:.6f}")
    print(f"profiles under {out}/profiles")
    return 0


def cmd_ortho(args: argparse.Namespace) -> int:
    out = args.out or str(Path(os.environ.get("KRYLOV_DISTANCE_OUTPUT_DIR", "runs")) / "ortho")
    if args.server:
        rows = _call(args.server, "POST", "/ortho", {
            "c_values": args.c, "n_max": args.n_max, "M": args.M, "d": args.d,
            "master_seed": args.seed, "convention": args.convention, "output_dir": out,
        })
    else:
        from .runner import run_ortho

        rows = run_ortho(out, args.c, n_max=args.n_max, M=args.M, d=args.d,
                         master_seed=args.seed, convention=args.convention)
    for r in rows:
        print(f"c={r['c']:g} seed={r['seed']} Q={r['Q']:.3e}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("krylov_distance.service.app:app", host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="krylov-distance", description=__doc__.split("\n")[0])
    parser.add_argument("--server", default=os.environ.get(SERVER_ENV),
                        help="send the request to this service URL instead of running locally")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full sweep from a config file")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--poll", type=float, default=2.0, help="status poll interval with --server")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("probe", help="distance series for a single realization")
    p.add_argument("--d", type=int, choices=(2, 3), default=3)
    p.add_argument("--n-max", type=int, default=200)
    p.add_argument("--M", type=int, help="half-width (default n_max + 1)")
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--convention", choices=("half", "full"), default="half")
    p.add_argument("--crop", type=int)
    p.add_argument("--out", help="series CSV path or directory")
    _mesh_args(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("analyze", help="refit persisted series CSV files")
    p.add_argument("files", nargs="+")
    p.add_argument("--crop", type=int)
    _mesh_args(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="tables for a results directory")
    p.add_argument("results_dir")
    p.add_argument("--crop", type=int)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("bulk", help="taxicab shell profiles of the evolved vector")
    p.add_argument("--c", type=float, nargs="+", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--realizations", type=int, default=1)
    p.add_argument("--d", type=int, choices=(2, 3), default=3)
    p.add_argument("--M", type=int)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--kind", choices=("lanczos", "power"), default="lanczos")
    p.add_argument("--convention", choices=("half", "full"), default="half")
    p.add_argument("--plots", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bulk)

    p = sub.add_parser("ortho", help="orthogonality loss of the stored Lanczos basis")
    p.add_argument("--c", type=float, nargs="+", default=[0.0, 1.0, 2.0, 3.5])
    p.add_argument("--n-max", type=int, default=150)
    p.add_argument("--M", type=int, default=40)
    p.add_argument("--d", type=int, choices=(2, 3), default=3)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--convention", choices=("half", "full"), default="half")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ortho)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    from .errors import KrylovDistanceError

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (KrylovDistanceError, RemoteError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
