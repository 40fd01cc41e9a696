"""Command-line front end: a thin client of the lab service.

By default commands run against the in-process service; point --server (or
DGFDIST_SERVER) at a running `dgfdist serve` instance to go over HTTP. File
reads and writes stay on the client side either way.

Exit codes: 0 success, 1 input/data failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys
import tempfile
from pathlib import Path

from .client import make_client
from .errors import FormatError
from .experiment import parse_manifest
from .service import schemas
from .service.api import ApiError

METHODS = ["arithmetic", "harmonic", "closest"]
GRANULARITIES = ["func", "appr", "bblk"]


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dgfdist",
        description="Distance-metric laboratory for directed grey-box fuzzing")
    parser.add_argument("--server", default=os.environ.get("DGFDIST_SERVER") or None,
                        help="base URL of a running dgfdist service "
                             "(default: run in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_graph = sub.add_parser("graph", help="program-graph utilities")
    graph_sub = p_graph.add_subparsers(dest="graph_command", required=True)
    p_validate = graph_sub.add_parser("validate", help="parse and validate a graph file")
    p_validate.add_argument("graph", type=Path)

    p_dist = sub.add_parser("distance", help="compute a block distance table")
    p_dist.add_argument("graph", type=Path)
    p_dist.add_argument("targets", type=Path)
    p_dist.add_argument("--method", choices=METHODS, default="harmonic")
    p_dist.add_argument("--granularity", choices=GRANULARITIES, default="appr")
    p_dist.add_argument("--c", type=float, default=10.0, dest="magnifier_c",
                        help="magnifier constant for appr granularity (default 10)")
    p_dist.add_argument("--out", type=Path, default=None,
                        help="output CSV path (default: stdout)")

    p_fuzz = sub.add_parser("fuzz", help="run one deterministic campaign")
    p_fuzz.add_argument("subject", type=Path)
    p_fuzz.add_argument("targets", type=Path)
    p_fuzz.add_argument("--method", choices=METHODS, default="harmonic")
    p_fuzz.add_argument("--granularity", choices=GRANULARITIES, default="appr")
    p_fuzz.add_argument("--c", type=float, default=10.0, dest="magnifier_c")
    p_fuzz.add_argument("--rng-seed", type=int, default=0)
    p_fuzz.add_argument("--budget", type=int, default=10000,
                        help="campaign length in executions")
    p_fuzz.add_argument("--exploration-fraction", type=float, default=0.5,
                        help="budget fraction over which the schedule anneals")
    p_fuzz.add_argument("--max-power-exponent", type=float, default=4.0,
                        help="energy swings within 2**±P of the base")
    p_fuzz.add_argument("--base-energy", type=int, default=16)
    p_fuzz.add_argument("--step-limit", type=int, default=4096)
    p_fuzz.add_argument("--initial-seed", action="append", default=None,
                        metavar="HEX", help="initial seed bytes in hex; "
                        "repeatable (default: one empty seed)")
    p_fuzz.add_argument("--wall-clock-cap", type=float, default=None,
                        metavar="SECONDS", help="safety valve: stop the "
                        "campaign after this much real time")
    p_fuzz.add_argument("--stop-on-poc", action="store_true",
                        help="end the campaign at the first PoC")
    p_fuzz.add_argument("--out", type=Path, required=True,
                        help="campaign log CSV path")

    p_exp = sub.add_parser("experiment",
                           help="run a manifest of repeated campaigns")
    p_exp.add_argument("manifest", type=Path)

    p_an = sub.add_parser("analyze", help="analyze campaign logs")
    p_an.add_argument("logs", nargs="+",
                      help="log files or glob patterns")
    p_an.add_argument("--out", type=Path, required=True,
                      help="output directory for analysis artifacts")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    return parser


def _read(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as exc:
        raise ApiError(f"cannot read {path}: {exc}") from None


def cmd_graph_validate(client, args) -> int:
    resp = client.validate_graph(
        schemas.GraphValidateRequest(graph=_read(args.graph)))
    if resp.valid:
        print(f"OK: {resp.functions} functions, {resp.blocks} blocks")
        return 0
    for violation in resp.violations:
        print(violation, file=sys.stderr)
    return 1


def cmd_distance(client, args) -> int:
    resp = client.distance_map(schemas.DistanceRequest(
        graph=_read(args.graph), targets=_read(args.targets),
        method=args.method, granularity=args.granularity,
        magnifier_c=args.magnifier_c))
    if args.out is None:
        sys.stdout.write(resp.csv)
    else:
        write_atomic(args.out, resp.csv)
        print(f"wrote {args.out} ({resp.defined} defined, "
              f"{resp.undefined} undefined)")
    return 0


def cmd_fuzz(client, args) -> int:
    seeds = args.initial_seed if args.initial_seed is not None else [""]
    resp = client.fuzz(schemas.FuzzRequest(
        subject=_read(args.subject), targets=_read(args.targets),
        method=args.method, granularity=args.granularity,
        magnifier_c=args.magnifier_c, rng_seed=args.rng_seed,
        budget=args.budget, exploration_fraction=args.exploration_fraction,
        max_power_exponent=args.max_power_exponent,
        base_energy=args.base_energy, step_limit=args.step_limit,
        initial_seeds_hex=seeds, wall_clock_cap=args.wall_clock_cap,
        stop_on_first_poc=args.stop_on_poc))
    write_atomic(args.out, resp.log_csv)
    if resp.first_poc_tick is None:
        print("TIMEOUT")
    else:
        print(f"TTE {resp.first_poc_tick}")
    return 0


def cmd_experiment(client, args) -> int:
    manifest_text = _read(args.manifest)
    try:
        manifest = parse_manifest(manifest_text)
    except FormatError as exc:
        raise ApiError(str(exc)) from None
    base = args.manifest.parent
    resp = client.run_experiment(schemas.ExperimentRequest(
        manifest=manifest_text,
        subject=_read(base / manifest.subject_path),
        targets=_read(base / manifest.targets_path)))
    out_dir = Path(manifest.output_dir)
    if not out_dir.is_absolute():
        out_dir = base / out_dir
    for name in sorted(resp.logs):
        write_atomic(out_dir / f"{name}.csv", resp.logs[name])
    write_atomic(out_dir / "summary.csv", resp.summary_csv)
    sys.stdout.write(resp.summary_csv)
    print(f"wrote {len(resp.logs)} logs and summary.csv to {out_dir} "
          f"(baseline {resp.baseline})")
    return 0


def cmd_analyze(client, args) -> int:
    paths: list[Path] = []
    for pattern in args.logs:
        hits = sorted(glob.glob(pattern))
        if hits:
            paths.extend(Path(h) for h in hits)
        else:
            paths.append(Path(pattern))
    logs: dict[str, str] = {}
    for p in paths:
        name = p.stem
        suffix = 1
        while name in logs:  # same stem from different directories
            suffix += 1
            name = f"{p.stem}~{suffix}"
        logs[name] = _read(p)
    resp = client.analyze(schemas.AnalyzeRequest(logs=logs))
    write_atomic(args.out / "lineage.csv", resp.lineage_csv)
    write_atomic(args.out / "decrease.csv", resp.decrease_csv)
    write_atomic(args.out / "lineage_series.tsv", resp.lineage_series_tsv)
    write_atomic(args.out / "decrease_cactus.tsv", resp.decrease_cactus_tsv)
    print(f"logs={len(logs)} pocs={resp.pocs} samples={resp.samples} "
          f"skipped={resp.skipped}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    client = make_client(args.server)
    try:
        if args.command == "graph":
            return cmd_graph_validate(client, args)
        if args.command == "distance":
            return cmd_distance(client, args)
        if args.command == "fuzz":
            return cmd_fuzz(client, args)
        if args.command == "experiment":
            return cmd_experiment(client, args)
        if args.command == "analyze":
            return cmd_analyze(client, args)
    except (ApiError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
