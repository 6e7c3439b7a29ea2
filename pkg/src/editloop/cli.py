"""Command-line interface: benchmark generation, batch runs, evaluation,
drift reports, and the HTTP service.

Configuration layers, weakest first: built-in defaults, a JSON config file
(--config PATH or EDITLOOP_CONFIG, keys matching the EDITLOOP_* names),
environment variables, explicit flags. Exit codes: 0 ok, 2 usage error,
3 bad directory layout, 4 incomplete run, 5 evaluation failure, 6 service
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import EditLoopError, LayoutError
from .metrics import drift_report, drift_series_csv
from .planning import LlmPlannerClient, SessionConfig
from .runner import (
    evaluate_benchmark,
    generate_benchmark,
    report_text_table,
    run_benchmark,
    write_report,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_LAYOUT = 3
EXIT_RUN = 4
EXIT_EVAL = 5
EXIT_SERVE = 6


_FILE_CONFIG: dict = {}


def _load_config_file(path: str) -> None:
    global _FILE_CONFIG
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if not isinstance(doc, dict):
        raise ValueError("config file must hold a JSON object")
    _FILE_CONFIG = {str(k).upper(): str(v) for k, v in doc.items()}


def _env(name: str, default=None):
    # Layering: default < config file < environment (flags override later).
    return os.environ.get(f"EDITLOOP_{name}",
                          _FILE_CONFIG.get(name, default))


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",")]


def _parse_canvas(text: str) -> tuple[int, int]:
    w, h = text.lower().split("x", 1)
    return int(w), int(h)


def _llm_client_from_env():
    endpoint = _env("LLM_ENDPOINT")
    if not endpoint:
        return None
    return LlmPlannerClient(endpoint, model=_env("LLM_MODEL", "default"),
                            api_key=_env("LLM_API_KEY"))


def _add_genbench(sub):
    p = sub.add_parser("genbench", help="generate benchmark session directories")
    p.add_argument("--seeds", default=_env("SEEDS", "0..49"),
                   help="A..B inclusive range or comma list [env EDITLOOP_SEEDS]")
    p.add_argument("--out", default=_env("BENCH"), required=_env("BENCH") is None,
                   help="output benchmark directory [env EDITLOOP_BENCH]")
    p.add_argument("--turns", type=int, default=int(_env("TURNS", "3")),
                   help="turns per session [env EDITLOOP_TURNS]")
    p.add_argument("--canvas", default=_env("CANVAS", "256x256"),
                   help="canvas WxH [env EDITLOOP_CANVAS]")
    return p


def _add_run(sub):
    p = sub.add_parser("run", help="run a system over a benchmark")
    p.add_argument("--bench", default=_env("BENCH"), required=_env("BENCH") is None,
                   help="benchmark directory [env EDITLOOP_BENCH]")
    p.add_argument("--backend", default=_env("BACKEND", "symbolic"),
                   choices=["symbolic", "remote", "degrading"],
                   help="edit backend [env EDITLOOP_BACKEND]")
    p.add_argument("--planner", default=_env("PLANNER", "rule"),
                   choices=["rule", "llm"], help="planner mode [env EDITLOOP_PLANNER]")
    p.add_argument("--out", default=_env("OUT"), required=_env("OUT") is None,
                   help="outputs directory [env EDITLOOP_OUT]")
    p.add_argument("--feather", type=float, default=float(_env("FEATHER", "0")),
                   help="feather sigma, 0 for hard paste [env EDITLOOP_FEATHER]")
    p.add_argument("--retry-budget", type=int, default=int(_env("RETRY_BUDGET", "3")),
                   help="quality-test retries per turn [env EDITLOOP_RETRY_BUDGET]")
    p.add_argument("--degrade-seed", type=int,
                   default=int(_env("DEGRADE_SEED", "0")),
                   help="seed for the degrading backend [env EDITLOOP_DEGRADE_SEED]")
    return p


def _add_eval(sub):
    p = sub.add_parser("eval", help="score system outputs against a benchmark")
    p.add_argument("--bench", default=_env("BENCH"), required=_env("BENCH") is None,
                   help="benchmark directory [env EDITLOOP_BENCH]")
    p.add_argument("--outputs", default=_env("OUT"), required=_env("OUT") is None,
                   help="outputs directory [env EDITLOOP_OUT]")
    p.add_argument("--report", default=_env("REPORT"),
                   required=_env("REPORT") is None,
                   help="report JSON path [env EDITLOOP_REPORT]")
    p.add_argument("--quiet", action="store_true",
                   help="suppress the text table")
    return p


def _add_report(sub):
    p = sub.add_parser("report", help="drift analysis over eval reports")
    p.add_argument("--inputs", nargs="+", required=True,
                   help="eval report JSON files, one per system")
    p.add_argument("--drift", action="store_true",
                   help="emit per-turn drift statistics")
    p.add_argument("--csv", default=None, help="write the drift series as CSV")
    return p


def _add_serve(sub):
    p = sub.add_parser("serve", help="start the HTTP session service")
    p.add_argument("--addr", default=_env("ADDR", "127.0.0.1:8750"),
                   help="host:port to bind [env EDITLOOP_ADDR]")
    p.add_argument("--store", default=_env("STORE"),
                   required=_env("STORE") is None,
                   help="session store directory [env EDITLOOP_STORE]")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="editloop",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS,
                        help="JSON config file supplying flag defaults "
                             "[env EDITLOOP_CONFIG]")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_genbench(sub)
    _add_run(sub)
    _add_eval(sub)
    _add_report(sub)
    _add_serve(sub)
    return parser


def cmd_genbench(args) -> int:
    names = generate_benchmark(_parse_seeds(args.seeds), args.out,
                               n_turns=args.turns,
                               canvas=_parse_canvas(args.canvas))
    print(f"wrote {len(names)} sessions under {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = SessionConfig(
        backend=args.backend,
        planner_mode="rule_based" if args.planner == "rule" else "llm",
        feather_sigma=args.feather,
        retry_budget=args.retry_budget,
        degrade_seed=args.degrade_seed,
        remote_endpoint=_env("BACKEND_ENDPOINT"),
        remote_token=_env("BACKEND_TOKEN"),
    )
    try:
        results = run_benchmark(args.bench, args.out, config,
                                llm_client=_llm_client_from_env())
    except LayoutError as exc:
        print(f"layout error: {exc}", file=sys.stderr)
        return EXIT_LAYOUT
    incomplete = {name: [o.status for o in outcomes]
                  for name, outcomes in results.items()
                  if any(o.status != "committed" for o in outcomes)}
    total_turns = sum(len(o) for o in results.values())
    print(f"ran {len(results)} sessions, {total_turns} turns")
    if incomplete:
        for name, statuses in incomplete.items():
            print(f"incomplete: {name}: {statuses}", file=sys.stderr)
        return EXIT_RUN
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        report = evaluate_benchmark(args.bench, args.outputs)
    except LayoutError as exc:
        print(f"layout error: {exc}", file=sys.stderr)
        return EXIT_LAYOUT
    except EditLoopError as exc:
        print(f"evaluation failed: {exc}", file=sys.stderr)
        return EXIT_EVAL
    write_report(report, args.report)
    if not args.quiet:
        print(report_text_table(report))
    print(f"report written to {args.report}")
    return EXIT_OK


def cmd_report(args) -> int:
    series_by_system = {}
    for path in args.inputs:
        try:
            with open(path, encoding="utf-8") as f:
                doc = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read {path}: {exc}", file=sys.stderr)
            return EXIT_EVAL
        if "turn_series" not in doc:
            print(f"{path} has no turn_series (uneven session lengths?)",
                  file=sys.stderr)
            return EXIT_EVAL
        name = os.path.splitext(os.path.basename(path))[0]
        series_by_system[name] = doc["turn_series"]
    report = drift_report(series_by_system)
    if args.drift:
        for system, entry in report["systems"].items():
            flag = "  [FLAG: psnr_om rises every turn]" if entry["flagged"] else ""
            print(f"system {system}{flag}")
            for metric, stats in entry["stats"].items():
                print(f"  {metric:<16} slope={stats['slope']:+.6f} "
                      f"max_delta={stats['max_delta']:.6f}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as f:
            f.write(drift_series_csv(report))
        print(f"series written to {args.csv}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve
    try:
        server = serve(args.addr, args.store, llm_client=_llm_client_from_env())
    except OSError as exc:
        print(f"cannot bind {args.addr}: {exc}", file=sys.stderr)
        return EXIT_SERVE
    print(f"serving on http://{args.addr} (store: {args.store})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return EXIT_OK


_COMMANDS = {
    "genbench": cmd_genbench,
    "run": cmd_run,
    "eval": cmd_eval,
    "report": cmd_report,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    # Two-pass parse: the config file must load before flag defaults are
    # computed, since file values sit under env values in the layering.
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=os.environ.get("EDITLOOP_CONFIG"))
    known, rest = pre.parse_known_args(argv)
    if known.config:
        try:
            _load_config_file(known.config)
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            print(f"cannot read config file {known.config}: {exc}",
                  file=sys.stderr)
            return EXIT_USAGE
    args = build_parser().parse_args(rest)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
