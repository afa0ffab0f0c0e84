"""Command-line entry point: ``fampack <command> ...``.

Exit codes: 0 ok, 1 verification failure, 2 usage or input error,
3 budget or copy cap exhausted.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__
from ._random import fresh_seed
from .copies import DEFAULT_CAP, CapExceeded, parse_copy_dump
from .exact import DEFAULT_BUDGET, OPTIMAL, exact_packing, verify_integer_packing
from .experiment import ExperimentSpec, gap_experiment, rows_to_csv
from .graph import GraphFormatError, parse_family, read_graph
from .lp import EXACT, FLOAT, solve_fractional_packing
from .pipeline import PipelineConfig, PipelineError, run_pipeline

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def manifest(command: str, inputs: list[str], config: str = "", seed=None, timing: bool = False) -> dict:
    """Provenance block embedded in every result; wall-clock only with ``--timing``."""
    out = {
        "command": command,
        "inputs": [{"path": p, "sha256": _digest(Path(p).read_bytes())} for p in inputs],
        "config_sha256": _digest(config.encode()),
        "seed": seed,
        "version": __version__,
    }
    if timing:
        out["wall_clock"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    return out


def _manifest_comment(m: dict) -> str:
    return "# manifest " + json.dumps(m, sort_keys=True) + "\n"


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load(args):
    try:
        g = read_graph(args.graph)
    except OSError as exc:
        raise UsageError("input", f"cannot read graph: {exc}") from exc
    except GraphFormatError as exc:
        raise UsageError("parse", str(exc)) from exc
    try:
        family = parse_family(args.family)
    except (ValueError, OSError) as exc:
        raise UsageError("family", str(exc)) from exc
    return g, family


def cmd_nu_star(args) -> int:
    g, family = _load(args)
    mode = FLOAT if args.float else EXACT
    res = solve_fractional_packing(g, family, mode, args.cap)
    print(f"nu_star = {res.value}")
    if args.json:
        obj = json.loads(res.to_json())
        obj["manifest"] = manifest("nu-star", [args.graph], json.dumps({"family": args.family, "mode": mode}), None, args.timing)
        _write(args.json, json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_nu_exact(args) -> int:
    g, family = _load(args)
    res = exact_packing(g, family, args.budget, args.cap)
    print(f"nu = {res.size} ({res.status}, {res.nodes} nodes, upper bound {res.upper_bound})")
    if args.out:
        cfg = json.dumps({"family": args.family, "budget": args.budget})
        head = _manifest_comment(manifest("nu-exact", [args.graph], cfg, None, args.timing))
        _write(args.out, head + f"# status {res.status}\n" + res.packing.dump())
    return EXIT_OK if res.status == OPTIMAL else EXIT_BUDGET


def cmd_pipeline(args) -> int:
    g, family = _load(args)
    seed = args.seed
    if seed is None:
        seed = fresh_seed()
        print(f"seed = {seed}", file=sys.stderr)
    config_text = ""
    if args.config:
        config_text = Path(args.config).read_text()
        try:
            cfg = PipelineConfig.from_json(config_text)
        except (ValueError, TypeError) as exc:
            raise UsageError("config", str(exc)) from exc
    else:
        cfg = PipelineConfig()
    inputs = [args.graph] + ([args.config] if args.config else [])
    man = manifest("pipeline", inputs, json.dumps(asdict(cfg), sort_keys=True), seed, args.timing)
    packing, report = run_pipeline(g, family, cfg, seed)
    if report.status != "ok":
        print(report.message, file=sys.stderr)
    print(f"packing size = {packing.size} (pipeline {report.pipeline_size}, greedy top-up {report.greedy_extra})")
    if args.out:
        _write(args.out, _manifest_comment(man) + packing.dump())
    if args.report:
        obj = report.to_json_obj()
        obj["manifest"] = man
        _write(args.report, json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    g, family = _load(args)
    try:
        copies = parse_copy_dump(Path(args.packing).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError("packing", str(exc)) from exc
    verdict = verify_integer_packing(g, family, copies)
    if verdict:
        print(f"ok: {len(copies)} edge-disjoint copies")
        return EXIT_OK
    print(f"invalid: {verdict.message}")
    return EXIT_VERIFY


def cmd_experiment(args) -> int:
    text = Path(args.spec).read_text()
    try:
        obj = json.loads(text)
        if "seeds" not in obj:
            obj["seeds"] = [fresh_seed()]
            print(f"seed = {obj['seeds'][0]}", file=sys.stderr)
        if args.workers:
            obj["workers"] = args.workers
        spec = ExperimentSpec(**obj)
    except (ValueError, TypeError) as exc:
        raise UsageError("spec", str(exc)) from exc
    rows = gap_experiment(spec, timing=args.timing)
    man = manifest("experiment", [args.spec], text, spec.seeds, args.timing)
    _write(args.out, _manifest_comment(man) + rows_to_csv(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fampack", description="Graph packing toolkit.")
    ap.add_argument("--version", action="version", version=f"fampack {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def graph_args(p):
        p.add_argument("graph", help="edge-list file: 'n m' then one 'u v' per line")
        p.add_argument("--family", "-F", default="K3", help="comma list, e.g. 'K3,C5,path:p.g'")
        p.add_argument("--timing", action="store_true", help="record wall-clock time in outputs")

    p = sub.add_parser("nu-star", help="fractional packing number")
    graph_args(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="rational simplex (default)")
    g.add_argument("--float", action="store_true", help="floating-point LP")
    p.add_argument("--json", metavar="PATH", help="write the LP result as JSON ('-' for stdout)")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.set_defaults(func=cmd_nu_star)

    p = sub.add_parser("nu-exact", help="integer packing number by branch-and-bound")
    graph_args(p)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--out", metavar="PATH", help="write the packing as copy lines")
    p.set_defaults(func=cmd_nu_exact)

    p = sub.add_parser("pipeline", help="randomized regularity + nibble packing")
    graph_args(p)
    p.add_argument("--config", metavar="PATH", help="PipelineConfig JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", metavar="PATH", help="write the packing as copy lines")
    p.add_argument("--report", metavar="PATH", help="write the JSON report ('-' for stdout)")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("verify", help="check a packing file")
    graph_args(p)
    p.add_argument("packing", help="copy lines 'pattern_id: v1 ... vk'")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", help="integrality-gap experiment to CSV")
    p.add_argument("spec", help="experiment JSON")
    p.add_argument("--out", metavar="PATH", help="CSV path (default stdout)")
    p.add_argument("--workers", type=int)
    p.add_argument("--timing", action="store_true", help="fill runtime_ms and wall-clock")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapExceeded as exc:
        print(f"error [cap]: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except PipelineError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error [input]: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
