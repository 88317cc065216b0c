"""Command-line entry point.

Exit codes: 0 success, 1 domain or validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import reports
from .calais import default_scenario
from .errors import ScenarioValidationError, ScreenflowError
from .experiments import EVENTS, default_workers, feasibility_verdict, run_experiment, sweep
from .scenario import dump_scenario, fingerprint, load_scenario, scenario_to_dict
from .tree import DEFAULT_NODE_CAP, expected_outcome, export_outline, tree_from_scenario

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


def _load(args):
    if args.scenario is None:
        return default_scenario()
    return load_scenario(args.scenario)


def _seeded(args, s):
    return s if args.seed is None else replace(s, master_seed=args.seed)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write-test"
    probe.write_text("")
    probe.unlink()
    return out


def _flags(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}


def _emit(args, s, out: Path, files: dict[str, str]):
    files["manifest.json"] = reports.manifest(args.command, args.scenario, fingerprint(s), s.master_seed, _flags(args))
    reports.write_all(out, files)


def cmd_run(args) -> int:
    s = _seeded(args, _load(args))
    out = _out(args)
    exp = run_experiment(s, args.replications, workers=args.workers)
    _emit(args, s, out, {"replications.csv": reports.replications_csv(exp), "summary.csv": reports.summary_csv(exp)})
    m = exp.stats["undetected_clandestines"]
    print(f"{exp.replications} replications; mean undetected clandestines {m.mean:.4g}; wrote {out}")
    return EXIT_OK


def cmd_tree(args) -> int:
    s = _load(args)
    out = _out(args)
    t = tree_from_scenario(s, args.node_cap)
    e = expected_outcome(t, s.cost_model)
    _emit(args, s, out, {"tree.txt": export_outline(t), "expectation.csv": reports.expectation_csv(s, e)})
    print(f"{len(t)} nodes; per-lorry undetected probability {e.p_undetected:.6g}; wrote {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.steps < 1:
        raise ScreenflowError("--steps must be >= 1")
    if getattr(args, "from") > args.to:
        raise ScreenflowError("--from must not exceed --to")
    s = _seeded(args, _load(args))
    out = _out(args)
    lo, hi = getattr(args, "from"), args.to
    values = [lo] if args.steps == 1 else np.linspace(lo, hi, args.steps).tolist()
    res = sweep(s, args.param, values, args.replications, alpha=args.alpha, crn=args.crn, workers=args.workers)
    _emit(args, s, out, {"sweep.csv": reports.sweep_csv(res)})
    verdicts = ", ".join(r.verdict for r in res.rows)
    print(f"{len(res.rows)} sweep values: {verdicts}; wrote {out}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    s = _load(args)
    out = _out(args)
    rep = feasibility_verdict(s, args.metric, args.epsilon, args.confidence, args.budget, args.node_cap)
    _emit(args, s, out, {"feasibility.json": rep.to_json(), "feasibility.txt": rep.to_text()})
    print(rep.to_text(), end="")
    return EXIT_OK


def cmd_validate(args) -> int:
    s = _load(args)
    print(f"valid scenario {fingerprint(s)[:16]} ({len(s.stages)} stages)")
    return EXIT_OK


def cmd_default_scenario(args) -> int:
    s = default_scenario()
    if args.out in (None, "-"):
        print(json.dumps(scenario_to_dict(s), indent=2))
    else:
        dump_scenario(s, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="screenflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--scenario", metavar="PATH", help="scenario JSON (default: built-in Calais scenario)")
        if out:
            sp.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")

    def parallel(sp):
        sp.add_argument("--replications", "-R", type=int, default=10, metavar="N")
        sp.add_argument("--seed", type=int, metavar="U64", help="override the scenario master seed")
        sp.add_argument("--workers", type=int, default=default_workers(), metavar="N",
                        help="worker processes (env SCREENFLOW_WORKERS; default: CPU count)")

    sp = sub.add_parser("run", help="run replications; write replications.csv and summary.csv")
    common(sp)
    parallel(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("tree", help="compile and evaluate the decision tree")
    common(sp)
    sp.add_argument("--node-cap", type=int, default=DEFAULT_NODE_CAP, metavar="N")
    sp.set_defaults(func=cmd_tree)

    sp = sub.add_parser("sweep", help="sweep a parameter; compare simulation with the tree")
    common(sp)
    parallel(sp)
    sp.add_argument("--param", required=True, metavar="PATH", help="e.g. stages.british.check_probability")
    sp.add_argument("--from", type=float, required=True, metavar="F")
    sp.add_argument("--to", type=float, required=True, metavar="F")
    sp.add_argument("--steps", type=int, default=5, metavar="N")
    sp.add_argument("--alpha", type=float, default=0.01, metavar="F")
    sp.add_argument("--crn", action="store_true", help="reuse the master seed at every value")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("bounds", help="decide between tree, simulation, or too rare")
    common(sp)
    sp.add_argument("--epsilon", type=float, default=0.1, metavar="F")
    sp.add_argument("--confidence", type=float, default=0.95, metavar="F")
    sp.add_argument("--budget", type=int, default=10_000, metavar="N")
    sp.add_argument("--metric", choices=EVENTS, default="carrier")
    sp.add_argument("--node-cap", type=int, default=DEFAULT_NODE_CAP, metavar="N")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("validate", help="validate a scenario file")
    common(sp, out=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("default-scenario", help="print or save the built-in Calais scenario")
    sp.add_argument("--out", metavar="FILE", help="write here instead of stdout")
    sp.set_defaults(func=cmd_default_scenario)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ScreenflowError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: I/O: {exc}", file=sys.stderr)
        return EXIT_IO
