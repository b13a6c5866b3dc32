"""``asaopt`` command line.

Exit codes: 0 success, 1 target not attained (bench: no seed succeeded),
2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import schedules
from ._accel import BACKEND
from .core import CostFunctionError, RunConfig, run
from .harness import (
    ConfigError,
    MetaConfig,
    ParsedConfig,
    bench,
    config_dict,
    dumps,
    emit_report,
    parse_config,
    parse_seeds,
    self_optimize,
)
from .sampling import estimate_expectation, write_samples_csv
from .testfns import PROBLEMS

EXIT_OK, EXIT_MISSED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML configuration file")
    p.add_argument("--problem", help=f"catalog problem ({', '.join(PROBLEMS)})")
    p.add_argument("--dim", type=int, help="dimension (sphere only)")
    p.add_argument("--algorithm", choices=("asa", "ba", "fa"))
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="seed range N..M (inclusive) or comma list")
    p.add_argument("--max-generated", type=int)
    p.add_argument("--quench", type=float, help="parameter quenching factor Q")
    p.add_argument("--target", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", type=Path, help="write the main output here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--trace", type=Path, help="write the best-update trace CSV here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asaopt", description="Adaptive simulated annealing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="single optimization run"))
    _common(sub.add_parser("bench", help="multi-seed generated-states-to-target statistics"))
    sp = sub.add_parser("sample", help="run with sample logging and print importance estimates")
    _common(sp)
    sp.add_argument("--freeze", action="store_true", help="hold every temperature at its initial value")
    so = sub.add_parser("selfopt", help="tune schedule options with an outer annealing run")
    _common(so)
    so.add_argument("--tune", help="comma list of fields to tune (m,n,Q,reanneal_every)")
    so.add_argument("--meta-budget", type=int)
    so.add_argument("--inner-seeds")
    so.add_argument("--inner-max-generated", type=int)
    dg = sub.add_parser("diag", help="schedule and partial-sum diagnostics")
    _common(dg)
    dg.add_argument("--m", type=float, default=schedules.DEFAULT_M)
    dg.add_argument("--n", type=float, default=schedules.DEFAULT_N)
    return parser


def _resolve(args) -> ParsedConfig:
    if args.config is not None:
        try:
            parsed = parse_config(args.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    else:
        if args.problem is None and args.command != "diag":
            raise ConfigError("give --problem or --config")
        parsed = ParsedConfig(problem=args.problem or "sphere", config=RunConfig())
    if args.problem is not None:
        if args.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {args.problem!r}; available: {', '.join(PROBLEMS)}")
        parsed.problem = args.problem
    if args.dim is not None:
        parsed.dim = args.dim
    changes = {}
    if args.algorithm:
        changes["algorithm"] = args.algorithm
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.max_generated is not None:
        changes["max_generated"] = args.max_generated
    if args.quench is not None:
        changes["Q"] = args.quench
    try:
        parsed.config = replace(parsed.config, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.seeds:
        parsed.seeds = parse_seeds(args.seeds)
    if args.target is not None:
        parsed.target = args.target
    if args.tol is not None:
        parsed.tol = args.tol
    if args.workers is not None:
        parsed.workers = args.workers
    return parsed


def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _threshold(parsed: ParsedConfig, bp) -> float | None:
    if parsed.config.target_cost is not None:
        return parsed.config.target_cost
    if parsed.target is None:
        return None
    return parsed.target + (parsed.tol if parsed.tol is not None else bp.tolerance)


def cmd_run(args, parsed: ParsedConfig) -> int:
    bp = parsed.benchmark()
    cfg = replace(parsed.config, target_cost=_threshold(parsed, bp), curvature=True)
    report = run(bp.problem, cfg)
    if args.trace:
        emit_report(report, "csv", args.trace)
    _write(emit_report(report, args.format, config=cfg), args.out)
    return EXIT_MISSED if cfg.target_cost is not None and not report.reached_target else EXIT_OK


def cmd_bench(args, parsed: ParsedConfig) -> int:
    bp = parsed.benchmark()
    seeds = parsed.seeds or list(range(100))
    summary = bench(bp, parsed.config, seeds, parsed.target, parsed.tol, workers=parsed.workers)
    _write(emit_report(summary, args.format), args.out)
    agg = summary.aggregates()
    line = f"{summary.problem}/{summary.algorithm}: {summary.successes}/{len(seeds)} reached target"
    if agg:
        line += f"; generated-to-target mean {agg['mean']:.1f} std {agg['std']:.1f} min {agg['min']:.0f} max {agg['max']:.0f}"
    print(line, file=sys.stderr)
    return EXIT_OK if summary.successes else EXIT_MISSED


def cmd_sample(args, parsed: ParsedConfig) -> int:
    bp = parsed.benchmark()
    cfg = parsed.config
    changes = {"sample": True}
    if args.quench is None and cfg.Q == 1.0:
        changes["Q"] = 0.5  # slower than the sampling bound: better coverage for integrals
    if args.freeze:
        changes["freeze_temperatures"] = True
    cfg = replace(cfg, **changes)
    report = run(bp.problem, cfg)
    names = [p.name for p in bp.problem.parameters]
    if args.format == "csv":
        _write(write_samples_csv(report.samples, names=names), args.out)
    else:
        doc = {"kind": "sample", "records": len(report.samples), "estimates": {}}
        if len(report.samples) >= 2:
            for i, name in enumerate(names):
                est = estimate_expectation(report.samples, lambda x, i=i: x[i])
                doc["estimates"][f"E[{name}]"] = {"value": est.value, "stderr": est.stderr, "ess": est.ess}
            est = estimate_expectation(report.samples, bp.problem.cost)
            doc["estimates"]["E[cost]"] = {"value": est.value, "stderr": est.stderr, "ess": est.ess}
        doc["config"] = config_dict(cfg)
        _write(dumps(doc) + "\n", args.out)
    if args.trace:
        emit_report(report, "csv", args.trace)
    return EXIT_OK


def cmd_selfopt(args, parsed: ParsedConfig) -> int:
    bp = parsed.benchmark()
    meta = parsed.meta or MetaConfig()
    changes = {}
    if args.tune:
        changes["tune"] = tuple(t.strip() for t in args.tune.split(",") if t.strip())
        defaults = {"m": (1.0, 20.0), "n": (0.0, 10.0), "Q": (0.5, 8.0), "reanneal_every": (10.0, 500.0)}
        changes["ranges"] = {**defaults, **meta.ranges}
    if args.meta_budget is not None:
        changes["budget"] = args.meta_budget
    if args.inner_seeds:
        changes["inner_seeds"] = tuple(parse_seeds(args.inner_seeds))
    if args.inner_max_generated is not None:
        changes["inner_max_generated"] = args.inner_max_generated
    if changes:
        meta = MetaConfig(**{**meta.__dict__, **changes})
    result = self_optimize(meta, bp, parsed.config)
    doc = {
        "kind": "selfopt",
        "tuned": {k: getattr(result.config, k) for k in meta.tune},
        "default": {k: getattr(result.default_config, k) for k in meta.tune},
        "tuned_cost": result.tuned_cost,
        "default_cost": result.default_cost,
        "objective": meta.objective,
        "meta_evaluations": [{"params": p, "cost": c} for p, c in result.trace],
        "config": config_dict(result.config),
    }
    _write(dumps(doc) + "\n", args.out)
    return EXIT_OK


def cmd_diag(args, parsed: ParsedConfig) -> int:
    Q = args.quench if args.quench is not None else 1.0
    bp = parsed.benchmark() if args.config or args.problem else None
    D = bp.problem.D_eff if bp is not None else (args.dim or 1)
    p = schedules.ScheduleParams(1.0, args.m, args.n, Q, D)
    ks = [0, 1, 10, 100, 1_000, 10_000, 100_000]
    horizons = [1_000, 10_000, 100_000, 1_000_000]
    rows = [(k, schedules.asa_temperature(k, p)) for k in ks]
    sums = {fam: [schedules.proof_sum_diagnostic(fam, h, Q=max(Q, 1.0) if fam == "asa-quenched" else 1.0)
                  for h in horizons] for fam in schedules.PROOF_FAMILIES}
    if args.format == "csv":
        lines = ["k,T"] + [f"{k},{t:.17g}" for k, t in rows]
        lines += ["", "family," + ",".join(str(h) for h in horizons)]
        lines += [fam + "," + ",".join(f"{v:.17g}" for v in vals) for fam, vals in sums.items()]
        _write("\n".join(lines) + "\n", args.out)
    else:
        doc = {
            "kind": "diag",
            "backend": BACKEND,
            "schedule": {"m": p.m, "n": p.n, "Q": p.Q, "D_eff": D, "c": p.c,
                         "temperatures": [{"k": k, "T": t} for k, t in rows]},
            "proof_sums": {"horizons": horizons, **sums},
        }
        _write(dumps(doc) + "\n", args.out)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "sample": cmd_sample, "selfopt": cmd_selfopt, "diag": cmd_diag}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        parsed = _resolve(args)
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, parsed)
    except (ConfigError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CostFunctionError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
