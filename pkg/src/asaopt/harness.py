"""Config files, multi-seed benchmarking, self-tuning and report output."""
from __future__ import annotations

import csv
import importlib
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Any, Sequence

import numpy as np

from .core import ParameterSpec, ProblemSpec, RunConfig, RunReport, TRACE_COLUMNS, round_half_to_zero, run
from .distributions import AcceptanceForm
from .testfns import PROBLEMS, BenchmarkProblem, catalog

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    """The configuration document is malformed or inconsistent."""


# ---------------------------------------------------------------------------
# Configuration documents
#
# A TOML file. Every table and key is listed in _SCHEMA; anything else is an
# error so misspelt options fail loudly.

_SCHEMA: dict[str, Any] = {
    "problem": str,
    "dim": int,
    "cost": str,
    "feasible": str,
    "algorithm": str,
    "seed": int,
    "seeds": (str, list),
    "target": float,
    "tol": float,
    "workers": int,
    "parameters": list,
    "schedule": {"m": (float, list), "n": (float, list), "Q": (float, list)},
    "acceptance": {"m": float, "n": float, "Q": float, "form": str, "q": float},
    "reanneal": {"enabled": bool, "every": int, "on": str, "fd_step": float},
    "generation": {"mode": str, "fa_mode": str, "batch_size": int, "workers": int, "max_redraws": int,
                   "ba_k0": float},
    "termination": {"max_generated": int, "target_cost": float, "stall_eps": float, "stall_repeats": int,
                    "max_infeasible": int},
    "sampling": {"enabled": bool, "freeze_temperatures": bool},
    "output": {"trace": bool, "curvature": bool},
    "meta": {"tune": list, "ranges": dict, "objective": str, "budget": int, "inner_seeds": (str, list),
             "inner_max_generated": int, "seed": int},
}
_PARAM_KEYS = {"name", "lower", "upper", "kind", "initial"}
TUNABLE = ("m", "n", "Q", "reanneal_every")


def _check_type(path, value, expected):
    types = expected if isinstance(expected, tuple) else (expected,)
    if float in types and isinstance(value, int) and not isinstance(value, bool):
        return
    if not isinstance(value, types) or (bool not in types and isinstance(value, bool)):
        names = "/".join(t.__name__ for t in types)
        raise ConfigError(f"{path}: expected {names}, got {type(value).__name__}")


def _validate(doc: dict, schema: dict, prefix: str = "") -> None:
    for key, value in doc.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"unknown key {path!r}")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: expected a table")
            if key == "meta" and "meta" in value:
                raise ConfigError("nested meta sections are not supported (one meta-level only)")
            _validate(value, expected, path + ".")
        else:
            _check_type(path, value, expected)


def parse_seeds(spec) -> list[int]:
    """``"0..99"`` (inclusive), ``"3"``, ``"1,2,5"`` or a list of ints."""
    if isinstance(spec, (list, tuple)):
        seeds = [int(s) for s in spec]
    else:
        text = str(spec).strip()
        if ".." in text:
            lo, hi = text.split("..", 1)
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = [int(s) for s in text.split(",") if s.strip()]
    if not seeds:
        raise ConfigError(f"empty seed list {spec!r}")
    if any(s < 0 for s in seeds):
        raise ConfigError("seeds must be non-negative")
    return seeds


def _import_callable(path: str):
    mod_name, _, attr = path.partition(":")
    if not attr:
        raise ConfigError(f"callable {path!r} must look like 'package.module:function'")
    try:
        return getattr(importlib.import_module(mod_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"cannot import {path!r}: {exc}") from exc


@dataclass(frozen=True)
class MetaConfig:
    """One level of self-tuning: which RunConfig fields to search, over what ranges."""

    tune: tuple[str, ...] = ("m", "n")
    ranges: dict = field(default_factory=lambda: {"m": (1.0, 20.0), "n": (0.0, 10.0)})
    objective: str = "generated-to-target"
    budget: int = 50
    inner_seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    inner_max_generated: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.objective not in ("generated-to-target", "best-at-budget"):
            raise ConfigError(f"unknown meta objective {self.objective!r}")
        for name in self.tune:
            if name not in TUNABLE:
                raise ConfigError(f"cannot tune {name!r}; tunable fields are {TUNABLE}")
            if name not in self.ranges:
                raise ConfigError(f"meta range missing for {name!r}")
            lo, hi = self.ranges[name]
            if not lo <= hi:
                raise ConfigError(f"meta range for {name!r} has lower > upper")
        if self.budget < 0:
            raise ConfigError("meta budget must be >= 0")
        if self.inner_max_generated < 1:
            raise ConfigError("inner budget must be >= 1")
        if not self.inner_seeds:
            raise ConfigError("need at least one inner seed")


@dataclass
class ParsedConfig:
    problem: str | ProblemSpec
    config: RunConfig
    dim: int | None = None
    seeds: list[int] | None = None
    target: float | None = None
    tol: float | None = None
    workers: int = 1
    meta: MetaConfig | None = None

    def benchmark(self) -> BenchmarkProblem:
        if isinstance(self.problem, str):
            return catalog(self.problem, self.dim)
        return BenchmarkProblem("custom", self.problem, self.target if self.target is not None else -math.inf,
                                None, self.tol if self.tol is not None else 0.0)


def _parameters(items: list) -> tuple[ParameterSpec, ...]:
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ConfigError(f"parameters[{i}] must be a table")
        extra = set(item) - _PARAM_KEYS
        if extra:
            raise ConfigError(f"parameters[{i}]: unknown keys {sorted(extra)}")
        for req in ("lower", "upper"):
            if req not in item:
                raise ConfigError(f"parameters[{i}]: missing {req!r}")
        name = item.get("name", f"x{i}")
        lo, hi = float(item["lower"]), float(item["upper"])
        if lo > hi:
            raise ConfigError(f"parameter {name!r}: lower {lo} > upper {hi}")
        try:
            out.append(ParameterSpec(name, lo, hi, item.get("kind", "real"), item.get("initial")))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return tuple(out)


def _scalar_or_list(v):
    return tuple(float(x) for x in v) if isinstance(v, list) else float(v)


def parse_config(text: str) -> ParsedConfig:
    """Parse a TOML configuration document into a problem and a :class:`RunConfig`.

    Documented defaults fill every missing option; unknown keys, bad ranges,
    unknown algorithms and unknown problems raise :class:`ConfigError`.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from exc
    _validate(doc, _SCHEMA)

    if "parameters" in doc:
        if "cost" not in doc:
            raise ConfigError("a custom parameter list needs a 'cost' callable")
        params = _parameters(doc["parameters"])
        feasible = _import_callable(doc["feasible"]) if "feasible" in doc else None
        problem: str | ProblemSpec = ProblemSpec(params, _import_callable(doc["cost"]), feasible)
    elif "problem" in doc:
        problem = doc["problem"]
        if problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {problem!r}; available: {', '.join(PROBLEMS)}")
    else:
        raise ConfigError("missing required field: 'problem' or 'parameters' + 'cost'")

    sch, acc = doc.get("schedule", {}), doc.get("acceptance", {})
    rea, gen = doc.get("reanneal", {}), doc.get("generation", {})
    term, smp, out = doc.get("termination", {}), doc.get("sampling", {}), doc.get("output", {})
    kwargs: dict[str, Any] = {}
    if "algorithm" in doc:
        kwargs["algorithm"] = doc["algorithm"]
    if "seed" in doc:
        kwargs["seed"] = doc["seed"]
    for key in ("m", "n", "Q"):
        if key in sch:
            kwargs[key] = _scalar_or_list(sch[key])
        if key in acc:
            kwargs[f"acceptance_{key}"] = float(acc[key])
    if "form" in acc or "q" in acc:
        kwargs["acceptance"] = AcceptanceForm(acc.get("form", "metropolis"), float(acc.get("q", 1.5)))
    renames = {
        ("enabled", "reanneal"): rea, ("every", "reanneal_every"): rea, ("on", "reanneal_on"): rea,
        ("fd_step", "fd_step"): rea, ("mode", "generation"): gen, ("fa_mode", "fa_mode"): gen,
        ("batch_size", "batch_size"): gen, ("workers", "workers"): gen, ("max_redraws", "max_redraws"): gen,
        ("ba_k0", "ba_k0"): gen, ("enabled", "sample"): smp, ("freeze_temperatures", "freeze_temperatures"): smp,
        ("trace", "trace"): out, ("curvature", "curvature"): out,
    }
    for (src, dst), table in renames.items():
        if src in table:
            kwargs[dst] = table[src]
    for key in ("max_generated", "target_cost", "stall_eps", "max_infeasible"):
        if key in term:
            kwargs[key] = term[key]
    if "stall_repeats" in term:
        kwargs["stall_repeats"] = term["stall_repeats"] or None
    try:
        config = RunConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    meta = None
    if "meta" in doc:
        m = doc["meta"]
        mkw: dict[str, Any] = {}
        if "tune" in m:
            mkw["tune"] = tuple(m["tune"])
        if "ranges" in m:
            mkw["ranges"] = {k: tuple(float(x) for x in v) for k, v in m["ranges"].items()}
        for key in ("objective", "budget", "inner_max_generated", "seed"):
            if key in m:
                mkw[key] = m[key]
        if "inner_seeds" in m:
            mkw["inner_seeds"] = tuple(parse_seeds(m["inner_seeds"]))
        meta = MetaConfig(**mkw)

    return ParsedConfig(
        problem=problem,
        config=config,
        dim=doc.get("dim"),
        seeds=parse_seeds(doc["seeds"]) if "seeds" in doc else None,
        target=doc.get("target"),
        tol=doc.get("tol"),
        workers=doc.get("workers", 1),
        meta=meta,
    )


# ---------------------------------------------------------------------------
# Benchmarking


def random_initial(problem: ProblemSpec, seed: int, max_tries: int = 10_000) -> np.ndarray:
    """Uniform random start inside the box (integers rounded), redrawn until feasible."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
    lo, hi = problem.lower, problem.upper
    for _ in range(max_tries):
        x = rng.uniform(lo, hi)
        for i in np.flatnonzero(problem.is_int):
            x[i] = min(max(round_half_to_zero(x[i]), math.ceil(lo[i])), math.floor(hi[i]))
        if problem.feasible is None or problem.feasible(x):
            return x
    raise RuntimeError("could not draw a feasible random initial point")


def with_start(problem: ProblemSpec, x) -> ProblemSpec:
    params = tuple(replace(p, initial=float(v)) for p, v in zip(problem.parameters, x))
    return replace(problem, parameters=params)


@dataclass(frozen=True)
class SeedResult:
    seed: int
    success: bool
    generated_to_target: int | None
    best_cost: float
    generated: int
    wall_time: float = field(compare=False)


@dataclass(frozen=True)
class BenchSummary:
    """Outcome of one benchmark: per-seed results and aggregates over successful seeds."""

    problem: str
    algorithm: str
    target: float
    tolerance: float
    results: tuple[SeedResult, ...]
    config: RunConfig = field(compare=False, repr=False)

    @property
    def seeds(self) -> list[int]:
        return [r.seed for r in self.results]

    @property
    def counts(self) -> np.ndarray:
        # sorted so aggregates do not depend on seed order
        return np.sort(np.array([r.generated_to_target for r in self.results if r.success], dtype=float))

    @property
    def successes(self) -> int:
        return int(sum(r.success for r in self.results))

    @property
    def success_rate(self) -> float:
        return self.successes / len(self.results)

    def aggregates(self) -> dict[str, float] | None:
        c = self.counts
        if c.size == 0:
            return None
        return {
            "mean": float(c.mean()),
            "std": float(c.std()),
            "min": float(c.min()),
            "max": float(c.max()),
            "median": float(np.median(c)),
        }


def _bench_one(bp: BenchmarkProblem, config: RunConfig, seed: int, threshold: float) -> SeedResult:
    start = random_initial(bp.problem, seed)
    cfg = replace(config, seed=int(seed), target_cost=threshold)
    t0 = time.perf_counter()
    rep = run(with_start(bp.problem, start), cfg)
    return SeedResult(
        seed=int(seed),
        success=rep.reached_target,
        generated_to_target=rep.generated_at_target,
        best_cost=rep.best_cost,
        generated=rep.generated,
        wall_time=time.perf_counter() - t0,
    )


def bench(
    problem: BenchmarkProblem,
    config: RunConfig,
    seeds: Sequence[int],
    target: float | None = None,
    tolerance: float | None = None,
    workers: int = 1,
    stall: bool = False,
) -> BenchSummary:
    """Run every seed from its own uniform random start and count generated
    states until the best cost first reaches ``target + tolerance``.

    Runs go to the full ``max_generated`` budget: the stall rule is switched
    off unless ``stall=True``, since it would cut off the very count being
    measured.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    target = problem.global_minimum if target is None else float(target)
    tolerance = problem.tolerance if tolerance is None else float(tolerance)
    threshold = target + tolerance
    cfg = replace(config, trace=False, curvature=False)
    if not stall:
        cfg = replace(cfg, stall_repeats=None)
    if workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda s: _bench_one(problem, cfg, s, threshold), seeds))
    else:
        results = [_bench_one(problem, cfg, s, threshold) for s in seeds]
    return BenchSummary(problem.name, config.algorithm, target, tolerance, tuple(results), config)


# ---------------------------------------------------------------------------
# Self-optimization


@dataclass
class SelfOptResult:
    config: RunConfig
    default_config: RunConfig
    tuned_cost: float
    default_cost: float
    trace: list[tuple[dict, float]]
    meta: MetaConfig


def _apply(config: RunConfig, names: Sequence[str], values) -> RunConfig:
    changes = {}
    for name, v in zip(names, values):
        changes[name] = int(v) if name == "reanneal_every" else float(v)
    return replace(config, **changes)


def meta_cost(problem: BenchmarkProblem, config: RunConfig, meta: MetaConfig) -> float:
    """Inner objective averaged over ``meta.inner_seeds``.

    ``generated-to-target`` scores a seed that misses the target at the inner
    budget; ``best-at-budget`` is the mean best cost. Any inner failure is +inf.
    """
    cfg = replace(config, max_generated=meta.inner_max_generated, stall_repeats=None, trace=False)
    threshold = problem.global_minimum + problem.tolerance
    total = 0.0
    for s in meta.inner_seeds:
        try:
            start = random_initial(problem.problem, s)
            rep = run(with_start(problem.problem, start), replace(cfg, seed=int(s), target_cost=threshold))
        except Exception:  # noqa: BLE001 - the outer search only needs a score
            return math.inf
        if meta.objective == "generated-to-target":
            total += rep.generated_at_target if rep.reached_target else meta.inner_max_generated
        else:
            total += rep.best_cost
    return total / len(meta.inner_seeds)


def self_optimize(meta: MetaConfig, problem: BenchmarkProblem, base: RunConfig = RunConfig()) -> SelfOptResult:
    """Tune selected RunConfig fields with an outer ASA run whose cost is :func:`meta_cost`.

    The outer search starts from ``base`` and tracks its best point, so the
    tuned configuration never scores worse than ``base`` on the tuning seeds.
    """
    default_cost = meta_cost(problem, base, meta)
    trace: list[tuple[dict, float]] = [({k: getattr(base, k) for k in meta.tune}, default_cost)]
    if meta.budget == 0 or not meta.tune:
        return SelfOptResult(base, base, default_cost, default_cost, trace, meta)

    params = []
    for name in meta.tune:
        lo, hi = meta.ranges[name]
        current = getattr(base, name)
        if not np.isscalar(current):
            raise ConfigError(f"cannot tune per-parameter {name!r}; give a scalar base value")
        init = min(max(float(current), lo), hi)
        kind = "integer" if name == "reanneal_every" else "real"
        if kind == "integer":
            lo, hi = max(lo, 1.0), max(hi, 1.0)
            init = float(round_half_to_zero(init))
        params.append(ParameterSpec(name, lo, hi, kind, init))
    # identical meta points (common once integers round) are scored once
    cache: dict[tuple, float] = {}
    init = tuple(p.initial for p in params)
    if all(v == getattr(base, n) for v, n in zip(init, meta.tune)):
        cache[init] = default_cost

    def cost(x):
        key = tuple(float(v) for v in x)
        if key not in cache:
            cache[key] = meta_cost(problem, _apply(base, meta.tune, key), meta)
            trace.append((dict(zip(meta.tune, key)), cache[key]))
        value = cache[key]
        return value if math.isfinite(value) else 1e300

    outer = ProblemSpec(tuple(params), cost)
    rep = run(outer, RunConfig(seed=meta.seed, max_generated=meta.budget, stall_repeats=None, trace=False,
                               reanneal_every=10))
    tuned = _apply(base, meta.tune, rep.best_point)
    tuned_cost = rep.best_cost
    if not tuned_cost < default_cost:
        tuned, tuned_cost = base, default_cost
    return SelfOptResult(tuned, base, tuned_cost, default_cost, trace, meta)


# ---------------------------------------------------------------------------
# Reports


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return f"{x:.17g}"


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Canonical JSON: insertion-ordered keys, floats at 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def config_dict(config: RunConfig) -> dict:
    out = {}
    for f in fields(config):
        v = getattr(config, f.name)
        if isinstance(v, AcceptanceForm):
            v = {"variant": v.variant, "q": v.q}
        elif isinstance(v, tuple):
            v = list(v)
        out[f.name] = v
    return out


def report_dict(report: RunReport, config: RunConfig | None = None) -> dict:
    d: dict[str, Any] = {
        "kind": "run",
        "algorithm": report.algorithm,
        "seed": report.seed,
        "best_cost": report.best_cost,
        "best_point": list(report.best_point),
        "generated": report.generated,
        "accepted": report.accepted,
        "rejected": report.rejected,
        "infeasible": report.infeasible,
        "best_updates": report.best_updates,
        "reanneals": report.reanneals,
        "probe_evaluations": report.probe_evaluations,
        "generated_at_target": report.generated_at_target,
        "stop_reason": report.stop_reason,
        "final_temperatures": list(report.final_temperatures),
        "final_acceptance_temperature": report.final_acceptance_temperature,
        "flags": list(report.flags),
        "trace": {"columns": list(TRACE_COLUMNS), "rows": [list(r) for r in report.trace]},
    }
    if report.curvature is not None:
        c = report.curvature
        d["curvature"] = {
            "hessian": c.hessian.tolist(),
            "std_devs": [None if not ok else float(s) for s, ok in zip(c.std_devs, c.defined)],
        }
    if config is not None:
        d["config"] = config_dict(config)
    return d


def summary_dict(summary: BenchSummary) -> dict:
    return {
        "kind": "bench",
        "problem": summary.problem,
        "algorithm": summary.algorithm,
        "target": summary.target,
        "tolerance": summary.tolerance,
        "seeds": summary.seeds,
        "successes": summary.successes,
        "success_rate": summary.success_rate,
        "aggregates": summary.aggregates(),
        "per_seed": [
            {
                "seed": r.seed,
                "success": r.success,
                "generated_to_target": r.generated_to_target,
                "best_cost": r.best_cost,
                "generated": r.generated,
                "wall_time": r.wall_time,
            }
            for r in summary.results
        ],
        "config": config_dict(summary.config),
    }


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (_fmt_float(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def emit_report(obj, fmt: str = "json", sink=None, config: RunConfig | None = None) -> str:
    """Serialise a run report, bench summary or already-built dict.

    ``json`` gives the full structured document; ``csv`` gives the
    best-update trace for a run, or the per-seed table for a bench. When
    ``sink`` is a path or file object the text is also written there.
    """
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(obj, RunReport):
        text = dumps(report_dict(obj, config)) + "\n" if fmt == "json" else _csv(TRACE_COLUMNS, obj.trace)
    elif isinstance(obj, BenchSummary):
        if fmt == "json":
            text = dumps(summary_dict(obj)) + "\n"
        else:
            text = _csv(
                ("seed", "success", "generated_to_target", "best_cost", "generated", "wall_time"),
                [(r.seed, int(r.success), r.generated_to_target, r.best_cost, r.generated, r.wall_time)
                 for r in obj.results],
            )
    elif isinstance(obj, dict):
        if fmt != "json":
            raise ValueError("plain documents can only be emitted as json")
        text = dumps(obj) + "\n"
    else:
        raise TypeError(f"cannot emit {type(obj).__name__}")
    if sink is not None:
        if hasattr(sink, "write"):
            sink.write(text)
        else:
            with open(sink, "w", newline="") as fh:
                fh.write(text)
    return text
