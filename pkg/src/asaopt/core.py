"""The annealing engine.

One run owns one :class:`AnnealerState`. Each step draws a candidate around
the current point, rejects it outright if it violates the feasibility
predicate, otherwise evaluates the cost and applies the acceptance test.
Parameter temperatures cool with the number of *generated* states, the
acceptance temperature with the number of *accepted* states. Every
``reanneal_every`` events the temperatures are rescaled from cost
sensitivities at the best point (ASA only).

The same loop drives the Boltzmann (``ba``) and fast-annealing (``fa``)
baselines; only the step law and schedule differ.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np

from . import _kernels
from .distributions import METROPOLIS, AcceptanceForm, acceptance_probability
from .reanneal import ACCEPT_FLOOR, reanneal_acceptance, reanneal_parameters, sensitivities
from .sampling import record_sample
from .schedules import (
    DEFAULT_M,
    DEFAULT_N,
    T_FLOOR,
    ScheduleParams,
    asa_temperature,
    ba_temperature,
    fa_temperature,
)

ALGORITHMS = ("asa", "ba", "fa")
BLOCK = 16  # steps drawn per coordinate before falling back to more blocks


class CostFunctionError(RuntimeError):
    """The user cost function raised; carries the run context."""


# ---------------------------------------------------------------------------
# Problem description


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    lower: float
    upper: float
    kind: Literal["real", "integer"] = "real"
    initial: float | None = None

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"parameter {self.name!r}: bounds must be finite")
        if lo > hi:
            raise ValueError(f"parameter {self.name!r}: lower {lo} > upper {hi}")
        if self.kind not in ("real", "integer"):
            raise ValueError(f"parameter {self.name!r}: kind must be 'real' or 'integer'")
        if self.kind == "integer" and math.ceil(lo) > math.floor(hi):
            raise ValueError(f"parameter {self.name!r}: no integer in [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        init = self.initial
        if init is None:
            init = 0.5 * (lo + hi)
            if self.kind == "integer":
                init = min(max(round_half_to_zero(init), math.ceil(lo)), math.floor(hi))
        init = float(init)
        if not lo <= init <= hi:
            raise ValueError(f"parameter {self.name!r}: initial {init} outside [{lo}, {hi}]")
        if self.kind == "integer" and init != math.floor(init):
            raise ValueError(f"parameter {self.name!r}: integer parameter has initial {init}")
        object.__setattr__(self, "initial", init)

    @property
    def fixed(self) -> bool:
        if self.kind == "integer":
            return math.ceil(self.lower) == math.floor(self.upper)
        return self.lower == self.upper


def round_half_to_zero(x: float) -> float:
    a = abs(x)
    return math.copysign(math.ceil(a - 0.5), x) if a > 0 else 0.0


@dataclass(frozen=True)
class ProblemSpec:
    parameters: tuple[ParameterSpec, ...]
    cost: Callable[[np.ndarray], float]
    feasible: Callable[[np.ndarray], bool] | None = None

    def __post_init__(self):
        params = tuple(self.parameters)
        if not params:
            raise ValueError("a problem needs at least one parameter")
        object.__setattr__(self, "parameters", params)
        object.__setattr__(self, "lower", np.array([p.lower for p in params]))
        object.__setattr__(self, "upper", np.array([p.upper for p in params]))
        object.__setattr__(self, "is_int", np.array([p.kind == "integer" for p in params]))
        object.__setattr__(self, "active", np.array([not p.fixed for p in params]))
        object.__setattr__(self, "initial", np.array([p.initial for p in params]))
        object.__setattr__(self, "width", self.upper - self.lower)

    @property
    def dim(self) -> int:
        return len(self.parameters)

    @property
    def D_eff(self) -> int:
        return max(1, int(self.active.sum()))


# ---------------------------------------------------------------------------
# Configuration


def _per_param(value, dim, name):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (dim,))
    if arr.shape != (dim,):
        raise ValueError(f"{name} must be a scalar or have one entry per parameter")
    return arr


@dataclass(frozen=True)
class RunConfig:
    """Everything that controls one run besides the problem itself.

    ``m``, ``n`` and ``Q`` may be scalars or one value per parameter; the
    ``acceptance_*`` triple applies to the acceptance schedule. With
    ``Q > 1`` the schedule quenches. ``reanneal_on`` picks whether the
    reanneal cadence counts accepted or generated states.
    """

    algorithm: Literal["asa", "ba", "fa"] = "asa"
    m: float | Sequence[float] = DEFAULT_M
    n: float | Sequence[float] = DEFAULT_N
    Q: float | Sequence[float] = 1.0
    acceptance_m: float = DEFAULT_M
    acceptance_n: float = DEFAULT_N
    acceptance_Q: float = 1.0
    acceptance: AcceptanceForm = METROPOLIS
    generation: Literal["all", "sequential"] = "all"
    reanneal: bool = True
    reanneal_every: int = 100
    reanneal_on: Literal["accepted", "generated"] = "accepted"
    fd_step: float = 1e-5
    max_generated: int = 100_000
    target_cost: float | None = None
    stall_eps: float = 1e-10
    stall_repeats: int | None = 4
    max_infeasible: int | None = None
    max_redraws: int = 1000
    seed: int = 0
    batch_size: int = 1
    workers: int = 1
    fa_mode: Literal["product", "isotropic"] = "product"
    ba_k0: float = math.e
    freeze_temperatures: bool = False
    sample: bool = False
    trace: bool = True
    curvature: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.generation not in ("all", "sequential"):
            raise ValueError(f"unknown generation mode {self.generation!r}")
        if self.reanneal_on not in ("accepted", "generated"):
            raise ValueError(f"reanneal_on must be 'accepted' or 'generated'")
        if self.fa_mode not in ("product", "isotropic"):
            raise ValueError(f"unknown fa_mode {self.fa_mode!r}")
        if self.reanneal_every < 1:
            raise ValueError("reanneal_every must be >= 1")
        if self.max_generated < 1:
            raise ValueError("max_generated must be >= 1")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be > 0")
        if self.batch_size < 1 or self.workers < 1:
            raise ValueError("batch_size and workers must be >= 1")
        if self.max_redraws < 1:
            raise ValueError("max_redraws must be >= 1")
        if self.ba_k0 < 2:
            raise ValueError("ba_k0 must be >= 2")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def param_schedules(self, problem: ProblemSpec) -> list[ScheduleParams]:
        d = problem.dim
        m = _per_param(self.m, d, "m")
        n = _per_param(self.n, d, "n")
        Q = _per_param(self.Q, d, "Q")
        return [ScheduleParams(1.0, float(m[i]), float(n[i]), float(Q[i]), problem.D_eff) for i in range(d)]

    def acceptance_schedule(self, problem: ProblemSpec, T0: float) -> ScheduleParams:
        return ScheduleParams(T0, self.acceptance_m, self.acceptance_n, self.acceptance_Q, problem.D_eff)

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# State and results


@dataclass
class AnnealerState:
    current: np.ndarray
    current_cost: float
    best: np.ndarray
    best_cost: float
    last_cost: float
    temps: np.ndarray
    k: np.ndarray
    Ta: float
    Ta0: float
    ka: float
    param_schedules: list[ScheduleParams]
    acc_schedule: ScheduleParams
    rng: np.random.Generator
    generated: int = 1
    accepted: int = 0
    infeasible: int = 0
    best_updates: int = 0
    reanneals: int = 0
    probe_evaluations: int = 0
    clamped_draws: int = 0
    cursor: int = 0
    generated_at_target: int | None = None
    stall_count: int = 0
    stall_reference: float = math.inf
    flags: list[str] = field(default_factory=list)
    trace: list[tuple] = field(default_factory=list)
    samples: list = field(default_factory=list)

    @property
    def rejected(self) -> int:
        return self.generated - 1 - self.accepted


@dataclass
class Candidate:
    point: np.ndarray
    y: np.ndarray
    temps: np.ndarray
    moved: np.ndarray
    cost: float = math.nan
    feasible: bool = True
    clamped: bool = False


@dataclass
class CurvatureReport:
    """Central-difference Hessian at a point.

    ``std_devs[i]`` is ``(d2L/da_i^2)^(-1/2)`` where the diagonal is positive
    and NaN (with ``defined[i] == False``) elsewhere.
    """

    hessian: np.ndarray
    std_devs: np.ndarray
    defined: np.ndarray

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.hessian).copy()

    def __eq__(self, other):
        if not isinstance(other, CurvatureReport):
            return NotImplemented
        return (
            np.array_equal(self.hessian, other.hessian, equal_nan=True)
            and np.array_equal(self.std_devs, other.std_devs, equal_nan=True)
            and np.array_equal(self.defined, other.defined)
        )


TRACE_COLUMNS = ("generated", "accepted", "best_cost", "current_cost", "T_accept", "max_param_T")


@dataclass
class RunReport:
    best_point: tuple[float, ...]
    best_cost: float
    generated: int
    accepted: int
    rejected: int
    infeasible: int
    best_updates: int
    reanneals: int
    probe_evaluations: int
    generated_at_target: int | None
    stop_reason: str
    final_temperatures: tuple[float, ...]
    final_acceptance_temperature: float
    seed: int
    algorithm: str
    flags: tuple[str, ...]
    trace: tuple[tuple, ...]
    samples: tuple = ()
    curvature: CurvatureReport | None = None

    @property
    def reached_target(self) -> bool:
        return self.generated_at_target is not None


# ---------------------------------------------------------------------------
# Temperatures


def _param_temperature(config: RunConfig, k: float, p: ScheduleParams) -> float:
    if config.algorithm == "asa":
        return asa_temperature(k, p)
    if config.algorithm == "ba":
        return ba_temperature(k + config.ba_k0, p.T0, config.ba_k0)
    return fa_temperature(k + 1.0, p.T0)


def _update_param_temperatures(state: AnnealerState, config: RunConfig) -> None:
    for i, p in enumerate(state.param_schedules):
        state.temps[i] = _param_temperature(config, state.k[i], p)


def _update_acceptance_temperature(state: AnnealerState, config: RunConfig) -> None:
    state.Ta = max(_param_temperature(config, state.ka, state.acc_schedule), T_FLOOR)


def _eval_cost(problem: ProblemSpec, x: np.ndarray, generated: int) -> float:
    try:
        return float(problem.cost(x))
    except Exception as exc:
        raise CostFunctionError(
            f"cost function failed at generated state {generated}, point {x.tolist()}: {exc!r}"
        ) from exc


# ---------------------------------------------------------------------------
# Operations


def init_run(problem: ProblemSpec, config: RunConfig) -> AnnealerState:
    """Evaluate the initial point and set every temperature to its start value."""
    x0 = problem.initial.copy()
    if problem.feasible is not None and not problem.feasible(x0):
        raise ValueError(f"initial point {x0.tolist()} is infeasible")
    cost0 = _eval_cost(problem, x0, 1)
    if not math.isfinite(cost0):
        raise ValueError(f"initial cost is not finite ({cost0})")
    Ta0 = max(abs(cost0), ACCEPT_FLOOR)
    state = AnnealerState(
        current=x0,
        current_cost=cost0,
        best=x0.copy(),
        best_cost=cost0,
        last_cost=cost0,
        temps=np.ones(problem.dim),
        k=np.zeros(problem.dim),
        Ta=Ta0,
        Ta0=Ta0,
        ka=0.0,
        param_schedules=config.param_schedules(problem),
        acc_schedule=config.acceptance_schedule(problem, Ta0),
        rng=np.random.default_rng(int(config.seed)),
    )
    _update_param_temperatures(state, config)
    _update_acceptance_temperature(state, config)
    if config.trace:
        state.trace.append(_trace_row(state))
    if config.target_cost is not None and cost0 <= config.target_cost:
        state.generated_at_target = 1
    return state


def _trace_row(state: AnnealerState) -> tuple:
    return (
        state.generated,
        state.accepted,
        state.best_cost,
        state.current_cost,
        state.Ta,
        float(state.temps.max()),
    )


def _raw_steps(rng, config: RunConfig, temps: np.ndarray, rows: int) -> np.ndarray:
    """A block of relative steps, ``BLOCK`` per coordinate."""
    if config.algorithm == "asa":
        u = rng.random((rows, BLOCK))
        t = np.repeat(temps, BLOCK)
        return _kernels.asa_draw(u.ravel(), t).reshape(rows, BLOCK)
    if config.algorithm == "ba":
        return np.sqrt(temps)[:, None] * rng.standard_normal((rows, BLOCK))
    u = rng.random((rows, BLOCK))
    return temps[:, None] * np.tan(np.pi * (u - 0.5))


def _isotropic_fa(state: AnnealerState, problem: ProblemSpec, config: RunConfig, idx: np.ndarray):
    """Whole-vector redraw for the isotropic Cauchy law (shared scale: the mean temperature)."""
    rng = state.rng
    T = float(state.temps[idx].mean())
    cur, lo, hi, w = state.current[idx], problem.lower[idx], problem.upper[idx], problem.width[idx]
    is_int = problem.is_int[idx]
    y = np.zeros(idx.size)
    for _ in range(config.max_redraws):
        z = rng.standard_normal(idx.size)
        y = T * z / abs(rng.standard_normal())
        x = cur + y * w
        x = np.where(is_int, [round_half_to_zero(v) for v in x], x)
        if np.all((x >= lo) & (x <= hi)):
            return x, y, False
    return np.clip(x, lo, hi), y, True


def generate_candidate(
    state: AnnealerState, problem: ProblemSpec, config: RunConfig, evaluate: bool = True
) -> Candidate:
    """Propose a new point around ``state.current``.

    Out-of-range coordinates are redrawn one at a time, up to
    ``config.max_redraws`` tries, after which the coordinate is clamped to
    the nearest bound and the event is flagged. Infeasible proposals come
    back with ``feasible=False``, bump the infeasible counter and are never
    costed.
    """
    active = np.flatnonzero(problem.active)
    if config.generation == "sequential" and active.size:
        idx = active[state.cursor % active.size : state.cursor % active.size + 1]
        state.cursor += 1
    else:
        idx = active
    point = state.current.copy()
    y = np.zeros(problem.dim)
    clamped = False
    if idx.size and config.algorithm == "fa" and config.fa_mode == "isotropic":
        x, yi, clamped = _isotropic_fa(state, problem, config, idx)
        point[idx] = x
        y[idx] = yi
    elif idx.size:
        cur = state.current[idx]
        lo, hi, w = problem.lower[idx], problem.upper[idx], problem.width[idx]
        is_int = problem.is_int[idx]
        temps = state.temps[idx]
        steps = _raw_steps(state.rng, config, temps, idx.size)
        prop, used, ok = _kernels.first_in_range(cur, lo, hi, w, is_int, steps)
        yi = steps[np.arange(idx.size), used - 1]
        tries = BLOCK
        while not ok.all():
            pending = np.flatnonzero(~ok)
            if tries >= config.max_redraws:
                for j in pending:
                    x = cur[j] + yi[j] * w[j]
                    if is_int[j]:
                        x = round_half_to_zero(x)
                    prop[j] = min(max(x, lo[j]), hi[j])
                    if is_int[j] and prop[j] != math.floor(prop[j]):
                        prop[j] = math.ceil(lo[j]) if x < lo[j] else math.floor(hi[j])
                clamped = True
                break
            more = _raw_steps(state.rng, config, temps[pending], pending.size)
            p2, u2, ok2 = _kernels.first_in_range(
                cur[pending], lo[pending], hi[pending], w[pending], is_int[pending], more
            )
            prop[pending] = p2
            yi[pending] = more[np.arange(pending.size), u2 - 1]
            ok[pending] = ok2
            tries += BLOCK
        point[idx] = prop
        y[idx] = yi
    if clamped:
        state.clamped_draws += 1
        state.flags.append(f"redraw cap reached at generated state {state.generated + 1}; clamped to bounds")
    cand = Candidate(point=point, y=y, temps=state.temps.copy(), moved=idx, clamped=clamped)
    if problem.feasible is not None and not problem.feasible(point):
        cand.feasible = False
        state.infeasible += 1
        return cand
    if evaluate:
        cand.cost = _eval_cost(problem, point, state.generated + 1)
    return cand


def accept_step(state: AnnealerState, cand: Candidate, config: RunConfig, problem: ProblemSpec | None = None) -> bool:
    """Apply the acceptance test to an evaluated, feasible candidate.

    Returns ``True`` if the candidate became the current state. Counters,
    best point and temperatures are updated in place either way.
    """
    u = state.rng.random()
    if not math.isfinite(cand.cost):
        p, accepted = 0.0, False
        state.flags.append(f"non-finite cost at generated state {state.generated + 1}; rejected")
    else:
        p = acceptance_probability(cand.cost - state.current_cost, state.Ta, config.acceptance)
        accepted = u < p
    state.generated += 1
    if math.isfinite(cand.cost):
        state.last_cost = cand.cost
    if config.sample and problem is not None:
        record_sample(state, cand, p, accepted, problem, config)
    if accepted:
        state.current = cand.point
        state.current_cost = cand.cost
        state.accepted += 1
        if not config.freeze_temperatures:
            state.ka += 1.0
            _update_acceptance_temperature(state, config)
    if not config.freeze_temperatures:
        state.k += 1.0
        _update_param_temperatures(state, config)
    if cand.cost < state.best_cost:
        state.best = cand.point.copy()
        state.best_cost = cand.cost
        state.best_updates += 1
        if config.trace:
            state.trace.append(_trace_row(state))
    if (
        state.generated_at_target is None
        and config.target_cost is not None
        and state.best_cost <= config.target_cost
    ):
        state.generated_at_target = state.generated
    return accepted


def reanneal_step(state: AnnealerState, problem: ProblemSpec, config: RunConfig) -> None:
    """Rescale parameter and acceptance temperatures from sensitivities at the best point."""
    sens = sensitivities(problem, state.best, config.fd_step, base_cost=state.best_cost)
    state.probe_evaluations += int(problem.active.sum())
    state.flags.extend(sens.flags)
    reanneal_parameters(state, sens)
    reanneal_acceptance(state, state.best_cost, state.last_cost, state.current_cost)
    state.reanneals += 1


def _cycle_due(state: AnnealerState, config: RunConfig, accepted: bool) -> bool:
    if config.reanneal_on == "accepted":
        return accepted and state.accepted % config.reanneal_every == 0
    return state.generated % config.reanneal_every == 0


def _after_step(state: AnnealerState, problem: ProblemSpec, config: RunConfig, accepted: bool) -> str | None:
    if state.generated_at_target is not None:
        return "target"
    if _cycle_due(state, config, accepted):
        if config.reanneal and config.algorithm == "asa" and not config.freeze_temperatures:
            reanneal_step(state, problem, config)
        if config.stall_repeats is not None:
            ref = state.stall_reference
            if math.isfinite(ref) and abs(state.best_cost - ref) <= config.stall_eps * abs(ref):
                state.stall_count += 1
            else:
                state.stall_count = 0
            state.stall_reference = state.best_cost
            if state.stall_count >= config.stall_repeats:
                return "stall"
    if state.generated >= config.max_generated:
        return "max_generated"
    return None


def curvature_diagnostics(problem: ProblemSpec, point, fd_step: float = 1e-5) -> CurvatureReport:
    """Central-difference second derivatives of the cost at ``point``.

    Steps are ``fd_step`` times each range width and are shrunk so every
    probe stays inside the bounds. Fixed parameters get zero rows.
    """
    x0 = np.asarray(point, dtype=float)
    d = x0.size
    h = np.zeros(d)
    for i in np.flatnonzero(problem.active):
        hi = fd_step * problem.width[i]
        hi = min(hi, problem.upper[i] - x0[i], x0[i] - problem.lower[i]) if hi > 0 else 0.0
        if hi <= 0.0:
            hi = fd_step * problem.width[i]  # sits on a bound: fall back, probe leaves range
        h[i] = hi
    f = problem.cost

    def at(*moves):
        x = x0.copy()
        for i, s in moves:
            x[i] += s * h[i]
        return float(f(x))

    f0 = float(f(x0))
    H = np.zeros((d, d))
    act = np.flatnonzero(h > 0)
    for a, i in enumerate(act):
        H[i, i] = (at((i, 1)) - 2.0 * f0 + at((i, -1))) / (h[i] * h[i])
        for j in act[a + 1 :]:
            mixed = (at((i, 1), (j, 1)) - at((i, 1), (j, -1)) - at((i, -1), (j, 1)) + at((i, -1), (j, -1))) / (
                4.0 * h[i] * h[j]
            )
            H[i, j] = H[j, i] = mixed
    diag = np.diag(H)
    defined = diag > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        std = np.where(defined, 1.0 / np.sqrt(np.where(defined, diag, 1.0)), np.nan)
    return CurvatureReport(H, std, defined)


def _make_report(state: AnnealerState, problem: ProblemSpec, config: RunConfig, reason: str) -> RunReport:
    curv = curvature_diagnostics(problem, state.best, config.fd_step) if config.curvature else None
    return RunReport(
        best_point=tuple(float(v) for v in state.best),
        best_cost=float(state.best_cost),
        generated=state.generated,
        accepted=state.accepted,
        rejected=state.rejected,
        infeasible=state.infeasible,
        best_updates=state.best_updates,
        reanneals=state.reanneals,
        probe_evaluations=state.probe_evaluations,
        generated_at_target=state.generated_at_target,
        stop_reason=reason,
        final_temperatures=tuple(float(t) for t in state.temps),
        final_acceptance_temperature=float(state.Ta),
        seed=int(config.seed),
        algorithm=config.algorithm,
        flags=tuple(state.flags),
        trace=tuple(state.trace),
        samples=tuple(state.samples),
        curvature=curv,
    )


def run(problem: ProblemSpec, config: RunConfig = RunConfig()) -> RunReport:
    """Anneal ``problem`` until the budget, the target or the stall rule stops it.

    With ``batch_size > 1`` candidates are generated in groups from frozen
    temperatures, their costs evaluated on ``workers`` threads, and the
    acceptance test then applied in generation order. The result depends on
    the seed and batch size but never on the worker count.
    """
    state = init_run(problem, config)
    if state.generated_at_target is not None:
        return _make_report(state, problem, config, "target")
    if state.generated >= config.max_generated:
        return _make_report(state, problem, config, "max_generated")
    infeasible_cap = config.max_infeasible if config.max_infeasible is not None else 100 * config.max_generated
    pool = ThreadPoolExecutor(config.workers) if config.batch_size > 1 and config.workers > 1 else None
    reason = None
    try:
        while reason is None:
            want = min(config.batch_size, config.max_generated - state.generated)
            batch: list[Candidate] = []
            while len(batch) < want:
                cand = generate_candidate(state, problem, config, evaluate=config.batch_size == 1)
                if cand.feasible:
                    batch.append(cand)
                elif state.infeasible >= infeasible_cap:
                    reason = "infeasible_limit"
                    break
            if config.batch_size > 1 and batch:
                base = state.generated
                points = [c.point for c in batch]
                if pool is None:
                    costs = [_eval_cost(problem, x, base + i + 1) for i, x in enumerate(points)]
                else:
                    costs = list(pool.map(lambda ix: _eval_cost(problem, ix[1], base + ix[0] + 1), enumerate(points)))
                for c, v in zip(batch, costs):
                    c.cost = v
            for cand in batch:
                accepted = accept_step(state, cand, config, problem)
                stop = _after_step(state, problem, config, accepted)
                if stop is not None:
                    reason = stop
                    break
            if reason is None and not batch:
                reason = "infeasible_limit"
    finally:
        if pool is not None:
            pool.shutdown()
    return _make_report(state, problem, config, reason)
