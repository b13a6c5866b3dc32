"""Benchmark landscapes with known global minima."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .core import ParameterSpec, ProblemSpec


def _rows(x, dim):
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != dim:
        raise ValueError(f"expected last axis of length {dim}, got shape {arr.shape}")
    return np.ascontiguousarray(arr.reshape(-1, dim)), arr.shape[:-1]


def corana(x):
    """Corana's piecewise-quadratic function in four dimensions.

    Accepts one point (shape ``(4,)``) or a batch (``(..., 4)``). Zero on the
    plateau ``max|x_i| < 0.05``; every multiple of 0.2 carries a shallow
    local-minimum pocket of half-width 0.05.
    """
    rows, lead = _rows(x, 4)
    out = _kernels.corana(rows)
    return float(out[0]) if lead == () else out.reshape(lead)


def shubert(x):
    """Two-factor Shubert product; 18 global minima at about -186.7309 on [-10, 10]^2."""
    rows, lead = _rows(x, 2)
    out = _kernels.shubert(rows)
    return float(out[0]) if lead == () else out.reshape(lead)


def sphere(x):
    arr = np.asarray(x, dtype=float)
    out = np.sum(arr * arr, axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BenchmarkProblem:
    name: str
    problem: ProblemSpec
    global_minimum: float
    minimizer_count: int | None
    tolerance: float

    @property
    def target(self) -> float:
        return self.global_minimum


SHUBERT_MINIMUM = -186.7309


def _box(prefix, dim, lo, hi, initial=None):
    init = [0.5 * (lo + hi)] * dim if initial is None else list(initial)
    return tuple(ParameterSpec(f"{prefix}{i}", lo, hi, "real", init[i]) for i in range(dim))


def catalog(name: str, dim: int | None = None) -> BenchmarkProblem:
    """Look up a benchmark by name (``corana``, ``shubert`` or ``sphere``).

    ``dim`` only applies to ``sphere`` (default 2).
    """
    if name == "corana":
        # start away from the origin plateau so a default run has work to do
        problem = ProblemSpec(_box("x", 4, -10000.0, 10000.0, [1000.0] * 4), corana)
        return BenchmarkProblem("corana", problem, 0.0, None, 1e-6)
    if name == "shubert":
        problem = ProblemSpec(_box("x", 2, -10.0, 10.0, [0.0, 0.0]), shubert)
        return BenchmarkProblem("shubert", problem, SHUBERT_MINIMUM, 18, 1e-3)
    if name == "sphere":
        d = 2 if dim is None else int(dim)
        if d < 1:
            raise ValueError("sphere dimension must be >= 1")
        problem = ProblemSpec(_box("x", d, -5.0, 5.0, [1.0] * d), sphere)
        return BenchmarkProblem("sphere", problem, 0.0, 1, 1e-6)
    raise KeyError(f"unknown problem {name!r}; available: {', '.join(PROBLEMS)}")


PROBLEMS = ("corana", "shubert", "sphere")


def with_initial(bp: BenchmarkProblem, initial) -> BenchmarkProblem:
    params = tuple(replace(p, initial=float(v)) for p, v in zip(bp.problem.parameters, initial))
    return replace(bp, problem=replace(bp.problem, parameters=params))
