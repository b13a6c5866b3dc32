"""Importance-sampling bookkeeping for annealing runs.

With ``RunConfig(sample=True)`` the engine logs, for every generated
state, the density of the step law that produced it and the acceptance
probability it faced. Because each generated point is a draw from a known
density, the log can be reweighted into estimates of expectations over the
parameter box (uniform measure), not just used to locate the minimum.

The estimator here is self-normalized: ``sum(w f) / sum(w)`` with
``w = 1 / g``. Acceptance probabilities are stored but not used by it.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .distributions import asa_density_1d
from .schedules import T_FLOOR


@dataclass(frozen=True)
class SampleRecord:
    generated_index: int
    point: tuple[float, ...]
    cost: float
    g: float
    p_accept: float
    accepted: bool


def generation_density(cand, problem, config) -> float:
    """Density, in parameter units, of the step law that produced ``cand``.

    The untruncated law is used. Range redraws rescale it by a factor that
    depends only on the point the step started from, and that factor
    cancels in self-normalized weights.
    """
    idx = cand.moved
    if idx.size == 0:
        return 1.0
    y = cand.y[idx]
    T = np.maximum(cand.temps[idx], T_FLOOR)
    w = problem.width[idx]
    if config.algorithm == "asa":
        dens = asa_density_1d(y, T)
    elif config.algorithm == "ba":
        dens = np.exp(-0.5 * y * y / T) / np.sqrt(2.0 * np.pi * T)
    elif config.fa_mode == "product":
        dens = T / (np.pi * (y * y + T * T))
    else:
        d = idx.size
        Tm = float(T.mean())
        log_c = math.lgamma(0.5 * (d + 1)) - 0.5 * (d + 1) * math.log(math.pi)
        r2 = float(np.dot(y, y))
        log_g = log_c + math.log(Tm) - 0.5 * (d + 1) * math.log(r2 + Tm * Tm)
        return math.exp(log_g) / float(np.prod(w))
    return float(np.prod(dens / w))


def record_sample(state, cand, p_accept: float, accepted: bool, problem, config) -> SampleRecord:
    """Snapshot what the engine just used for ``cand``; appended to ``state.samples``."""
    rec = SampleRecord(
        generated_index=state.generated,
        point=tuple(float(v) for v in cand.point),
        cost=float(cand.cost),
        g=generation_density(cand, problem, config),
        p_accept=float(p_accept),
        accepted=bool(accepted),
    )
    state.samples.append(rec)
    return rec


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    ess: float


def estimate_expectation(records: Sequence[SampleRecord], observable: Callable[[np.ndarray], float]) -> Estimate:
    """Self-normalized importance estimate of ``E[observable]`` under the uniform measure.

    The standard error uses the effective sample size
    ``(sum w)^2 / sum w^2`` together with the weighted variance.
    """
    if len(records) < 2:
        raise ValueError("need at least two sample records")
    g = np.array([r.g for r in records], dtype=float)
    if np.any(~np.isfinite(g)) or np.any(g <= 0):
        raise ValueError("generation densities must be finite and positive")
    # shift in log space so tiny densities do not overflow 1/g
    logw = -np.log(g)
    w = np.exp(logw - logw.max())
    if not np.any(w > 0):
        raise ValueError("all importance weights are zero")
    f = np.array([float(observable(np.asarray(r.point))) for r in records])
    W = w.sum()
    # centred on an observed value so a constant observable comes back exactly
    mean = float(f[0] + np.dot(w, f - f[0]) / W)
    ess = float(W * W / np.dot(w, w))
    var = float(np.dot(w, (f - mean) ** 2) / W)
    return Estimate(mean, math.sqrt(var / ess), ess)


CSV_HEAD = ("generated_index",)
CSV_TAIL = ("cost", "g", "p_accept", "accepted")


def write_samples_csv(records: Iterable[SampleRecord], sink=None, names: Sequence[str] | None = None) -> str:
    """Write the sample log as CSV; returns the text. ``sink`` may be a path or file object."""
    records = list(records)
    dim = len(records[0].point) if records else len(names or ())
    names = list(names) if names is not None else [f"x{i}" for i in range(dim)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*CSV_HEAD, *names, *CSV_TAIL])
    for r in records:
        writer.writerow(
            [r.generated_index, *(f"{v:.17g}" for v in r.point), f"{r.cost:.17g}", f"{r.g:.17g}",
             f"{r.p_accept:.17g}", int(r.accepted)]
        )
    text = buf.getvalue()
    if sink is not None:
        if hasattr(sink, "write"):
            sink.write(text)
        else:
            with open(sink, "w", newline="") as fh:
                fh.write(text)
    return text


def read_samples_csv(source) -> list[SampleRecord]:
    """Inverse of :func:`write_samples_csv`."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    dim = len(header) - len(CSV_HEAD) - len(CSV_TAIL)
    out = []
    for row in body:
        out.append(
            SampleRecord(
                int(row[0]),
                tuple(float(v) for v in row[1 : 1 + dim]),
                float(row[1 + dim]),
                float(row[2 + dim]),
                float(row[3 + dim]),
                bool(int(row[4 + dim])),
            )
        )
    return out
