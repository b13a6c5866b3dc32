"""Sensitivity-driven rescaling of parameter and acceptance temperatures.

Periodically the engine measures how strongly the cost responds to each
parameter at the best point found so far. Parameters the cost barely
notices are reheated by the ratio ``s_max / s_i`` so their search ranges
stretch, and their annealing indices are re-derived from the schedule
inverse so cooling resumes from the new temperature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .schedules import T_FLOOR, ScheduleParams, index_for_temperature

TINY_SENSITIVITY = 1e-12
ACCEPT_FLOOR = 1e-18


@dataclass
class SensitivityVector:
    s: np.ndarray
    flags: list[str] = field(default_factory=list)

    @property
    def s_max(self) -> float:
        return float(self.s.max()) if self.s.size else 0.0


def _probe_step(x, lo, hi, h):
    """Forward step of size ``h`` if it fits, else backward; shrink if neither does."""
    if x + h <= hi:
        return h
    if x - h >= lo:
        return -h
    room_up, room_down = hi - x, x - lo
    return room_up if room_up >= room_down else -room_down


def sensitivities(problem, point, fd_step: float = 1e-5, base_cost: float | None = None) -> SensitivityVector:
    """One-sided finite-difference magnitudes ``|dL/da_i|`` at ``point``.

    ``fd_step`` is relative to each parameter's range width (at least 1 for
    integer parameters). Fixed parameters get 0. A probe whose cost fails or
    is non-finite yields 0 for that parameter and a flag.
    """
    x0 = np.asarray(point, dtype=float)
    if base_cost is None:
        base_cost = float(problem.cost(x0))
    lo, hi, width = problem.lower, problem.upper, problem.width
    s = np.zeros(x0.size)
    flags: list[str] = []
    for i in np.flatnonzero(problem.active):
        h = fd_step * width[i]
        if problem.is_int[i]:
            h = max(1.0, round(h))
        h = _probe_step(x0[i], lo[i], hi[i], h)
        if h == 0.0:
            flags.append(f"sensitivity[{i}]: no room to probe")
            continue
        probe = x0.copy()
        probe[i] += h
        if problem.feasible is not None and not problem.feasible(probe):
            probe[i] = x0[i] - h
            h = -h
            if not (lo[i] <= probe[i] <= hi[i]) or not problem.feasible(probe):
                flags.append(f"sensitivity[{i}]: probe infeasible")
                continue
        try:
            val = float(problem.cost(probe))
        except Exception as exc:  # noqa: BLE001 - any user failure just zeroes this entry
            flags.append(f"sensitivity[{i}]: cost failed ({exc!r})")
            continue
        if not math.isfinite(val):
            flags.append(f"sensitivity[{i}]: non-finite cost")
            continue
        s[i] = abs((val - base_cost) / h)
    return SensitivityVector(s, flags)


def reanneal_parameters(state, sens: SensitivityVector, params: list[ScheduleParams] | None = None):
    """Reheat insensitive parameters by ``s_max / s_i`` and re-derive their indices.

    Mutates and returns ``state``. Temperatures never exceed their initial
    value; entries with ``s_i`` below ``1e-12 s_max`` are left alone.
    """
    params = state.param_schedules if params is None else params
    s_max = sens.s_max
    if not s_max > 0.0:
        state.flags.append("reanneal: all sensitivities zero, parameters untouched")
        return state
    for i, s_i in enumerate(sens.s):
        if s_i <= TINY_SENSITIVITY * s_max:
            continue
        p = params[i]
        T_new = min(p.T0, state.temps[i] * (s_max / s_i))
        T_new = max(T_new, T_FLOOR)
        state.temps[i] = T_new
        state.k[i] = index_for_temperature(T_new, p)
    return state


def reanneal_acceptance(state, best_cost: float, last_cost: float, current_cost: float):
    """Reset the acceptance scale from the magnitudes of recent costs.

    The initial acceptance temperature becomes the larger of the current and
    best cost magnitudes; the working temperature becomes the smallest of
    the current, best and last magnitudes, and its index follows from the
    schedule inverse.
    """
    Ta0 = max(abs(current_cost), abs(best_cost), ACCEPT_FLOOR)
    Ta = min(abs(current_cost), abs(best_cost), abs(last_cost))
    if not Ta > 0.0:
        Ta = ACCEPT_FLOOR
        state.flags.append("reanneal: zero cost scale, acceptance temperature floored")
    Ta = min(Ta, Ta0)
    state.acc_schedule = state.acc_schedule.with_T0(Ta0)
    state.Ta0 = Ta0
    state.Ta = Ta
    state.ka = index_for_temperature(Ta, state.acc_schedule)
    return state
