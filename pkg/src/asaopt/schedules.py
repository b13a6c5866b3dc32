"""Temperature schedules and their inverses.

The ASA schedule is ``T(k) = T0 exp(-c k^(Q/D))`` with
``c = m exp(-n Q / D)``. ``m`` sets how many e-folds the temperature has
dropped by the time ``k`` reaches ``exp(n D / Q)``; ``Q`` is the quenching
factor (``Q > 1`` cools faster than the sampling argument allows).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import _kernels
from .distributions import DomainError

T_FLOOR = 1e-300
DEFAULT_M = -math.log(1e-5)
DEFAULT_N = math.log(100.0)


@dataclass(frozen=True)
class ScheduleParams:
    T0: float = 1.0
    m: float = DEFAULT_M
    n: float = DEFAULT_N
    Q: float = 1.0
    D_eff: int = 1

    def __post_init__(self):
        if not self.T0 > 0:
            raise ValueError(f"T0 must be > 0, got {self.T0}")
        if not self.m > 0:
            raise ValueError(f"m must be > 0, got {self.m}")
        if not self.n >= 0:
            raise ValueError(f"n must be >= 0, got {self.n}")
        if not self.Q > 0:
            raise ValueError(f"Q must be > 0, got {self.Q}")
        if int(self.D_eff) != self.D_eff or self.D_eff < 1:
            raise ValueError(f"D_eff must be a positive integer, got {self.D_eff}")

    @property
    def c(self) -> float:
        return schedule_scale(self.m, self.n, self.Q, self.D_eff)

    @property
    def exponent(self) -> float:
        return self.Q / self.D_eff

    def with_T0(self, T0: float) -> "ScheduleParams":
        return replace(self, T0=T0)


def schedule_scale(m: float, n: float, Q: float, D_eff: int) -> float:
    if m <= 0 or n < 0 or Q <= 0 or D_eff < 1:
        raise ValueError("need m > 0, n >= 0, Q > 0, D_eff >= 1")
    return m * math.exp(-n * Q / D_eff)


def asa_temperature(k: float, p: ScheduleParams) -> float:
    if k < 0 or not math.isfinite(k):
        raise DomainError(f"annealing index must be finite and >= 0, got {k}")
    return max(p.T0 * math.exp(-p.c * k**p.exponent), T_FLOOR)


def index_for_temperature(T: float, p: ScheduleParams, *, return_flag: bool = False):
    """Annealing index at which the ASA schedule reaches ``T``.

    Temperatures above ``T0`` clamp to ``k = 0``; with ``return_flag=True`` a
    ``(k, clamped)`` pair is returned so callers can see that happened.
    """
    if not (T > 0) or not math.isfinite(T):
        raise DomainError(f"temperature must be finite and > 0, got {T}")
    clamped = T >= p.T0
    if clamped:
        k = 0.0
    else:
        k = (math.log(p.T0 / T) / p.c) ** (1.0 / p.exponent)
    return (k, clamped and T > p.T0) if return_flag else k


def ba_temperature(k: float, T0: float, k0: float = math.e) -> float:
    """Logarithmic Boltzmann schedule ``T0 ln(k0) / ln(k)`` for ``k >= k0``."""
    if k0 < 2:
        raise DomainError(f"k0 must be >= 2, got {k0}")
    if k < k0:
        raise DomainError(f"k must be >= k0 ({k0}), got {k}")
    return max(T0 * math.log(k0) / math.log(k), T_FLOOR)


def sq_exponential_temperature(k: float, T0: float, c_ratio: float) -> float:
    """Geometric cooling ``T0 c_ratio^k``."""
    if not 0.0 < c_ratio < 1.0:
        raise DomainError(f"c_ratio must lie in (0, 1), got {c_ratio}")
    return max(T0 * c_ratio**k, T_FLOOR)


def fa_temperature(k: float, T0: float) -> float:
    """Reciprocal fast-annealing schedule ``T0 / k`` for ``k >= 1``."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    return max(T0 / k, T_FLOOR)


PROOF_FAMILIES = ("ba-log", "fa-reciprocal", "asa", "asa-quenched")


def proof_sum_diagnostic(family: str, horizon: int, Q: float = 2.0, k0: int = 1) -> float:
    """Partial sum up to ``horizon`` of the series whose divergence underwrites
    each family's ergodic-sampling argument.

    ``ba-log``, ``fa-reciprocal`` and ``asa`` all reduce to the harmonic series
    (divergent); ``asa-quenched`` sums ``1/k^Q`` and converges for ``Q > 1``.
    """
    if horizon < 10:
        raise ValueError("horizon must be >= 10")
    if family not in PROOF_FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {PROOF_FAMILIES}")
    power = Q if family == "asa-quenched" else 1.0
    return float(_kernels.power_sum(int(k0), int(horizon), float(power)))
