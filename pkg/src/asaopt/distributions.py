"""Generating densities, inverse-CDF samplers and acceptance tests.

Three annealing families live here:

* ASA: a product over dimensions of the heavy-tailed law on ``[-1, 1]`` with
  density ``1 / (2 (|y| + T) ln(1 + 1/T))``.
* BA: Gaussian steps with per-coordinate variance ``T``.
* FA: Cauchy steps of scale ``T``, either one independent Cauchy per
  coordinate (``"product"``) or the D-dimensional isotropic law.

All functions are pure; randomness enters only through the ``rng`` argument.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import _kernels

EXP_CLAMP = 700.0


class DomainError(ValueError):
    """An argument is outside the mathematical domain of the function."""


def _check_temperature(T, name="T"):
    arr = np.asarray(T, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"{name} must be finite and > 0, got {T!r}")
    return arr


def sgn(x: float) -> float:
    """Sign with ``sgn(0) == 0``."""
    return 1.0 if x > 0 else (-1.0 if x < 0 else 0.0)


# ---------------------------------------------------------------------------
# ASA


def asa_draw(u, T):
    """Map uniform draws ``u`` in [0, 1] to ASA steps ``y`` in [-1, 1].

    Scalars in, scalar out; arrays broadcast elementwise.
    """
    u_arr = np.asarray(u, dtype=float)
    T_arr = _check_temperature(T)
    if np.any((u_arr < 0.0) | (u_arr > 1.0)) or not np.all(np.isfinite(u_arr)):
        raise DomainError("u must lie in [0, 1]")
    u_b, T_b = np.broadcast_arrays(u_arr, T_arr)
    y = _kernels.asa_draw(np.ascontiguousarray(u_b.ravel()), np.ascontiguousarray(T_b.ravel()))
    y = y.reshape(u_b.shape)
    return float(y) if y.ndim == 0 else y


def asa_cdf(y, T):
    """Cumulative distribution of one ASA coordinate; exact inverse of :func:`asa_draw`."""
    y_arr = np.asarray(y, dtype=float)
    T_arr = _check_temperature(T)
    if np.any(np.abs(y_arr) > 1.0) or not np.all(np.isfinite(y_arr)):
        raise DomainError("|y| must be <= 1")
    y_b, T_b = np.broadcast_arrays(y_arr, T_arr)
    G = _kernels.asa_cdf(np.ascontiguousarray(y_b.ravel()), np.ascontiguousarray(T_b.ravel()))
    G = G.reshape(y_b.shape)
    return float(G) if G.ndim == 0 else G


def asa_density_1d(y, T):
    """Elementwise one-dimensional ASA density ``g_i(y)``."""
    y_arr = np.asarray(y, dtype=float)
    T_arr = _check_temperature(T)
    return 1.0 / (2.0 * (np.abs(y_arr) + T_arr) * np.log1p(1.0 / T_arr))


def asa_density(y, T) -> float:
    """Joint ASA generating density: product of the per-dimension densities."""
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    T_arr = np.atleast_1d(np.asarray(T, dtype=float))
    if y_arr.shape != T_arr.shape:
        raise ValueError(f"dimension mismatch: y has shape {y_arr.shape}, T has {T_arr.shape}")
    if np.any(np.abs(y_arr) > 1.0):
        raise DomainError("|y| must be <= 1")
    return float(np.prod(asa_density_1d(y_arr, T_arr)))


# ---------------------------------------------------------------------------
# BA and FA


def boltzmann_draw(rng: np.random.Generator, T: float, D: int, size=None) -> np.ndarray:
    """Gaussian steps with variance ``T`` per coordinate.

    Returns shape ``(D,)``, or ``size + (D,)`` when ``size`` is given.
    """
    _check_temperature(T)
    if D < 1:
        raise ValueError("D must be >= 1")
    shape = (D,) if size is None else tuple(np.atleast_1d(size)) + (D,)
    return math.sqrt(T) * rng.standard_normal(shape)


def cauchy_draw(
    rng: np.random.Generator,
    T: float,
    D: int,
    mode: Literal["product", "isotropic"] = "product",
    size=None,
) -> np.ndarray:
    """Cauchy steps of scale ``T``.

    ``product`` draws each coordinate as ``T tan(pi (u - 1/2))``.
    ``isotropic`` draws from the D-dimensional law with density proportional
    to ``T / (|dx|^2 + T^2)^((D+1)/2)``: a Gaussian direction divided by an
    independent half-normal, which is the multivariate Cauchy.
    """
    _check_temperature(T)
    if D < 1:
        raise ValueError("D must be >= 1")
    lead = () if size is None else tuple(np.atleast_1d(size))
    if mode == "product":
        u = rng.random(lead + (D,))
        return T * np.tan(np.pi * (u - 0.5))
    if mode == "isotropic":
        z = rng.standard_normal(lead + (D,))
        w = np.abs(rng.standard_normal(lead + (1,)))
        return T * z / w
    raise ValueError(f"unknown Cauchy mode {mode!r}")


# ---------------------------------------------------------------------------
# Acceptance


@dataclass(frozen=True)
class AcceptanceForm:
    """Which acceptance law to use.

    ``variant`` is ``"metropolis"`` (min(1, exp(-dE/T))), ``"logistic"``
    (1 / (1 + exp(dE/T))) or ``"tsallis"`` with index ``q``.

    For ``q > 1`` the Tsallis bracket ``1 - (1-q) dE/T`` is always positive
    for uphill moves, giving a power-law tail. For ``q < 1`` it hits zero at
    ``dE/T = 1/(1-q)`` and the probability is 0 beyond that.
    """

    variant: Literal["metropolis", "logistic", "tsallis"] = "metropolis"
    q: float = 1.5

    def __post_init__(self):
        if self.variant not in ("metropolis", "logistic", "tsallis"):
            raise ValueError(f"unknown acceptance variant {self.variant!r}")
        if self.variant == "tsallis" and self.q == 1.0:
            raise ValueError("tsallis q must differ from 1 (q=1 is the metropolis form)")


METROPOLIS = AcceptanceForm()


def acceptance_probability(dE: float, Ta: float, form: AcceptanceForm = METROPOLIS) -> float:
    if not (math.isfinite(Ta) and Ta > 0.0):
        raise DomainError(f"acceptance temperature must be finite and > 0, got {Ta!r}")
    if math.isnan(dE):
        raise DomainError("dE is NaN")
    x = dE / Ta
    if form.variant == "metropolis":
        if x <= 0.0:
            return 1.0
        return math.exp(-min(x, EXP_CLAMP))
    if form.variant == "logistic":
        return 1.0 / (1.0 + math.exp(max(-EXP_CLAMP, min(x, EXP_CLAMP))))
    # tsallis
    if x <= 0.0:
        return 1.0
    one_minus_q = 1.0 - form.q
    bracket = 1.0 - one_minus_q * x
    if bracket <= 0.0:
        return 0.0
    expo = math.log(bracket) / one_minus_q
    return math.exp(max(-EXP_CLAMP, min(expo, 0.0)))
