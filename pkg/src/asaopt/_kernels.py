"""Hot numeric kernels, each in a numba-loop and a numpy-vectorized flavour.

Both flavours are always importable as ``*_nb`` / ``*_np`` so they can be
cross-checked and benchmarked; the unsuffixed names are the ones selected by
:mod:`asaopt._accel`.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import njit, pick

# ---------------------------------------------------------------------------
# ASA generating law: y = sgn(u - 1/2) T [(1 + 1/T)^|2u-1| - 1]


@njit
def asa_draw_nb(u, temps):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        v = 2.0 * u[i] - 1.0
        t = temps[i]
        mag = t * math.expm1(abs(v) * math.log1p(1.0 / t))
        if v > 0.0:
            out[i] = min(mag, 1.0)
        elif v < 0.0:
            out[i] = -min(mag, 1.0)
        else:
            out[i] = 0.0
    return out


def asa_draw_np(u, temps):
    v = 2.0 * u - 1.0
    mag = temps * np.expm1(np.abs(v) * np.log1p(1.0 / temps))
    return np.sign(v) * np.minimum(mag, 1.0)


@njit
def asa_cdf_nb(y, temps):
    out = np.empty(y.shape[0])
    for i in range(y.shape[0]):
        t = temps[i]
        frac = math.log1p(abs(y[i]) / t) / math.log1p(1.0 / t)
        if y[i] > 0.0:
            out[i] = 0.5 + 0.5 * frac
        elif y[i] < 0.0:
            out[i] = 0.5 - 0.5 * frac
        else:
            out[i] = 0.5
    return out


def asa_cdf_np(y, temps):
    frac = np.log1p(np.abs(y) / temps) / np.log1p(1.0 / temps)
    return 0.5 + 0.5 * np.sign(y) * frac


# ---------------------------------------------------------------------------
# Per-coordinate range filter: first in-range proposal out of a block of steps


@njit
def first_in_range_nb(current, lower, upper, width, is_int, steps):
    n, r = steps.shape
    proposal = current.copy()
    used = np.zeros(n, dtype=np.int64)
    ok = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        for j in range(r):
            x = current[i] + steps[i, j] * width[i]
            if is_int[i]:
                # nearest integer, ties toward zero
                a = abs(x)
                x = math.copysign(math.ceil(a - 0.5), x) if a > 0.0 else 0.0
            used[i] = j + 1
            if lower[i] <= x <= upper[i]:
                proposal[i] = x
                ok[i] = True
                break
    return proposal, used, ok


def first_in_range_np(current, lower, upper, width, is_int, steps):
    cand = current[:, None] + steps * width[:, None]
    if is_int.any():
        a = np.abs(cand)
        rounded = np.copysign(np.ceil(a - 0.5), cand)
        rounded[a == 0.0] = 0.0
        cand = np.where(is_int[:, None], rounded, cand)
    inside = (cand >= lower[:, None]) & (cand <= upper[:, None])
    ok = inside.any(axis=1)
    first = np.argmax(inside, axis=1)
    rows = np.arange(current.shape[0])
    proposal = np.where(ok, cand[rows, first], current)
    used = np.where(ok, first + 1, steps.shape[1]).astype(np.int64)
    return proposal, used, ok


# ---------------------------------------------------------------------------
# Test functions, batched over rows of ``x``

_CORANA_D = np.array([1.0, 1000.0, 10.0, 100.0])


@njit
def corana_nb(x):
    d = np.array([1.0, 1000.0, 10.0, 100.0])
    out = np.zeros(x.shape[0])
    for r in range(x.shape[0]):
        acc = 0.0
        for i in range(4):
            xi = x[r, i]
            sx = 1.0 if xi > 0.0 else (-1.0 if xi < 0.0 else 0.0)
            z = math.floor(abs(xi) / 0.2 + 0.49999) * 0.2 * sx
            if abs(xi - z) < 0.05:
                sz = 1.0 if z > 0.0 else (-1.0 if z < 0.0 else 0.0)
                acc += 0.15 * (z - 0.05 * sz) ** 2 * d[i]
            else:
                acc += d[i] * xi * xi
        out[r] = acc
    return out


def corana_np(x):
    z = np.floor(np.abs(x) / 0.2 + 0.49999) * 0.2 * np.sign(x)
    valley = 0.15 * (z - 0.05 * np.sign(z)) ** 2 * _CORANA_D
    outside = _CORANA_D * x * x
    return np.where(np.abs(x - z) < 0.05, valley, outside).sum(axis=1)


@njit
def shubert_nb(x):
    out = np.empty(x.shape[0])
    for r in range(x.shape[0]):
        prod = 1.0
        for i in range(2):
            s = 0.0
            for j in range(1, 6):
                s += j * math.cos((j + 1) * x[r, i] + j)
            prod *= s
        out[r] = prod
    return out


_J = np.arange(1.0, 6.0)


def shubert_np(x):
    terms = _J * np.cos((_J + 1.0) * x[:, :, None] + _J)
    return terms.sum(axis=2).prod(axis=1)


# ---------------------------------------------------------------------------
# Partial sums of k^-p, summed small-to-large for accuracy


@njit
def power_sum_nb(k0, horizon, p):
    s = 0.0
    for k in range(horizon, k0 - 1, -1):
        s += 1.0 / float(k) ** p
    return s


def power_sum_np(k0, horizon, p):
    k = np.arange(horizon, k0 - 1, -1, dtype=float)
    return float(np.sum(1.0 / k**p))


asa_draw = pick(asa_draw_nb, asa_draw_np)
asa_cdf = pick(asa_cdf_nb, asa_cdf_np)
first_in_range = pick(first_in_range_nb, first_in_range_np)
corana = pick(corana_nb, corana_np)
shubert = pick(shubert_nb, shubert_np)
power_sum = pick(power_sum_nb, power_sum_np)
