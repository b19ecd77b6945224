from __future__ import annotations

import math

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]

SAMPLE_POINTS = 4096


def unit_ball_volume(dim: int) -> float:
    """Return ωₙ, the volume of the unit ball of ℝⁿ."""
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def ball_radius(dim: int, volume: float = 1.0) -> float:
    return (volume / unit_ball_volume(dim)) ** (1 / dim)


def isoperimetric_constant(dim: int) -> float:
    """Return 2nωₙ^{1/n}, the ε → 0 limit of ψ(ε)."""
    return 2 * dim * unit_ball_volume(dim) ** (1 / dim)


def first_order_coefficient(dim: int, kappa0: float) -> float:
    """Return 2n(n−1)ωₙ^{2/n}κ₀, the slope of ψ(ε) at ε = 0."""
    return 2 * dim * (dim - 1) * unit_ball_volume(dim) ** (2 / dim) * kappa0


def limiting_multiplier(dim: int) -> float:
    """Return 2(n−1)ωₙ^{1/n}, the ε → 0 limit of λ(ε)."""
    return 2 * (dim - 1) * unit_ball_volume(dim) ** (1 / dim)


def chebyshev_nodes(count: int = SAMPLE_POINTS) -> FloatArray:
    """Chebyshev–Lobatto points on [0, 1], endpoints included."""
    k = np.arange(count)
    return np.sort(0.5 * (1 - np.cos(np.pi * k / (count - 1))))


def polyfit(x: FloatArray, y: FloatArray, degree: int) -> FloatArray:
    """Least squares polynomial coefficients in increasing order of power."""
    return np.polynomial.polynomial.polyfit(np.asarray(x), np.asarray(y), degree)


def loglog_slope(x: FloatArray, y: FloatArray) -> float:
    return float(polyfit(np.log(x), np.log(np.abs(y)), 1)[1])


def decay_envelope_constant(
    s: FloatArray, values: FloatArray, upper: float = 1e3
) -> float:
    """
    Return the smallest ``C ≥ 1`` with ``|values| ≤ C e^{−|s|/C}``, found by bisection.

    Returns ``inf`` when not even ``C = upper`` works.
    """
    s, values = np.abs(s), np.abs(values)

    def holds(c: float) -> bool:
        return bool(np.all(values <= c * np.exp(-s / c)))

    lo, hi = 1.0, upper
    if holds(lo):
        return lo
    elif not holds(hi):
        return math.inf

    for _ in range(60):
        mid = (lo + hi) / 2
        lo, hi = (lo, mid) if holds(mid) else (mid, hi)

    return hi
