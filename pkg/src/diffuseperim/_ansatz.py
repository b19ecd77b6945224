from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from os import PathLike
from typing import NamedTuple

import numpy as np
from scipy import optimize

from ._exceptions import BracketFailure, RegimeViolation
from ._potentials import PotentialChain
from ._profile import Profile, ProfileConstants
from ._radial import RadialFunction, RadialGrid, _check_same_grid, mass
from ._utils import (
    FloatArray,
    decay_envelope_constant,
    loglog_slope,
    polyfit,
    unit_ball_volume,
)

logger: logging.Logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Ansatz:
    """The competitor ``z_ε(r) = η((r − R)/ε − τ_ε)`` normalized to the target mass."""

    eps: float
    tau_eps: float
    field: RadialFunction
    mass_residual: float
    radius: float

    def to_csv(self, path: str | PathLike[str]) -> None:
        np.savetxt(
            path,
            np.column_stack([self.field.r, self.field.values]),
            delimiter=",",
            fmt="%.17g",
            header=f"columns: r, z (eps={self.eps!r}, tau_eps={self.tau_eps!r})",
        )


class ResolutionReport(NamedTuple):
    f_sup: float
    #: ``(A, c)`` with ``|f(s)| ≤ A e^{−c|s|}``
    decay_fit: tuple[float, float]


class InterfaceReport(NamedTuple):
    inner_width: float
    outer_width: float
    slope_range: tuple[float, float]
    inner_tail_constant: float
    outer_tail_constant: float


def _evaluate(
    profile: Profile, grid: RadialGrid, radius: float, eps: float, tau: float
) -> FloatArray:
    return profile((grid.r - radius) / eps - tau)


def solve_tau_eps(
    chain: PotentialChain,
    profile: Profile,
    eps: float,
    grid: RadialGrid,
    *,
    constants: ProfileConstants | None = None,
    target_mass: float = 1.0,
) -> Ansatz:
    """
    Find the unique shift τ_ε giving ``z_ε`` the target mass.

    ``τ ↦ ∫V(η((r − R)/ε − τ))`` is strictly increasing, so the root is bracketed on
    ``[τ₀ − 5, τ₀ + 5]``, narrowed by bisection and polished with Newton's method.

    :raises RegimeViolation: if ε is too large compared to R or to the grid spacing

    """
    n = grid.dim
    radius = (target_mass / unit_ball_volume(n)) ** (1 / n)
    if eps <= 0:
        raise ValueError("eps must be positive")
    elif eps > 0.2 * radius:
        raise RegimeViolation(f"ε = {eps} exceeds 0.2·R = {0.2 * radius:.6g}")

    near = np.abs(grid.r[1:] - radius) <= 5 * eps
    if not np.any(near) or np.max(grid.spacing[near]) > eps / 4:
        raise RegimeViolation(
            f"the grid does not resolve an interface of width ε = {eps}"
        )
    elif grid.r_max < radius + 10 * eps:
        raise RegimeViolation(
            "the grid does not extend far enough beyond the interface"
        )

    def excess(tau: float) -> float:
        values = _evaluate(profile, grid, radius, eps, tau)
        return grid.integrate(chain.V(values)) - target_mass

    def slope(tau: float) -> float:
        s = (grid.r - radius) / eps - tau
        _, v1, _ = chain.vee(profile(s))
        return grid.integrate(-v1 * profile.derivative(s))

    center = constants.tau0 if constants is not None else 0.0
    lo, hi = center - 5, center + 5
    if excess(lo) * excess(hi) > 0:
        raise BracketFailure(f"no mass-normalizing shift in [{lo:g}, {hi:g}]")

    rough = optimize.bisect(excess, lo, hi, xtol=1e-6)
    tau = float(optimize.newton(excess, rough, fprime=slope, tol=1e-14, maxiter=20))
    field = RadialFunction(grid, _evaluate(profile, grid, radius, eps, tau))
    residual = abs(mass(field, chain) - target_mass)
    if residual > 1e-8:
        logger.warning("ansatz mass residual %.3g at ε = %g", residual, eps)

    logger.debug("τ_ε = %.12g at ε = %g", tau, eps)
    return Ansatz(eps, tau, field, residual, radius)


def _fit_decay(s: FloatArray, f: FloatArray) -> tuple[float, float]:
    significant = np.abs(f) > 1e-12
    if np.count_nonzero(significant) < 2:
        return 0.0, np.inf

    distance = np.abs(s[significant])
    magnitude = np.abs(f[significant])
    _, slope = polyfit(distance, np.log(magnitude), 1)
    rate = -float(slope)
    # lift the least squares line until it bounds every sample
    amplitude = float(np.max(magnitude * np.exp(rate * distance)))
    return amplitude, rate


def resolution_residual(
    u: RadialFunction, ansatz: Ansatz, profile: Profile
) -> ResolutionReport:
    """
    Compare ``u`` with the ansatz in the stretched variable ``s = (r − R)/ε``.

    Reports ``sup|f|`` for ``f(s) = u(R + εs) − z_ε(R + εs)`` and a fitted envelope
    ``A e^{−c|s|}``.

    :raises GridMismatch: if ``u`` and the ansatz live on different grids

    """
    _check_same_grid(u, ansatz.field)
    f = u.values - ansatz.field.values
    s = (u.r - ansatz.radius) / ansatz.eps
    return ResolutionReport(float(np.max(np.abs(f))), _fit_decay(s, f))


def _crossing(r: FloatArray, values: FloatArray, level: float) -> float:
    """First radius where a decreasing profile falls below ``level``."""
    below = np.flatnonzero(values < level)
    if below.size == 0:
        return float(r[-1])
    elif below[0] == 0:
        return float(r[0])

    i = below[0]
    frac = (values[i - 1] - level) / (values[i - 1] - values[i])
    return float(r[i - 1] + frac * (r[i] - r[i - 1]))


def interface_report(
    u: RadialFunction, radius: float, eps: float, delta0: float
) -> InterfaceReport:
    """
    Measure the transition layer of a decreasing profile.

    The layer is ``[R − b, R + c]`` with ``u(R − b) = 1 − δ₀`` and ``u(R + c) = δ₀``.
    The slope range is that of ``−εu′`` on the layer; the tail constants are the
    smallest ``C`` with ``1 − u ≤ C e^{−(R − r)/(Cε)}`` inside and
    ``u ≤ C e^{−(r − R)/(Cε)}`` outside.
    """
    r, values = u.r, u.values
    inner = radius - _crossing(r, values, 1 - delta0)
    outer = _crossing(r, values, delta0) - radius
    layer = (r >= radius - inner) & (r <= radius + outer)
    slope = -eps * u.derivative()[layer]
    slope_range = (0.0, 0.0)
    if slope.size:
        slope_range = (float(np.min(slope)), float(np.max(slope)))

    inside = r <= radius - inner
    outside = r >= radius + outer
    inner_tail = decay_envelope_constant((radius - r[inside]) / eps, 1 - values[inside])
    outer_tail = decay_envelope_constant((r[outside] - radius) / eps, values[outside])
    return InterfaceReport(inner, outer, slope_range, inner_tail, outer_tail)


def tau_rate(
    eps_values: Sequence[float], tau_values: Sequence[float], tau0: float
) -> float:
    """Log-log slope of ``|τ_ε − τ₀|`` against ε (about 1 when ``τ_ε − τ₀ = O(ε)``)."""
    return loglog_slope(np.asarray(eps_values), np.asarray(tau_values) - tau0)


def tau_constant(
    eps_values: Sequence[float], tau_values: Sequence[float], tau0: float
) -> float:
    """Empirical ``C`` in ``|τ_ε − τ₀| ≤ Cε``."""
    eps = np.asarray(eps_values)
    return float(np.max(np.abs(np.asarray(tau_values) - tau0) / eps))
