from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from os import PathLike

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from ._exceptions import BracketFailure, ProfileMismatch, QuadratureFailure
from ._potentials import DoubleWell, PotentialChain
from ._utils import FloatArray, decay_envelope_constant

logger: logging.Logger = logging.getLogger(__name__)

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)
_LOG_HALF = float(np.log(0.5))


@dataclass(frozen=True)
class Profile:
    """
    The optimal transition ``η′ = −√W(η)``, ``η(0) = 1/2``, sampled on ``[−S, S]``.

    Off the grid, η is interpolated with cubic Hermite splines; beyond ``±S`` it is
    continued with its exact exponential tail rates ``√(W″(0)/2)`` (as ``s → ∞``)
    and ``√(W″(1)/2)`` (as ``s → −∞``).
    """

    s_grid: FloatArray
    eta: FloatArray
    eta1: FloatArray
    eta2: FloatArray
    decay_constant: float
    mismatch: float
    well: DoubleWell = field(repr=False)
    rate_low: float
    rate_high: float
    tail_low: float
    tail_high: float

    @property
    def half_width(self) -> float:
        return float(self.s_grid[-1])

    def __call__(self, s: FloatArray | float) -> FloatArray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        S = self.half_width
        out = np.empty_like(s)
        inside = np.abs(s) <= S
        out[inside] = self._spline(s[inside])
        right = s > S
        out[right] = self.tail_low * np.exp(-self.rate_low * (s[right] - S))
        left = s < -S
        out[left] = 1 - self.tail_high * np.exp(-self.rate_high * (-S - s[left]))
        return out

    def derivative(self, s: FloatArray | float) -> FloatArray:
        """Return ``η′(s) = −√W(η(s))``."""
        return -np.sqrt(np.maximum(self.well.w(self(s)), 0.0))

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.s_grid, self.eta, self.eta1)

    def to_csv(self, path: str | PathLike[str]) -> None:
        np.savetxt(
            path,
            np.column_stack([self.s_grid, self.eta, self.eta1, self.eta2]),
            delimiter=",",
            fmt="%.17g",
            header="columns: s, eta, eta1, eta2",
        )


@dataclass(frozen=True)
class ProfileConstants:
    tau0: float
    tau1: float
    kappa0: float
    tau0_residual: float
    tau0_moment: float
    w_integral: float

    @property
    def tau0_discrepancy(self) -> float:
        return abs(self.tau0 - self.tau0_moment)


class _ArcLength:
    """
    Tabulates ``S(y) = ∫ dt/√W`` between ``t = 1/2`` and the well at distance ``e^y``.

    The substitution ``z = e^y`` turns the logarithmic singularity of ``1/√W`` at a
    non-degenerate well into a bounded integrand.
    """

    def __init__(self, well: DoubleWell, rate: float, span: float, side: str):
        self.well = well
        self.side = side
        y_min = _LOG_HALF - 1.5 * rate * span - 20
        self.y = np.linspace(y_min, _LOG_HALF, 8193)
        a, b = self.y[:-1], self.y[1:]
        half = (b - a)[:, None] / 2
        mid = (a + b)[:, None] / 2
        samples = self._integrand(mid + half * _GAUSS_NODES)
        pieces = np.sum(_GAUSS_WEIGHTS * samples, axis=1)
        pieces *= half[:, 0]
        self.table = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
        total, error = integrate.quad(
            lambda y: float(self._integrand(np.array([y]))[0]),
            y_min,
            _LOG_HALF,
            epsabs=1e-12,
            epsrel=1e-13,
            limit=500,
        )
        if abs(total - self.table[0]) > 1e-9 or error > 1e-9:
            raise QuadratureFailure(
                f"arc length table for the {side} well did not converge "
                f"({self.table[0]!r} vs {total!r})"
            )

        self._spline = CubicHermiteSpline(self.y, self.table, -self._integrand(self.y))
        self._guess = PchipInterpolator(self.table[::-1], self.y[::-1])

    def _integrand(self, y: FloatArray) -> FloatArray:
        z = np.exp(y)
        if self.side == "low":
            w = self.well.w(z)
        else:
            w = self.well.reflected(z)[0]

        return z / np.sqrt(w)

    def invert(self, distance: FloatArray) -> FloatArray:
        """Return the distance ``z`` to the well at arc length ``distance`` from 1/2."""
        y = self._guess(distance)
        for _ in range(3):
            y -= (self._spline(y) - distance) / -self._integrand(y)

        return np.exp(y)


def _ode_branch(well: DoubleWell, side: str, stops: FloatArray) -> FloatArray:
    def rhs(_s: float, z: FloatArray) -> FloatArray:
        x = np.clip(z, 0.0, 1.0)
        w = well.w(x) if side == "low" else well.reflected(x)[0]
        return -np.sqrt(np.maximum(w, 0.0))

    solution = integrate.solve_ivp(
        rhs,
        (0.0, float(stops[-1])),
        [0.5],
        method="DOP853",
        t_eval=stops,
        rtol=1e-13,
        atol=1e-300,
    )
    if not solution.success:
        raise ProfileMismatch(f"profile ODE integration failed: {solution.message}")

    return solution.y[0]


def compute_profile(
    chain: PotentialChain, S: float = 12.0, N: int = 2048  # noqa: N803
) -> Profile:
    """
    Compute the optimal transition profile on a grid clustered near ``s = 0``.

    The profile is obtained by inverting ``s(η) = −∫_{1/2}^η dt/√W`` and
    cross-checked against an explicit eighth order integration of ``η′ = −√W(η)``.

    :raises ProfileMismatch: if the two constructions disagree by more than 1e-8

    """
    if S <= 0:
        raise ValueError("S must be positive")
    elif N < 64:
        raise ValueError("N must be at least 64")

    well = chain.well
    _w, _dw, d2w = well.evaluate(np.array([0.0, 1.0]))
    rate_low, rate_high = float(np.sqrt(d2w[0] / 2)), float(np.sqrt(d2w[1] / 2))

    x = np.linspace(-1.0, 1.0, 2 * (N // 2) + 1)
    s = S * np.sinh(2 * x) / np.sinh(2.0)
    s[N // 2] = 0.0
    right = s >= 0
    left_stops = -s[s <= 0][::-1]

    # Distances to the well each branch approaches: η for s ≥ 0, 1 − η for s ≤ 0
    low = _ArcLength(well, rate_low, S, "low").invert(s[right])
    high = _ArcLength(well, rate_high, S, "high").invert(left_stops)
    low_ode = _ode_branch(well, "low", s[right])
    high_ode = _ode_branch(well, "high", left_stops)
    mismatch = max(np.max(np.abs(low - low_ode)), np.max(np.abs(high - high_ode)))
    logger.debug("profile quadrature/ODE mismatch: %.3g", mismatch)
    if mismatch > 1e-8:
        raise ProfileMismatch(
            f"quadrature and ODE profiles differ by {mismatch:.3g} in sup norm"
        )

    low[0] = high[0] = 0.5
    gap = np.concatenate([high[::-1][:-1], low])
    eta = np.concatenate([1 - high[::-1][:-1], low])
    w_low, dw_low, _ = well.evaluate(low)
    w_high, dw_high, _ = well.reflected(high)
    w = np.concatenate([w_high[::-1][:-1], w_low])
    dw = np.concatenate([dw_high[::-1][:-1], dw_low])
    eta1 = -np.sqrt(np.maximum(w, 0.0))
    eta2 = dw / 2

    envelope = np.maximum.reduce([gap, np.abs(eta1), np.abs(eta2)])
    decay_constant = decay_envelope_constant(s, envelope)
    return Profile(
        s_grid=s,
        eta=eta,
        eta1=eta1,
        eta2=eta2,
        decay_constant=decay_constant,
        mismatch=float(mismatch),
        well=well,
        rate_low=rate_low,
        rate_high=rate_high,
        tail_low=float(low[-1]),
        tail_high=float(high[-1]),
    )


def _half_lines(
    profile: Profile, extra: float, origin: float
) -> tuple[FloatArray, FloatArray]:
    reach = profile.half_width + extra
    count = int(np.ceil(reach / 1e-3)) | 1
    negative = origin + np.linspace(-reach, 0.0, count)
    positive = origin + np.linspace(0.0, reach, count)
    return negative, positive


def mass_defect(
    chain: PotentialChain, profile: Profile, tau: float, origin: float = 0.0
) -> float:
    """Return ``∫ (1_{(−∞,0)}(s) − V(η(s − τ))) ds``; strictly decreasing in τ."""
    negative, positive = _half_lines(profile, 12.0, origin)
    inside = integrate.simpson(1 - chain.V(profile(negative - tau)), x=negative)
    outside = integrate.simpson(chain.V(profile(positive - tau)), x=positive)
    # the split point sits at the origin, so the indicator gained ∫_0^origin 1 ds
    return float(inside - outside - origin)


def _mass_defect_slope(
    chain: PotentialChain, profile: Profile, tau: float, origin: float
) -> float:
    total = 0.0
    for s in _half_lines(profile, 12.0, origin):
        _, v1, _ = chain.vee(profile(s - tau))
        total += float(integrate.simpson(v1 * profile.derivative(s - tau), x=s))

    return total


def compute_constants(
    chain: PotentialChain, profile: Profile, origin: float = 0.0
) -> ProfileConstants:
    """
    Compute τ₀, τ₁ and κ₀ = τ₀ + τ₁.

    τ₀ is found as the root of :func:`mass_defect` (bisection, then Newton polish) and
    independently from the moment formula ``∫ η′ V′(η) s ds``.

    :param origin: offset of the quadrature grid (the constants do not depend on it)
    :raises BracketFailure: if the mass defect does not change sign on [−10, 10]

    """

    def defect(tau: float) -> float:
        return mass_defect(chain, profile, tau, origin)

    def slope(tau: float) -> float:
        return _mass_defect_slope(chain, profile, tau, origin)

    lo, hi = -10.0, 10.0
    f_lo, f_hi = defect(lo), defect(hi)
    if f_lo * f_hi > 0:
        raise BracketFailure(
            f"mass defect has the same sign at τ = ±10 ({f_lo}, {f_hi})"
        )

    rough = optimize.bisect(defect, lo, hi, xtol=1e-4)
    tau0 = float(optimize.newton(defect, rough, fprime=slope, tol=1e-14, maxiter=20))

    negative, positive = _half_lines(profile, 0.0, origin)
    s = np.concatenate([negative, positive[1:]])
    eta = profile(s)
    _, v1, _ = chain.vee(eta)
    w = chain.well.w(eta)
    moment = float(integrate.simpson(profile.derivative(s) * v1 * s, x=s))
    tau1 = float(integrate.simpson(w * s, x=s))
    w_integral = float(integrate.simpson(w, x=s))
    residual = abs(defect(tau0))
    if abs(tau0 - moment) > 1e-7:
        logger.warning("τ₀ characterizations disagree: %.12g vs %.12g", tau0, moment)

    logger.info("τ₀ = %.12g, τ₁ = %.12g", tau0, tau1)
    return ProfileConstants(
        tau0=tau0,
        tau1=tau1,
        kappa0=tau0 + tau1,
        tau0_residual=residual,
        tau0_moment=moment,
        w_integral=w_integral,
    )
