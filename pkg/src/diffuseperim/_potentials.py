from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from ._exceptions import NonAdmissible, QuadratureFailure
from ._utils import FloatArray, chebyshev_nodes

logger: logging.Logger = logging.getLogger(__name__)

WellKind = Literal["reference-quartic", "user-supplied"]

#: Largest constant accepted in the two-sided near-well bounds
NEAR_WELL_CEILING = 1e3

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)
_COARSE_NODES, _COARSE_WEIGHTS = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class DoubleWell:
    """
    A piecewise polynomial double-well potential on [0, 1].

    Coefficients are given in increasing powers of the global variable ``t``; piece
    ``k`` is active on ``[breakpoints[k], breakpoints[k + 1]]``.
    """

    pieces: tuple[Polynomial, ...]
    breakpoints: tuple[float, ...]
    kind: WellKind
    normalization_residual: float
    lipschitz_d2w: float

    def _piece_index(self, t: FloatArray) -> FloatArray:
        return _locate(self.breakpoints, t, len(self.pieces))

    @staticmethod
    def _with_derivatives(
        pieces: Sequence[Polynomial],
    ) -> tuple[tuple[Polynomial, Polynomial, Polynomial], ...]:
        return tuple((piece, piece.deriv(1), piece.deriv(2)) for piece in pieces)

    @cached_property
    def _direct_table(self) -> tuple[tuple[Polynomial, Polynomial, Polynomial], ...]:
        return self._with_derivatives(self.pieces)

    def _evaluate_pieces(
        self,
        table: Sequence[tuple[Polynomial, Polynomial, Polynomial]],
        index: FloatArray,
        x: FloatArray,
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        w = np.empty_like(x)
        dw = np.empty_like(x)
        d2w = np.empty_like(x)
        for k, (piece, first, second) in enumerate(table):
            mask = index == k
            if np.any(mask):
                w[mask] = piece(x[mask])
                dw[mask] = first(x[mask])
                d2w[mask] = second(x[mask])

        return w, dw, d2w

    def evaluate(
        self, t: FloatArray | float
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        """
        Return ``(W, W′, W″)`` at ``t``.

        The upper half is evaluated in the reflected variable ``1 − t`` so that ``W``
        keeps its relative precision near both wells.
        """
        x = np.atleast_1d(np.asarray(t, dtype=float))
        index = self._piece_index(x)
        w, dw, d2w = self._evaluate_pieces(self._direct_table, index, x)
        upper = x > 0.5
        if np.any(upper):
            flipped = self._evaluate_pieces(
                self._reflected_table, index[upper], 1 - x[upper]
            )
            w[upper], dw[upper], d2w[upper] = flipped[0], -flipped[1], flipped[2]

        return w, dw, d2w

    @cached_property
    def _reflected_table(self) -> tuple[tuple[Polynomial, Polynomial, Polynomial], ...]:
        flip = Polynomial([1.0, -1.0])
        return self._with_derivatives([piece(flip) for piece in self.pieces])

    def reflected(
        self, v: FloatArray | float
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        """
        Return ``(W, W′, W″)`` at ``1 − v``, accurate to full relative precision even
        when ``v`` is far below the spacing of doubles at 1.

        Derivatives are taken with respect to ``t``, not ``v``.
        """
        x = np.atleast_1d(np.asarray(v, dtype=float))
        w, dw, d2w = self._evaluate_pieces(
            self._reflected_table, self._piece_index(1 - x), x
        )
        return w, -dw, d2w

    def w(self, t: FloatArray | float) -> FloatArray:
        return self.evaluate(t)[0]

    def scaled(self, factor: float, kind: WellKind | None = None) -> DoubleWell:
        return _build_well(
            tuple(piece * factor for piece in self.pieces),
            self.breakpoints,
            kind or self.kind,
        )


def _locate(
    breakpoints: Sequence[float], t: FloatArray | float, count: int
) -> FloatArray:
    """Index of the piece containing ``t``, clamped to ``[0, count)``."""
    return np.clip(np.searchsorted(breakpoints, t, side="right") - 1, 0, count - 1)


def _sqrt_w_integral(
    pieces: Sequence[Polynomial], breakpoints: Sequence[float]
) -> float:
    def sqrt_w(t: float) -> float:
        index = int(_locate(breakpoints, t, len(pieces)))
        return float(np.sqrt(max(pieces[index](t), 0.0)))

    value, error = integrate.quad(
        sqrt_w,
        0.0,
        1.0,
        points=list(breakpoints[1:-1]) or None,
        epsabs=1e-15,
        epsrel=1e-14,
        limit=400,
    )
    if error > 1e-11:
        raise QuadratureFailure(f"∫√W did not converge (error estimate {error:.3g})")

    return value


def _build_well(
    pieces: tuple[Polynomial, ...], breakpoints: Sequence[float], kind: WellKind
) -> DoubleWell:
    breaks = tuple(float(b) for b in breakpoints)
    nodes = chebyshev_nodes()
    well = DoubleWell(pieces, breaks, kind, np.nan, np.nan)
    w, dw, d2w = well.evaluate(nodes)
    scale = max(1.0, float(np.max(np.abs(w))))
    if abs(w[0]) > 1e-12 * scale or abs(w[-1]) > 1e-12 * scale:
        raise NonAdmissible("W must vanish at both wells")
    elif np.any(w[1:-1] <= 0):
        raise NonAdmissible("W must be positive on (0, 1)")
    elif d2w[0] <= 0 or d2w[-1] <= 0:
        raise NonAdmissible("W″ must be positive at both wells")

    for b in breaks[1:-1]:
        index = int(np.searchsorted(breaks, b)) - 1
        left = [pieces[index].deriv(k)(b) for k in range(3)]
        right = [pieces[index + 1].deriv(k)(b) for k in range(3)]
        if not np.allclose(left, right, rtol=1e-9, atol=1e-9 * scale):
            raise NonAdmissible(f"W is not C² across the breakpoint {b}")

    lipschitz = float(np.max(np.abs(np.diff(d2w)) / np.diff(nodes)))
    if not np.isfinite(lipschitz):
        raise NonAdmissible("W″ is not Lipschitz on the sample grid")

    residual = abs(_sqrt_w_integral(pieces, breaks) - 1.0)
    return DoubleWell(pieces, breaks, kind, residual, lipschitz)


def make_reference_well() -> DoubleWell:
    """Return the normalized quartic ``W(t) = 36 t² (1 − t)²``."""
    return _build_well(
        (Polynomial([0.0, 0.0, 36.0, -72.0, 36.0]),), (0.0, 1.0), "reference-quartic"
    )


def normalize_well(
    coefficients: Sequence[float] | Sequence[Sequence[float]],
    breakpoints: Sequence[float] | None = None,
    *,
    kind: WellKind = "user-supplied",
) -> DoubleWell:
    """
    Scale a raw (piecewise) polynomial potential so that ``∫₀¹ √W = 1``.

    :param coefficients: coefficients in increasing powers of ``t``, either for a
        single polynomial or one sequence per piece
    :param breakpoints: piece boundaries, starting at 0 and ending at 1 (required
        when more than one piece is given)
    :raises NonAdmissible: if the raw potential is not a non-degenerate double well

    """
    if len(coefficients) and np.ndim(coefficients[0]) > 0:
        raw = tuple(Polynomial(np.asarray(c, dtype=float)) for c in coefficients)
    else:
        raw = (Polynomial(np.asarray(coefficients, dtype=float)),)

    if breakpoints is None:
        breakpoints = np.linspace(0.0, 1.0, len(raw) + 1)
    elif len(breakpoints) != len(raw) + 1:
        raise NonAdmissible("expected one more breakpoint than there are pieces")
    elif (
        breakpoints[0] != 0
        or breakpoints[-1] != 1
        or np.any(np.diff(breakpoints) <= 0)
    ):
        raise NonAdmissible("breakpoints must increase from 0 to 1")

    # Validate before scaling so that W ≡ 0 is reported as such
    nodes = chebyshev_nodes()
    index = _locate(breakpoints, nodes, len(raw))
    values = np.array([raw[k](t) for k, t in zip(index, nodes)])
    if np.any(values[1:-1] <= 0):
        raise NonAdmissible("W must be positive on (0, 1)")

    factor = _sqrt_w_integral(raw, breakpoints) ** -2
    logger.debug("normalizing well by the factor %.17g", factor)
    return _build_well(tuple(p * factor for p in raw), breakpoints, kind)


def _phi_second(
    dw: FloatArray, d2w: FloatArray, sqrt_w: FloatArray, t: FloatArray
) -> FloatArray:
    # Φ″ = W′/(2√W), continued to the wells by ±√(W″/2)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = dw / (2 * sqrt_w)

    at_well = sqrt_w < 1e-150
    sign = np.where(t < 0.5, 1.0, -1.0)
    out[at_well] = (sign * np.sqrt(np.maximum(d2w, 0.0) / 2))[at_well]
    return out


class PotentialChain:
    """
    The functions ``Φ(t) = ∫₀ᵗ √W`` and ``V = Φ^{n/(n−1)}`` derived from a well.

    Φ is tabulated on a Chebyshev grid by composite Gauss–Legendre quadrature
    (checked against an adaptive quadrature of the whole interval) and interpolated
    with cubic Hermite splines using the exact derivative √W.
    """

    def __init__(self, well: DoubleWell, dim: int):
        if dim < 2:
            raise ValueError("the dimension must be at least 2")

        self.well = well
        self.dim = dim
        self.exponent = dim / (dim - 1)
        self.samples = chebyshev_nodes()

        a, b = self.samples[:-1], self.samples[1:]
        half = (b - a)[:, None] / 2
        mid = (a + b)[:, None] / 2
        def sqrt_w(x: FloatArray) -> FloatArray:
            return np.sqrt(np.maximum(well.w(x), 0))

        fine = np.sum(_GAUSS_WEIGHTS * sqrt_w(mid + half * _GAUSS_NODES), axis=1)
        coarse = np.sum(_COARSE_WEIGHTS * sqrt_w(mid + half * _COARSE_NODES), axis=1)
        fine, coarse = fine * half[:, 0], coarse * half[:, 0]
        error = float(np.sum(np.abs(fine - coarse)))
        if error > 1e-11:
            raise QuadratureFailure(
                f"Φ table did not converge (error estimate {error:.3g})"
            )

        table = np.concatenate([[0.0], np.cumsum(fine)])
        total = _sqrt_w_integral(well.pieces, well.breakpoints)
        if abs(table[-1] - total) > 1e-11:
            raise QuadratureFailure(
                f"Φ(1) = {table[-1]!r} disagrees with the adaptive value {total!r}"
            )

        self._phi_table = table
        sqrt_w = np.sqrt(np.maximum(well.w(self.samples), 0))
        self._phi_spline = CubicHermiteSpline(self.samples, table, sqrt_w)
        self._phi_inverse_guess = PchipInterpolator(table, self.samples)
        logger.debug("tabulated Φ for n=%d with Φ(1) = %.17g", dim, table[-1])

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(kind={self.well.kind!r}, dim={self.dim})"

    def phi(self, t: FloatArray | float) -> tuple[FloatArray, FloatArray, FloatArray]:
        """Return ``(Φ, Φ′, Φ″)`` at ``t``."""
        x = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), 0.0, 1.0)
        _w, dw, d2w = self.well.evaluate(x)
        sqrt_w = np.sqrt(np.maximum(_w, 0))
        return self._phi_spline(x), sqrt_w, _phi_second(dw, d2w, sqrt_w, x)

    def _vee_from(
        self, phi: FloatArray, sqrt_w: FloatArray, phi2: FloatArray
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        p = self.exponent
        phi = np.maximum(phi, 0.0)
        v = phi**p
        v1 = p * phi ** (p - 1) * sqrt_w
        with np.errstate(divide="ignore", invalid="ignore"):
            v2 = p * (p - 1) * phi ** (p - 2) * sqrt_w**2 + p * phi ** (p - 1) * phi2

        v2[phi == 0] = 0.0
        return v, v1, v2

    def vee(self, t: FloatArray | float) -> tuple[FloatArray, FloatArray, FloatArray]:
        """Return ``(V, V′, V″)`` at ``t``."""
        return self._vee_from(*self.phi(t))

    def vee_reflected(
        self, v: FloatArray | float
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        """Return ``(V, V′, V″)`` at ``1 − v``, accurate for tiny ``v``."""
        x = np.clip(np.atleast_1d(np.asarray(v, dtype=float)), 0.0, 1.0)
        w, dw, d2w = self.well.reflected(x)
        sqrt_w = np.sqrt(np.maximum(w, 0))
        phi = self._phi_spline(1 - x)
        return self._vee_from(phi, sqrt_w, _phi_second(dw, d2w, sqrt_w, 1 - x))

    def V(self, t: FloatArray | float) -> FloatArray:  # noqa: N802
        return self._vee_from(*self.phi(t))[0]

    def Phi(self, t: FloatArray | float) -> FloatArray:  # noqa: N802
        x = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), 0.0, 1.0)
        return self._phi_spline(x)

    def phi_inverse(self, y: FloatArray | float) -> FloatArray:
        """Return ``t`` with ``Φ(t) = y``."""
        target = np.atleast_1d(np.asarray(y, dtype=float))
        target = np.clip(target, 0.0, self._phi_table[-1])
        t = np.clip(self._phi_inverse_guess(target), 0.0, 1.0)
        for _ in range(4):
            value, slope, _ = self.phi(t)
            active = slope > 1e-14
            step = (value - target)[active] / slope[active]
            t[active] = np.clip(t[active] - step, 0.0, 1.0)

        return t

    def vee_inverse(self, y: FloatArray | float) -> FloatArray:
        """Return ``t`` with ``V(t) = y``."""
        y = np.maximum(np.atleast_1d(np.asarray(y, dtype=float)), 0.0)
        return self.phi_inverse(y ** (1 / self.exponent))

    # Empirical counterparts of the universal constants

    def _near_well_ratios(self, delta: float) -> FloatArray:
        t = self.samples
        ratios: list[FloatArray] = []
        low = t[(t > 0) & (t <= delta)]
        if low.size:
            w, dw, d2w = self.well.evaluate(low)
            phi = self.Phi(low)
            ratios += [
                w / low**2,
                dw / low,
                d2w,
                phi / low**2,
                self.V(low) / low ** (2 + 2 / (self.dim - 1)),
            ]

        high = t[(t < 1) & (t >= 1 - delta)]
        if high.size:
            w, dw, d2w = self.well.reflected(1 - high)
            gap = 1 - high
            ratios += [w / gap**2, -dw / gap, d2w]

        return np.concatenate(ratios) if ratios else np.ones(1)

    def _near_well_bounds_hold(self, delta: float) -> bool:
        ratios = self._near_well_ratios(delta)
        return bool(
            np.all(ratios >= 1 / NEAR_WELL_CEILING)
            and np.all(ratios <= NEAR_WELL_CEILING)
        )

    @cached_property
    def delta0_estimate(self) -> float:
        """Largest δ in (0, 1/2) on which the two-sided near-well bounds hold."""
        lo, hi = 0.0, 0.5
        if self._near_well_bounds_hold(hi):
            return hi

        for _ in range(60):
            mid = (lo + hi) / 2
            if self._near_well_bounds_hold(mid):
                lo = mid
            else:
                hi = mid

        logger.debug("estimated δ₀ = %.6g for %r", lo, self)
        return lo

    @cached_property
    def near_well_constant(self) -> float:
        ratios = self._near_well_ratios(self.delta0_estimate)
        return float(np.max(np.maximum(ratios, 1 / ratios)))

    @cached_property
    def v_over_w_constant(self) -> float:
        """Smallest C with ``V ≤ C W`` on ``(0, 1 − δ₀]``."""
        t = self.samples
        t = t[(t > 0) & (t <= 1 - self.delta0_estimate)]
        return float(np.max(self.V(t) / self.well.w(t)))

    @cached_property
    def taylor_constant(self) -> float:
        """Smallest C with second order Taylor residual of W below ``C|b − a|³``."""
        grid = np.linspace(0.0, 1.0, 100)
        a, b = np.meshgrid(grid, grid, indexing="ij")
        mask = a != b
        a, b = a[mask], b[mask]
        wa, dwa, d2wa = self.well.evaluate(a)
        wb = self.well.w(b)
        step = b - a
        residual = np.abs(wb - wa - dwa * step - d2wa * step**2 / 2)
        return float(np.max(residual / np.abs(step) ** 3))

    @cached_property
    def phi_quadratic_constant(self) -> float:
        """Smallest C with ``|Φ(b) − Φ(a)| ≥ (b − a)²/C`` on sampled pairs."""
        grid = np.linspace(0.0, 1.0, 100)
        a, b = np.meshgrid(grid, grid, indexing="ij")
        mask = a < b
        a, b = a[mask], b[mask]
        return float(np.max((b - a) ** 2 / np.abs(self.Phi(b) - self.Phi(a))))


def chain(well: DoubleWell, dim: int) -> PotentialChain:
    return PotentialChain(well, dim)
