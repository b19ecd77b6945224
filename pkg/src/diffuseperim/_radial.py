from __future__ import annotations

import logging
import math
import sys
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import cached_property
from os import PathLike
from typing import Any, NamedTuple

import numpy as np
from scipy import optimize, sparse
from scipy.interpolate import PchipInterpolator

from ._exceptions import GridMismatch, NoConvergence, RegimeViolation
from ._potentials import PotentialChain
from ._utils import FloatArray, ball_radius, unit_ball_volume

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

logger: logging.Logger = logging.getLogger(__name__)

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class GridOptions:
    """
    Layout of the graded radial mesh.

    :param points_per_eps: nodes per length ε inside the interface layer
    :param layer_width: half-width of the layer in units of ``ε log(1/ε)``
    :param far_width: distance from the interface to ``r_max`` in the same units
    :param growth: ratio of consecutive spacings outside the layer
    :param max_spacing: spacing cap outside the layer, relative to the ball radius
    """

    points_per_eps: int = 64
    layer_width: float = 10.0
    far_width: float = 30.0
    growth: float = 1.05
    max_spacing: float = 0.05

    def __post_init__(self) -> None:
        if self.points_per_eps < 4:
            raise ValueError("points_per_eps must be at least 4")
        elif self.growth < 1:
            raise ValueError("growth must be at least 1")


def _element_quadrature(
    dim: int, r: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """
    Eight point Gauss rule of every element as ``(x, local coordinate, weight)``,
    weighted by ``nωₙ r^{n−1} dr``; rows are elements.
    """
    a, b = r[:-1, None], r[1:, None]
    half = (b - a) / 2
    x = (a + b) / 2 + half * _GAUSS_NODES
    density = dim * unit_ball_volume(dim) * x ** (dim - 1) * _GAUSS_WEIGHTS * half
    return x, (x - a) / (2 * half), density


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """
    Radial mesh with mass-lumped P1 quadrature weights.

    ``weights[i]`` is the exact integral of the i-th hat function against
    ``nωₙ r^{n−1} dr``, so ``Σ weights · f`` integrates the piecewise linear
    interpolant of ``f`` over the ball of radius ``r_max``.
    """

    dim: int
    r: FloatArray
    weights: FloatArray = field(repr=False)

    @classmethod
    def from_nodes(cls, dim: int, r: FloatArray) -> Self:
        r = np.asarray(r, dtype=float)
        if dim < 2:
            raise ValueError("dim must be at least 2")
        elif r[0] != 0 or np.any(np.diff(r) <= 0):
            raise ValueError("radial nodes must start at 0 and increase strictly")

        _, rising, density = _element_quadrature(dim, r)
        left = np.sum(density * (1 - rising), axis=1)
        right = np.sum(density * rising, axis=1)
        weights = np.zeros_like(r)
        weights[:-1] += left
        weights[1:] += right
        return cls(dim, r, weights)

    @property
    def size(self) -> int:
        return len(self.r)

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @cached_property
    def spacing(self) -> FloatArray:
        return np.diff(self.r)

    @cached_property
    def element_volume(self) -> FloatArray:
        """Volume of each spherical shell between consecutive nodes."""
        powers = self.r**self.dim
        return unit_ball_volume(self.dim) * np.diff(powers)

    @cached_property
    def quadrature(self) -> tuple[FloatArray, FloatArray, FloatArray]:
        return _element_quadrature(self.dim, self.r)

    @cached_property
    def stiffness(self) -> sparse.csr_matrix:
        """The matrix K with ``uᵀKu = ∫|∇u|²`` for the P1 interpolant of ``u``."""
        coupling = self.element_volume / self.spacing**2
        diagonal = np.zeros(self.size)
        diagonal[:-1] += coupling
        diagonal[1:] += coupling
        return sparse.diags(
            [-coupling, diagonal, -coupling], [-1, 0, 1], format="csr"
        )

    def integrate(self, values: FloatArray) -> float:
        return float(np.dot(self.weights, values))

    def scaled(self, factor: float) -> RadialGrid:
        """Return the grid with every radius multiplied by ``factor``."""
        return RadialGrid(self.dim, self.r * factor, self.weights * factor**self.dim)

    def same_as(self, other: RadialGrid) -> bool:
        return self is other or (
            self.dim == other.dim
            and self.size == other.size
            and np.array_equal(self.r, other.r)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "dim": self.dim,
            "nodes": self.r.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Self:
        grid = cls.from_nodes(int(data["dim"]), np.asarray(data["nodes"], dtype=float))
        weights = data.get("weights")
        if weights is not None and not np.allclose(grid.weights, weights, rtol=1e-12):
            raise GridMismatch("serialized weights do not match the serialized nodes")

        return grid


def _geometric_run(
    start: float, stop: float, step: float, growth: float, cap: float
) -> FloatArray:
    """Points from ``start`` towards ``stop`` with geometrically growing spacing."""
    direction = 1.0 if stop > start else -1.0
    points = [start]
    while direction * (stop - points[-1]) > 0:
        step = min(step * growth, cap)
        points.append(points[-1] + direction * step)

    points[-1] = stop
    # a sliver left at the end is absorbed into its neighbour
    if len(points) > 2 and abs(points[-1] - points[-2]) < step / 2:
        del points[-2]

    return np.asarray(points)


def make_grid(
    dim: int,
    eps: float,
    options: GridOptions | None = None,
    *,
    radius: float | None = None,
) -> RadialGrid:
    """
    Build a mesh resolving an interface of width ε at ``radius``.

    Inside ``|r − R| ≤ layer_width·ε log(1/ε)`` the spacing is ``ε/points_per_eps``.
    Outside it grows geometrically up to ``r_max = max(3R, R + far_width·ε log(1/ε))``.

    :param radius: the interface radius (default: the radius of the unit-volume ball)
    :raises RegimeViolation: if ``ε > 0.2·R``

    """
    options = options or GridOptions()
    R = ball_radius(dim) if radius is None else radius  # noqa: N806
    if eps <= 0:
        raise ValueError("eps must be positive")
    elif eps > 0.2 * R:
        raise RegimeViolation(f"ε = {eps} exceeds 0.2·R = {0.2 * R:.6g}")

    log_scale = eps * max(math.log(1 / eps), 1.0)
    half_width = options.layer_width * log_scale
    h = eps / options.points_per_eps
    cap = max(h, options.max_spacing * R)
    lo = max(R - half_width, 0.0)
    hi = R + half_width
    r_max = max(3 * R, R + options.far_width * log_scale)
    layer = np.linspace(lo, hi, max(int(math.ceil((hi - lo) / h)), 2) + 1)
    inner = np.zeros(1)
    if lo > 0:
        inner = _geometric_run(lo, 0.0, h, options.growth, cap)[::-1]

    outer = _geometric_run(hi, r_max, h, options.growth, cap)
    nodes = np.concatenate([inner[:-1], layer, outer[1:]])
    logger.debug(
        "radial grid: dim=%d eps=%g nodes=%d r_max=%g", dim, eps, nodes.size, r_max
    )
    return RadialGrid.from_nodes(dim, nodes)


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Nodal values ``u(r)`` in [0, 1] on a :class:`RadialGrid`."""

    grid: RadialGrid
    values: FloatArray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.r.shape:
            raise GridMismatch(
                f"{values.size} values given for a grid of {self.grid.size} nodes"
            )

        object.__setattr__(self, "values", np.clip(values, 0.0, 1.0))

    @property
    def r(self) -> FloatArray:
        return self.grid.r

    def __call__(self, r: FloatArray | float) -> FloatArray:
        """Evaluate by linear interpolation; zero beyond ``r_max``."""
        return np.interp(r, self.grid.r, self.values, right=0.0)

    def derivative(self) -> FloatArray:
        """Second order nonuniform centered differences with ``u′(0) = 0``."""
        u, h = self.values, self.grid.spacing
        out = np.empty_like(u)
        hl, hr = h[:-1], h[1:]
        out[1:-1] = (
            -hr / (hl * (hl + hr)) * u[:-2]
            + (hr - hl) / (hl * hr) * u[1:-1]
            + hl / (hr * (hl + hr)) * u[2:]
        )
        out[0] = 0.0
        out[-1] = (u[-1] - u[-2]) / h[-1]
        return out

    def to_csv(self, path: str | PathLike[str]) -> None:
        np.savetxt(
            path,
            np.column_stack([self.grid.r, self.values]),
            delimiter=",",
            fmt="%.17g",
            header=f"columns: r, u (dim={self.grid.dim})",
        )

    @classmethod
    def from_csv(cls, path: str | PathLike[str], dim: int) -> Self:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        return cls(RadialGrid.from_nodes(dim, data[:, 0]), data[:, 1])


class EnergyReport(NamedTuple):
    total: float
    dirichlet: float
    potential: float
    bv_split: tuple[float, float]


def _check_same_grid(u: RadialFunction, v: RadialFunction) -> None:
    if not u.grid.same_as(v.grid):
        raise GridMismatch("the two fields live on different grids")


def mass(u: RadialFunction, chain: PotentialChain) -> float:
    """Return ``∫ V(u)``; the tail beyond ``r_max`` counts as zero."""
    return u.grid.integrate(chain.V(u.values))


def dirichlet_integral(u: RadialFunction) -> float:
    """Return ``∫|∇u|²`` of the piecewise linear interpolant."""
    return float(u.values @ (u.grid.stiffness @ u.values))


def total_variation(grid: RadialGrid, values: FloatArray) -> float:
    """Return ``∫|∇f|`` of the piecewise linear interpolant of ``f``."""
    return float(np.sum(grid.element_volume * np.abs(np.diff(values)) / grid.spacing))


def lp_integral(grid: RadialGrid, values: FloatArray, p: float) -> float:
    return grid.integrate(np.abs(values) ** p)


def energy(u: RadialFunction, chain: PotentialChain, eps: float) -> EnergyReport:
    """
    Return the Allen–Cahn energy ``ε∫|∇u|² + (1/ε)∫W(u)`` and its split.

    ``bv_split`` is ``(∫(√ε|∇u| − √(W(u)/ε))², 2∫|∇Φ(u)|)``. The square is
    integrated over the piecewise linear interpolant with the element Gauss rule;
    the two parts add up to the total up to quadrature error.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")

    grid = u.grid
    dirichlet = eps * dirichlet_integral(u)
    potential = grid.integrate(chain.well.w(u.values)) / eps
    total = dirichlet + potential
    _, rising, density = grid.quadrature
    jump = np.diff(u.values)[:, None]
    level = u.values[:-1, None] + rising * jump
    sqrt_w = np.sqrt(np.maximum(chain.well.w(level.ravel()), 0.0)).reshape(level.shape)
    slope = np.abs(jump) / grid.spacing[:, None]
    gap = math.sqrt(eps) * slope - sqrt_w / math.sqrt(eps)
    square = float(np.sum(density * gap**2))
    phi_variation = 2 * total_variation(grid, chain.Phi(u.values))
    return EnergyReport(total, dirichlet, potential, (square, phi_variation))


def d_phi(u: RadialFunction, v: RadialFunction, chain: PotentialChain) -> float:
    """Return ``∫|Φ(u) − Φ(v)|^{n/(n−1)}``."""
    _check_same_grid(u, v)
    n = u.grid.dim
    return lp_integral(u.grid, chain.Phi(u.values) - chain.Phi(v.values), n / (n - 1))


def quasi_triangle_constant(dim: int, samples: int = 200_000) -> float:
    """
    Brute-force the largest ``c`` with ``b^{1/n′} − a^{1/n′} ≥ c·b^{−1/n}(b − a)``.

    The inequality is homogeneous, so it suffices to scan ``a/b`` over (0, 1).
    """
    x = np.linspace(0.0, 1.0, samples + 1)[:-1]
    x = np.append(x, 1 - np.geomspace(1e-3, 1e-7, 64))
    exponent = (dim - 1) / dim
    return float(np.min((1 - x**exponent) / (1 - x)))


def dilate(u: RadialFunction, t: float) -> RadialFunction:
    """Return ``ρ_t u = u(t^{1/n} ·)`` exactly, by rescaling the grid."""
    if t <= 0:
        raise ValueError("t must be positive")

    return RadialFunction(u.grid.scaled(t ** (-1 / u.grid.dim)), u.values)


def resample(u: RadialFunction, grid: RadialGrid) -> RadialFunction:
    """Monotone cubic re-interpolation of ``u`` onto a grid of the same dimension."""
    if grid.dim != u.grid.dim:
        raise GridMismatch("cannot resample across dimensions")

    inside = grid.r <= u.grid.r_max
    values = np.zeros(grid.size)
    values[inside] = PchipInterpolator(u.grid.r, u.values)(grid.r[inside])
    return RadialFunction(grid, values)


def rearrange(
    u: RadialFunction, chain: PotentialChain | None = None
) -> RadialFunction:
    """
    Return the radially decreasing rearrangement of ``u``.

    Nodal values are sorted by decreasing level (ties in order of radius) and laid
    out in the volume coordinate of the quadrature weights. Each output node then
    receives the average of ``V(u)`` over its volume cell, mapped back through
    ``V⁻¹``, so ``mass`` is exactly preserved. Without a chain, ``u`` itself is
    averaged instead.
    """
    grid, values = u.grid, u.values
    order = np.lexsort((np.arange(grid.size), -values))
    level = chain.V(values) if chain is not None else values
    pieces = grid.weights[order] * level[order]
    sorted_volume = np.concatenate([[0.0], np.cumsum(grid.weights[order])])
    sorted_head = np.concatenate([[0.0], np.cumsum(pieces)])
    sorted_tail = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
    volume = np.concatenate([[0.0], np.cumsum(grid.weights)])
    volume[-1] = sorted_volume[-1]
    head = np.interp(volume, sorted_volume, sorted_head)
    tail = np.interp(volume, sorted_volume, sorted_tail)
    # difference whichever cumulative sum is smaller to keep tiny tail levels exact
    average = np.where(
        head[1:] <= tail[:-1], np.diff(head), -np.diff(tail)
    ) / grid.weights
    average = np.minimum.accumulate(np.clip(average, 0.0, 1.0))
    if chain is not None:
        average = np.minimum.accumulate(chain.vee_inverse(average))

    return RadialFunction(grid, average)


def shift_interface(u: RadialFunction, offset: float) -> RadialFunction:
    """Return ``u(r − offset)``, continued by ``u(0)`` and ``u(r_max)`` at the ends."""
    r, values = u.grid.r, u.values
    return RadialFunction(
        u.grid, np.interp(r - offset, r, values, left=values[0], right=values[-1])
    )


def restore_mass(
    u: RadialFunction, chain: PotentialChain, eps: float, target_mass: float = 1.0
) -> RadialFunction:
    """
    Restore the V-mass by moving the interface, ``u ↦ u(r − εθ)``.

    Unlike a rescaling of the values this keeps the range [0, 1].

    :raises NoConvergence: if no shift of at most ``10⁴ε`` reaches the target

    """

    def excess(theta: float) -> float:
        return mass(shift_interface(u, eps * theta), chain) - target_mass

    if abs(excess(0.0)) < 1e-14 * target_mass:
        return u

    bound = 1.0
    while excess(-bound) * excess(bound) > 0:
        bound *= 2
        if bound > 1e4:
            raise NoConvergence("could not restore the mass by shifting the interface")

    theta = optimize.brentq(excess, -bound, bound, xtol=1e-15, rtol=1e-15)
    return shift_interface(u, eps * theta)


def smoothed_indicator(grid: RadialGrid, radius: float, width: float) -> RadialFunction:
    """A ``tanh`` smoothing of the indicator of the ball of the given radius."""
    return RadialFunction(grid, 0.5 * (1 - np.tanh((grid.r - radius) / width)))
