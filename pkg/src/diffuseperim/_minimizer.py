from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np
from scipy import integrate, optimize, sparse
from scipy.sparse import linalg as sparse_linalg

from ._ansatz import solve_tau_eps
from ._exceptions import BracketFailure, NoConvergence, NoDecayingSolution
from ._potentials import PotentialChain
from ._profile import Profile, ProfileConstants
from ._radial import (
    GridOptions,
    RadialFunction,
    RadialGrid,
    d_phi,
    energy,
    make_grid,
    resample,
    restore_mass,
)
from ._utils import FloatArray

logger: logging.Logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    """
    Tolerances and iteration limits of the constrained minimization.

    :param tol: target sup-norm residual of the scaled Euler–Lagrange equation
    :param flow_tol: residual at which the gradient flow hands over to Newton's method
    :param max_flow_iters: gradient flow step limit
    :param max_newton_iters: Newton iteration limit
    :param flow_step: time step of the flow in units of ``ε / max|W″|``
    :param stall_tol: merit at or below which Newton's method is accepted once it
        stops making progress (the floating point floor of the residual)
    """

    tol: float = 1e-9
    flow_tol: float = 1e-3
    max_flow_iters: int = 400
    max_newton_iters: int = 40
    flow_step: float = 1.0
    stall_tol: float = 1e-7

    def __post_init__(self) -> None:
        if self.tol <= 0 or self.flow_tol <= 0 or self.stall_tol <= 0:
            raise ValueError("tolerances must be positive")
        elif self.flow_step <= 0:
            raise ValueError("flow_step must be positive")


@dataclass(frozen=True, eq=False)
class MinimizerResult:
    eps: float
    u: RadialFunction
    lam: float
    psi: float
    el_residual: float
    iterations: int
    converged: bool
    target_mass: float = 1.0
    mass_error: float = 0.0
    energy_history: tuple[float, ...] = field(default=(), repr=False)
    #: ``Err_ε`` of the penalized problem, on nodes where ``0 < u < 1`` numerically
    err_field: FloatArray | None = field(default=None, repr=False)
    err_sup: float | None = None
    penalty: float = 0.0

    def summary(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "lambda": self.lam,
            "psi": self.psi,
            "el_residual": self.el_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "target_mass": self.target_mass,
            "mass_error": self.mass_error,
            "err_sup": self.err_sup,
            "penalty": self.penalty,
        }


class _Functional:
    """The discrete energy, its penalty and the mass constraint, with derivatives."""

    def __init__(
        self,
        chain: PotentialChain,
        eps: float,
        grid: RadialGrid,
        target_mass: float,
        penalty: float = 0.0,
        anchor: RadialFunction | None = None,
    ):
        self.chain = chain
        self.eps = eps
        self.grid = grid
        self.weights = grid.weights
        self.stiffness = grid.stiffness
        self.target_mass = target_mass
        self.penalty = penalty
        self.power = grid.dim / (grid.dim - 1)
        self.anchor_phi = chain.Phi(anchor.values) if anchor is not None else None

    def mass(self, u: FloatArray) -> float:
        return self.grid.integrate(self.chain.V(u))

    def energy(self, u: FloatArray) -> float:
        value = self.eps * float(u @ (self.stiffness @ u))
        value += self.grid.integrate(self.chain.well.w(u)) / self.eps
        if self.anchor_phi is not None:
            gap = self.chain.Phi(u) - self.anchor_phi
            value += self.penalty * self.grid.integrate(np.abs(gap) ** self.power)

        return value

    def penalty_terms(self, u: FloatArray) -> tuple[FloatArray, FloatArray]:
        if self.anchor_phi is None:
            return np.zeros_like(u), np.zeros_like(u)

        p = self.power
        phi, phi1, phi2 = self.chain.phi(u)
        gap = phi - self.anchor_phi
        size = np.abs(gap)
        first = p * size ** (p - 1) * np.sign(gap)
        # |gap|^{p−2} is unbounded for p < 2; its floor only affects the Newton model
        second = p * (p - 1) * np.maximum(size, 1e-8) ** (p - 2)
        return (
            self.penalty * first * phi1,
            self.penalty * (second * phi1**2 + first * phi2),
        )

    def gradient(self, u: FloatArray) -> FloatArray:
        """Nodal gradient of the energy: ``2ε(Ku)/w + W′(u)/ε`` plus the penalty."""
        _, dw, _ = self.chain.well.evaluate(u)
        return (
            2 * self.eps * (self.stiffness @ u) / self.weights
            + dw / self.eps
            + self.penalty_terms(u)[0]
        )

    def multiplier(self, u: FloatArray) -> float:
        _, v1, _ = self.chain.vee(u)
        return float(
            np.sum(self.weights * v1 * self.gradient(u)) / np.sum(self.weights * v1**2)
        )

    def residual(self, u: FloatArray, lam: float) -> FloatArray:
        _, v1, _ = self.chain.vee(u)
        return self.eps * (self.gradient(u) - lam * v1)

    def el_residual(self, u: FloatArray, lam: float) -> float:
        return float(np.max(np.abs(self.residual(u, lam))))

    def newton_system(
        self, u: FloatArray, lam: float
    ) -> tuple[sparse.csc_matrix, FloatArray]:
        _, _, d2w = self.chain.well.evaluate(u)
        _, v1, v2 = self.chain.vee(u)
        w = self.weights
        diagonal = w * (d2w / self.eps - lam * v2 + self.penalty_terms(u)[1])
        hessian = 2 * self.eps * self.stiffness + sparse.diags(diagonal)
        border = sparse.csr_matrix((w * v1)[:, None])
        matrix = sparse.bmat([[hessian, -border], [border.T, None]], format="csc")
        rhs = np.concatenate(
            [w * (self.gradient(u) - lam * v1), [self.mass(u) - self.target_mass]]
        )
        return matrix, rhs

    def err_field(self, u: FloatArray) -> tuple[FloatArray, FloatArray]:
        """
        Return ``(mask, Err)`` with ``−2ε²Δu = εu(1 − u)Err − W′(u)`` on masked nodes.

        The mask drops nodes where ``u(1 − u)`` is lost to rounding.
        """
        _, dw, _ = self.chain.well.evaluate(u)
        laplacian_term = 2 * self.eps**2 * (self.stiffness @ u) / self.weights
        mask = (u > 1e-10) & (u < 1 - 1e-10)
        err = (laplacian_term[mask] + dw[mask]) / (self.eps * u[mask] * (1 - u[mask]))
        return mask, err


def _project_mass(functional: _Functional, values: FloatArray) -> FloatArray:
    u = RadialFunction(functional.grid, values)
    target = functional.target_mass
    return restore_mass(u, functional.chain, functional.eps, target).values


def _flow(
    functional: _Functional, values: FloatArray, options: SolverOptions
) -> tuple[FloatArray, list[float], int]:
    """
    Projected semi-implicit L² gradient flow.

    Diffusion is implicit, the reaction and the multiplier explicit. A step that
    raises the energy is rejected and retried with half the time step.
    """
    chain, eps, w = functional.chain, functional.eps, functional.weights
    curvature = float(np.max(np.abs(chain.well.evaluate(np.linspace(0, 1, 257))[2])))
    dt = options.flow_step * eps / curvature
    min_dt = dt * 1e-10
    solve: Callable[[FloatArray], FloatArray] | None = None
    solve_dt = math.nan
    current = functional.energy(values)
    history = [current]
    iterations = 0
    while iterations < options.max_flow_iters:
        lam = functional.multiplier(values)
        residual = functional.el_residual(values, lam)
        if residual < options.flow_tol:
            break

        if solve is None or solve_dt != dt:
            matrix = sparse.diags(w / dt) + 2 * eps * functional.stiffness
            solve = sparse_linalg.factorized(matrix.tocsc())
            solve_dt = dt

        _, dw, _ = chain.well.evaluate(values)
        _, v1, _ = chain.vee(values)
        force = -dw / eps + lam * v1 - functional.penalty_terms(values)[0]
        candidate = np.clip(solve(w * (values / dt + force)), 0.0, 1.0)
        candidate = _project_mass(functional, candidate)
        trial = functional.energy(candidate)
        iterations += 1
        if trial > current:
            dt /= 2
            logger.debug("flow step rejected, dt halved to %.3g", dt)
            if dt < min_dt:
                break

            continue

        values, current = candidate, trial
        history.append(current)
        logger.debug(
            "flow iteration %d: energy %.15g residual %.3g", iterations, trial, residual
        )

    return values, history, iterations


def _newton(
    functional: _Functional, values: FloatArray, lam: float, options: SolverOptions
) -> tuple[FloatArray, float, int, bool]:
    def merit(u: FloatArray, multiplier: float) -> float:
        mass_error = abs(functional.mass(u) - functional.target_mass)
        return max(functional.el_residual(u, multiplier), mass_error)

    current = merit(values, lam)
    iteration = 0
    while iteration < options.max_newton_iters:
        iteration += 1
        matrix, rhs = functional.newton_system(values, lam)
        step = sparse_linalg.spsolve(matrix, -rhs)
        damping = 1.0
        while damping > 1e-6:
            trial_u = np.clip(values + damping * step[:-1], 0.0, 1.0)
            trial_lam = lam + damping * step[-1]
            trial = merit(trial_u, trial_lam)
            if trial < current or trial < options.tol:
                break

            damping /= 2
        else:
            logger.debug("Newton line search stalled at merit %.3g", current)
            break

        values, lam, current = trial_u, trial_lam, trial
        logger.debug(
            "Newton iteration %d: merit %.3g (damping %g)", iteration, current, damping
        )
        if current < options.tol:
            return values, lam, iteration, True

    if current <= options.stall_tol:
        logger.info(
            "Newton stagnated at merit %.3g, accepted below %.3g",
            current,
            options.stall_tol,
        )
        return values, lam, iteration, True

    return values, lam, iteration, False


def _solve(
    functional: _Functional, initial: FloatArray, options: SolverOptions
) -> MinimizerResult:
    values = _project_mass(functional, np.clip(initial, 0.0, 1.0))
    values, history, flow_iterations = _flow(functional, values, options)
    lam = functional.multiplier(values)
    values, lam, newton_iterations, converged = _newton(
        functional, values, lam, options
    )
    u = RadialFunction(functional.grid, values)
    report = energy(u, functional.chain, functional.eps)
    err_field = err_sup = None
    penalty = 0.0
    if functional.anchor_phi is not None:
        _, err_field = functional.err_field(values)
        err_sup = float(np.max(np.abs(err_field))) if err_field.size else 0.0
        penalty = functional.energy(values) - report.total

    result = MinimizerResult(
        eps=functional.eps,
        u=u,
        lam=lam,
        psi=report.total,
        el_residual=functional.el_residual(values, lam),
        iterations=flow_iterations + newton_iterations,
        converged=converged,
        target_mass=functional.target_mass,
        mass_error=abs(functional.mass(values) - functional.target_mass),
        energy_history=tuple(history),
        err_field=err_field,
        err_sup=err_sup,
        penalty=penalty,
    )
    if not converged:
        raise NoConvergence(
            f"no convergence at ε = {functional.eps} "
            f"(residual {result.el_residual:.3g} after {result.iterations} iterations)",
            result,
        )

    logger.info(
        "ε = %g: ψ = %.12g, λ = %.12g, residual %.2g",
        functional.eps,
        result.psi,
        result.lam,
        result.el_residual,
    )
    return result


def minimize(
    chain: PotentialChain,
    profile: Profile,
    eps: float,
    grid: RadialGrid,
    options: SolverOptions | None = None,
    *,
    initial: RadialFunction | None = None,
    target_mass: float = 1.0,
    constants: ProfileConstants | None = None,
) -> MinimizerResult:
    """
    Minimize the Allen–Cahn energy among radial fields of the given V-mass.

    A projected gradient flow started from the mass-normalized ansatz (or from
    ``initial``) is followed by a damped Newton polish of the Euler–Lagrange system
    bordered by the mass constraint.

    :raises NoConvergence: if the residual does not reach ``options.tol``; the
        partial result is attached as ``.result``
    :raises RegimeViolation: if ε is beyond what the grid resolves

    """
    options = options or SolverOptions()
    ansatz = solve_tau_eps(
        chain, profile, eps, grid, constants=constants, target_mass=target_mass
    )
    start = initial.values if initial is not None else ansatz.field.values
    functional = _Functional(chain, eps, grid, target_mass)
    return _solve(functional, start, options)


def lambda_from_formula(result: MinimizerResult, chain: PotentialChain) -> float:
    """
    Recover the multiplier from the energy split alone.

    For unit mass this is ``((n−1)/n)ψ + (1/n)((1/ε)∫W(u) − ε∫|∇u|²)``; for a general
    target mass m the same dilation argument gives ``(∫W(u)/ε + ((n−2)/n)ε∫|∇u|²)/m``.
    """
    n = result.u.grid.dim
    report = energy(result.u, chain, result.eps)
    return (report.potential + (n - 2) / n * report.dirichlet) / result.target_mass


def solve_penalized(
    chain: PotentialChain,
    eps: float,
    a: float,
    v: RadialFunction,
    grid: RadialGrid | None = None,
    options: SolverOptions | None = None,
    *,
    initial: RadialFunction | None = None,
) -> MinimizerResult:
    """
    Minimize ``𝒜𝒞_ε(w) + a·d_Φ(w, v)`` under unit V-mass.

    The result carries the discrete ``Err_ε`` field defined by
    ``−2ε²Δw = εw(1 − w)Err_ε − W′(w)`` and its sup norm.
    """
    if a <= 0:
        raise ValueError("the penalty weight must be positive")

    grid = grid or v.grid
    if not grid.same_as(v.grid):
        v = resample(v, grid)

    functional = _Functional(chain, eps, grid, 1.0, penalty=a, anchor=v)
    if abs(functional.mass(v.values) - 1) > 1e-6:
        raise ValueError("the anchor field must have unit mass")

    start = initial.values if initial is not None else v.values
    result = _solve(functional, start, options or SolverOptions())
    logger.info(
        "penalized solve: a = %g, d_Φ = %.3g, sup|Err| = %.4g",
        a,
        d_phi(result.u, v, chain),
        result.err_sup,
    )
    return result


class ShotOutcome(NamedTuple):
    #: ``"overshoot"``: u reached 0 while decreasing, or was still near 1 at ``r_max``;
    #: ``"undershoot"``: u turned back up before reaching 0
    kind: str
    radius: float
    gap: float
    solution: Any


def _forcing(
    chain: PotentialChain, sigma: float, ell: float
) -> Callable[[float], float]:
    def forcing(v: float) -> float:
        _, dw, _ = chain.well.reflected(v)
        _, v1, _ = chain.vee_reflected(v)
        return float(ell * v1[0] / (2 * sigma) - dw[0] / (2 * sigma**2))

    return forcing


def shoot(
    chain: PotentialChain, sigma: float, ell: float, gap: float, r_max: float
) -> ShotOutcome:
    """
    Integrate the radial critical point equation from ``u(0) = 1 − gap``.

    The equation ``−2σ²(u″ + (n−1)u′/r) = σℓV′(u) − W′(u)`` is integrated for
    ``v = 1 − u`` so that gaps far below the double precision spacing at 1 are
    represented exactly. The regular singular point is left with the series
    ``v = gap + f r²/(2n)``.
    """
    n = chain.dim
    forcing = _forcing(chain, sigma, ell)

    def rhs(r: float, y: FloatArray) -> list[float]:
        return [y[1], forcing(min(max(y[0], 0.0), 1.0)) - (n - 1) * y[1] / r]

    def crossed(_r: float, y: FloatArray) -> float:
        return y[0] - 1

    def turned(_r: float, y: FloatArray) -> float:
        return y[1]

    crossed.terminal = True  # type: ignore[attr-defined]
    crossed.direction = 1  # type: ignore[attr-defined]
    turned.terminal = True  # type: ignore[attr-defined]
    turned.direction = -1  # type: ignore[attr-defined]

    r0 = 1e-4 * sigma
    f0 = forcing(gap)
    solution = integrate.solve_ivp(
        rhs,
        (r0, r_max),
        [gap + f0 * r0**2 / (2 * n), f0 * r0 / n],
        method="DOP853",
        events=(crossed, turned),
        dense_output=True,
        rtol=1e-11,
        atol=1e-300,
    )
    if solution.t_events[1].size:
        return ShotOutcome("undershoot", float(solution.t_events[1][0]), gap, solution)
    elif solution.t_events[0].size:
        return ShotOutcome("overshoot", float(solution.t_events[0][0]), gap, solution)

    return ShotOutcome("overshoot", r_max, gap, solution)


def solve_critical_point(
    chain: PotentialChain,
    sigma: float,
    ell: float,
    grid: RadialGrid,
    *,
    delta0: float | None = None,
    cutoff: float = 1e-6,
) -> RadialFunction:
    """
    Find the radial decreasing critical point with ``u → 0`` by shooting.

    ``log(1 − u(0))`` is bisected over ``[log 1e−300, log δ₀]``: smaller gaps
    overshoot, larger gaps undershoot. The separatrix trajectory is sampled on
    ``grid`` until u drops below ``cutoff`` and continued with the decay rate
    ``√(W″(0)/2)/σ`` of the linearization at 0.

    :raises NoDecayingSolution: if ``σℓ ≤ 0``, if the bracket does not straddle the
        separatrix, or if the transition happens beyond ``grid.r_max``

    """
    if sigma <= 0 or sigma * ell <= 0:
        raise NoDecayingSolution(f"no decaying solution for σℓ = {sigma * ell:g} ≤ 0")

    delta0 = chain.delta0_estimate if delta0 is None else delta0
    r_max = grid.r_max
    lo, hi = math.log(1e-300), math.log(delta0)
    low = shoot(chain, sigma, ell, math.exp(lo), r_max)
    high = shoot(chain, sigma, ell, math.exp(hi), r_max)
    if low.kind != "overshoot" or high.kind != "undershoot":
        raise NoDecayingSolution(
            f"shooting bracket [1e-300, {delta0:.3g}] does not contain the separatrix "
            f"({low.kind}, {high.kind})"
        )

    bisections = 0
    while hi - lo > 1e-15 * max(1.0, abs(lo)) and bisections < 200:
        mid = (lo + hi) / 2
        outcome = shoot(chain, sigma, ell, math.exp(mid), r_max)
        if outcome.kind == "overshoot":
            lo, low = mid, outcome
        else:
            hi = mid

        bisections += 1

    logger.debug(
        "separatrix gap 1 − u(0) = %.6g after %d bisections", low.gap, bisections
    )
    if low.radius >= r_max:
        raise NoDecayingSolution(f"the transition lies beyond r_max = {r_max:g}")

    r = grid.r
    start = low.solution.t[0]
    reach = min(low.radius, float(low.solution.t[-1]))
    values = np.zeros_like(r)
    values[r < start] = 1 - low.gap
    inside = (r >= start) & (r <= reach)
    values[inside] = 1 - low.solution.sol(r[inside])[0]
    below = np.flatnonzero(inside & (values < cutoff))
    cut = below[0] if below.size else np.flatnonzero(inside)[-1]
    rate = math.sqrt(chain.well.evaluate(0.0)[2][0] / 2) / sigma
    values[cut:] = values[cut] * np.exp(-rate * (r[cut:] - r[cut]))
    return RadialFunction(grid, values)


@dataclass(frozen=True)
class PsiRow:
    sigma: float
    mass: float
    eps: float
    psi: float
    lam: float
    #: ``"direct"`` or ``"scaled"``
    provenance: str


@dataclass(frozen=True)
class PsiTable:
    dim: int
    rows: tuple[PsiRow, ...]

    def select(self, provenance: str) -> dict[tuple[float, float], PsiRow]:
        return {
            (row.sigma, row.mass): row
            for row in self.rows
            if row.provenance == provenance
        }

    def scaling_discrepancy(self) -> float:
        """Largest relative difference of Ψ between direct and scaled rows."""
        direct, scaled = self.select("direct"), self.select("scaled")
        return max(
            (
                abs(direct[key].psi - row.psi) / row.psi
                for key, row in scaled.items()
                if key in direct
            ),
            default=0.0,
        )

    def _columns(
        self, provenance: str
    ) -> tuple[list[float], list[float], FloatArray, FloatArray]:
        rows = self.select(provenance)
        sigmas = sorted({key[0] for key in rows})
        masses = sorted({key[1] for key in rows})
        psi = np.array([[rows[(s, m)].psi for m in masses] for s in sigmas])
        lam = np.array([[rows[(s, m)].lam for m in masses] for s in sigmas])
        return sigmas, masses, psi, lam

    def checks(self) -> dict[str, bool]:
        """Shape checks of the scaled rows, including ``∂Ψ/∂m = Λ``."""
        sigmas, masses, psi, lam = self._columns("scaled")
        checks = {
            "scaling_identity": self.scaling_discrepancy() <= 1e-6,
            "lambda_decreasing_in_m": bool(np.all(np.diff(lam, axis=1) < 0)),
            "psi_increasing_in_m": bool(np.all(np.diff(psi, axis=1) > 0)),
            "psi_increasing_in_sigma": bool(np.all(np.diff(psi, axis=0) > 0)),
        }
        if len(masses) >= 3:
            m = np.asarray(masses)
            slopes = np.diff(psi, axis=1) / np.diff(m)
            concave = np.all(np.diff(slopes, axis=1) <= 1e-8)
            checks["psi_concave_in_m"] = bool(concave)
            checks["lambda_is_dpsi_dm"] = self.derivative_error() <= 0.01

        return checks

    def derivative_error(self) -> float:
        """Relative error of ``Λ`` against central differences of ``Ψ`` in m."""
        _, masses, psi, lam = self._columns("scaled")
        if len(masses) < 3:
            return math.nan

        dpsi = np.gradient(psi, np.asarray(masses), axis=1, edge_order=2)
        return float(np.max(np.abs(dpsi[:, 1:-1] - lam[:, 1:-1]) / lam[:, 1:-1]))


def psi_surface(
    chain: PotentialChain,
    profile: Profile,
    sigmas: Sequence[float],
    masses: Sequence[float],
    *,
    grid_options: GridOptions | None = None,
    options: SolverOptions | None = None,
    constants: ProfileConstants | None = None,
    map_fn: Callable[..., Iterable[Any]] = map,
) -> PsiTable:
    """
    Tabulate ``Ψ(σ, m)`` and ``Λ(σ, m)`` directly and by scaling.

    Scaled rows use ``Ψ = m^{(n−1)/n}ψ(σ/m^{1/n})`` and
    ``Λ = m^{−1/n}λ(σ/m^{1/n})`` from unit-mass solves. Direct rows minimize at
    ε = σ with target mass m on the unit-mass grid dilated by ``m^{1/n}``.

    :param map_fn: mapping used to run the solves (e.g. ``Executor.map``)

    """
    n = chain.dim
    pairs = [(float(s), float(m)) for s in sigmas for m in masses]
    scales = {pair: pair[1] ** (1 / n) for pair in pairs}
    unit_eps = sorted({pair[0] / scales[pair] for pair in pairs})

    def unit_solve(eps: float) -> MinimizerResult:
        grid = make_grid(n, eps, grid_options)
        return minimize(chain, profile, eps, grid, options, constants=constants)

    def direct_solve(pair: tuple[float, float]) -> MinimizerResult:
        sigma, m = pair
        grid = make_grid(n, sigma / scales[pair], grid_options).scaled(scales[pair])
        return minimize(
            chain, profile, sigma, grid, options, target_mass=m, constants=constants
        )

    unit = dict(zip(unit_eps, map_fn(unit_solve, unit_eps)))
    direct = dict(zip(pairs, map_fn(direct_solve, pairs)))
    rows: list[PsiRow] = []
    for pair in pairs:
        sigma, m = pair
        eps = sigma / scales[pair]
        result = unit[eps]
        psi = m ** ((n - 1) / n) * result.psi
        rows.append(
            PsiRow(sigma, m, eps, psi, result.lam / scales[pair], "scaled")
        )
        rows.append(
            PsiRow(sigma, m, eps, direct[pair].psi, direct[pair].lam, "direct")
        )

    return PsiTable(n, tuple(rows))


def invert_lambda(
    chain: PotentialChain,
    profile: Profile,
    sigma: float,
    ell: float,
    *,
    bracket: tuple[float, float] = (0.25, 4.0),
    grid_options: GridOptions | None = None,
    options: SolverOptions | None = None,
    constants: ProfileConstants | None = None,
) -> float:
    """
    Return the mass m with ``Λ(σ, m) = ℓ``.

    ``m ↦ Λ(σ, m)`` is strictly decreasing, so the root is bracketed in ``log m``.

    :raises BracketFailure: if ℓ is not attained inside ``bracket``

    """
    n = chain.dim

    def excess(log_mass: float) -> float:
        scale = math.exp(log_mass / n)
        eps = sigma / scale
        grid = make_grid(n, eps, grid_options)
        result = minimize(chain, profile, eps, grid, options, constants=constants)
        return result.lam / scale - ell

    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    f_lo, f_hi = excess(lo), excess(hi)
    if f_lo * f_hi > 0:
        raise BracketFailure(f"Λ(σ, ·) does not attain {ell:g} on masses {bracket}")

    return math.exp(optimize.brentq(excess, lo, hi, xtol=1e-10))


class PsiIdentity(NamedTuple):
    eps: float
    psi: float
    lam: float
    psi_prime: float
    lhs: float
    rhs: float
    relative_error: float


def psi_identity(
    chain: PotentialChain,
    profile: Profile,
    eps: float,
    step: float | None = None,
    *,
    grid_options: GridOptions | None = None,
    options: SolverOptions | None = None,
    constants: ProfileConstants | None = None,
) -> PsiIdentity:
    """
    Check ``εψ′(ε) = (n−1)ψ(ε) − nλ(ε)`` with ψ′ from central differences.

    All three solves share the grid built for the smallest ε.
    """
    n = chain.dim
    step = 0.05 * eps if step is None else step
    grid = make_grid(n, eps - step, grid_options)
    results = [
        minimize(chain, profile, e, grid, options, constants=constants)
        for e in (eps - step, eps, eps + step)
    ]
    psi_prime = (results[2].psi - results[0].psi) / (2 * step)
    lhs = eps * psi_prime
    rhs = (n - 1) * results[1].psi - n * results[1].lam
    center = results[1]
    return PsiIdentity(
        eps, center.psi, center.lam, psi_prime, lhs, rhs, abs(lhs - rhs) / abs(rhs)
    )
