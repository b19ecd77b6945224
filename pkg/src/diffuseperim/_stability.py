from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np
from scipy import linalg, optimize, sparse

from ._ansatz import solve_tau_eps
from ._exceptions import (
    DiffusePerimError,
    HypothesisViolation,
    NoBeta,
    NoDecayingSolution,
    RegimeViolation,
)
from ._minimizer import MinimizerResult, solve_critical_point
from ._potentials import PotentialChain
from ._profile import Profile
from ._radial import (
    GridOptions,
    RadialFunction,
    RadialGrid,
    d_phi,
    dirichlet_integral,
    energy,
    lp_integral,
    make_grid,
    rearrange,
    resample,
    restore_mass,
    smoothed_indicator,
    total_variation,
)
from ._utils import FloatArray, ball_radius

logger: logging.Logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """
    Lowest eigenpairs of a quadratic form.

    For the one-dimensional operator the eigenvalues are those of ``−h″ + ½W″(η)h``
    (the form Q divided by its leading coefficient 2); ``raw_eigenvalues`` holds
    the eigenvalues of Q itself. For the second variation both coincide.
    """

    eigenvalues: FloatArray
    eigenvectors: FloatArray = field(repr=False)
    constraint_applied: bool
    discretization: dict[str, Any]
    raw_eigenvalues: FloatArray = field(repr=False)
    #: bottom of the essential spectrum, in the normalization of ``eigenvalues``
    essential_edge: float | None = None
    unconstrained_lowest: float | None = None


@dataclass(frozen=True)
class StabilityReport:
    deficit: float
    asymmetry: float
    #: ``∫ε|∇h|² + h²/ε`` for ``h = u − u_ε``
    p_norm: float
    #: ``deficit / p_norm``, or ``None`` when ``h = 0``
    fuglede_ratio: float | None
    l2_squared: float
    sup_norm: float
    #: ``∫|∇(h²)|``
    gradient_of_square: float
    #: ``(∫|h|^{2n/(n−1)})^{(n−1)/n}``
    sobolev_norm: float


class FugledeSummary(NamedTuple):
    min_ratio: float
    count: int
    skipped: int
    #: smallest C with ``∫|∇(h²)| ≤ C·δ`` on the batch
    gradient_constant: float
    #: smallest C with ``(∫|h|^{2n/(n−1)})^{(n−1)/n} ≤ C∫|∇(h²)|`` on the batch
    sobolev_constant: float


class QuantitativeSummary(NamedTuple):
    #: ``sup α/√δ`` over competitors with a positive deficit
    sup_ratio: float
    max_asymmetry: float
    asymmetry_bound: float
    bins: tuple[tuple[float, float], ...]
    bins_monotone: bool


class SymmetrizationGap(NamedTuple):
    lhs: float
    #: ``(∫W(u))^{1/2}(∫|∇u|² − ∫|∇u*|²)^{1/2}``, the bound without its constant
    base: float
    dirichlet_gap: float
    energy: float
    rearranged: RadialFunction


class PSReport(NamedTuple):
    passed: bool
    beta: float
    #: smallest value of ``f(t) − f′(t)(t − β)`` on ``(β, 1) ∩ {f > 0}``
    margin: float
    #: smallest value of ``(−W′ − nW/((n−1)²Φ^{(n−2)/(n−1)}))/(1 − t)``
    #: on ``(1 − δ₀, 1)``
    fine_slack: float
    #: whether ``fine_slack`` is nonnegative; informational, not part of ``passed``
    fine_holds: bool
    beta_near_well: bool
    conditions: dict[str, bool]
    reason: str


# One-dimensional operator


def _sinc_laplacian(count: int, spacing: float) -> FloatArray:
    """Fourier grid (sinc collocation) matrix of ``−d²/ds²`` on a uniform grid."""
    offset = np.arange(count, dtype=float)
    column = np.empty(count)
    column[0] = np.pi**2 / 3
    column[1:] = 2 * (-1.0) ** offset[1:] / offset[1:] ** 2
    return linalg.toeplitz(column) / spacing**2


def _one_d_operator(
    chain: PotentialChain, profile: Profile, spacing: float
) -> tuple[FloatArray, FloatArray]:
    half_width = profile.half_width
    count = 2 * int(math.ceil(half_width / spacing)) + 1
    s = np.linspace(-half_width, half_width, count)
    _, _, d2w = chain.well.evaluate(profile(s))
    return s, _sinc_laplacian(count, s[1] - s[0]) + np.diag(d2w / 2)


def one_d_spectrum(
    chain: PotentialChain, profile: Profile, k: int = 4, *, spacing: float = 0.04
) -> SpectrumReport:
    """
    Lowest ``k`` eigenpairs of the linearization of the profile equation.

    The kernel is spanned by η′; eigenvectors are normalized in the discrete L² norm.
    """
    if k < 2:
        raise ValueError("at least two eigenpairs must be requested")

    s, operator = _one_d_operator(chain, profile, spacing)
    values, vectors = linalg.eigh(operator, subset_by_index=[0, k - 1])
    h = s[1] - s[0]
    vectors = vectors / math.sqrt(h)
    _, _, d2w = chain.well.evaluate(np.array([0.0, 1.0]))
    # the potential ½W″(η) tends to ½W″ at the wells as s → ±∞
    edge = 0.5 * float(min(d2w))
    logger.debug("one-dimensional spectrum: %s", values)
    return SpectrumReport(
        eigenvalues=values,
        eigenvectors=vectors,
        constraint_applied=False,
        discretization={
            "kind": "sinc",
            "points": s.size,
            "spacing": h,
            "half_width": s[-1],
        },
        raw_eigenvalues=2 * values,
        essential_edge=edge,
    )


def kernel_residual(
    chain: PotentialChain, profile: Profile, spacing: float = 0.04
) -> float:
    """Sup norm of the one-dimensional operator applied to η′, relative to sup|η′|."""
    s, operator = _one_d_operator(chain, profile, spacing)
    eta1 = profile.derivative(s)
    return float(np.max(np.abs(operator @ eta1)) / np.max(np.abs(eta1)))


def kernel_alignment(report: SpectrumReport, profile: Profile) -> float:
    """Cosine similarity of the lowest eigenvector with η′."""
    half_width = report.discretization["half_width"]
    s = np.linspace(-half_width, half_width, report.discretization["points"])
    eta1 = profile.derivative(s)
    vector = report.eigenvectors[:, 0]
    return float(abs(vector @ eta1) / (np.linalg.norm(vector) * np.linalg.norm(eta1)))


# Second variation


def _second_variation_grid(result: MinimizerResult, nodes_per_eps: int) -> RadialGrid:
    n = result.u.grid.dim
    options = GridOptions(points_per_eps=nodes_per_eps)
    return make_grid(
        n, result.eps, options, radius=ball_radius(n, result.target_mass)
    )


def second_variation_matrices(
    chain: PotentialChain, result: MinimizerResult, grid: RadialGrid
) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    """
    Dense matrices of ``Q_ε`` and of the ``P_ε`` inner product, the constraint vector
    ``∫V′(u_ε)h`` and the sampled minimizer, all on ``grid``.
    """
    eps, lam = result.eps, result.lam
    u = resample(result.u, grid).values
    _, _, d2w = chain.well.evaluate(u)
    _, v1, v2 = chain.vee(u)
    stiffness = grid.stiffness.toarray()
    w = grid.weights
    form = 2 * eps * stiffness + np.diag(w * (d2w / eps - lam * v2))
    inner = eps * stiffness + np.diag(w / eps)
    return form, inner, w * v1, u


def second_variation_spectrum(
    chain: PotentialChain,
    result: MinimizerResult,
    k: int = 4,
    *,
    nodes_per_eps: int = 16,
) -> SpectrumReport:
    """
    Lowest eigenvalues of ``Q_ε`` relative to ``P_ε`` on ``{∫V′(u_ε)h = 0}``.

    The minimizer is resampled on a coarser grid with ``nodes_per_eps`` nodes per ε
    in the interface layer; the constraint is imposed exactly by restricting both
    forms to an orthonormal basis of its null space.
    """
    grid = _second_variation_grid(result, nodes_per_eps)
    form, inner, constraint, _ = second_variation_matrices(chain, result, grid)
    basis = linalg.null_space(constraint[None, :])
    values, reduced = linalg.eigh(
        basis.T @ form @ basis, basis.T @ inner @ basis, subset_by_index=[0, k - 1]
    )
    unconstrained = linalg.eigh(form, inner, eigvals_only=True, subset_by_index=[0, 0])
    logger.info(
        "second variation at ε = %g: constrained %.6g, unconstrained %.6g",
        result.eps,
        values[0],
        unconstrained[0],
    )
    return SpectrumReport(
        eigenvalues=values,
        eigenvectors=basis @ reduced,
        constraint_applied=True,
        discretization={
            "kind": "p1",
            "points": grid.size,
            "nodes_per_eps": nodes_per_eps,
        },
        raw_eigenvalues=values,
        unconstrained_lowest=float(unconstrained[0]),
    )


# Competitors


def _bump_field(
    rng: np.random.Generator, r: FloatArray, radius: float, eps: float
) -> FloatArray:
    """Random smooth bumps in the layer ``|r − R| ≤ 5ε`` plus a far-field tail."""
    h = np.zeros_like(r)
    for _ in range(int(rng.integers(1, 5))):
        center = radius + eps * rng.uniform(-5.0, 5.0)
        width = eps * rng.uniform(0.5, 3.0)
        h += rng.normal() * np.exp(-(((r - center) / width) ** 2))

    side = 1.0 if rng.random() < 0.5 else -1.0
    tail = np.exp(-np.abs(r - radius) / (4 * eps)) * (side * (r - radius) > 0)
    h += 0.2 * rng.normal() * tail
    return h / max(float(np.max(np.abs(h))), 1e-300)


def random_perturbations(
    chain: PotentialChain,
    result: MinimizerResult,
    count: int,
    rng: np.random.Generator,
    *,
    delta0: float | None = None,
    l2_bound: float = 1.0,
) -> list[RadialFunction]:
    """
    Draw admissible radial perturbations of the minimizer with restored mass.

    Amplitudes are drawn below δ₀ and halved until ``∫h² ≤ l2_bound·ε`` and
    ``sup|h| ≤ δ₀`` hold after the mass has been restored.
    """
    delta0 = chain.delta0_estimate if delta0 is None else delta0
    base, eps = result.u, result.eps
    radius = float(np.interp(0.5, base.values[::-1], base.r[::-1]))
    perturbations = []
    for _ in range(count):
        shape = _bump_field(rng, base.r, radius, eps)
        amplitude = delta0 * rng.uniform(0.01, 0.5)
        while True:
            candidate = RadialFunction(base.grid, base.values + amplitude * shape)
            candidate = restore_mass(candidate, chain, eps, result.target_mass)
            h = candidate.values - base.values
            if (
                base.grid.integrate(h**2) <= l2_bound * eps
                and np.max(np.abs(h)) <= delta0
            ) or amplitude < 1e-12:
                break

            amplitude /= 2

        perturbations.append(candidate)

    return perturbations


def ansatz_competitors(
    chain: PotentialChain,
    profile: Profile,
    result: MinimizerResult,
    factors: Sequence[float] = (1.5, 2.0, 3.0),
    widths: Sequence[float] = (0.5, 1.0, 2.0, 4.0),
) -> list[RadialFunction]:
    """
    Radial decreasing competitors far from the minimizer: ansatz fields with a
    stretched ε and smoothed indicators, all with restored mass.
    """
    grid, eps, target = result.u.grid, result.eps, result.target_mass
    competitors = []
    for factor in factors:
        try:
            stretched = solve_tau_eps(
                chain, profile, eps * factor, grid, target_mass=target
            )
        except RegimeViolation:
            continue

        competitors.append(restore_mass(stretched.field, chain, eps, target))

    radius = ball_radius(grid.dim, target)
    for width in widths:
        indicator = smoothed_indicator(grid, radius, width * eps)
        competitors.append(restore_mass(indicator, chain, eps, target))

    return competitors


def random_radial_fields(
    chain: PotentialChain,
    grid: RadialGrid,
    eps: float,
    count: int,
    rng: np.random.Generator,
) -> list[RadialFunction]:
    """
    Unit-mass radial fields that are not monotone: a smoothed indicator with a
    random radius and width, plus bumps on both sides of the interface.
    """
    radius = ball_radius(grid.dim)
    fields = []
    for _ in range(count):
        base = smoothed_indicator(
            grid, radius * rng.uniform(0.7, 1.3), eps * rng.uniform(0.5, 3.0)
        ).values
        for _ in range(int(rng.integers(1, 4))):
            center = radius * rng.uniform(0.2, 1.8)
            width = eps * rng.uniform(0.5, 4.0)
            bump = np.exp(-(((grid.r - center) / width) ** 2))
            base = base + rng.uniform(-0.5, 0.5) * bump

        fields.append(restore_mass(RadialFunction(grid, base), chain, eps))

    return fields


# Deficit and asymmetry


def _report(
    chain: PotentialChain, result: MinimizerResult, u: RadialFunction
) -> StabilityReport:
    grid, eps = result.u.grid, result.eps
    h = u.values - result.u.values
    n = grid.dim
    deficit = energy(u, chain, eps).total - result.psi
    p_norm = eps * float(h @ (grid.stiffness @ h)) + grid.integrate(h**2) / eps
    return StabilityReport(
        deficit=deficit,
        asymmetry=d_phi(u, result.u, chain),
        p_norm=p_norm,
        fuglede_ratio=deficit / p_norm if p_norm > 0 else None,
        l2_squared=grid.integrate(h**2),
        sup_norm=float(np.max(np.abs(h))),
        gradient_of_square=total_variation(grid, h**2),
        sobolev_norm=lp_integral(grid, h, 2 * n / (n - 1)) ** ((n - 1) / n),
    )


def fuglede_check(
    chain: PotentialChain,
    result: MinimizerResult,
    perturbations: Iterable[RadialFunction],
    *,
    delta0: float | None = None,
    l2_bound: float = 1.0,
) -> list[StabilityReport]:
    """
    Evaluate ``δ_ε(u)/(∫ε|∇h|² + h²/ε)`` for perturbations ``u = u_ε + h``.

    :raises HypothesisViolation: if ``∫h² > l2_bound·ε`` or ``sup|h| > δ₀``

    """
    delta0 = chain.delta0_estimate if delta0 is None else delta0
    reports = []
    for u in perturbations:
        report = _report(chain, result, u)
        if report.l2_squared > l2_bound * result.eps:
            raise HypothesisViolation(
                f"∫h² = {report.l2_squared:.3g} exceeds "
                f"{l2_bound:g}·ε = {l2_bound * result.eps:.3g}"
            )
        elif report.sup_norm > delta0:
            raise HypothesisViolation(
                f"sup|h| = {report.sup_norm:.3g} exceeds δ₀ = {delta0:.3g}"
            )

        reports.append(report)

    return reports


def fuglede_summary(reports: Sequence[StabilityReport]) -> FugledeSummary:
    used = [r for r in reports if r.fuglede_ratio is not None]
    positive = [r for r in used if r.deficit > 0 and r.gradient_of_square > 0]
    return FugledeSummary(
        min_ratio=min(
            (r.fuglede_ratio for r in used), default=math.nan  # type: ignore[type-var]
        ),
        count=len(used),
        skipped=len(reports) - len(used),
        gradient_constant=max(
            (r.gradient_of_square / r.deficit for r in positive), default=math.nan
        ),
        sobolev_constant=max(
            (r.sobolev_norm / r.gradient_of_square for r in positive), default=math.nan
        ),
    )


def quantitative_stability(
    chain: PotentialChain,
    result: MinimizerResult,
    competitors: Iterable[RadialFunction],
) -> list[StabilityReport]:
    """Deficits and asymmetries of arbitrary unit-mass competitors."""
    return [_report(chain, result, u) for u in competitors]


def asymmetry_bins(
    reports: Sequence[StabilityReport], count: int = 5
) -> tuple[tuple[tuple[float, float], ...], bool]:
    """
    Largest asymmetry per deficit bin (quantile bins, increasing deficit), and
    whether it is nondecreasing from bin to bin.
    """
    data = sorted((r.deficit, r.asymmetry) for r in reports if r.deficit > 0)
    if not data:
        return (), True

    chunks = np.array_split(np.asarray(data), min(count, len(data)))
    bins = tuple((float(c[-1, 0]), float(np.max(c[:, 1]))) for c in chunks)
    peaks = [b[1] for b in bins]
    return bins, bool(np.all(np.diff(peaks) >= 0))


def quantitative_summary(
    reports: Sequence[StabilityReport], dim: int
) -> QuantitativeSummary:
    positive = [r for r in reports if r.deficit > 0]
    bins, monotone = asymmetry_bins(reports)
    return QuantitativeSummary(
        sup_ratio=max(
            (r.asymmetry / math.sqrt(r.deficit) for r in positive), default=0.0
        ),
        max_asymmetry=max((r.asymmetry for r in reports), default=0.0),
        asymmetry_bound=2 ** (dim / (dim - 1)),
        bins=bins,
        bins_monotone=monotone,
    )


# Rearrangement


def symmetrization_gap(
    chain: PotentialChain, u: RadialFunction, eps: float
) -> SymmetrizationGap:
    """
    Both sides of ``d_Φ(u, u*) ≤ C(∫W(u))^{1/2}(∫|∇u|² − ∫|∇u*|²)^{1/2}``.

    The constant is left out; see :func:`symmetrization_constant`.
    """
    star = rearrange(u, chain)
    gap = dirichlet_integral(u) - dirichlet_integral(star)
    potential = u.grid.integrate(chain.well.w(u.values))
    base = math.sqrt(potential) * math.sqrt(max(gap, 0.0))
    return SymmetrizationGap(
        lhs=d_phi(u, star, chain),
        base=base,
        dirichlet_gap=gap,
        energy=energy(u, chain, eps).total,
        rearranged=star,
    )


def symmetrization_constant(gaps: Iterable[SymmetrizationGap]) -> float:
    """Smallest constant making the symmetrization inequality hold on the batch."""
    return max((g.lhs / g.base for g in gaps if g.base > 0), default=0.0)


def reduction_constant(
    chain: PotentialChain,
    result: MinimizerResult,
    competitors: Iterable[RadialFunction],
) -> float:
    """
    Smallest C with ``α(u) ≤ C(α(u*) + (𝒜𝒞_ε(u)δ_ε(u))^{1/2})`` on the batch.
    """
    constant = 0.0
    for u in competitors:
        own = _report(chain, result, u)
        star = rearrange(u, chain)
        bound = d_phi(star, result.u, chain)
        bound += math.sqrt(max(energy(u, chain, result.eps).total * own.deficit, 0.0))
        if bound > 0:
            constant = max(constant, own.asymmetry / bound)

    return constant


# Peletier–Serrin structure of the critical point equation


def _forcing(
    chain: PotentialChain, sigma: float, ell: float, t: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Return ``F``, ``f = F′`` and ``f′`` for ``F = ℓV/(2σ) − W/(2σ²)``."""
    w, dw, d2w = chain.well.evaluate(t)
    v, v1, v2 = chain.vee(t)
    return (
        ell * v / (2 * sigma) - w / (2 * sigma**2),
        ell * v1 / (2 * sigma) - dw / (2 * sigma**2),
        ell * v2 / (2 * sigma) - d2w / (2 * sigma**2),
    )


def find_beta(
    chain: PotentialChain, sigma: float, ell: float, samples: int = 20001
) -> float:
    """
    Return ``β = inf{t > 0 : F(t) > 0}``.

    :raises NoBeta: if F has no positive value on (0, 1)

    """
    t = np.linspace(0.0, 1.0, samples)[1:]
    values = _forcing(chain, sigma, ell, t)[0]
    positive = np.flatnonzero(values > 0)
    if positive.size == 0:
        raise NoBeta(f"F ≤ 0 on (0, 1) for σ = {sigma:g}, ℓ = {ell:g}")
    elif positive[0] == 0:
        return 0.0

    hi = t[positive[0]]
    lo = t[positive[0] - 1]

    def forcing(x: float) -> float:
        return float(_forcing(chain, sigma, ell, x)[0][0])

    return float(optimize.brentq(forcing, lo, hi, xtol=1e-15))


def verify_ps_condition(
    chain: PotentialChain,
    sigma: float,
    ell: float,
    *,
    delta0: float | None = None,
    samples: int = 20001,
) -> PSReport:
    """
    Check the Peletier–Serrin uniqueness conditions for ``f = ℓV′/(2σ) − W′/(2σ²)``.

    The conditions are (a) f Lipschitz, (b) ``f(t)/t → −W″(0)/(2σ²)``, (c) F takes a
    positive value and (d) ``f′(t)(t − β) ≤ f(t)`` on ``(β, 1) ∩ {f > 0}``. The
    sufficient inequality ``−W′ ≥ nW/((n−1)²Φ^{(n−2)/(n−1)})`` near 1 is reported
    through its smallest slack and ``fine_holds``, which do not affect ``passed``.

    :raises NoBeta: if F has no positive value on (0, 1)

    """
    if sigma <= 0 or sigma * ell <= 0:
        raise NoBeta(f"σℓ = {sigma * ell:g} must be positive")

    n = chain.dim
    delta0 = chain.delta0_estimate if delta0 is None else delta0
    beta = find_beta(chain, sigma, ell, samples)

    t = np.linspace(0.0, 1.0, samples)
    _, f, _ = _forcing(chain, sigma, ell, t)
    lipschitz = bool(np.all(np.isfinite(np.diff(f) / np.diff(t))))

    small = np.geomspace(1e-6, 1e-4, 16)
    _, _, d2w0 = chain.well.evaluate(0.0)
    limit = -float(d2w0[0]) / (2 * sigma**2)
    ratio = _forcing(chain, sigma, ell, small)[1] / small
    decay = limit < 0 and bool(abs(ratio[0] - limit) <= 1e-2 * abs(limit))

    positive_value = bool(_forcing(chain, sigma, ell, np.array([1.0]))[0][0] > 0)

    tail = np.geomspace(1e-3, 1e-10, 64)
    x = np.concatenate([np.linspace(0.0, 1.0, samples)[1:-1], 1 - tail])
    above = beta + (1 - beta) * np.unique(x)
    _, f_above, df_above = _forcing(chain, sigma, ell, above)
    active = f_above > 0
    slack = f_above - df_above * (above - beta)
    margin = float(np.min(slack[active])) if np.any(active) else math.inf
    scale = float(np.max(np.abs(f_above))) or 1.0
    monotone = margin >= -1e-10 * scale

    near = 1 - delta0 * np.concatenate([np.linspace(1.0, 0.0, samples)[:-1], tail])
    w, dw, _ = chain.well.evaluate(near)
    phi = chain.Phi(near)
    fine = (-dw - n / (n - 1) ** 2 * w / phi ** ((n - 2) / (n - 1))) / (1 - near)
    fine_slack = float(np.min(fine))
    fine_holds = bool(fine_slack >= -1e-10 * max(1.0, float(np.max(np.abs(dw)))))

    conditions = {"a": lipschitz, "b": decay, "c": positive_value, "d": monotone}
    failed = [name for name, ok in conditions.items() if not ok]
    reason = "" if not failed else "failed condition(s): " + ", ".join(failed)
    logger.debug("Peletier–Serrin check: β = %.12g, margin %.3g", beta, margin)
    return PSReport(
        passed=not failed,
        beta=beta,
        margin=margin,
        fine_slack=fine_slack,
        fine_holds=fine_holds,
        beta_near_well=bool(1 - delta0 < beta < 1),
        conditions=conditions,
        reason=reason,
    )


def estimate_nu0(
    chain: PotentialChain,
    sigma: float,
    grid: RadialGrid,
    candidates: Sequence[float],
) -> float:
    """
    Largest ``σℓ`` among ``candidates`` for which shooting finds a decaying solution
    and the Peletier–Serrin check passes; 0 if there is none.
    """
    best = 0.0
    for value in sorted(candidates):
        ell = value / sigma
        try:
            report = verify_ps_condition(chain, sigma, ell)
            solve_critical_point(chain, sigma, ell, grid)
        except (NoDecayingSolution, NoBeta):
            break
        except DiffusePerimError as exc:
            logger.debug("ν₀ search stopped at σℓ = %g: %s", value, exc)
            break

        if not report.passed:
            break

        best = value

    return best


def inner_product_matrix(grid: RadialGrid, eps: float) -> sparse.csr_matrix:
    """The ``P_ε`` inner product ``∫ε∇f·∇g + fg/ε`` as a sparse matrix."""
    return (eps * grid.stiffness + sparse.diags(grid.weights / eps)).tocsr()
