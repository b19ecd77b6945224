from __future__ import annotations

import logging
import math
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, NamedTuple

import numpy as np
from scipy import special

from ._ansatz import (
    interface_report,
    resolution_residual,
    solve_tau_eps,
    tau_constant,
    tau_rate,
)
from ._artifacts import PlotSpec, Table, write_artifacts
from ._config import ExperimentConfig
from ._exceptions import DiffusePerimError
from ._minimizer import (
    MinimizerResult,
    invert_lambda,
    lambda_from_formula,
    minimize,
    psi_identity,
    psi_surface,
    solve_critical_point,
)
from ._pool import WorkerPool
from ._potentials import PotentialChain
from ._potentials import chain as make_chain
from ._profile import (
    Profile,
    ProfileConstants,
    compute_constants,
    compute_profile,
    mass_defect,
)
from ._radial import (
    RadialGrid,
    d_phi,
    dilate,
    dirichlet_integral,
    energy,
    make_grid,
    mass,
    quasi_triangle_constant,
    shift_interface,
    smoothed_indicator,
)
from ._stability import (
    ansatz_competitors,
    estimate_nu0,
    fuglede_check,
    fuglede_summary,
    inner_product_matrix,
    kernel_alignment,
    kernel_residual,
    one_d_spectrum,
    quantitative_stability,
    quantitative_summary,
    random_perturbations,
    random_radial_fields,
    reduction_constant,
    second_variation_spectrum,
    symmetrization_constant,
    symmetrization_gap,
    verify_ps_condition,
)
from ._utils import (
    ball_radius,
    first_order_coefficient,
    isoperimetric_constant,
    limiting_multiplier,
    polyfit,
    unit_ball_volume,
)

if sys.version_info < (3, 11):
    from exceptiongroup import ExceptionGroup

logger: logging.Logger = logging.getLogger(__name__)

#: Exit status of ``verify-all`` when an invariant or acceptance check fails
CHECK_FAILED = 2

EXPANSION_EPS = (0.1, 0.05, 0.025, 0.0125)
FUGLEDE_EPS = (0.1, 0.05)
RESOLUTION_EPS = (0.1, 0.05, 0.025)
ATTRACTION_EPS = 0.05

# Independent random streams derived from the configured seed
_STREAMS = {"fuglede": 1, "stability": 2, "rearrangement": 3}


class Session:
    """Objects shared by the steps of one experiment, computed on first use."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.pool = WorkerPool(config.threads)
        self._minimizers: dict[float, MinimizerResult] = {}

    @cached_property
    def chain(self) -> PotentialChain:
        return make_chain(self.config.well.build(), self.config.dim)

    @cached_property
    def profile(self) -> Profile:
        return compute_profile(self.chain)

    @cached_property
    def constants(self) -> ProfileConstants:
        return compute_constants(self.chain, self.profile)

    @property
    def solved(self) -> dict[float, MinimizerResult]:
        return dict(self._minimizers)

    def rng(self, stream: str, index: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, _STREAMS[stream], index])

    def grid(self, eps: float) -> RadialGrid:
        return make_grid(self.config.dim, eps, self.config.grid)

    def minimizers(self, eps_values: Sequence[float]) -> list[MinimizerResult]:
        """Unit-mass minimizers, solved on the worker pool and cached by ε."""
        chain, profile, constants = self.chain, self.profile, self.constants
        solver = self.config.solver
        missing = [
            eps for eps in dict.fromkeys(eps_values) if eps not in self._minimizers
        ]

        def solve(eps: float) -> MinimizerResult:
            grid = self.grid(eps)
            return minimize(chain, profile, eps, grid, solver, constants=constants)

        self._minimizers.update(zip(missing, self.pool.map(solve, missing)))
        return [self._minimizers[eps] for eps in eps_values]


@dataclass
class ExperimentResult:
    kind: str
    table: Table
    report: dict[str, Any]
    plot: PlotSpec | None = None
    attachments: dict[str, Table] = field(default_factory=dict)
    #: descriptions of failed acceptance checks
    failures: list[str] = field(default_factory=list)


class Check(NamedTuple):
    criterion: int
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


def _psi_plot(csv_name: str, columns: tuple[str, ...], session: Session) -> PlotSpec:
    n = session.config.dim
    return PlotSpec(
        csv_name=csv_name,
        columns=columns,
        x="eps",
        ys=("psi",),
        title=f"psi(eps), n = {n}",
        reference=(
            isoperimetric_constant(n),
            first_order_coefficient(n, session.constants.kappa0),
            "2nω^(1/n) + slope·ε",
        ),
    )


def _field_table(result: MinimizerResult) -> Table:
    return Table(
        ("r", "u"),
        list(zip(result.u.r.tolist(), result.u.values.tolist())),
        f"minimizer at eps={result.eps!r}",
    )


def logistic_error(profile: Profile) -> float:
    """Sup distance of η from the closed form ``1/(1 + e^{6s})`` of the quartic well."""
    return float(np.max(np.abs(profile.eta - special.expit(-6 * profile.s_grid))))


def _expansion(
    session: Session, results: Sequence[MinimizerResult]
) -> dict[str, Any]:
    n = session.config.dim
    eps = np.array([r.eps for r in results])
    report: dict[str, Any] = {
        "expected_intercept": isoperimetric_constant(n),
        "expected_slope": first_order_coefficient(n, session.constants.kappa0),
        "expected_lambda_limit": limiting_multiplier(n),
    }
    if eps.size >= 2:
        psi_fit = polyfit(eps, np.array([r.psi for r in results]), 1)
        lam_fit = polyfit(eps, np.array([r.lam for r in results]), 1)
        report.update(
            psi_intercept=float(psi_fit[0]),
            psi_slope=float(psi_fit[1]),
            lambda_intercept=float(lam_fit[0]),
        )

    return report


# Experiments


def run_constants(session: Session) -> ExperimentResult:
    chain, profile, constants = session.chain, session.profile, session.constants
    table = Table(("name", "value"), description="profile constants")
    for name in (
        "tau0",
        "tau1",
        "kappa0",
        "tau0_moment",
        "tau0_residual",
        "w_integral",
    ):
        table.append(name, getattr(constants, name))

    table.append("tau0_discrepancy", constants.tau0_discrepancy)
    table.append("profile_mismatch", profile.mismatch)
    table.append("decay_constant", profile.decay_constant)
    table.append("delta0", chain.delta0_estimate)
    report: dict[str, Any] = {
        "constants": constants,
        "tau0_discrepancy": constants.tau0_discrepancy,
        "profile_mismatch": profile.mismatch,
        "decay_constant": profile.decay_constant,
        "delta0": chain.delta0_estimate,
        "well_kind": chain.well.kind,
        "normalization_residual": chain.well.normalization_residual,
        "chain_constants": {
            "near_well": chain.near_well_constant,
            "v_over_w": chain.v_over_w_constant,
            "taylor": chain.taylor_constant,
            "phi_quadratic": chain.phi_quadratic_constant,
        },
    }
    if chain.well.kind == "reference-quartic":
        report["closed_form_error"] = logistic_error(profile)

    columns = ("s", "eta", "eta1", "eta2")
    attachment = Table(
        columns,
        list(
            zip(
                profile.s_grid.tolist(),
                profile.eta.tolist(),
                profile.eta1.tolist(),
                profile.eta2.tolist(),
            )
        ),
        "optimal profile",
    )
    plot = PlotSpec("profile.csv", columns, "s", ("eta", "eta1"), "optimal profile")
    return ExperimentResult(
        "constants", table, report, plot, {"profile.csv": attachment}
    )


def run_minimize(session: Session) -> ExperimentResult:
    chain, profile = session.chain, session.profile
    results = session.minimizers(session.config.eps)
    columns = (
        "eps",
        "psi",
        "lambda",
        "lambda_formula",
        "el_residual",
        "mass_error",
        "iterations",
        "tau_eps",
        "resolution_sup",
    )
    table = Table(columns, description="unit-mass minimizers")
    taus = []
    for result in results:
        ansatz = solve_tau_eps(
            chain, profile, result.eps, result.u.grid, constants=session.constants
        )
        taus.append(ansatz.tau_eps)
        table.append(
            result.eps,
            result.psi,
            result.lam,
            lambda_from_formula(result, chain),
            result.el_residual,
            result.mass_error,
            result.iterations,
            ansatz.tau_eps,
            resolution_residual(result.u, ansatz, profile).f_sup,
        )

    report: dict[str, Any] = {
        "minimizers": [result.summary() for result in results],
        "expansion": _expansion(session, results),
    }
    if len(results) >= 2:
        eps = [result.eps for result in results]
        tau0 = session.constants.tau0
        report["tau_rate"] = tau_rate(eps, taus, tau0)
        report["tau_constant"] = tau_constant(eps, taus, tau0)

    attachments = {f"u_eps_{r.eps:g}.csv": _field_table(r) for r in results}
    plot = _psi_plot("results.csv", columns, session)
    return ExperimentResult("minimize", table, report, plot, attachments)


def run_sweep(session: Session) -> ExperimentResult:
    config = session.config
    chain, profile, constants = session.chain, session.profile, session.constants

    def identity(eps: float) -> Any:
        return psi_identity(
            chain,
            profile,
            eps,
            grid_options=config.grid,
            options=config.solver,
            constants=constants,
        )

    columns = (
        "eps",
        "psi",
        "lambda",
        "psi_prime",
        "identity_residual",
        "relative_error",
    )
    table = Table(columns, description="eps*psi' - ((n-1)psi - n*lambda)")
    for row in session.pool.map(identity, config.eps):
        residual = row.lhs - row.rhs
        table.append(
            row.eps, row.psi, row.lam, row.psi_prime, residual, row.relative_error
        )

    surface = psi_surface(
        chain,
        profile,
        config.sigmas,
        config.masses,
        grid_options=config.grid,
        options=config.solver,
        constants=constants,
        map_fn=session.pool.map,
    )
    surface_table = Table(
        ("sigma", "mass", "eps", "psi", "lambda", "provenance"),
        [(r.sigma, r.mass, r.eps, r.psi, r.lam, r.provenance) for r in surface.rows],
        "Psi(sigma, m) and Lambda(sigma, m)",
    )
    report = {
        "surface": {
            "checks": surface.checks(),
            "scaling_discrepancy": surface.scaling_discrepancy(),
            "derivative_error": surface.derivative_error(),
        },
        "max_relative_error": max(table.column("relative_error"), default=math.nan),
    }
    return ExperimentResult(
        "sweep",
        table,
        report,
        _psi_plot("results.csv", columns, session),
        {"psi_surface.csv": surface_table},
    )


def _rearrangement_suite(session: Session, count: int) -> dict[str, Any]:
    chain = session.chain
    eps = ATTRACTION_EPS
    grid = session.grid(eps)
    fields = random_radial_fields(chain, grid, eps, count, session.rng("rearrangement"))
    gaps = [symmetrization_gap(chain, u, eps) for u in fields]
    mass_errors = [
        abs(mass(g.rearranged, chain) - mass(u, chain)) for u, g in zip(fields, gaps)
    ]
    dirichlet_gaps = [g.dirichlet_gap for g in gaps]
    scale = max((dirichlet_integral(u) for u in fields), default=1.0)
    return {
        "count": count,
        "max_mass_error": max(mass_errors, default=0.0),
        "min_dirichlet_gap": min(dirichlet_gaps, default=0.0),
        "polya_szego": all(gap >= -1e-9 * scale for gap in dirichlet_gaps),
        "symmetrization_constant": symmetrization_constant(gaps),
        "degenerate_lhs": max((g.lhs for g in gaps if g.base <= 0), default=0.0),
    }


def run_stability(session: Session) -> ExperimentResult:
    config = session.config
    chain, profile = session.chain, session.profile
    n = config.dim
    one_d = one_d_spectrum(chain, profile, config.spectrum_k)
    results = session.minimizers(config.eps)
    spectra = session.pool.map(
        lambda result: second_variation_spectrum(chain, result, config.spectrum_k),
        results,
    )
    columns = ("operator", "eps", "index", "eigenvalue", "raw_eigenvalue")
    table = Table(columns, description="lowest eigenvalues")
    for index, (value, raw) in enumerate(zip(one_d.eigenvalues, one_d.raw_eigenvalues)):
        table.append("one-d", None, index, value, raw)

    for result, spectrum in zip(results, spectra):
        for index, value in enumerate(spectrum.eigenvalues):
            table.append("second-variation", result.eps, index, value, value)

    quantitative = []
    for index, result in enumerate(results):
        rng = session.rng("stability", index)
        competitors = ansatz_competitors(chain, profile, result)
        competitors += random_perturbations(
            chain, result, min(config.perturbations, 50), rng
        )
        reports = quantitative_stability(chain, result, competitors)
        quantitative.append(
            {
                "eps": result.eps,
                "summary": quantitative_summary(reports, n),
                "reduction_constant": reduction_constant(chain, result, competitors),
            }
        )

    ps = [
        verify_ps_condition(chain, config.alexandrov_sigma, ell) for ell in config.ells
    ]
    report = {
        "one_d": {
            "eigenvalues": one_d.eigenvalues,
            "raw_eigenvalues": one_d.raw_eigenvalues,
            "essential_edge": one_d.essential_edge,
            "kernel_alignment": kernel_alignment(one_d, profile),
            "kernel_residual": kernel_residual(chain, profile),
        },
        "second_variation": [
            {
                "eps": result.eps,
                "eigenvalues": spectrum.eigenvalues,
                "unconstrained_lowest": spectrum.unconstrained_lowest,
                "discretization": spectrum.discretization,
            }
            for result, spectrum in zip(results, spectra)
        ],
        "quantitative": quantitative,
        "rearrangement": _rearrangement_suite(session, config.rearrangements),
        "peletier_serrin": [
            {"sigma": config.alexandrov_sigma, "ell": ell, "report": report}
            for ell, report in zip(config.ells, ps)
        ],
        "quasi_triangle": {
            "brute_force": quasi_triangle_constant(n),
            "closed_form": (n - 1) / n,
        },
    }
    plot = PlotSpec(
        "results.csv", columns, "index", ("eigenvalue",), "lowest eigenvalues"
    )
    return ExperimentResult("stability", table, report, plot)


def _fuglede_batches(
    session: Session, eps_values: Sequence[float], count: int
) -> list[tuple[MinimizerResult, list[Any]]]:
    chain = session.chain
    batches = []
    for index, result in enumerate(session.minimizers(eps_values)):
        perturbations = random_perturbations(
            chain, result, count, session.rng("fuglede", index)
        )
        batches.append((result, fuglede_check(chain, result, perturbations)))

    return batches


def run_fuglede(session: Session) -> ExperimentResult:
    columns = ("eps", "index", "deficit", "p_norm", "fuglede_ratio", "asymmetry")
    table = Table(columns, description="deficit / (int eps|grad h|^2 + h^2/eps)")
    summaries = []
    for result, reports in _fuglede_batches(
        session, session.config.eps, session.config.perturbations
    ):
        for index, report in enumerate(reports):
            table.append(
                result.eps,
                index,
                report.deficit,
                report.p_norm,
                report.fuglede_ratio,
                report.asymmetry,
            )

        summaries.append({"eps": result.eps, "summary": fuglede_summary(reports)})

    minima = [s["summary"].min_ratio for s in summaries]
    report = {
        "batches": summaries,
        "uniformity": max(minima) / min(minima) if min(minima) > 0 else math.inf,
    }
    plot = PlotSpec(
        "results.csv",
        columns,
        "p_norm",
        ("fuglede_ratio",),
        "Fuglede ratios",
        logx=True,
    )
    return ExperimentResult("fuglede", table, report, plot)


class AlexandrovRow(NamedTuple):
    sigma: float
    ell: float
    mass: float
    lam: float
    distance: float
    ps_passed: bool
    beta: float


def _alexandrov_rows(session: Session) -> list[AlexandrovRow]:
    config = session.config
    chain, profile, constants = session.chain, session.profile, session.constants
    n, sigma = config.dim, config.alexandrov_sigma

    def match(ell: float) -> AlexandrovRow:
        ps = verify_ps_condition(chain, sigma, ell)
        m = invert_lambda(
            chain,
            profile,
            sigma,
            ell,
            bracket=config.mass_bracket,
            grid_options=config.grid,
            options=config.solver,
            constants=constants,
        )
        scale = m ** (1 / n)
        grid = make_grid(n, sigma / scale, config.grid).scaled(scale)
        result = minimize(
            chain,
            profile,
            sigma,
            grid,
            config.solver,
            target_mass=m,
            constants=constants,
        )
        critical = solve_critical_point(chain, sigma, ell, grid)
        distance = d_phi(critical, result.u, chain)
        logger.info("ℓ = %g: m = %.10g, d_Φ = %.3g", ell, m, distance)
        return AlexandrovRow(sigma, ell, m, result.lam, distance, ps.passed, ps.beta)

    return session.pool.map(match, config.ells)


def run_alexandrov(session: Session) -> ExperimentResult:
    config = session.config
    columns = (
        "sigma",
        "ell",
        "sigma_ell",
        "mass",
        "lambda",
        "d_phi",
        "ps_passed",
        "beta",
    )
    table = Table(columns, description="matched mass with Lambda(sigma, m) = ell")
    rows = _alexandrov_rows(session)
    for row in rows:
        table.append(
            row.sigma,
            row.ell,
            row.sigma * row.ell,
            row.mass,
            row.lam,
            row.distance,
            row.ps_passed,
            row.beta,
        )

    report = {
        "rows": rows,
        "max_d_phi": max((row.distance for row in rows), default=0.0),
        "nu0_estimate": estimate_nu0(
            session.chain,
            config.alexandrov_sigma,
            session.grid(config.alexandrov_sigma),
            [config.alexandrov_sigma * ell for ell in config.ells],
        ),
    }
    plot = PlotSpec("results.csv", columns, "ell", ("d_phi",), "shooting vs minimizer")
    return ExperimentResult("alexandrov", table, report, plot)


# Acceptance checks


def _check_expansion(session: Session) -> list[Check]:
    n = session.config.dim
    results = session.minimizers(EXPANSION_EPS)
    fit = _expansion(session, results)
    intercept_error = abs(fit["psi_intercept"] / fit["expected_intercept"] - 1)
    slope_error = abs(fit["psi_slope"] / fit["expected_slope"] - 1)
    checks = [
        Check(1, "psi intercept", intercept_error, 0.01, intercept_error <= 0.01),
        Check(1, "psi slope", slope_error, 0.05, slope_error <= 0.05),
    ]
    chain = session.chain
    agreement = max(
        abs(r.lam - lambda_from_formula(r, chain)) / max(1.0, abs(r.lam))
        for r in results
    )
    limit_error = abs(fit["lambda_intercept"] / limiting_multiplier(n) - 1)
    checks.append(Check(2, "lambda formula", agreement, 1e-4, agreement <= 1e-4))
    checks.append(Check(2, "lambda limit", limit_error, 0.01, limit_error <= 0.01))
    return checks


def _check_profile(session: Session) -> list[Check]:
    discrepancy = session.constants.tau0_discrepancy
    checks = [Check(3, "tau0 agreement", discrepancy, 1e-7, discrepancy <= 1e-7)]
    if session.chain.well.kind == "reference-quartic":
        error = logistic_error(session.profile)
        checks.append(Check(3, "logistic closed form", error, 1e-8, error <= 1e-8))

    return checks


def _check_kernel(session: Session) -> list[Check]:
    spectrum = one_d_spectrum(session.chain, session.profile)
    lowest = abs(float(spectrum.eigenvalues[0]))
    alignment = kernel_alignment(spectrum, session.profile)
    checks = [
        Check(4, "kernel eigenvalue", lowest, 1e-5, lowest <= 1e-5),
        Check(4, "kernel alignment", alignment, 0.9999, alignment >= 0.9999),
    ]
    if session.chain.well.kind == "reference-quartic":
        gap = abs(float(spectrum.eigenvalues[1]) - 27)
        checks.append(Check(4, "second bound state", gap, 0.1, gap <= 0.1))

    return checks


def _check_fuglede(session: Session) -> list[Check]:
    count = max(session.config.perturbations, 200)
    minima = [
        fuglede_summary(reports).min_ratio
        for _, reports in _fuglede_batches(session, FUGLEDE_EPS, count)
    ]
    lowest = min(minima)
    spread = max(minima) / lowest if lowest > 0 else math.inf
    return [
        Check(5, "coercivity", lowest, 0.0, lowest > 0),
        Check(5, "uniformity", spread, 4.0, spread <= 4.0),
    ]


def _check_attraction(session: Session) -> list[Check]:
    chain, profile = session.chain, session.profile
    eps = ATTRACTION_EPS
    (base,) = session.minimizers([eps])
    grid = base.u.grid
    radius = ball_radius(session.config.dim)
    ansatz = solve_tau_eps(chain, profile, eps, grid, constants=session.constants)
    starts = [
        smoothed_indicator(grid, radius, 3 * eps),
        smoothed_indicator(grid, 0.8 * radius, eps),
        shift_interface(ansatz.field, 2 * eps),
    ]
    inner = inner_product_matrix(grid, eps)
    distance = 0.0
    for start in starts:
        result = minimize(
            chain,
            profile,
            eps,
            grid,
            session.config.solver,
            initial=start,
            constants=session.constants,
        )
        h = result.u.values - base.u.values
        distance = max(distance, math.sqrt(max(float(h @ (inner @ h)), 0.0)))

    return [Check(6, "unique attractor", distance, 1e-5, distance <= 1e-5)]


def _check_surface(session: Session) -> list[Check]:
    config = session.config
    surface = psi_surface(
        session.chain,
        session.profile,
        config.sigmas,
        config.masses,
        grid_options=config.grid,
        options=config.solver,
        constants=session.constants,
        map_fn=session.pool.map,
    )
    return [
        Check(7, name, float(ok), 1.0, ok) for name, ok in surface.checks().items()
    ]


def _check_alexandrov(session: Session) -> list[Check]:
    return [
        Check(
            8, f"round trip ell={row.ell:g}", row.distance, 1e-5, row.distance <= 1e-5
        )
        for row in _alexandrov_rows(session)
    ]


def _check_rearrangement(session: Session) -> list[Check]:
    suite = _rearrangement_suite(session, max(session.config.rearrangements, 50))
    constant = suite["symmetrization_constant"]
    return [
        Check(
            9,
            "mass preservation",
            suite["max_mass_error"],
            1e-8,
            suite["max_mass_error"] <= 1e-8,
        ),
        Check(
            9,
            "Polya-Szego",
            suite["min_dirichlet_gap"],
            0.0,
            suite["polya_szego"],
        ),
        Check(
            9,
            "symmetrization constant",
            constant,
            math.inf,
            math.isfinite(constant) and suite["degenerate_lhs"] <= 1e-12,
        ),
    ]


def _check_resolution(session: Session) -> list[Check]:
    chain, profile = session.chain, session.profile
    delta0 = chain.delta0_estimate
    ratios, inner, outer = [], [], []
    for result in session.minimizers(RESOLUTION_EPS):
        eps = result.eps
        ansatz = solve_tau_eps(
            chain, profile, eps, result.u.grid, constants=session.constants
        )
        ratios.append(resolution_residual(result.u, ansatz, profile).f_sup / eps)
        layer = interface_report(result.u, ansatz.radius, eps, delta0)
        inner.append(layer.inner_width / eps)
        outer.append(layer.outer_width / eps)

    def spread(values: list[float]) -> float:
        return max(values) / min(values) if min(values) > 0 else math.inf

    ratio_spread = spread(ratios)
    width_spread = max(spread(inner), spread(outer))
    return [
        Check(10, "sup|u - z| / eps stability", ratio_spread, 2.0, ratio_spread <= 2.0),
        Check(10, "interface width scaling", width_spread, 2.0, width_spread <= 2.0),
    ]


# Module invariants (criterion 0)


def _refinement_ratio(values: Sequence[float]) -> float:
    """Ratio of successive differences over three halvings of the mesh spacing."""
    coarse, fine = abs(values[0] - values[1]), abs(values[1] - values[2])
    if fine <= 1e-12 * max(abs(values[2]), 1.0):
        return math.inf

    return coarse / fine


def _invariants_potentials(session: Session) -> list[Check]:
    chain = session.chain
    well = chain.well
    residual = well.normalization_residual
    phi_error = abs(float(chain.Phi(1.0)[0]) - 1)
    checks = [
        Check(0, "potentials: normalization", residual, 1e-10, residual <= 1e-10),
        Check(0, "potentials: Phi(1) = 1", phi_error, 1e-9, phi_error <= 1e-9),
    ]
    for name, value in (
        ("near-well", chain.near_well_constant),
        ("V/W", chain.v_over_w_constant),
        ("Taylor", chain.taylor_constant),
        ("Phi quadratic", chain.phi_quadratic_constant),
    ):
        checks.append(
            Check(
                0,
                f"potentials: {name} constant",
                value,
                math.inf,
                math.isfinite(value),
            )
        )

    t = np.linspace(0.05, 0.95, 19)
    breaks = np.asarray(well.breakpoints)
    t = t[np.min(np.abs(t[:, None] - breaks[None, :]), axis=1) > 5e-3]
    _, dw, d2w = well.evaluate(t)
    errors = []
    for h in (1e-3, 5e-4):
        first = (well.w(t + h) - well.w(t - h)) / (2 * h)
        second = (well.w(t + h) - 2 * well.w(t) + well.w(t - h)) / h**2
        errors.append(max(np.max(np.abs(first - dw)), np.max(np.abs(second - d2w))))

    order = errors[0] / errors[1] if errors[1] > 1e-9 else math.inf
    checks.append(
        Check(0, "potentials: finite differences O(h^2)", order, 3.0, order >= 3)
    )
    return checks


def _invariants_profile(session: Session) -> list[Check]:
    chain, profile, constants = session.chain, session.profile, session.constants
    center = abs(float(profile(0.0)[0]) - 0.5)
    eta = profile.eta
    first = float(np.max(np.abs(profile.eta1 + np.sqrt(chain.well.w(eta)))))
    _, dw, _ = chain.well.evaluate(eta)
    second = float(np.max(np.abs(2 * profile.eta2 - dw)))
    taus = constants.tau0 + np.linspace(-2.0, 2.0, 10)
    defects = [mass_defect(chain, profile, tau) for tau in taus]
    decreasing = bool(np.all(np.diff(defects) < 0))
    wide = compute_constants(chain, compute_profile(chain, S=24.0, N=4096))
    truncation = max(abs(wide.tau0 - constants.tau0), abs(wide.tau1 - constants.tau1))
    w_error = abs(constants.w_integral - 1)
    return [
        Check(0, "profile: eta(0) = 1/2", center, 1e-10, center <= 1e-10),
        Check(
            0,
            "profile: monotone",
            float(np.max(np.diff(eta))),
            0.0,
            bool(np.all(np.diff(eta) <= 0)),
        ),
        Check(0, "profile: first-order ODE", first, 1e-8, first <= 1e-8),
        Check(0, "profile: second-order ODE", second, 1e-6, second <= 1e-6),
        Check(
            0,
            "profile: tau0 residual",
            constants.tau0_residual,
            1e-8,
            constants.tau0_residual <= 1e-8,
        ),
        Check(0, "profile: mass defect decreasing", float(decreasing), 1.0, decreasing),
        Check(0, "profile: tail truncation", truncation, 1e-8, truncation < 1e-8),
        Check(0, "profile: equipartition", w_error, 1e-8, w_error <= 1e-8),
    ]


def _invariants_radial(session: Session) -> list[Check]:
    config, chain, profile = session.config, session.chain, session.profile
    n, eps = config.dim, 0.1
    grid = session.grid(eps)
    radius = ball_radius(n)
    u = smoothed_indicator(grid, radius, eps)
    t = 2.0
    dilated = dilate(u, t)
    mass_error = abs(mass(dilated, chain) * t / mass(u, chain) - 1)
    scaled = energy(u, chain, eps * t ** (1 / n)).total / t ** ((n - 1) / n)
    energy_error = abs(energy(dilated, chain, eps).total / scaled - 1)
    volume = unit_ball_volume(n) * grid.r_max**n
    volume_error = abs(grid.weights.sum() / volume - 1)

    energies = []
    for points in (16, 32, 64):
        fine = make_grid(n, eps, replace(config.grid, points_per_eps=points))
        ansatz = solve_tau_eps(chain, profile, eps, fine, constants=session.constants)
        energies.append(energy(ansatz.field, chain, eps))

    ratio = _refinement_ratio([report.total for report in energies])
    split = energies[-1]
    split_error = abs(sum(split.bv_split) / split.total - 1)
    return [
        Check(0, "radial: weights", volume_error, 1e-12, volume_error <= 1e-12),
        Check(
            0, "radial: r_max >= 3R", grid.r_max / radius, 3.0, grid.r_max >= 3 * radius
        ),
        Check(0, "radial: mass scaling", mass_error, 1e-6, mass_error <= 1e-6),
        Check(0, "radial: energy scaling", energy_error, 1e-6, energy_error <= 1e-6),
        Check(0, "radial: energy refinement order", ratio, 3.0, ratio >= 3),
        Check(0, "radial: BV split", split_error, 1e-3, split_error <= 1e-3),
    ]


def _invariants_ansatz(session: Session) -> list[Check]:
    chain, profile, constants = session.chain, session.profile, session.constants
    taus, residual = [], 0.0
    for eps in RESOLUTION_EPS:
        ansatz = solve_tau_eps(
            chain, profile, eps, session.grid(eps), constants=constants
        )
        taus.append(ansatz.tau_eps)
        residual = max(residual, ansatz.mass_residual)

    rate_constant = tau_constant(RESOLUTION_EPS, taus, constants.tau0)
    (result,) = session.minimizers([0.1])
    radius = ball_radius(session.config.dim)
    layer = interface_report(result.u, radius, 0.1, chain.delta0_estimate)
    tails = max(layer.inner_tail_constant, layer.outer_tail_constant)
    return [
        Check(0, "ansatz: mass residual", residual, 1e-8, residual <= 1e-8),
        Check(
            0,
            "ansatz: |tau_eps - tau0| / eps",
            rate_constant,
            math.inf,
            math.isfinite(rate_constant),
        ),
        Check(
            0,
            "ansatz: interface slope",
            layer.slope_range[0],
            0.0,
            layer.slope_range[0] > 0 and math.isfinite(layer.slope_range[1]),
        ),
        Check(0, "ansatz: tail constants", tails, math.inf, math.isfinite(tails)),
    ]


def _invariants_minimizer(session: Session) -> list[Check]:
    config, chain, profile = session.config, session.chain, session.profile
    eps = 0.1
    (result,) = session.minimizers([eps])
    mass_error = abs(mass(result.u, chain) - result.target_mass)
    history = np.asarray(result.energy_history)
    rise = float(np.max(np.diff(history), initial=0.0))
    identity = psi_identity(
        chain,
        profile,
        eps,
        grid_options=config.grid,
        options=config.solver,
        constants=session.constants,
    )
    psi_values = []
    for points in (16, 32, 64):
        grid = make_grid(config.dim, eps, replace(config.grid, points_per_eps=points))
        psi_values.append(
            minimize(
                chain, profile, eps, grid, config.solver, constants=session.constants
            ).psi
        )

    ratio = _refinement_ratio(psi_values)
    return [
        Check(0, "minimizer: mass", mass_error, 1e-7, mass_error <= 1e-7),
        Check(
            0,
            "minimizer: decreasing",
            float(np.max(np.diff(result.u.values))),
            0.0,
            bool(np.all(np.diff(result.u.values) <= 0)),
        ),
        Check(0, "minimizer: lambda > 0", result.lam, 0.0, result.lam > 0),
        Check(
            0,
            "minimizer: flow energy nonincreasing",
            rise,
            0.0,
            rise <= 1e-12 * max(abs(history[0]), 1.0) if history.size else True,
        ),
        Check(
            0,
            "minimizer: psi identity",
            identity.relative_error,
            0.02,
            identity.relative_error <= 0.02,
        ),
        Check(
            0,
            "minimizer: psi' > 0",
            identity.psi_prime,
            0.0,
            identity.psi_prime > 0,
        ),
        Check(0, "minimizer: psi refinement order", ratio, 3.0, ratio >= 3),
    ]


def _invariants_stability(session: Session) -> list[Check]:
    chain, profile, n = session.chain, session.profile, session.config.dim
    residual = kernel_residual(chain, profile)
    (result,) = session.minimizers([0.1])
    spectrum = second_variation_spectrum(chain, result, k=2)
    values = spectrum.eigenvalues
    reports = quantitative_stability(
        chain, result, ansatz_competitors(chain, profile, result)
    )
    summary = quantitative_summary(reports, n)
    lowest_deficit = min((r.deficit for r in reports), default=0.0)
    ((_, batch),) = _fuglede_batches(session, FUGLEDE_EPS[:1], 50)
    fuglede = fuglede_summary(batch)
    chain_constant = max(fuglede.gradient_constant, fuglede.sobolev_constant)
    return [
        Check(0, "stability: kernel residual", residual, 1e-3, residual <= 1e-3),
        Check(
            0,
            "stability: second variation sorted and coercive",
            float(values[0]),
            0.0,
            bool(values[0] > 0 and np.all(np.diff(values) >= 0)),
        ),
        Check(
            0,
            "stability: deficit nonnegative",
            lowest_deficit,
            -1e-7,
            lowest_deficit >= -1e-7,
        ),
        Check(
            0,
            "stability: asymmetry bound",
            summary.max_asymmetry,
            summary.asymmetry_bound,
            summary.max_asymmetry <= summary.asymmetry_bound,
            f"bins monotone: {summary.bins_monotone}",
        ),
        Check(
            0,
            "stability: Sobolev chain constants",
            chain_constant,
            math.inf,
            math.isfinite(chain_constant),
        ),
    ]


_INVARIANTS: tuple[Callable[[Session], list[Check]], ...] = (
    _invariants_potentials,
    _invariants_profile,
    _invariants_radial,
    _invariants_ansatz,
    _invariants_minimizer,
    _invariants_stability,
)

_CHECKS: tuple[tuple[int, Callable[[Session], list[Check]]], ...] = (
    (1, _check_expansion),
    (3, _check_profile),
    (4, _check_kernel),
    (5, _check_fuglede),
    (6, _check_attraction),
    (7, _check_surface),
    (8, _check_alexandrov),
    (9, _check_rearrangement),
    (10, _check_resolution),
)


def _label(check: Check) -> str:
    return "invariant" if check.criterion == 0 else f"criterion {check.criterion}"


def run_verify_all(session: Session) -> ExperimentResult:
    """
    Run the invariant suite of every module, then every acceptance check; a step
    that raises is recorded as failed with the error message as its detail.
    """
    steps = [(0, suite) for suite in _INVARIANTS] + list(_CHECKS)
    checks: list[Check] = []
    for criterion, step in steps:
        try:
            checks.extend(step(session))
        except (DiffusePerimError, ExceptionGroup) as exc:
            name = getattr(step, "__name__", "check")
            logger.error("check %s raised: %s", name, exc)
            checks.append(Check(criterion, name, math.nan, math.nan, False, str(exc)))

    table = Table(
        ("criterion", "name", "value", "threshold", "passed", "detail"),
        [tuple(c) for c in checks],
        "module invariants (criterion 0) and acceptance checks",
    )
    failures = [
        f"{_label(c)}: {c.name} = {c.value!r} (threshold {c.threshold!r})"
        + (f": {c.detail}" if c.detail else "")
        for c in checks
        if not c.passed
    ]
    report = {"checks": checks, "passed": not failures, "failures": failures}
    expansion = [r for eps, r in session.solved.items() if eps in EXPANSION_EPS]
    attachments = {}
    plot = None
    if expansion:
        columns = ("eps", "psi", "lambda")
        attachments["expansion.csv"] = Table(
            columns, [(r.eps, r.psi, r.lam) for r in expansion], "psi expansion"
        )
        plot = _psi_plot("expansion.csv", columns, session)

    return ExperimentResult("verify-all", table, report, plot, attachments, failures)


EXPERIMENTS: dict[str, Callable[[Session], ExperimentResult]] = {
    "constants": run_constants,
    "minimize": run_minimize,
    "sweep": run_sweep,
    "stability": run_stability,
    "fuglede": run_fuglede,
    "alexandrov": run_alexandrov,
    "verify-all": run_verify_all,
}


def execute(config: ExperimentConfig) -> ExperimentResult:
    """Run the configured experiment without writing anything."""
    logger.info("running %s (n = %d, seed = %d)", config.kind, config.dim, config.seed)
    result = EXPERIMENTS[config.kind](Session(config))
    result.report["config"] = config.to_dict()
    return result


def run(config: ExperimentConfig) -> int:
    """
    Run the configured experiment and write its artifacts to ``config.out``.

    :return: 0, or :data:`CHECK_FAILED` if an acceptance check of ``verify-all``
        failed
    :raises DiffusePerimError: on solver and configuration errors
    :raises ExceptionGroup: if sweep items failed

    """
    result = execute(config)
    write_artifacts(
        config.out, result.table, result.report, result.plot, result.attachments
    )
    for failure in result.failures:
        logger.error("acceptance check failed: %s", failure)

    return CHECK_FAILED if result.failures else 0
