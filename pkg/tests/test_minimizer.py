from __future__ import annotations

import math

import numpy as np
import pytest

from diffuseperim import (
    GridOptions,
    MinimizerResult,
    NoConvergence,
    NoDecayingSolution,
    PotentialChain,
    Profile,
    ProfileConstants,
    PsiTable,
    SolverOptions,
    d_phi,
    energy,
    invert_lambda,
    lambda_from_formula,
    make_grid,
    minimize,
    psi_identity,
    psi_surface,
    random_perturbations,
    resample,
    restore_mass,
    shoot,
    solve_critical_point,
    solve_penalized,
    solve_tau_eps,
)
from diffuseperim._minimizer import PsiRow
from diffuseperim._radial import shift_interface, smoothed_indicator
from diffuseperim._stability import inner_product_matrix
from diffuseperim._utils import ball_radius


@pytest.fixture(scope="module")
def fine_minimizer(
    quartic_chain: PotentialChain, profile: Profile, constants: ProfileConstants
) -> MinimizerResult:
    grid = make_grid(2, 0.1, GridOptions(points_per_eps=128))
    return minimize(quartic_chain, profile, 0.1, grid, constants=constants)


class TestMinimize:
    def test_converged(self, minimizer: MinimizerResult) -> None:
        assert minimizer.converged
        assert minimizer.el_residual <= SolverOptions().stall_tol
        assert minimizer.mass_error < 1e-9

    def test_default_options_converge(
        self, quartic_chain: PotentialChain, profile: Profile
    ) -> None:
        result = minimize(quartic_chain, profile, 0.1, make_grid(2, 0.1))
        assert result.converged
        assert result.el_residual <= 1e-7

    def test_stagnation_accepted(
        self, quartic_chain: PotentialChain, profile: Profile
    ) -> None:
        # a tolerance below the rounding floor is reached by accepting the stall
        options = SolverOptions(tol=1e-15)
        result = minimize(quartic_chain, profile, 0.1, make_grid(2, 0.1), options)
        assert result.converged
        assert result.el_residual <= options.stall_tol

    def test_lambda_formula(
        self, quartic_chain: PotentialChain, fine_minimizer: MinimizerResult
    ) -> None:
        formula = lambda_from_formula(fine_minimizer, quartic_chain)
        assert formula == pytest.approx(fine_minimizer.lam, rel=1e-4)

    def test_sharp_interface_limit(self, minimizer: MinimizerResult) -> None:
        # the unit-area disk has perimeter 2√π and ∫₀¹√W = 1
        assert minimizer.psi == pytest.approx(4 * math.sqrt(math.pi), rel=0.1)
        assert minimizer.lam == pytest.approx(2 * math.sqrt(math.pi), rel=0.1)

    def test_beats_ansatz(
        self,
        quartic_chain: PotentialChain,
        profile: Profile,
        constants: ProfileConstants,
        minimizer: MinimizerResult,
    ) -> None:
        ansatz = solve_tau_eps(
            quartic_chain, profile, minimizer.eps, minimizer.u.grid, constants=constants
        )
        competitor = energy(ansatz.field, quartic_chain, minimizer.eps)
        assert minimizer.psi <= competitor.total + 1e-6

    def test_energy_decreases(self, minimizer: MinimizerResult) -> None:
        history = np.array(minimizer.energy_history)
        assert history.size >= 1
        assert np.all(np.diff(history) <= 0)

    def test_radially_decreasing(self, minimizer: MinimizerResult) -> None:
        assert np.all(np.diff(minimizer.u.values) <= 1e-12)
        assert minimizer.u.values[0] > 0.99
        assert minimizer.u.values[-1] < 1e-6

    def test_attraction(
        self,
        quartic_chain: PotentialChain,
        profile: Profile,
        constants: ProfileConstants,
        coarse_minimizer: MinimizerResult,
    ) -> None:
        eps, grid = coarse_minimizer.eps, coarse_minimizer.u.grid
        radius = ball_radius(2)
        ansatz = solve_tau_eps(quartic_chain, profile, eps, grid, constants=constants)
        starts = [
            smoothed_indicator(grid, radius, 3 * eps),
            smoothed_indicator(grid, 0.8 * radius, eps),
            shift_interface(ansatz.field, 2 * eps),
        ]
        inner = inner_product_matrix(grid, eps)
        for start in starts:
            result = minimize(
                quartic_chain, profile, eps, grid, initial=start, constants=constants
            )
            h = result.u.values - coarse_minimizer.u.values
            assert math.sqrt(max(float(h @ (inner @ h)), 0.0)) <= 1e-5

    def test_no_convergence(
        self, quartic_chain: PotentialChain, profile: Profile
    ) -> None:
        options = SolverOptions(
            tol=1e-15, max_flow_iters=1, max_newton_iters=1, stall_tol=1e-15
        )
        with pytest.raises(NoConvergence) as exc:
            minimize(quartic_chain, profile, 0.1, make_grid(2, 0.1), options)

        assert exc.value.result is not None
        assert not exc.value.result.converged

    def test_invalid_options(self) -> None:
        with pytest.raises(ValueError):
            SolverOptions(tol=0)

    def test_summary(self, coarse_minimizer: MinimizerResult) -> None:
        summary = coarse_minimizer.summary()
        assert summary["eps"] == 0.1
        assert summary["lambda"] == coarse_minimizer.lam
        assert summary["err_sup"] is None


class TestShooting:
    def test_matches_minimizer(
        self, quartic_chain: PotentialChain, fine_minimizer: MinimizerResult
    ) -> None:
        grid = fine_minimizer.u.grid
        u = solve_critical_point(quartic_chain, 0.1, fine_minimizer.lam, grid)
        assert d_phi(u, fine_minimizer.u, quartic_chain) <= 1e-5
        assert np.max(np.abs(u.values - fine_minimizer.u.values)) <= 2e-3

    def test_shot_outcomes(
        self, quartic_chain: PotentialChain, coarse_minimizer: MinimizerResult
    ) -> None:
        ell = coarse_minimizer.lam
        assert shoot(quartic_chain, 0.1, ell, 1e-300, 3.0).kind == "overshoot"
        high = quartic_chain.delta0_estimate
        assert shoot(quartic_chain, 0.1, ell, high, 3.0).kind == "undershoot"

    @pytest.mark.parametrize("ell", [0.0, -1.0])
    def test_no_decaying_solution(
        self, quartic_chain: PotentialChain, ell: float
    ) -> None:
        with pytest.raises(NoDecayingSolution):
            solve_critical_point(quartic_chain, 0.1, ell, make_grid(2, 0.1))


class TestPenalized:
    def test_anchor_is_fixed_point(
        self, quartic_chain: PotentialChain, coarse_minimizer: MinimizerResult
    ) -> None:
        result = solve_penalized(quartic_chain, 0.1, 1.0, coarse_minimizer.u)
        assert d_phi(result.u, coarse_minimizer.u, quartic_chain) <= 1e-10
        assert result.err_sup is not None and math.isfinite(result.err_sup)
        assert result.penalty == pytest.approx(0.0, abs=1e-10)

    def test_perturbed_anchor(
        self,
        quartic_chain: PotentialChain,
        coarse_minimizer: MinimizerResult,
        rng: np.random.Generator,
    ) -> None:
        (anchor,) = random_perturbations(quartic_chain, coarse_minimizer, 1, rng)
        coarse = solve_penalized(quartic_chain, 0.1, 0.1, anchor)
        fine_grid = make_grid(2, 0.1, GridOptions(points_per_eps=128))
        fine_anchor = restore_mass(resample(anchor, fine_grid), quartic_chain, 0.1)
        fine = solve_penalized(quartic_chain, 0.1, 0.1, fine_anchor)
        assert coarse.converged and fine.converged
        assert coarse.penalty > 0
        assert coarse.err_sup is not None and fine.err_sup is not None
        assert math.isfinite(coarse.err_sup)
        # Err is a property of the continuous problem, not of the mesh
        assert 0.5 <= fine.err_sup / coarse.err_sup <= 2

    def test_invalid_weight(
        self, quartic_chain: PotentialChain, coarse_minimizer: MinimizerResult
    ) -> None:
        with pytest.raises(ValueError):
            solve_penalized(quartic_chain, 0.1, 0.0, coarse_minimizer.u)


class TestPsiFunction:
    def test_identity(
        self,
        quartic_chain: PotentialChain,
        profile: Profile,
        constants: ProfileConstants,
    ) -> None:
        identity = psi_identity(quartic_chain, profile, 0.1, constants=constants)
        assert identity.relative_error <= 0.02
        assert identity.lhs == pytest.approx(0.1 * identity.psi_prime)

    @pytest.mark.parametrize(
        "bump, concave",
        [
            pytest.param(-5e-10, True, id="quadrature_noise"),
            pytest.param(-1e-3, False, id="convex"),
        ],
    )
    def test_concavity_tolerance(self, bump: float, concave: bool) -> None:
        masses = (0.75, 1.0, 1.25)
        psi = [2 * m for m in masses]
        psi[1] += bump
        rows = tuple(
            PsiRow(0.05, m, 0.05, p, lam, "scaled")
            for m, p, lam in zip(masses, psi, (2.1, 2.0, 1.9))
        )
        checks = PsiTable(2, rows).checks()
        assert checks["psi_concave_in_m"] is concave
        assert checks["lambda_decreasing_in_m"]

    @pytest.mark.slow
    def test_surface(
        self,
        quartic_chain: PotentialChain,
        profile: Profile,
        constants: ProfileConstants,
    ) -> None:
        table = psi_surface(
            quartic_chain, profile, (0.05,), (0.8, 1.0, 1.25), constants=constants
        )
        assert len(table.rows) == 6
        assert table.scaling_discrepancy() <= 1e-6
        checks = table.checks()
        assert checks["lambda_decreasing_in_m"]
        assert checks["psi_increasing_in_m"]
        assert checks["psi_concave_in_m"]
        assert checks["lambda_is_dpsi_dm"]

    @pytest.mark.slow
    def test_invert_lambda(
        self,
        quartic_chain: PotentialChain,
        profile: Profile,
        constants: ProfileConstants,
    ) -> None:
        unit = minimize(
            quartic_chain, profile, 0.05, make_grid(2, 0.05), constants=constants
        )
        m = invert_lambda(quartic_chain, profile, 0.05, unit.lam, constants=constants)
        assert m == pytest.approx(1.0, rel=1e-4)
