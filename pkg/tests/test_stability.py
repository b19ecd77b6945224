from __future__ import annotations

import math

import numpy as np
import pytest

from diffuseperim import (
    GridOptions,
    HypothesisViolation,
    MinimizerResult,
    NoBeta,
    PotentialChain,
    Profile,
    RadialFunction,
    ansatz_competitors,
    estimate_nu0,
    find_beta,
    fuglede_check,
    fuglede_summary,
    kernel_alignment,
    make_grid,
    mass,
    one_d_spectrum,
    quantitative_stability,
    random_perturbations,
    random_radial_fields,
    restore_mass,
    second_variation_spectrum,
    symmetrization_gap,
    verify_ps_condition,
)
from diffuseperim._stability import (
    inner_product_matrix,
    kernel_residual,
    quantitative_summary,
    reduction_constant,
)


class TestOneDimensional:
    def test_poschl_teller_levels(
        self, quartic_chain: PotentialChain, profile: Profile
    ) -> None:
        report = one_d_spectrum(quartic_chain, profile)
        assert report.eigenvalues[0] == pytest.approx(0.0, abs=1e-5)
        assert report.eigenvalues[1] == pytest.approx(27.0, abs=0.1)
        np.testing.assert_allclose(report.raw_eigenvalues, 2 * report.eigenvalues)
        assert report.essential_edge == pytest.approx(36.0)
        assert report.eigenvalues[1] < report.essential_edge
        assert not report.constraint_applied

    def test_kernel(self, quartic_chain: PotentialChain, profile: Profile) -> None:
        report = one_d_spectrum(quartic_chain, profile, k=2)
        assert kernel_alignment(report, profile) >= 0.9999
        assert kernel_residual(quartic_chain, profile) <= 1e-3

    def test_too_few_eigenpairs(
        self, quartic_chain: PotentialChain, profile: Profile
    ) -> None:
        with pytest.raises(ValueError):
            one_d_spectrum(quartic_chain, profile, k=1)


class TestSecondVariation:
    def test_constrained_coercive(
        self, quartic_chain: PotentialChain, coarse_minimizer: MinimizerResult
    ) -> None:
        report = second_variation_spectrum(quartic_chain, coarse_minimizer, k=2)
        assert report.constraint_applied
        assert report.eigenvalues[0] > 0
        assert report.unconstrained_lowest is not None
        assert report.unconstrained_lowest <= report.eigenvalues[0]

    def test_inner_product(self) -> None:
        grid = make_grid(2, 0.1)
        ones = np.ones(grid.size)
        matrix = inner_product_matrix(grid, 0.1)
        assert ones @ (matrix @ ones) == pytest.approx(grid.weights.sum() / 0.1)


class TestFuglede:
    def test_perturbations_admissible(
        self,
        quartic_chain: PotentialChain,
        coarse_minimizer: MinimizerResult,
        rng: np.random.Generator,
    ) -> None:
        perturbations = random_perturbations(quartic_chain, coarse_minimizer, 20, rng)
        assert len(perturbations) == 20
        for u in perturbations:
            assert mass(u, quartic_chain) == pytest.approx(1.0, abs=1e-9)
            h = u.values - coarse_minimizer.u.values
            assert np.max(np.abs(h)) <= quartic_chain.delta0_estimate

        reports = fuglede_check(quartic_chain, coarse_minimizer, perturbations)
        summary = fuglede_summary(reports)
        assert summary.count + summary.skipped == 20
        assert summary.min_ratio > 0

    def test_small_perturbation_matches_eigenvalue(
        self, quartic_chain: PotentialChain, coarse_minimizer: MinimizerResult
    ) -> None:
        # δ_ε(u_ε + th) → ½ν t² P_ε(h) along the lowest constrained eigenvector
        spectrum = second_variation_spectrum(
            quartic_chain, coarse_minimizer, k=1, nodes_per_eps=64
        )
        base = coarse_minimizer.u
        grid = make_grid(2, 0.1, GridOptions(points_per_eps=64))
        h = np.interp(base.r, grid.r, spectrum.eigenvectors[:, 0])
        h *= 3e-3 / np.max(np.abs(h))
        u = restore_mass(RadialFunction(base.grid, base.values + h), quartic_chain, 0.1)
        (report,) = fuglede_check(quartic_chain, coarse_minimizer, [u])
        assert report.fuglede_ratio == pytest.approx(
            0.5 * spectrum.eigenvalues[0], rel=0.1
        )

    def test_hypothesis_violation(
        self,
        quartic_chain: PotentialChain,
        coarse_minimizer: MinimizerResult,
        rng: np.random.Generator,
    ) -> None:
        perturbations = random_perturbations(quartic_chain, coarse_minimizer, 3, rng)
        with pytest.raises(HypothesisViolation):
            fuglede_check(
                quartic_chain, coarse_minimizer, perturbations, l2_bound=1e-12
            )


class TestQuantitative:
    def test_competitors(
        self,
        quartic_chain: PotentialChain,
        profile: Profile,
        minimizer: MinimizerResult,
    ) -> None:
        competitors = ansatz_competitors(quartic_chain, profile, minimizer)
        assert competitors
        reports = quantitative_stability(quartic_chain, minimizer, competitors)
        assert all(report.deficit >= -1e-9 for report in reports)
        summary = quantitative_summary(reports, 2)
        assert summary.max_asymmetry <= summary.asymmetry_bound == 4
        assert math.isfinite(summary.sup_ratio)

    def test_rearrangement(
        self,
        quartic_chain: PotentialChain,
        coarse_minimizer: MinimizerResult,
        rng: np.random.Generator,
    ) -> None:
        grid = coarse_minimizer.u.grid
        fields = random_radial_fields(quartic_chain, grid, 0.1, 5, rng)
        for u in fields:
            assert mass(u, quartic_chain) == pytest.approx(1.0, abs=1e-9)
            gap = symmetrization_gap(quartic_chain, u, 0.1)
            assert gap.lhs >= 0
            assert gap.dirichlet_gap >= -1e-9 * gap.energy
            assert np.all(np.diff(gap.rearranged.values) <= 0)

        assert reduction_constant(quartic_chain, coarse_minimizer, fields) >= 0


class TestPeletierSerrin:
    def test_conditions(
        self, quartic_chain: PotentialChain, coarse_minimizer: MinimizerResult
    ) -> None:
        report = verify_ps_condition(quartic_chain, 0.1, coarse_minimizer.lam)
        assert report.conditions["a"]
        assert report.conditions["b"]
        assert report.conditions["c"]
        assert 0 < report.beta < 1
        assert report.passed == all(report.conditions.values())
        assert report.passed == (report.reason == "")

    def test_fine_slack_is_informational(
        self, quartic_chain: PotentialChain, coarse_minimizer: MinimizerResult
    ) -> None:
        report = verify_ps_condition(quartic_chain, 0.1, coarse_minimizer.lam)
        assert report.fine_slack > 0
        assert report.fine_holds
        assert "fine_slack" not in report.conditions
        assert report.passed == all(report.conditions.values())

    @pytest.mark.parametrize("ell", [0.0, -2.0])
    def test_no_beta(self, quartic_chain: PotentialChain, ell: float) -> None:
        with pytest.raises(NoBeta):
            verify_ps_condition(quartic_chain, 0.1, ell)

    def test_beta_is_root(self, quartic_chain: PotentialChain) -> None:
        sigma, ell = 0.1, 3.5
        beta = find_beta(quartic_chain, sigma, ell)
        w = quartic_chain.well.w(beta)[0]
        v = quartic_chain.V(beta)[0]
        assert ell * sigma * v == pytest.approx(w, rel=1e-8)

    def test_nu0_estimate(
        self, quartic_chain: PotentialChain, coarse_minimizer: MinimizerResult
    ) -> None:
        grid = coarse_minimizer.u.grid
        value = 0.1 * coarse_minimizer.lam
        passed = verify_ps_condition(quartic_chain, 0.1, coarse_minimizer.lam).passed
        found = estimate_nu0(quartic_chain, 0.1, grid, [value])
        assert found == (value if passed else 0.0)

    def test_nu0_estimate_stops_without_beta(
        self, quartic_chain: PotentialChain, coarse_minimizer: MinimizerResult
    ) -> None:
        grid = coarse_minimizer.u.grid
        assert estimate_nu0(quartic_chain, 0.1, grid, []) == 0.0
        assert estimate_nu0(quartic_chain, 0.1, grid, [-0.1, 0.2]) == 0.0
