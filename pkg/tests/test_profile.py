from __future__ import annotations

import numpy as np
import pytest
from scipy import special

from diffuseperim import (
    PotentialChain,
    Profile,
    ProfileConstants,
    chain,
    compute_constants,
    compute_profile,
    mass_defect,
    normalize_well,
)


class TestProfile:
    def test_logistic_closed_form(self, profile: Profile) -> None:
        expected = special.expit(-6 * profile.s_grid)
        assert np.max(np.abs(profile.eta - expected)) <= 1e-8

    def test_normalization(self, profile: Profile) -> None:
        assert profile(0.0)[0] == pytest.approx(0.5, abs=1e-14)
        assert profile.derivative(0.0)[0] == pytest.approx(-1.5, rel=1e-12)
        assert np.all(np.diff(profile.eta) <= 0)
        assert profile.mismatch <= 1e-8

    def test_tail_rates(self, profile: Profile) -> None:
        assert profile.rate_low == pytest.approx(6, rel=1e-12)
        assert profile.rate_high == pytest.approx(6, rel=1e-12)

    def test_off_grid_tails(self, profile: Profile) -> None:
        assert profile(20.0)[0] == pytest.approx(special.expit(-120.0), rel=1e-6)
        assert 1 - profile(-20.0)[0] == pytest.approx(0.0, abs=1e-15)

    def test_between_nodes(self, profile: Profile) -> None:
        s = np.linspace(-3, 3, 1237)
        np.testing.assert_allclose(profile(s), special.expit(-6 * s), atol=1e-8)

    def test_second_derivative(self, profile: Profile) -> None:
        # η″ = W′(η)/2 = 36η(1 − η)(1 − 2η) for the quartic
        eta = profile.eta
        np.testing.assert_allclose(
            profile.eta2, 36 * eta * (1 - eta) * (1 - 2 * eta), atol=1e-8
        )

    def test_decay_constant(self, profile: Profile) -> None:
        assert 1 <= profile.decay_constant < 10

    @pytest.mark.parametrize(
        "kwargs", [pytest.param({"S": 0.0}, id="S"), pytest.param({"N": 32}, id="N")]
    )
    def test_invalid_arguments(
        self, quartic_chain: PotentialChain, kwargs: dict[str, float]
    ) -> None:
        with pytest.raises(ValueError):
            compute_profile(quartic_chain, **kwargs)  # type: ignore[arg-type]

    def test_asymmetric_well(self) -> None:
        well_chain = chain(normalize_well([0, 0, 1, -1, -1, 1]), 2)
        profile = compute_profile(well_chain)
        assert profile(0.0)[0] == pytest.approx(0.5)
        assert profile.rate_low != pytest.approx(profile.rate_high)
        assert profile.mismatch <= 1e-8


class TestConstants:
    def test_tau0_methods_agree(self, constants: ProfileConstants) -> None:
        assert constants.tau0_discrepancy <= 1e-7
        assert constants.tau0_residual <= 1e-10

    def test_kappa0(self, constants: ProfileConstants) -> None:
        assert constants.kappa0 == constants.tau0 + constants.tau1

    def test_symmetric_profile_moment(self, constants: ProfileConstants) -> None:
        # W(η) is even in s for a symmetric well
        assert constants.tau1 == pytest.approx(0.0, abs=1e-9)

    def test_equipartition(self, constants: ProfileConstants) -> None:
        # ∫W(η) ds = ∫₀¹ √W dt = 1
        assert constants.w_integral == pytest.approx(1.0, abs=1e-8)

    def test_mass_defect_decreasing(
        self,
        quartic_chain: PotentialChain,
        profile: Profile,
        constants: ProfileConstants,
    ) -> None:
        tau0 = constants.tau0
        assert mass_defect(quartic_chain, profile, tau0 - 1) > 0
        assert mass_defect(quartic_chain, profile, tau0 + 1) < 0
        # translating the profile moves exactly one unit of V-mass per unit shift
        slope = mass_defect(quartic_chain, profile, tau0 + 0.5) - mass_defect(
            quartic_chain, profile, tau0 - 0.5
        )
        assert slope == pytest.approx(-1.0, abs=1e-8)

    def test_origin_independence(
        self,
        quartic_chain: PotentialChain,
        profile: Profile,
        constants: ProfileConstants,
    ) -> None:
        shifted = compute_constants(quartic_chain, profile, origin=0.3)
        assert shifted.tau0 == pytest.approx(constants.tau0, abs=1e-8)
