from __future__ import annotations

import hypothesis
import numpy as np
import pytest

from diffuseperim import (
    MinimizerResult,
    PotentialChain,
    Profile,
    ProfileConstants,
    chain,
    compute_constants,
    compute_profile,
    make_grid,
    make_reference_well,
    minimize,
)

hypothesis.settings.register_profile("default", deadline=None, max_examples=50)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=5)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def quartic_chain() -> PotentialChain:
    return chain(make_reference_well(), 2)


@pytest.fixture(scope="session")
def quartic_chain_3d() -> PotentialChain:
    return chain(make_reference_well(), 3)


@pytest.fixture(scope="session")
def profile(quartic_chain: PotentialChain) -> Profile:
    return compute_profile(quartic_chain)


@pytest.fixture(scope="session")
def constants(quartic_chain: PotentialChain, profile: Profile) -> ProfileConstants:
    return compute_constants(quartic_chain, profile)


def _minimizer(
    chain: PotentialChain, profile: Profile, constants: ProfileConstants, eps: float
) -> MinimizerResult:
    return minimize(chain, profile, eps, make_grid(chain.dim, eps), constants=constants)


@pytest.fixture(scope="session")
def coarse_minimizer(
    quartic_chain: PotentialChain, profile: Profile, constants: ProfileConstants
) -> MinimizerResult:
    return _minimizer(quartic_chain, profile, constants, 0.1)


@pytest.fixture(scope="session")
def minimizer(
    quartic_chain: PotentialChain, profile: Profile, constants: ProfileConstants
) -> MinimizerResult:
    return _minimizer(quartic_chain, profile, constants, 0.05)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
