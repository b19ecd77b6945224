from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffuseperim import (
    GridMismatch,
    GridOptions,
    PotentialChain,
    Profile,
    RadialFunction,
    RadialGrid,
    RegimeViolation,
    chain,
    d_phi,
    dilate,
    dirichlet_integral,
    energy,
    make_grid,
    mass,
    quasi_triangle_constant,
    rearrange,
    resample,
    restore_mass,
    solve_tau_eps,
)
from diffuseperim._radial import shift_interface, smoothed_indicator, total_variation
from diffuseperim._utils import ball_radius, unit_ball_volume

small_grid = RadialGrid.from_nodes(2, np.linspace(0, 2, 41) ** 1.2 * 2 / 2**1.2)
nodal_values = st.lists(
    st.floats(min_value=0, max_value=1),
    min_size=small_grid.size,
    max_size=small_grid.size,
)


def linear_field(grid: RadialGrid) -> RadialFunction:
    return RadialFunction(grid, 1 - grid.r / (2 * grid.r_max))


class TestRadialGrid:
    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_weights_sum_to_volume(self, dim: int) -> None:
        grid = make_grid(dim, 0.05)
        volume = unit_ball_volume(dim) * grid.r_max**dim
        assert grid.weights.sum() == pytest.approx(volume, rel=1e-12)

    def test_layer_resolution(self) -> None:
        grid = make_grid(2, 0.05, GridOptions(points_per_eps=32))
        near = np.abs(grid.r[1:] - ball_radius(2)) <= 0.25
        assert np.max(grid.spacing[near]) <= 0.05 / 32 * (1 + 1e-9)
        assert grid.r_max >= 3 * ball_radius(2)

    def test_regime(self) -> None:
        with pytest.raises(RegimeViolation):
            make_grid(2, 0.2)

    def test_invalid_nodes(self) -> None:
        with pytest.raises(ValueError):
            RadialGrid.from_nodes(2, np.array([0.1, 0.2, 0.3]))

    def test_stiffness_kernel(self) -> None:
        grid = make_grid(3, 0.1)
        assert np.max(np.abs(grid.stiffness @ np.ones(grid.size))) < 1e-9

    def test_serialization(self) -> None:
        grid = make_grid(2, 0.1)
        assert RadialGrid.from_dict(grid.to_dict()).same_as(grid)

    def test_serialized_weight_mismatch(self) -> None:
        data = make_grid(2, 0.1).to_dict()
        data["weights"] = [w * 2 for w in data["weights"]]
        with pytest.raises(GridMismatch):
            RadialGrid.from_dict(data)


class TestRadialFunction:
    def test_shape_mismatch(self) -> None:
        with pytest.raises(GridMismatch):
            RadialFunction(small_grid, np.zeros(3))

    def test_clipped(self) -> None:
        u = RadialFunction(small_grid, np.linspace(-1, 2, small_grid.size))
        assert u.values.min() == 0 and u.values.max() == 1

    def test_csv(self, tmp_path: Path) -> None:
        u = linear_field(small_grid)
        path = tmp_path / "u.csv"
        u.to_csv(path)
        loaded = RadialFunction.from_csv(path, 2)
        assert loaded.grid.same_as(u.grid)
        np.testing.assert_array_equal(loaded.values, u.values)

    def test_derivative_of_linear_field(self) -> None:
        u = linear_field(small_grid)
        np.testing.assert_allclose(u.derivative()[1:], -1 / (2 * small_grid.r_max))
        assert u.derivative()[0] == 0


class TestIntegrals:
    def test_mass_of_constant(self, quartic_chain: PotentialChain) -> None:
        u = RadialFunction(small_grid, np.ones(small_grid.size))
        assert mass(u, quartic_chain) == pytest.approx(
            math.pi * small_grid.r_max**2, rel=1e-10
        )

    def test_dirichlet_of_linear_field(self) -> None:
        u = linear_field(small_grid)
        expected = math.pi * small_grid.r_max**2 / (2 * small_grid.r_max) ** 2
        assert dirichlet_integral(u) == pytest.approx(expected, rel=1e-10)
        assert total_variation(small_grid, u.values) == pytest.approx(
            math.pi * small_grid.r_max**2 / (2 * small_grid.r_max), rel=1e-10
        )

    def test_energy_split(self, quartic_chain: PotentialChain) -> None:
        u = smoothed_indicator(make_grid(2, 0.05), ball_radius(2), 0.05)
        report = energy(u, quartic_chain, 0.05)
        assert report.total == pytest.approx(report.dirichlet + report.potential)
        assert sum(report.bv_split) == pytest.approx(report.total, rel=1e-3)
        # a tanh layer of the wrong width is not in equipartition
        assert report.bv_split[0] > 1e-2 * report.total

    def test_equipartition_of_ansatz(
        self, quartic_chain: PotentialChain, profile: Profile
    ) -> None:
        ansatz = solve_tau_eps(quartic_chain, profile, 0.05, make_grid(2, 0.05))
        report = energy(ansatz.field, quartic_chain, 0.05)
        assert report.bv_split[0] <= 1e-3 * report.total
        assert report.bv_split[1] == pytest.approx(report.total, rel=1e-3)

    @given(nodal_values)
    def test_energy_split_nonnegative(
        self, quartic_chain: PotentialChain, values: list[float]
    ) -> None:
        u = RadialFunction(small_grid, np.array(values))
        report = energy(u, quartic_chain, 0.1)
        assert report.bv_split[0] >= 0
        assert report.bv_split[1] >= 0

    def test_energy_invalid_eps(self, quartic_chain: PotentialChain) -> None:
        with pytest.raises(ValueError):
            energy(linear_field(small_grid), quartic_chain, 0.0)

    @given(nodal_values, nodal_values)
    def test_d_phi_symmetric(
        self, quartic_chain: PotentialChain, a: list[float], b: list[float]
    ) -> None:
        u = RadialFunction(small_grid, np.array(a))
        v = RadialFunction(small_grid, np.array(b))
        assert d_phi(u, v, quartic_chain) == pytest.approx(d_phi(v, u, quartic_chain))
        assert d_phi(u, u, quartic_chain) == 0

    @given(nodal_values, nodal_values, nodal_values)
    def test_d_phi_triangle(
        self,
        quartic_chain: PotentialChain,
        a: list[float],
        b: list[float],
        c: list[float],
    ) -> None:
        u, v, w = (RadialFunction(small_grid, np.array(x)) for x in (a, b, c))
        # d_Φ^{(n−1)/n} is a weighted L^{n/(n−1)} norm of Φ(u) − Φ(v)
        direct = d_phi(u, w, quartic_chain) ** 0.5
        detour = d_phi(u, v, quartic_chain) ** 0.5 + d_phi(v, w, quartic_chain) ** 0.5
        assert direct <= detour + 1e-12

    def test_d_phi_grid_mismatch(self, quartic_chain: PotentialChain) -> None:
        other = RadialGrid.from_nodes(2, np.linspace(0, 2, 41))
        with pytest.raises(GridMismatch):
            d_phi(linear_field(small_grid), linear_field(other), quartic_chain)


class TestTransformations:
    @pytest.mark.parametrize("t", [0.5, 1.0, 2.5])
    def test_dilation(self, quartic_chain: PotentialChain, t: float) -> None:
        u = smoothed_indicator(small_grid, 0.8, 0.1)
        dilated = dilate(u, t)
        assert mass(dilated, quartic_chain) == pytest.approx(
            mass(u, quartic_chain) / t, rel=1e-12
        )
        assert dirichlet_integral(dilated) == pytest.approx(
            dirichlet_integral(u), rel=1e-12
        )

    @pytest.mark.parametrize("dim, t", [(2, 0.5), (2, 3.0), (3, 2.0)])
    def test_energy_scaling(
        self, quartic_chain: PotentialChain, dim: int, t: float
    ) -> None:
        potentials = chain(quartic_chain.well, dim)
        u = smoothed_indicator(make_grid(dim, 0.1), ball_radius(dim), 0.1)
        eps = 0.05
        dilated = energy(dilate(u, t), potentials, eps).total
        rescaled = energy(u, potentials, eps * t ** (1 / dim)).total
        assert dilated == pytest.approx(rescaled / t ** ((dim - 1) / dim), rel=1e-10)

    def test_dilation_3d(self) -> None:
        grid = RadialGrid.from_nodes(3, np.linspace(0, 2, 41))
        u = smoothed_indicator(grid, 0.8, 0.1)
        assert dirichlet_integral(dilate(u, 8.0)) == pytest.approx(
            dirichlet_integral(u) / 2, rel=1e-12
        )

    def test_resample_monotone(self) -> None:
        u = smoothed_indicator(make_grid(2, 0.1), 0.5, 0.1)
        fine = resample(u, make_grid(2, 0.05))
        assert np.all(np.diff(fine.values) <= 0)

    def test_shift_interface(self) -> None:
        grid = make_grid(2, 0.05)
        u = smoothed_indicator(grid, 0.5, 0.05)
        shifted = shift_interface(u, 0.1)
        expected = smoothed_indicator(grid, 0.6, 0.05)
        assert np.max(np.abs(shifted.values - expected.values)) < 1e-3

    def test_restore_mass(self, quartic_chain: PotentialChain) -> None:
        grid = make_grid(2, 0.05)
        u = smoothed_indicator(grid, 0.3, 0.05)
        restored = restore_mass(u, quartic_chain, 0.05)
        assert mass(restored, quartic_chain) == pytest.approx(1.0, abs=1e-10)

    def test_quasi_triangle_constant(self) -> None:
        assert quasi_triangle_constant(2) == pytest.approx(0.5, abs=1e-5)
        assert quasi_triangle_constant(3) == pytest.approx(2 / 3, abs=1e-5)


class TestRearrangement:
    def test_monotone_fixed(self, quartic_chain: PotentialChain) -> None:
        u = smoothed_indicator(make_grid(2, 0.05), ball_radius(2), 0.05)
        star = rearrange(u, quartic_chain)
        levels = quartic_chain.V(star.values) - quartic_chain.V(u.values)
        assert np.max(np.abs(levels)) < 1e-10
        assert np.max(np.abs(star.values - u.values)) < 1e-6

    @given(nodal_values)
    def test_equimeasurable(
        self, quartic_chain: PotentialChain, values: list[float]
    ) -> None:
        u = RadialFunction(small_grid, np.array(values))
        star = rearrange(u, quartic_chain)
        assert np.all(np.diff(star.values) <= 0)
        assert mass(star, quartic_chain) == pytest.approx(
            mass(u, quartic_chain), rel=1e-9, abs=1e-12
        )

    def test_polya_szego(
        self, quartic_chain: PotentialChain, rng: np.random.Generator
    ) -> None:
        grid = make_grid(2, 0.05)
        for _ in range(10):
            bumps = sum(
                rng.uniform(0.3, 1)
                * np.exp(-(((grid.r - rng.uniform(0.3, 1.5)) / 0.1) ** 2))
                for _ in range(3)
            )
            u = RadialFunction(grid, bumps)
            star = rearrange(u, quartic_chain)
            assert dirichlet_integral(star) <= dirichlet_integral(u) * (1 + 1e-9)

    def test_without_chain(self) -> None:
        values = np.linspace(0, 1, small_grid.size)
        star = rearrange(RadialFunction(small_grid, values))
        assert np.all(np.diff(star.values) <= 0)
        assert small_grid.integrate(star.values) == pytest.approx(
            small_grid.integrate(values), rel=1e-12
        )
