"""Unit tests for Q1 assembly and fine solves."""

import math

import numpy as np
import pytest

from expected_operator.core.errors import DimensionMismatch, ResolutionError
from expected_operator.core.models import CoeffSample, PiecewiseConstant
from expected_operator.mesh.fem import (
    assemble_mass,
    assemble_stiffness,
    cell_integrals,
    element_coefficients,
    element_energies,
    energy_norm,
    h1_seminorm,
    l2_distance_to_pc,
    laplacian,
    load_vector,
    solve_dirichlet,
)
from expected_operator.mesh.grid import FineGrid
from expected_operator.sampling.randfield import constant_sample


class TestAssembly:
    """Tests for stiffness and mass assembly."""

    def test_stiffness_is_symmetric_positive_definite(
        self, sample_2d: CoeffSample, fine_2d: FineGrid
    ) -> None:
        K = assemble_stiffness(sample_2d, fine_2d).toarray()
        assert np.allclose(K, K.T)
        assert np.linalg.eigvalsh(K).min() > 0.0

    def test_constant_coefficient_scales_laplacian(self, fine_2d: FineGrid) -> None:
        K = assemble_stiffness(constant_sample(2, 3.0), fine_2d)
        assert np.allclose(K.toarray(), 3.0 * laplacian(fine_2d).toarray())

    def test_1d_laplacian_stencil(self) -> None:
        fine = FineGrid(1, 3)
        K = laplacian(fine).toarray()
        assert K[2, 1:4].tolist() == pytest.approx([-8.0, 16.0, -8.0])

    def test_full_mass_integrates_one(self, fine_2d: FineGrid) -> None:
        M = assemble_mass(fine_2d, eliminate=False)
        ones = np.ones(fine_2d.n_nodes)
        assert float(ones @ (M @ ones)) == pytest.approx(1.0)

    def test_coefficient_on_elements(
        self, sample_1d: CoeffSample, fine_1d: FineGrid
    ) -> None:
        values = element_coefficients(sample_1d, fine_1d)
        # eps level 3 on J=5: four fine elements per coefficient cell
        assert np.array_equal(values, np.repeat(sample_1d.values, 4))

    def test_unresolved_coefficient(self, sample_1d: CoeffSample) -> None:
        with pytest.raises(ResolutionError):
            element_coefficients(sample_1d, FineGrid(1, 2))

    def test_dimension_mismatch(
        self, sample_1d: CoeffSample, fine_2d: FineGrid
    ) -> None:
        with pytest.raises(DimensionMismatch):
            assemble_stiffness(sample_1d, fine_2d)

    def test_grid_without_interior_nodes(self) -> None:
        with pytest.raises(ResolutionError):
            assemble_stiffness(constant_sample(1), FineGrid(1, 0))


class TestCellIntegrals:
    """Tests for exact cell integrals."""

    def test_row_sums_are_cell_volumes(self, fine_2d: FineGrid) -> None:
        B = cell_integrals(fine_2d, 2, boundary=True)
        assert np.allclose(np.asarray(B.sum(axis=1)).ravel(), 1.0 / 16)

    def test_integral_of_linear_function(self) -> None:
        fine = FineGrid(1, 4)
        x = fine.node_coordinates()[:, 0]
        integrals = cell_integrals(fine, 1, boundary=True) @ x
        assert integrals.tolist() == pytest.approx([1 / 8, 3 / 8])

    def test_load_vector_of_one(self, fine_1d: FineGrid) -> None:
        f = PiecewiseConstant(1, 0, np.ones(1))
        assert np.allclose(load_vector(f, fine_1d), fine_1d.h)


class TestSolveDirichlet:
    """Tests for fine Galerkin solves."""

    def test_1d_poisson_is_nodally_exact(self, fine_1d: FineGrid) -> None:
        f = PiecewiseConstant(1, 0, np.ones(1))
        solve = solve_dirichlet(laplacian(fine_1d), load_vector(f, fine_1d))
        x = fine_1d.dof_coordinates()[:, 0]
        assert solve.converged
        assert np.allclose(solve.u, x * (1 - x) / 2, atol=1e-9)

    def test_zero_rhs(self, fine_1d: FineGrid) -> None:
        solve = solve_dirichlet(laplacian(fine_1d), np.zeros(fine_1d.n_dofs))
        assert solve.iterations == 0
        assert not solve.u.any()

    def test_non_convergence_is_flagged(self, fine_1d: FineGrid) -> None:
        f = PiecewiseConstant(1, 0, np.ones(1))
        solve = solve_dirichlet(laplacian(fine_1d), load_vector(f, fine_1d), maxit=2)
        assert not solve.converged
        assert solve.residual > 1e-10

    def test_rhs_shape_mismatch(self, fine_1d: FineGrid) -> None:
        with pytest.raises(DimensionMismatch):
            solve_dirichlet(laplacian(fine_1d), np.ones(3))


class TestNorms:
    """Tests for energy, H1 and L2 distances."""

    def test_h1_seminorm_of_sine(self) -> None:
        fine = FineGrid(1, 8)
        v = fine.interpolate(lambda x: np.sin(math.pi * x))
        assert h1_seminorm(v, fine) == pytest.approx(math.pi / math.sqrt(2), rel=1e-3)

    def test_element_energies_sum_to_energy(
        self, sample_1d: CoeffSample, fine_1d: FineGrid
    ) -> None:
        rng = np.random.default_rng(0)
        u = rng.standard_normal(fine_1d.n_dofs)
        K = assemble_stiffness(sample_1d, fine_1d)
        total = element_energies(u, sample_1d, fine_1d).sum()
        assert total == pytest.approx(energy_norm(K, u) ** 2)

    def test_l2_distance_of_zero_to_constant(self, fine_1d: FineGrid) -> None:
        pc = PiecewiseConstant(1, 1, np.array([2.0, 2.0]))
        distance = l2_distance_to_pc(np.zeros(fine_1d.n_dofs), pc, fine_1d)
        assert distance == pytest.approx(2.0)

    def test_l2_distance_to_own_mean(self) -> None:
        """The coarsest hat against its own cell means."""
        fine = FineGrid(1, 1)
        u = np.array([1.0])  # hat peaking at 1/2
        pc = PiecewiseConstant(1, 1, np.array([0.5, 0.5]))
        # int (2x - 1/2)^2 over [0, 1/2], twice
        assert l2_distance_to_pc(u, pc, fine) ** 2 == pytest.approx(1 / 12)


class TestInvariants:
    """Spectral and consistency properties of the discretization."""

    def test_stiffness_between_contrast_bounds(
        self, sample_2d: CoeffSample, fine_2d: FineGrid
    ) -> None:
        K = assemble_stiffness(sample_2d, fine_2d)
        K1 = laplacian(fine_2d)
        rng = np.random.default_rng(4)
        for _ in range(10):
            v = rng.standard_normal(fine_2d.n_dofs)
            energy, unit = float(v @ (K @ v)), float(v @ (K1 @ v))
            assert 0.5 * unit * (1 - 1e-12) <= energy <= 2.0 * unit * (1 + 1e-12)

    def test_constants_are_in_the_kernel_before_elimination(
        self, sample_2d: CoeffSample, fine_2d: FineGrid
    ) -> None:
        K = assemble_stiffness(sample_2d, fine_2d, eliminate=False)
        assert np.allclose(K @ np.ones(fine_2d.n_nodes), 0.0, atol=1e-12)

    def test_l2_error_drops_fourfold_per_refinement(self) -> None:
        """-u'' = 1 with u = x(1 - x)/2; Gauss quadrature of the error."""
        points, weights = np.polynomial.legendre.leggauss(3)
        errors = []
        for J in (3, 4, 5, 6):
            fine = FineGrid(1, J)
            one = PiecewiseConstant(1, 0, np.ones(1))
            u = fine.extend(solve_dirichlet(laplacian(fine), load_vector(one, fine)).u)
            total = 0.0
            for e in range(2**J):
                a = e * fine.h
                x = a + 0.5 * fine.h * (points + 1.0)
                uh = u[e] + (u[e + 1] - u[e]) * (x - a) / fine.h
                total += 0.5 * fine.h * float(weights @ (x * (1 - x) / 2 - uh) ** 2)
            errors.append(math.sqrt(total))
        for coarse, finer in zip(errors, errors[1:], strict=False):
            assert 3.5 < coarse / finer < 4.5
