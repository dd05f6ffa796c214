"""Tests for the circle discretization"""
import pytest
import sys
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.models import Mesh, PLFunction, PCFunction, PriorParams
from src.errors import MeshMismatchError
from src.circle import (
    derivative, apply_Dq, solve_Dq, cell_average, inner, norm, l2_project,
    fourier_and_sobolev, mass_matrix, hnu_matrix, dq_gram_matrix,
    l2_projection_matrix, prolongation_matrix,
)


def hat(n: int, j: int = 0) -> PLFunction:
    nodal = np.zeros(2 ** n)
    nodal[j] = 1.0
    return PLFunction(Mesh(n), nodal)


class TestMeshAndFunctions:
    """Mesh bookkeeping and PL/PC evaluation"""

    def test_mesh_sizes(self):
        mesh = Mesh(3)
        assert mesh.N == 8
        assert mesh.h == 0.125
        assert np.allclose(np.diff(mesh.cell_edges()), 0.125)

    def test_negative_level_rejected(self):
        with pytest.raises(ValueError):
            Mesh(-1)

    def test_pl_evaluation_is_periodic_and_linear(self):
        f = PLFunction(Mesh(2), [0.0, 1.0, 3.0, 2.0])
        assert f(0.25) == pytest.approx(1.0)
        assert f(0.375) == pytest.approx(2.0)
        # last cell interpolates back to the value at 0
        assert f(0.875) == pytest.approx(1.0)
        assert f(1.0) == pytest.approx(f(0.0))

    def test_prolong_then_restrict_is_identity(self):
        rng = np.random.default_rng(1)
        f = PLFunction(Mesh(3), rng.standard_normal(8))
        back = f.prolong(2).restrict(2)
        assert np.array_equal(back.nodal, f.nodal)

    def test_prolongation_represents_same_function(self):
        rng = np.random.default_rng(2)
        f = PLFunction(Mesh(2), rng.standard_normal(4))
        x = rng.random(50)
        assert np.allclose(f.prolong(3)(x), f(x))

    def test_nodal_values_are_read_only(self):
        f = PLFunction.constant(Mesh(1), 2.0)
        with pytest.raises(ValueError):
            f.nodal[0] = 5.0

    def test_arithmetic_checks_mesh(self):
        with pytest.raises(MeshMismatchError):
            PLFunction.constant(Mesh(1)) + PLFunction.constant(Mesh(2))

    def test_pc_integral(self):
        g = PCFunction(Mesh(2), [1.0, 2.0, 3.0, 6.0])
        assert g.integral() == pytest.approx(3.0)


class TestDerivativeAndDq:
    """Exact derivative, D_q and its inverse"""

    def setup_method(self):
        self.p = PriorParams(epsilon=0.1, q=4)

    def test_hat_slopes_level_one(self):
        g = derivative(PLFunction(Mesh(1), [1.0, 0.0]))
        assert np.allclose(g.cellvals, [-2.0, 2.0])

    def test_hat_slopes_level_two(self):
        g = derivative(PLFunction(Mesh(2), [0.0, 1.0, 0.0, 0.0]))
        assert np.allclose(g.cellvals, [4.0, -4.0, 0.0, 0.0])

    def test_constant_has_zero_derivative(self):
        g = derivative(PLFunction.constant(Mesh(3), 7.0))
        assert np.all(g.cellvals == 0.0)

    def test_dq_of_one(self):
        """D_q 1 = eps**q = 1e-4 for eps=0.1, q=4"""
        g = apply_Dq(PLFunction.constant(Mesh(2)), self.p)
        assert np.allclose(g.cellvals, 1e-4)

    def test_dq_of_mean_zero_is_derivative(self):
        f = PLFunction(Mesh(2), [1.0, -1.0, 2.0, -2.0])
        assert np.allclose(apply_Dq(f, self.p).cellvals, derivative(f).cellvals)

    def test_solve_dq_of_constant(self):
        u = solve_Dq(PCFunction.constant(Mesh(3), 1e-4), self.p)
        assert np.allclose(u.nodal, 1.0)

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        for n in range(0, 6):
            f = PLFunction(Mesh(n), rng.standard_normal(2 ** n))
            back = solve_Dq(apply_Dq(f, self.p), self.p)
            assert np.allclose(back.nodal, f.nodal, rtol=1e-12, atol=1e-10)
            g = PCFunction(Mesh(n), rng.standard_normal(2 ** n))
            again = apply_Dq(solve_Dq(g, self.p), self.p)
            assert np.max(np.abs(again.cellvals - g.cellvals)) <= 1e-12 * max(1.0, np.max(np.abs(g.cellvals))) * 2 ** n

    def test_hat_recovered_from_its_image(self):
        f = PLFunction(Mesh(1), [1.0, 0.0])
        u = solve_Dq(apply_Dq(f, self.p), self.p)
        assert np.allclose(u.nodal, [1.0, 0.0])


class TestCellAverage:
    """Q_n on PL, PC and callables"""

    def test_ramp(self):
        avg = cell_average(PLFunction(Mesh(1), [0.0, 1.0]), Mesh(1))
        assert np.allclose(avg.cellvals, [0.5, 0.5])

    def test_constant_fixed(self):
        avg = cell_average(lambda x: np.full_like(x, 3.0), Mesh(4))
        assert np.allclose(avg.cellvals, 3.0)

    def test_constant_callable_is_exact(self):
        avg = cell_average(lambda x: np.full_like(x, 0.7), Mesh(5))
        assert np.array_equal(avg.cellvals, np.full(32, 0.7))

    def test_scalar_callable(self):
        avg = cell_average(lambda x: 2.5, Mesh(2))
        assert np.array_equal(avg.cellvals, np.full(4, 2.5))

    def test_sine_closed_form(self):
        """Cell j mean of sin(2 pi x) equals N/(2 pi) (cos(2 pi x_j) - cos(2 pi x_{j+1}))"""
        mesh = Mesh(3)
        avg = cell_average(lambda x: np.sin(2 * np.pi * x), mesh)
        edges = mesh.cell_edges()
        expected = mesh.N / (2 * np.pi) * (np.cos(2 * np.pi * edges[:-1]) - np.cos(2 * np.pi * edges[1:]))
        assert np.allclose(avg.cellvals, expected, atol=1e-13)

    def test_consistent_across_levels(self):
        rng = np.random.default_rng(4)
        f = PLFunction(Mesh(3), rng.standard_normal(8))
        fine = cell_average(f.prolong(1), Mesh(4)).cellvals
        coarse = cell_average(f, Mesh(3)).cellvals
        assert np.allclose(fine.reshape(8, 2).mean(axis=1), coarse)


class TestInnerProducts:
    """Exact quadrature of the three inner products"""

    def setup_method(self):
        self.rng = np.random.default_rng(5)

    def test_hnu_norm_of_one(self):
        p = PriorParams(epsilon=0.25)
        assert inner(PLFunction.constant(Mesh(3)), PLFunction.constant(Mesh(3)), 'Hnu', p) == pytest.approx(1.0)

    def test_dq_norm_of_one(self):
        p = PriorParams(epsilon=0.1, q=4)
        one = PLFunction.constant(Mesh(2))
        assert inner(one, one, 'Dq', p) == pytest.approx(1e-8, rel=1e-12)

    def test_hat_l2_norm(self):
        for n in (1, 3, 5):
            assert inner(hat(n), hat(n)) == pytest.approx(2.0 / (3 * 2 ** n))

    def test_simpson_matches_high_order_gauss(self):
        n = 3
        f = PLFunction(Mesh(n), self.rng.standard_normal(8))
        g = PLFunction(Mesh(n), self.rng.standard_normal(8))
        nodes, weights = leggauss(64)
        total = 0.0
        for j in range(8):
            x = (j + 0.5 * (nodes + 1.0)) / 8
            total += 0.5 / 8 * np.sum(weights * f(x) * g(x))
        assert inner(f, g) == pytest.approx(total, abs=1e-13)

    def test_hnu_decomposition(self):
        p = PriorParams(epsilon=0.3)
        f = PLFunction(Mesh(4), self.rng.standard_normal(16))
        g = PLFunction(Mesh(4), self.rng.standard_normal(16))
        expected = inner(f, g) / (4 * 0.3) + 0.3 * inner(derivative(f), derivative(g))
        assert inner(f, g, 'Hnu', p) == pytest.approx(expected, rel=1e-13)

    def test_matrices_agree_with_function_level(self):
        p = PriorParams(epsilon=0.2, q=3)
        f = PLFunction(Mesh(3), self.rng.standard_normal(8))
        g = PLFunction(Mesh(3), self.rng.standard_normal(8))
        assert f.nodal @ mass_matrix(3) @ g.nodal == pytest.approx(inner(f, g), rel=1e-12)
        assert f.nodal @ hnu_matrix(3, p) @ g.nodal == pytest.approx(inner(f, g, 'Hnu', p), rel=1e-12)
        assert f.nodal @ dq_gram_matrix(3, p) @ g.nodal == pytest.approx(inner(f, g, 'Dq', p), rel=1e-10)

    def test_small_meshes(self):
        assert mass_matrix(0)[0, 0] == pytest.approx(1.0)
        assert np.allclose(mass_matrix(1), [[1 / 3, 1 / 6], [1 / 6, 1 / 3]])

    def test_mesh_mismatch(self):
        with pytest.raises(MeshMismatchError):
            inner(hat(2), hat(3))

    def test_mixed_pl_pc(self):
        f = PLFunction(Mesh(1), [0.0, 1.0])
        g = PCFunction.constant(Mesh(1), 2.0)
        assert inner(f, g) == pytest.approx(1.0)


class TestL2Projection:
    """P_k onto coarser levels"""

    def setup_method(self):
        self.rng = np.random.default_rng(6)

    def test_fixes_coarse_functions(self):
        f = PLFunction(Mesh(2), self.rng.standard_normal(4))
        assert np.allclose(l2_project(f.prolong(2), 2).nodal, f.nodal)

    def test_self_adjoint(self):
        f = PLFunction(Mesh(4), self.rng.standard_normal(16))
        g = PLFunction(Mesh(4), self.rng.standard_normal(16))
        lhs = inner(l2_project(f, 2).prolong(2), g)
        rhs = inner(f, l2_project(g, 2).prolong(2))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_idempotent_and_contractive(self):
        f = PLFunction(Mesh(5), self.rng.standard_normal(32))
        once = l2_project(f, 3)
        twice = l2_project(once, 3)
        assert np.allclose(once.nodal, twice.nodal)
        assert norm(once) <= norm(f) + 1e-14

    def test_fine_hat_against_normal_equations(self):
        k = 2
        f = hat(k + 1, 1)
        P = prolongation_matrix(k, k + 1)
        M = mass_matrix(k + 1)
        # least squares in the L2 metric of the fine level
        c = np.linalg.solve(P.T @ M @ P, P.T @ M @ f.nodal)
        assert np.allclose(l2_project(f, k).nodal, c, atol=1e-13)

    def test_level_above_rejected(self):
        with pytest.raises(ValueError):
            l2_project(hat(2), 3)
        with pytest.raises(ValueError):
            l2_projection_matrix(2, 3)


class TestFourier:
    """Closed-form Fourier coefficients of PL functions"""

    def test_constant(self):
        summary = fourier_and_sobolev(PLFunction.constant(Mesh(3)), J=20, t=0.7)
        assert summary.coeffs[summary.J] == pytest.approx(1.0)
        others = np.delete(summary.coeffs, summary.J)
        assert np.max(np.abs(others)) < 1e-14
        assert summary.sobolev_norm == pytest.approx(1.0)

    def test_hat_transform(self):
        n = 3
        summary = fourier_and_sobolev(hat(n), J=40)
        j = summary.freqs
        expected = np.sinc(j / 8) ** 2 / 8
        assert np.allclose(summary.coeffs, expected, atol=1e-15)

    def test_hat_against_quadrature(self):
        f = hat(2, 1)
        nodes, weights = leggauss(32)
        for freq in (1, 3, 5):
            total = 0.0
            for c in range(4):
                x = (c + 0.5 * (nodes + 1.0)) / 4
                total += 0.5 / 4 * np.sum(weights * f(x) * np.exp(-2j * np.pi * freq * x))
            summary = fourier_and_sobolev(f, J=8)
            assert summary.coeffs[summary.J + freq] == pytest.approx(total, abs=1e-14)

    def test_parseval(self):
        rng = np.random.default_rng(7)
        f = PLFunction(Mesh(3), rng.standard_normal(8))
        summary = fourier_and_sobolev(f, t=0.0)
        # tail beyond J = 16N is bounded by sum of sinc^4 terms
        assert summary.sobolev_norm == pytest.approx(norm(f), rel=1e-4)
        assert summary.J == 128

    def test_default_band(self):
        assert fourier_and_sobolev(hat(2)).J == 64
