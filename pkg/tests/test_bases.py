"""Tests for hierarchical bases, S and the conditional covariance"""
import pytest
import sys
from pathlib import Path

import numpy as np
from scipy.linalg import cholesky

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.models import Mesh, PLFunction, PriorParams
from src.errors import MeshMismatchError
from src.circle import inner, norm, derivative, apply_Dq, l2_project, gram_matrix
from src.bases import build_basis, build_S, build_C, hierarchical_generators


def gram_of(basis, p):
    N = basis.mesh.N
    G = np.empty((N, N))
    for i in range(N):
        for j in range(N):
            G[i, j] = inner(basis.vector(i), basis.vector(j), basis.kind, p)
    return G


class TestGenerators:
    """Hierarchical generator ordering"""

    def test_count_and_order(self):
        H = hierarchical_generators(2)
        assert H.shape == (4, 4)
        assert np.allclose(H[:, 0], 1.0)
        # level 1 midpoint hat peaks at x = 1/2
        assert np.allclose(H[:, 1], [0.0, 0.5, 1.0, 0.5])
        # level 2 hats left to right
        assert np.allclose(H[:, 2], [0.0, 1.0, 0.0, 0.0])
        assert np.allclose(H[:, 3], [0.0, 0.0, 0.0, 1.0])


class TestBuildBasis:
    """Orthonormality, nesting and sign convention"""

    def test_level_zero_hnu(self):
        basis = build_basis(0, 'Hnu', PriorParams(epsilon=0.25))
        assert basis.columns.shape == (1, 1)
        assert basis.columns[0, 0] == pytest.approx(1.0)

    def test_level_zero_dq(self):
        p = PriorParams(epsilon=0.1, q=4)
        basis = build_basis(0, 'Dq', p)
        assert basis.columns[0, 0] == pytest.approx(1e4)

    def test_dq_first_vector_for_small_epsilon(self):
        p = PriorParams(epsilon=1e-3, q=4)
        basis = build_basis(4, 'Dq', p)
        assert np.allclose(basis.columns[:, 0], 1e12, rtol=1e-12)
        # remaining vectors have zero mean
        assert np.max(np.abs(basis.columns[:, 1:].mean(axis=0))) < 1e-12

    def test_dq_orthonormal_for_small_epsilon(self):
        p = PriorParams(epsilon=1e-3, q=4)
        basis = build_basis(4, 'Dq', p)
        assert np.allclose(gram_of(basis, p), np.eye(16), atol=1e-10)
        f = PLFunction(Mesh(4), np.random.default_rng(12).standard_normal(16))
        assert np.allclose(basis.from_coords(basis.coords(f)).nodal, f.nodal, atol=1e-10)

    def test_dq_chol_factors_generator_gram(self):
        p = PriorParams(epsilon=0.5, q=4)
        basis = build_basis(3, 'Dq', p)
        H = hierarchical_generators(3)
        G = H.T @ gram_matrix(3, 'Dq', p) @ H
        assert np.allclose(basis.chol @ basis.chol.T, G, atol=1e-12)
        assert np.allclose(np.triu(basis.chol, 1), 0.0)

    @pytest.mark.parametrize("kind", ['Hnu', 'Dq', 'L2'])
    def test_orthonormal(self, kind):
        rng = np.random.default_rng(10)
        p = PriorParams(epsilon=float(rng.uniform(0.05, 0.9)), q=4)
        basis = build_basis(3, kind, p)
        assert np.allclose(gram_of(basis, p), np.eye(8), atol=1e-10)

    @pytest.mark.parametrize("kind", ['Hnu', 'Dq'])
    def test_nested_spans(self, kind):
        p = PriorParams(epsilon=0.2, q=4)
        n = 5
        basis = build_basis(n, kind, p)
        for m in range(n):
            for j in range(2 ** m):
                b = basis.vector(j)
                back = l2_project(b, m).prolong(n - m)
                assert np.allclose(back.nodal, b.nodal, atol=1e-10 * max(1.0, np.max(np.abs(b.nodal))))

    def test_leading_columns_match_coarse_basis(self):
        p = PriorParams(epsilon=0.3, q=4)
        coarse = build_basis(2, 'Hnu', p)
        fine = build_basis(4, 'Hnu', p)
        for j in range(4):
            assert np.allclose(coarse.vector(j).prolong(2).nodal, fine.columns[:, j], atol=1e-9)

    def test_first_nonzero_value_positive(self):
        basis = build_basis(4, 'Hnu', PriorParams(epsilon=0.1))
        for j in range(16):
            col = basis.columns[:, j]
            first = col[np.abs(col) > 1e-12][0]
            assert first > 0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            build_basis(2, 'H1', PriorParams(epsilon=0.1))

    def test_cache_round_trip(self, tmp_path):
        p = PriorParams(epsilon=0.37, q=3.5)
        first = build_basis(3, 'Dq', p, cache_dir=str(tmp_path))
        files = list(tmp_path.glob('*.bin'))
        assert len(files) == 1
        with open(files[0], 'rb') as f:
            assert f.read(4) == b'DCNV'
        from src.bases import _build_factors
        _build_factors.cache_clear()
        second = build_basis(3, 'Dq', p, cache_dir=str(tmp_path))
        assert np.array_equal(first.columns, second.columns)


class TestCoordinates:
    """Isometries between PL(n) and R^N"""

    def setup_method(self):
        self.rng = np.random.default_rng(11)

    def test_from_first_unit_vector(self):
        basis = build_basis(0, 'Hnu', PriorParams(epsilon=0.25))
        assert np.allclose(basis.from_coords([1.0]).nodal, [1.0])

    @pytest.mark.parametrize("kind", ['Hnu', 'Dq', 'L2'])
    def test_round_trip(self, kind):
        p = PriorParams(epsilon=1e-3, q=4)
        basis = build_basis(5, kind, p)
        f = PLFunction(Mesh(5), self.rng.standard_normal(32))
        back = basis.from_coords(basis.coords(f))
        assert np.max(np.abs(back.nodal - f.nodal)) <= 1e-10

    def test_unit_vectors(self):
        p = PriorParams(epsilon=0.2)
        basis = build_basis(3, 'Dq', p)
        for j in range(8):
            e = np.zeros(8)
            e[j] = 1.0
            assert np.allclose(basis.coords(basis.vector(j)), e, atol=1e-10)

    def test_hnu_isometry(self):
        p = PriorParams(epsilon=0.07)
        basis = build_basis(4, 'Hnu', p)
        f = PLFunction(Mesh(4), self.rng.standard_normal(16))
        expected = inner(f, f) / (4 * 0.07) + 0.07 * inner(derivative(f), derivative(f))
        assert np.sum(basis.coords(f) ** 2) == pytest.approx(expected, rel=1e-10)

    def test_mesh_mismatch(self):
        basis = build_basis(3, 'L2')
        with pytest.raises(MeshMismatchError):
            basis.coords(PLFunction.constant(Mesh(2)))


class TestSMatrix:
    """Change of basis between {f_j} and cell indicators"""

    def test_level_zero(self):
        p = PriorParams(epsilon=0.1)
        S = build_S(0, build_basis(0, 'Dq', p), p)
        assert np.allclose(S.entries, [[1.0]])

    @pytest.mark.parametrize("eps", [0.4, 1e-1, 1e-3])
    def test_orthogonal(self, eps):
        p = PriorParams(epsilon=eps, q=4)
        S = build_S(3, build_basis(3, 'Dq', p), p)
        assert np.max(np.abs(S.entries @ S.entries.T - np.eye(8))) <= 1e-10
        assert np.allclose(np.linalg.norm(S.entries, axis=0), 1.0)

    def test_requires_dq_basis(self):
        p = PriorParams(epsilon=0.1)
        with pytest.raises(ValueError):
            build_S(2, build_basis(2, 'Hnu', p), p)


class TestConditionalCovariance:
    """C(v) = S^T L S and its consequences"""

    def setup_method(self):
        self.rng = np.random.default_rng(12)

    def test_scalar_case(self):
        p = PriorParams(epsilon=1e-3)
        fb = build_basis(0, 'Dq', p)
        cov = build_C(PLFunction.constant(Mesh(0)), fb, build_S(0, fb, p), p)
        assert cov.C[0, 0] == pytest.approx(1.0 / (1.0 + 1e-6), rel=1e-12)

    def test_zero_v(self):
        p = PriorParams(epsilon=0.1)
        fb = build_basis(3, 'Dq', p)
        cov = build_C(PLFunction.zeros(Mesh(3)), fb, build_S(3, fb, p), p)
        assert np.allclose(cov.C, 100.0 * np.eye(8), atol=1e-8)

    @pytest.mark.parametrize("eps", [1e-1, 1e-3])
    def test_identities(self, eps):
        """Determinant, quadratic form and square root across levels and random v"""
        p = PriorParams(epsilon=eps, q=4)
        for n in range(0, 7):
            fb = build_basis(n, 'Dq', p)
            S = build_S(n, fb, p)
            for _ in range(3):
                v = PLFunction(Mesh(n), self.rng.standard_normal(2 ** n))
                cov = build_C(v, fb, S, p)
                a = p.eps2 + cov.vbar ** 2
                # det via Cholesky
                R = cholesky(cov.C, lower=True)
                logdet = 2.0 * np.sum(np.log(np.diag(R)))
                assert logdet == pytest.approx(-np.sum(np.log(a)), rel=1e-8, abs=1e-8)
                # quadratic form
                u = PLFunction(Mesh(n), self.rng.standard_normal(2 ** n))
                uc = fb.coords(u)
                quad = uc @ np.linalg.solve(cov.C, uc)
                dq = apply_Dq(u, p).cellvals
                integral = np.sum(a * dq ** 2) / 2 ** n
                assert quad == pytest.approx(integral, rel=1e-8)
                # square root
                root = cov.sqrt_factor
                assert np.max(np.abs(root @ root - cov.C)) <= 1e-9 * np.max(np.abs(cov.C))
