"""
Hierarchical orthonormal bases of PL(n), the change-of-basis matrix S and
the conditional covariance C(v).
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cholesky, solve_triangular, LinAlgError

from .circle import gram_matrix, derivative_matrix, dq_apply, cell_average, INNER_KINDS
from .data_loader import DataLoader
from .errors import MeshMismatchError, NotPositiveDefiniteError, NumericalError
from .models import Mesh, PLFunction, PriorParams

logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def hierarchical_generators(n: int) -> np.ndarray:
    """
    Nodal columns of the generator sequence of PL(n): the constant, then the
    midpoint hats introduced at each level m = 1..n, left to right.
    """
    N = 2 ** n
    cols = [np.ones(N)]
    for m in range(1, n + 1):
        for i in range(1, 2 ** m, 2):
            e = np.zeros(2 ** m)
            e[i] = 1.0
            cols.append(PLFunction(Mesh(m), e).prolong(n - m).nodal)
    H = np.column_stack(cols)
    H.setflags(write=False)
    return H


@lru_cache(maxsize=None)
def _generator_inverse(n: int) -> np.ndarray:
    Hinv = np.linalg.inv(hierarchical_generators(n))
    Hinv.setflags(write=False)
    return Hinv


@dataclass(frozen=True, eq=False)
class HierarchicalBasis:
    """
    Orthonormal basis of PL(n) in the inner product `kind`.

    Column j of `columns` holds the nodal values of basis vector b_{j+1};
    the first 2**m columns span PL(m) for every m <= n. `chol` is the lower
    Cholesky factor R of the generator Gram matrix, so columns = H R^{-T}.
    """
    mesh: Mesh
    kind: str
    columns: np.ndarray
    chol: np.ndarray
    params: Optional[PriorParams] = None

    def _check(self, f: PLFunction) -> None:
        if f.mesh != self.mesh:
            raise MeshMismatchError(f"basis on level {self.mesh.n}, function on level {f.mesh.n}")

    def coords(self, f: PLFunction) -> np.ndarray:
        """Coordinates <f, b_j>_kind, computed as R^T H^{-1} f."""
        self._check(f)
        return self.chol.T @ (_generator_inverse(self.mesh.n) @ f.nodal)

    def from_coords(self, c) -> PLFunction:
        """Inverse of coords(): the function sum_j c_j b_{j+1}."""
        c = np.asarray(c, dtype=float)
        if c.shape != (self.mesh.N,):
            raise MeshMismatchError(f"expected {self.mesh.N} coordinates, got {c.shape}")
        return PLFunction(self.mesh, self.columns @ c)

    def vector(self, j: int) -> PLFunction:
        """Basis vector b_{j+1} as a function."""
        return PLFunction(self.mesh, self.columns[:, j])


def _generator_gram(n: int, kind: str, p: Optional[PriorParams]) -> np.ndarray:
    H = hierarchical_generators(n)
    return H.T @ gram_matrix(n, kind, p) @ H


def _cholesky(G: np.ndarray, kind: str, n: int) -> np.ndarray:
    """Lower Cholesky factor, with failures reported as NotPositiveDefiniteError."""
    try:
        return cholesky(G, lower=True)
    except LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{kind} Gram matrix on level {n} is not positive definite") from exc


def _dq_factor(n: int, p: PriorParams) -> np.ndarray:
    """
    Cholesky factor of the D_q generator Gram, built without forming it.

    The Gram is eps**2q on the constant and the stiffness Gram on mean-zero
    functions, with no coupling between them. Subtracting the generator
    means (a unit upper-triangular change T) makes it block diagonal; the
    factor of the original Gram is then T^{-T} blockdiag(eps**q, R1).
    """
    H = hierarchical_generators(n)
    N = H.shape[0]
    R = np.zeros((N, N))
    R[0, 0] = p.eps_q
    if N > 1:
        means = H[:, 1:].mean(axis=0)
        DH = derivative_matrix(n) @ (H[:, 1:] - means)
        R[1:, 1:] = _cholesky(DH.T @ DH / N, 'Dq', n)
        R[1:, 0] = p.eps_q * means
    return R


def _orthonormalize(n: int, kind: str, p: Optional[PriorParams]) -> Tuple[np.ndarray, np.ndarray]:
    H = hierarchical_generators(n)
    if kind == 'Dq':
        R = _dq_factor(n, p)
        # the constant column is exact; the rest are mean-zero combinations
        B = np.empty_like(H)
        B[:, 0] = 1.0 / p.eps_q
        if H.shape[1] > 1:
            centred = H[:, 1:] - H[:, 1:].mean(axis=0)
            B[:, 1:] = solve_triangular(R[1:, 1:], centred.T, lower=True).T
    else:
        R = _cholesky(_generator_gram(n, kind, p), kind, n)
        # B = H R^{-T}: column j combines generators 0..j only
        B = solve_triangular(R, H.T, lower=True).T
    first = np.argmax(np.abs(B) > 1e-14 * np.max(np.abs(B), axis=0), axis=0)
    signs = np.sign(B[first, np.arange(B.shape[1])])
    return B * signs, R * signs


def _cache_file(cache_dir: Path, n: int, kind: str, p: Optional[PriorParams]) -> Path:
    if p is None:
        return cache_dir / f"basis_n{n}_{kind}.bin"
    return cache_dir / f"basis_n{n}_{kind}_eps{p.epsilon!r}_q{p.q!r}.bin"


@lru_cache(maxsize=64)
def _build_factors(n: int, kind: str, p: Optional[PriorParams],
                   cache_dir: Optional[str]) -> Tuple[np.ndarray, np.ndarray]:
    """Basis columns and Cholesky factor, read from or written to the matrix cache when cache_dir is set."""
    path = None
    if cache_dir is not None:
        path = _cache_file(Path(cache_dir), n, kind, p)
        if path.exists():
            header, stacked = DataLoader.load_matrix_dump(str(path))
            if header.get('n') == n and header.get('kind') == kind and stacked.shape == (2, 2 ** n, 2 ** n):
                logger.info(f"Basis cache hit: {path}")
                columns, chol = stacked[0].copy(), stacked[1].copy()
                columns.setflags(write=False)
                chol.setflags(write=False)
                return columns, chol
            logger.warning(f"Ignoring mismatched basis cache file {path}")
        else:
            logger.info(f"Basis cache miss: {path}")

    columns, chol = _orthonormalize(n, kind, p)
    if path is not None:
        header = {'n': n, 'kind': kind,
                  'epsilon': None if p is None else p.epsilon,
                  'q': None if p is None else p.q,
                  'layout': ['columns', 'chol']}
        DataLoader.save_matrix_dump(str(path), header, np.stack([columns, chol]))
    columns.setflags(write=False)
    chol.setflags(write=False)
    return columns, chol


def build_basis(n: int, kind: str, p: Optional[PriorParams] = None,
                cache_dir: Optional[str] = None) -> HierarchicalBasis:
    """
    Gram-Cholesky orthonormalization of the hierarchical generators.

    kind is 'Hnu' for {g_j}, 'Dq' for {f_j} or 'L2' for the measurement
    coordinates. Each vector's first nonzero nodal value is positive.
    """
    if n < 0:
        raise ValueError("level n must be nonnegative")
    if kind not in INNER_KINDS:
        raise ValueError(f"unknown basis kind: {kind}")
    if kind == 'L2':
        p = None
    elif p is None:
        raise ValueError(f"{kind} basis needs PriorParams")
    columns, chol = _build_factors(n, kind, p, None if cache_dir is None else str(cache_dir))
    return HierarchicalBasis(Mesh(n), kind, columns, chol, p)


@dataclass(frozen=True, eq=False)
class SMatrix:
    """S_jk = <D_q f_k, sqrt(N) 1_{K_j}>; orthogonal."""
    entries: np.ndarray
    mesh: Mesh
    params: PriorParams


def build_S(n: int, fbasis: HierarchicalBasis, p: PriorParams) -> SMatrix:
    """
    Matrix S of D_q f_j / sqrt(N) on the cells, one column per D_q-orthonormal basis vector f_j.

    Args:
        n: Mesh level
        fbasis: D_q-orthonormal basis on level n
        p: Prior parameters

    Returns:
        SMatrix whose entries are orthogonal (S^T S = I)
    """
    if fbasis.kind != 'Dq':
        raise ValueError("S is built from the D_q-orthonormal basis")
    if fbasis.mesh.n != n:
        raise MeshMismatchError(f"basis on level {fbasis.mesh.n}, requested level {n}")
    entries = dq_apply(n, p, fbasis.columns) / np.sqrt(2 ** n)
    entries.setflags(write=False)
    return SMatrix(entries, Mesh(n), p)


@dataclass(frozen=True, eq=False)
class CondCovariance:
    """Covariance of the U-coordinates given V = v: C = S^T diag(L) S."""
    vbar: np.ndarray
    C: np.ndarray
    L_diag: np.ndarray
    sqrt_factor: np.ndarray

    @property
    def log_det(self) -> float:
        return float(np.sum(np.log(self.L_diag)))

    def det(self) -> float:
        return float(np.prod(self.L_diag))

    def precision(self, S: SMatrix) -> np.ndarray:
        """Inverse of C as S^T diag(1/L) S."""
        return S.entries.T @ (S.entries / self.L_diag[:, None])


def build_C(v: PLFunction, fbasis: HierarchicalBasis, S: SMatrix, p: PriorParams) -> CondCovariance:
    """
    C_jk = <Lambda_n(v) D_q f_j, D_q f_k>, built from the defining integrals
    and from the factorization S^T L S; the two must agree.
    """
    if v.mesh != fbasis.mesh or S.mesh != fbasis.mesh:
        raise MeshMismatchError("v, basis and S must share one mesh")
    N = v.mesh.N
    vbar = cell_average(v, v.mesh).cellvals.copy()
    L = 1.0 / (p.eps2 + vbar ** 2)

    DqF = dq_apply(v.mesh.n, p, fbasis.columns)
    direct = DqF.T @ (DqF * L[:, None]) / N
    factored = S.entries.T @ (S.entries * L[:, None])
    scale = max(1.0, float(np.max(np.abs(factored))))
    mismatch = float(np.max(np.abs(direct - factored)))
    if mismatch > 1e-10 * scale:
        raise NumericalError(f"C assembled two ways differs by {mismatch:.3e}")

    C = 0.5 * (factored + factored.T)
    sqrt_factor = S.entries.T @ (S.entries * np.sqrt(L)[:, None])
    for arr in (vbar, C, L, sqrt_factor):
        arr.setflags(write=False)
    return CondCovariance(vbar=vbar, C=C, L_diag=L, sqrt_factor=sqrt_factor)
