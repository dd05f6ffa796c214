"""
Discretization of the unit circle.

Function spaces PL(n)/PC(n), the perturbed derivative D_q, cell averaging Q_n,
inner products, L2 projection onto coarser levels and Fourier/Sobolev
utilities. Operator matrices are cached per level and returned read-only.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import cho_factor, cho_solve

from .errors import MeshMismatchError
from .models import Mesh, PLFunction, PCFunction, PriorParams
from config import FOURIER_OVERSAMPLING, DEFAULT_QUAD_ORDER

INNER_KINDS = ('L2', 'Hnu', 'Dq')


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Operators on functions
# ---------------------------------------------------------------------------

def derivative(f: PLFunction) -> PCFunction:
    """Exact weak derivative: slope N*(f_{j+1} - f_j) on each cell."""
    return PCFunction(f.mesh, f.mesh.N * (np.roll(f.nodal, -1) - f.nodal))


def apply_Dq(f: PLFunction, p: PriorParams) -> PCFunction:
    """D_q f = Df + eps**q * mean(f)."""
    return PCFunction(f.mesh, derivative(f).cellvals + p.eps_q * f.mean())


def solve_Dq(g: PCFunction, p: PriorParams) -> PLFunction:
    """Unique u in PL(n) with apply_Dq(u) = g."""
    N = g.mesh.N
    gbar = float(np.mean(g.cellvals))
    slopes = g.cellvals - gbar
    nodal = np.concatenate(([0.0], np.cumsum(slopes)[:-1])) / N
    nodal = nodal - np.mean(nodal) + gbar / p.eps_q
    return PLFunction(g.mesh, nodal)


def cell_average(f: Union[PLFunction, PCFunction, Callable], mesh: Mesh,
                 quad_order: int = DEFAULT_QUAD_ORDER) -> PCFunction:
    """
    Q_n f: the mean of f over each cell of `mesh`.

    PL and PC inputs on any dyadic level are averaged exactly; callables are
    integrated with Gauss-Legendre per cell.
    """
    if isinstance(f, PLFunction):
        if f.mesh.n < mesh.n:
            f = f.prolong(mesh.n - f.mesh.n)
        fine = 0.5 * (f.nodal + np.roll(f.nodal, -1))
        return PCFunction(mesh, fine.reshape(mesh.N, -1).mean(axis=1))
    if isinstance(f, PCFunction):
        if f.mesh.n < mesh.n:
            vals = np.repeat(f.cellvals, 2 ** (mesh.n - f.mesh.n))
        else:
            vals = f.cellvals.reshape(mesh.N, -1).mean(axis=1)
        return PCFunction(mesh, vals)

    nodes, weights = leggauss(quad_order)
    x = (np.arange(mesh.N)[:, None] + 0.5 * (nodes[None, :] + 1.0)) / mesh.N
    values = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    avg = values @ (weights / weights.sum())
    # constants come back exactly
    flat = np.all(values == values[:, :1], axis=1)
    avg[flat] = values[flat, 0]
    return PCFunction(mesh, avg)


def _samples(f: Union[PLFunction, PCFunction]):
    """Left, midpoint and right values on each cell."""
    if isinstance(f, PLFunction):
        left = f.nodal
        right = np.roll(f.nodal, -1)
        return left, 0.5 * (left + right), right
    if isinstance(f, PCFunction):
        return f.cellvals, f.cellvals, f.cellvals
    raise TypeError(f"expected PLFunction or PCFunction, got {type(f).__name__}")


def _l2(f, g) -> float:
    if f.mesh != g.mesh:
        raise MeshMismatchError(f"level {f.mesh.n} vs level {g.mesh.n}")
    lf, mf, rf = _samples(f)
    lg, mg, rg = _samples(g)
    # Simpson per cell, exact for products of degree <= 2
    return float(np.sum(lf * lg + 4.0 * mf * mg + rf * rg) * f.mesh.h / 6.0)


def inner(f, g, kind: str = 'L2', p: Optional[PriorParams] = None) -> float:
    """
    Inner product of two discrete functions on the same mesh.

    kind='L2' accepts PL or PC inputs; 'Hnu' and 'Dq' need PL inputs and
    prior parameters.
    """
    if kind == 'L2':
        return _l2(f, g)
    if kind not in INNER_KINDS:
        raise ValueError(f"unknown inner product kind: {kind}")
    if p is None:
        raise ValueError(f"{kind} inner product needs PriorParams")
    if not isinstance(f, PLFunction) or not isinstance(g, PLFunction):
        raise TypeError(f"{kind} inner product is defined on PL functions")
    if kind == 'Hnu':
        return _l2(f, g) / (4.0 * p.epsilon) + p.epsilon * _l2(derivative(f), derivative(g))
    return _l2(apply_Dq(f, p), apply_Dq(g, p))


def norm(f, kind: str = 'L2', p: Optional[PriorParams] = None) -> float:
    """Norm induced by inner(); same kinds and arguments."""
    return float(np.sqrt(inner(f, f, kind, p)))


# ---------------------------------------------------------------------------
# Matrices acting on nodal vectors (cached, read-only)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def mass_matrix(n: int) -> np.ndarray:
    """Gram matrix of the level-n hats in L2."""
    N = 2 ** n
    M = np.zeros((N, N))
    j = np.arange(N)
    idx = np.stack([j, (j + 1) % N], axis=1)
    local = np.array([[2.0, 1.0], [1.0, 2.0]]) / (6.0 * N)
    for a in range(2):
        for b in range(2):
            np.add.at(M, (idx[:, a], idx[:, b]), local[a, b])
    return _readonly(M)


@lru_cache(maxsize=None)
def derivative_matrix(n: int) -> np.ndarray:
    """Nodal values -> cell slopes."""
    N = 2 ** n
    D = np.zeros((N, N))
    j = np.arange(N)
    np.add.at(D, (j, j), -float(N))
    np.add.at(D, (j, (j + 1) % N), float(N))
    return _readonly(D)


@lru_cache(maxsize=None)
def stiffness_matrix(n: int) -> np.ndarray:
    """Gram matrix of the level-n hats in <Df, Dg>."""
    D = derivative_matrix(n)
    return _readonly(D.T @ D / D.shape[0])


@lru_cache(maxsize=None)
def cell_average_matrix(n: int) -> np.ndarray:
    """Q_n on PL(n): nodal values -> cell averages."""
    N = 2 ** n
    Q = np.zeros((N, N))
    j = np.arange(N)
    np.add.at(Q, (j, j), 0.5)
    np.add.at(Q, (j, (j + 1) % N), 0.5)
    return _readonly(Q)


def dq_apply(n: int, p: PriorParams, X: np.ndarray) -> np.ndarray:
    """
    D_q applied to nodal columns of X, returning cell values.

    The mean term is added after the derivative so that eps**q survives
    when it is far below the rounding level of the slopes.
    """
    X = np.asarray(X, dtype=float)
    return derivative_matrix(n) @ X + p.eps_q * X.mean(axis=0)


@lru_cache(maxsize=None)
def hnu_matrix(n: int, p: PriorParams) -> np.ndarray:
    """Gram matrix of the level-n hats in the H(nu) inner product."""
    return _readonly(mass_matrix(n) / (4.0 * p.epsilon) + p.epsilon * stiffness_matrix(n))


@lru_cache(maxsize=None)
def dq_gram_matrix(n: int, p: PriorParams) -> np.ndarray:
    """Gram matrix of the level-n hats in <D_q., D_q.>."""
    N = 2 ** n
    return _readonly(stiffness_matrix(n) + p.eps_q ** 2 / N ** 2 * np.ones((N, N)))


def gram_matrix(n: int, kind: str, p: Optional[PriorParams] = None) -> np.ndarray:
    """
    Gram matrix of the level-n hats for an inner product kind.

    Args:
        n: Mesh level
        kind: 'L2', 'Hnu' or 'Dq'
        p: Prior parameters, required for 'Hnu' and 'Dq'

    Returns:
        Read-only N x N matrix G with f^T G g = inner(f, g, kind, p) on nodal vectors
    """
    if kind == 'L2':
        return mass_matrix(n)
    if p is None:
        raise ValueError(f"{kind} Gram matrix needs PriorParams")
    if kind == 'Hnu':
        return hnu_matrix(n, p)
    if kind == 'Dq':
        return dq_gram_matrix(n, p)
    raise ValueError(f"unknown inner product kind: {kind}")


@lru_cache(maxsize=None)
def prolongation_matrix(k: int, n: int) -> np.ndarray:
    """Nodal values on level k -> nodal values of the same function on level n >= k."""
    if k > n:
        raise ValueError(f"cannot prolong from level {k} to coarser level {n}")
    K = 2 ** k
    cols = [PLFunction(Mesh(k), e).prolong(n - k).nodal for e in np.eye(K)]
    return _readonly(np.column_stack(cols))


@lru_cache(maxsize=None)
def l2_projection_matrix(n: int, k: int) -> np.ndarray:
    """P_k restricted to PL(n), as a map of nodal values (K x N)."""
    if k > n:
        raise ValueError(f"projection level k={k} exceeds n={n}")
    P = prolongation_matrix(k, n)
    rhs = P.T @ mass_matrix(n)
    return _readonly(cho_solve(cho_factor(mass_matrix(k)), rhs))


def l2_project(f: PLFunction, k: int) -> PLFunction:
    """L2-orthogonal projection of f onto PL(k)."""
    if k > f.mesh.n:
        raise ValueError(f"projection level k={k} exceeds function level n={f.mesh.n}")
    return PLFunction(Mesh(k), l2_projection_matrix(f.mesh.n, k) @ f.nodal)


# ---------------------------------------------------------------------------
# Fourier and Sobolev utilities
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FourierSummary:
    """Coefficients c_j, j = -J..J, and the truncated H^t norm."""
    freqs: np.ndarray
    coeffs: np.ndarray
    J: int
    t: float
    sobolev_norm: float


def pl_fourier_coefficients(f: PLFunction, J: int) -> np.ndarray:
    """Exact Fourier coefficients of a PL function for |j| <= J."""
    N = f.mesh.N
    freqs = np.arange(-J, J + 1)
    spectrum = np.fft.fft(f.nodal) / N
    return np.sinc(freqs / N) ** 2 * spectrum[np.mod(freqs, N)]


def sobolev_norm(freqs: np.ndarray, coeffs: np.ndarray, t: float) -> float:
    """H^t norm from Fourier coefficients, weights (1 + 4 pi^2 j^2)^t."""
    weights = (1.0 + 4.0 * np.pi ** 2 * np.asarray(freqs, dtype=float) ** 2) ** t
    return float(np.sqrt(np.sum(weights * np.abs(coeffs) ** 2)))


def fourier_and_sobolev(f: PLFunction, J: Optional[int] = None, t: float = 0.0) -> FourierSummary:
    """Fourier coefficients of f and its H^t norm truncated at |j| <= J (default 16N)."""
    if J is None:
        J = FOURIER_OVERSAMPLING * f.mesh.N
    if J < 1:
        raise ValueError("truncation level J must be at least 1")
    freqs = np.arange(-J, J + 1)
    coeffs = pl_fourier_coefficients(f, J)
    return FourierSummary(freqs, coeffs, J, t, sobolev_norm(freqs, coeffs, t))
