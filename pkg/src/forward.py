"""
Forward model: periodic convolution A, its discretization A_kn in the
L2-orthonormal measurement coordinates of PL(k), and synthetic data.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.special import ndtr

from .bases import HierarchicalBasis, build_basis
from .errors import MeshMismatchError, QuadratureError
from .models import PLFunction, Measurement
from config import (
    DEFAULT_KERNEL_TYPE, DEFAULT_KERNEL_WIDTH, DEFAULT_QUAD_ORDER, KERNEL_PERIODS,
    MAX_QUAD_LEVEL, QUAD_CONVERGENCE_TOL, QUAD_FAILURE_TOL,
)

logger = logging.getLogger(__name__)

KERNEL_TYPES = ('periodized_gaussian', 'custom_table')
GAUSSIAN_CUTOFF = 8.5  # in widths; exp(-8.5**2 / 2) is below double precision


@dataclass(frozen=True, eq=False)
class Kernel:
    """
    Convolution kernel on the circle, normalized to mass one.

    'periodized_gaussian' sums Gaussians of standard deviation `width` over
    shifts |m| <= 5; 'custom_table' interpolates samples at x_i = i/T with a
    periodic cubic spline.
    """
    type: str = DEFAULT_KERNEL_TYPE
    width: float = DEFAULT_KERNEL_WIDTH
    table: Optional[np.ndarray] = None
    _spline: Optional[CubicSpline] = field(default=None, init=False, repr=False)
    _mass: float = field(default=1.0, init=False, repr=False)

    def __post_init__(self):
        if self.type not in KERNEL_TYPES:
            raise ValueError(f"unknown kernel type: {self.type}")
        if self.type == 'periodized_gaussian':
            if not self.width > 0:
                raise ValueError("kernel width must be positive")
            mass = float(ndtr((KERNEL_PERIODS + 1) / self.width) - ndtr(-KERNEL_PERIODS / self.width))
            object.__setattr__(self, '_mass', mass)
            return

        if self.table is None:
            raise ValueError("custom_table kernel needs a table")
        table = np.array(self.table, dtype=float).reshape(-1)
        if table.size < 4 or not np.all(np.isfinite(table)):
            raise ValueError("kernel table needs at least 4 finite samples")
        table.setflags(write=False)
        object.__setattr__(self, 'table', table)
        xs = np.arange(table.size + 1) / table.size
        spline = CubicSpline(xs, np.append(table, table[0]), bc_type='periodic')
        mass = float(spline.integrate(0.0, 1.0))
        if mass == 0.0:
            raise ValueError("kernel table integrates to zero and cannot be normalized")
        object.__setattr__(self, '_spline', spline)
        object.__setattr__(self, '_mass', mass)

    @property
    def mass(self) -> float:
        """Integral over the circle before normalization."""
        return self._mass

    def __call__(self, x) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        if self.type == 'periodized_gaussian':
            shifts = np.arange(-KERNEL_PERIODS, KERNEL_PERIODS + 1)
            z = (x[..., None] + shifts) / self.width
            values = np.exp(-0.5 * z ** 2).sum(axis=-1) / (self.width * np.sqrt(2.0 * np.pi))
        else:
            values = self._spline(x)
        return values / self._mass

    def resolution_level(self) -> int:
        """Dyadic level on which the kernel is resolved by per-cell quadrature."""
        if self.type == 'periodized_gaussian':
            return int(np.ceil(np.log2(4.0 / self.width)))
        return int(np.ceil(np.log2(self.table.size))) + 2

    def support_radius(self) -> Optional[float]:
        if self.type == 'periodized_gaussian' and GAUSSIAN_CUTOFF * self.width < 0.5:
            return GAUSSIAN_CUTOFF * self.width
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'type': self.type,
            'width': self.width if self.type == 'periodized_gaussian' else None,
            'table': None if self.table is None else self.table.tolist(),
        }


@dataclass(frozen=True, eq=False)
class ForwardOperator:
    """A_mat maps nodal values of PL(n) to L2-orthonormal coordinates of PL(k)."""
    n: int
    k: int
    A_mat: np.ndarray
    quad_order: int
    kernel: Kernel
    quad_level: int
    quad_change: float = 0.0

    def apply(self, u: PLFunction) -> np.ndarray:
        """Data-space image A u in measurement coordinates."""
        if u.mesh.n != self.n:
            raise MeshMismatchError(f"operator acts on level {self.n}, got level {u.mesh.n}")
        return self.A_mat @ u.nodal


def measurement_coords(k: int) -> HierarchicalBasis:
    """The isometry K_k: PL(k) <-> R^K, realized by the L2-orthonormal hierarchical basis."""
    return build_basis(k, 'L2')


def _hat_samples(level: int, m: int, t: np.ndarray, weights: np.ndarray):
    """
    For each cell of the quadrature mesh, the two level-m hats that are
    nonzero there and their weighted values at the Gauss points.
    """
    M = 2 ** level
    r = 2 ** (level - m)
    a = np.arange(M)
    coarse = a // r
    s = ((a % r)[:, None] + t[None, :]) / r
    idx = np.stack([coarse, (coarse + 1) % (2 ** m)], axis=1)
    vals = np.stack([1.0 - s, s], axis=1) * weights
    return idx, vals


def _assemble_hat_matrix(kernel: Kernel, n: int, k: int, level: int, order: int) -> np.ndarray:
    """
    B_ij = <psi_i, A phi_j> with psi_i the hats of PL(k) and phi_j those of
    PL(n), by tensor Gauss-Legendre on every pair of quadrature cells.
    """
    M = 2 ** level
    H = 1.0 / M
    t, w = leggauss(order)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    ix, vx = _hat_samples(level, k, t, w)
    iy, vy = _hat_samples(level, n, t, w)

    radius = kernel.support_radius()
    if radius is None:
        offsets = range(M)
    else:
        dmax = int(np.ceil(radius / H)) + 1
        offsets = range(M) if 2 * dmax + 1 >= M else range(-dmax, dmax + 1)

    K, N = 2 ** k, 2 ** n
    B = np.zeros(K * N)
    cells = np.arange(M)
    rows = ix[:, :, None] * N
    for d in offsets:
        # x in cell a, y in cell a - d: x - y = (d + t_p - t_r) H
        Kd = kernel((d + t[:, None] - t[None, :]) * H)
        b = (cells - d) % M
        contrib = np.einsum('aip,ajp->aij', vx @ Kd, vy[b]) * (H * H)
        flat = (rows + iy[b][:, None, :]).ravel()
        B += np.bincount(flat, weights=contrib.ravel(), minlength=K * N)
    return B.reshape(K, N)


def assemble_A(kernel: Kernel, n: int, k: int, quad_order: int = DEFAULT_QUAD_ORDER) -> ForwardOperator:
    """
    A_kn = K_k P_k A on PL(n).

    Raises QuadratureError if raising the Gauss order by two moves any entry
    by more than the failure tolerance.
    """
    if n < 0 or k < 0:
        raise ValueError("levels must be nonnegative")
    if quad_order < 1:
        raise ValueError("quadrature order must be positive")
    level = min(max(n, k, kernel.resolution_level()), MAX_QUAD_LEVEL)
    level = max(level, n, k)
    E = measurement_coords(k).columns

    A = E.T @ _assemble_hat_matrix(kernel, n, k, level, quad_order)
    A_ref = E.T @ _assemble_hat_matrix(kernel, n, k, level, quad_order + 2)
    change = float(np.max(np.abs(A_ref - A)))
    if change > QUAD_FAILURE_TOL:
        raise QuadratureError(
            f"quadrature not converged: order {quad_order} -> {quad_order + 2} changes A by {change:.3e}")
    if change > QUAD_CONVERGENCE_TOL:
        logger.warning(f"Quadrature change {change:.3e} exceeds {QUAD_CONVERGENCE_TOL:.0e} (order {quad_order})")
    else:
        logger.debug(f"Quadrature change {change:.3e} at order {quad_order}, level {level}")

    A.setflags(write=False)
    return ForwardOperator(n=n, k=k, A_mat=A, quad_order=quad_order, kernel=kernel,
                           quad_level=level, quad_change=change)


def synthesize(u_true: PLFunction, fop: ForwardOperator, sigma: float, rng: np.random.Generator,
               seed: Optional[int] = None, truth_ref: Optional[str] = None) -> Measurement:
    """Measurement coefficients A u_true + sigma * xi with xi ~ N(0, I_K)."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    clean = fop.apply(u_true)
    noise = rng.standard_normal(clean.size)
    meta = {
        'seed': seed,
        'n': fop.n,
        'kernel': fop.kernel.to_dict(),
        'quad_order': fop.quad_order,
        'truth': truth_ref,
    }
    return Measurement(k=fop.k, coeffs=clean + sigma * noise, sigma=float(sigma), meta=meta)
