"""
Posterior energy F(u, v | m) and its cached single-coordinate evaluation.

    F = -sum log(eps^2 + vbar^2) + sum (eps^2 + vbar^2) |D_q u|^2 / N
        + eps ||Dv||^2 + ||v - 1||^2 / (4 eps) + ||A u - m||^2

with vbar = Q_n v. The chain state w = (w_u, w_v) has 2N entries; in
'basis' coordinates u = sum w_u[j] f_j and v = 1 + sum w_v[j] g_j, in
'nodal' coordinates w holds the nodal values of u and of v - 1. Both maps
are linear with constant Jacobian, so Metropolis ratios agree.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.linalg import solve
from scipy.optimize import minimize

from .accel import jit
from .circle import apply_Dq, cell_average, cell_average_matrix, dq_apply, hnu_matrix
from .errors import CacheDriftError, MeshMismatchError, NonFiniteError
from .forward import ForwardOperator
from .models import Mesh, PLFunction, Measurement
from .prior import PriorModel
from config import CACHE_FAILURE_TOL, CACHE_REFRESH_TOL, CHAIN_COORDINATES

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PosteriorSpec:
    """Prior, forward operator and data of one deconvolution problem."""
    prior: PriorModel
    fop: ForwardOperator
    m: Measurement
    coordinates: str = 'basis'

    def __post_init__(self):
        if self.fop.n != self.prior.mesh.n:
            raise MeshMismatchError(f"operator level n={self.fop.n} but prior level n={self.prior.mesh.n}")
        if self.fop.k != self.m.k:
            raise MeshMismatchError(f"operator level k={self.fop.k} but measurement level k={self.m.k}")
        if self.coordinates not in CHAIN_COORDINATES:
            raise ValueError(f"coordinates must be one of {CHAIN_COORDINATES}, got {self.coordinates!r}")

    @property
    def mesh(self) -> Mesh:
        return self.prior.mesh

    @property
    def N(self) -> int:
        return self.prior.mesh.N

    @property
    def dim(self) -> int:
        return 2 * self.N

    @cached_property
    def u_map(self) -> np.ndarray:
        """w_u -> nodal values of u."""
        if self.coordinates == 'basis':
            return self.prior.fbasis.columns
        return np.eye(self.N)

    @cached_property
    def v_map(self) -> np.ndarray:
        """w_v -> nodal values of v - 1."""
        if self.coordinates == 'basis':
            return self.prior.gbasis.columns
        return np.eye(self.N)

    # Row j of each *_rows array is the image of coordinate j; rows are
    # contiguous for the sweep kernel.

    @cached_property
    def dq_rows(self) -> np.ndarray:
        return np.ascontiguousarray(dq_apply(self.mesh.n, self.prior.params, self.u_map).T)

    @cached_property
    def a_rows(self) -> np.ndarray:
        return np.ascontiguousarray((self.fop.A_mat @ self.u_map).T)

    @cached_property
    def a_rows_sq(self) -> np.ndarray:
        return np.sum(self.a_rows ** 2, axis=1)

    @cached_property
    def q_rows(self) -> np.ndarray:
        return np.ascontiguousarray((cell_average_matrix(self.mesh.n) @ self.v_map).T)

    @cached_property
    def v_precision(self) -> np.ndarray:
        """Quadratic form of the V prior in w_v (the identity in basis coordinates)."""
        H = hnu_matrix(self.mesh.n, self.prior.params)
        P = self.v_map.T @ H @ self.v_map
        return np.ascontiguousarray(0.5 * (P + P.T))

    @cached_property
    def F0(self) -> float:
        """F at w = 0, i.e. u = 0 and v = 1."""
        return -self.N * np.log1p(self.prior.params.eps2) + float(self.m.coeffs @ self.m.coeffs)

    def split(self, w: np.ndarray) -> Tuple[PLFunction, PLFunction]:
        """Coordinates w = (u block, v block) to the functions u and v."""
        w = self._check_w(w)
        N = self.N
        return (PLFunction(self.mesh, self.u_map @ w[:N]),
                PLFunction(self.mesh, 1.0 + self.v_map @ w[N:]))

    def to_coords(self, u: PLFunction, v: PLFunction) -> np.ndarray:
        """Inverse of split()."""
        if self.coordinates == 'basis':
            wu = self.prior.fbasis.coords(u)
            wv = self.prior.gbasis.coords(v - 1.0)
        else:
            self.prior._check(u)
            self.prior._check(v)
            wu = u.nodal.copy()
            wv = v.nodal - 1.0
        return np.concatenate([wu, wv])

    def _check_w(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise ValueError(f"state vector must have {self.dim} entries, got shape {w.shape}")
        return w

    def terms(self, w: np.ndarray):
        """Cached quantities at w, computed from scratch: (D_q u, A u - m, Q_n v, P w_v)."""
        w = self._check_w(w)
        N = self.N
        dq = self.dq_rows.T @ w[:N]
        resid = self.a_rows.T @ w[:N] - self.m.coeffs
        vbar = 1.0 + self.q_rows.T @ w[N:]
        gv = self.v_precision @ w[N:]
        return dq, resid, vbar, gv

    def energy(self, dq, resid, vbar, gv, wv) -> float:
        a = self.prior.params.eps2 + vbar ** 2
        return float(-np.sum(np.log(a)) + np.sum(a * dq ** 2) / self.N + wv @ gv + resid @ resid)


def F_eval(u: PLFunction, v: PLFunction, spec: PosteriorSpec) -> float:
    """F_{eps,k,n}(u, v | m), evaluated exactly from nodal values."""
    spec.prior._check(u)
    spec.prior._check(v)
    p = spec.prior.params
    n = spec.mesh.n
    a = p.eps2 + cell_average(v, spec.mesh).cellvals ** 2
    dq = apply_Dq(u, p).cellvals
    d = v.nodal - 1.0
    resid = spec.fop.apply(u) - spec.m.coeffs
    return float(-np.sum(np.log(a)) + np.sum(a * dq ** 2) / spec.N
                 + d @ hnu_matrix(n, p) @ d + resid @ resid)


def log_post(w: np.ndarray, spec: PosteriorSpec) -> float:
    """-F/2 in chain coordinates, normalized to zero at w = 0."""
    w = spec._check_w(w)
    dq, resid, vbar, gv = spec.terms(w)
    return -0.5 * (spec.energy(dq, resid, vbar, gv, w[spec.N:]) - spec.F0)


# ---------------------------------------------------------------------------
# Single-coordinate deltas (shared with the sweep kernel)
# ---------------------------------------------------------------------------

@jit(nopython=True, cache=True)
def u_coordinate_delta(delta, a, dq, dq_row, resid, a_row, a_row_sq, N):
    """Change of F when w_u[j] moves by delta."""
    s = 0.0
    for i in range(dq.shape[0]):
        s += a[i] * (2.0 * dq[i] + delta * dq_row[i]) * dq_row[i]
    r = 0.0
    for i in range(resid.shape[0]):
        r += resid[i] * a_row[i]
    return delta * s / N + 2.0 * delta * r + delta * delta * a_row_sq


@jit(nopython=True, cache=True)
def v_coordinate_delta(delta, eps2, vbar, a, dq, q_row, gv_j, p_jj, N, a_new):
    """Change of F when w_v[j] moves by delta; fills a_new with the new eps^2 + vbar^2."""
    s = 0.0
    for i in range(vbar.shape[0]):
        if q_row[i] == 0.0:
            a_new[i] = a[i]
            continue
        vb = vbar[i] + delta * q_row[i]
        an = eps2 + vb * vb
        a_new[i] = an
        s += -np.log(an / a[i]) + (an - a[i]) * dq[i] * dq[i] / N
    return s + 2.0 * delta * gv_j + delta * delta * p_jj


@jit(nopython=True, cache=True)
def commit_u(delta, dq, dq_row, resid, a_row):
    for i in range(dq.shape[0]):
        dq[i] += delta * dq_row[i]
    for i in range(resid.shape[0]):
        resid[i] += delta * a_row[i]


@jit(nopython=True, cache=True)
def commit_v(delta, vbar, a, a_new, q_row, gv, p_row):
    for i in range(vbar.shape[0]):
        vbar[i] += delta * q_row[i]
        a[i] = a_new[i]
        gv[i] += delta * p_row[i]


class PendingDelta(NamedTuple):
    j: int
    newval: float
    delta: float
    dF: float
    a_new: Optional[np.ndarray]


class EvalCache:
    """
    Mutable evaluation state of one chain: w, D_q u, A u - m, Q_n v,
    eps^2 + (Q_n v)^2, P w_v and F. Owned by a single chain.
    """

    def __init__(self, spec: PosteriorSpec, w: Optional[np.ndarray] = None):
        self.spec = spec
        self.w = np.zeros(spec.dim) if w is None else spec._check_w(w).copy()
        self.recompute()

    def recompute(self) -> None:
        spec = self.spec
        self.dq, self.resid, self.vbar, self.gv = spec.terms(self.w)
        self.a = spec.prior.params.eps2 + self.vbar ** 2
        self.F = spec.energy(self.dq, self.resid, self.vbar, self.gv, self.w[spec.N:])
        if not np.isfinite(self.F):
            raise NonFiniteError("posterior energy is not finite at the current state")

    @property
    def log_post(self) -> float:
        return -0.5 * (self.F - self.spec.F0)

    @property
    def u_nodal(self) -> np.ndarray:
        return self.spec.u_map @ self.w[:self.spec.N]

    @property
    def v_nodal(self) -> np.ndarray:
        return 1.0 + self.spec.v_map @ self.w[self.spec.N:]

    def propose_delta(self, j: int, newval: float) -> Tuple[float, PendingDelta]:
        """Change of log_post for w_j := newval, and the pending update to commit."""
        spec = self.spec
        N = spec.N
        if not 0 <= j < spec.dim:
            raise IndexError(f"coordinate {j} out of range 0..{spec.dim - 1}")
        delta = float(newval) - self.w[j]
        if delta == 0.0:
            return 0.0, PendingDelta(j, float(newval), 0.0, 0.0, None)
        if j < N:
            dF = u_coordinate_delta(delta, self.a, self.dq, spec.dq_rows[j], self.resid,
                                    spec.a_rows[j], spec.a_rows_sq[j], float(N))
            pending = PendingDelta(j, float(newval), delta, dF, None)
        else:
            i = j - N
            a_new = np.empty(N)
            dF = v_coordinate_delta(delta, spec.prior.params.eps2, self.vbar, self.a, self.dq,
                                    spec.q_rows[i], self.gv[i], spec.v_precision[i, i], float(N), a_new)
            pending = PendingDelta(j, float(newval), delta, dF, a_new)
        return -0.5 * dF, pending

    def accept_delta(self, pending: PendingDelta) -> None:
        if pending.delta == 0.0:
            return
        spec = self.spec
        N = spec.N
        j = pending.j
        if j < N:
            commit_u(pending.delta, self.dq, spec.dq_rows[j], self.resid, spec.a_rows[j])
        else:
            i = j - N
            commit_v(pending.delta, self.vbar, self.a, pending.a_new, spec.q_rows[i],
                     self.gv, spec.v_precision[i])
        self.w[j] = pending.newval
        self.F += pending.dF

    def drift(self) -> float:
        """Largest relative deviation of the cached terms from a fresh recomputation."""
        spec = self.spec
        dq, resid, vbar, gv = spec.terms(self.w)
        F = spec.energy(dq, resid, vbar, gv, self.w[spec.N:])
        worst = abs(self.F - F) / max(1.0, abs(F))
        for cached, fresh in ((self.dq, dq), (self.resid, resid), (self.vbar, vbar), (self.gv, gv)):
            scale = max(1.0, float(np.max(np.abs(fresh))))
            worst = max(worst, float(np.max(np.abs(cached - fresh))) / scale)
        return worst

    def revalidate(self) -> float:
        """Refresh the cache on small drift; raise CacheDriftError on large drift."""
        d = self.drift()
        if d > CACHE_FAILURE_TOL:
            raise CacheDriftError(f"cached posterior terms drifted by {d:.3e}")
        if d > CACHE_REFRESH_TOL:
            logger.warning(f"Cache drift {d:.3e} above {CACHE_REFRESH_TOL:.0e}, recomputing")
            self.recompute()
        else:
            logger.debug(f"Cache drift {d:.3e}")
        return d


# ---------------------------------------------------------------------------
# Deterministic point estimate
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MapEstimate:
    """Minimizer of F found by alternating minimization."""
    u: PLFunction
    v: PLFunction
    F: float
    iterations: int
    converged: bool


def _minimize_u(spec: PosteriorSpec, a: np.ndarray, Dq: np.ndarray, AtA: np.ndarray, Atm: np.ndarray) -> np.ndarray:
    H = Dq.T @ (a[:, None] * Dq) / spec.N + AtA
    return solve(H, Atm, assume_a='pos')


def _minimize_v(spec: PosteriorSpec, v0: np.ndarray, d2: np.ndarray, maxiter: int) -> np.ndarray:
    p = spec.prior.params
    N = spec.N
    Q = cell_average_matrix(spec.mesh.n)
    H = hnu_matrix(spec.mesh.n, p)

    def objective(v):
        vbar = Q @ v
        a = p.eps2 + vbar ** 2
        e = v - 1.0
        He = H @ e
        value = -np.sum(np.log(a)) + np.sum(a * d2) / N + e @ He
        grad = Q.T @ (-2.0 * vbar / a + 2.0 * vbar * d2 / N) + 2.0 * He
        return value, grad

    result = minimize(objective, v0, jac=True, method='L-BFGS-B',
                      options={'maxiter': maxiter, 'ftol': 1e-15, 'gtol': 1e-10})
    return result.x


def map_estimate(spec: PosteriorSpec, max_iter: int = 100, tol: float = 1e-10,
                 inner_maxiter: int = 200) -> MapEstimate:
    """
    Alternate the exact linear solve for u given v with an L-BFGS-B step
    for v given u, starting from v = 1, until F stops decreasing.
    """
    p = spec.prior.params
    n = spec.mesh.n
    N = spec.N
    Dq = dq_apply(n, p, np.eye(N))
    A = spec.fop.A_mat
    AtA = A.T @ A
    Atm = A.T @ spec.m.coeffs
    Q = cell_average_matrix(n)

    v = np.ones(N)
    F_prev = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        a = p.eps2 + (Q @ v) ** 2
        u = _minimize_u(spec, a, Dq, AtA, Atm)
        d2 = apply_Dq(PLFunction(spec.mesh, u), p).cellvals ** 2
        v = _minimize_v(spec, v, d2, inner_maxiter)
        F = F_eval(PLFunction(spec.mesh, u), PLFunction(spec.mesh, v), spec)
        logger.debug(f"MAP iteration {it}: F = {F:.10g}")
        if abs(F_prev - F) <= tol * max(1.0, abs(F)):
            converged = True
            break
        F_prev = F

    logger.info(f"MAP estimate after {it} iterations: F = {F:.6g} (converged: {converged})")
    return MapEstimate(PLFunction(spec.mesh, u), PLFunction(spec.mesh, v), F, it, converged)
