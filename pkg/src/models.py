"""Data models for the hierarchical deconvolution toolkit"""
from dataclasses import dataclass, field, asdict
from typing import Optional, Dict, Any, List

import numpy as np

from .errors import MeshMismatchError


def _frozen_array(values, size: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape != (size,):
        raise ValueError(f"{name} must have {size} entries, got {arr.shape[0]}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Mesh:
    """Dyadic mesh of the unit circle: N = 2**n cells K_j = [(j-1)/N, j/N)."""
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError("Mesh level n must be a nonnegative integer")
        object.__setattr__(self, 'n', int(self.n))

    @property
    def N(self) -> int:
        return 2 ** self.n

    @property
    def h(self) -> float:
        return 1.0 / self.N

    def nodes(self) -> np.ndarray:
        """Left endpoints of the cells, x_j = j/N."""
        return np.arange(self.N) / self.N

    def cell_edges(self) -> np.ndarray:
        return np.arange(self.N + 1) / self.N

    def finer(self, levels: int = 1) -> 'Mesh':
        return Mesh(self.n + levels)


@dataclass(frozen=True, eq=False)
class PLFunction:
    """
    Continuous piecewise-linear function on the circle (the space PL(n)).

    Stored by nodal values at x_j = j/N; the value at x = 1 equals the value
    at x = 0.
    """
    mesh: Mesh
    nodal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'nodal', _frozen_array(self.nodal, self.mesh.N, 'nodal'))

    @classmethod
    def constant(cls, mesh: Mesh, value: float = 1.0) -> 'PLFunction':
        """PL function equal to value everywhere."""
        return cls(mesh, np.full(mesh.N, float(value)))

    @classmethod
    def zeros(cls, mesh: Mesh) -> 'PLFunction':
        return cls(mesh, np.zeros(mesh.N))

    @classmethod
    def from_callable(cls, mesh: Mesh, func) -> 'PLFunction':
        """Nodal interpolant of a vectorized callable."""
        return cls(mesh, np.asarray(func(mesh.nodes()), dtype=float))

    def __call__(self, x) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        pos = x * self.mesh.N
        j = np.floor(pos).astype(int) % self.mesh.N
        t = pos - np.floor(pos)
        return (1.0 - t) * self.nodal[j] + t * self.nodal[(j + 1) % self.mesh.N]

    def mean(self) -> float:
        """Exact integral over the circle (trapezoid rule is exact on PL)."""
        return float(np.mean(self.nodal))

    def prolong(self, levels: int = 1) -> 'PLFunction':
        """Same function represented on a finer mesh."""
        vals = self.nodal
        for _ in range(levels):
            fine = np.empty(2 * vals.size)
            fine[0::2] = vals
            fine[1::2] = 0.5 * (vals + np.roll(vals, -1))
            vals = fine
        return PLFunction(self.mesh.finer(levels), vals)

    def restrict(self, levels: int = 1) -> 'PLFunction':
        """Nodal injection to a coarser mesh."""
        if levels > self.mesh.n:
            raise ValueError("cannot restrict below level 0")
        step = 2 ** levels
        return PLFunction(Mesh(self.mesh.n - levels), self.nodal[::step])

    def to_level(self, n: int) -> 'PLFunction':
        """Same function on level n, by prolongation or restriction."""
        if n >= self.mesh.n:
            return self.prolong(n - self.mesh.n)
        return self.restrict(self.mesh.n - n)

    def _check(self, other: 'PLFunction') -> None:
        if not isinstance(other, PLFunction):
            raise TypeError("expected a PLFunction")
        if other.mesh != self.mesh:
            raise MeshMismatchError(f"level {self.mesh.n} vs level {other.mesh.n}")

    def __add__(self, other):
        if isinstance(other, PLFunction):
            self._check(other)
            return PLFunction(self.mesh, self.nodal + other.nodal)
        return PLFunction(self.mesh, self.nodal + float(other))

    def __sub__(self, other):
        if isinstance(other, PLFunction):
            self._check(other)
            return PLFunction(self.mesh, self.nodal - other.nodal)
        return PLFunction(self.mesh, self.nodal - float(other))

    def __neg__(self):
        return PLFunction(self.mesh, -self.nodal)

    def __mul__(self, scalar: float):
        return PLFunction(self.mesh, float(scalar) * self.nodal)

    __rmul__ = __mul__

    def to_dict(self) -> Dict[str, Any]:
        return {'n': self.mesh.n, 'nodal': self.nodal.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PLFunction':
        return cls(Mesh(int(data['n'])), np.asarray(data['nodal'], dtype=float))


@dataclass(frozen=True, eq=False)
class PCFunction:
    """Piecewise-constant function on the same mesh (the space PC(n))."""
    mesh: Mesh
    cellvals: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'cellvals', _frozen_array(self.cellvals, self.mesh.N, 'cellvals'))

    @classmethod
    def constant(cls, mesh: Mesh, value: float = 1.0) -> 'PCFunction':
        return cls(mesh, np.full(mesh.N, float(value)))

    def __call__(self, x) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        j = np.floor(x * self.mesh.N).astype(int) % self.mesh.N
        return self.cellvals[j]

    def integral(self) -> float:
        """Integral over [0, 1), i.e. the mean of the cell values."""
        return float(np.mean(self.cellvals))

    def __add__(self, other):
        if isinstance(other, PCFunction):
            if other.mesh != self.mesh:
                raise MeshMismatchError(f"level {self.mesh.n} vs level {other.mesh.n}")
            return PCFunction(self.mesh, self.cellvals + other.cellvals)
        return PCFunction(self.mesh, self.cellvals + float(other))

    def __sub__(self, other):
        if isinstance(other, PCFunction):
            if other.mesh != self.mesh:
                raise MeshMismatchError(f"level {self.mesh.n} vs level {other.mesh.n}")
            return PCFunction(self.mesh, self.cellvals - other.cellvals)
        return PCFunction(self.mesh, self.cellvals - float(other))

    def __mul__(self, scalar: float):
        return PCFunction(self.mesh, float(scalar) * self.cellvals)

    __rmul__ = __mul__


@dataclass(frozen=True)
class PriorParams:
    """Edge scale epsilon and perturbation exponent q of D_q = D + eps**q P."""
    epsilon: float
    q: float = 4.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.q > 1:
            raise ValueError("q must be greater than 1")
        object.__setattr__(self, 'epsilon', float(self.epsilon))
        object.__setattr__(self, 'q', float(self.q))

    @property
    def eps_q(self) -> float:
        return self.epsilon ** self.q

    @property
    def eps2(self) -> float:
        return self.epsilon ** 2


@dataclass
class Measurement:
    """Noisy data as coordinates in the L2-orthonormal basis of PL(k)."""
    k: int
    coeffs: np.ndarray
    sigma: float
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if self.coeffs.shape != (2 ** self.k,):
            raise ValueError(f"measurement at level k={self.k} needs {2 ** self.k} coefficients")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def K(self) -> int:
        return 2 ** self.k

    def to_dict(self) -> Dict[str, Any]:
        return {'k': self.k, 'coeffs': self.coeffs.tolist(), 'sigma': self.sigma, 'meta': self.meta}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Measurement':
        data = dict(data)
        data.setdefault('meta', {})
        return cls(k=int(data['k']), coeffs=data['coeffs'], sigma=float(data['sigma']), meta=data['meta'])


@dataclass
class RunReport:
    """One row of the run table: dimension, prior parameter, samples, acceptance, time"""
    N: int
    epsilon: float
    samples_used: int
    acceptance_ratio: float
    wall_time_s: float
    seed: int
    per_coordinate_acceptance: np.ndarray
    u_cm: Optional[np.ndarray] = None  # nodal values
    v_cm: Optional[np.ndarray] = None
    v_dip: float = 0.0
    u_tv: float = 0.0
    n_chains: int = 1

    def __post_init__(self):
        if not 0.0 <= self.acceptance_ratio <= 1.0:
            raise ValueError("acceptance ratio must lie in [0, 1]")

    def table_row(self) -> Dict[str, Any]:
        """Columns of the run table."""
        return {
            'N': self.N,
            'epsilon': self.epsilon,
            'samples': self.samples_used,
            'acceptance': self.acceptance_ratio,
            'time_s': self.wall_time_s,
            'seed': self.seed,
        }

    def to_dict(self) -> Dict[str, Any]:
        data = self.table_row()
        data.update({
            'per_coordinate_acceptance': np.asarray(self.per_coordinate_acceptance).tolist(),
            'u_cm': None if self.u_cm is None else np.asarray(self.u_cm).tolist(),
            'v_cm': None if self.v_cm is None else np.asarray(self.v_cm).tolist(),
            'v_dip': self.v_dip,
            'u_tv': self.u_tv,
            'n_chains': self.n_chains,
        })
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunReport':
        return cls(
            N=int(data['N']),
            epsilon=float(data['epsilon']),
            samples_used=int(data['samples']),
            acceptance_ratio=float(data['acceptance']),
            wall_time_s=float(data['time_s']),
            seed=int(data['seed']),
            per_coordinate_acceptance=np.asarray(data.get('per_coordinate_acceptance', []), dtype=float),
            u_cm=None if data.get('u_cm') is None else np.asarray(data['u_cm'], dtype=float),
            v_cm=None if data.get('v_cm') is None else np.asarray(data['v_cm'], dtype=float),
            v_dip=float(data.get('v_dip', 0.0)),
            u_tv=float(data.get('u_tv', 0.0)),
            n_chains=int(data.get('n_chains', 1)),
        )


@dataclass
class LevelSweepResult:
    """Outcome of one convergence diagnostic across mesh levels"""
    name: str
    levels: List[int]
    values: List[float]
    rate: Optional[float] = None
    passed: bool = True
    flagged: bool = False
    note: str = ""
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.levels) != len(self.values):
            raise ValueError("one value per level is required")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
