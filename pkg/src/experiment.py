"""
Experiment configuration.

One JSON document describes a run; every field has a default in config.py.
Unknown keys and invalid values raise ConfigError naming the dotted field.
"""
import copy
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Union

from .data_loader import DataLoader
from .errors import ConfigError
from .forward import KERNEL_TYPES, Kernel
from .scam import ScamConfig
from config import (
    CACHE_REVALIDATE_EVERY, CHAIN_COORDINATES, CHAIN_INIT, DEFAULT_DELTA, DEFAULT_EPSILON, DEFAULT_K,
    DEFAULT_KERNEL_TYPE, DEFAULT_KERNEL_WIDTH, DEFAULT_N, DEFAULT_Q, DEFAULT_QUAD_ORDER, DEFAULT_SCALE_S,
    DEFAULT_SEED, DEFAULT_SIGMA, DEFAULT_SIGMA0, DEFAULT_SIGNAL, DEFAULT_SWEEPS, DEFAULT_THIN,
    DIAG_B, DIAG_EPSILON, DIAG_LEVELS, DIAG_MOMENT_EPSILON, DIAG_MOMENT_LEVELS, DIAG_NSAMPLES, DIAG_T,
    SIGNAL_PROFILES,
)

logger = logging.getLogger(__name__)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _require(ok: bool, name: str, message: str) -> None:
    if not ok:
        raise ConfigError(name, message)


@dataclass
class KernelSpec:
    type: str = DEFAULT_KERNEL_TYPE
    width: float = DEFAULT_KERNEL_WIDTH
    table: Optional[str] = None  # JSON list or CSV column of samples at i/T
    quad_order: int = DEFAULT_QUAD_ORDER

    def validate(self, prefix: str) -> None:
        _require(self.type in KERNEL_TYPES, f"{prefix}.type", f"must be one of {list(KERNEL_TYPES)}")
        _require(_is_number(self.width) and self.width > 0, f"{prefix}.width", "must be a positive number")
        _require(_is_int(self.quad_order) and self.quad_order >= 1, f"{prefix}.quad_order",
                 "must be a positive integer")
        if self.type == 'custom_table':
            _require(isinstance(self.table, str) and bool(self.table), f"{prefix}.table",
                     "custom_table kernels need a table file")

    def to_kernel(self) -> Kernel:
        """Kernel described by this section; custom tables are loaded from disk."""
        if self.type == 'custom_table':
            return Kernel(type='custom_table', table=DataLoader.load_kernel_table(self.table))
        return Kernel(type=self.type, width=float(self.width))


@dataclass
class SignalSpec:
    """Truth signal: a built-in profile, a segment list, or a signal file."""
    profile: str = DEFAULT_SIGNAL
    path: Optional[str] = None
    segments: Optional[List[Dict[str, Any]]] = None
    centered: bool = True

    def validate(self, prefix: str) -> None:
        if self.path is not None:
            _require(isinstance(self.path, str) and bool(self.path), f"{prefix}.path", "must be a file path")
            return
        _require(self.profile in SIGNAL_PROFILES, f"{prefix}.profile", f"must be one of {SIGNAL_PROFILES}")
        if self.profile == 'segments':
            _require(isinstance(self.segments, list) and len(self.segments) > 0, f"{prefix}.segments",
                     "profile 'segments' needs a non-empty segment list")
        _require(isinstance(self.centered, bool), f"{prefix}.centered", "must be true or false")


@dataclass
class McmcSpec:
    """SCAM settings plus chain layout and output options."""
    sweeps: int = DEFAULT_SWEEPS
    burnin: Optional[int] = None
    sigma0: Union[float, List[float]] = DEFAULT_SIGMA0
    s: float = DEFAULT_SCALE_S
    delta: float = DEFAULT_DELTA
    thin: int = DEFAULT_THIN
    fixed_v: bool = False
    freeze_after_burnin: bool = False
    coordinates: str = 'basis'
    init: str = 'prior_mean'
    chains: int = 1
    workers: Optional[int] = None
    save_chain: bool = False
    revalidate_every: int = CACHE_REVALIDATE_EVERY

    def validate(self, prefix: str) -> None:
        _require(_is_int(self.sweeps) and self.sweeps >= 1, f"{prefix}.sweeps", "must be a positive integer")
        if self.burnin is not None:
            _require(_is_int(self.burnin) and 0 <= self.burnin < self.sweeps, f"{prefix}.burnin",
                     "must be an integer with 0 <= burnin < sweeps")
        sigma0 = self.sigma0 if isinstance(self.sigma0, list) else [self.sigma0]
        _require(all(_is_number(x) and x > 0 for x in sigma0), f"{prefix}.sigma0",
                 "must be a positive number or a list of them")
        _require(_is_number(self.s) and self.s > 0, f"{prefix}.s", "must be positive")
        _require(_is_number(self.delta) and self.delta > 0, f"{prefix}.delta", "must be positive")
        _require(_is_int(self.thin) and self.thin >= 1, f"{prefix}.thin", "must be a positive integer")
        _require(self.coordinates in CHAIN_COORDINATES, f"{prefix}.coordinates",
                 f"must be one of {CHAIN_COORDINATES}")
        _require(self.init in CHAIN_INIT, f"{prefix}.init", f"must be one of {CHAIN_INIT}")
        _require(_is_int(self.chains) and self.chains >= 1, f"{prefix}.chains", "must be a positive integer")
        if self.workers is not None:
            _require(_is_int(self.workers) and self.workers >= 1, f"{prefix}.workers",
                     "must be a positive integer or null")
        _require(_is_int(self.revalidate_every) and self.revalidate_every >= 1, f"{prefix}.revalidate_every",
                 "must be a positive integer")

    def to_scam(self, seed: int, progress: bool = True) -> ScamConfig:
        """Sampler settings for one chain."""
        return ScamConfig(
            sweeps=self.sweeps, burnin=self.burnin, sigma0=self.sigma0, s=self.s, delta=self.delta,
            thin=self.thin, seed=seed, fixed_v=self.fixed_v, freeze_after_burnin=self.freeze_after_burnin,
            keep_samples=self.save_chain, progress=progress, revalidate_every=self.revalidate_every,
        )


@dataclass
class EstimateSpec:
    map_estimate: bool = False

    def validate(self, prefix: str) -> None:
        _require(isinstance(self.map_estimate, bool), f"{prefix}.map_estimate", "must be true or false")


@dataclass
class DiagnosticsConfig:
    """
    Level-sweep settings. Hypothesis guards (t < 1/2, b > 0) are checked
    when a diagnostic runs, so a refused check reports why.
    """
    epsilon: float = DIAG_EPSILON
    levels: List[int] = field(default_factory=lambda: list(DIAG_LEVELS))
    t: float = DIAG_T
    b: float = DIAG_B
    nsamples: int = DIAG_NSAMPLES
    moment_epsilon: float = DIAG_MOMENT_EPSILON
    moment_levels: List[int] = field(default_factory=lambda: list(DIAG_MOMENT_LEVELS))

    def validate(self, prefix: str) -> None:
        for name in ('epsilon', 'moment_epsilon'):
            value = getattr(self, name)
            _require(_is_number(value) and value > 0, f"{prefix}.{name}", "must be positive")
        for name in ('levels', 'moment_levels'):
            value = getattr(self, name)
            _require(isinstance(value, list) and len(value) > 0 and all(_is_int(n) and n >= 0 for n in value),
                     f"{prefix}.{name}", "must be a non-empty list of nonnegative integers")
        _require(_is_number(self.t), f"{prefix}.t", "must be a number")
        _require(_is_number(self.b), f"{prefix}.b", "must be a number")
        _require(_is_int(self.nsamples) and self.nsamples >= 2, f"{prefix}.nsamples", "must be at least 2")


NESTED = {
    'kernel': KernelSpec,
    'signal': SignalSpec,
    'mcmc': McmcSpec,
    'estimate': EstimateSpec,
    'diagnostics': DiagnosticsConfig,
}


@dataclass
class ExperimentConfig:
    epsilon: float = DEFAULT_EPSILON
    q: float = DEFAULT_Q
    n: int = DEFAULT_N
    k: int = DEFAULT_K
    sigma: float = DEFAULT_SIGMA
    seed: int = DEFAULT_SEED
    out_dir: str = 'output'
    cache_dir: Optional[str] = None
    kernel: KernelSpec = field(default_factory=KernelSpec)
    signal: SignalSpec = field(default_factory=SignalSpec)
    mcmc: McmcSpec = field(default_factory=McmcSpec)
    estimate: EstimateSpec = field(default_factory=EstimateSpec)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)

    def validate(self) -> None:
        _require(_is_number(self.epsilon) and self.epsilon > 0, 'epsilon', "must be positive")
        _require(_is_number(self.q) and self.q > 1, 'q', "must be greater than 1")
        _require(_is_int(self.n) and self.n >= 0, 'n', "must be a nonnegative integer")
        _require(_is_int(self.k) and self.k >= 0, 'k', "must be a nonnegative integer")
        _require(_is_number(self.sigma) and self.sigma >= 0, 'sigma', "must be nonnegative")
        _require(_is_int(self.seed) and self.seed >= 0, 'seed', "must be a nonnegative integer")
        _require(isinstance(self.out_dir, str) and bool(self.out_dir), 'out_dir', "must be a directory path")
        for name in NESTED:
            getattr(self, name).validate(name)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        """Parse and validate a config mapping; unknown keys raise ConfigError."""
        config = _from_mapping(cls, data, '')
        config.validate()
        return config

    def to_dict(self) -> Dict[str, Any]:
        """Resolved config as plain JSON values."""
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def resolve(cls, path: Optional[str] = None,
                overrides: Optional[Dict[str, Any]] = None) -> 'ExperimentConfig':
        """
        Defaults, then the JSON file at path, then dotted-key overrides
        such as {'seed': 3, 'mcmc.sweeps': 1000}.
        """
        data: Dict[str, Any] = {}
        if path is not None:
            try:
                loaded = DataLoader.load_json(path)
            except json.JSONDecodeError as e:
                raise ConfigError('config', f"{path} is not valid JSON: {e}") from e
            _require(isinstance(loaded, dict), 'config', f"{path} must hold a JSON object")
            data = copy.deepcopy(loaded)
            logger.info(f"Loaded config from {path}")
        for dotted, value in (overrides or {}).items():
            if value is None:
                continue
            node = data
            *parents, leaf = dotted.split('.')
            for part in parents:
                node = node.setdefault(part, {})
            node[leaf] = value
        return cls.from_dict(data)


def _from_mapping(cls, data: Any, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(prefix or 'config', "expected a JSON object")
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = f"{prefix}.{key}" if prefix else key
        if key not in known:
            raise ConfigError(name, "unknown field")
        if cls is ExperimentConfig and key in NESTED:
            value = _from_mapping(NESTED[key], value, name)
        kwargs[key] = value
    return cls(**kwargs)
