"""
Single component adaptive Metropolis (SCAM).

Every sweep visits the coordinates in order and proposes
w_j -> w_j + tau, tau ~ N(0, sigma_j), where sigma_j is a VARIANCE:

    sigma_j = sigma0_j                          for sweeps ell <= burnin
    sigma_j = s * Var(w_j^0, ..., w_j^{ell-1}) + delta   afterwards

The proposal is accepted with probability min(1, pi(new) / pi(old)).
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from .accel import jit
from .errors import NonFiniteError
from .models import PLFunction, RunReport
from .posterior import EvalCache, PosteriorSpec, commit_u, commit_v, u_coordinate_delta, v_coordinate_delta
from config import (
    CACHE_REVALIDATE_EVERY, DEFAULT_BURNIN_FRACTION, DEFAULT_DELTA, DEFAULT_SCALE_S,
    DEFAULT_SEED, DEFAULT_SIGMA0, DEFAULT_SWEEPS, DEFAULT_THIN,
)

logger = logging.getLogger(__name__)


@dataclass
class ScamConfig:
    """Sampler settings; burnin defaults to a tenth of the sweeps."""
    sweeps: int = DEFAULT_SWEEPS
    burnin: Optional[int] = None
    sigma0: Union[float, Sequence[float]] = DEFAULT_SIGMA0
    s: float = DEFAULT_SCALE_S
    delta: float = DEFAULT_DELTA
    thin: int = DEFAULT_THIN
    seed: int = DEFAULT_SEED
    fixed_v: bool = False
    freeze_after_burnin: bool = False
    keep_samples: bool = False
    progress: bool = True
    revalidate_every: int = CACHE_REVALIDATE_EVERY

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be positive")
        if self.burnin is None:
            self.burnin = int(self.sweeps * DEFAULT_BURNIN_FRACTION)
        if not 0 <= self.burnin < self.sweeps:
            raise ValueError("burnin must satisfy 0 <= burnin < sweeps")
        if not self.s > 0:
            raise ValueError("scaling factor s must be positive")
        if not self.delta > 0:
            raise ValueError("variance floor delta must be positive")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if self.revalidate_every < 1:
            raise ValueError("revalidate_every must be at least 1")
        if np.any(np.asarray(self.sigma0, dtype=float) <= 0):
            raise ValueError("initial proposal variances must be positive")

    def sigma0_vector(self, dim: int) -> np.ndarray:
        sigma0 = np.asarray(self.sigma0, dtype=float)
        if sigma0.ndim == 0:
            return np.full(dim, float(sigma0))
        if sigma0.shape != (dim,):
            raise ValueError(f"sigma0 must be a scalar or have {dim} entries")
        return sigma0.copy()


class Welford:
    """Streaming per-coordinate mean and variance."""

    def __init__(self, dim: int):
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def push(self, x: np.ndarray) -> None:
        """Add one observation to the running mean and variance."""
        self.count += 1
        d = x - self.mean
        self.mean += d / self.count
        self.m2 += d * (x - self.mean)

    def variance(self) -> np.ndarray:
        """Sample variance (ddof=1); zero before two observations."""
        if self.count < 2:
            return np.zeros_like(self.m2)
        return self.m2 / (self.count - 1)


def update_sigma(welford: Welford, cfg: ScamConfig, ell: int, sigma0: np.ndarray) -> np.ndarray:
    """Proposal variances for sweep ell."""
    if ell < 1:
        raise ValueError("sweep index starts at 1")
    if ell <= cfg.burnin:
        return sigma0
    return cfg.s * welford.variance() + cfg.delta


@dataclass
class ChainState:
    w: np.ndarray
    welford: Welford
    sigma: np.ndarray
    accepts: np.ndarray
    proposals: np.ndarray
    ell: int = 0


@dataclass
class ChainOutput:
    """Streaming results of one chain; samples only when requested."""
    state: ChainState
    w_cm: np.ndarray
    retained: int
    wall_time_s: float
    config: ScamConfig
    samples: Optional[np.ndarray] = None

    @property
    def acceptance_ratio(self) -> float:
        total = int(self.state.proposals.sum())
        return float(self.state.accepts.sum()) / total if total else 0.0

    @property
    def per_coordinate_acceptance(self) -> np.ndarray:
        proposals = self.state.proposals
        return np.divide(self.state.accepts, proposals, out=np.zeros(proposals.size), where=proposals > 0)


def _drive(state: ChainState, cfg: ScamConfig, n_coords: int,
           sweep: Callable, on_sweep: Optional[Callable[[int], None]] = None) -> ChainOutput:
    """Shared sweep loop: adapt proposal variances, run one sweep, update Welford and the CM sums."""
    rng = np.random.default_rng(cfg.seed)
    dim = state.w.size
    sigma0 = cfg.sigma0_vector(dim)
    state.sigma = sigma0
    state.welford.push(state.w)

    cm_sum = np.zeros(dim)
    retained = 0
    kept: List[np.ndarray] = []
    start = time.perf_counter()
    with tqdm(total=cfg.sweeps, desc='SCAM', unit=' sweeps', disable=not cfg.progress, leave=False) as bar:
        for ell in range(1, cfg.sweeps + 1):
            state.ell = ell
            if not (cfg.freeze_after_burnin and ell > cfg.burnin + 1):
                state.sigma = update_sigma(state.welford, cfg, ell, sigma0)
            if ell == cfg.burnin + 1:
                logger.info(f"Burn-in finished after {cfg.burnin} sweeps, "
                            f"acceptance so far {state.accepts.sum() / max(1, state.proposals.sum()):.3f}")

            noise = rng.standard_normal(dim)
            with np.errstate(divide='ignore'):
                logu = np.log(rng.random(dim))
            sweep(state.w, state.sigma, noise, logu, state.accepts)
            state.proposals[:n_coords] += 1
            state.welford.push(state.w)

            if ell > cfg.burnin and (ell - cfg.burnin - 1) % cfg.thin == 0:
                cm_sum += state.w
                retained += 1
                if cfg.keep_samples:
                    kept.append(state.w.copy())
            if on_sweep is not None:
                on_sweep(ell)
            bar.update()

    wall = time.perf_counter() - start
    samples = np.array(kept) if cfg.keep_samples else None
    return ChainOutput(state=state, w_cm=cm_sum / retained, retained=retained,
                       wall_time_s=wall, config=cfg, samples=samples)


def _new_state(w0: np.ndarray) -> ChainState:
    dim = w0.size
    return ChainState(w=w0, welford=Welford(dim), sigma=np.ones(dim),
                      accepts=np.zeros(dim, dtype=np.int64), proposals=np.zeros(dim, dtype=np.int64))


@jit(nopython=True, cache=True)
def _sweep_kernel(w, sigma, noise, logu, n_coords, dq, resid, vbar, a, gv,
                  dq_rows, a_rows, a_rows_sq, q_rows, v_prec, eps2, N, accepts, a_new):
    """One sweep over the first n_coords coordinates; returns the total change of F."""
    n_u = dq.shape[0]
    total = 0.0
    for j in range(n_coords):
        step = np.sqrt(sigma[j]) * noise[j]
        if j < n_u:
            dF = u_coordinate_delta(step, a, dq, dq_rows[j], resid, a_rows[j], a_rows_sq[j], N)
        else:
            i = j - n_u
            dF = v_coordinate_delta(step, eps2, vbar, a, dq, q_rows[i], gv[i], v_prec[i, i], N, a_new)
        dlog = -0.5 * dF
        if dlog >= 0.0 or logu[j] < dlog:
            if j < n_u:
                commit_u(step, dq, dq_rows[j], resid, a_rows[j])
            else:
                commit_v(step, vbar, a, a_new, q_rows[j - n_u], gv, v_prec[j - n_u])
            w[j] += step
            accepts[j] += 1
            total += dF
    return total


def cm_from_w(spec: PosteriorSpec, w_cm: np.ndarray) -> Tuple[PLFunction, PLFunction]:
    """u and v of the conditional-mean coordinates."""
    return spec.split(w_cm)


def total_variation(f: PLFunction) -> float:
    """Sum of |jumps| between neighbouring nodes, around the circle."""
    return float(np.sum(np.abs(np.roll(f.nodal, -1) - f.nodal)))


def make_report(spec: PosteriorSpec, out: ChainOutput) -> RunReport:
    """
    Run-table row for one finished chain.

    samples_used is sweeps - burnin; v_dip is max |v_cm - 1| and u_tv the total
    variation of u_cm.
    """
    cfg = out.config
    u_cm, v_cm = cm_from_w(spec, out.w_cm)
    return RunReport(
        N=spec.N,
        epsilon=spec.prior.params.epsilon,
        samples_used=cfg.sweeps - cfg.burnin,
        acceptance_ratio=out.acceptance_ratio,
        wall_time_s=out.wall_time_s,
        seed=cfg.seed,
        per_coordinate_acceptance=out.per_coordinate_acceptance,
        u_cm=u_cm.nodal.copy(),
        v_cm=v_cm.nodal.copy(),
        v_dip=float(np.max(np.abs(v_cm.nodal - 1.0))),
        u_tv=total_variation(u_cm),
    )


def run_scam(spec: PosteriorSpec, cfg: ScamConfig, w0: Optional[np.ndarray] = None) -> Tuple[RunReport, ChainOutput]:
    """
    Sample the posterior of spec and return the run report with the chain
    output. The chain starts at w0 (default zero: u = 0, v = 1).
    """
    cache = EvalCache(spec, w0)
    N = spec.N
    n_coords = N if cfg.fixed_v else spec.dim
    eps2 = spec.prior.params.eps2
    a_new = np.empty(N)
    state = _new_state(cache.w)

    def sweep(w, sigma, noise, logu, accepts):
        cache.F += _sweep_kernel(w, sigma, noise, logu, n_coords, cache.dq, cache.resid, cache.vbar,
                                 cache.a, cache.gv, spec.dq_rows, spec.a_rows, spec.a_rows_sq,
                                 spec.q_rows, spec.v_precision, eps2, float(N), accepts, a_new)

    def on_sweep(ell):
        if ell % cfg.revalidate_every == 0:
            cache.revalidate()

    logger.info(f"SCAM on N={N}, eps={spec.prior.params.epsilon:g}: {cfg.sweeps} sweeps, "
                f"burn-in {cfg.burnin}, seed {cfg.seed}")
    out = _drive(state, cfg, n_coords, sweep, on_sweep)
    cache.revalidate()
    report = make_report(spec, out)
    logger.info(f"SCAM finished in {out.wall_time_s:.1f}s, acceptance {report.acceptance_ratio:.3f}")
    return report, out


def run_scam_callable(logpdf: Callable[[np.ndarray], float], w0: np.ndarray, cfg: ScamConfig) -> ChainOutput:
    """SCAM against an arbitrary log-density; every coordinate is updated."""
    w = np.array(w0, dtype=float)
    current = float(logpdf(w))
    if not np.isfinite(current):
        raise NonFiniteError("log-density is not finite at the initial state")

    def sweep(w, sigma, noise, logu, accepts):
        nonlocal current
        for j in range(w.size):
            old = w[j]
            w[j] = old + np.sqrt(sigma[j]) * noise[j]
            proposed = float(logpdf(w))
            dlog = proposed - current
            if dlog >= 0.0 or logu[j] < dlog:
                current = proposed
                accepts[j] += 1
            else:
                w[j] = old

    return _drive(_new_state(w), cfg, w.size, sweep)


def cm_from_chain(chain: np.ndarray, spec: PosteriorSpec, ell0: int = 0,
                  thin: int = 1) -> Tuple[PLFunction, PLFunction]:
    """
    CM estimate from stored chain rows w^1, ..., w^L: the mean of the rows
    after the first ell0, keeping every thin-th one.
    """
    chain = np.atleast_2d(np.asarray(chain, dtype=float))
    if thin < 1:
        raise ValueError("thin must be at least 1")
    kept = chain[ell0::thin]
    if kept.shape[0] == 0:
        raise ValueError(f"chain has {chain.shape[0]} rows, none after burn-in {ell0}")
    return cm_from_w(spec, kept.mean(axis=0))


def _chain_worker(spec: PosteriorSpec, cfg: ScamConfig, w0: Optional[np.ndarray]):
    return run_scam(spec, cfg, w0)


def run_chains(spec: PosteriorSpec, cfg: ScamConfig, n_chains: int, max_workers: Optional[int] = None,
               w0: Optional[np.ndarray] = None) -> Tuple[RunReport, List[ChainOutput]]:
    """
    Independent chains seeded from SeedSequence(cfg.seed).spawn(n_chains),
    run in a process pool and merged.
    """
    if n_chains < 1:
        raise ValueError("n_chains must be positive")
    children = np.random.SeedSequence(cfg.seed).spawn(n_chains)
    configs = [replace(cfg, seed=int(child.generate_state(1)[0]), progress=False) for child in children]

    if max_workers == 1 or n_chains == 1:
        results = [_chain_worker(spec, c, w0) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(_chain_worker, spec, c, w0) for c in configs]
            results = [f.result() for f in futures]

    reports = [r for r, _ in results]
    outputs = [o for _, o in results]
    merged = merge_reports(reports, seed=cfg.seed)
    logger.info(f"Merged {n_chains} chains: acceptance {merged.acceptance_ratio:.3f}")
    return merged, outputs


def merge_reports(reports: List[RunReport], seed: Optional[int] = None) -> RunReport:
    """Pool chains: sample-weighted CM and acceptance, longest wall time."""
    if not reports:
        raise ValueError("no reports to merge")
    first = reports[0]
    if any(r.N != first.N or r.epsilon != first.epsilon for r in reports):
        raise ValueError("reports must share N and epsilon")
    weights = np.array([r.samples_used for r in reports], dtype=float)
    weights /= weights.sum()
    u_cm = sum(wt * r.u_cm for wt, r in zip(weights, reports))
    v_cm = sum(wt * r.v_cm for wt, r in zip(weights, reports))
    u_fn = PLFunction.from_dict({'n': int(round(np.log2(first.N))), 'nodal': u_cm})
    return RunReport(
        N=first.N,
        epsilon=first.epsilon,
        samples_used=int(sum(r.samples_used for r in reports)),
        acceptance_ratio=float(sum(wt * r.acceptance_ratio for wt, r in zip(weights, reports))),
        wall_time_s=max(r.wall_time_s for r in reports),
        seed=first.seed if seed is None else seed,
        per_coordinate_acceptance=sum(wt * np.asarray(r.per_coordinate_acceptance) for wt, r in zip(weights, reports)),
        u_cm=u_cm,
        v_cm=v_cm,
        v_dip=float(np.max(np.abs(v_cm - 1.0))),
        u_tv=total_variation(u_fn),
        n_chains=sum(r.n_chains for r in reports),
    )
