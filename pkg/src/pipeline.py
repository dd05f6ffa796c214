"""
Batch commands: synthesize data, estimate, diagnose, report.

Every artifact carries the resolved experiment config inline. Commands
return the paths they wrote.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .convergence import (
    check_exp_moments, check_gaussian_weak_conv, check_mult_conv, check_proj_conv, summary_table,
)
from .data_loader import DataLoader
from .errors import ConfigError, DiagnosticFailure, NumericalError
from .experiment import ExperimentConfig
from .forward import assemble_A, synthesize
from .html_exporter import HTMLReportExporter
from .models import LevelSweepResult, Mesh, PLFunction, PriorParams, RunReport
from .posterior import PosteriorSpec, map_estimate
from .prior import PriorModel
from .report_generator import ReportGenerator
from .scam import run_chains, run_scam
from .signals import build_signal, center
from config import DIAG_SELECTORS

logger = logging.getLogger(__name__)


def _out_dir(config: ExperimentConfig) -> Path:
    """Output directory, created on first use."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_stem(config: ExperimentConfig) -> str:
    """File-name stem shared by the artifacts of one estimation run."""
    return f"n{config.n}_eps{config.epsilon:g}_seed{config.seed}"


def truth_signal(config: ExperimentConfig, level: int) -> PLFunction:
    """
    Truth signal for synthetic data on the given level.

    Args:
        config: Resolved experiment config; signal.path wins over signal.profile
        level: Mesh level the signal is sampled on

    Returns:
        The PL truth, centred to zero mean when signal.centered is set
    """
    spec = config.signal
    if spec.path is not None:
        f = DataLoader.load_signal(spec.path).to_level(level)
        return center(f) if spec.centered else f
    return build_signal(spec.profile, level, spec.segments, spec.centered)


def cmd_synthesize(config: ExperimentConfig, verify: bool = False) -> Dict[str, Path]:
    """
    Write truth.json, measurement.json and provenance.json.

    The truth lives on level max(n, k) and is blurred with the configured
    kernel; noise is drawn from default_rng(seed).
    """
    out = _out_dir(config)
    resolved = config.to_dict()
    level = max(config.n, config.k)
    truth = truth_signal(config, level)
    fop = assemble_A(config.kernel.to_kernel(), level, config.k, config.kernel.quad_order)
    m = synthesize(truth, fop, config.sigma, np.random.default_rng(config.seed),
                   seed=config.seed, truth_ref='truth.json')

    if verify:
        noiseless = fop.apply(truth)
        if config.sigma == 0 and not np.array_equal(m.coeffs, noiseless):
            raise NumericalError("noiseless measurement differs from the forward image of the truth")
        logger.info(f"Verified measurement: |m - A u| = {np.linalg.norm(m.coeffs - noiseless):.4e}")

    paths = {
        'truth': out / 'truth.json',
        'measurement': out / 'measurement.json',
        'provenance': out / 'provenance.json',
    }
    DataLoader.save_signal_json(str(paths['truth']), truth, resolved)
    DataLoader.save_measurement(str(paths['measurement']), m, resolved)
    DataLoader.save_json(str(paths['provenance']), {
        'seed': config.seed,
        'sigma': config.sigma,
        'kernel': fop.kernel.to_dict(),
        'truth_level': level,
        'quad_level': fop.quad_level,
        'quad_change': fop.quad_change,
        'config': resolved,
    })
    for name, path in paths.items():
        logger.info(f"Wrote {name}: {path}")
    return paths


def build_posterior(config: ExperimentConfig, m) -> PosteriorSpec:
    """
    Assemble the posterior for a measurement on level config.k.

    Args:
        config: Resolved experiment config (epsilon, q, n, kernel, coordinates)
        m: Measurement loaded from measurement.json

    Returns:
        PosteriorSpec on level config.n

    Raises:
        ConfigError: If the measurement level differs from config.k
    """
    if m.k != config.k:
        raise ConfigError('k', f"measurement is on level {m.k}, config says {config.k}")
    params = PriorParams(epsilon=config.epsilon, q=config.q)
    prior = PriorModel.build(config.n, params, config.cache_dir)
    fop = assemble_A(config.kernel.to_kernel(), config.n, m.k, config.kernel.quad_order)
    return PosteriorSpec(prior, fop, m, config.mcmc.coordinates)


def cmd_estimate(config: ExperimentConfig, measurement_path: str,
                 progress: bool = True) -> Tuple[RunReport, Dict[str, Path]]:
    """Sample the posterior and write the CM estimate, the run report and optional extras."""
    out = _out_dir(config)
    resolved = config.to_dict()
    stem = run_stem(config)
    m = DataLoader.load_measurement(measurement_path)
    spec = build_posterior(config, m)
    mesh = spec.mesh
    paths: Dict[str, Path] = {}

    w0 = None
    if config.estimate.map_estimate or config.mcmc.init == 'map':
        est = map_estimate(spec)
        if config.estimate.map_estimate:
            paths['map_estimate'] = out / f"map_estimate_{stem}.csv"
            DataLoader.save_estimate_csv(str(paths['map_estimate']), mesh.nodes(),
                                         {'u_map': est.u.nodal, 'v_map': est.v.nodal}, resolved)
        if config.mcmc.init == 'map':
            w0 = spec.to_coords(est.u, est.v)

    cfg = config.mcmc.to_scam(config.seed, progress)
    if config.mcmc.chains > 1:
        report, outputs = run_chains(spec, cfg, config.mcmc.chains, config.mcmc.workers, w0)
    else:
        report, output = run_scam(spec, cfg, w0)
        outputs = [output]

    paths['estimate'] = out / f"estimate_{stem}.csv"
    DataLoader.save_estimate_csv(str(paths['estimate']), mesh.nodes(),
                                 {'u_cm': report.u_cm, 'v_cm': report.v_cm}, resolved)
    paths['report'] = out / f"report_{stem}.json"
    DataLoader.save_run_report(str(paths['report']), report, resolved)

    if config.mcmc.save_chain:
        for i, output in enumerate(outputs):
            suffix = f"_chain{i}" if len(outputs) > 1 else ""
            key = f"chain{suffix}"
            paths[key] = out / f"chain_{stem}{suffix}.bin"
            DataLoader.save_chain_dump(str(paths[key]), output.samples, cfg.thin, resolved)

    for name, path in paths.items():
        logger.info(f"Wrote {name}: {path}")
    return report, paths


def smooth_edge_field(level: int) -> PLFunction:
    """v = 1 + sin(2 pi x) / 2 on the given level, the limit surrogate for the weak check."""
    return PLFunction.from_callable(Mesh(level), lambda x: 1.0 + 0.5 * np.sin(2.0 * np.pi * x))


def run_diagnostics(config: ExperimentConfig, selector: str) -> List[LevelSweepResult]:
    """
    Run one diagnostic, or all four in the order mult, proj, weak, moments.

    Nothing is written and failures are not raised here; cmd_diagnose does both.
    """
    if selector not in DIAG_SELECTORS:
        raise ConfigError('selector', f"must be one of {DIAG_SELECTORS}")
    d = config.diagnostics
    chosen = ['mult', 'proj', 'weak', 'moments'] if selector == 'all' else [selector]
    results = []
    for name in chosen:
        logger.info(f"Running diagnostic '{name}'")
        if name == 'mult':
            results.append(check_mult_conv(levels=d.levels, epsilon=d.epsilon))
        elif name == 'proj':
            results.append(check_proj_conv(levels=d.levels, t=d.t))
        elif name == 'weak':
            params = PriorParams(epsilon=d.epsilon, q=config.q)
            results.append(check_gaussian_weak_conv(smooth_edge_field(max(d.levels) + 2), d.levels, params))
        else:
            params = PriorParams(epsilon=d.moment_epsilon, q=config.q)
            results.append(check_exp_moments(d.moment_levels, d.b, d.nsamples, params,
                                             config.seed, config.cache_dir))
    return results


def cmd_diagnose(config: ExperimentConfig, selector: str = 'all') -> Tuple[List[LevelSweepResult], Dict[str, Path]]:
    """
    Run the selected diagnostics and write diagnostics.json and
    diagnostics.txt; raise DiagnosticFailure afterwards if any failed.
    """
    results = run_diagnostics(config, selector)
    out = _out_dir(config)
    table = summary_table(results)
    records = table.astype(object).where(table.notna(), None).to_dict('records')

    paths = {'json': out / 'diagnostics.json', 'summary': out / 'diagnostics.txt'}
    DataLoader.save_json(str(paths['json']), {
        'selector': selector,
        'results': [r.to_dict() for r in results],
        'records': records,
        'config': config.to_dict(),
    })
    lines = [table.to_string(index=False), '']
    for r in results:
        status = 'PASS' if r.passed else 'FAIL'
        if r.flagged:
            status += ' (flagged)'
        rate = 'n/a' if r.rate is None else f"{r.rate:.3f}"
        lines.append(f"{r.name}: {status}, rate {rate}" + (f", {r.note}" if r.note else ""))
    with open(paths['summary'], 'w', encoding='utf-8') as f:
        f.write("\n".join(lines) + "\n")
    for name, path in paths.items():
        logger.info(f"Wrote {name}: {path}")

    failed = [r.name for r in results if not r.passed]
    if failed:
        raise DiagnosticFailure(f"diagnostics failed: {', '.join(failed)}")
    return results, paths


def figures_frame(loaded: List[Tuple[RunReport, Optional[dict]]]) -> pd.DataFrame:
    """Long-format plot data: one row per run and node."""
    frames = []
    for i, (r, _) in enumerate(loaded):
        x = Mesh(int(round(np.log2(r.N)))).nodes()
        frames.append(pd.DataFrame({
            'run': i, 'N': r.N, 'epsilon': r.epsilon, 'x': x, 'u_cm': r.u_cm, 'v_cm': r.v_cm,
        }))
    if not frames:
        return pd.DataFrame(columns=['run', 'N', 'epsilon', 'x', 'u_cm', 'v_cm'])
    return pd.concat(frames, ignore_index=True)


def cmd_report(report_paths: List[str], out_dir: str) -> Dict[str, Path]:
    """Collect run reports into table1.xlsx, table1.html and figures.csv."""
    if not report_paths:
        raise ConfigError('reports', "at least one run report is required")
    loaded = DataLoader.load_run_reports(report_paths)
    reports = [r for r, _ in loaded]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {'excel': out / 'table1.xlsx', 'html': out / 'table1.html', 'figures': out / 'figures.csv'}

    generator = ReportGenerator()
    generator.add_reports(reports)
    generator.export_excel(str(paths['excel']))

    exporter = HTMLReportExporter()
    exporter.add_reports(reports)
    exporter.export_html(str(paths['html']))

    configs = [c for _, c in loaded if c is not None]
    DataLoader.save_table_csv(str(paths['figures']), figures_frame(loaded),
                              {'runs': report_paths, 'configs': configs})
    for name, path in paths.items():
        logger.info(f"Wrote {name}: {path}")
    return paths
