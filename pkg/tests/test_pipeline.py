"""Tests for the batch commands and the command-line entry point"""
import json
import pytest
import sys
from pathlib import Path

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from main import main
from src.data_loader import DataLoader
from src.errors import ConfigError, DiagnosticFailure, HypothesisError
from src.experiment import ExperimentConfig
from src.pipeline import cmd_diagnose, cmd_estimate, cmd_report, cmd_synthesize, run_diagnostics, run_stem


def small_config(tmp_path, **overrides):
    data = {
        'n': 3, 'k': 3, 'epsilon': 0.1, 'out_dir': str(tmp_path),
        'mcmc': {'sweeps': 300},
        'diagnostics': {'levels': [3, 4, 5], 'moment_levels': [2, 3], 'nsamples': 2000},
    }
    for key, value in overrides.items():
        if isinstance(value, dict):
            data.setdefault(key, {}).update(value)
        else:
            data[key] = value
    return ExperimentConfig.from_dict(data)


class TestSynthesize:
    """Truth, measurement and provenance files"""

    def test_files_and_shape(self, tmp_path):
        config = small_config(tmp_path, k=4)
        paths = cmd_synthesize(config)
        for path in paths.values():
            assert path.exists()
        m = DataLoader.load_measurement(str(paths['measurement']))
        assert m.coeffs.shape == (16,)
        assert m.meta['seed'] == config.seed
        data = DataLoader.load_json(str(paths['measurement']))
        assert data['config']['k'] == 4

    def test_noiseless_verify(self, tmp_path):
        config = small_config(tmp_path, sigma=0.0)
        paths = cmd_synthesize(config, verify=True)
        truth = DataLoader.load_signal(str(paths['truth']))
        m = DataLoader.load_measurement(str(paths['measurement']))
        assert truth.mesh.n == 3
        assert np.isclose(truth.mean(), 0.0, atol=1e-12)
        assert m.sigma == 0.0

    def test_byte_identical_reruns(self, tmp_path):
        first = cmd_synthesize(small_config(tmp_path / 'a'))
        second = cmd_synthesize(small_config(tmp_path / 'b'))
        for key in ('truth', 'measurement'):
            a = first[key].read_bytes()
            b = second[key].read_bytes()
            # out_dir differs inside the embedded config
            assert a.replace(str(tmp_path / 'a').encode(), b'') == b.replace(str(tmp_path / 'b').encode(), b'')


class TestEstimate:
    """Estimate CSV and run report"""

    def _measure(self, tmp_path, **overrides):
        config = small_config(tmp_path, **overrides)
        return config, str(cmd_synthesize(config)['measurement'])

    def test_report_contract(self, tmp_path):
        config, measurement = self._measure(tmp_path)
        report, paths = cmd_estimate(config, measurement, progress=False)
        assert report.N == 8
        assert 0.0 <= report.acceptance_ratio <= 1.0
        assert report.samples_used == 270
        saved = DataLoader.load_json(str(paths['report']))
        for column in ('N', 'epsilon', 'samples', 'acceptance', 'time_s', 'seed'):
            assert column in saved
        assert saved['config']['n'] == 3
        df = DataLoader.load_estimate_csv(str(paths['estimate']))
        assert list(df.columns) == ['x', 'u_cm', 'v_cm']
        assert len(df) == 8
        assert DataLoader.read_csv_config(str(paths['estimate']))['epsilon'] == 0.1

    def test_same_seed_same_estimate(self, tmp_path):
        config, measurement = self._measure(tmp_path)
        _, first = cmd_estimate(config, measurement, progress=False)
        csv_first = first['estimate'].read_text()
        _, second = cmd_estimate(config, measurement, progress=False)
        assert second['estimate'].read_text() == csv_first

    def test_map_and_chain_outputs(self, tmp_path):
        config, measurement = self._measure(
            tmp_path, estimate={'map_estimate': True}, mcmc={'init': 'map', 'save_chain': True, 'thin': 3})
        report, paths = cmd_estimate(config, measurement, progress=False)
        assert paths['map_estimate'].exists()
        header, chain = DataLoader.load_chain_dump(str(paths['chain']))
        assert header['thin'] == 3
        assert chain.shape == (90, 16)
        assert header['config']['mcmc']['init'] == 'map'

    def test_multiple_chains(self, tmp_path):
        config, measurement = self._measure(tmp_path, mcmc={'chains': 2, 'workers': 1})
        report, _ = cmd_estimate(config, measurement, progress=False)
        assert report.n_chains == 2
        assert report.samples_used == 540

    def test_level_mismatch(self, tmp_path):
        config, measurement = self._measure(tmp_path)
        other = small_config(tmp_path, k=4)
        with pytest.raises(ConfigError):
            cmd_estimate(other, measurement, progress=False)


class TestDiagnose:
    """Diagnostics JSON and summary"""

    def test_mult_records(self, tmp_path):
        config = small_config(tmp_path, diagnostics={'levels': [5, 6, 7]})
        results, paths = cmd_diagnose(config, 'mult')
        data = json.loads(paths['json'].read_text())
        assert data['selector'] == 'mult'
        assert len(data['records']) == 3
        assert [r['n'] for r in data['records']] == [5, 6, 7]
        assert paths['summary'].read_text().count('mult') >= 1

    def test_mult_passes_at_defaults(self):
        results = run_diagnostics(ExperimentConfig(), 'mult')
        assert len(results) == 1
        assert results[0].passed
        assert results[0].extra['fitted_ratio'] >= 1.8

    def test_proj_guard(self, tmp_path):
        config = small_config(tmp_path, diagnostics={'t': 0.6})
        with pytest.raises(HypothesisError):
            cmd_diagnose(config, 'proj')

    def test_unknown_selector(self, tmp_path):
        with pytest.raises(ConfigError):
            cmd_diagnose(small_config(tmp_path), 'spectra')

    def test_failure_raises_after_writing(self, tmp_path):
        """A repeated level cannot decrease; the files are still written"""
        config = small_config(tmp_path, diagnostics={'levels': [3, 3]})
        with pytest.raises(DiagnosticFailure):
            cmd_diagnose(config, 'proj')
        assert (tmp_path / 'diagnostics.json').exists()

    @pytest.mark.slow
    def test_all_at_defaults(self, tmp_path):
        config = ExperimentConfig.from_dict({'out_dir': str(tmp_path)})
        results, _ = cmd_diagnose(config, 'all')
        assert all(r.passed for r in results)


class TestReport:
    """Run table from run reports"""

    def test_table_files(self, tmp_path):
        reports = []
        for eps in (0.1, 0.05):
            config = small_config(tmp_path / f"eps{eps}", epsilon=eps)
            measurement = str(cmd_synthesize(config)['measurement'])
            _, paths = cmd_estimate(config, measurement, progress=False)
            reports.append(str(paths['report']))
        paths = cmd_report(reports, str(tmp_path / 'table'))
        for path in paths.values():
            assert path.exists()
        figures = DataLoader.read_csv(str(paths['figures']))
        assert len(figures) == 16
        assert set(figures['run']) == {0, 1}
        assert '<table>' in paths['html'].read_text()

    def test_no_reports(self, tmp_path):
        with pytest.raises(ConfigError):
            cmd_report([], str(tmp_path))


class TestMain:
    """Exit codes and flags"""

    def test_print_config(self, capsys):
        assert main(['--print-config']) == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed['mcmc']['s'] == 2.4

    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text(json.dumps({'epsilon': -1}))
        assert main(['--config', str(path), 'synthesize']) == 2

    def test_hypothesis_refusal_exit_code(self, tmp_path):
        path = tmp_path / 'exp.json'
        path.write_text(json.dumps({'diagnostics': {'t': 0.6, 'levels': [2, 3]}}))
        assert main(['--config', str(path), '--out', str(tmp_path), 'diagnose', 'proj']) == 2

    def test_diagnostic_failure_exit_code(self, tmp_path):
        path = tmp_path / 'exp.json'
        path.write_text(json.dumps({'diagnostics': {'levels': [3, 3]}}))
        assert main(['--config', str(path), '--out', str(tmp_path), '--quiet', 'diagnose', 'proj']) == 4

    def test_synthesize_and_estimate(self, tmp_path):
        path = tmp_path / 'exp.json'
        path.write_text(json.dumps({'n': 2, 'k': 2, 'mcmc': {'sweeps': 100}}))
        base = ['--config', str(path), '--out', str(tmp_path), '--seed', '4', '--quiet']
        assert main(base + ['synthesize']) == 0
        assert main(base + ['estimate', str(tmp_path / 'measurement.json')]) == 0
        config = ExperimentConfig.resolve(str(path), {'seed': 4})
        assert (tmp_path / f"report_{run_stem(config)}.json").exists()
