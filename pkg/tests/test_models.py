"""Tests for data models"""
import pytest
import sys
from pathlib import Path

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.models import LevelSweepResult, Measurement, Mesh, PLFunction, PriorParams, RunReport


class TestPriorParams:
    """Edge scale and exponent"""

    def test_defaults_and_powers(self):
        p = PriorParams(epsilon=0.1)
        assert p.q == 4.0
        assert p.eps_q == pytest.approx(1e-4)
        assert p.eps2 == pytest.approx(1e-2)

    @pytest.mark.parametrize("epsilon, q", [(0.0, 4.0), (-1e-3, 4.0), (0.1, 1.0), (0.1, 0.5)])
    def test_invalid(self, epsilon, q):
        with pytest.raises(ValueError):
            PriorParams(epsilon=epsilon, q=q)


class TestPLFunctionLevels:
    """Moving between levels"""

    def test_prolong_is_exact(self):
        f = PLFunction(Mesh(2), [0.0, 1.0, 3.0, 2.0])
        g = f.prolong(2)
        x = np.linspace(0.0, 1.0, 37)
        assert g.mesh.n == 4
        assert np.allclose(g(x), f(x))
        assert g.mean() == pytest.approx(f.mean())

    def test_restrict_after_prolong(self):
        f = PLFunction(Mesh(3), np.arange(8.0))
        assert np.array_equal(f.to_level(5).to_level(3).nodal, f.nodal)

    def test_restrict_below_zero(self):
        with pytest.raises(ValueError):
            PLFunction.constant(Mesh(1)).restrict(2)

    def test_nodal_is_read_only(self):
        f = PLFunction.zeros(Mesh(2))
        with pytest.raises(ValueError):
            f.nodal[0] = 1.0

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            PLFunction(Mesh(2), [1.0, 2.0, 3.0])


class TestMeasurement:
    """Validation and dict form"""

    def test_from_dict_defaults_meta(self):
        m = Measurement.from_dict({'k': 1, 'coeffs': [0.5, -0.5], 'sigma': 0.01})
        assert m.K == 2
        assert m.meta == {}

    def test_coefficient_count(self):
        with pytest.raises(ValueError):
            Measurement(k=2, coeffs=np.zeros(3), sigma=0.1)

    def test_negative_sigma(self):
        with pytest.raises(ValueError):
            Measurement(k=1, coeffs=np.zeros(2), sigma=-1.0)


class TestRunReport:
    """Run-table row"""

    def _report(self, **kwargs):
        values = dict(N=8, epsilon=1e-3, samples_used=900, acceptance_ratio=0.27, wall_time_s=3.5,
                      seed=2, per_coordinate_acceptance=np.full(16, 0.27))
        values.update(kwargs)
        return RunReport(**values)

    def test_table_row(self):
        row = self._report().table_row()
        assert row == {'N': 8, 'epsilon': 1e-3, 'samples': 900, 'acceptance': 0.27, 'time_s': 3.5, 'seed': 2}

    def test_dict_keeps_estimates(self):
        report = self._report(u_cm=np.linspace(0, 1, 8), v_cm=np.ones(8), v_dip=0.4, n_chains=3)
        again = RunReport.from_dict(report.to_dict())
        assert np.allclose(again.u_cm, report.u_cm)
        assert again.v_dip == 0.4
        assert again.n_chains == 3

    def test_acceptance_out_of_range(self):
        with pytest.raises(ValueError):
            self._report(acceptance_ratio=1.2)


class TestLevelSweepResult:
    """Diagnostic outcome"""

    def test_one_value_per_level(self):
        with pytest.raises(ValueError):
            LevelSweepResult(name='mult', levels=[2, 3], values=[1.0])

    def test_to_dict(self):
        r = LevelSweepResult(name='proj', levels=[2, 3], values=[0.5, 0.25], rate=-1.0, note='ok')
        data = r.to_dict()
        assert data['name'] == 'proj'
        assert data['passed'] is True
        assert data['extra'] == {}
