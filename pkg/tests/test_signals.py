"""Tests for the built-in truth signals"""
import pytest
import sys
from pathlib import Path

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.signals import step_ramp_bump, two_steps, segments, build_signal


class TestProfiles:
    """Analytic profiles"""

    def test_step_ramp_bump_values(self):
        x = np.array([0.05, 0.2, 0.5, 0.8, 0.95])
        vals = step_ramp_bump(x)
        assert vals[0] == pytest.approx(0.0, abs=1e-6)
        assert vals[1] == pytest.approx(1.0)
        assert vals[2] == pytest.approx(0.4)
        assert vals[3] == pytest.approx(0.6)
        assert vals[4] == pytest.approx(0.0, abs=1e-3)

    def test_two_steps_jumps(self):
        assert list(two_steps(np.array([0.29, 0.3, 0.59, 0.6]))) == [0.0, 1.0, 1.0, 0.0]

    def test_segments(self):
        profile = segments([
            {'kind': 'constant', 'start': 0.0, 'end': 0.25, 'value': 2.0},
            {'kind': 'linear', 'start': 0.5, 'end': 0.75, 'from': 0.0, 'to': 1.0},
            {'kind': 'bump', 'start': 0.75, 'end': 1.0, 'height': 0.5},
        ])
        vals = profile(np.array([0.1, 0.3, 0.625, 0.875, 0.76]))
        assert vals[0] == 2.0
        assert vals[1] == 0.0
        assert vals[2] == pytest.approx(0.5)
        assert vals[3] == pytest.approx(0.5)
        assert 0.0 < vals[4] < 0.01

    def test_invalid_segment(self):
        with pytest.raises(ValueError):
            segments([{'kind': 'spline', 'start': 0.0, 'end': 0.5}])
        with pytest.raises(ValueError):
            segments([{'kind': 'constant', 'start': 0.6, 'end': 0.5}])


class TestBuildSignal:
    """Nodal interpolants on a mesh"""

    def test_centered_by_default(self):
        f = build_signal('step_ramp_bump', 6)
        assert f.mesh.N == 64
        assert f.mean() == pytest.approx(0.0, abs=1e-14)

    def test_uncentered(self):
        f = build_signal('two_steps', 4, centered=False)
        # nodes j/16 in [0.3, 0.6): j = 5..9
        assert np.array_equal(np.nonzero(f.nodal)[0], np.arange(5, 10))

    def test_segments_need_list(self):
        with pytest.raises(ValueError):
            build_signal('segments', 3)

    def test_unknown_profile(self):
        with pytest.raises(ValueError):
            build_signal('square', 3)
