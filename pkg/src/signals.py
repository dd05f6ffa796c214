"""Built-in truth signals for synthetic experiments"""
import logging
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from .models import Mesh, PLFunction

logger = logging.getLogger(__name__)


def step_ramp_bump(x: np.ndarray) -> np.ndarray:
    """Unit step on [0.1, 0.3), ramp 0 -> 0.8 on [0.4, 0.6), Gaussian bump at 0.8."""
    x = np.mod(np.asarray(x, dtype=float), 1.0)
    step = np.where((x >= 0.1) & (x < 0.3), 1.0, 0.0)
    ramp = np.where((x >= 0.4) & (x < 0.6), 0.8 * (x - 0.4) / 0.2, 0.0)
    bump = 0.6 * np.exp(-((x - 0.8) / 0.05) ** 2)
    return step + ramp + bump


def two_steps(x: np.ndarray) -> np.ndarray:
    """Indicator of [0.3, 0.6): two jumps."""
    x = np.mod(np.asarray(x, dtype=float), 1.0)
    return np.where((x >= 0.3) & (x < 0.6), 1.0, 0.0)


def sine(x: np.ndarray) -> np.ndarray:
    """sin(2 pi x)."""
    return np.sin(2.0 * np.pi * np.asarray(x, dtype=float))


SEGMENT_KINDS = ('constant', 'linear', 'bump')


def _validate_segment(seg: Dict[str, Any], index: int) -> None:
    kind = seg.get('kind')
    if kind not in SEGMENT_KINDS:
        raise ValueError(f"segment {index}: kind must be one of {SEGMENT_KINDS}, got {kind!r}")
    start, end = seg.get('start'), seg.get('end')
    if start is None or end is None or not 0.0 <= start < end <= 1.0:
        raise ValueError(f"segment {index}: need 0 <= start < end <= 1")


def segments(spec: List[Dict[str, Any]]) -> Callable[[np.ndarray], np.ndarray]:
    """
    Piecewise profile from a list of segments, each active on [start, end).

        {"kind": "constant", "start": a, "end": b, "value": c}
        {"kind": "linear",   "start": a, "end": b, "from": c0, "to": c1}
        {"kind": "bump",     "start": a, "end": b, "height": h}

    Overlapping segments add up; the profile is zero outside all segments.
    """
    for i, seg in enumerate(spec):
        _validate_segment(seg, i)

    def profile(x: np.ndarray) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        total = np.zeros_like(x)
        for seg in spec:
            a, b = float(seg['start']), float(seg['end'])
            inside = (x >= a) & (x < b)
            if seg['kind'] == 'constant':
                total += np.where(inside, float(seg.get('value', 1.0)), 0.0)
            elif seg['kind'] == 'linear':
                c0, c1 = float(seg.get('from', 0.0)), float(seg.get('to', 1.0))
                total += np.where(inside, c0 + (c1 - c0) * (x - a) / (b - a), 0.0)
            else:
                # smooth bump vanishing with all derivatives at both ends
                s = np.clip((x - a) / (b - a), 0.0, 1.0)
                arg = np.where(inside, 1.0 - (2.0 * s - 1.0) ** 2, 1.0)
                with np.errstate(divide='ignore'):
                    vals = np.where(inside & (arg > 0), np.exp(1.0 - 1.0 / np.maximum(arg, 1e-300)), 0.0)
                total += float(seg.get('height', 1.0)) * vals
        return total

    return profile


PROFILES: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    'step_ramp_bump': step_ramp_bump,
    'two_steps': two_steps,
    'sine': sine,
}


def build_signal(profile: str, n: int, segment_list: Optional[List[Dict[str, Any]]] = None,
                 centered: bool = True) -> PLFunction:
    """Nodal interpolant of a named profile on level n, shifted to zero mean when centered."""
    if profile == 'segments':
        if not segment_list:
            raise ValueError("profile 'segments' needs a segment list")
        func = segments(segment_list)
    elif profile in PROFILES:
        func = PROFILES[profile]
    else:
        raise ValueError(f"unknown signal profile: {profile}")

    f = PLFunction.from_callable(Mesh(n), func)
    if centered:
        f = center(f)
    logger.debug(f"Built '{profile}' signal on level {n} (mean {f.mean():.3e})")
    return f


def center(f: PLFunction) -> PLFunction:
    """f minus its mean."""
    return f - f.mean()
