"""Closed-form test profiles used by the perturbation experiment and the docs."""

from __future__ import annotations

import numpy as np


def cusp_bump(x, length: float):
    """Positive on the open interval, zero at both ends, with a quarter-power
    cusp at the left end that keeps its high modes decaying slowly."""
    x = np.asarray(x, dtype=float)
    return x**0.25 * (length - x) * np.abs(np.sin(np.pi * x / length))


def oscillatory_bump(x, length: float, frequency: float):
    """Bounded deviation profile whose curvature norm grows with ``frequency``
    while its sup norm stays of order one."""
    x = np.asarray(x, dtype=float)
    return x * (length - x) * (x - length / 3.0) * (x - 2.0 * length / 3.0) * np.sin(frequency * x)
