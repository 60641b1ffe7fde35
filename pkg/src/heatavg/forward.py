"""Forward evolution in the eigenbasis and the averaged measurements it induces.

Mode k of an initial state decays as exp(-lambda_k t); a source contributes
through the Duhamel integral

    integral_0^t phi_k(s) exp(-lambda_k (t - s)) ds,

which is evaluated in closed form because sources are tabulated piecewise
linear in time.  Applying the weighted time average to these evolutions
gives the two building blocks of the inverse pipeline: the diagonal action
on initial coefficients (multiplier times coefficient) and the source
contribution, integrated against the weight with composite Gauss panels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .basis import (
    EigenSystem,
    Grid,
    GridFunction,
    GridMismatch,
    SpectralVector,
    same_grid,
    _frozen,
)
from .weights import WeightSpec, _decay_integral


class TimeOutOfRange(ValueError):
    """Requested instant lies outside [0, horizon]."""


class OnsetInvalid(ValueError):
    """Terminal weighting requires the source to be regular strictly before the horizon."""


_RAMP_SERIES_CUTOFF = 0.02


def _ramp_integral(lam, width):
    """integral_0^width s*exp(-lam*s) ds, stable for small lam*width.

    Equals width^2 * g(z) with z = lam*width and
    g(z) = (1 - (1+z)exp(-z)) / z^2; g is evaluated by series below the
    cancellation cutoff.
    """
    lam = np.asarray(lam, dtype=float)
    z = lam * width
    small = np.abs(z) < _RAMP_SERIES_CUTOFF
    zs = np.where(small, z, 1.0)
    series = 0.5 - zs / 3.0 + zs**2 / 8.0 - zs**3 / 30.0 + zs**4 / 144.0
    zb = np.where(small, 1.0, z)
    direct = (1.0 - (1.0 + zb) * np.exp(-zb)) / zb**2
    return width**2 * np.where(small, series, direct)


@dataclass(frozen=True)
class SourceTerm:
    """Source term tabulated on time instants, piecewise linear in between.

    Grid samples (``values``) are the primary representation and are what
    the finite-difference oracle consumes; spectral coefficients are derived
    on demand (or stored when the term was built from an eigensystem).
    ``onset`` marks the time from which the source is treated as
    differentiable in time; it must lie strictly before the horizon whenever
    the measurement weights the terminal slice.
    """

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    onset: float = 0.0
    es: EigenSystem | None = None
    coeffs: np.ndarray | None = None

    def __post_init__(self):
        times = _frozen(self.times)
        values = _frozen(self.values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("need at least two time instants")
        if not np.all(np.diff(times) > 0.0):
            raise ValueError("time instants must be strictly increasing")
        if times[0] != 0.0:
            raise ValueError("source tabulation must start at t = 0")
        if values.shape != (times.size, self.grid.n_nodes):
            raise ValueError("source values must be (n_times, n_nodes)")
        if not 0.0 <= self.onset <= self.horizon:
            raise ValueError("onset must lie in [0, horizon]")
        if self.coeffs is not None:
            object.__setattr__(self, "coeffs", _frozen(self.coeffs))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable, times, onset: float = 0.0,
                      es: EigenSystem | None = None) -> "SourceTerm":
        times = np.asarray(times, dtype=float)
        values = np.array([np.asarray(fn(grid.nodes, t), dtype=float) for t in times])
        return cls.from_grid_history(grid, times, values, onset=onset, es=es)

    @classmethod
    def from_grid_history(cls, grid: Grid, times, values, onset: float = 0.0,
                          es: EigenSystem | None = None) -> "SourceTerm":
        src = cls(grid=grid, times=np.asarray(times, dtype=float),
                  values=np.asarray(values, dtype=float), onset=onset, es=es)
        if es is not None:
            object.__setattr__(src, "coeffs", _frozen(src.coefficients(es)))
        return src

    @classmethod
    def from_modal(cls, es: EigenSystem, times, coeffs, onset: float = 0.0) -> "SourceTerm":
        """Build from per-instant coefficient rows in the given eigenbasis."""
        coeffs = np.asarray(coeffs, dtype=float)
        values = coeffs @ es.modes
        src = cls(grid=es.grid, times=np.asarray(times, dtype=float), values=values,
                  onset=onset, es=es, coeffs=coeffs)
        return src

    def coefficients(self, es: EigenSystem) -> np.ndarray:
        """Per-instant expansion of the source in ``es``; rows follow ``times``."""
        if self.coeffs is not None and self.es is es:
            return self.coeffs
        if not same_grid(self.grid, es.grid):
            raise GridMismatch("source and eigensystem use different grids")
        w = es.grid.trapezoid_weights()
        return (self.values * w) @ es.modes.T

    def values_at(self, t: float) -> np.ndarray:
        """Grid samples of the source at time t (linear interpolation)."""
        t = float(t)
        if t <= self.times[0]:
            return self.values[0]
        if t >= self.times[-1]:
            return self.values[-1]
        i = int(np.searchsorted(self.times, t, side="right") - 1)
        s = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return (1.0 - s) * self.values[i] + s * self.values[i + 1]

    def regularity_norm(self) -> float:
        """Size of the source in the norm combining its space-time L2 norm,
        its slice at the onset, and the time-integrated L2 norm of its
        piecewise time derivative on [onset, horizon]."""
        w = self.grid.trapezoid_weights()

        def ip(f, g):
            return float(np.sum(w * f * g))

        sq = 0.0
        deriv_part = 0.0
        for i in range(self.times.size - 1):
            dt = self.times[i + 1] - self.times[i]
            f = self.values[i]
            g = (self.values[i + 1] - self.values[i]) / dt
            sq += dt * ip(f, f) + dt**2 * ip(f, g) + dt**3 * ip(g, g) / 3.0
            overlap = max(0.0, min(self.times[i + 1], self.horizon) - max(self.times[i], self.onset))
            if overlap > 0.0:
                deriv_part += overlap * math.sqrt(max(ip(g, g), 0.0))
        onset_slice = self.values_at(self.onset)
        return math.sqrt(max(sq, 0.0)) + math.sqrt(max(ip(onset_slice, onset_slice), 0.0)) + deriv_part


@dataclass(frozen=True)
class SolutionField:
    """Evolution sampled on a space-time grid.

    Spectrally built fields also carry their per-time coefficient rows and
    the initial coefficients; oracle-built fields carry grid values only.
    """

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    es: EigenSystem | None = None
    coeffs: np.ndarray | None = None
    alpha: SpectralVector | None = None
    source: SourceTerm | None = None

    def __post_init__(self):
        times = _frozen(self.times)
        values = _frozen(self.values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if values.shape != (times.size, self.grid.n_nodes):
            raise ValueError("field values must be (n_times, n_nodes)")
        if self.coeffs is not None:
            object.__setattr__(self, "coeffs", _frozen(self.coeffs))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def slice_at(self, t: float) -> GridFunction:
        """Spatial slice at time t; exact for spectral fields, interpolated
        between stored rows otherwise."""
        if self.es is not None and self.alpha is not None:
            coeffs = _coeffs_at(self.alpha, self.source, self.es, float(t), self.horizon)
            return GridFunction(self.grid, coeffs @ self.es.modes)
        t = float(t)
        if not self.times[0] <= t <= self.times[-1]:
            raise TimeOutOfRange(f"t = {t:g} outside [{self.times[0]:g}, {self.times[-1]:g}]")
        i = min(int(np.searchsorted(self.times, t, side="right") - 1), self.times.size - 2)
        s = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return GridFunction(self.grid, (1.0 - s) * self.values[i] + s * self.values[i + 1])

    def evaluate(self, x, t: float):
        """Point values at arbitrary (x, t) via the slice plus linear x-interpolation."""
        slc = self.slice_at(t)
        return np.interp(np.asarray(x, dtype=float), self.grid.nodes, slc.values)

    def norm_l2(self) -> float:
        """Space-time L2 norm (trapezoid in both directions)."""
        wx = self.grid.trapezoid_weights()
        dt = np.diff(self.times)
        wt = np.zeros(self.times.size)
        wt[:-1] += 0.5 * dt
        wt[1:] += 0.5 * dt
        return float(np.sqrt(wt @ ((self.values**2) @ wx)))


def evolve_homogeneous(xi: SpectralVector, t: float, horizon: float = math.inf) -> SpectralVector:
    """Decay the coefficients over time t with no source."""
    if t < 0.0 or t > horizon:
        raise TimeOutOfRange(f"t = {t:g} outside [0, {horizon:g}]")
    return SpectralVector(xi.es, xi.coeffs * np.exp(-xi.es.lambdas * t))


def duhamel(src: SourceTerm, k: int, t: float, es: EigenSystem | None = None) -> float:
    """Source contribution to mode k at time t (closed form per linear piece)."""
    es = es or src.es
    if es is None:
        raise ValueError("source has no eigensystem; pass one explicitly")
    return float(_duhamel_all(src, es, t)[k])


def _duhamel_all(src: SourceTerm, es: EigenSystem, t: float) -> np.ndarray:
    """Vector of Duhamel integrals over all modes at time t."""
    if t < 0.0 or t > src.horizon * (1.0 + 1e-12):
        raise TimeOutOfRange(f"t = {t:g} outside the source tabulation")
    lam = es.lambdas
    coeffs = src.coefficients(es)
    out = np.zeros(es.n_modes)
    for i in range(src.times.size - 1):
        s0 = float(src.times[i])
        if s0 >= t:
            break
        s1_full = float(src.times[i + 1])
        s1 = min(s1_full, t)
        width = s1 - s0
        if width <= 0.0:
            continue
        a = coeffs[i]
        b = (coeffs[i + 1] - coeffs[i]) / (s1_full - s0)
        lag = np.exp(-lam * (t - s1))
        base = _decay_integral(lam, width)
        ramp = width * base - _ramp_integral(lam, width)
        out += lag * (a * base + b * ramp)
    return out


def _coeffs_at(alpha: SpectralVector, src: SourceTerm | None, es: EigenSystem,
               t: float, horizon: float) -> np.ndarray:
    if t < 0.0 or t > horizon * (1.0 + 1e-12):
        raise TimeOutOfRange(f"t = {t:g} outside [0, {horizon:g}]")
    coeffs = alpha.coeffs * np.exp(-es.lambdas * t)
    if src is not None:
        coeffs = coeffs + _duhamel_all(src, es, t)
    return coeffs


def solve_forward(xi: SpectralVector, src: SourceTerm | None = None,
                  times=None, horizon: float | None = None) -> SolutionField:
    """Evolve initial coefficients (plus optional source) over [0, horizon]."""
    es = xi.es
    if horizon is None:
        if src is None:
            raise ValueError("pass a horizon when there is no source")
        horizon = src.horizon
    if src is not None:
        if not same_grid(src.grid, es.grid):
            raise GridMismatch("source and eigensystem use different grids")
        if abs(src.horizon - horizon) > 1e-12 * horizon:
            raise ValueError("source tabulation does not span the horizon")
    if times is None:
        times = np.linspace(0.0, horizon, 129)
    times = np.asarray(times, dtype=float)
    coeffs = np.empty((times.size, es.n_modes))
    for j, t in enumerate(times):
        coeffs[j] = _coeffs_at(xi, src, es, float(t), horizon)
    values = coeffs @ es.modes
    return SolutionField(grid=es.grid, times=times, values=values, es=es,
                         coeffs=coeffs, alpha=xi, source=src)


def average_from_initial(xi: SpectralVector, ws: WeightSpec) -> SpectralVector:
    """Weighted time average of the source-free evolution started at ``xi``.

    Diagonal in the eigenbasis: each coefficient is scaled by the weight's
    multiplier at the corresponding eigenvalue.
    """
    return SpectralVector(xi.es, xi.coeffs * ws.multiplier(xi.es.lambdas))


def _gauss_panels(breaks: np.ndarray, max_width: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss nodes/weights on panels refined below ``max_width``."""
    ref_x, ref_w = np.polynomial.legendre.leggauss(order)
    nodes, wts = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        spans = max(1, int(math.ceil((b - a) / max_width - 1e-12)))
        edges = np.linspace(a, b, spans + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            nodes.append(0.5 * (lo + hi) + half * ref_x)
            wts.append(half * ref_w)
    return np.concatenate(nodes), np.concatenate(wts)


def _merged_breaks(ws: WeightSpec, src: SourceTerm) -> np.ndarray:
    pts = np.concatenate([ws.breakpoints(), src.times])
    pts = np.unique(np.clip(pts, 0.0, ws.horizon))
    keep = np.concatenate([[True], np.diff(pts) > 1e-14 * ws.horizon])
    return pts[keep]


def average_from_source(src: SourceTerm, ws: WeightSpec,
                        es: EigenSystem | None = None) -> SpectralVector:
    """Weighted time average of the zero-initial evolution driven by ``src``.

    The outer integral against the weight runs composite two-point Gauss on
    panels refined to the union of weight and source breakpoints.
    """
    es = es or src.es
    if es is None:
        raise ValueError("source has no eigensystem; pass one explicitly")
    if ws.kappa != 0.0 and src.onset >= ws.horizon:
        raise OnsetInvalid("terminal weighting requires onset < horizon")
    if abs(src.horizon - ws.horizon) > 1e-12 * ws.horizon:
        raise ValueError("source tabulation does not span the weight horizon")
    out = np.zeros(es.n_modes)
    nodes, wts = _gauss_panels(_merged_breaks(ws, src), ws.horizon / 512.0, order=2)
    wvals = ws.value_at(nodes)
    for t, wt, wv in zip(nodes, wts, wvals):
        if wv != 0.0:
            out += wt * wv * _duhamel_all(src, es, float(t))
    if ws.kappa != 0.0:
        out += ws.kappa * _duhamel_all(src, es, ws.horizon)
    return SpectralVector(es, out)


def weighted_average(field: SolutionField, ws: WeightSpec) -> SpectralVector:
    """Apply the averaged measurement to a spectral field.

    The homogeneous part is exact through the multipliers; the source part
    is integrated with fourth-order Gauss panels, deliberately different
    from the quadrature used by `average_from_source` so the two can
    cross-check each other.
    """
    if field.es is None or field.alpha is None:
        raise ValueError("weighted_average needs a spectrally built field")
    out = field.alpha.coeffs * ws.multiplier(field.es.lambdas)
    if field.source is not None:
        src = field.source
        nodes, wts = _gauss_panels(_merged_breaks(ws, src), ws.horizon / 320.0, order=4)
        wvals = ws.value_at(nodes)
        for t, wt, wv in zip(nodes, wts, wvals):
            if wv != 0.0:
                out = out + wt * wv * _duhamel_all(src, field.es, float(t))
        if ws.kappa != 0.0:
            out = out + ws.kappa * _duhamel_all(src, field.es, ws.horizon)
    return SpectralVector(field.es, out)
