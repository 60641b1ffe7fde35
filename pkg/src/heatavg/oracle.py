"""Finite-difference verification path, kept independent of the eigenbasis.

Crank-Nicolson time stepping of the diffusion problem with Dirichlet rows
enforced exactly, plus weighted trapezoid averaging in time.  This module
assembles its own difference operator from the OperatorSpec samples and
never touches eigen data, so agreement with the spectral modules is a
genuine cross-check rather than a tautology.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .basis import GridFunction, OperatorSpec, same_grid
from .forward import SolutionField, SourceTerm


class SingularStep(RuntimeError):
    """The implicit step matrix was singular; coefficients are corrupt."""


class BreakpointUnresolved(ValueError):
    """The field's time grid misses a weight breakpoint."""


@dataclass(frozen=True)
class StepperConfig:
    """Resolution of the finite-difference run.

    ``breakpoints`` are extra instants merged into the uniform time grid,
    typically the weight's piece boundaries; inserting them exactly keeps
    the averaging error at second order even for indicator weights.
    """

    n_nodes: int = 1025
    n_steps: int = 2048
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        if self.n_nodes < 3:
            raise ValueError("need at least 3 spatial nodes")
        if self.n_steps < 2:
            raise ValueError("need at least 2 time steps")

    def time_grid(self, horizon: float) -> np.ndarray:
        base = np.linspace(0.0, horizon, self.n_steps + 1)
        extra = [b for b in self.breakpoints if 0.0 < b < horizon]
        if not extra:
            return base
        merged = np.union1d(base, np.asarray(extra, dtype=float))
        keep = np.concatenate([[True], np.diff(merged) > 1e-12 * horizon])
        return merged[keep]


def step_evolution(op: OperatorSpec, xi: GridFunction, src: SourceTerm | None,
                   horizon: float, cfg: StepperConfig) -> SolutionField:
    """March the diffusion forward from ``xi`` with Crank-Nicolson steps."""
    grid = xi.grid
    if grid.n_nodes != cfg.n_nodes:
        raise ValueError("config n_nodes does not match the initial state's grid")
    if src is not None and not same_grid(src.grid, grid):
        raise ValueError("source and initial state use different grids")
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")

    a_mid, a0_nodes, _ = op.sample(grid)
    h = grid.h
    # Interior difference operator: lower/diag/upper of (a u')' + a0 u.
    lower = a_mid[1:-1] / h**2
    diag = -(a_mid[:-1] + a_mid[1:]) / h**2 + a0_nodes[1:-1]
    upper = a_mid[1:-1] / h**2

    times = cfg.time_grid(horizon)
    n_int = grid.n_nodes - 2
    values = np.zeros((times.size, grid.n_nodes))
    values[0] = xi.values
    values[0, 0] = 0.0
    values[0, -1] = 0.0

    u = values[0, 1:-1].copy()
    phi_now = src.values_at(0.0)[1:-1] if src is not None else None
    for n in range(times.size - 1):
        dt = times[n + 1] - times[n]
        ab = np.zeros((3, n_int))
        ab[0, 1:] = -0.5 * dt * upper
        ab[1, :] = 1.0 - 0.5 * dt * diag
        ab[2, :-1] = -0.5 * dt * lower
        rhs = u + 0.5 * dt * (diag * u)
        rhs[:-1] += 0.5 * dt * upper * u[1:]
        rhs[1:] += 0.5 * dt * lower * u[:-1]
        if src is not None:
            phi_next = src.values_at(float(times[n + 1]))[1:-1]
            rhs += 0.5 * dt * (phi_now + phi_next)
            phi_now = phi_next
        try:
            u = solve_banded((1, 1), ab, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularStep(f"implicit matrix singular at step {n}") from exc
        if not np.all(np.isfinite(u)):
            raise SingularStep(f"non-finite state at step {n}")
        values[n + 1, 1:-1] = u

    return SolutionField(grid=grid, times=times, values=values)


def time_average(field: SolutionField, ws) -> GridFunction:
    """Weighted trapezoid average in time plus the terminal contribution."""
    times = field.times
    horizon = ws.horizon
    if abs(times[-1] - horizon) > 1e-9 * horizon:
        raise BreakpointUnresolved("field horizon differs from the weight horizon")
    for b in ws.breakpoints():
        if np.min(np.abs(times - b)) > 1e-9 * horizon:
            raise BreakpointUnresolved(f"time grid misses weight breakpoint t = {b:g}")

    dt = np.diff(times)
    w_mid = np.asarray(ws.value_at(0.5 * (times[:-1] + times[1:])))
    panel = (w_mid * dt)[:, None] * 0.5 * (field.values[:-1] + field.values[1:])
    out = panel.sum(axis=0) + ws.kappa * field.values[-1]
    return GridFunction(field.grid, out)
