"""Config and CSV file formats shared by the command-line tools.

Configs are ini-style key = value files with sections [operator], [weight],
[run], and [figure1]; '#' starts a comment.  Grid functions travel as
two-column CSVs with header ``x,value``; space-time fields as three-column
CSVs with header ``x,t,u`` (sources use ``x,t,phi``).  All floats are
printed with 17 significant digits so files round-trip exactly.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import Grid, GridFunction, GridMismatch, OperatorSpec
from .forward import SolutionField, SourceTerm
from .weights import WeightSpec, load_weight_table


# -- CSV ---------------------------------------------------------------------

def write_grid_csv(path, gf: GridFunction) -> None:
    lines = ["x,value"]
    for x, v in zip(gf.grid.nodes, gf.values):
        lines.append(f"{x:.17g},{v:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid_csv(path, grid: Grid) -> GridFunction:
    raw = Path(path).read_text().splitlines()
    if not raw or raw[0].strip() != "x,value":
        raise ValueError(f"{path}: expected header 'x,value'")
    data = np.array([[float(f) for f in line.split(",")] for line in raw[1:] if line.strip()])
    if data.shape != (grid.n_nodes, 2):
        raise GridMismatch(f"{path}: {data.shape[0]} rows but the grid has {grid.n_nodes} nodes")
    if np.max(np.abs(data[:, 0] - grid.nodes)) > 1e-9 * max(grid.length, 1.0):
        raise GridMismatch(f"{path}: abscissae do not match the configured grid")
    return GridFunction(grid, data[:, 1])


def write_field_csv(path, field: SolutionField, column: str = "u") -> None:
    lines = [f"x,t,{column}"]
    for j, t in enumerate(field.times):
        row = field.values[j]
        for x, v in zip(field.grid.nodes, row):
            lines.append(f"{x:.17g},{t:.17g},{v:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_space_time_csv(path, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Parse an ``x,t,<name>`` CSV into (times, values[n_times, n_nodes])."""
    raw = Path(path).read_text().splitlines()
    if not raw or not raw[0].strip().startswith("x,t,"):
        raise ValueError(f"{path}: expected header 'x,t,<name>'")
    data = np.array([[float(f) for f in line.split(",")] for line in raw[1:] if line.strip()])
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValueError(f"{path}: expected three columns")
    n = grid.n_nodes
    if data.shape[0] % n != 0:
        raise GridMismatch(f"{path}: row count is not a multiple of the grid size")
    n_times = data.shape[0] // n
    times = data[::n, 1]
    if not np.all(np.diff(times) > 0):
        raise ValueError(f"{path}: time blocks must be strictly increasing")
    xs = data[:n, 0]
    if np.max(np.abs(xs - grid.nodes)) > 1e-9 * max(grid.length, 1.0):
        raise GridMismatch(f"{path}: abscissae do not match the configured grid")
    values = data[:, 2].reshape(n_times, n)
    return times, values


# -- config ------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    operator: OperatorSpec
    weight: WeightSpec
    horizon: float
    n_modes: int = 300
    n_nodes: int = 1025
    n_steps: int = 2048
    n_times: int = 129
    onset: float = 0.0
    delta: float = 0.1
    frequencies: tuple[float, ...] = (1.0, 3.0)
    fig_n_modes: int | None = None

    def grid(self) -> Grid:
        return Grid.uniform(self.operator.length, self.n_nodes)

    def source_from_csv(self, path, grid: Grid, es=None) -> SourceTerm:
        times, values = read_space_time_csv(path, grid)
        if abs(times[0]) > 1e-12 * self.horizon or abs(times[-1] - self.horizon) > 1e-12 * self.horizon:
            raise ValueError(f"{path}: source tabulation must cover [0, {self.horizon:g}]")
        t = np.array(times)
        t[0] = 0.0
        t[-1] = self.horizon
        return SourceTerm.from_grid_history(grid, t, values, onset=self.onset, es=es)


def load_config(path) -> RunConfig:
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise OSError(f"cannot read config file {path}")

    if "operator" not in parser or "L" not in parser["operator"]:
        raise ValueError(f"{path}: [operator] section with L is required")
    op_sec = parser["operator"]
    length = op_sec.getfloat("L")
    if "coeff_table" in op_sec:
        table = _resolve(path, op_sec["coeff_table"])
        data = np.loadtxt(table, ndmin=2)
        if data.shape[1] != 3:
            raise ValueError(f"{table}: expected columns 'x a a0'")
        operator = OperatorSpec.from_table(length, data[:, 0], data[:, 1], data[:, 2])
    else:
        operator = OperatorSpec.constant(length, q=op_sec.getfloat("q", 0.0),
                                         diffusion=op_sec.getfloat("diffusion", 1.0))

    if "run" not in parser or "T" not in parser["run"]:
        raise ValueError(f"{path}: [run] section with T is required")
    run = parser["run"]
    horizon = run.getfloat("T")
    if horizon <= 0.0:
        raise ValueError(f"{path}: T must be positive")

    weight = _load_weight(parser, path, horizon)

    fig = parser["figure1"] if "figure1" in parser else {}
    frequencies = tuple(
        float(f) for f in str(fig.get("frequencies", "1, 3")).replace(",", " ").split()
    )
    fig_n = fig.get("N") if fig else None

    return RunConfig(
        operator=operator,
        weight=weight,
        horizon=horizon,
        n_modes=run.getint("N", 300),
        n_nodes=run.getint("n_nodes", 1025),
        n_steps=run.getint("n_steps", 2048),
        n_times=run.getint("n_times", 129),
        onset=run.getfloat("onset", 0.0),
        delta=float(fig.get("delta", 0.1)) if fig else 0.1,
        frequencies=frequencies,
        fig_n_modes=int(fig_n) if fig_n is not None else None,
    )


def _load_weight(parser: configparser.ConfigParser, path: Path, horizon: float) -> WeightSpec:
    if "weight" not in parser:
        return WeightSpec.average(horizon)
    sec = parser["weight"]
    kappa = sec.getfloat("kappa", 0.0)
    case = sec.get("case", "table" if "table" in sec else "average").strip().lower()
    t1 = sec.getfloat("T1") if "T1" in sec else None
    if case == "average":
        ws = WeightSpec.from_pieces(kappa, ((0.0, horizon, 1.0),), horizon,
                                    t1=t1 if t1 is not None else horizon)
    elif case == "quasi":
        eps = sec.getfloat("epsilon", None)
        if eps is None:
            raise ValueError(f"{path}: the quasi weight case needs 'epsilon'")
        if not 0.0 < eps <= horizon:
            raise ValueError(f"{path}: epsilon must lie in (0, T]")
        ws = WeightSpec.from_pieces(kappa if "kappa" in sec else 1.0,
                                    ((0.0, eps, 1.0),), horizon,
                                    t1=t1 if t1 is not None else eps)
    elif case == "zero":
        ws = WeightSpec(kappa=kappa, pieces=(), horizon=horizon, t1=t1)
    elif case == "table":
        if "table" not in sec:
            raise ValueError(f"{path}: the table weight case needs 'table'")
        pieces = load_weight_table(_resolve(path, sec["table"]))
        ws = WeightSpec.from_pieces(kappa, pieces, horizon, t1=t1)
    else:
        raise ValueError(f"{path}: unknown weight case '{case}'")
    return ws


def _resolve(config_path: Path, ref: str) -> Path:
    p = Path(ref)
    if not p.is_absolute():
        p = config_path.parent / p
    if not p.exists():
        raise OSError(f"referenced file does not exist: {p}")
    return p
