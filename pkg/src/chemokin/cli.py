"""Command-line driver: configuration, dispatch and result files.

Subcommands ``simulate``, ``moments``, ``critical-mass``, ``stationary`` and
``verify``.  Settings come from an INI file (``[common]`` plus one section
per command) and are overridden by flags.  All data files are written
with ``repr`` floats so that reading them back is lossless, and carry no
wall-clock content, so identical configurations give identical bytes.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kinetic, moments, stationary
from .core import GridError, ModelKind, PhaseField, SpatialGrid, VelocityGrid

log = logging.getLogger("chemokin")

EXIT_OK = 0
EXIT_FAILED_CHECKS = 1
EXIT_VALIDATION = 2
EXIT_DIVERGED = 3
EXIT_NOT_CONVERGED = 4

COMMANDS = ("simulate", "moments", "critical-mass", "stationary", "verify")
FAMILIES = ("gaussian-product", "exponential-signal", "double-bump", "file")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


# --------------------------------------------------------------------------
# Configuration.

@dataclass
class InitialConditionDescriptor:
    """Named family of initial data, normalized to mass ``M`` on the grid.

    ``gaussian-product``: ``exp(-(x-x0)^2/2wx^2 - (v-v0)^2/2wv^2)``.
    ``exponential-signal``: ``exp(-|x-x0|/wx) exp(-|v-v0|/wv)``.
    ``double-bump``: Gaussians in ``x`` at ``x0 +- separation/2`` times a
    Gaussian in ``v``.  ``file``: a field snapshot written by
    :func:`write_field`.
    """

    family: str = "gaussian-product"
    center_x: float = 0.0
    center_v: float = 0.0
    width_x: float = 1.0
    width_v: float = 1.0
    separation: float = 4.0
    path: str = ""

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigError("initial", f"unknown family {self.family!r}; expected one of {FAMILIES}")
        for name in ("width_x", "width_v"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(name, f"must be positive, got {value}")
        if self.family == "double-bump" and not self.separation > 0:
            raise ConfigError("separation", f"must be positive, got {self.separation}")
        if self.family == "file" and not self.path:
            raise ConfigError("path", "family 'file' needs a path")

    def build(self, x_grid: SpatialGrid, v_grid: VelocityGrid, M: float) -> PhaseField:
        if self.family == "file":
            f = read_field(self.path)
            if f.x_grid != x_grid or f.v_grid != v_grid:
                x_grid, v_grid = f.x_grid, f.v_grid
                log.info("grid taken from %s", self.path)
            values = f.values.copy()
        else:
            X = x_grid.nodes[:, None] - self.center_x
            V = v_grid.nodes[None, :] - self.center_v
            gv = np.exp(-0.5 * (V / self.width_v) ** 2)
            if self.family == "gaussian-product":
                values = np.exp(-0.5 * (X / self.width_x) ** 2) * gv
            elif self.family == "exponential-signal":
                values = np.exp(-np.abs(X) / self.width_x) * np.exp(-np.abs(V) / self.width_v)
            else:
                d = 0.5 * self.separation
                gx = np.exp(-0.5 * ((X - d) / self.width_x) ** 2) + np.exp(-0.5 * ((X + d) / self.width_x) ** 2)
                values = gx * gv
        if np.min(values) < 0:
            raise ConfigError("initial", "initial datum has negative values")
        f = PhaseField(x_grid, v_grid, values)
        total = f.mass()
        if not total > 0:
            raise ConfigError("initial", "initial datum has no mass on the grid")
        return f.with_values(values * (M / total))


@dataclass
class ExperimentConfig:
    command: str
    model: str = "A"
    M: float = 4.0
    L: float = 20.0
    n_x: int = 257
    V: float = 20.0
    n_v: int = 257
    dt: float = 0.01
    t_end: float = 5.0
    stride: int = 10
    moment_order: int = 2
    boundary: str = "reflect"
    tol: float | None = None
    N_max: int = 12
    max_iter: int = 500
    interp: str = "linear"
    jobs: int = 1
    out: str = "out"
    initial: InitialConditionDescriptor = field(default_factory=InitialConditionDescriptor)

    def validate(self) -> "ExperimentConfig":
        if self.command not in COMMANDS:
            raise ConfigError("command", f"unknown command {self.command!r}")
        try:
            ModelKind.parse(self.model)
        except ValueError as exc:
            raise ConfigError("model", str(exc)) from None
        if not (self.M > 0 and math.isfinite(self.M)):
            raise ConfigError("M", f"mass must be positive and finite, got {self.M}")
        if self.command == "stationary" and not self.M > 2:
            raise ConfigError("M", f"steady states require M > 2, got {self.M}")
        if self.command == "stationary" and ModelKind.parse(self.model) is not ModelKind.A:
            raise ConfigError("model", "steady states are computed for model A only")
        if self.tol is not None and not (self.tol > 0 and math.isfinite(self.tol)):
            raise ConfigError("tol", f"must be positive, got {self.tol}")
        for name in ("L", "V", "dt"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(name, f"must be positive, got {value}")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ConfigError("t_end", f"must be nonnegative, got {self.t_end}")
        for name, grid_cls, half in (("n_x", SpatialGrid, self.L), ("n_v", VelocityGrid, self.V)):
            try:
                grid_cls(half, getattr(self, name))
            except GridError as exc:
                raise ConfigError(name, str(exc)) from None
        for name, low in (("stride", 1), ("moment_order", 0), ("N_max", 2), ("max_iter", 1), ("jobs", 1)):
            if getattr(self, name) < low:
                raise ConfigError(name, f"must be >= {low}, got {getattr(self, name)}")
        if self.boundary not in kinetic.BOUNDARIES:
            raise ConfigError("boundary", f"expected one of {kinetic.BOUNDARIES}")
        if self.interp not in ("linear", "cubic"):
            raise ConfigError("interp", "expected 'linear' or 'cubic'")
        self.initial.validate()
        return self

    def grids(self) -> tuple[SpatialGrid, VelocityGrid]:
        return SpatialGrid(self.L, self.n_x), VelocityGrid(self.V, self.n_v)

    def as_dict(self) -> dict:
        """Config echo for metadata; the output directory is left out so reruns elsewhere match."""
        d = dataclasses.asdict(self)
        d.pop("out")
        return d


_TOP_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig) if f.name not in ("command", "initial")}
_IC_FIELDS = {f.name: f for f in dataclasses.fields(InitialConditionDescriptor)}
_IC_ALIASES = {"initial": "family"}


def _coerce(name: str, kind, raw):
    if raw is None:
        return None
    # annotations are strings under postponed evaluation
    label = kind if isinstance(kind, str) else kind.__name__
    target = {"float": float, "float | None": float, "int": int, "str": str}.get(label, str)
    try:
        if target is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        return target(raw)
    except (TypeError, ValueError):
        raise ConfigError(name, f"cannot read {raw!r} as {target.__name__}") from None


def _apply(cfg: ExperimentConfig, key: str, raw) -> None:
    key = key.strip()
    if key in _IC_ALIASES:
        key = _IC_ALIASES[key]
    if key in _TOP_FIELDS:
        setattr(cfg, key, _coerce(key, _TOP_FIELDS[key].type, raw))
    elif key in _IC_FIELDS:
        setattr(cfg.initial, key, _coerce(key, _IC_FIELDS[key].type, raw))
    else:
        raise ConfigError(key, "unknown key")


def load_config_file(path: str | Path, command: str | None = None) -> ExperimentConfig:
    """Read ``[common]`` and the command's own section.

    Sections of other commands are skipped; any other section name is an error.

    The command comes from ``command`` or, failing that, a ``command`` key in
    ``[common]``.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    for section in parser.sections():
        if section != "common" and section not in COMMANDS:
            raise ConfigError(section, "unknown section")
    common = dict(parser["common"]) if parser.has_section("common") else {}
    file_command = common.pop("command", None)
    command = command or file_command
    if command is None:
        raise ConfigError("command", "no command given")
    cfg = ExperimentConfig(command)
    for key, raw in common.items():
        _apply(cfg, key, raw)
    if parser.has_section(command):
        for key, raw in parser[command].items():
            _apply(cfg, key, raw)
    return cfg


def parse_config(argv: list[str] | None = None) -> ExperimentConfig:
    """Build a validated configuration from flags and an optional ``--config`` file."""
    args = build_parser().parse_args(argv)
    if args.config:
        cfg = load_config_file(args.config, args.command)
    else:
        cfg = ExperimentConfig(args.command)
    for key, value in vars(args).items():
        if key in ("command", "config", "verbose") or value is None:
            continue
        _apply(cfg, key, value)
    return cfg.validate()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chemokin", description="Kinetic chemotaxis laboratory.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="INI file with [common] and per-command sections")
        s.add_argument("--out", help="output directory")
        s.add_argument("-v", "--verbose", action="store_true")
        s.add_argument("--model", choices=("A", "B", "a", "b"))
        s.add_argument("--M", "--mass", dest="M", type=float)
        s.add_argument("--L", dest="L", type=float, help="spatial half width")
        s.add_argument("--n-x", dest="n_x", type=int)
        s.add_argument("--V", dest="V", type=float, help="velocity half width")
        s.add_argument("--n-v", dest="n_v", type=int)
        s.add_argument("--dt", type=float)
        s.add_argument("--t-end", dest="t_end", type=float)
        s.add_argument("--stride", type=int)
        s.add_argument("--moment-order", dest="moment_order", type=int)
        s.add_argument("--boundary", choices=kinetic.BOUNDARIES)
        s.add_argument("--tol", type=float)
        s.add_argument("--N-max", dest="N_max", type=int)
        s.add_argument("--max-iter", dest="max_iter", type=int)
        s.add_argument("--interp", choices=("linear", "cubic"))
        s.add_argument("--jobs", type=int)
        s.add_argument("--initial", choices=FAMILIES)
        s.add_argument("--center-x", dest="center_x", type=float)
        s.add_argument("--center-v", dest="center_v", type=float)
        s.add_argument("--width-x", dest="width_x", type=float)
        s.add_argument("--width-v", dest="width_v", type=float)
        s.add_argument("--separation", type=float)
        s.add_argument("--path", help="field snapshot for --initial file")
    return p


# --------------------------------------------------------------------------
# Writers and readers.

def _fmt(x) -> str:
    return repr(float(x))


def write_timeseries(path: str | Path, times, columns: dict[str, np.ndarray]) -> None:
    """CSV with header ``t, <columns...>``; one row per time."""
    names = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *names])
        for k, t in enumerate(times):
            w.writerow([_fmt(t), *(_fmt(columns[n][k]) for n in names)])


def read_timeseries(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return header, data


def moment_columns(tables: list[moments.MomentTable], masses=None) -> dict[str, np.ndarray]:
    """``A_m_n`` columns ordered by total order, then by decreasing ``m``; ``mass`` last."""
    order = tables[0].order
    cols = {}
    for N in range(2, order + 1):
        for n in range(N + 1):
            m = N - n
            cols[f"A_{m}_{n}"] = np.array([t[m, n] for t in tables])
    cols["mass"] = np.array([t.mass for t in tables]) if masses is None else np.asarray(masses)
    return cols


def write_table(path: str | Path, rows: list[tuple[int, float]], header=("N", "M_N")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for N, value in rows:
            w.writerow([str(int(N)), _fmt(value)])


def read_table(path: str | Path) -> list[tuple[int, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return [(int(a), float(b)) for a, b in rows]


def _write_pairs(path, nodes, values, names):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for a, b in zip(nodes, values):
            w.writerow([_fmt(a), _fmt(b)])


def write_field(path: str | Path, f: PhaseField) -> None:
    """Row-major CSV of ``f[i, j]`` (rows are ``x``) after a one-line grid header."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# L={_fmt(f.x_grid.half_width)} n_x={f.x_grid.n} V={_fmt(f.v_grid.half_width)} n_v={f.v_grid.n}\n")
        w = csv.writer(fh, lineterminator="\n")
        for row in f.values:
            w.writerow([_fmt(x) for x in row])


def read_field(path: str | Path) -> PhaseField:
    with open(path, newline="") as fh:
        head = fh.readline()
        if not head.startswith("#"):
            raise ConfigError("path", f"{path} has no grid header")
        meta = dict(item.split("=") for item in head[1:].split())
        rows = [[float(x) for x in r] for r in csv.reader(fh)]
    xg = SpatialGrid(float(meta["L"]), int(meta["n_x"]))
    vg = VelocityGrid(float(meta["V"]), int(meta["n_v"]))
    return PhaseField(xg, vg, np.array(rows, dtype=float))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_metadata(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def read_metadata(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


# --------------------------------------------------------------------------
# Commands.

def _run_simulate(cfg: ExperimentConfig, out: Path) -> int:
    xg, vg = cfg.grids()
    f0 = cfg.initial.build(xg, vg, cfg.M)
    sim = kinetic.SimulationConfig(cfg.model, cfg.dt, cfg.t_end, cfg.stride, cfg.moment_order,
                                   keep_snapshots=False, boundary=cfg.boundary)
    meta = {"config": cfg.as_dict()}
    try:
        traj = kinetic.simulate(sim, f0)
    except kinetic.SimulationDiverged as exc:
        meta["status"] = f"diverged: {exc}"
        write_metadata(out / "metadata.json", meta)
        return EXIT_DIVERGED
    write_timeseries(out / "timeseries.csv", traj.times, moment_columns(traj.moments, traj.masses))
    meta.update(mass_drift=float(np.max(np.abs(traj.masses - traj.masses[0]))),
                min_value=traj.min_value, outflow=traj.outflow, edge_mass=traj.edge_mass, status="ok")
    if sim.model is ModelKind.A and cfg.moment_order >= 2:
        cascade = moments.integrate_cascade(traj.moments[0], t_end=cfg.t_end, tol=1e-10,
                                            t_eval=traj.times)
        if not cascade.diverged:
            write_timeseries(out / "cascade.csv", cascade.times, moment_columns(cascade.tables))
            meta["closure_relative_error"] = closure_errors(traj, cascade)
    write_metadata(out / "metadata.json", meta)
    return EXIT_OK


def closure_errors(traj: kinetic.Trajectory, cascade: moments.CascadeResult) -> dict[str, float]:
    """``max_t |A_sim - A_ode| / max_t |A_ode|`` for the second moments."""
    errs = {}
    for m, n in ((2, 0), (1, 1), (0, 2)):
        a = traj.series(m, n)
        b = cascade.series(m, n)
        errs[f"A_{m}_{n}"] = float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
    return errs


def _run_moments(cfg: ExperimentConfig, out: Path) -> int:
    xg, vg = cfg.grids()
    f0 = cfg.initial.build(xg, vg, cfg.M)
    meta = {"config": cfg.as_dict()}
    t_eval = np.linspace(0.0, cfg.t_end, int(round(cfg.t_end / cfg.dt / cfg.stride)) + 1)
    if ModelKind.parse(cfg.model) is ModelKind.A:
        initial = moments.compute_moments(f0, max(cfg.moment_order, 2))
        res = moments.integrate_cascade(initial, t_end=cfg.t_end, tol=cfg.tol or 1e-10, t_eval=t_eval)
        write_timeseries(out / "timeseries.csv", res.times, moment_columns(res.tables))
        meta.update(diverged=res.diverged, message=res.message)
        if cfg.M > 2:
            meta["steady_state"] = moments.second_order_steady_state(cfg.M)
        meta["stability"] = {str(N): moments.stability(N, cfg.M).verdict.value
                             for N in range(2, max(cfg.moment_order, 2) + 1)}
        diverged = res.diverged
    else:
        initial = moments.compute_moments(f0, 2).second_order()
        res = moments.model_b_order2(cfg.M, initial, cfg.t_end, tol=cfg.tol or 1e-10, guard=moments.DIVERGENCE_GUARD)
        cols = {"A_2_0": res.A20, "A_1_1": res.A11, "A_0_2": res.A02, "D": res.det,
                "mass": np.full(res.times.shape, cfg.M)}
        write_timeseries(out / "timeseries.csv", res.times, cols)
        meta.update(blow_up_time=res.blow_up_time, det_identity_error=res.det_identity_error,
                    jacobian_eigenvalues=[complex(z) for z in res.jacobian_eigenvalues])
        diverged = res.blow_up_time is not None
    write_metadata(out / "metadata.json", meta)
    return EXIT_DIVERGED if diverged else EXIT_OK


def _critical_row(N: int) -> tuple[int, float]:
    return N, moments.critical_masses(N, N_min=N)[0].M_N


def _run_critical_mass(cfg: ExperimentConfig, out: Path) -> int:
    orders = list(range(2, cfg.N_max + 1))
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_critical_row, orders))
    else:
        rows = [_critical_row(N) for N in orders]
    rows.sort()
    write_table(out / "critical_masses.csv", rows)
    write_metadata(out / "metadata.json", {"config": cfg.as_dict(), "rows": len(rows)})
    for N, value in rows:
        print(f"N={N:3d}  M_N={value:.12g}")
    return EXIT_OK


def _run_stationary(cfg: ExperimentConfig, out: Path) -> int:
    xg, vg = cfg.grids()
    res = stationary.solve_stationary(cfg.M, xg, vg, tol=cfg.tol, max_iter=cfg.max_iter, interp=cfg.interp)
    _write_pairs(out / "density.csv", xg.nodes, res.rho.values, ("x", "rho"))
    write_field(out / "field.csv", res.f)
    write_timeseries(out / "history.csv", np.arange(1, len(res.history) + 1),
                     {"update": np.array(res.history), "mass_defect": np.array(res.mass_defects)})
    a20, a11, a02 = res.second_moments
    meta = {
        "config": cfg.as_dict(), "converged": res.converged, "iterations": res.iterations,
        "update_norm": res.update_norm, "residual_l1": res.residual_l1,
        "max_speed_weighted": res.max_speed_weighted, "weighted_mass": res.weighted_mass(),
        "second_moments": [a20, a11, a02], "predicted_second_moments": moments.second_order_steady_state(cfg.M),
        "max_mass_defect": max(abs(d) for d in res.mass_defects),
    }
    write_metadata(out / "metadata.json", meta)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def verify_checks() -> list[tuple[str, bool, str]]:
    """Fast invariant checks across modules, each ``(name, passed, detail)``."""
    from .signal import convolve_signal, second_difference_residual, signal_moments
    from .core import DensityProfile
    rows = []

    def add(name, ok, detail):
        rows.append((name, bool(ok), detail))

    xg = SpatialGrid(20.0, 801)
    rho = DensityProfile(xg, np.exp(-0.5 * xg.nodes ** 2) * 4 / math.sqrt(2 * math.pi))
    S = convolve_signal(rho)
    add("signal mass", abs(S.mass() - 4.0) < 1e-6, f"{S.mass():.10f}")
    r = np.max(np.abs(second_difference_residual(rho, S)))
    add("signal screened equation", r < 1e-3, f"max residual {r:.2e}")
    Sm = signal_moments([4.0, 0.0, 4.0])
    add("signal second moment", abs(Sm[2] - 12.0) < 1e-12, f"S_2={Sm[2]}")
    for M in (3.0, 4.0, 10.0):
        table = moments.MomentTable.from_dict(2, {(0, 0): M, (2, 0): M, (0, 2): M})
        res = moments.integrate_cascade(table, t_end=200.0 / (M - 2))
        target = np.array(moments.second_order_steady_state(M))
        err = float(np.max(np.abs(np.array(res.final.second_order()) - target)))
        add(f"order-2 equilibrium M={M:g}", err < 1e-6, f"error {err:.2e}")
    for M, stable in ((1.0, False), (4.0, True)):
        rep = moments.stability(2, M)
        add(f"order-2 stability M={M:g}", (rep.max_real < 0) == stable, f"max Re {rep.max_real:.3f}")
    rows_cm = moments.critical_masses(5)
    values = [row.M_N for row in rows_cm]
    add("critical masses increasing", all(b >= a for a, b in zip(values, values[1:])),
        ", ".join(f"{v:.4f}" for v in values))
    xg2, vg2 = SpatialGrid(10.0, 129), VelocityGrid(10.0, 129)
    f = InitialConditionDescriptor().build(xg2, vg2, 3.0)
    g = kinetic.step(f, 0.01)
    add("kinetic step mass", abs(g.mass() - 3.0) < 1e-10, f"drift {g.mass() - 3.0:.1e}")
    add("kinetic step nonnegative", g.values.min() >= 0, f"min {g.values.min():.1e}")
    rho_s = stationary.exponential_initial(SpatialGrid(20.0, 257), 4.0)
    fm = stationary.mild_apply(rho_s, 4.0, VelocityGrid(20.0, 257))
    add("mild form evenness", np.array_equal(fm.values, fm.values[::-1, ::-1]), "")
    add("mild form mass", abs(fm.mass() - 4.0) < 1e-3, f"{fm.mass():.6f}")
    return rows


def _run_verify(cfg: ExperimentConfig, out: Path) -> int:
    rows = verify_checks()
    width = max(len(r[0]) for r in rows)
    lines = [f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}" for name, ok, detail in rows]
    print("\n".join(lines))
    write_metadata(out / "verify.json", {"checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in rows]})
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_FAILED_CHECKS


_DISPATCH = {
    "simulate": _run_simulate,
    "moments": _run_moments,
    "critical-mass": _run_critical_mass,
    "stationary": _run_stationary,
    "verify": _run_verify,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute a validated configuration and return the exit status."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return _DISPATCH[cfg.command](cfg, out)
    except moments.CriticalMassNotExceeded as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except (ValueError, GridError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.INFO if "-v" in argv or "--verbose" in argv else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
