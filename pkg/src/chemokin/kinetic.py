"""Time-dependent kinetic solver for both turning models, plus two validators.

The solver is Strang splitting: half a step of free transport, a full step of
the turning operator with the exact integrating factor for the ``-M f`` loss,
and another half step of transport.  Transport is a conservative,
positivity-preserving flux-form shift along each velocity row.

The validators reproduce the two existence constructions at desk scale: one
application of the Duhamel map for Model A (its Lipschitz constant), and the
increasing iteration for Model B.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from .core import (DensityProfile, ModelKind, PhaseField, SpatialGrid, VelocityGrid, mass, shift_reflecting,
                   shift_rows)
from .moments import MomentTable, compute_moments
from .signal import ExtendedSignal, extended_signal

log = logging.getLogger(__name__)


class SimulationDiverged(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Turning operators.

def _shift_index_ratio(x_grid: SpatialGrid, v_grid: VelocityGrid) -> int | None:
    """``dv / dx`` when it is a whole number, else None."""
    r = v_grid.spacing / x_grid.spacing
    k = round(r)
    return k if k >= 1 and abs(r - k) < 1e-12 * r else None


def _signal_at(S: ExtendedSignal, x_grid: SpatialGrid, v_grid: VelocityGrid, offsets: np.ndarray) -> np.ndarray:
    """``S(x_i + k dv)`` for every node ``i`` and integer offset ``k`` in ``offsets``."""
    ratio = _shift_index_ratio(x_grid, v_grid)
    if ratio is not None:
        c_ext = (S.values.size - 1) // 2
        idx = (np.arange(x_grid.n) - x_grid.center)[:, None] + ratio * offsets[None, :] + c_ext
        out = np.zeros(idx.shape)
        ok = (idx >= 0) & (idx < S.values.size)
        out[ok] = S.values[idx[ok]]
        return out
    points = x_grid.nodes[:, None] + offsets[None, :] * v_grid.spacing
    return S(points)


def _signal(f: PhaseField, reach: float) -> tuple[np.ndarray, ExtendedSignal]:
    rho = f.density()
    return rho.values, extended_signal(rho, reach)


def gain_A(f: PhaseField, conservative: bool = True) -> np.ndarray:
    """``S[rho](x + v) rho(x)``.

    With ``conservative`` each x-row of the kernel ``S(x + .)`` is rescaled so
    its velocity integral equals the mass, as it does on the whole line;
    otherwise the part of the kernel beyond ``|v| = V`` is simply lost.
    """
    rho, S = _signal(f, f.v_grid.half_width)
    offsets = np.arange(f.v_grid.n) - f.v_grid.center
    kernel = _signal_at(S, f.x_grid, f.v_grid, offsets)
    if conservative:
        window = kernel @ f.v_grid.weights
        total = float(f.x_grid.integrate(rho))
        kernel = kernel * _safe_ratio(total, window)[:, None]
    return kernel * rho[:, None]


def gain_B(f: PhaseField, conservative: bool = True) -> np.ndarray:
    """``int S[rho](x + v - v') f(x, v') dv'`` by a direct sum per x.

    ``conservative`` rescales each kernel column ``S(x + . - v')`` to integrate
    to the mass over the velocity grid (see :func:`gain_A`).
    """
    nv = f.v_grid.n
    rho, S = _signal(f, 2 * f.v_grid.half_width)
    offsets = np.arange(-(nv - 1), nv)
    T = _signal_at(S, f.x_grid, f.v_grid, offsets)
    wv = f.v_grid.weights
    g = f.values * wv[None, :]
    if conservative:
        total = float(f.x_grid.integrate(rho))
        scale = np.empty_like(f.values)
        for i in range(f.x_grid.n):
            # window[j'] = sum_j w_j T[i, j - j' + nv - 1]
            scale[i] = np.correlate(T[i], wv, mode="valid")[::-1]
        g = g * _safe_ratio(total, scale)
    out = np.empty_like(f.values)
    for i in range(f.x_grid.n):
        out[i] = np.convolve(T[i], g[i], mode="valid")
    return out


def _safe_ratio(total: float, window: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        r = total / window
    return np.where(window > 0, r, 0.0)


def apply_Q_A(f: PhaseField) -> PhaseField:
    return f.with_values(gain_A(f) - mass(f) * f.values)


def apply_Q_B(f: PhaseField) -> PhaseField:
    return f.with_values(gain_B(f) - mass(f) * f.values)


_GAINS = {ModelKind.A: gain_A, ModelKind.B: gain_B}


# --------------------------------------------------------------------------
# Time stepping.

BOUNDARIES = ("reflect", "outflow")


def transport(f: PhaseField, tau: float, boundary: str = "reflect") -> PhaseField:
    """Free streaming ``f(x - v tau, v)`` up to the shift reconstruction.

    ``reflect`` puts specular walls just outside ``x = +-L`` (mass is kept);
    ``outflow`` lets mass leave and nothing enter.
    """
    if boundary == "reflect":
        return f.with_values(shift_reflecting(f.values, f.v_grid.nodes, tau, f.x_grid.spacing))
    if boundary == "outflow":
        shifted = shift_rows(f.values.T, f.v_grid.nodes * tau, f.x_grid.spacing)
        return f.with_values(np.ascontiguousarray(shifted.T))
    raise ValueError(f"unknown boundary {boundary!r}; expected one of {BOUNDARIES}")


def relax(f: PhaseField, dt: float, model: ModelKind, gain: np.ndarray | None = None) -> PhaseField:
    """Integrating-factor update ``e^{-M dt} f + (1 - e^{-M dt}) / M * gain``.

    The gain is frozen at its value for the incoming ``f``.
    """
    M = mass(f)
    if M == 0.0:
        return f
    if gain is None:
        gain = _GAINS[ModelKind.parse(model)](f)
    decay = math.exp(-M * dt)
    return f.with_values(decay * f.values + (-math.expm1(-M * dt) / M) * gain)


def step(f: PhaseField, dt: float, model: ModelKind | str = ModelKind.A, gain=None,
         boundary: str = "reflect") -> PhaseField:
    """One Strang step.  ``gain`` may be a callable ``PhaseField -> array``
    replacing the model's gain (used to switch the signal off in tests)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    half = transport(f, 0.5 * dt, boundary)
    g = gain(half) if callable(gain) else None
    mid = relax(half, dt, ModelKind.parse(model), g)
    return transport(mid, 0.5 * dt, boundary)


@dataclass
class SimulationConfig:
    model: ModelKind = ModelKind.A
    dt: float = 0.01
    t_end: float = 5.0
    stride: int = 10
    moment_order: int = 3
    keep_snapshots: bool = True
    boundary: str = "reflect"

    def __post_init__(self):
        self.model = ModelKind.parse(self.model)
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValueError(f"stride must be a positive integer, got {self.stride}")
        if self.moment_order < 0:
            raise ValueError("moment_order must be >= 0")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Trajectory:
    times: np.ndarray
    moments: list[MomentTable]
    masses: np.ndarray
    snapshots: list[PhaseField] = field(default_factory=list)
    min_value: float = 0.0
    outflow: float = 0.0
    edge_mass: float = 0.0

    def series(self, m: int, n: int) -> np.ndarray:
        return np.array([t[m, n] for t in self.moments])


def simulate(config: SimulationConfig, f_I: PhaseField) -> Trajectory:
    """March ``f_I`` to ``config.t_end``, recording every ``stride`` steps."""
    if np.min(f_I.values) < 0:
        raise ValueError("initial datum must be nonnegative")
    model = config.model
    f = f_I
    times, moments, masses, snaps = [0.0], [compute_moments(f, config.moment_order)], [mass(f)], []
    if config.keep_snapshots:
        snaps.append(f)
    min_value = float(np.min(f.values))
    outflow = edge = 0.0
    bc = config.boundary
    for k in range(1, config.n_steps + 1):
        before = mass(f)
        half = transport(f, 0.5 * config.dt, bc)
        mid = relax(half, config.dt, model)
        f = transport(mid, 0.5 * config.dt, bc)
        outflow += (before - mass(half)) + (mass(mid) - mass(f))
        if not np.all(np.isfinite(f.values)):
            raise SimulationDiverged(f"non-finite values at step {k} (t={k * config.dt:g})")
        min_value = min(min_value, float(np.min(f.values)))
        edge = max(edge, _edge_mass(f))
        if k % config.stride == 0 or k == config.n_steps:
            times.append(k * config.dt)
            moments.append(compute_moments(f, config.moment_order))
            masses.append(mass(f))
            if config.keep_snapshots:
                snaps.append(f)
    return Trajectory(np.array(times), moments, np.array(masses), snaps, min_value, outflow, edge)


def _edge_mass(f: PhaseField, fraction: float = 0.05) -> float:
    """Mass in the outer ``fraction`` of the x-domain; a truncation monitor."""
    x = f.x_grid.nodes
    rho = f.v_grid.integrate(f.values, axis=1)
    outer = np.abs(x) >= (1.0 - fraction) * f.x_grid.half_width
    return float(np.sum((f.x_grid.weights * rho)[outer]))


# --------------------------------------------------------------------------
# Duhamel map of Model A.

def _duhamel_gain(rho: DensityProfile, S: ExtendedSignal, v: np.ndarray, s: float) -> np.ndarray:
    """``S[rho](x + v(1 - s)) rho(x - v s)`` on the phase grid."""
    x = rho.grid.nodes[:, None]
    r = np.interp(x - v[None, :] * s, rho.grid.nodes, rho.values, left=0.0, right=0.0)
    return S(x + v[None, :] * (1.0 - s)) * r


@dataclass
class ContractionReport:
    ratio: float
    bound: float
    times: np.ndarray
    differences: np.ndarray
    input_distance: float


def duhamel_gain_integral(rho: DensityProfile, M: float, t: float, v_grid: VelocityGrid,
                          n_s: int = 24) -> np.ndarray:
    """``int_0^t e^{-M s} rho(x - v s) S[rho](x + v(1 - s)) ds`` on the phase grid.

    This is the gain part of the Model-A Duhamel map for a density held
    constant in time; Gauss-Legendre in ``s``.
    """
    S = extended_signal(rho, v_grid.half_width)
    nodes, weights = roots_legendre(n_s)
    s = 0.5 * t * (nodes + 1.0)
    w = 0.5 * t * weights
    out = np.zeros((rho.grid.n, v_grid.n))
    for sk, wk in zip(s, w):
        out += wk * math.exp(-M * sk) * _duhamel_gain(rho, S, v_grid.nodes, sk)
    return out


def picard_contraction_test(rho_1: DensityProfile, rho_2: DensityProfile, T: float, M: float | None = None,
                            v_grid: VelocityGrid | None = None, n_t: int = 6, n_s: int = 24) -> ContractionReport:
    """Measured Lipschitz ratio of the Model-A Duhamel map ``rho -> int f dv`` on ``[0, T]``.

    Inputs are held constant in time, so their ``X_T`` distance is
    ``||rho_1 - rho_2||_1``.  The output distance is the sup over ``n_t``
    times of the L1 norm in ``x``; the free-streaming part of the map is
    shared by both inputs and cancels.
    """
    M = rho_1.mass() if M is None else float(M)
    if not T < math.log(2.0) / M:
        raise ValueError(f"T={T} must be below ln2/M={math.log(2.0) / M:.6g} for a contraction")
    if v_grid is None:
        v_grid = VelocityGrid(20.0, 257)
    grid = rho_1.grid
    distance = float(grid.integrate(np.abs(rho_1.values - rho_2.values)))
    bound = 2.0 * (1.0 - math.exp(-M * T))
    times = np.linspace(T / n_t, T, n_t)
    if distance == 0.0:
        return ContractionReport(0.0, bound, times, np.zeros(n_t), 0.0)
    diffs = []
    for t in times:
        g = (duhamel_gain_integral(rho_1, M, t, v_grid, n_s)
             - duhamel_gain_integral(rho_2, M, t, v_grid, n_s))
        diffs.append(float(grid.integrate(np.abs(v_grid.integrate(g, axis=1)))))
    diffs = np.array(diffs)
    return ContractionReport(float(diffs.max() / distance), bound, times, diffs, distance)


# --------------------------------------------------------------------------
# Increasing iteration for Model B.

@dataclass
class MonotoneReport:
    times: np.ndarray
    masses: np.ndarray          # (j_max + 1, n_t + 1): m_j(t_k)
    min_increment: np.ndarray   # min over (x, v, t) of f_{j+1} - f_j
    iterates: list[np.ndarray]  # each (n_t + 1, n_x, n_v)
    M: float


def _pull(values: np.ndarray, x: np.ndarray, v: np.ndarray, tau: float) -> np.ndarray:
    """``g(x - v tau, v)`` by linear interpolation, zero outside."""
    out = np.empty_like(values)
    for j, vj in enumerate(v):
        out[:, j] = np.interp(x - vj * tau, x, values[:, j], left=0.0, right=0.0)
    return out


def _exp_linear_weights(M: float, h: float) -> tuple[float, float]:
    """Weights ``(a, b)`` with ``int_0^h e^{-M(h - s)} (g0 (1 - s/h) + g1 s/h) ds = a g0 + b g1``."""
    z = M * h
    if z < 1e-6:
        return h * (0.5 - z / 3.0), h * (0.5 - z / 6.0)
    e = math.exp(-z)
    a = (1.0 - e - z * e) / (M * z)
    b = (z - 1.0 + e) / (M * z)
    return a, b


def monotone_iterate_B(f_I: PhaseField, t_end: float, j_max: int, n_t: int = 20) -> MonotoneReport:
    """Iterates ``f_0 = 0``, ``f_{j+1} = e^{-Mt} f_I(x - vt, v) + int_0^t e^{M(s-t)} G[f_j](x + v(s-t), v, s) ds``.

    Time integrals use exponential weights against the piecewise-linear
    interpolant in ``s``, and shifts use linear interpolation; both are
    positive linear operations, so monotonicity survives discretization.
    """
    M = mass(f_I)
    x, v = f_I.x_grid.nodes, f_I.v_grid.nodes
    times = np.linspace(0.0, t_end, n_t + 1)
    h = times[1] - times[0] if n_t else 0.0
    a, b = _exp_linear_weights(M, h) if n_t else (0.0, 0.0)
    free = np.array([math.exp(-M * t) * _pull(f_I.values, x, v, t) for t in times])
    current = np.zeros((n_t + 1,) + f_I.values.shape)
    iterates = [current]
    for _ in range(j_max):
        G = np.array([gain_B(f_I.with_values(current[k]), conservative=False) for k in range(n_t + 1)])
        nxt = free.copy()
        for k in range(1, n_t + 1):
            acc = np.zeros_like(f_I.values)
            for l in range(k):
                # interval [t_l, t_{l+1}] seen from t_k, damped by e^{-M(t_k - t_{l+1})}
                damp = math.exp(-M * (times[k] - times[l + 1]))
                acc += damp * (a * _pull(G[l], x, v, times[k] - times[l])
                               + b * _pull(G[l + 1], x, v, times[k] - times[l + 1]))
            nxt[k] += acc
        iterates.append(nxt)
        current = nxt
    masses = np.array([[f_I.x_grid.integrate(f_I.v_grid.integrate(it[k], axis=1)) for k in range(n_t + 1)]
                       for it in iterates])
    incr = np.array([float(np.min(iterates[j + 1] - iterates[j])) for j in range(j_max)])
    return MonotoneReport(times, masses, incr, iterates, M)
