"""Grids, fields, parameters and quadrature shared by every solver.

All fields live on uniform tensor grids with an odd number of nodes so that
``x = 0`` and ``v = 0`` are grid points and reflections are exact index
reversals.  Functions are treated as zero outside ``[-L, L] x [-V, V]``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_HALF_WIDTH = 20.0
DEFAULT_POINTS = 257


class GridError(ValueError):
    pass


class ModelKind(enum.Enum):
    """Turning kernel: A samples ``S(x + v')``, B samples ``S(x + v' - v)``."""

    A = "A"
    B = "B"

    @classmethod
    def parse(cls, value: "str | ModelKind") -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown model {value!r}; expected 'A' or 'B'") from None


@dataclass(frozen=True)
class UniformGrid:
    half_width: float
    n: int

    def __post_init__(self):
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise GridError(f"half_width must be positive and finite, got {self.half_width}")
        if int(self.n) != self.n or self.n < 4:
            raise GridError(f"point count must be an integer >= 4, got {self.n}")
        if self.n % 2 == 0:
            raise GridError(f"point count must be odd so that 0 is a node, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        # (i - c) * h is exactly antisymmetric in floating point
        c = (self.n - 1) // 2
        return (np.arange(self.n) - c) * self.spacing

    @property
    def center(self) -> int:
        return (self.n - 1) // 2

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights."""
        w = np.full(self.n, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    def integrate(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        return np.tensordot(values, self.weights, axes=([axis], [0]))


class SpatialGrid(UniformGrid):
    pass


class VelocityGrid(UniformGrid):
    pass


def make_grids(L: float = DEFAULT_HALF_WIDTH, n_x: int = DEFAULT_POINTS,
               V: float = DEFAULT_HALF_WIDTH, n_v: int = DEFAULT_POINTS) -> tuple[SpatialGrid, VelocityGrid]:
    return SpatialGrid(L, n_x), VelocityGrid(V, n_v)


def _check_values(values, shape, name):
    arr = np.asarray(values, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class DensityProfile:
    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.values, (self.grid.n,), "density"))

    def mass(self) -> float:
        return float(self.grid.integrate(self.values))

    def reflect(self) -> "DensityProfile":
        return DensityProfile(self.grid, self.values[::-1].copy())


@dataclass(frozen=True, eq=False)
class SignalProfile(DensityProfile):
    pass


@dataclass(frozen=True, eq=False)
class PhaseField:
    """Cell density ``f(x_i, v_j)`` stored as an ``(n_x, n_v)`` array."""

    x_grid: SpatialGrid
    v_grid: VelocityGrid
    values: np.ndarray

    def __post_init__(self):
        shape = (self.x_grid.n, self.v_grid.n)
        object.__setattr__(self, "values", _check_values(self.values, shape, "phase field"))

    @classmethod
    def zeros(cls, x_grid: SpatialGrid, v_grid: VelocityGrid) -> "PhaseField":
        return cls(x_grid, v_grid, np.zeros((x_grid.n, v_grid.n)))

    @classmethod
    def from_function(cls, x_grid, v_grid, func) -> "PhaseField":
        X, Vv = np.meshgrid(x_grid.nodes, v_grid.nodes, indexing="ij")
        return cls(x_grid, v_grid, func(X, Vv))

    def with_values(self, values: np.ndarray) -> "PhaseField":
        return PhaseField(self.x_grid, self.v_grid, values)

    def density(self) -> DensityProfile:
        return DensityProfile(self.x_grid, self.v_grid.integrate(self.values, axis=1))

    def mass(self) -> float:
        return mass(self)

    def reflect(self) -> "PhaseField":
        """``(x, v) -> (-x, -v)``."""
        return self.with_values(self.values[::-1, ::-1].copy())


def mass(obj) -> float:
    """Trapezoid-rule total mass of a :class:`PhaseField` or profile."""
    if isinstance(obj, PhaseField):
        return float(obj.x_grid.integrate(obj.v_grid.integrate(obj.values, axis=1)))
    if isinstance(obj, DensityProfile):
        return obj.mass()
    raise TypeError(f"cannot take the mass of {type(obj).__name__}")


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional coefficients of the kinetic/elliptic system."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    kappa: float = 1.0
    D: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "kappa", "D"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class Scaling:
    """Multipliers taking dimensional variables to the parameter-free form.

    A dimensional quantity ``q`` maps to ``q * <multiplier>``; :meth:`inverse`
    gives the multipliers of the reverse map.
    """

    t: float
    v: float
    x: float
    f: float
    S: float

    def inverse(self) -> "Scaling":
        return Scaling(1.0 / self.t, 1.0 / self.v, 1.0 / self.x, 1.0 / self.f, 1.0 / self.S)

    def as_dict(self) -> dict[str, float]:
        return {"t": self.t, "v": self.v, "x": self.x, "f": self.f, "S": self.S}


def rescale(params: PhysicalParams) -> Scaling:
    k = math.sqrt(params.gamma / params.D)
    return Scaling(
        t=params.alpha,
        v=1.0 / (params.alpha * k),
        x=1.0 / k,
        f=params.alpha * params.gamma ** 2 / (params.kappa * params.beta * params.D),
        S=k / params.kappa,
    )


# --------------------------------------------------------------------------
# Conservative, positivity-preserving shifts along x.

def _pfc_fractional_shift(f: np.ndarray, alpha: np.ndarray, periodic: bool) -> np.ndarray:
    """Shift each row of ``f`` right by ``alpha`` cells, ``0 <= alpha < 1``.

    Flux-form third-order reconstruction with slope limiters keeping cell
    values nonnegative.  Beyond the ends values are zero unless ``periodic``.
    """
    a = alpha[:, None]
    if periodic:
        padded = np.concatenate([f[:, -1:], f, f[:, :1]], axis=1)
    else:
        padded = np.pad(f, ((0, 0), (1, 1)))
    fm, f0, fp = padded[:, :-2], padded[:, 1:-1], padded[:, 2:]
    dp = fp - f0
    dm = f0 - fm
    with np.errstate(divide="ignore", invalid="ignore"):
        eps_p = np.where(dp > 0, np.minimum(1.0, 2.0 * f0 / dp), 1.0)
        eps_m = np.where(dm < 0, np.minimum(1.0, -2.0 * f0 / dm), 1.0)
    eps_p = np.where(np.isfinite(eps_p), eps_p, 0.0)
    eps_m = np.where(np.isfinite(eps_m), eps_m, 0.0)
    # flux through the right interface of each cell
    flux = a * (f0 + eps_p / 6.0 * (1.0 - a) * (2.0 - a) * dp
                + eps_m / 6.0 * (1.0 - a) * (1.0 + a) * dm)
    if periodic:
        flux_in = np.roll(flux, 1, axis=1)
    else:
        flux_in = np.pad(flux, ((0, 0), (1, 0)))[:, :-1]
    return f0 - flux + flux_in


def _integer_shift(f: np.ndarray, k: np.ndarray, periodic: bool) -> np.ndarray:
    """Shift row ``r`` right by ``k[r] >= 0`` cells."""
    n = f.shape[1]
    kmax = int(k.max(initial=0))
    if kmax == 0:
        return f
    if periodic:
        idx = (np.arange(n)[None, :] - k[:, None]) % n
        return np.take_along_axis(f, idx, axis=1)
    padded = np.pad(f, ((0, 0), (kmax, 0)))
    idx = np.arange(n)[None, :] - k[:, None] + kmax
    return np.take_along_axis(padded, idx, axis=1)


def shift_rows(f: np.ndarray, shift: np.ndarray, h: float, periodic: bool = False) -> np.ndarray:
    """Translate row ``r`` of ``f`` (sampled with spacing ``h``) by ``shift[r]``.

    Mass is conserved exactly up to outflow through the ends (none when
    ``periodic``), and nonnegative input stays nonnegative.  Negative shifts
    are handled by mirroring, so the result is exactly reflection-equivariant.
    """
    f = np.asarray(f, dtype=float)
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (f.shape[0],))
    out = np.empty_like(f)
    for sign in (1.0, -1.0):
        rows = np.nonzero(shift > 0)[0] if sign > 0 else np.nonzero(shift <= 0)[0]
        if rows.size == 0:
            continue
        block = f[rows] if sign > 0 else f[rows, ::-1]
        cells = np.abs(shift[rows]) / h
        k = np.floor(cells)
        alpha = cells - k
        moved = _integer_shift(_pfc_fractional_shift(block, alpha, periodic), k.astype(np.int64), periodic)
        out[rows] = moved if sign > 0 else moved[:, ::-1]
    return out


def shift_reflecting(f: np.ndarray, velocities: np.ndarray, tau: float, h: float) -> np.ndarray:
    """Free streaming of ``f[x, v]`` for time ``tau`` between specular walls at ``x = +-L``.

    Rows ``v`` and ``-v`` are unfolded into one periodic strip of period
    ``2(n_x - 1)``: row ``v`` on all nodes, then row ``-v`` backwards over the
    interior nodes.  The wall nodes are shared by both rows: each wall pair
    ``f(+-L, v)``, ``f(+-L, -v)`` is first replaced by its mean (the specular
    condition), which leaves the trapezoid mass unchanged and makes it
    exactly invariant under the shift.  Requires a velocity grid symmetric
    about 0.
    """
    n_x, n_v = f.shape
    c = (n_v - 1) // 2
    pos = np.arange(c, n_v)
    neg = 2 * c - pos
    top = f[:, pos].copy()
    top[[0, -1]] = 0.5 * (f[[0, -1]][:, pos] + f[[0, -1]][:, neg])
    strip = np.concatenate([top.T, f[-2:0:-1, neg].T], axis=1)
    moved = shift_rows(strip, velocities[pos] * tau, h, periodic=True)
    out = np.empty_like(f)
    out[:, pos] = moved[:, :n_x].T
    back = np.concatenate([moved[:, :1], moved[:, n_x:][:, ::-1], moved[:, n_x - 1:n_x]], axis=1)
    # the v = 0 row is its own partner
    out[:, neg[1:]] = back[1:].T
    return out


def center_frame(f_I: PhaseField, M: float | None = None) -> tuple[PhaseField, float, float]:
    """Translate ``f_I`` in x so the first x-moment tends to 0.

    The first moments obey ``A10' = A01``, ``A01' = -M A01``, so ``A10`` tends
    to ``A10(0) + A01(0)/M``; the translation that cancels this limit is that
    value divided by ``M``.  Returns the shifted field, the translation
    distance and the residual ``A01(0)``, which no translation can remove.
    """
    total = mass(f_I) if M is None else float(M)
    if total <= 0:
        raise ValueError("center_frame needs positive mass")
    X = f_I.x_grid.nodes[:, None]
    Vv = f_I.v_grid.nodes[None, :]
    w = f_I.x_grid.weights[:, None] * f_I.v_grid.weights[None, :]
    a10 = float(np.sum(w * X * f_I.values))
    a01 = float(np.sum(w * Vv * f_I.values))
    shift = (a10 + a01 / total) / total
    if abs(shift) <= 1e-12 * f_I.x_grid.spacing:
        return f_I, 0.0, a01
    # rows of the transposed array are fixed-v slices along x
    moved = shift_rows(f_I.values.T, np.full(f_I.v_grid.n, -shift), f_I.x_grid.spacing).T
    return f_I.with_values(np.ascontiguousarray(moved)), shift, a01
