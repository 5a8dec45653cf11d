"""Aggregated steady states of Model A for supercritical mass.

Two independent solvers: a fixed-point iteration on the density through the
mild (characteristics) form in physical space, and a damped fixed-point
iteration on the Fourier transform of the density.  Both are checked
against each other and against the moment identities any steady state must
satisfy.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.special import roots_legendre

from .core import DensityProfile, PhaseField, SpatialGrid, VelocityGrid, mass
from .moments import CriticalMassNotExceeded, MomentTable, compute_moments
from .signal import extended_signal

log = logging.getLogger(__name__)

DEFAULT_NODES = 64


class StationaryNotConverged(RuntimeError):
    def __init__(self, message: str, result: "StationaryResult | None" = None):
        super().__init__(message)
        self.result = result


def _require_supercritical(M: float) -> None:
    if not M > 2:
        raise CriticalMassNotExceeded(f"steady states are constructed for M > 2, got M={M}")


def _u_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on (0, 1)."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _even_interp(values: np.ndarray, grid: SpatialGrid, points: np.ndarray) -> np.ndarray:
    """Linear interpolation of an even profile at ``|points|``, zero outside."""
    c = grid.center
    return np.interp(np.abs(points), grid.nodes[c:], values[c:], right=0.0)


REFINE = 8


def _refined(nodes: np.ndarray, values: np.ndarray, method: str, even: bool) -> tuple[np.ndarray, np.ndarray]:
    """Sample table for interpolation.

    ``"cubic"`` tabulates a cubic spline on a grid ``REFINE`` times finer, so
    that linear interpolation in the table carries the spline's accuracy.
    """
    if method == "linear":
        return nodes, values
    if method != "cubic":
        raise ValueError(f"unknown interpolation {method!r}")
    bc = ((1, 0.0), "not-a-knot") if even else "not-a-knot"
    spline = CubicSpline(nodes, values, bc_type=bc)
    fine = np.linspace(nodes[0], nodes[-1], REFINE * (nodes.size - 1) + 1)
    return fine, spline(fine)


def _even_sampler(half_nodes: np.ndarray, half_values: np.ndarray, method: str):
    """Evaluate an even profile, known on ``x >= 0``, at ``|p|``; zero beyond the last node."""
    n, v = _refined(half_nodes, half_values, method, even=True)
    return lambda p: np.interp(np.abs(p), n, v, right=0.0)


def _general_sampler(nodes: np.ndarray, values: np.ndarray, method: str):
    n, v = _refined(nodes, values, method, even=False)
    return lambda p: np.interp(p, n, v, left=0.0, right=0.0)


def mild_apply(rho: DensityProfile, M: float, v_grid: VelocityGrid, n_nodes: int = DEFAULT_NODES,
               even: bool | None = None, interp: str = "linear") -> PhaseField:
    """``f(x, v) = int_0^inf rho(x - s v) S[rho](x + v(1 - s)) e^{-M s} ds``.

    With ``u = e^{-M s}`` the integral becomes ``(1/M) int_0^1 ... du`` and is
    evaluated by Gauss-Legendre.  ``rho`` and ``S`` are interpolated
    (``interp`` is ``"linear"`` or ``"cubic"``) and vanish outside their
    grids.  For an even ``rho`` only the half-line data are used, so the
    result is exactly even on the symmetric grid.
    """
    grid = rho.grid
    if even is None:
        even = bool(np.array_equal(rho.values, rho.values[::-1]))
    S = extended_signal(rho, v_grid.half_width)
    if even:
        c, cs = grid.center, (S.values.size - 1) // 2
        sample_rho = _even_sampler(grid.nodes[c:], rho.values[c:], interp)
        sample_S = _even_sampler(S.nodes[cs:], S.values[cs:], interp)
    else:
        sample_rho = _general_sampler(grid.nodes, rho.values, interp)
        sample_S = _general_sampler(S.nodes, S.values, interp)
    u, wu = _u_rule(n_nodes)
    s = -np.log(u) / M
    x = grid.nodes[:, None]
    v = v_grid.nodes[None, :]
    out = np.zeros((grid.n, v_grid.n))
    for sk, wk in zip(s, wu):
        out += wk * (sample_rho(x - sk * v) * sample_S(x + (1.0 - sk) * v))
    return PhaseField(grid, v_grid, out / M)


def exponential_initial(grid: SpatialGrid, M: float) -> DensityProfile:
    """``rho(x) = (M/2) e^{-|x|}``, renormalized on the grid."""
    values = 0.5 * M * np.exp(-np.abs(grid.nodes))
    return DensityProfile(grid, values * M / float(grid.integrate(values)))


def gaussian_initial(grid: SpatialGrid, M: float, width: float | None = None) -> DensityProfile:
    """Gaussian of mass ``M``; the default width matches the steady spatial variance ``2/(M-2)``."""
    if width is None:
        width = math.sqrt(2.0 / (M - 2.0))
    values = np.exp(-0.5 * (grid.nodes / width) ** 2)
    return DensityProfile(grid, values * M / float(grid.integrate(values)))


@dataclass
class StationaryResult:
    rho: DensityProfile
    f: PhaseField
    M: float
    iterations: int
    update_norm: float
    converged: bool
    residual_l1: float
    mass_defects: list[float] = field(default_factory=list)
    max_speed_weighted: float = 0.0
    moments: MomentTable | None = None
    history: list[float] = field(default_factory=list)

    @property
    def second_moments(self) -> tuple[float, float, float]:
        return self.moments.second_order()

    def weighted_mass(self) -> float:
        """``int int (1 + x^2 + v^2) f``."""
        X = self.f.x_grid.nodes[:, None]
        V = self.f.v_grid.nodes[None, :]
        return mass(self.f.with_values((1.0 + X ** 2 + V ** 2) * self.f.values))


def x_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Derivative along axis 0, fourth order away from the ends."""
    d = np.gradient(values, h, axis=0, edge_order=2)
    if values.shape[0] >= 5:
        d[2:-2] = (values[:-4] - 8.0 * values[1:-3] + 8.0 * values[3:-1] - values[4:]) / (12.0 * h)
    return d


def strong_residual(f: PhaseField, rho: DensityProfile | None = None, interp: str = "linear") -> PhaseField:
    """``v df/dx - rho S[rho](x + v) + M f`` with finite differences in x.

    ``df/dx`` uses the fourth-order central stencil in the interior and
    second-order stencils on the two outer nodes at each end.  ``rho``
    defaults to the velocity integral of ``f``; ``S(x + v)`` is sampled with
    ``interp`` as in :func:`mild_apply`.
    """
    if rho is None:
        rho = f.density()
    M = mass(f)
    S = extended_signal(rho, f.v_grid.half_width)
    x = f.x_grid.nodes[:, None]
    v = f.v_grid.nodes[None, :]
    dfdx = x_derivative(f.values, f.x_grid.spacing)
    sample_S = _general_sampler(S.nodes, S.values, interp)
    res = v * dfdx - rho.values[:, None] * sample_S(x + v) + M * f.values
    return f.with_values(res)


def _symmetrize(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + values[::-1])


class _Anderson:
    """Type-II Anderson mixing of a fixed-point map ``x -> g(x)``."""

    def __init__(self, depth: int):
        self.depth = depth
        self.x: list[np.ndarray] = []
        self.g: list[np.ndarray] = []

    def mix(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        self.x.append(x.copy())
        self.g.append(g.copy())
        if len(self.x) > self.depth + 1:
            self.x.pop(0)
            self.g.pop(0)
        if len(self.x) < 2:
            return g
        R = np.array([gi - xi for gi, xi in zip(self.g, self.x)])
        dR = np.diff(R, axis=0).T
        dG = np.diff(np.array(self.g), axis=0).T
        gamma, *_ = np.linalg.lstsq(dR, R[-1], rcond=None)
        return g - dG @ gamma


def solve_stationary(M: float, x_grid: SpatialGrid, v_grid: VelocityGrid, tol: float | None = None,
                     max_iter: int = 500, init: DensityProfile | str = "exponential",
                     n_nodes: int = DEFAULT_NODES, raise_on_failure: bool = False,
                     interp: str = "linear", anderson: int = 0) -> StationaryResult:
    """Fixed point of ``rho -> int mild_apply(rho) dv``.

    Each sweep is symmetrized (removing the translation mode) and rescaled to
    mass ``M``: the map is quadratic in ``rho``, so the mass direction is
    unstable and must be pinned.  The relative mass defect before
    rescaling is recorded per sweep as a check of the mild-form mass
    identity.  Stops when the L1 norm of ``G(rho) - rho`` falls below
    ``tol`` (default ``1e-9 M``), ``G`` being one sweep.

    The plain iteration contracts at a rate close to ``1 - c/M``, so large
    masses take thousands of sweeps.  ``anderson > 0`` mixes the last
    ``anderson`` sweeps (Anderson acceleration); mixed iterates are clipped
    at zero and renormalized, and the stopping test is unchanged.
    """
    _require_supercritical(M)
    tol = 1e-9 * M if tol is None else tol
    if isinstance(init, DensityProfile):
        rho = init
    elif init == "exponential":
        rho = exponential_initial(x_grid, M)
    elif init == "gaussian":
        rho = gaussian_initial(x_grid, M)
    else:
        raise ValueError(f"unknown initializer {init!r}")
    rho = DensityProfile(x_grid, _symmetrize(rho.values) * M / rho.mass())
    defects, history = [], []
    update = math.inf
    k = 0
    mixer = _Anderson(anderson) if anderson > 0 else None
    for k in range(1, max_iter + 1):
        f = mild_apply(rho, M, v_grid, n_nodes, even=True, interp=interp)
        new = _symmetrize(f.density().values)
        m_new = float(x_grid.integrate(new))
        defects.append(m_new / M - 1.0)
        new *= M / m_new
        update = float(x_grid.integrate(np.abs(new - rho.values)))
        history.append(update)
        if not np.isfinite(update):
            break
        if update < tol:
            rho = DensityProfile(x_grid, new)
            break
        if mixer is not None:
            new = _symmetrize(np.maximum(mixer.mix(rho.values, new), 0.0))
            new *= M / float(x_grid.integrate(new))
        rho = DensityProfile(x_grid, new)
    converged = bool(update < tol)
    f = mild_apply(rho, M, v_grid, n_nodes, even=True, interp=interp)
    res = strong_residual(f, rho, interp)
    V = v_grid.nodes[None, :]
    result = StationaryResult(
        rho=rho, f=f, M=M, iterations=k, update_norm=update, converged=converged,
        residual_l1=mass(res.with_values(np.abs(res.values))),
        mass_defects=defects, max_speed_weighted=float(np.max(np.abs(V) * f.values)),
        moments=compute_moments(f, 4), history=history,
    )
    if not converged:
        log.warning("stationary iteration stopped after %d sweeps, update %.3e > %.3e", k, update, tol)
        if raise_on_failure:
            raise StationaryNotConverged(f"no convergence after {k} sweeps (update {update:.3e})", result)
    return result


# --------------------------------------------------------------------------
# Fourier side.

@dataclass
class SpectralProfile:
    """Transform ``rho_hat(xi) = int rho(x) e^{-i xi x} dx`` of an even density."""

    xi: np.ndarray
    values: np.ndarray

    def interpolant(self):
        """Cubic spline in ``|xi|``, zero beyond the grid."""
        c = (self.xi.size - 1) // 2
        spline = CubicSpline(self.xi[c:], self.values[c:], bc_type=((1, 0.0), "not-a-knot"))
        xmax = self.xi[-1]

        def evaluate(q):
            q = np.abs(np.asarray(q, dtype=float))
            return np.where(q <= xmax, spline(np.minimum(q, xmax)), 0.0)
        return evaluate

    @property
    def mass(self) -> float:
        return float(self.values[(self.xi.size - 1) // 2])


def spectral_grid(xi_max: float, n_xi: int) -> np.ndarray:
    if n_xi % 2 == 0 or n_xi < 5:
        raise ValueError("n_xi must be odd and >= 5")
    c = (n_xi - 1) // 2
    return (np.arange(n_xi) - c) * (xi_max / c)


def fourier_rhs(rho_hat: SpectralProfile, M: float, xi, n_nodes: int = DEFAULT_NODES) -> np.ndarray:
    """``int_0^inf e^{-M s} rho_hat(xi (1 - s)) rho_hat(xi s) / (1 + xi^2 s^2) ds``.

    Transform of the density of :func:`mild_apply` under
    ``x = (1 - s) y + s z``, ``v = z - y`` (unit Jacobian), with ``y`` the
    density argument and ``z`` the signal argument.  Uses evenness of
    ``rho_hat``; same ``u = e^{-M s}`` substitution as :func:`mild_apply`.
    """
    xi = np.asarray(xi, dtype=float)
    g = rho_hat.interpolant()
    u, wu = _u_rule(n_nodes)
    s = -np.log(u) / M
    out = np.zeros_like(xi)
    for sk, wk in zip(s, wu):
        q = xi * sk
        out += wk * g(xi * (1.0 - sk)) * g(q) / (1.0 + q * q)
    return out / M


def transform_density(rho: DensityProfile, xi: np.ndarray) -> np.ndarray:
    """Exact transform of the piecewise-linear interpolant of an even ``rho``."""
    x = rho.grid.nodes
    h = rho.grid.spacing
    # hat functions: FT of a unit hat of half-width h is h sinc^2(xi h / 2)
    hat = h * np.sinc(xi * h / (2.0 * np.pi)) ** 2
    return (np.cos(np.outer(xi, x)) @ rho.values) * hat


def inverse_transform(rho_hat: SpectralProfile, x: np.ndarray) -> np.ndarray:
    """``(1/pi) int_0^xi_max rho_hat(xi) cos(xi x) d xi`` (Simpson)."""
    c = (rho_hat.xi.size - 1) // 2
    xi = rho_hat.xi[c:]
    vals = rho_hat.values[c:]
    return simpson(vals[None, :] * np.cos(np.outer(x, xi)), x=xi, axis=1) / math.pi


@dataclass
class SpectralResult:
    profile: SpectralProfile
    rho: DensityProfile
    iterations: int
    update_norm: float
    converged: bool
    max_abs: float
    min_density: float
    history: list[float] = field(default_factory=list)


def solve_stationary_spectral(M: float, xi_max: float = 40.0, n_xi: int = 801, tol: float | None = None,
                              x_grid: SpatialGrid | None = None, omega: float = 0.5, max_iter: int = 2000,
                              n_nodes: int = DEFAULT_NODES, raise_on_failure: bool = False) -> SpectralResult:
    """Damped fixed point ``rho_hat <- (1 - omega) rho_hat + omega * rhs(rho_hat)``, ``rho_hat(0) = M``.

    Starts from the transform of ``(M/2) e^{-|x|}``, ``M / (1 + xi^2)``.  The
    density is reconstructed on ``x_grid`` (default ``[-20, 20]``, 257 nodes).
    """
    _require_supercritical(M)
    tol = 1e-9 * M if tol is None else tol
    xi = spectral_grid(xi_max, n_xi)
    c = (n_xi - 1) // 2
    dxi = xi[1] - xi[0]
    hat = SpectralProfile(xi, M / (1.0 + xi ** 2))
    max_abs = float(np.max(np.abs(hat.values)))
    history = []
    update = math.inf
    k = 0
    for k in range(1, max_iter + 1):
        rhs = fourier_rhs(hat, M, xi, n_nodes)
        new = (1.0 - omega) * hat.values + omega * rhs
        new = 0.5 * (new + new[::-1])
        new[c] = M
        # L1 in xi of the update, scaled to be comparable with a density L1
        update = float(np.sum(np.abs(new - hat.values)) * dxi / (2.0 * math.pi))
        hat = SpectralProfile(xi, new)
        max_abs = max(max_abs, float(np.max(np.abs(new))))
        history.append(update)
        if update < tol or not np.isfinite(update):
            break
    converged = bool(update < tol)
    if x_grid is None:
        x_grid = SpatialGrid(20.0, 257)
    rho_vals = inverse_transform(hat, x_grid.nodes)
    if not converged:
        log.warning("spectral iteration stopped after %d sweeps, update %.3e > %.3e", k, update, tol)
        if raise_on_failure:
            raise StationaryNotConverged(f"no convergence after {k} sweeps (update {update:.3e})")
    return SpectralResult(hat, DensityProfile(x_grid, rho_vals), k, update, converged, max_abs,
                          float(np.min(rho_vals)), history)


# --------------------------------------------------------------------------
# Diagnostics.

@dataclass
class DecayReport:
    order: int
    constants: dict[int, float]
    band_radius: float
    f_hat_origin: float
    max_imag: float
    symmetry_error: float


def phase_transform(f: PhaseField):
    """``f_hat(xi, k)`` on the FFT frequency grid, origin shifted to the center.

    Returns ``(xi, k, f_hat)``; ``f_hat`` is complex.
    """
    dx, dv = f.x_grid.spacing, f.v_grid.spacing
    w = f.x_grid.weights[:, None] * f.v_grid.weights[None, :]
    g = np.fft.ifftshift(f.values * w / (dx * dv))
    F = np.fft.fftshift(np.fft.fft2(g)) * dx * dv
    xi = np.fft.fftshift(np.fft.fftfreq(f.x_grid.n, dx)) * 2 * math.pi
    k = np.fft.fftshift(np.fft.fftfreq(f.v_grid.n, dv)) * 2 * math.pi
    return xi, k, F


def regularity_diagnostic(result: StationaryResult | PhaseField, n_max: int = 8, floor: float = 1e-10,
                          band_fraction: float = 0.5) -> DecayReport:
    """Largest ``n`` for which ``|f_hat| (1 + xi^2 + k^2)^n`` stays bounded on the resolved band.

    The band is the disc of radius ``band_fraction`` times the Nyquist
    frequency intersected with ``|f_hat| > floor * |f_hat(0)|``.  "Bounded"
    means the weighted sup over the outer half of the band does not exceed
    the sup over the inner half.
    """
    f = result.f if isinstance(result, StationaryResult) else result
    xi, k, F = phase_transform(f)
    XI, K = np.meshgrid(xi, k, indexing="ij")
    r2 = XI ** 2 + K ** 2
    nyq = min(abs(xi).max(), abs(k).max())
    origin = F[f.x_grid.center, f.v_grid.center].real
    amp = np.abs(F)
    band = (np.sqrt(r2) <= band_fraction * nyq) & (amp > floor * abs(origin))
    radius = float(np.sqrt(r2[band].max()))
    inner = band & (np.sqrt(r2) <= 0.5 * radius)
    outer = band & ~inner
    order = -1
    constants = {}
    for n in range(n_max + 1):
        weighted = amp * (1.0 + r2) ** n
        constants[n] = float(weighted[band].max())
        if outer.any() and weighted[outer].max() > weighted[inner].max():
            break
        order = n
    sym = float(np.max(np.abs(F - F[::-1, ::-1])))
    return DecayReport(order, constants, radius, float(origin), float(np.max(np.abs(F.imag))), sym)


@dataclass
class LargeMassReport:
    M: float
    marginal_l1: float
    spatial_variance: float
    predicted_spatial_variance: float
    velocity_variance: float
    predicted_velocity_variance: float


def large_mass_comparison(result: StationaryResult) -> LargeMassReport:
    """Compare the steady state with its large-mass limit ``(1/2) e^{-|v|} delta(x)``."""
    f = result.f
    M = result.M
    g = f.x_grid.integrate(f.values, axis=0) / M
    target = 0.5 * np.exp(-np.abs(f.v_grid.nodes))
    l1 = float(f.v_grid.integrate(np.abs(g - target)))
    # tails beyond |v| = V of the target are counted as missed mass
    l1 += math.exp(-f.v_grid.half_width)
    A = result.moments if result.moments is not None else compute_moments(f, 2)
    return LargeMassReport(M, l1, A[2, 0] / M, 2.0 / (M - 2.0), A[0, 2] / M, 2.0 * M / (M - 2.0))
