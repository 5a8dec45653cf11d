"""Quasistationary chemoattractant ``S = (1/2) exp(-|x|) * rho`` and its moments."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .core import DensityProfile, SignalProfile


def _cell_weights(h: float) -> tuple[float, float, float]:
    """Decay and exact cell weights for exp(-(b - y)) against a linear hat.

    Returns ``(exp(-h), w_far, w_near)`` with
    ``int_a^b exp(-(b - y)) rho(y) dy = w_far * rho(a) + w_near * rho(b)``.
    """
    decay = math.exp(-h)
    one_minus = -math.expm1(-h)
    if h < 1e-4:
        w_far = h / 2.0 - h * h / 3.0 + h ** 3 / 8.0
    else:
        w_far = (one_minus - h * decay) / h
    return decay, w_far, one_minus - w_far


def _convolve_values(rho: np.ndarray, h: float) -> np.ndarray:
    decay, w_far, w_near = _cell_weights(h)
    inc_left = np.zeros_like(rho)
    inc_left[1:] = w_far * rho[:-1] + w_near * rho[1:]
    inc_right = np.zeros_like(rho)
    inc_right[:-1] = w_near * rho[:-1] + w_far * rho[1:]
    # P_i = decay * P_{i-1} + inc_i, and Q mirrored
    P = lfilter([1.0], [1.0, -decay], inc_left)
    Q = lfilter([1.0], [1.0, -decay], inc_right[::-1])[::-1]
    return 0.5 * (P + Q)


def convolve_signal(rho: DensityProfile) -> SignalProfile:
    """Signal on the density's own grid.

    Exact for the piecewise-linear interpolant of ``rho`` (zero outside the
    grid), evaluated in O(n) by two exponential accumulators.
    """
    values = _convolve_values(rho.values, rho.grid.spacing)
    return SignalProfile(rho.grid, np.maximum(values, 0.0))


@dataclass(frozen=True, eq=False)
class ExtendedSignal:
    """Signal sampled on the density grid padded by ``pad`` nodes per side.

    Kinetic operators need ``S`` at ``x + v`` well outside ``[-L, L]``; the
    padding carries that exponential tail instead of truncating it.
    """

    spacing: float
    pad: int
    values: np.ndarray

    @property
    def nodes(self) -> np.ndarray:
        c = (self.values.size - 1) // 2
        return (np.arange(self.values.size) - c) * self.spacing

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Linear interpolation of an even-or-not profile, zero beyond the padding."""
        nodes = self.nodes
        return np.interp(points, nodes, self.values, left=0.0, right=0.0)

    def even(self, points: np.ndarray) -> np.ndarray:
        """Interpolate at ``|points|``; bitwise-symmetric for an even signal."""
        c = (self.values.size - 1) // 2
        half = self.values[c:]
        return np.interp(np.abs(points), self.nodes[c:], half, right=0.0)


def extended_signal(rho: DensityProfile, reach: float) -> ExtendedSignal:
    """Signal of ``rho`` on its grid extended by at least ``reach`` on each side."""
    h = rho.grid.spacing
    pad = int(math.ceil(reach / h)) + 1
    padded = np.pad(rho.values, pad)
    return ExtendedSignal(h, pad, np.maximum(_convolve_values(padded, h), 0.0))


def direct_signal(rho: DensityProfile, points: np.ndarray | None = None) -> np.ndarray:
    """O(n^2) trapezoid evaluation of the convolution; used as a test oracle."""
    y = rho.grid.nodes
    x = y if points is None else np.asarray(points, dtype=float)
    kernel = 0.5 * np.exp(-np.abs(x[:, None] - y[None, :]))
    return kernel @ (rho.values * rho.grid.weights)


# --------------------------------------------------------------------------
# Moment identities.

@dataclass(frozen=True)
class SignalMomentVector:
    values: tuple[float, ...]

    @property
    def order(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, k: int) -> float:
        return self.values[k]


def signal_moments(R) -> SignalMomentVector:
    """Moments of ``S`` from those of ``rho``: ``S_k = R_k + k(k-1) S_{k-2}``."""
    R = [float(r) for r in R]
    S: list[float] = []
    for k, r in enumerate(R):
        S.append(r + (k * (k - 1) * S[k - 2] if k >= 2 else 0.0))
    return SignalMomentVector(tuple(S))


def cross_moment(n: int, N: int, S, R) -> float:
    """``int int x^(N-n) v^n S(x+v) rho(x) dx dv`` as a binomial sum of moments."""
    if not 0 <= n <= N:
        raise IndexError(f"need 0 <= n <= N, got n={n}, N={N}")
    S_vals = S.values if isinstance(S, SignalMomentVector) else tuple(S)
    if len(S_vals) <= n or len(R) <= N:
        raise IndexError(f"moment vectors too short for N={N}, n={n}")
    return math.fsum(math.comb(n, k) * (-1) ** (n - k) * S_vals[k] * R[N - k] for k in range(n + 1))


def profile_moments(profile: DensityProfile, order: int) -> np.ndarray:
    """``int x^k p(x) dx`` for ``k = 0..order`` by the trapezoid rule."""
    x = profile.grid.nodes
    w = profile.grid.weights * profile.values
    return np.array([np.sum(w * x ** k) for k in range(order + 1)])


def second_difference_residual(rho: DensityProfile, S: SignalProfile) -> np.ndarray:
    """``-S'' + S - rho`` at interior nodes by central differences."""
    h = rho.grid.spacing
    s = S.values
    return -(s[2:] - 2 * s[1:-1] + s[:-2]) / h ** 2 + s[1:-1] - rho.values[1:-1]
