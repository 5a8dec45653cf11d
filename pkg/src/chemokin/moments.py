"""Moment hierarchy of the kinetic model and its critical-mass analysis.

Model A closes order by order: the gain term only involves products of
density moments and signal moments, and the latter follow from the former by
a two-term recursion.  The order-N block is linear with a constant matrix
``C_N`` plus an inhomogeneity built from lower orders.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect

from .core import PhaseField
from .signal import signal_moments

DIVERGENCE_GUARD = 1e12
STABILITY_TOL = 1e-9
RH_MAX_ORDER = 10


class CriticalMassNotExceeded(ValueError):
    """Raised when a construction needs ``M > 2``."""


def index_pairs(N: int) -> list[tuple[int, int]]:
    """All ``(m, n)`` with ``m + n <= N``, by total order then ``n``."""
    return [(k - n, n) for k in range(N + 1) for n in range(k + 1)]


@dataclass(frozen=True, eq=False)
class MomentTable:
    """``A[m, n] = int int x^m v^n f``; entries with ``m + n > N`` are unused."""

    order: int
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != (self.order + 1, self.order + 1):
            raise ValueError(f"moment array shape {arr.shape} does not match order {self.order}")
        object.__setattr__(self, "values", arr)

    def __getitem__(self, mn: tuple[int, int]) -> float:
        m, n = mn
        if m < 0 or n < 0 or m + n > self.order:
            raise KeyError(mn)
        return float(self.values[m, n])

    @property
    def mass(self) -> float:
        return float(self.values[0, 0])

    @classmethod
    def from_dict(cls, order: int, entries: dict[tuple[int, int], float]) -> "MomentTable":
        values = np.zeros((order + 1, order + 1))
        for (m, n), a in entries.items():
            if m + n > order:
                raise KeyError((m, n))
            values[m, n] = a
        return cls(order, values)

    def to_vector(self) -> np.ndarray:
        return np.array([self.values[m, n] for m, n in index_pairs(self.order)])

    @classmethod
    def from_vector(cls, order: int, vec) -> "MomentTable":
        values = np.zeros((order + 1, order + 1))
        for (m, n), a in zip(index_pairs(order), vec):
            values[m, n] = a
        return cls(order, values)

    def truncate(self, order: int) -> "MomentTable":
        return MomentTable(order, self.values[: order + 1, : order + 1] * _triangle(order))

    def second_order(self) -> tuple[float, float, float]:
        return self[2, 0], self[1, 1], self[0, 2]


def _triangle(N):
    m, n = np.indices((N + 1, N + 1))
    return (m + n <= N).astype(float)


def compute_moments(f: PhaseField, N: int) -> MomentTable:
    """Trapezoid moments of a phase-space field up to total order ``N``."""
    if N < 0:
        raise ValueError("moment order must be >= 0")
    wx = f.x_grid.weights * 1.0
    wv = f.v_grid.weights * 1.0
    x = f.x_grid.nodes
    v = f.v_grid.nodes
    # X[m, i] = w_i x_i^m
    X = np.array([wx * x ** m for m in range(N + 1)])
    Vm = np.array([wv * v ** n for n in range(N + 1)])
    values = X @ f.values @ Vm.T
    return MomentTable(N, values * _triangle(N))


def moment_rhs_A(table: MomentTable) -> MomentTable:
    """Time derivative of every moment under Model A.

    ``dA[m,n]/dt = m A[m-1,n+1] + sum_k C(n,k) (-1)^(n-k) S_k R_(m+n-k) - M A[m,n]``
    with ``R_j = A[j,0]``, ``S`` from :func:`signal_moments` and ``M = A[0,0]``.
    """
    N = table.order
    A = table.values
    M = A[0, 0]
    R = [A[j, 0] for j in range(N + 1)]
    S = signal_moments(R).values
    out = np.zeros_like(A)
    for m, n in index_pairs(N):
        transport = m * A[m - 1, n + 1] if m >= 1 else 0.0
        gain = math.fsum(math.comb(n, k) * (-1) ** (n - k) * S[k] * R[m + n - k] for k in range(n + 1))
        out[m, n] = transport + gain - M * A[m, n]
    return MomentTable(N, out)


@dataclass
class CascadeResult:
    order: int
    mass: float
    times: np.ndarray
    tables: list[MomentTable]
    diverged: bool
    message: str = ""

    def series(self, m: int, n: int) -> np.ndarray:
        return np.array([t[m, n] for t in self.tables])

    @property
    def final(self) -> MomentTable:
        return self.tables[-1]


def integrate_cascade(initial: MomentTable, M: float | None = None, t_end: float = 10.0,
                      tol: float = 1e-10, t_eval=None, method: str = "DOP853") -> CascadeResult:
    """Integrate the full Model-A moment system, all orders jointly.

    Divergence (any moment beyond ``DIVERGENCE_GUARD``) stops the run and is
    reported through ``diverged``; it is an outcome, not an error.
    """
    N = initial.order
    mass = initial.mass if M is None else float(M)
    if not math.isclose(initial.mass, mass, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"initial A[0,0]={initial.mass} inconsistent with M={mass}")

    def rhs(_t, y):
        return moment_rhs_A(MomentTable.from_vector(N, y)).to_vector()

    def blow_up(_t, y):
        return DIVERGENCE_GUARD - np.max(np.abs(y))
    blow_up.terminal = True

    sol = solve_ivp(rhs, (0.0, t_end), initial.to_vector(), method=method, rtol=tol, atol=tol,
                    t_eval=t_eval, events=blow_up, dense_output=False)
    if sol.status == -1:
        raise RuntimeError(f"moment integration failed: {sol.message}")
    diverged = sol.status == 1
    tables = [MomentTable.from_vector(N, sol.y[:, k]) for k in range(sol.t.size)]
    if diverged and (t_eval is None or sol.t.size == 0 or sol.t[-1] < sol.t_events[0][0]):
        tables.append(MomentTable.from_vector(N, sol.y_events[0][0]))
        times = np.append(sol.t, sol.t_events[0][0])
    else:
        times = sol.t
    return CascadeResult(N, mass, times, tables, diverged, sol.message)


def second_order_steady_state(M: float) -> tuple[float, float, float]:
    if not M > 2:
        raise CriticalMassNotExceeded(f"second moments only equilibrate for M > 2, got M={M}")
    return 2 * M / (M - 2), 0.0, 2 * M * M / (M - 2)


def steady_state_table(M: float, N: int = 2) -> MomentTable:
    """Centered equilibrium moments up to order ``N`` (orders > 2 by solving each block)."""
    second_order_steady_state(M)
    A = np.zeros((N + 1, N + 1))
    A[0, 0] = M
    for order in range(2, N + 1):
        # rhs is affine in the order-`order` block: solve rhs = 0 for it
        pairs = [(order - n, n) for n in range(order + 1)]
        base = moment_rhs_A(MomentTable(N, A * _triangle(N))).values
        b = np.array([base[m, n] for m, n in pairs])
        C = build_matrix(order, M).matrix
        sol = np.linalg.solve(C, -b)
        for (m, n), a in zip(pairs, sol):
            A[m, n] = a
    return MomentTable(N, A)


# --------------------------------------------------------------------------
# Linear part of the order-N block.

@dataclass(frozen=True, eq=False)
class MomentSystem:
    """``d/dt (A[N,0], A[N-1,1], ..., A[0,N]) = matrix @ (...) + lower-order terms``.

    ``coupling`` lists, per row, the ``(k, N-k)`` signal/density moment products
    that form the inhomogeneity, with their binomial coefficients.
    """

    order: int
    mass: float
    matrix: np.ndarray
    coupling: tuple[tuple[tuple[int, int, int], ...], ...] = field(default=())

    def inhomogeneity(self, lower: MomentTable) -> np.ndarray:
        """Lower-order forcing, given all moments of order below ``N``."""
        N = self.order
        A = np.zeros((N + 1, N + 1))
        A[:N, :N] = lower.values[:N, :N] * _triangle(N - 1)
        rhs = moment_rhs_A(MomentTable(N, A)).values
        return np.array([rhs[N - n, n] for n in range(N + 1)])


def build_matrix(N: int, M: float) -> MomentSystem:
    if N < 1:
        raise ValueError("order must be >= 1")
    C = np.zeros((N + 1, N + 1))
    for n in range(N + 1):
        C[n, n] = -M
        if n < N:
            C[n, n + 1] = N - n
        C[n, 0] += ((-1) ** n + (1 if n == N else 0)) * M
    coupling = tuple(
        tuple((math.comb(n, k) * (-1) ** (n - k), k, N - k) for k in range(n + 1) if 0 < k < N)
        for n in range(N + 1)
    )
    return MomentSystem(N, float(M), C, coupling)


def char_poly_pN(N: int, M: float, lam):
    """Closed form of ``det(C_N - lam I)``; works for scalars, arrays and complex."""
    lam = np.asarray(lam)
    z = -M - lam
    total = -lam * z ** N + (-1) ** N * M * math.factorial(N)
    term = np.ones_like(z)
    acc = np.zeros_like(z)
    for n in range(N):
        acc = acc + term
        term = term * z / (n + 1)
    return total + M * math.factorial(N) * acc


def char_poly_coefficients(N: int, M: float) -> np.ndarray:
    """Coefficients of ``p_N`` in increasing powers of ``lam``."""
    P = np.polynomial.Polynomial
    z = P([-M, -1.0])
    total = -P([0.0, 1.0]) * z ** N + (-1) ** N * M * math.factorial(N)
    for n in range(N):
        total = total + M * math.factorial(N) / math.factorial(n) * z ** n
    return total.coef


def qN(N: int, M: float) -> float:
    """``q_N(M) = 1 + sum_{n<N} (-1)^(N-n) M^n / n!``."""
    if N < 1:
        raise ValueError("q_N needs N >= 1")
    return 1.0 + math.fsum((-1) ** (N - n) * M ** n / math.factorial(n) for n in range(N))


def rN_roots(N: int) -> np.ndarray:
    """Roots of ``r_N(mu) = (-1)^N + sum_{n<=N} mu^n / n!``."""
    coef = [1.0 / math.factorial(n) for n in range(N + 1)]
    coef[0] += (-1) ** N
    return np.polynomial.polynomial.polyroots(coef)


@dataclass
class CriticalMassRow:
    N: int
    roots: list[float]

    @property
    def M_N(self) -> float:
        """Smallest positive zero, or NaN when none was found."""
        return self.roots[0] if self.roots else math.nan


def critical_masses(N_max: int, M_max: float = 50.0, step: float = 0.01,
                    xtol: float = 1e-10, N_min: int = 2) -> list[CriticalMassRow]:
    """Positive zeros of ``q_N`` on ``(0, M_max]`` for ``N = N_min..N_max``.

    Each sign change on a uniform scan is refined by bisection.  An empty
    root list means the scan found no zero up to ``M_max``.
    """
    if N_max < 2:
        raise ValueError("N_max must be >= 2")
    n_steps = int(round(M_max / step))
    grid = [step * k for k in range(1, n_steps + 1)]
    rows = []
    for N in range(N_min, N_max + 1):
        values = [qN(N, m) for m in grid]
        roots: list[float] = []
        for k, (a, b) in enumerate(zip(grid[:-1], grid[1:])):
            fa, fb = values[k], values[k + 1]
            if fa == 0.0:
                if not roots or abs(roots[-1] - a) > step / 2:
                    roots.append(a)
            elif fa * fb < 0:
                roots.append(bisect(lambda m: qN(N, m), a, b, xtol=xtol, rtol=4 * np.finfo(float).eps,
                                    maxiter=200))
        if values[-1] == 0.0:
            roots.append(grid[-1])
        rows.append(CriticalMassRow(N, roots))
    return rows


class Verdict(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


@dataclass
class StabilityReport:
    N: int
    M: float
    eigenvalues: np.ndarray
    max_real: float
    verdict: Verdict
    routh_hurwitz: bool | None = None


def routh_hurwitz_stable(coef_high_first) -> bool:
    """Strict Routh-Hurwitz test for a real polynomial (highest power first)."""
    c = np.asarray(coef_high_first, dtype=float)
    if c[0] < 0:
        c = -c
    if c[0] == 0:
        raise ValueError("leading coefficient must be nonzero")
    deg = c.size - 1
    # Hurwitz matrix H[i, j] = c[2(j+1) - (i+1)]
    H = np.zeros((deg, deg))
    for i in range(deg):
        for j in range(deg):
            k = 2 * (j + 1) - (i + 1)
            if 0 <= k <= deg:
                H[i, j] = c[k]
    minors = [np.linalg.det(H[:k, :k]) for k in range(1, deg + 1)]
    return bool(np.all(c > 0)) and all(m > 0 for m in minors)


def stability(N: int, M: float, tol: float = STABILITY_TOL) -> StabilityReport:
    system = build_matrix(N, M)
    eig = np.linalg.eigvals(system.matrix)
    max_real = float(np.max(eig.real))
    if max_real < -tol:
        verdict = Verdict.STABLE
    elif max_real > tol:
        verdict = Verdict.UNSTABLE
    else:
        verdict = Verdict.MARGINAL
    rh = None
    if N <= RH_MAX_ORDER:
        # det(lam I - C) = (-1)^(N+1) p_N(lam), highest power first
        coef = (-1) ** (N + 1) * char_poly_coefficients(N, M)[::-1]
        rh = routh_hurwitz_stable(coef)
    return StabilityReport(N, float(M), eig, max_real, verdict, rh)


def order2_routh_hurwitz(M: float) -> tuple[float, float, float, bool]:
    """Explicit inequalities for ``lam^3 + a2 lam^2 + a1 lam + a0``, ``a_i`` from ``C_2``.

    Returns ``(a2, a1, a0, stable)`` with ``stable`` iff ``a2, a0 > 0`` and
    ``a2 a1 > a0``.
    """
    a2 = 2.0 * M
    a1 = M * M + 2.0 * M
    a0 = 2.0 * M * (M - 2.0)
    return a2, a1, a0, (a2 > 0 and a0 > 0 and a2 * a1 > a0)


# --------------------------------------------------------------------------
# Model B, second order.

@dataclass
class ModelBResult:
    M: float
    times: np.ndarray
    A20: np.ndarray
    A11: np.ndarray
    A02: np.ndarray
    det: np.ndarray
    det_integrated: np.ndarray
    jacobian_eigenvalues: np.ndarray
    steady_state: tuple[float, float, float]
    blow_up_time: float | None

    @property
    def det_identity_error(self) -> float:
        """Max relative gap between ``D(t)`` and ``D(0) + int 2 M A20 (M + A20)``."""
        scale = np.maximum(np.abs(self.det), 1.0)
        return float(np.max(np.abs(self.det - self.det_integrated) / scale))


def model_b_jacobian(M: float) -> np.ndarray:
    return np.array([[0.0, 2.0, 0.0], [-M, 0.0, 1.0], [2.0 * M, -2.0 * M, 0.0]])


def model_b_order2(M: float, initial: tuple[float, float, float], t_end: float,
                   tol: float = 1e-10, guard: float | None = None, n_out: int = 201) -> ModelBResult:
    """Second moments under Model B.

    Alongside ``(A20, A11, A02)`` the integral of ``2 M A20 (M + A20)`` is
    carried as a fourth state, so ``D = A20 A02 - A11^2`` can be compared
    with its own predicted evolution.  ``guard`` stops the run once any
    moment exceeds it.
    """
    a20, a11, a02 = map(float, initial)
    if not (a20 > 0 and a02 > 0 and a20 * a02 > a11 * a11):
        raise ValueError("initial second moments must satisfy A20, A02 > 0 and A20 A02 > A11^2")
    D0 = a20 * a02 - a11 * a11

    def rhs(_t, y):
        x20, x11, x02, _ = y
        return [2 * x11, x02 - M * x20, 2 * M * (M + x20 - x11), 2 * M * x20 * (M + x20)]

    events = None
    if guard is not None:
        def hit(_t, y):
            return guard - max(abs(y[0]), abs(y[2]))
        hit.terminal = True
        events = hit
    sol = solve_ivp(rhs, (0.0, t_end), [a20, a11, a02, D0], method="DOP853", rtol=tol, atol=tol,
                    events=events, dense_output=True)
    t_stop = sol.t[-1]
    times = np.linspace(0.0, t_stop, n_out)
    y = sol.sol(times)
    blow = float(sol.t_events[0][0]) if events is not None and sol.t_events[0].size else None
    J = model_b_jacobian(M)
    # J x + (0, 0, 2 M^2) = 0
    steady = tuple(np.linalg.solve(J, [0.0, 0.0, -2.0 * M * M]))
    return ModelBResult(M, times, y[0], y[1], y[2], y[0] * y[2] - y[1] ** 2, y[3],
                        np.linalg.eigvals(J), steady, blow)
