from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import GaussianMixture, direct_cross_moments, trapezoid_line
from chemokin.core import DensityProfile, SpatialGrid
from chemokin.signal import (
    convolve_signal, cross_moment, direct_signal, extended_signal, profile_moments,
    second_difference_residual, signal_moments,
)


def gaussian(grid, mass=4.0, center=0.0, width=1.0):
    values = np.exp(-0.5 * ((grid.nodes - center) / width) ** 2) / (width * math.sqrt(2 * math.pi))
    return DensityProfile(grid, mass * values)


def mixture(grid, rng, k=3):
    values = np.zeros(grid.n)
    for _ in range(k):
        c, w, a = rng.uniform(-2, 2), rng.uniform(0.5, 1.5), rng.uniform(0.2, 1.0)
        values += a * np.exp(-0.5 * ((grid.nodes - c) / w) ** 2)
    return DensityProfile(grid, values * rng.uniform(1, 5) / grid.integrate(values))


def test_discrete_delta_gives_green_function():
    g = SpatialGrid(20.0, 4001)
    values = np.zeros(g.n)
    values[g.center] = 1.0 / g.spacing
    S = convolve_signal(DensityProfile(g, values))
    exact = 0.5 * np.exp(-np.abs(g.nodes))
    off = np.abs(g.nodes) > 0
    np.testing.assert_allclose(S.values[off], exact[off], atol=2e-5)
    # the hat function's own mass smears the peak by about h/6
    assert S.values[g.center] == pytest.approx(0.5, abs=g.spacing / 5)


@pytest.mark.parametrize("n", [257, 1025, 4097])
def test_self_convolution_of_kernel(n):
    g = SpatialGrid(20.0, n)
    rho = DensityProfile(g, 0.5 * np.exp(-np.abs(g.nodes)))
    S = convolve_signal(rho)
    exact = 0.25 * (1 + np.abs(g.nodes)) * np.exp(-np.abs(g.nodes))
    assert np.max(np.abs(S.values - exact)) < 0.05 * g.spacing ** 2


def test_fast_matches_direct_quadrature():
    g = SpatialGrid(20.0, 801)
    rho = mixture(g, np.random.default_rng(3))
    np.testing.assert_allclose(convolve_signal(rho).values, direct_signal(rho), atol=5e-4)


def test_even_density_gives_even_signal():
    g = SpatialGrid(20.0, 301)
    rho = gaussian(g, width=0.7)
    S = convolve_signal(rho).values
    np.testing.assert_array_equal(S, S[::-1])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_signal_nonnegative_and_mass_preserving(seed):
    g = SpatialGrid(25.0, 1001)
    rho = mixture(g, np.random.default_rng(seed))
    S = convolve_signal(rho)
    assert S.values.min() >= 0.0
    assert S.mass() == pytest.approx(rho.mass(), rel=1e-6)


def test_screened_equation_residual_is_second_order():
    errs = []
    for n in (401, 801, 1601):
        g = SpatialGrid(20.0, n)
        rho = gaussian(g)
        errs.append(np.max(np.abs(second_difference_residual(rho, convolve_signal(rho)))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.2)


def test_extended_signal_matches_on_grid_and_beyond():
    g = SpatialGrid(10.0, 401)
    rho = gaussian(g)
    ext = extended_signal(rho, 15.0)
    np.testing.assert_allclose(ext(g.nodes), convolve_signal(rho).values, atol=1e-14)
    far = np.array([-20.0, 18.0])
    np.testing.assert_allclose(ext(far), direct_signal(rho, far), rtol=1e-3)


@pytest.mark.parametrize("R,expected", [((4.0, 0.0), (4.0, 0.0)), ((2.0, 1.0), (2.0, 1.0))])
def test_low_order_signal_moments(R, expected):
    assert signal_moments(R).values == expected


def test_second_and_fourth_signal_moments():
    R = (3.0, 0.5, 2.0, -1.0, 7.0)
    S = signal_moments(R)
    assert S[2] == R[2] + 2 * R[0]
    assert S[4] == pytest.approx(R[4] + 12 * R[2] + 24 * R[0], rel=1e-15)
    assert S[3] == pytest.approx(R[3] + 6 * R[1], rel=1e-15)


def test_signal_moments_match_quadrature():
    g = SpatialGrid(40.0, 8001)
    rho = gaussian(g, mass=4.0, center=0.3, width=0.8)
    R = profile_moments(rho, 4)
    S_num = profile_moments(convolve_signal(rho), 4)
    np.testing.assert_allclose(signal_moments(R).values, S_num, rtol=1e-5)


def test_cross_moment_single_term():
    S, R = (2.0, 0.3, 5.0), (2.0, 0.1, 3.0)
    for N in range(3):
        assert cross_moment(0, N, S, R) == S[0] * R[N]


def test_cross_moment_worked_example():
    assert cross_moment(1, 2, (2.0, 0.0), (2.0, 0.0, 3.0)) == -6.0


@pytest.mark.parametrize("n,N", [(-1, 2), (3, 2), (2, 5)])
def test_cross_moment_index_errors(n, N):
    with pytest.raises(IndexError):
        cross_moment(n, N, (1.0, 0.0, 1.0), (1.0, 0.0, 1.0))


def test_closed_form_signal_oracle_agrees_with_direct_quadrature():
    g = SpatialGrid(30.0, 6001)
    mix = GaussianMixture.random(np.random.default_rng(11))
    rho = DensityProfile(g, mix.density(g.nodes))
    pts = np.array([-5.0, -1.0, 0.0, 0.7, 3.0])
    np.testing.assert_allclose(direct_signal(rho, pts), mix.signal(pts), atol=1e-5)


@pytest.mark.parametrize("n_points", [401, 801, 1601])
def test_fast_signal_second_order_against_closed_form(n_points):
    g = SpatialGrid(20.0, n_points)
    mix = GaussianMixture.random(np.random.default_rng(5))
    S = convolve_signal(DensityProfile(g, mix.density(g.nodes)))
    assert np.max(np.abs(S.values - mix.signal(g.nodes))) < 0.2 * g.spacing ** 2


@pytest.mark.parametrize("seed", range(5))
def test_cross_moment_matches_two_dimensional_quadrature(seed):
    mix = GaussianMixture.random(np.random.default_rng(seed))
    R = mix.moments(4)
    Sm = signal_moments(R)
    for (n, N), direct in direct_cross_moments(mix, 4).items():
        assert cross_moment(n, N, Sm, R) == pytest.approx(direct, rel=1e-8, abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_signal_moments_against_closed_form(seed):
    mix = GaussianMixture.random(np.random.default_rng(100 + seed))
    x, w = trapezoid_line(-60.0, 60.0, 24001)
    S = mix.signal(x)
    numeric = [float(np.sum(w * x ** k * S)) for k in range(5)]
    np.testing.assert_allclose(signal_moments(mix.moments(4)).values, numeric, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_velocity_identities_at_sample_points(seed):
    rng = np.random.default_rng(200 + seed)
    mix = GaussianMixture.random(rng)
    v, wv = trapezoid_line(-60.0, 60.0, 24001)
    R = mix.moments(2)
    for x in rng.uniform(-3.0, 3.0, 10):
        S = mix.signal(x + v)
        assert S @ wv == pytest.approx(mix.mass, abs=1e-6)
        assert (v * S) @ wv == pytest.approx(R[1] - x * R[0], abs=1e-6)
        assert (v ** 2 * S) @ wv == pytest.approx(R[2] - 2 * x * R[1] + (x * x + 2) * R[0], abs=1e-6)
