import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hinfgp.errors import ZeroGain
from hinfgp.kernels import CozineKernel, GeometricKernel, SequenceSpec, SumKernel
from hinfgp.sampling import (
    FrequencyGrid,
    Realization,
    count_upcrossings,
    cozine_response,
    draw_coefficient_block,
    evaluate_series,
    gain_and_derivative,
    sample_cozine,
    sample_kernel,
    sample_stationary,
)

PROBES = [(0.0, 0.0), (0.4, 0.4), (1.0, 0.3), (2.0, -1.2), (np.pi / 2, np.pi)]


def _covariance_check(kern, draws):
    """Empirical E[f(z) conj f(w)] and E[f(z) f(w)] versus the closed forms."""
    for o1, o2 in PROBES:
        z1, z2 = np.exp(1j * o1), np.exp(1j * o2)
        n = np.arange(draws.shape[1])
        f1 = draws @ np.exp(-1j * n * o1)
        f2 = draws @ np.exp(-1j * n * o2)
        for prod, ref in ((f1 * np.conj(f2), kern.k(z1, z2)), (f1 * f2, kern.kt(z1, z2))):
            est = prod.mean()
            se_re = prod.real.std(ddof=1) / math.sqrt(prod.size)
            se_im = prod.imag.std(ddof=1) / math.sqrt(prod.size)
            assert abs(est.real - ref.real) <= 3 * se_re + 1e-12
            assert abs(est.imag - ref.imag) <= 3 * se_im + 1e-12


def test_geometric_covariances_mc():
    kern = GeometricKernel(0.5)
    _covariance_check(kern, draw_coefficient_block(kern, 0, 0, 50_000))


def test_mixture_covariances_mc():
    kern = SumKernel([(0.5, GeometricKernel(0.3)), (2.0, CozineKernel(0.8, 1.1))])
    _covariance_check(kern, draw_coefficient_block(kern, 1, 0, 50_000))


def test_cozine_forced_draw():
    assert cozine_response(0.9, np.pi / 2, 1.0, 0.0, 1.0) == pytest.approx(1 / 1.81, abs=1e-6)


def test_cozine_samples_match_series_and_kernel():
    grid = FrequencyGrid.uniform(65, -np.pi, np.pi)
    rs = sample_cozine(0.9, 1.0, seed=3, count=50_000, grid=FrequencyGrid.uniform(2, 0, 0.5))
    f1 = np.array([r.values[0] for r in rs])
    est = np.mean(np.abs(f1) ** 2)
    se = np.std(np.abs(f1) ** 2, ddof=1) / math.sqrt(f1.size)
    assert abs(est - CozineKernel(0.9, 1.0).k(1, 1).real) <= 3 * se
    # the rational form and the truncated impulse response agree
    r = sample_cozine(0.6, 2.0, seed=4, count=1, grid=grid)[0]
    np.testing.assert_allclose(evaluate_series(r.coefficients, grid), r.values, atol=1e-12)


def test_constant_spec():
    grid = FrequencyGrid.uniform(33, -np.pi, np.pi)
    for r in sample_stationary(SequenceSpec(coefficients=(1.0,)), grid, seed=2, count=5):
        assert np.ptp(r.values.real) < 1e-14 and np.abs(r.values.imag).max() < 1e-14
        gain, dgain = gain_and_derivative(r)
        assert np.ptp(gain) < 1e-14 and np.abs(dgain).max() < 1e-14


def test_single_lag_gain():
    grid = FrequencyGrid.uniform(33, -np.pi, np.pi)
    r = Realization(grid, evaluate_series([0.0, -1.7], grid), np.array([0.0, -1.7]), 0, 0)
    gain, dgain = gain_and_derivative(r)
    np.testing.assert_allclose(gain, 1.7)
    assert np.abs(dgain).max() < 1e-13


def test_gain_derivative_fd():
    r = sample_stationary(SequenceSpec.geometric(0.5), FrequencyGrid.uniform(50, 0.1, 3.0), seed=5, count=1)[0]
    _, dgain = gain_and_derivative(r)
    h = 1e-6
    up = np.abs(evaluate_series(r.coefficients, FrequencyGrid(r.grid.omega + h)))
    dn = np.abs(evaluate_series(r.coefficients, FrequencyGrid(r.grid.omega - h)))
    np.testing.assert_allclose(dgain, (up - dn) / (2 * h), atol=1e-6)


def test_zero_gain_raises():
    grid = FrequencyGrid.uniform(5, 0, 1)
    r = Realization(grid, np.zeros(5, complex), np.zeros(3), 0, 0)
    with pytest.raises(ZeroGain):
        gain_and_derivative(r)


@pytest.mark.parametrize("grid", [FrequencyGrid.uniform(64, 0, np.pi), FrequencyGrid.uniform(4096, 0, np.pi), FrequencyGrid.uniform(10, -1, 2)])
def test_fft_path_matches_direct(grid):
    coeffs = draw_coefficient_block(GeometricKernel(0.5), 7, 0, 3)
    n = np.arange(coeffs.shape[1])
    basis = np.exp(-1j * np.outer(n, grid.omega))
    np.testing.assert_allclose(evaluate_series(coeffs, grid), coeffs @ basis, atol=1e-10)
    np.testing.assert_allclose(
        evaluate_series(coeffs, grid, derivative=True), coeffs @ (basis * (-1j * n[:, None])), atol=1e-8
    )


def test_determinism_and_stream_splitting():
    grid = FrequencyGrid.uniform(128, 0, np.pi)
    a = sample_stationary(SequenceSpec.geometric(0.5), grid, seed=9, count=4)
    b = sample_stationary(SequenceSpec.geometric(0.5), grid, seed=9, count=4)
    for x, y in zip(a, b):
        assert np.array_equal(x.values, y.values)
    # realization i does not depend on how many others were drawn
    block = draw_coefficient_block(GeometricKernel(0.5), 9, 2, 1)
    np.testing.assert_array_equal(block[0], a[2].coefficients)


def test_conjugate_symmetry_on_closed_grid():
    grid = FrequencyGrid.uniform(257, -np.pi, np.pi)
    assert grid.is_conjugate_closed()
    for kern in (GeometricKernel(0.5), CozineKernel(0.9, 1.0)):
        for r in sample_kernel(kern, grid, seed=1, count=3):
            assert np.abs(np.conj(r.values) - r.values[::-1]).max() <= 1e-12


def test_sampled_gain_bounded():
    grid = FrequencyGrid.uniform(1024, -np.pi, np.pi)
    for r in sample_kernel(GeometricKernel(0.9), grid, seed=0, count=20):
        assert np.all(np.isfinite(np.abs(r.values)))


def test_realization_csv(tmp_path):
    grid = FrequencyGrid.uniform(5, 0, 1)
    r = sample_stationary(SequenceSpec.geometric(0.5), grid, 0, 1)[0]
    path = tmp_path / "r.csv"
    r.to_csv(path)
    arr = np.loadtxt(path, delimiter=",", skiprows=1)
    assert path.read_text().splitlines()[0].split(",") == ["omega", "re_f", "im_f", "abs_f"]
    np.testing.assert_array_equal(arr[:, 1] + 1j * arr[:, 2], r.values)


def test_count_upcrossings_examples():
    assert count_upcrossings([0, 2, 0, 2], 1.0) == 2
    assert count_upcrossings([2, 0, 2, 0], 1.0) == 1
    assert count_upcrossings([1, 1, 1], 1.0) == 0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=2, max_size=40), st.floats(0.01, 5))
def test_upcrossings_property(path, gamma):
    # between two upcrossings there is a downcrossing, so the counts differ by at most one
    g = np.array(path)
    up = count_upcrossings(g, gamma)
    above = g > gamma
    down = int(np.sum(above[:-1] & ~above[1:]))
    assert abs(int(up) - int(down)) <= 1
    assert up - down == int(above[-1]) - int(above[0])
