import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import circle_points
from hinfgp import cxla
from hinfgp.errors import BadHyperparameter, TailTooLarge
from hinfgp.kernels import (
    CozineKernel,
    GeometricKernel,
    SequenceSpec,
    StationaryKernel,
    SumKernel,
    decompose_derivatives,
    kernel_from_dict,
    load_kernel,
    min_gram_eigenvalue,
    real_parts,
)

ORDERS = [(0, 0), (1, 0), (0, 1), (1, 1)]


def random_kernel(rng, kind):
    if kind == "geometric":
        return GeometricKernel(rng.uniform(0.05, 0.6))
    if kind == "stationary":
        return StationaryKernel(SequenceSpec.geometric(rng.uniform(0.05, 0.6), truncation=80))
    if kind == "cozine":
        return CozineKernel(rng.uniform(0.05, 0.8), rng.uniform(0, math.pi))
    # a step-1e-4 difference has O(h**2) error that grows with weight and sharpness
    return SumKernel(
        [
            (rng.uniform(0.1, 2), GeometricKernel(rng.uniform(0.05, 0.6))),
            (rng.uniform(0.1, 2), CozineKernel(rng.uniform(0.05, 0.7), rng.uniform(0, math.pi))),
        ]
    )


KINDS = ["geometric", "stationary", "cozine", "sum"]


# -- closed-form values


def test_geometric_values():
    k = GeometricKernel(0.5)
    assert k.k(1, 1) == pytest.approx(2.0)
    assert k.k(2, 2) == pytest.approx(4 / 3.5)
    assert k.kt(1, 1) == pytest.approx(2.0)
    assert k.mean(1.0) == 0


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
def test_geometric_rejects_bad_alpha(alpha):
    with pytest.raises(BadHyperparameter):
        GeometricKernel(alpha)


def test_geometric_stationary(rng):
    k = GeometricKernel(0.5)
    t, p = rng.uniform(-np.pi, np.pi, (2, 100))
    lhs = k.k(np.exp(1j * t), np.exp(1j * p))
    rhs = k.k(np.exp(1j * (t - p)), 1.0)
    assert np.abs(lhs - rhs).max() <= 1e-12


def test_cozine_value():
    assert CozineKernel(0.9, np.pi / 2).k(1, 1) == pytest.approx(1 / 1.81, abs=1e-6)


def _cozine_closed_form(a, w0, z, w, complementary):
    """Rational covariance formulas written out directly."""
    c = math.cos(w0)
    wz = w if complementary else np.conj(w)
    num = 1 - a * c * (1 / z + 1 / wz) + a**2 / (z * wz)
    den = (1 - 2 * a * c / z + a**2 / z**2) * (1 - 2 * a * c / wz + a**2 / wz**2)
    return num / den


def test_cozine_matches_rational_form(rng):
    for _ in range(20):
        a, w0 = rng.uniform(0.05, 0.95), rng.uniform(0, np.pi)
        kern = CozineKernel(a, w0)
        z = circle_points(rng, 5) * rng.uniform(1, 2, 5)
        w = circle_points(rng, 5) * rng.uniform(1, 2, 5)
        np.testing.assert_allclose(kern.k(z, w), _cozine_closed_form(a, w0, z, w, False), rtol=1e-10)
        np.testing.assert_allclose(kern.kt(z, w), _cozine_closed_form(a, w0, z, w, True), rtol=1e-10)


@pytest.mark.parametrize("kind", KINDS)
def test_symmetries(rng, kind):
    kern = random_kernel(rng, kind)
    z, w = circle_points(rng, 30), circle_points(rng, 30) * 1.3
    np.testing.assert_allclose(kern.k(z, w), np.conj(kern.k(w, z)), atol=1e-12)
    np.testing.assert_allclose(kern.kt(z, w), kern.kt(w, z), atol=1e-12)
    np.testing.assert_allclose(kern.kt(z, w), kern.k(z, np.conj(w)), atol=1e-12)


def test_stationary_single_terms(rng):
    one = StationaryKernel(SequenceSpec(coefficients=(1.0,)))
    z, w = circle_points(rng, 5), circle_points(rng, 5)
    np.testing.assert_allclose(one.k(z, w), 1.0)
    np.testing.assert_allclose(one.kt(z, w), 1.0)
    lag = StationaryKernel(SequenceSpec(coefficients=(0.0, 1.0)))
    t, p = rng.uniform(-np.pi, np.pi, (2, 10))
    np.testing.assert_allclose(lag.k(np.exp(1j * t), np.exp(1j * p)), np.exp(-1j * (t - p)), atol=1e-14)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.6])
def test_series_matches_closed_form(rng, alpha):
    series = StationaryKernel(SequenceSpec.geometric(alpha, truncation=60))
    closed = GeometricKernel(alpha)
    z, w = circle_points(rng, 50), circle_points(rng, 50)
    assert np.abs(series.k(z, w) - closed.k(z, w)).max() <= 1e-12
    assert np.abs(series.kt(z, w) - closed.kt(z, w)).max() <= 1e-12
    # derivative terms carry n**(p+q) weights, so compare at the default truncation
    series = StationaryKernel(SequenceSpec.geometric(alpha))
    o1, o2 = rng.uniform(-np.pi, np.pi, (2, 50))
    for order in ORDERS:
        d = series.circle_k(o1, o2, order) - closed.circle_k(o1, o2, order)
        dt = series.circle_kt(o1, o2, order) - closed.circle_kt(o1, o2, order)
        assert max(np.abs(d).max(), np.abs(dt).max()) <= 1e-11


def test_tail_too_large():
    with pytest.raises(TailTooLarge):
        StationaryKernel(SequenceSpec.geometric(0.9, truncation=20))


def test_sum_kernel_examples(rng):
    g = GeometricKernel(0.5)
    z, w = circle_points(rng, 8), circle_points(rng, 8)
    np.testing.assert_allclose(SumKernel([(1.0, g)]).k(z, w), g.k(z, w))
    mix = SumKernel([(0.0, CozineKernel(0.5, 1.0)), (1.0, g)])
    np.testing.assert_allclose(mix.k(z, w), g.k(z, w))
    np.testing.assert_allclose(mix.kt(z, w), g.kt(z, w))
    assert SumKernel([(2.0, g)]).k(1, 1) == pytest.approx(4.0)


# -- derivatives


def _fd(kern, which, o1, o2, order, h=1e-4):
    f = kern.circle_k if which == "k" else kern.circle_kt
    p, q = order
    if (p, q) == (1, 0):
        return (f(o1 + h, o2) - f(o1 - h, o2)) / (2 * h)
    if (p, q) == (0, 1):
        return (f(o1, o2 + h) - f(o1, o2 - h)) / (2 * h)
    return (
        f(o1 + h, o2 + h) - f(o1 + h, o2 - h) - f(o1 - h, o2 + h) + f(o1 - h, o2 - h)
    ) / (4 * h * h)


@pytest.mark.parametrize("kind", KINDS)
def test_derivatives_match_finite_differences(rng, kind):
    for _ in range(5):
        kern = random_kernel(rng, kind)
        o1, o2 = rng.uniform(-np.pi, np.pi, (2, 20))
        # circle values agree with the z-plane evaluation
        np.testing.assert_allclose(kern.circle_k(o1, o2), kern.k(np.exp(1j * o1), np.exp(1j * o2)), atol=1e-12)
        np.testing.assert_allclose(kern.circle_kt(o1, o2), kern.kt(np.exp(1j * o1), np.exp(1j * o2)), atol=1e-12)
        for order in ORDERS[1:]:
            for which in ("k", "kt"):
                f = kern.circle_k if which == "k" else kern.circle_kt
                err = np.abs(f(o1, o2, order) - _fd(kern, which, o1, o2, order))
                assert err.max() <= 1e-5, (kind, order, which)


def test_decompose_at_zero():
    m = decompose_derivatives(GeometricKernel(0.5), 0.0)
    np.testing.assert_allclose(m.sigma, [[2, 0], [0, 0]], atol=1e-14)


def test_decompose_real_parts_fd():
    kern = GeometricKernel(0.5)
    o = np.pi / 2
    h = 1e-4
    m = decompose_derivatives(kern, o)

    def rp(a, b):
        return np.array(real_parts(kern, a, b))

    d1 = (rp(o + h, o) - rp(o - h, o)) / (2 * h)
    d2 = (rp(o, o + h) - rp(o, o - h)) / (2 * h)
    d12 = (rp(o + h, o + h) - rp(o + h, o - h) - rp(o - h, o + h) + rp(o - h, o - h)) / (4 * h * h)
    kx1, ky1, kc1 = d1
    kc2 = d2[2]
    np.testing.assert_allclose(m.c, [[kx1, kc1], [kc2, ky1]], atol=1e-5)
    np.testing.assert_allclose(m.sigma_prime, [[d12[0], d12[2]], [d12[2], d12[1]]], atol=1e-5)


def _series_moments(alpha, omega, n_terms=200):
    """Moments of g = (Re f, Im f) computed from the coefficient expansion."""
    n = np.arange(n_terms)
    a2 = alpha**n
    u = np.stack([np.cos(n * omega), -np.sin(n * omega)])
    du = np.stack([-n * np.sin(n * omega), -n * np.cos(n * omega)])
    return (u * a2) @ u.T, (du * a2) @ u.T, (du * a2) @ du.T


@pytest.mark.parametrize("omega", [0.3, 1.0, 2.5])
def test_decompose_matches_series_oracle(omega):
    sigma, c, sp = _series_moments(0.5, omega)
    m = decompose_derivatives(GeometricKernel(0.5), omega)
    np.testing.assert_allclose(m.sigma, sigma, atol=1e-12)
    np.testing.assert_allclose(m.c, c, atol=1e-12)
    np.testing.assert_allclose(m.sigma_prime, sp, atol=1e-12)


def test_decompose_sigma_symmetric_nonneg(rng):
    for kind in KINDS:
        m = decompose_derivatives(random_kernel(rng, kind), rng.uniform(0, np.pi, 50))
        np.testing.assert_allclose(m.sigma, np.swapaxes(m.sigma, -1, -2), atol=1e-14)
        assert np.all(m.sigma[:, [0, 1], [0, 1]] >= -1e-14)


# -- Gramians


@pytest.mark.parametrize("kind", KINDS)
def test_gramians_psd(kind):
    rng = np.random.default_rng(hash(kind) % 2**32)
    worst = np.inf
    for _ in range(200):
        kern = random_kernel(rng, kind)
        z = circle_points(rng, 10)
        worst = min(worst, min_gram_eigenvalue(kern, z))
        aug = cxla.augmented_real(kern.gram(z), kern.gram_t(z))
        assert np.linalg.eigvalsh(aug)[0] >= -1e-8
    assert worst >= -1e-8


# -- serialization


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.05, 0.9), a=st.floats(0.05, 0.95), w0=st.floats(0, math.pi), s=st.floats(0, 5))
def test_json_round_trip(alpha, a, w0, s):
    kern = SumKernel([(s, GeometricKernel(alpha)), (1.0, CozineKernel(a, w0))])
    back = kernel_from_dict(json.loads(json.dumps(kern.to_dict())))
    z = np.exp(1j * np.linspace(0, 3, 7))
    np.testing.assert_allclose(back.k(z, z[::-1]), kern.k(z, z[::-1]), rtol=1e-12)


def test_load_kernel_file(tmp_path):
    doc = {"type": "stationary", "params": {"generator": "geometric", "alpha": 0.5, "truncation": 100}}
    path = tmp_path / "k.json"
    path.write_text(json.dumps(doc))
    assert load_kernel(path).k(1, 1) == pytest.approx(2.0)


def test_unknown_kernel_type():
    with pytest.raises(BadHyperparameter):
        kernel_from_dict({"type": "matern"})
