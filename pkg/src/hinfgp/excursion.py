"""
Gain excursion probabilities of H-infinity Gaussian processes.

The probability that the gain ``|f(e^{jW})|`` exceeds ``gamma`` somewhere on a
frequency range is bounded by the probability that it already exceeds
``gamma`` at the start of the range plus the expected number of upcrossings
of ``gamma``. The latter is computed from the crossing intensity of the
vector process ``g = (Re f, Im f)`` through the circle of radius ``gamma``::

    E[N] = int dW int_0^2pi gamma * E[(n . g')_+ | g = z(t)] p_g(z(t)) dt

with ``z(t) = gamma (cos t, sin t)`` and outward normal ``n = z / gamma``.
The conditional law of ``n . g'`` is Gaussian, so the inner expectation is
the mean of a rectified Gaussian.

Probabilistic IQC certificates with a disk-type multiplier reduce to a
unit-level excursion problem for the process ``(f - Pi21) / d`` with
``d = sqrt(Pi11 + |Pi21|^2)``; :class:`IQCKernel` implements that process.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.special
from scipy.interpolate import CubicSpline

from hinfgp.errors import BadMultiplier, DegenerateCovariance, QuadratureNotConverged
from hinfgp.kernels import ComplexKernel, decompose_derivatives

SIGMA_REG = 1e-12
DEFAULT_N_OMEGA = 400
DEFAULT_N_THETA = 256
#: relative change on doubling both resolutions above which a warning is issued
CONVERGENCE_RTOL = 0.01


def rectified_gaussian_mean(mu, sigma):
    """
    ``E[max(X, 0)]`` for ``X ~ N(mu, sigma**2)``.

    Evaluated as ``sigma/sqrt(2 pi) exp(-mu^2 / (2 sigma^2))
    + mu/2 (1 + erf(mu / (sqrt(2) sigma)))``; ``sigma == 0`` gives
    ``max(mu, 0)``.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    mu, sigma = np.broadcast_arrays(mu, sigma)
    out = np.array(np.maximum(mu, 0.0), dtype=float)
    pos = sigma > 0
    s = sigma[pos]
    r = mu[pos] / s
    out[pos] = s / math.sqrt(2 * math.pi) * np.exp(-0.5 * r**2) + 0.5 * mu[
        pos
    ] * scipy.special.erfc(-r / math.sqrt(2))
    return out if out.ndim else float(out)


def default_range(kern: ComplexKernel):
    """``[0, pi]`` for conjugate-symmetric kernels (the gain is even), else the circle."""
    return (0.0, math.pi) if kern.conjugate_symmetric else (-math.pi, math.pi)


@dataclass
class ExcursionQuery:
    kernel: ComplexKernel
    gamma: float
    omega_range: tuple | None = None
    n_omega: int = DEFAULT_N_OMEGA
    n_theta: int = DEFAULT_N_THETA

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.omega_range is None:
            self.omega_range = default_range(self.kernel)
        lo, hi = self.omega_range
        if not lo < hi:
            raise ValueError(f"empty frequency range {self.omega_range}")
        if lo < -math.pi - 1e-12 or hi > math.pi + 1e-12:
            raise ValueError("frequency range must lie within [-pi, pi]")

    def with_resolution(self, n_omega, n_theta):
        return ExcursionQuery(self.kernel, self.gamma, self.omega_range, n_omega, n_theta)


@dataclass
class ExcursionReport:
    gamma: float
    expected_upcrossings: float
    start_violation: float
    bound: float
    diagnostics: dict = field(default_factory=dict)


def _regularize(sigma):
    tr = np.trace(sigma, axis1=-2, axis2=-1)
    lam = np.linalg.eigvalsh(sigma)[..., 0]
    if np.any(tr <= 0) or np.any(lam <= SIGMA_REG * tr):
        bad = np.flatnonzero(np.ravel((tr <= 0) | (lam <= SIGMA_REG * tr)))
        raise DegenerateCovariance(
            f"Sigma(W, W) is singular at {bad.size} evaluation point(s); "
            "for conjugate-symmetric processes avoid W = 0 and W = pi"
        )
    return sigma + SIGMA_REG * tr[..., None, None] * np.eye(2), lam


def _integrand_grid(kern, gamma, omega, theta):
    """Integrand on the outer product of ``omega`` and ``theta``; also min eig."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    mom = decompose_derivatives(kern, omega)
    sigma, lam = _regularize(mom.sigma)
    sinv = np.linalg.inv(sigma)
    det = np.linalg.det(sigma)

    normal = np.stack([np.cos(theta), np.sin(theta)], -1)  # (T, 2)
    z = gamma * normal
    d = z[None, :, :] - mom.m[:, None, :]  # (W, T, 2)
    sd = np.einsum("wij,wtj->wti", sinv, d)
    quad = np.einsum("wti,wti->wt", d, sd)
    density = np.exp(-0.5 * quad) / (2 * math.pi * np.sqrt(det))[:, None]

    # conditional law of n . g' given g = z
    cond_mean = mom.m_prime[:, None, :] + np.einsum("wij,wtj->wti", mom.c, sd)
    mu = np.einsum("ti,wti->wt", normal, cond_mean)
    cond_cov = mom.sigma_prime - mom.c @ sinv @ np.swapaxes(mom.c, -1, -2)
    var = np.einsum("ti,wij,tj->wt", normal, cond_cov, normal)
    sig = np.sqrt(np.maximum(var, 0.0))
    return gamma * rectified_gaussian_mean(mu, sig) * density, float(lam.min())


def belyaev_integrand(kern: ComplexKernel, gamma: float, omega, theta):
    """
    Upcrossing intensity density at frequency ``omega`` and circle angle ``theta``.

    ``omega`` and ``theta`` broadcast against each other.

    Raises
    ------
    DegenerateCovariance
        Where ``Sigma(W, W)`` is singular, e.g. ``W`` in ``{0, pi}`` for a
        conjugate-symmetric process whose imaginary part vanishes there.
    """
    omega, theta = np.broadcast_arrays(
        np.asarray(omega, dtype=float), np.asarray(theta, dtype=float)
    )
    shape = omega.shape
    out = np.empty(omega.size)
    flat_o, flat_t = omega.ravel(), theta.ravel()
    for i, (o, t) in enumerate(zip(flat_o, flat_t)):
        out[i] = _integrand_grid(kern, gamma, [o], [t])[0][0, 0]
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def _midpoints(lo, hi, n, offset=0.0):
    step = (hi - lo) / n
    return lo + (np.arange(n) + 0.5 + offset) * step, step


def _upcrossings(q: ExcursionQuery, theta_offset=0.0, chunk=64):
    lo, hi = q.omega_range
    omega, d_omega = _midpoints(lo, hi, q.n_omega)
    theta, d_theta = _midpoints(0.0, 2 * math.pi, q.n_theta, theta_offset)
    total = 0.0
    lam_min = math.inf
    for start in range(0, omega.size, chunk):
        vals, lam = _integrand_grid(q.kernel, q.gamma, omega[start : start + chunk], theta)
        total += float(vals.sum())
        lam_min = min(lam_min, lam)
    return total * d_omega * d_theta, lam_min


def expected_upcrossings(q: ExcursionQuery, check: bool = False, theta_offset: float = 0.0):
    """
    Expected number of ``gamma``-level gain upcrossings over ``q.omega_range``.

    Two-dimensional midpoint rule with ``q.n_omega`` frequency cells and
    ``q.n_theta`` angle cells. Frequency midpoints never fall on the range
    ends, where conjugate-symmetric processes are degenerate.

    With ``check=True`` the computation is repeated at doubled resolution and
    a :class:`QuadratureNotConverged` warning is issued if the two differ by
    more than 1%.
    """
    value, _ = _upcrossings(q, theta_offset)
    if check:
        fine, _ = _upcrossings(q.with_resolution(2 * q.n_omega, 2 * q.n_theta), theta_offset)
        _check_convergence(value, fine)
    return value


def _check_convergence(value, fine):
    delta = abs(fine - value) / max(abs(fine), 1e-300)
    ok = delta <= CONVERGENCE_RTOL or abs(fine - value) < 1e-12
    if not ok:
        warnings.warn(
            f"doubling the quadrature resolution changed E[N] from {value:.6g} "
            f"to {fine:.6g}",
            QuadratureNotConverged,
            stacklevel=3,
        )
    return delta, ok


def _disk_exit_probability(m, sigma, gamma):
    """``P(|X| > gamma)`` for a bivariate normal ``X ~ N(m, sigma)``."""
    m = np.asarray(m, dtype=float)
    sigma = 0.5 * (np.asarray(sigma, dtype=float) + np.asarray(sigma, dtype=float).T)
    if gamma <= 0:
        return 1.0
    lam, vec = np.linalg.eigh(sigma)
    tr = max(lam.sum(), 0.0)
    if tr == 0.0:
        return float(np.hypot(*m) > gamma)
    if lam[0] <= SIGMA_REG * tr:
        # rank one: X = m + sqrt(lam1) * xi * v, exits iff |m + t v| > gamma
        v = vec[:, 1]
        s = math.sqrt(lam[1])
        b = float(m @ v)
        c = float(m @ m) - gamma**2
        disc = b * b - c
        if disc <= 0:
            return 1.0
        t_lo, t_hi = -b - math.sqrt(disc), -b + math.sqrt(disc)
        return float(
            scipy.special.ndtr(t_lo / s) + scipy.special.ndtr(-t_hi / s)
        )

    qmat = np.linalg.inv(sigma)
    norm = 1.0 / (2 * math.pi * math.sqrt(np.linalg.det(sigma)))

    def radial_tail(theta):
        # int_gamma^inf r p(r u) dr in closed form
        u = np.array([math.cos(theta), math.sin(theta)])
        a = float(u @ qmat @ u)
        b = float(u @ qmat @ m)
        mu = b / a
        d = gamma * u - m
        boundary = -0.5 * float(d @ qmat @ d)
        x = math.sqrt(a / 2) * (gamma - mu)
        first = math.exp(boundary) / a
        if x >= 0:
            second = mu * math.sqrt(math.pi / (2 * a)) * scipy.special.erfcx(x) * math.exp(
                boundary
            )
        else:
            c = float(m @ qmat @ m)
            second = (
                mu
                * math.sqrt(math.pi / (2 * a))
                * scipy.special.erfc(x)
                * math.exp(-0.5 * (c - b * b / a))
            )
        return norm * (first + second)

    val, _ = scipy.integrate.quad(radial_tail, 0.0, 2 * math.pi, limit=200, epsabs=1e-13)
    return float(min(max(val, 0.0), 1.0))


def start_violation(kern: ComplexKernel, gamma: float, omega_start: float = 0.0) -> float:
    """``P(|f(e^{j omega_start})| > gamma)``."""
    mom = decompose_derivatives(kern, np.array([omega_start]))
    return _disk_exit_probability(mom.m[0], mom.sigma[0], gamma)


def _start_frequency(q: ExcursionQuery):
    lo, hi = q.omega_range
    return 0.0 if lo <= 0.0 <= hi else lo


def excursion_bound(q: ExcursionQuery, check: bool = True) -> ExcursionReport:
    """
    Upper bound on ``P(sup |f| > gamma)`` over ``q.omega_range``.

    The start point is ``W = 0`` whenever the range contains it, and the
    lower range end otherwise.
    """
    value, lam = _upcrossings(q)
    diagnostics = {"min_sigma_eigenvalue": lam, "n_omega": q.n_omega, "n_theta": q.n_theta}
    if check:
        fine, _ = _upcrossings(q.with_resolution(2 * q.n_omega, 2 * q.n_theta))
        delta, ok = _check_convergence(value, fine)
        diagnostics.update(refined_upcrossings=fine, refinement_delta=delta, converged=ok)
    start = start_violation(q.kernel, q.gamma, _start_frequency(q))
    return ExcursionReport(q.gamma, value, start, start + value, diagnostics)


# --------------------------------------------------------------------------
# IQC reduction


@dataclass
class MultiplierGrid:
    """
    Disk-type IQC multiplier sampled on a frequency grid.

    ``Pi22`` is normalized to ``-1``. Scalars are accepted for constant
    multipliers.
    """

    omega: np.ndarray
    pi11: np.ndarray
    pi21: np.ndarray

    def __post_init__(self):
        self.omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        self.pi11 = np.broadcast_to(np.asarray(self.pi11, dtype=float), self.omega.shape).copy()
        self.pi21 = np.broadcast_to(np.asarray(self.pi21, dtype=complex), self.omega.shape).copy()
        if self.omega.size > 1 and np.any(np.diff(self.omega) <= 0):
            raise BadMultiplier("multiplier frequencies must be strictly increasing")
        d2 = self.pi11 + np.abs(self.pi21) ** 2
        if np.any(d2 <= 0):
            raise BadMultiplier("Pi11 + |Pi21|^2 must be positive on the whole grid")

    @classmethod
    def constant(cls, pi11: float, pi21: complex = 0.0):
        return cls(np.array([0.0]), pi11, pi21)


class _Interp:
    """Natural cubic spline with first derivative; constant for a single node."""

    def __init__(self, x, y):
        if x.size == 1:
            self.const = float(y[0])
            self.spline = None
        else:
            self.spline = CubicSpline(x, y, bc_type="natural")

    def __call__(self, x, nu=0):
        if self.spline is None:
            return np.full(np.shape(x), self.const if nu == 0 else 0.0)
        return self.spline(x, nu)


class IQCKernel(ComplexKernel):
    """
    Kernel of ``(f(e^{jW}) - Pi21(W)) / d(W)`` with ``d = sqrt(Pi11 + |Pi21|^2)``.

    Defined on the unit circle only; multiplier values between grid nodes come
    from natural cubic splines, whose derivatives give ``d'`` analytically.
    """

    def __init__(self, base: ComplexKernel, multiplier: MultiplierGrid):
        self.base = base
        self.multiplier = multiplier
        om = multiplier.omega
        self._p11 = _Interp(om, multiplier.pi11)
        self._pr = _Interp(om, multiplier.pi21.real)
        self._pi = _Interp(om, multiplier.pi21.imag)
        self.conjugate_symmetric = base.conjugate_symmetric

    def scale(self, o, deriv=0):
        o = np.asarray(o, dtype=float)
        pr, pi = self._pr(o), self._pi(o)
        d2 = self._p11(o) + pr**2 + pi**2
        if np.any(d2 <= 0):
            raise BadMultiplier("interpolated Pi11 + |Pi21|^2 is not positive")
        d = np.sqrt(d2)
        if deriv == 0:
            return d
        dd2 = self._p11(o, 1) + 2 * (pr * self._pr(o, 1) + pi * self._pi(o, 1))
        return dd2 / (2 * d)

    def _center(self, o, deriv=0):
        return self._pr(o, deriv) + 1j * self._pi(o, deriv)

    @staticmethod
    def _angle(z):
        return np.angle(np.asarray(z, dtype=complex))

    def k(self, z, w):
        return self.circle_k(self._angle(z), self._angle(w))

    def kt(self, z, w):
        return self.circle_kt(self._angle(z), self._angle(w))

    def mean(self, z):
        return self.circle_mean(self._angle(z))

    def _scaled(self, method, o1, o2, order):
        p, q = order
        d1, d2 = self.scale(o1), self.scale(o2)
        base = getattr(self.base, method)
        k00 = base(o1, o2, (0, 0))
        if (p, q) == (0, 0):
            return k00 / (d1 * d2)
        e1, e2 = self.scale(o1, 1), self.scale(o2, 1)
        if (p, q) == (1, 0):
            return base(o1, o2, (1, 0)) / (d1 * d2) - k00 * e1 / (d1**2 * d2)
        if (p, q) == (0, 1):
            return base(o1, o2, (0, 1)) / (d1 * d2) - k00 * e2 / (d1 * d2**2)
        k10 = base(o1, o2, (1, 0))
        k01 = base(o1, o2, (0, 1))
        k11 = base(o1, o2, (1, 1))
        return (
            k11 / (d1 * d2)
            - k10 * e2 / (d1 * d2**2)
            - k01 * e1 / (d1**2 * d2)
            + k00 * e1 * e2 / (d1**2 * d2**2)
        )

    def circle_k(self, o1, o2, order=(0, 0)):
        return self._scaled("circle_k", o1, o2, tuple(order))

    def circle_kt(self, o1, o2, order=(0, 0)):
        return self._scaled("circle_kt", o1, o2, tuple(order))

    def circle_mean(self, o):
        o = np.asarray(o, dtype=float)
        return (self.base.circle_mean(o) - self._center(o)) / self.scale(o)

    def circle_mean_derivative(self, o):
        o = np.asarray(o, dtype=float)
        dm = self.base.circle_mean_derivative(o)
        if dm is None:
            return None
        d, dd = self.scale(o), self.scale(o, 1)
        num = self.base.circle_mean(o) - self._center(o)
        return (dm - self._center(o, 1)) / d - num * dd / d**2

    def to_dict(self):
        return {
            "type": "iqc",
            "base": self.base.to_dict(),
            "multiplier": {
                "omega": self.multiplier.omega.tolist(),
                "pi11": self.multiplier.pi11.tolist(),
                "pi21_re": self.multiplier.pi21.real.tolist(),
                "pi21_im": self.multiplier.pi21.imag.tolist(),
            },
        }


def iqc_transform(kern: ComplexKernel, multiplier: MultiplierGrid) -> IQCKernel:
    return IQCKernel(kern, multiplier)


def iqc_certificate(kern, multiplier, epsilon, **query_kw):
    """
    Probabilistic IQC check: ``(report, report.bound <= epsilon)``.

    The transformed process is tested at unit level.
    """
    q = ExcursionQuery(iqc_transform(kern, multiplier), 1.0, **query_kw)
    report = excursion_bound(q)
    return report, report.bound <= epsilon
