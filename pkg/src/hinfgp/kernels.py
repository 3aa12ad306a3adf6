"""
Covariance pairs of conjugate-symmetric H-infinity Gaussian processes.

A zero-mean complex Gaussian process ``f`` on the closed exterior of the unit
disk is described by its Hermitian covariance ``k(z, w) = E[f(z) f(w)^*]`` and
its complementary covariance ``kt(z, w) = E[f(z) f(w)]``. For processes with
a real impulse response ``f(z) = sum_n h_n z^-n`` the two are tied together by
``kt(z, w) = k(z, w^*)``.

Every kernel also exposes its values and first angular partial derivatives on
the unit circle, ``z = exp(1j*o1)``, ``w = exp(1j*o2)``. Those feed the gain
upcrossing integrand in :mod:`hinfgp.excursion`; they are analytic so that the
integrand is never built from nested finite differences.

Kernels serialize to JSON documents of the form::

    {"type": "geometric", "params": {"alpha": 0.5}}
    {"type": "cozine", "params": {"a": 0.9, "omega0": 1.5707963}}
    {"type": "stationary", "params": {"coefficients": [1.0, 0.5, 0.25]}}
    {"type": "stationary", "params": {"generator": "geometric", "alpha": 0.5,
                                      "truncation": 200}}
    {"type": "sum", "parts": [{"weight": 2.0, "type": "geometric", ...}, ...]}

where ``coefficients`` are the squared series weights ``a_n**2`` and ``weight``
multiplies both covariances of its part.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hinfgp.errors import BadHyperparameter, DerivativeUnavailable, TailTooLarge

ORDERS = ((0, 0), (1, 0), (0, 1), (1, 1))
#: relative tail mass above which a truncated generator is rejected
TAIL_RTOL = 1e-10
DEFAULT_TRUNCATION = 200
#: step of the central difference used for means without an analytic derivative
MEAN_FD_STEP = 1e-5


def _check_order(order):
    order = tuple(order)
    if order not in ORDERS:
        raise DerivativeUnavailable(f"derivative order {order} is not supported")
    return order


class ComplexKernel:
    """
    Base class for Hermitian/complementary covariance pairs.

    Subclasses implement :meth:`k` and :meth:`kt` on arbitrary complex
    arguments and override :meth:`circle_k` / :meth:`circle_kt` with analytic
    angular derivatives. The base implementations only provide order
    ``(0, 0)``.
    """

    #: realizations satisfy f(z^*) = f(z)^*
    conjugate_symmetric = True

    def k(self, z, w):
        raise NotImplementedError

    def kt(self, z, w):
        raise NotImplementedError

    def mean(self, z):
        return np.zeros(np.broadcast(np.asarray(z)).shape, dtype=complex)

    def circle_k(self, o1, o2, order=(0, 0)):
        if _check_order(order) != (0, 0):
            raise DerivativeUnavailable(
                f"{type(self).__name__} has no analytic angular derivatives"
            )
        return self.k(np.exp(1j * np.asarray(o1)), np.exp(1j * np.asarray(o2)))

    def circle_kt(self, o1, o2, order=(0, 0)):
        if _check_order(order) != (0, 0):
            raise DerivativeUnavailable(
                f"{type(self).__name__} has no analytic angular derivatives"
            )
        return self.kt(np.exp(1j * np.asarray(o1)), np.exp(1j * np.asarray(o2)))

    def circle_mean(self, o):
        return self.mean(np.exp(1j * np.asarray(o, dtype=float)))

    def circle_mean_derivative(self, o):
        """Angular derivative of the mean, or ``None`` if not known analytically."""
        if type(self).mean is ComplexKernel.mean:
            return np.zeros(np.shape(o), dtype=complex)
        return None

    def gram(self, z, w=None):
        """Hermitian Gramian ``K[i, j] = k(z_i, w_j)``."""
        z = np.asarray(z, dtype=complex).ravel()
        w = z if w is None else np.asarray(w, dtype=complex).ravel()
        return self.k(z[:, None], w[None, :])

    def gram_t(self, z, w=None):
        """Complementary Gramian ``K[i, j] = kt(z_i, w_j)``."""
        z = np.asarray(z, dtype=complex).ravel()
        w = z if w is None else np.asarray(w, dtype=complex).ravel()
        return self.kt(z[:, None], w[None, :])

    @property
    def hyperparameters(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        raise NotImplementedError

    def variance_sum(self) -> float:
        """``k(z, z)`` on the unit circle when it is constant, else NaN."""
        return float("nan")

    def draw_coefficients(self, rng: np.random.Generator) -> np.ndarray:
        """Draw one real impulse response ``h_n`` of a realization."""
        raise NotImplementedError(f"{type(self).__name__} cannot be sampled")

    def __add__(self, other):
        return SumKernel([(1.0, self), (1.0, other)])

    def __rmul__(self, weight):
        return SumKernel([(float(weight), self)])


# --------------------------------------------------------------------------
# stationary kernels


@dataclass(frozen=True)
class SequenceSpec:
    """
    Squared series weights ``a_n**2`` of a Hermitian stationary kernel.

    Either ``coefficients`` holds an explicit finite list, or ``generator``
    names a closed-form sequence (only ``"geometric"``, ``a_n**2 = alpha**n``)
    truncated to ``truncation`` terms.
    """

    coefficients: tuple = ()
    generator: str | None = None
    alpha: float | None = None
    truncation: int = DEFAULT_TRUNCATION

    def __post_init__(self):
        if self.generator is None:
            c = np.asarray(self.coefficients, dtype=float)
            if c.ndim != 1 or c.size == 0:
                raise BadHyperparameter("coefficients must be a nonempty list")
            if np.any(c < 0) or not np.all(np.isfinite(c)):
                raise BadHyperparameter("coefficients a_n^2 must be finite and >= 0")
            object.__setattr__(self, "coefficients", tuple(float(x) for x in c))
        elif self.generator == "geometric":
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise BadHyperparameter(f"alpha must lie in (0, 1), got {self.alpha}")
            if self.truncation < 1:
                raise BadHyperparameter("truncation must be positive")
        else:
            raise BadHyperparameter(f"unknown generator {self.generator!r}")

    @classmethod
    def geometric(cls, alpha: float, truncation: int = DEFAULT_TRUNCATION):
        return cls(generator="geometric", alpha=alpha, truncation=truncation)

    def squared_weights(self) -> np.ndarray:
        if self.generator is None:
            return np.array(self.coefficients)
        return self.alpha ** np.arange(self.truncation, dtype=float)

    def tail(self) -> float:
        """Mass ``sum_{n >= N} a_n**2`` dropped by the truncation."""
        if self.generator is None:
            return 0.0
        return self.alpha**self.truncation / (1.0 - self.alpha)

    def total(self) -> float:
        if self.generator is None:
            return float(sum(self.coefficients))
        return 1.0 / (1.0 - self.alpha)

    def to_dict(self) -> dict:
        if self.generator is None:
            return {"coefficients": list(self.coefficients)}
        return {
            "generator": self.generator,
            "alpha": self.alpha,
            "truncation": self.truncation,
        }


def _angular_factor(n, p, q, sign2):
    # d^p/do1^p d^q/do2^q of exp(-1j*n*(o1 + sign2*o2))
    return (-1j * n) ** p * (-1j * sign2 * n) ** q


class StationaryKernel(ComplexKernel):
    """
    Series kernel ``k(z, w) = sum_n a_n**2 (z w^*)^-n``.

    ``kt(z, w) = sum_n a_n**2 (z w)^-n``. The series is truncated to
    ``spec.truncation`` terms for generator specs; the dropped tail mass is
    kept in :attr:`tail`.
    """

    def __init__(self, spec: SequenceSpec):
        if spec.generator is not None and spec.tail() > TAIL_RTOL * spec.total():
            raise TailTooLarge(
                f"tail {spec.tail():.3g} beyond {spec.truncation} terms exceeds "
                f"{TAIL_RTOL:g} of the total {spec.total():.3g}"
            )
        self.spec = spec
        self.weights = spec.squared_weights()
        self.n = np.arange(self.weights.size, dtype=float)
        self.tail = spec.tail()

    def _series(self, x):
        x = np.asarray(x, dtype=complex)
        # Horner in 1/x
        inv = 1.0 / x
        acc = np.zeros_like(x)
        for c in self.weights[::-1]:
            acc = acc * inv + c
        return acc

    def k(self, z, w):
        return self._series(np.asarray(z) * np.conj(w))

    def kt(self, z, w):
        return self._series(np.asarray(z) * np.asarray(w))

    def _circle(self, o1, o2, order, sign2):
        p, q = _check_order(order)
        o1, o2 = np.broadcast_arrays(np.asarray(o1, float), np.asarray(o2, float))
        phase = o1 + sign2 * o2
        coef = self.weights * _angular_factor(self.n, p, q, sign2)
        return np.exp(-1j * phase[..., None] * self.n) @ coef

    def circle_k(self, o1, o2, order=(0, 0)):
        return self._circle(o1, o2, order, -1.0)

    def circle_kt(self, o1, o2, order=(0, 0)):
        return self._circle(o1, o2, order, 1.0)

    def variance_sum(self):
        return float(self.weights.sum())

    def draw_coefficients(self, rng):
        return np.sqrt(self.weights) * rng.standard_normal(self.weights.size)

    def to_dict(self):
        return {"type": "stationary", "params": self.spec.to_dict()}


class GeometricKernel(ComplexKernel):
    """
    Closed-form stationary kernel with ``a_n**2 = alpha**n``.

    ``k(z, w) = z w^* / (z w^* - alpha)`` and ``kt(z, w) = z w / (z w - alpha)``.
    """

    def __init__(self, alpha: float, truncation: int = DEFAULT_TRUNCATION):
        alpha = float(alpha)
        if not 0.0 < alpha < 1.0:
            raise BadHyperparameter(f"alpha must lie in (0, 1), got {alpha}")
        self.alpha = alpha
        self.truncation = truncation

    def k(self, z, w):
        p = np.asarray(z, dtype=complex) * np.conj(w)
        return p / (p - self.alpha)

    def kt(self, z, w):
        p = np.asarray(z, dtype=complex) * np.asarray(w)
        return p / (p - self.alpha)

    def _s(self, angle, deriv):
        q = self.alpha * np.exp(-1j * np.asarray(angle, dtype=float))
        s = 1.0 / (1.0 - q)
        if deriv == 0:
            return s
        if deriv == 1:
            return -1j * q * s**2
        return -(q * s**2 + 2.0 * q**2 * s**3)

    def circle_k(self, o1, o2, order=(0, 0)):
        p, q = _check_order(order)
        delta = np.asarray(o1, dtype=float) - np.asarray(o2, dtype=float)
        return (-1.0) ** q * self._s(delta, p + q)

    def circle_kt(self, o1, o2, order=(0, 0)):
        p, q = _check_order(order)
        return self._s(np.asarray(o1, dtype=float) + np.asarray(o2, dtype=float), p + q)

    def variance_sum(self):
        return 1.0 / (1.0 - self.alpha)

    @property
    def spec(self) -> SequenceSpec:
        return SequenceSpec.geometric(self.alpha, self.truncation)

    def draw_coefficients(self, rng):
        a = self.alpha ** (0.5 * np.arange(self.truncation))
        return a * rng.standard_normal(self.truncation)

    @property
    def hyperparameters(self):
        return {"alpha": self.alpha}

    def to_dict(self):
        return {"type": "geometric", "params": {"alpha": self.alpha}}


# --------------------------------------------------------------------------
# cozine kernel


class CozineKernel(ComplexKernel):
    """
    Second-order resonant kernel.

    The process is ``f(z) = X A(z) + Y B(z)`` with ``X, Y`` iid standard
    normal, ``A = (1 - a cos(w0) z^-1) / D`` and ``B = a sin(w0) z^-1 / D``,
    ``D = 1 - 2 a cos(w0) z^-1 + a^2 z^-2``. Both covariances follow from
    the two basis functions: ``k = A(z) A(w)^* + B(z) B(w)^*`` and
    ``kt = A(z) A(w) + B(z) B(w)``.
    """

    def __init__(self, a: float, omega0: float):
        a, omega0 = float(a), float(omega0)
        if not 0.0 < a < 1.0:
            raise BadHyperparameter(f"a must lie in (0, 1), got {a}")
        if not 0.0 <= omega0 <= math.pi:
            raise BadHyperparameter(f"omega0 must lie in [0, pi], got {omega0}")
        self.a = a
        self.omega0 = omega0
        self._c = a * math.cos(omega0)
        self._s = a * math.sin(omega0)

    def basis(self, z):
        """Return ``(A(z), B(z))``."""
        zeta = 1.0 / np.asarray(z, dtype=complex)
        d = 1.0 - 2.0 * self._c * zeta + self.a**2 * zeta**2
        return (1.0 - self._c * zeta) / d, self._s * zeta / d

    def circle_basis(self, o, deriv=0):
        """Basis functions on the circle, or their first angular derivatives."""
        zeta = np.exp(-1j * np.asarray(o, dtype=float))
        d = 1.0 - 2.0 * self._c * zeta + self.a**2 * zeta**2
        if deriv == 0:
            return (1.0 - self._c * zeta) / d, self._s * zeta / d
        dd = -2.0 * self._c + 2.0 * self.a**2 * zeta
        da = (-self._c * d - (1.0 - self._c * zeta) * dd) / d**2
        db = self._s * (d - zeta * dd) / d**2
        # d zeta / d o = -1j * zeta
        return -1j * zeta * da, -1j * zeta * db

    def k(self, z, w):
        az, bz = self.basis(z)
        aw, bw = self.basis(w)
        return az * np.conj(aw) + bz * np.conj(bw)

    def kt(self, z, w):
        az, bz = self.basis(z)
        aw, bw = self.basis(w)
        return az * aw + bz * bw

    def circle_k(self, o1, o2, order=(0, 0)):
        p, q = _check_order(order)
        a1, b1 = self.circle_basis(o1, p)
        a2, b2 = self.circle_basis(o2, q)
        return a1 * np.conj(a2) + b1 * np.conj(b2)

    def circle_kt(self, o1, o2, order=(0, 0)):
        p, q = _check_order(order)
        a1, b1 = self.circle_basis(o1, p)
        a2, b2 = self.circle_basis(o2, q)
        return a1 * a2 + b1 * b2

    def impulse_response_length(self, rtol=1e-17) -> int:
        return int(math.ceil(math.log(rtol) / math.log(self.a))) + 1

    def draw_coefficients(self, rng):
        x, y = rng.standard_normal(2)
        n = np.arange(self.impulse_response_length())
        return self.a**n * (x * np.cos(n * self.omega0) + y * np.sin(n * self.omega0))

    @property
    def hyperparameters(self):
        return {"a": self.a, "omega0": self.omega0}

    def to_dict(self):
        return {"type": "cozine", "params": {"a": self.a, "omega0": self.omega0}}


# --------------------------------------------------------------------------
# combinations


class SumKernel(ComplexKernel):
    """
    Weighted sum ``sum_i w_i k_i`` of independent processes.

    A weight multiplies both covariances of its part, i.e. the part's process
    is scaled by ``sqrt(w_i)``; means are scaled the same way.
    """

    def __init__(self, parts):
        parts = [(float(w), kern) for w, kern in parts]
        if not parts:
            raise BadHyperparameter("a sum kernel needs at least one part")
        if any(w < 0 for w, _ in parts):
            raise BadHyperparameter("sum kernel weights must be nonnegative")
        self.parts = parts
        self.conjugate_symmetric = all(p.conjugate_symmetric for _, p in parts)

    def _sum(self, method, *args, **kw):
        out = 0.0
        for w, kern in self.parts:
            out = out + w * getattr(kern, method)(*args, **kw)
        return out

    def k(self, z, w):
        return self._sum("k", z, w)

    def kt(self, z, w):
        return self._sum("kt", z, w)

    def circle_k(self, o1, o2, order=(0, 0)):
        return self._sum("circle_k", o1, o2, order)

    def circle_kt(self, o1, o2, order=(0, 0)):
        return self._sum("circle_kt", o1, o2, order)

    def mean(self, z):
        out = np.zeros(np.shape(z), dtype=complex)
        for w, kern in self.parts:
            out = out + math.sqrt(w) * kern.mean(z)
        return out

    def circle_mean(self, o):
        out = np.zeros(np.shape(o), dtype=complex)
        for w, kern in self.parts:
            out = out + math.sqrt(w) * kern.circle_mean(o)
        return out

    def circle_mean_derivative(self, o):
        out = np.zeros(np.shape(o), dtype=complex)
        for w, kern in self.parts:
            d = kern.circle_mean_derivative(o)
            if d is None:
                return None
            out = out + math.sqrt(w) * d
        return out

    def variance_sum(self):
        return float(sum(w * kern.variance_sum() for w, kern in self.parts))

    def draw_coefficients(self, rng):
        draws = [math.sqrt(w) * kern.draw_coefficients(rng) for w, kern in self.parts]
        out = np.zeros(max(d.size for d in draws))
        for d in draws:
            out[: d.size] += d
        return out

    def to_dict(self):
        parts = []
        for w, kern in self.parts:
            doc = kern.to_dict()
            doc["weight"] = w
            parts.append(doc)
        return {"type": "sum", "parts": parts}


def geometric_kernel(alpha: float) -> GeometricKernel:
    return GeometricKernel(alpha)


def cozine_kernel(a: float, omega0: float) -> CozineKernel:
    return CozineKernel(a, omega0)


def stationary_kernel(spec: SequenceSpec) -> StationaryKernel:
    return StationaryKernel(spec)


def sum_kernel(parts) -> SumKernel:
    return SumKernel(parts)


# --------------------------------------------------------------------------
# real/imaginary decomposition on the circle


@dataclass
class CircleMoments:
    """
    Second-order statistics of ``g = (Re f, Im f)`` and its angular derivative.

    Arrays carry the broadcast shape of the evaluation angles in front of the
    trailing matrix/vector axes.

    Attributes
    ----------
    sigma : (..., 2, 2)
        ``[[k_x, k_c], [k_c, k_y]]``.
    sigma_prime : (..., 2, 2)
        Mixed second derivatives ``[[k_x^12, k_c^12], [k_c^12, k_y^12]]``.
    c : (..., 2, 2)
        ``[[k_x^1, k_c^1], [k_c^2, k_y^1]]``, the covariance of ``g'`` with ``g``.
    m, m_prime : (..., 2)
        Mean of ``g`` and its angular derivative.
    """

    sigma: np.ndarray
    sigma_prime: np.ndarray
    c: np.ndarray
    m: np.ndarray
    m_prime: np.ndarray
    mean_fd: bool = field(default=False)


def real_parts(kern: ComplexKernel, o1, o2, order=(0, 0)):
    """``(k_x, k_y, k_c)`` and their angular derivatives of the given order."""
    k = kern.circle_k(o1, o2, order)
    kt = kern.circle_kt(o1, o2, order)
    return 0.5 * np.real(k + kt), 0.5 * np.real(k - kt), 0.5 * np.imag(kt - k)


def decompose_derivatives(kern: ComplexKernel, o1, o2=None) -> CircleMoments:
    """
    Assemble the real 2x2 blocks used by the gain upcrossing integrand.

    The blocks are formed from ``k_x = Re(k + kt)/2``, ``k_y = Re(k - kt)/2``,
    ``k_c = Im(kt - k)/2`` evaluated at ``(o1, o2)`` (``o2`` defaults to
    ``o1``). The mean derivative is taken from the kernel when available, and
    otherwise by a central difference with step ``1e-5``.
    """
    o1 = np.asarray(o1, dtype=float)
    o2 = o1 if o2 is None else np.asarray(o2, dtype=float)
    o1, o2 = np.broadcast_arrays(o1, o2)

    kx, ky, kc = real_parts(kern, o1, o2, (0, 0))
    kx1, ky1, kc1 = real_parts(kern, o1, o2, (1, 0))
    _, _, kc2 = real_parts(kern, o1, o2, (0, 1))
    kx12, ky12, kc12 = real_parts(kern, o1, o2, (1, 1))

    def block(a, b, c, d):
        return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)

    mean = kern.circle_mean(o1)
    dmean = kern.circle_mean_derivative(o1)
    mean_fd = dmean is None
    if mean_fd:
        h = MEAN_FD_STEP
        dmean = (kern.circle_mean(o1 + h) - kern.circle_mean(o1 - h)) / (2 * h)
    return CircleMoments(
        sigma=block(kx, kc, kc, ky),
        sigma_prime=block(kx12, kc12, kc12, ky12),
        c=block(kx1, kc1, kc2, ky1),
        m=np.stack([mean.real, mean.imag], -1),
        m_prime=np.stack([np.real(dmean), np.imag(dmean)], -1),
        mean_fd=mean_fd,
    )


# --------------------------------------------------------------------------
# serialization


def kernel_from_dict(doc: dict) -> ComplexKernel:
    """Build a kernel from its JSON document (see the module docstring)."""
    kind = doc.get("type")
    params = doc.get("params", {})
    if kind == "geometric":
        return GeometricKernel(params["alpha"])
    if kind == "cozine":
        return CozineKernel(params["a"], params["omega0"])
    if kind == "stationary":
        if "coefficients" in params:
            spec = SequenceSpec(coefficients=tuple(params["coefficients"]))
        else:
            spec = SequenceSpec(
                generator=params.get("generator", "geometric"),
                alpha=params["alpha"],
                truncation=params.get("truncation", DEFAULT_TRUNCATION),
            )
        return StationaryKernel(spec)
    if kind == "sum":
        parts = doc.get("parts", [])
        return SumKernel([(p.get("weight", 1.0), kernel_from_dict(p)) for p in parts])
    raise BadHyperparameter(f"unknown kernel type {kind!r}")


def load_kernel(path) -> ComplexKernel:
    with open(Path(path)) as fh:
        return kernel_from_dict(json.load(fh))


def min_gram_eigenvalue(kern: ComplexKernel, z) -> float:
    g = kern.gram(z)
    return float(np.linalg.eigvalsh(0.5 * (g + g.conj().T))[0])
