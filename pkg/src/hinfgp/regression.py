"""
Complex Gaussian process regression in the frequency domain.

Observations are ``y_i = f(z_i) + e_i`` with ``|z_i| >= 1`` and proper
complex noise, ``E|e_i|^2 = noise``. The strictly linear predictor uses
``y`` only; the widely linear predictor also uses ``conj(y)`` and needs the
complementary covariance. Following the usual convention for noisy targets,
the prior variance at a prediction point is ``k(z, z) + noise``; pass
``noise_free_prediction=True`` to predict the latent function instead.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from hinfgp import cxla
from hinfgp.errors import BadHyperparameter, FactorizationFailed, SchurSingular, SingularData
from hinfgp.kernels import ComplexKernel, CozineKernel, GeometricKernel, SumKernel

VARIANCE_CLAMP = 1e-10


@dataclass
class Dataset:
    z: np.ndarray
    y: np.ndarray
    noise: float = 0.0

    def __post_init__(self):
        self.z = np.atleast_1d(np.asarray(self.z, dtype=complex))
        self.y = np.atleast_1d(np.asarray(self.y, dtype=complex))
        if self.z.shape != self.y.shape or self.z.ndim != 1:
            raise ValueError("inputs and observations must be 1-D and equally long")
        if np.any(np.abs(self.z) < 1 - 1e-12):
            raise ValueError("inputs must lie on or outside the unit circle")
        if self.noise < 0:
            raise ValueError("noise variance must be nonnegative")

    def __len__(self):
        return self.z.size

    @classmethod
    def from_csv(cls, path, noise: float = 0.0):
        """Read columns ``re_z, im_z, re_y, im_y`` (header row required)."""
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return cls(np.zeros(0), np.zeros(0), noise)
            for row in reader:
                if row:
                    rows.append([float(v) for v in row[:4]])
        arr = np.array(rows, dtype=float).reshape(-1, 4)
        return cls(arr[:, 0] + 1j * arr[:, 1], arr[:, 2] + 1j * arr[:, 3], noise)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["re_z", "im_z", "re_y", "im_y"])
            for z, y in zip(self.z, self.y):
                writer.writerow([f"{v:.17g}" for v in (z.real, z.imag, y.real, y.imag)])


@dataclass
class PosteriorPrediction:
    z: complex
    mean: complex
    variance: float
    complementary_variance: complex
    kind: str
    jitter: float = 0.0


@dataclass
class ConfidenceEllipsoid:
    center: complex
    radius: float
    eta: float
    magnitude: tuple
    phase: tuple | None

    @property
    def full_circle(self) -> bool:
        return self.phase is None

    def contains(self, w) -> bool:
        return abs(w - self.center) <= self.radius


def _check_data(data: Dataset):
    if data.noise == 0 and len(data) > 1:
        if np.unique(np.round(data.z, 12)).size < len(data):
            raise SingularData(
                "duplicated inputs with zero noise make K_yy exactly singular; "
                "add noise or drop duplicates"
            )


def _gram(kern, data):
    kyy = kern.gram(data.z) + data.noise * np.eye(len(data))
    return 0.5 * (kyy + kyy.conj().T)


def _clamp(var):
    return 0.0 if var < 0 else var


def predict_strict(
    kern: ComplexKernel,
    data: Dataset,
    z,
    noise_free_prediction: bool = False,
    base_jitter: float = 1e-10,
):
    """
    Strictly linear posterior ``mean = K_xy^H K_yy^-1 y``.

    ``z`` may be a scalar or an array; an array returns a list of
    predictions. The complementary variance is that of the prediction error
    of the strictly linear estimator.
    """
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    prior_noise = 0.0 if noise_free_prediction else data.noise
    kxx = np.real(kern.k(zs, zs)) + prior_noise
    ktxx = kern.kt(zs, zs)
    mean0 = kern.mean(zs)
    if len(data) == 0:
        out = [
            PosteriorPrediction(zz, m, float(v), complex(kt), "strict")
            for zz, m, v, kt in zip(zs, mean0, kxx, ktxx)
        ]
        return out if np.ndim(z) else out[0]

    _check_data(data)
    fac = cxla.cholesky(_gram(kern, data), base_jitter)
    resid = data.y - kern.mean(data.z)
    a = kern.gram(zs, data.z)  # k(z, z_i)
    b = kern.gram_t(zs, data.z)  # kt(z, z_i)
    w = cxla.solve(fac, a.conj().T).conj().T  # rows: a K^-1
    mean = mean0 + w @ resid
    var = kxx - np.real(np.sum(w * a.conj(), axis=1))
    bt = kern.gram_t(data.z)
    comp = ktxx - 2 * np.sum(w * b, axis=1) + np.einsum("pi,ij,pj->p", w, bt, w)
    out = [
        PosteriorPrediction(zz, m, _clamp(float(v)), complex(c), "strict", fac.jitter_used)
        for zz, m, v, c in zip(zs, mean, var, comp)
    ]
    return out if np.ndim(z) else out[0]


def schur_complement(kern: ComplexKernel, data: Dataset) -> np.ndarray:
    """``P = K_yy - Kt_yy conj(K_yy)^-1 conj(Kt_yy)``."""
    kyy = _gram(kern, data)
    ktyy = kern.gram_t(data.z)
    return kyy - ktyy @ np.linalg.solve(kyy.conj(), ktyy.conj())


def predict_wide(
    kern: ComplexKernel,
    data: Dataset,
    z,
    noise_free_prediction: bool = False,
    base_jitter: float = 1e-10,
):
    """
    Widely linear posterior from ``y`` and ``conj(y)``.

    Uses the Schur complement ``P = K_yy - Kt_yy conj(K_yy)^-1 conj(Kt_yy)``;
    the estimator is ``mean = g1 y + g2 conj(y)`` with

    ``g1 = (a - b conj(K_yy)^-1 conj(Kt_yy)) P^-1``,
    ``g2 = (b - a K_yy^-1 Kt_yy) conj(P)^-1``,

    ``a = [k(z, z_i)]``, ``b = [kt(z, z_i)]``. The error variances are
    ``k_zz - g1 a^H - g2 b^H`` and ``kt_zz - g1 b^T - g2 a^T``.

    Raises
    ------
    SchurSingular
        If ``P`` cannot be factored even with jitter.
    """
    if len(data) == 0:
        raise ValueError("the widely linear predictor needs data")
    _check_data(data)
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    prior_noise = 0.0 if noise_free_prediction else data.noise
    kxx = np.real(kern.k(zs, zs)) + prior_noise
    ktxx = kern.kt(zs, zs)

    kyy = _gram(kern, data)
    ktyy = kern.gram_t(data.z)
    fac_k = cxla.cholesky(kyy, base_jitter)
    kinv_kt = cxla.solve(fac_k, ktyy)  # K^-1 Kt
    p = kyy - ktyy @ np.conj(kinv_kt)  # Kt conj(K)^-1 conj(Kt)
    try:
        fac_p = cxla.cholesky(p, base_jitter)
    except FactorizationFailed as exc:
        raise SchurSingular(
            "the Schur complement P is singular: the data are nearly maximally "
            "improper, use the strictly linear predictor"
        ) from exc

    a = kern.gram(zs, data.z)
    b = kern.gram_t(zs, data.z)
    # g1 = (a - b conj(K^-1 Kt)) P^-1 ; g2 = conj of the same structure with roles swapped
    r1 = a - b @ np.conj(kinv_kt)
    r2 = b - a @ kinv_kt
    g1 = cxla.solve(fac_p, r1.conj().T).conj().T
    g2 = np.conj(cxla.solve(fac_p, np.conj(r2).conj().T).conj().T)

    resid = data.y - kern.mean(data.z)
    mean = kern.mean(zs) + g1 @ resid + g2 @ np.conj(resid)
    var = kxx - np.real(np.sum(g1 * a.conj(), axis=1) + np.sum(g2 * b.conj(), axis=1))
    comp = ktxx - np.sum(g1 * b, axis=1) - np.sum(g2 * a, axis=1)
    out = [
        PosteriorPrediction(zz, m, _clamp(float(v)), complex(c), "wide", fac_p.jitter_used)
        for zz, m, v, c in zip(zs, mean, var, comp)
    ]
    return out if np.ndim(z) else out[0]


def log_marginal_likelihood(kern: ComplexKernel, data: Dataset, base_jitter: float = 1e-10):
    """``-(y^H K_yy^-1 y + log det K_yy + n log 2 pi) / 2``."""
    if len(data) == 0:
        raise ValueError("the marginal likelihood needs data")
    fac = cxla.cholesky(_gram(kern, data), base_jitter)
    resid = data.y - kern.mean(data.z)
    quad = float(np.real(np.vdot(resid, cxla.solve(fac, resid))))
    return -0.5 * (quad + cxla.logdet(fac) + len(data) * math.log(2 * math.pi))


def confidence_ellipsoid(p: PosteriorPrediction, eta: float = 3.0) -> ConfidenceEllipsoid:
    """
    Disk ``|w - mean| <= eta * sqrt(variance)`` with magnitude/phase intervals.

    The phase interval is ``angle(mean) +/- arcsin(radius / |mean|)`` when the
    disk excludes the origin and ``None`` (full circle) otherwise.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    radius = eta * math.sqrt(max(p.variance, 0.0))
    mag = abs(p.mean)
    lo, hi = max(0.0, mag - radius), mag + radius
    phase = None
    if lo > 0:
        half = math.asin(radius / mag)
        centre = math.atan2(p.mean.imag, p.mean.real)
        phase = (centre - half, centre + half)
    return ConfidenceEllipsoid(p.mean, radius, eta, (lo, hi), phase)


# --------------------------------------------------------------------------
# hyperparameters


_TRANSFORMS = ("log", "logit", "interval", "fixed")


@dataclass
class KernelFamily:
    """
    A kernel constructor plus named, boxed hyperparameters.

    ``transforms`` picks the unconstrained coordinate of each parameter:
    ``"log"`` (positive), ``"logit"`` (unit interval), ``"interval"`` (logit
    of the box) or ``"fixed"``. Parameters whose box is a single point are
    always fixed.
    """

    names: tuple
    bounds: tuple
    build: callable
    transforms: tuple

    def __post_init__(self):
        if not (len(self.names) == len(self.bounds) == len(self.transforms)):
            raise BadHyperparameter("names, bounds and transforms must align")
        for t in self.transforms:
            if t not in _TRANSFORMS:
                raise BadHyperparameter(f"unknown transform {t!r}")

    def free(self):
        return [
            i
            for i, ((lo, hi), t) in enumerate(zip(self.bounds, self.transforms))
            if t != "fixed" and lo < hi
        ]

    def _fwd(self, i, v):
        lo, hi = self.bounds[i]
        t = self.transforms[i]
        if t == "log":
            return math.log(v)
        if t == "logit":
            return math.log(v / (1 - v))
        u = (v - lo) / (hi - lo)
        u = min(max(u, 1e-12), 1 - 1e-12)
        return math.log(u / (1 - u))

    def _inv(self, i, x):
        lo, hi = self.bounds[i]
        t = self.transforms[i]
        if t == "log":
            v = math.exp(x)
        elif t in ("logit", "interval"):
            s = 0.5 * (1 + math.tanh(0.5 * x))
            v = s if t == "logit" else lo + (hi - lo) * s
        return min(max(v, lo), hi)

    def unconstrained_bounds(self, i):
        lo, hi = self.bounds[i]
        if self.transforms[i] == "interval":
            return (-30.0, 30.0)
        return (self._fwd(i, lo), self._fwd(i, hi))

    def to_theta(self, x, base):
        theta = list(base)
        for xi, i in zip(x, self.free()):
            theta[i] = self._inv(i, xi)
        return theta

    def from_theta(self, theta):
        return np.array([self._fwd(i, theta[i]) for i in self.free()])


def resonance_family() -> KernelFamily:
    """
    ``sigma_g^2 geometric(alpha) + sigma_c^2 cozine(a, omega0)``.

    Parameters ``(sigma_g, alpha, sigma_c, omega0, a)``.
    """

    def build(theta):
        sg, alpha, sc, w0, a = theta
        return SumKernel([(sg**2, GeometricKernel(alpha)), (sc**2, CozineKernel(a, w0))])

    unit = (1e-3, 1 - 1e-3)
    return KernelFamily(
        names=("sigma_g", "alpha", "sigma_c", "omega0", "a"),
        bounds=((1e-6, 1e3), unit, (1e-6, 1e3), (0.0, math.pi), unit),
        build=build,
        transforms=("log", "logit", "log", "interval", "logit"),
    )


def geometric_family(alpha_bounds=(1e-3, 1 - 1e-3), scale_bounds=(1e-6, 1e3)) -> KernelFamily:
    """``sigma^2 geometric(alpha)`` with parameters ``(sigma, alpha)``."""

    def build(theta):
        s, alpha = theta
        return SumKernel([(s**2, GeometricKernel(alpha))])

    return KernelFamily(
        names=("sigma", "alpha"),
        bounds=(tuple(scale_bounds), tuple(alpha_bounds)),
        build=build,
        transforms=("log", "logit"),
    )


@dataclass
class FitResult:
    theta: list
    log_likelihood: float
    trace: list = field(default_factory=list)

    def as_dict(self, family: KernelFamily):
        return dict(zip(family.names, self.theta))


NM_OPTIONS = {"maxiter": 400, "xatol": 1e-8, "fatol": 1e-8}


def fit_hyperparameters(
    family: KernelFamily,
    data: Dataset,
    restarts: int = 10,
    seed: int = 0,
    theta0=None,
    workers: int = 1,
    options: dict | None = None,
) -> FitResult:
    """
    Maximize the log marginal likelihood by restarted Nelder-Mead.

    Restarts start from points drawn uniformly in the unconstrained
    coordinates (within the transformed box) with per-restart streams
    ``default_rng([seed, r])``; ``theta0``, if given, replaces the first
    start. Each trace entry records the start, the end point, the
    likelihood at both, and the optimizer status.
    """
    if restarts < 1:
        raise ValueError("need at least one restart")
    free = family.free()
    base = list(theta0) if theta0 is not None else [0.5 * (lo + hi) for lo, hi in family.bounds]
    opts = dict(NM_OPTIONS, **(options or {}))

    def objective(x):
        theta = family.to_theta(x, base)
        try:
            return -log_marginal_likelihood(family.build(theta), data)
        except (FactorizationFailed, BadHyperparameter, FloatingPointError):
            return 1e300

    if not free:
        theta = list(base)
        ll = -objective(np.zeros(0))
        return FitResult(theta, ll, [{"start": theta, "theta": theta, "log_likelihood": ll}])

    ubounds = [family.unconstrained_bounds(i) for i in free]
    box = [(max(lo, -12.0), min(hi, 12.0)) for lo, hi in ubounds]

    def run(r):
        if r == 0 and theta0 is not None:
            x0 = family.from_theta(theta0)
        else:
            rng = np.random.default_rng([seed, r])
            x0 = np.array([rng.uniform(lo, hi) for lo, hi in box])
        f0 = objective(x0)
        entry = {"restart": r, "start": family.to_theta(x0, base), "start_log_likelihood": -f0}
        try:
            res = scipy.optimize.minimize(
                objective, x0, method="Nelder-Mead", bounds=ubounds, options=opts
            )
            x, fx = (res.x, res.fun) if res.fun <= f0 else (x0, f0)
            entry.update(
                theta=family.to_theta(x, base),
                log_likelihood=-fx,
                success=bool(res.success),
                nit=int(res.nit),
            )
        except Exception as exc:  # noqa: BLE001 - recorded, the other restarts go on
            entry.update(theta=entry["start"], log_likelihood=-f0, success=False, error=repr(exc))
        return entry

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trace = list(pool.map(run, range(restarts)))
    else:
        trace = [run(r) for r in range(restarts)]
    best = max(trace, key=lambda e: e["log_likelihood"])
    return FitResult(list(best["theta"]), float(best["log_likelihood"]), trace)
