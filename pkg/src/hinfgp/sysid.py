"""
Frequency-domain identification of a resonant plant from time traces.

A continuous second-order plant is discretized by zero-order hold, excited
with white noise, and both traces are passed through a bank of windowed
complex exponential filters. The ratio of output to input filter responses
after the last tap is the empirical transfer function estimate (ETFE).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.signal

from hinfgp.errors import BadParameters, FilterUnderflow
from hinfgp.regression import Dataset

#: constants of the resonance identification experiment
FS = 100.0
OMEGA0 = 20 * math.pi
DAMPING = 0.1
N_FILTERS = 25
TAPS = 1000
WINDOW_WIDTH = 0.25
INPUT_VARIANCE = 1.0 / FS
MEASUREMENT_VARIANCE = 1e-4 / FS
UNDERFLOW = 1e-12
NOISE_TAIL = 100


@dataclass(frozen=True)
class DiscretePlant:
    """``num(z^-1) / den(z^-1)`` with ``den[0] == 1``."""

    num: np.ndarray
    den: np.ndarray
    fs: float = 1.0

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float))
        den = np.atleast_1d(np.asarray(self.den, dtype=float))
        if den[0] == 0:
            raise BadParameters("leading denominator coefficient must be nonzero")
        object.__setattr__(self, "num", num / den[0])
        object.__setattr__(self, "den", den / den[0])
        if np.any(np.abs(self.poles()) >= 1):
            raise BadParameters("plant is not stable")

    def poles(self):
        return np.roots(self.den) if self.den.size > 1 else np.zeros(0)

    def response(self, z):
        zi = 1.0 / np.asarray(z, dtype=complex)
        return np.polyval(self.num[::-1], zi) / np.polyval(self.den[::-1], zi)

    def frequency_response(self, omega):
        return self.response(np.exp(1j * np.asarray(omega, dtype=float)))


def zoh_second_order(omega0: float, damping: float, fs: float) -> DiscretePlant:
    """
    Zero-order hold discretization of ``omega0^2 / (s^2 + 2 xi omega0 s + omega0^2)``.

    Uses the matrix exponential of the augmented state-space matrix.
    """
    if not omega0 > 0 or not 0 < damping < 1 or not fs > 2 * omega0 / (2 * math.pi):
        raise BadParameters(
            f"need omega0 > 0, 0 < xi < 1 and fs above Nyquist, got "
            f"({omega0}, {damping}, {fs})"
        )
    a = np.array([[0.0, 1.0], [-omega0**2, -2 * damping * omega0]])
    b = np.array([[0.0], [omega0**2]])
    aug = np.zeros((3, 3))
    aug[:2, :2] = a
    aug[:2, 2:] = b
    e = scipy.linalg.expm(aug / fs)
    ad, bd = e[:2, :2], e[:2, 2]
    c = np.array([1.0, 0.0])
    # H(z) = c (zI - Ad)^-1 bd; in powers of z^-1
    tr, det = np.trace(ad), np.linalg.det(ad)
    adj = np.array([[ad[1, 1], -ad[0, 1]], [-ad[1, 0], ad[0, 0]]])
    num = np.array([0.0, c @ bd, -(c @ adj @ bd)])
    den = np.array([1.0, -tr, det])
    return DiscretePlant(num, den, fs)


def simulate(plant: DiscretePlant, u) -> np.ndarray:
    """Difference-equation response from zero initial conditions."""
    return scipy.signal.lfilter(plant.num, plant.den, np.asarray(u, dtype=float))


@dataclass(frozen=True)
class FilterBankConfig:
    centers: tuple = ()
    taps: int = TAPS
    width: float = WINDOW_WIDTH

    def __post_init__(self):
        centers = self.centers or tuple(np.linspace(0.05 * math.pi, 0.95 * math.pi, N_FILTERS))
        c = np.asarray(centers, dtype=float)
        if np.any(c <= 0) or np.any(c >= math.pi) or np.unique(c).size != c.size:
            raise BadParameters("filter centers must be distinct and inside (0, pi)")
        object.__setattr__(self, "centers", tuple(float(x) for x in c))
        if self.taps < 1:
            raise BadParameters("taps must be positive")

    def window(self) -> np.ndarray:
        n = np.arange(self.taps)
        half = self.taps // 2
        return np.exp(-0.5 * (self.width * (n - half) / self.taps) ** 2)

    def filters(self) -> np.ndarray:
        n = np.arange(self.taps)
        return np.exp(1j * np.outer(self.centers, n)) * self.window()


@dataclass
class ETFEResult:
    dataset: Dataset
    running: np.ndarray = field(repr=False)
    noise_estimate: float = 0.0


def _filter_outputs(h, x):
    return np.array([np.convolve(hi, x)[: x.size] for hi in h])


def etfe(cfg: FilterBankConfig, u, y, noise: float | None = None) -> ETFEResult:
    """
    Filter-bank ETFE read out at sample ``taps - 1``.

    If ``noise`` is not given it is estimated as the mean, over filters, of
    the variance of the running ratio ``y_i(n) / u_i(n)`` over the last 100
    samples before readout.

    Raises
    ------
    FilterUnderflow
        If some input filter output is below ``1e-12`` in magnitude at readout.
    """
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    if u.size < cfg.taps or y.size != u.size:
        raise BadParameters("need equally long traces of at least `taps` samples")
    h = cfg.filters()
    ui = _filter_outputs(h, u)
    yi = _filter_outputs(h, y)
    t = cfg.taps - 1
    if np.any(np.abs(ui[:, t]) < UNDERFLOW):
        bad = np.flatnonzero(np.abs(ui[:, t]) < UNDERFLOW)
        raise FilterUnderflow(f"input excitation too weak at filters {bad.tolist()}")
    obs = yi[:, t] / ui[:, t]
    lo = max(0, t - NOISE_TAIL + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        running = yi[:, lo : t + 1] / ui[:, lo : t + 1]
    if noise is None:
        spread = running - running.mean(axis=1, keepdims=True)
        noise = float(np.nanmean(np.mean(np.abs(spread) ** 2, axis=1)))
    z = np.exp(1j * np.asarray(cfg.centers))
    return ETFEResult(Dataset(z, obs, noise), running, noise)


@dataclass
class Experiment:
    dataset: Dataset
    truth_omega: np.ndarray
    truth: np.ndarray
    plant: DiscretePlant
    u: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)


def run_experiment(
    seed: int,
    cfg: FilterBankConfig | None = None,
    noise: float | None = None,
    n_truth: int = 200,
    length: int | None = None,
    measurement_variance: float = MEASUREMENT_VARIANCE,
) -> Experiment:
    """
    Simulate the resonance identification experiment.

    White input of variance ``1/fs`` drives the ZOH plant; input and output
    traces are observed with white noise of variance ``1e-4/fs`` and turned
    into an ETFE.
    """
    cfg = cfg or FilterBankConfig()
    plant = zoh_second_order(OMEGA0, DAMPING, FS)
    n = length or cfg.taps
    rng = np.random.default_rng(seed)
    u = math.sqrt(INPUT_VARIANCE) * rng.standard_normal(n)
    y = simulate(plant, u)
    u_obs = u + math.sqrt(measurement_variance) * rng.standard_normal(n)
    y_obs = y + math.sqrt(measurement_variance) * rng.standard_normal(n)
    est = etfe(cfg, u_obs, y_obs, noise)
    omega = np.linspace(0.0, math.pi, n_truth)
    return Experiment(est.dataset, omega, plant.frequency_response(omega), plant, u_obs, y_obs)
