"""
Realizations of H-infinity Gaussian processes on frequency grids.

Every realization ``i`` of a run with seed ``s`` draws from its own stream
``numpy.random.default_rng([s, i])``, so results do not depend on batching or
on the order in which realizations are produced.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from hinfgp.errors import ZeroGain
from hinfgp.kernels import ComplexKernel, CozineKernel, SequenceSpec, StationaryKernel

#: default number of grid points used to detect crossings on sampled paths
CROSSING_GRID_SIZE = 4096
ZERO_GAIN = 1e-14


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing angular frequencies in ``[-pi, pi]``."""

    omega: np.ndarray

    def __post_init__(self):
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        if omega.ndim != 1 or omega.size == 0:
            raise ValueError("a frequency grid needs at least one point")
        if np.any(np.diff(omega) <= 0):
            raise ValueError("grid frequencies must be strictly increasing")
        if omega[0] < -math.pi - 1e-12 or omega[-1] > math.pi + 1e-12:
            raise ValueError("grid frequencies must lie in [-pi, pi]")
        object.__setattr__(self, "omega", omega)

    @classmethod
    def uniform(cls, count: int, lo: float = 0.0, hi: float = math.pi, endpoint=True):
        return cls(np.linspace(lo, hi, count, endpoint=endpoint))

    @classmethod
    def circle(cls, count: int = CROSSING_GRID_SIZE):
        """``count`` uniform points on ``[-pi, pi)``."""
        return cls(-math.pi + 2 * math.pi * np.arange(count) / count)

    @property
    def size(self) -> int:
        return self.omega.size

    def is_conjugate_closed(self, atol=1e-12) -> bool:
        neg = -self.omega[::-1]
        return self.omega.size == neg.size and np.allclose(self.omega, neg, atol=atol)

    def half_fft_size(self) -> int | None:
        """FFT length ``L`` if the grid is ``2 pi k / L`` for ``k = 0..L/2``."""
        m = self.omega.size
        if m < 2:
            return None
        fft_len = 2 * (m - 1)
        expected = 2 * math.pi * np.arange(m) / fft_len
        if np.allclose(self.omega, expected, rtol=0, atol=1e-12):
            return fft_len
        return None


@dataclass
class Realization:
    grid: FrequencyGrid
    values: np.ndarray
    coefficients: np.ndarray | None = None
    seed: int | None = None
    index: int = 0
    extras: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["omega", "re_f", "im_f", "abs_f"])
            for o, v in zip(self.grid.omega, self.values):
                writer.writerow([f"{o:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}", f"{abs(v):.17g}"])


def realization_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def evaluate_series(coeffs, grid: FrequencyGrid, derivative: bool = False) -> np.ndarray:
    """
    Evaluate ``sum_n h_n exp(-1j n W)`` (or its ``W``-derivative) on a grid.

    ``coeffs`` may be one impulse response or a stack of them (last axis is
    ``n``). Grids of the form ``2 pi k / L``, ``k = 0..L/2`` use a real FFT.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    n = np.arange(coeffs.shape[-1])
    fft_len = grid.half_fft_size()
    if fft_len is not None and fft_len >= coeffs.shape[-1]:
        if derivative:
            return np.fft.rfft(coeffs * n, n=fft_len) * -1j
        return np.fft.rfft(coeffs, n=fft_len)
    basis = np.exp(-1j * np.outer(n, grid.omega))
    if derivative:
        basis = basis * (-1j * n[:, None])
    return coeffs @ basis


def _kernel_of(spec_or_kernel) -> ComplexKernel:
    if isinstance(spec_or_kernel, SequenceSpec):
        return StationaryKernel(spec_or_kernel)
    return spec_or_kernel


def draw_coefficient_block(kernel, seed: int, start: int, count: int) -> np.ndarray:
    """Impulse responses of realizations ``start .. start+count-1`` as rows."""
    kernel = _kernel_of(kernel)
    rows = [kernel.draw_coefficients(realization_rng(seed, i)) for i in range(start, start + count)]
    width = max(r.size for r in rows)
    out = np.zeros((count, width))
    for i, r in enumerate(rows):
        out[i, : r.size] = r
    return out


def sample_stationary(spec, grid: FrequencyGrid, seed: int, count: int) -> list[Realization]:
    """
    Draw ``count`` realizations ``f(W) = sum_n a_n w_n exp(-1j n W)``.

    ``spec`` is a :class:`SequenceSpec` or any kernel that can draw impulse
    responses (stationary, geometric, cozine, sums of those).
    """
    block = draw_coefficient_block(spec, seed, 0, count)
    values = evaluate_series(block, grid)
    return [
        Realization(grid, values[i], block[i], seed, i) for i in range(count)
    ]


def cozine_response(a: float, omega0: float, x: float, y: float, z) -> np.ndarray:
    """The rational cozine transfer function for given ``X``, ``Y``."""
    zi = 1.0 / np.asarray(z, dtype=complex)
    num = x - a * (x * math.cos(omega0) - y * math.sin(omega0)) * zi
    den = 1.0 - 2.0 * a * math.cos(omega0) * zi + a**2 * zi**2
    return num / den


def sample_cozine(a: float, omega0: float, seed: int, count: int, grid: FrequencyGrid):
    """Realizations of the cozine process from ``X, Y`` iid standard normal."""
    kern = CozineKernel(a, omega0)
    z = np.exp(1j * grid.omega)
    n = np.arange(kern.impulse_response_length())
    out = []
    for i in range(count):
        x, y = realization_rng(seed, i).standard_normal(2)
        h = a**n * (x * np.cos(n * omega0) + y * np.sin(n * omega0))
        out.append(
            Realization(grid, cozine_response(a, omega0, x, y, z), h, seed, i, {"X": x, "Y": y})
        )
    return out


def sample_kernel(kernel: ComplexKernel, grid: FrequencyGrid, seed: int, count: int):
    if isinstance(kernel, CozineKernel):
        return sample_cozine(kernel.a, kernel.omega0, seed, count, grid)
    return sample_stationary(kernel, grid, seed, count)


def gain_and_derivative(r: Realization):
    """
    Gain ``|f|`` and its angular derivative ``Re(conj(f) f') / |f|``.

    Raises
    ------
    ZeroGain
        If ``|f| < 1e-14`` at a grid point.
    """
    if r.coefficients is None:
        raise ValueError("gain derivative needs the series coefficients")
    f = evaluate_series(r.coefficients, r.grid)
    df = evaluate_series(r.coefficients, r.grid, derivative=True)
    gain = np.abs(f)
    if np.any(gain < ZERO_GAIN):
        raise ZeroGain("gain vanishes on the grid; its derivative is undefined there")
    return gain, np.real(np.conj(f) * df) / gain


def count_upcrossings(gain, gamma):
    """Upcrossings ``gain[i] <= gamma < gain[i+1]`` along the last axis."""
    gain = np.asarray(gain)
    return np.sum((gain[..., :-1] <= gamma) & (gain[..., 1:] > gamma), axis=-1)
