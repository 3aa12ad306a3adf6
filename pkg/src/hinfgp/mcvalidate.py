"""
Monte Carlo estimates used to validate the analytic results.

Paths are sampled on a uniform grid of 4096 points over ``[0, pi]`` (the
gain of a conjugate-symmetric process is even, so this half range carries
all the information). An upcrossing is a grid step with
``gain[i] <= gamma < gain[i+1]``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from hinfgp.kernels import ComplexKernel, SequenceSpec, StationaryKernel
from hinfgp.regression import Dataset, confidence_ellipsoid, predict_strict
from hinfgp.sampling import (
    CROSSING_GRID_SIZE,
    FrequencyGrid,
    count_upcrossings,
    draw_coefficient_block,
    evaluate_series,
    realization_rng,
)

BATCH = 2000


@dataclass(frozen=True)
class MCReport:
    quantity: str
    estimate: float
    standard_error: float
    n: int
    seed: int
    gamma: float | None = None


@dataclass
class GainStudy:
    """Per-level Monte Carlo reports from one shared set of sample paths."""

    gammas: np.ndarray
    upcrossings: list
    excursion: list
    start_violation: list
    #: 1{sup > gamma} <= 1{start > gamma} + N_gamma held on every path
    pathwise_markov: bool


def _as_kernel(spec) -> ComplexKernel:
    return StationaryKernel(spec) if isinstance(spec, SequenceSpec) else spec


def gain_study(
    spec,
    gammas,
    n: int,
    seed: int,
    grid_size: int = CROSSING_GRID_SIZE,
    workers: int = 1,
    batch: int = BATCH,
) -> GainStudy:
    """Sample ``n`` paths once and estimate E[N_gamma], P_gamma and the start term."""
    if n < 1:
        raise ValueError("need at least one sample")
    kern = _as_kernel(spec)
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    grid = FrequencyGrid.uniform(grid_size, 0.0, math.pi)
    starts = list(range(0, n, batch))

    def run(start):
        count = min(batch, n - start)
        gain = np.abs(evaluate_series(draw_coefficient_block(kern, seed, start, count), grid))
        peak = gain.max(axis=1)
        out = np.zeros((gammas.size, 5))
        ok = True
        for j, g in enumerate(gammas):
            ups = count_upcrossings(gain, g)
            exceed = peak > g
            first = gain[:, 0] > g
            out[j] = (ups.sum(), (ups.astype(float) ** 2).sum(), exceed.sum(), first.sum(), 0)
            ok &= bool(np.all(exceed <= first + ups))
        return out, ok

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    sums = sum(p for p, _ in parts)
    pathwise = all(ok for _, ok in parts)

    ups, exc, first = [], [], []
    for j, g in enumerate(gammas):
        s1, s2, n_exc, n_first, _ = sums[j]
        mean = s1 / n
        var = max(s2 / n - mean**2, 0.0)
        ups.append(MCReport("upcrossings", mean, math.sqrt(var / n), n, seed, float(g)))
        exc.append(_binomial("excursion_probability", n_exc, n, seed, g))
        first.append(_binomial("start_violation", n_first, n, seed, g))
    return GainStudy(gammas, ups, exc, first, pathwise)


def _binomial(name, hits, n, seed, gamma=None):
    p = float(hits) / n
    return MCReport(name, p, math.sqrt(p * (1 - p) / n), n, seed, None if gamma is None else float(gamma))


def mc_upcrossings(spec, gammas, n: int, seed: int, **kw) -> list[MCReport]:
    """Mean and standard error of the number of upcrossings on ``[0, pi]``."""
    if n < 100:
        raise ValueError("need at least 100 samples")
    return gain_study(spec, gammas, n, seed, **kw).upcrossings


def mc_excursion_probability(spec, gammas, n: int, seed: int, **kw) -> list[MCReport]:
    """Fraction of paths whose largest grid gain exceeds each level."""
    if n < 100:
        raise ValueError("need at least 100 samples")
    return gain_study(spec, gammas, n, seed, **kw).excursion


def mc_ellipsoid_coverage(
    kern: ComplexKernel,
    eta: float,
    trials: int,
    seed: int,
    n_obs: int = 8,
    noise: float = 1e-2,
) -> MCReport:
    """
    Fraction of trials whose held-out true value lies in the ``eta`` disk.

    Each trial draws a prior path, observes it at ``n_obs`` random
    frequencies in ``(0, pi)`` with proper complex noise, and predicts the
    latent value at one more random frequency with the strictly linear
    estimator.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials")
    hits = 0
    for t in range(trials):
        rng = realization_rng(seed, t)
        h = kern.draw_coefficients(rng)
        omega = rng.uniform(0.0, math.pi, n_obs + 1)
        z = np.exp(1j * omega)
        f = np.exp(-1j * np.outer(omega, np.arange(h.size))) @ h
        e = math.sqrt(noise / 2) * (rng.standard_normal(n_obs) + 1j * rng.standard_normal(n_obs))
        data = Dataset(z[:-1], f[:-1] + e, noise)
        pred = predict_strict(kern, data, z[-1], noise_free_prediction=True)
        hits += confidence_ellipsoid(pred, eta).contains(f[-1])
    return _binomial("ellipsoid_coverage", hits, trials, seed)
