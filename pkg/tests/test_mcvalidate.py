import math

import numpy as np
import pytest

from hinfgp.kernels import GeometricKernel, SequenceSpec
from hinfgp.mcvalidate import (
    gain_study,
    mc_ellipsoid_coverage,
    mc_excursion_probability,
    mc_upcrossings,
)
from hinfgp.sampling import FrequencyGrid, draw_coefficient_block, evaluate_series

SPEC = SequenceSpec.geometric(0.5)
GAMMAS = [1.0, 2.0, 3.0]


def test_extreme_levels():
    study = gain_study(SPEC, [0.0, 1e-9, 100.0], n=200, seed=0)
    assert study.excursion[0].estimate == 1.0
    assert study.upcrossings[2].estimate == 0 and study.excursion[2].estimate == 0


def test_tiny_level_brute_force():
    grid = FrequencyGrid.uniform(4096, 0, math.pi)
    gain = np.abs(evaluate_series(draw_coefficient_block(GeometricKernel(0.5), 0, 0, 100), grid))
    brute = sum(
        sum(1 for a, b in zip(row[:-1], row[1:]) if a <= 1e-9 < b) for row in gain
    )
    assert brute == 0
    assert mc_upcrossings(SPEC, [1e-9], 100, 0)[0].estimate == 0


def test_counts_match_brute_force():
    grid = FrequencyGrid.uniform(512, 0, math.pi)
    gain = np.abs(evaluate_series(draw_coefficient_block(GeometricKernel(0.5), 3, 0, 100), grid))
    brute = np.mean([sum(1 for a, b in zip(r[:-1], r[1:]) if a <= 2.0 < b) for r in gain])
    assert gain_study(SPEC, [2.0], 100, 3, grid_size=512).upcrossings[0].estimate == pytest.approx(brute)


def test_standard_error_scaling():
    a = mc_upcrossings(SPEC, [1.5], 4000, 1)[0].standard_error
    b = mc_upcrossings(SPEC, [1.5], 8000, 1)[0].standard_error
    assert a / b == pytest.approx(math.sqrt(2), rel=0.2)


def test_excursion_nonincreasing_and_pathwise_markov():
    gammas = np.linspace(0.5, 4, 15)
    study = gain_study(SPEC, gammas, 3000, 2)
    p = [r.estimate for r in study.excursion]
    assert all(a >= b for a, b in zip(p, p[1:]))
    assert study.pathwise_markov
    for e, s, u in zip(study.excursion, study.start_violation, study.upcrossings):
        assert e.estimate <= s.estimate + u.estimate


def test_reproducible_and_schedule_independent():
    a = gain_study(SPEC, GAMMAS, 3000, 7, batch=500)
    b = gain_study(SPEC, GAMMAS, 3000, 7, batch=500, workers=3)
    c = gain_study(SPEC, GAMMAS, 3000, 7, batch=1000)
    for x, y, z in zip(a.upcrossings, b.upcrossings, c.upcrossings):
        assert x.estimate == y.estimate == z.estimate


def test_grid_resolution_sufficient():
    fine = mc_upcrossings(SPEC, GAMMAS, 5000, 4)
    coarse = mc_upcrossings(SPEC, GAMMAS, 5000, 4, grid_size=2048)
    for f, c in zip(fine, coarse):
        assert c.estimate == pytest.approx(f.estimate, rel=0.01)


def test_minimum_sample_sizes():
    with pytest.raises(ValueError):
        mc_upcrossings(SPEC, GAMMAS, 50, 0)
    with pytest.raises(ValueError):
        mc_excursion_probability(SPEC, GAMMAS, 50, 0)
    with pytest.raises(ValueError):
        mc_ellipsoid_coverage(GeometricKernel(0.5), 3.0, 10, 0)


def test_report_invariants():
    for r in mc_excursion_probability(SPEC, GAMMAS, 500, 0):
        assert r.standard_error >= 0 and r.n == 500 and r.seed == 0


def test_ellipsoid_coverage():
    kern = GeometricKernel(0.5)
    r = mc_ellipsoid_coverage(kern, 3.0, 1000, 0)
    se = math.sqrt((8 / 9) * (1 / 9) / r.n)
    assert r.estimate >= 8 / 9 - 3 * se
    assert mc_ellipsoid_coverage(kern, 50.0, 200, 1).estimate == 1.0
    assert 0 <= mc_ellipsoid_coverage(kern, 1.0, 200, 2).estimate <= 1
