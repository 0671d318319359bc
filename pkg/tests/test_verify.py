import cmath
import json
import math

import numpy as np
import pytest

from imub.checks import duality_report
from imub.harmonic import DegenerateStart, q_branch_mass, q_sample
from imub.infinite_rate import ImubParams
from imub.kernels import BoundaryPoint as B
from imub.kernels import kernel_F
from imub.verify import (FAIL, INCONCLUSIVE, PASS, InsufficientSamples, KsReport, convergence_sweep,
                         ks_against_q, ks_statistic, martingale_residual, martingale_samples, mc_estimate,
                         noise_floor, signed_line, sweep_nonincreasing, value_report)

P = ImubParams(1.0, (1.0, 1.0))
JSON_KEYS = {"check", "params", "n", "estimate", "std_error", "reference", "statistic", "threshold", "verdict",
             "seed", "wall_time_ms"}


def test_constant_sampler():
    r = mc_estimate(lambda n: np.full(n, 2.5), 1000, reference=2.5)
    assert r.estimate == 2.5 and r.std_error == (0.0, 0.0) and r.verdict == PASS


def test_no_reference_is_inconclusive():
    assert mc_estimate(np.ones(200)).verdict == INCONCLUSIVE


def test_insufficient_samples():
    with pytest.raises(InsufficientSamples):
        mc_estimate(np.ones(99))
    with pytest.raises(InsufficientSamples):
        mc_estimate(lambda n: np.ones(n), 50, 1.0)


def test_fair_coin():
    rng = np.random.default_rng(0)
    r = mc_estimate(rng.integers(0, 2, 100_000).astype(float), reference=0.5)
    assert r.verdict == PASS
    assert r.std_error[0] == pytest.approx(0.5 / math.sqrt(1e5), rel=1e-2)
    assert mc_estimate(rng.integers(0, 2, 100_000).astype(float), reference=0.52).verdict == FAIL


def test_complex_requires_both_components():
    rng = np.random.default_rng(1)
    vals = rng.normal(size=10_000) + 1j * rng.normal(size=10_000)
    assert mc_estimate(vals, reference=0).verdict == PASS
    assert mc_estimate(vals, reference=0.2j).verdict == FAIL
    assert mc_estimate(vals, reference=0.2).verdict == FAIL


def test_calibration_under_null():
    rng = np.random.default_rng(2)
    passes = sum(mc_estimate(rng.exponential(size=2000), reference=1.0).verdict == PASS for _ in range(100))
    assert passes >= 99


def test_duality_check_passes():
    r = duality_report(P, B.axis2(1.0), B.axis1(1.0), math.log(2), 100_000, seed=3)
    assert complex(r.reference) == pytest.approx(math.exp(-1.5) * cmath.exp(-0.5j), abs=1e-14)
    assert r.verdict == PASS


def test_signed_line():
    pts = [B.axis1(2.0), B.axis2(3.0), B.origin()]
    assert list(signed_line(pts)) == [2.0, -3.0, 0.0]
    assert list(signed_line(np.array([[1.0, 0.5]]))) == [0.5]


def test_ks_exact_sampler():
    rng = np.random.default_rng(4)
    r = ks_against_q(q_sample(1.0, 2.0, rng, 100_000), 1.0, 2.0, 1.63 / math.sqrt(1e5))
    assert r.verdict == PASS and r.n == 100_000


def test_ks_single_point_fails():
    pts = np.tile([1.0, 0.0], (1000, 1))
    r = ks_against_q(pts, 1.0, 1.0)
    assert r.verdict == FAIL and r.statistic >= min(q_branch_mass(1.0, 1.0))


def test_ks_wrong_parameters_fails():
    rng = np.random.default_rng(5)
    r = ks_against_q(q_sample(1.0, 2.0, rng, 100_000), 2.0, 1.0)
    assert r.verdict == FAIL
    assert r.statistic >= 0.4


def test_ks_degenerate_start():
    with pytest.raises(DegenerateStart):
        ks_against_q(np.ones((10, 2)), 1.0, 0.0)


def test_ks_statistic_on_atom():
    w = np.full(100, 2.0)
    assert ks_statistic(w, 2.0, 0.0) == 0.0
    assert ks_statistic(np.r_[w, -w], 2.0, 0.0) == 0.5


def test_martingale_zero_rate_is_exact():
    m = martingale_samples(ImubParams(0.0, (1.0, 1.0)), B.axis1(1.0), B.axis1(1.0), 1.0, 0.1, 500, seed=0)
    assert np.all(m == cmath.exp(-1 + 1j))
    r = martingale_residual(ImubParams(0.0, (1.0, 1.0)), B.axis1(1.0), B.axis1(1.0), 1.0, 0.1, 500)
    assert r.std_error == (0.0, 0.0) and r.verdict == PASS


def test_martingale_time_zero():
    m = martingale_samples(P, B.axis2(2.0), B.axis1(1.0), 0.0, 0.1, 300, seed=0)
    assert np.all(m == kernel_F((0.0, 2.0), (1.0, 0.0)))


def test_martingale_example_reduced():
    r = martingale_residual(P, B.axis1(1.0), B.axis1(1.0), 1.0, 1e-2, 20_000, seed=6)
    assert complex(r.reference) == pytest.approx(cmath.exp(-1 + 1j))
    assert r.verdict == PASS


def test_martingale_trapezoid_agrees_with_exact():
    args = (P, B.axis1(1.0), B.axis2(0.5), 1.0, 0.05, 400)
    a = martingale_samples(*args, seed=7, scheme="exact")
    b = martingale_samples(*args, seed=7, scheme="trapezoid", substeps=64)
    assert np.max(np.abs(a - b)) <= 1e-3


def test_martingale_validation():
    with pytest.raises(ValueError):
        martingale_samples(P, B.axis1(1.0), B.axis1(1.0), 1.0, 0.3, 100, seed=0)
    with pytest.raises(ValueError):
        martingale_samples(P, B.axis1(1.0), B.axis1(1.0), 1.0, 0.1, 100, seed=0, scheme="simpson")


def test_sweep_empty():
    assert convergence_sweep(P, B.axis1(1.0), 1.0, [], 100) == []


def test_sweep_gamma_zero():
    coaxial = convergence_sweep(ImubParams(1.0, (2.0, 0.0)), B.axis1(1.0), 1.0, [0.0], 200)
    assert coaxial[0].verdict == PASS and coaxial[0].statistic == 0.0
    off = convergence_sweep(P, B.axis1(1.0), 1.0, [0.0], 200)
    assert off[0].verdict == FAIL


def test_sweep_requires_increasing():
    with pytest.raises(ValueError):
        convergence_sweep(P, B.axis1(1.0), 1.0, [10.0, 1.0], 100)


def test_sweep_nonincreasing():
    n = 10_000
    reps = [KsReport(s, n, 0.02, PASS) for s in (0.2, 0.05, 0.06, 0.01)]
    assert sweep_nonincreasing(reps)
    reps[2] = KsReport(0.05 + 3 * noise_floor(n), n, 0.02, FAIL)
    assert not sweep_nonincreasing(reps)


def test_json_shape():
    est = mc_estimate(np.arange(200) + 1j, reference=99.5 + 1j, params={"x": B.axis1(1.0)}, seed=3)
    ks = value_report("count", 0, 0, True)
    for r in (est, ks):
        d = r.to_json()
        assert set(d) == JSON_KEYS
        json.dumps(d)
    d = est.to_json()
    assert d["estimate"] == {"re": 99.5, "im": 1.0} and d["params"] == {"x": "axis1:1"}


def test_worker_count_determinism():
    args = (P, B.axis1(1.0), B.axis1(1.0), 0.5, 0.05, 20_000)
    a = martingale_samples(*args, seed=8, workers=1)
    b = martingale_samples(*args, seed=8, workers=3)
    assert np.array_equal(a, b)
