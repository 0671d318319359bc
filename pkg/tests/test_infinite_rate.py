import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imub.harmonic import q_sample
from imub.infinite_rate import (ImubParams, TrotterConfig, drift_flow, path_sample, transition_marginal,
                                transition_point, transition_sample, trotter_marginal, trotter_path)
from imub.kernels import BoundaryPoint as B
from imub.verify import ks_against_q, noise_floor

P = ImubParams(1.0, (1.0, 1.0))


def test_params_validation():
    with pytest.raises(ValueError):
        ImubParams(-1.0, (1, 1))
    with pytest.raises(ValueError):
        TrotterConfig(epsilon=2.0, horizon=1.0)
    with pytest.raises(ValueError):
        TrotterConfig(epsilon=0.0, horizon=1.0)


def test_transition_t0_is_identity(rng):
    x = B.axis2(1.7)
    assert transition_point(P, x, 0.0, rng) is x


def test_transition_coaxial_is_deterministic(rng):
    params = ImubParams(0.7, (3.0, 0.0))
    y = transition_sample(params, (1.0, 0.0), 2.0, rng, size=50)
    expected = math.exp(-1.4) * 1.0 + (1 - math.exp(-1.4)) * 3.0
    assert np.allclose(y, [expected, 0.0], rtol=1e-14)


def test_transition_negative_time(rng):
    with pytest.raises(ValueError):
        transition_sample(P, (1.0, 0.0), -1.0, rng)


def test_ergodicity_large_time():
    # c t >= 20: the kernel argument is theta up to e^-20
    params = ImubParams(2.0, (1.0, 2.0))
    x = transition_marginal(params, B.axis1(5.0), 10.0, 100_000, seed=4)
    assert ks_against_q(x, 1.0, 2.0, 0.01).verdict == "pass"


def test_path_sample_trivial_cases(rng):
    s = path_sample(P, B.axis1(2.0), [0.0], rng)
    assert np.array_equal(s.states, [[2.0, 0.0]])
    frozen = path_sample(ImubParams(0.0, (1.0, 1.0)), B.axis2(0.5), [0.0, 1.0, 7.0], rng, n=10)
    assert np.all(frozen.states == [0.0, 0.5])


def test_path_sample_interior_start_jumps_first(rng):
    s = path_sample(P, (1.0, 1.0), [0.0, 1.0], rng, n=100)
    assert s.provenance["initial_jump"]
    assert np.all(s.in_E)


def test_path_sample_rejects_bad_times(rng):
    with pytest.raises(ValueError):
        path_sample(P, B.axis1(1.0), [0.0, 0.0], rng)


def test_chapman_kolmogorov():
    rng = np.random.default_rng(1)
    x = path_sample(P, B.axis1(1.0), [0.0, 0.3, 1.0], rng, n=100_000).states[:, -1]
    u, v = drift_flow(P, B.axis1(1.0), 1.0)
    assert ks_against_q(x, u, v, 0.01).verdict == "pass"


def test_trotter_constant_when_c_zero():
    cfg = TrotterConfig(0.1, 1.0, seed=2)
    s = trotter_path(ImubParams(0.0, (1.0, 1.0)), B.axis1(3.0), cfg, [0.0, 0.25, 1.0], n=20)
    assert np.all(s.states == [3.0, 0.0])


def test_trotter_one_step_equals_kernel():
    # shared stream: the first Trotter step is exactly a draw from p_eps
    eps = 0.3
    a = trotter_path(P, B.axis1(1.0), TrotterConfig(eps, eps, seed=8), [eps], n=1000).states[:, 0]
    w = drift_flow(P, B.axis1(1.0), eps)
    from imub.rng import stream
    b = q_sample(w[0], w[1], stream(8), size=1000)
    assert np.array_equal(a, b)


def test_trotter_off_grid_states_follow_drift():
    cfg = TrotterConfig(0.5, 1.0, seed=3)
    s = trotter_path(P, B.axis1(1.0), cfg, [0.0, 0.25, 0.5], n=200)
    assert np.allclose(s.states[:, 1], drift_flow(P, B.axis1(1.0), 0.25))
    assert not s.in_E[:, 1].any()
    assert s.in_E[:, 2].all()


def test_trotter_record_times_within_horizon():
    with pytest.raises(ValueError):
        trotter_path(P, B.axis1(1.0), TrotterConfig(0.1, 1.0), [0.0, 2.0])


@pytest.mark.parametrize("eps, threshold", [(0.5, 0.01), (1e-3, 0.02)])
def test_trotter_grid_marginal(eps, threshold):
    x = trotter_marginal(P, B.axis1(1.0), eps, 1.0, 100_000, seed=5)
    u, v = drift_flow(P, B.axis1(1.0), 1.0)
    assert ks_against_q(x, u, v, threshold).verdict == "pass"


def test_trotter_marginal_needs_grid_time():
    with pytest.raises(ValueError):
        trotter_marginal(P, B.axis1(1.0), 0.3, 1.0, 10, seed=0)


def test_duality_moment_identity():
    x, z, t = B.axis2(1.0), B.axis1(1.0), math.log(2)
    from imub.kernels import kernel_F_arr
    vals = kernel_F_arr(transition_marginal(P, x, t, 100_000, seed=6), np.array(z.coords))
    ref = math.exp(-1.5) * complex(math.cos(0.5), -math.sin(0.5))
    se = np.std(vals.real) / math.sqrt(vals.size), np.std(vals.imag) / math.sqrt(vals.size)
    assert abs(vals.mean().real - ref.real) <= 4 * se[0]
    assert abs(vals.mean().imag - ref.imag) <= 4 * se[1]


@given(st.floats(0, 3), st.floats(0, 5), st.floats(0, 3), st.floats(0, 3))
def test_drift_flow_semigroup(c, m, s, t):
    params = ImubParams(c, (0.5, 2.0))
    x = np.array([m, 0.0])
    two = drift_flow(params, drift_flow(params, x, s), t)
    assert np.allclose(two, drift_flow(params, x, s + t), rtol=1e-12, atol=1e-12)


def test_grid_marginal_noise_level_for_coarse_eps():
    # grid marginals are exact for any eps: the statistic should be at the noise floor
    x = trotter_marginal(P, B.axis1(1.0), 0.5, 2.0, 50_000, seed=12)
    u, v = drift_flow(P, B.axis1(1.0), 2.0)
    assert ks_against_q(x, u, v, 1.0).statistic <= 1.63 / math.sqrt(50_000)
    assert noise_floor(50_000) < 1.63 / math.sqrt(50_000)
