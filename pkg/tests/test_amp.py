import dataclasses
import math

import numpy as np
import pytest

from mmvlimits.amp import AmpConfig, amp_run, amp_sweep, run_trial, trial_seed
from mmvlimits.model import PriorParams
from mmvlimits.sim import Setting, generate

P3 = PriorParams(0.1, 3)


def hand_run(y, mats, rho, delta, n_iter):
    """Plain-loop AMP iterations with a scalar-by-scalar joint denoiser."""
    M, J = y.shape
    N = mats[0].shape[1]
    w = [list(y[:, j]) for j in range(J)]
    theta = [0.0] * J
    v = [[rho * delta] * N for _ in range(J)]
    a = [[0.0] * N for _ in range(J)]
    for _ in range(n_iter):
        sig, pseudo = [], []
        for j in range(J):
            F = mats[j]
            q = [(y[mu, j] - w[j][mu]) / (delta + theta[j]) for mu in range(M)]
            theta[j] = sum(v[j]) / N
            w[j] = [sum(F[mu, l] * a[j][l] for l in range(N)) - theta[j] * q[mu] for mu in range(M)]
            s_j = N * (delta + theta[j]) / M
            sig.append(s_j)
            pseudo.append([a[j][l] + s_j * sum(F[mu, l] * (y[mu, j] - w[j][mu]) / (delta + theta[j])
                                               for mu in range(M)) for l in range(N)])
        for l in range(N):
            L = math.log(rho / (1 - rho))
            for j in range(J):
                r, s = pseudo[j][l], sig[j]
                L += -0.5 * math.log((1 + s) / s) + r * r / (2 * s * (1 + s))
            pi = 1 / (1 + math.exp(-L))
            for j in range(J):
                r, s = pseudo[j][l], sig[j]
                m = pi * r / (1 + s)
                a[j][l] = m
                v[j][l] = pi * (r * r / (1 + s) ** 2 + s / (1 + s)) - m * m
    return np.array(a).T


def zero_signal_ensemble(N, delta, R, seed):
    ens = generate("MMV1", P3, delta, R, N, seed)
    y = ens.noise.copy()
    return dataclasses.replace(ens, signal=np.zeros_like(ens.signal), measurements=y)


def test_zero_signal_matches_hand_run():
    ens = zero_signal_ensemble(20, 1e-3, 0.5, seed=3)
    res = amp_run(ens, P3, AmpConfig(t_max=4, epsilon=1e-300))
    assert res.iterations == 3
    np.testing.assert_allclose(res.estimates, hand_run(ens.measurements, ens.matrices, 0.1, 1e-3, 3),
                               rtol=1e-10, atol=1e-14)


def test_hand_run_with_signal():
    ens = generate("MMV2", P3, 1e-2, 0.5, 20, seed=8)
    res = amp_run(ens, P3, AmpConfig(t_max=4, epsilon=1e-300))
    np.testing.assert_allclose(res.estimates, hand_run(ens.measurements, ens.matrices, 0.1, 1e-2, 3),
                               rtol=1e-10, atol=1e-14)


def test_zero_signal_small_noise():
    delta = 1e-4
    res = amp_run(zero_signal_ensemble(1000, delta, 0.2, seed=4), P3)
    assert res.final_mse < 10 * delta


def test_overwhelming_noise_collapses_to_prior():
    ens = generate("MMV2", P3, 1e3, 0.05, 20000, seed=5)
    res = amp_run(ens, P3)
    assert abs(res.final_mse - 0.1) < 0.05 * 0.1


def test_deterministic():
    ens = generate("MMV1", P3, 10 ** -3.5, 0.2, 500, seed=6)
    a, b = amp_run(ens, P3), amp_run(ens, P3)
    np.testing.assert_array_equal(a.estimates, b.estimates)
    np.testing.assert_array_equal(a.mse_trace, b.mse_trace)
    assert a.iterations == b.iterations


def test_trace_lengths_and_onsager_start():
    delta = 10 ** -3.5
    res = amp_run(generate("MMV1", P3, delta, 0.2, 500, seed=7), P3, AmpConfig(t_max=30))
    assert len(res.mse_trace) == len(res.delta_trace) == res.iterations
    assert res.theta_trace.shape == (res.iterations, 3)
    np.testing.assert_allclose(res.theta_trace[0], 0.1 * delta, rtol=1e-12)
    prior_init = amp_run(generate("MMV1", P3, delta, 0.2, 500, seed=7), P3,
                         AmpConfig(t_max=30, init_variance="prior"))
    np.testing.assert_allclose(prior_init.theta_trace[0], 0.1, rtol=1e-12)


def test_stops_at_t_max():
    res = amp_run(generate("MMV1", P3, 10 ** -3.5, 0.2, 300, seed=8), P3, AmpConfig(t_max=5))
    assert res.iterations == 4 and not res.converged


def test_monotone_after_transient_in_region_one():
    # prior-variance start; increases below 1% are finite-N jitter at the fixed point
    config = AmpConfig(init_variance="prior")
    ok = 0
    for k in range(10):
        ens = generate("MMV1", P3, 10 ** -3.5, 0.22, 2000, seed=trial_seed(11, 0, k))
        tail = amp_run(ens, P3, config).mse_trace[3:]
        ok += bool(np.all(np.diff(tail) <= 1e-2 * tail[:-1]))
    assert ok >= 9


def test_rejects_complex_complex_and_mismatch():
    ens = generate("ComplexComplex", PriorParams(0.1, 2), 1e-3, 0.2, 50, seed=0)
    with pytest.raises(ValueError):
        amp_run(ens, PriorParams(0.1, 2))
    with pytest.raises(ValueError):
        amp_run(generate("MMV1", P3, 1e-3, 0.2, 50, seed=0), PriorParams(0.1, 2))


def test_config_validation():
    with pytest.raises(ValueError):
        AmpConfig(t_max=0)
    with pytest.raises(ValueError):
        AmpConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        AmpConfig(init_variance="zero")


def test_settings_share_signal_and_noise():
    seed = trial_seed(0, 2, 5)
    a = run_trial("MMV1", P3, -35.0, 0.2, 200, seed, AmpConfig(t_max=3))
    ens1 = generate("MMV1", P3, 10 ** -3.5, 0.2, 200, seed)
    ens2 = generate("MMV2", P3, 10 ** -3.5, 0.2, 200, seed)
    np.testing.assert_array_equal(ens1.signal, ens2.signal)
    np.testing.assert_array_equal(ens1.noise, ens2.noise)
    assert a.setting == "MMV1"


def test_smoke_sweep():
    cells = amp_sweep(P3, [-35.0], [0.2, 0.24], 200, 1, AmpConfig(t_max=20), Setting.MMV2)
    assert [(c.delta_dB, c.R) for c in cells] == [(-35.0, 0.2), (-35.0, 0.24)]
    for c in cells:
        assert len(c.trials) == 1 and np.isfinite(c.median_mse) and c.se_mse > 0
        assert c.iqr == 0.0
