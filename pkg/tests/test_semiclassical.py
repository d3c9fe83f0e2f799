import logging
import math

import numpy as np
import pytest

from oracles import inverted_moments
from qcduffing import classical as cl
from qcduffing import semiclassical as sc
from qcduffing.errors import TrajectoryEscaped
from qcduffing.noise import NoiseStream
from qcduffing.params import NumericsConfig, SystemParams

P = SystemParams(0.5, 0.1)


def literal_rates(x, p, mu, ka, r, t, beta, gamma, g=0.3, omega=1.0):
    return (
        p,
        -(beta**2) * (x**3 + 3 * mu * x) + x - 2 * gamma * p + (g / beta) * math.cos(omega * t),
        2 * r + 2 * gamma * (mu - mu**2 - r**2 + 0.25),
        2 * r * (1 - 3 * beta**2 * x**2) + 2 * gamma * (-ka - ka**2 - r**2 + 0.25),
        mu * (1 - 3 * beta**2 * x**2) + ka - 2 * gamma * r * (mu + ka),
    )


def test_drift_matches_equations():
    s = sc.SemiclassicalState(1.2, -0.3, 0.7, 0.4, 0.1, t=0.9)
    got = sc.semiclassical_drift(s, P)
    assert got == pytest.approx(literal_rates(1.2, -0.3, 0.7, 0.4, 0.1, 0.9, 0.5, 0.1), rel=1e-14)


def test_moment_rates_helper():
    assert sc.moment_rates(0.5, 0.5, 0.0) == pytest.approx((0.0, 0.0, 1.0))


def test_noise_vanishes_for_coherent_moments():
    s = sc.default_initial_state(P)
    assert (s.x, s.p, s.mu, s.kappa, s.r) == (2.0, 0.0, 0.5, 0.5, 0.0)
    assert np.all(sc.semiclassical_noise_coefficients(s, P) == 0.0)
    m = sc.semiclassical_noise_coefficients(sc.SemiclassicalState(0, 0, 0.9, 0.6, 0.2), P)
    g2 = 2 * math.sqrt(0.1)
    assert m == pytest.approx(np.array([[g2 * 0.4, -g2 * 0.2], [g2 * 0.2, -g2 * 0.1]]))


def test_coherent_start_linear_system_closed_form():
    # beta = 0, gamma = 0: dmu = dkappa = 2R, dR = mu + kappa
    out = sc.evolve_moments(0.5, 0.5, 0.0, 3.0, 1e-4)
    t = 1e-4 * np.arange(1, len(out) + 1)
    mu, ka, r = inverted_moments(t)
    assert np.allclose(out[:, 0], mu, rtol=1e-6)
    assert np.allclose(out[:, 1], ka, rtol=1e-6)
    assert np.allclose(out[:, 2], r, rtol=1e-6, atol=1e-12)


def test_invariant_conserved_in_bounded_regime():
    # centroid frozen at a well minimum, where the spread dynamics oscillate
    out = sc.evolve_moments(0.5, 0.5, 0.0, 100.0, 1e-3, x=4.0, beta=0.25)
    inv = out[:, 2] ** 2 - out[:, 0] * out[:, 1]
    assert np.max(np.abs(inv + 0.25)) / 0.25 < 1e-6


def test_deterministic_given_stream():
    num = NumericsConfig(sde_steps_per_period=2048)
    a = sc.integrate(sc.default_initial_state(P), P, NoiseStream(4), num, 2, 8)[1]
    b = sc.integrate(sc.default_initial_state(P), P, NoiseStream(4), num, 2, 8)[1]
    c = sc.integrate(sc.default_initial_state(P), P, NoiseStream(5), num, 2, 8)[1]
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


def test_step_consumes_one_increment():
    s = NoiseStream(1)
    sc.step_sde(sc.default_initial_state(P), P, s, 1e-3)
    assert s.counter == 1


def test_kernel_matches_single_steps():
    num = NumericsConfig(sde_steps_per_period=1024)
    _, rec, final = sc.integrate(sc.default_initial_state(P), P, NoiseStream(8), num, 1, 64)
    s, stream = sc.default_initial_state(P), NoiseStream(8)
    for _ in range(1024):
        s = sc.step_sde(s, P, stream, P.period / 1024)
    assert s.as_array()[:5] == pytest.approx(final.as_array()[:5], rel=1e-10, abs=1e-12)


def test_strong_convergence_on_fixed_path():
    p = SystemParams(0.5, 0.2)
    n_fine = 2048
    horizon = 0.25 * p.period
    fine = NoiseStream(21).increments(n_fine, horizon / n_fine)

    def run(level):
        m = n_fine >> level
        dw = fine.reshape(m, -1).sum(axis=1)
        s = sc.SemiclassicalState(2.0, 0.0, 0.9, 0.6, 0.1)
        for k in range(m):
            s = sc.step_sde(s, p, None, horizon / m, increment=dw[k])
        return s.as_array()[:5]

    ref = run(0)
    errs = [np.linalg.norm(run(level) - ref) for level in (5, 4, 3)]
    assert errs[0] > errs[1] > errs[2]


def test_tracks_classical_in_weak_damping_limit():
    p = SystemParams(1e-5, 1e-6)
    _, st, _ = sc.integrate(sc.default_initial_state(p), p, NoiseStream(1), NumericsConfig(), 10, 8)
    _, xs, ps, _ = cl.integrate(cl.default_initial_state(p), p, NumericsConfig(), 10, 8)
    # separation measured in units of the well distance 1/beta
    assert np.max(np.abs(st[:, 0] - xs)) * p.beta < 1e-2
    assert np.max(np.abs(st[:, 1] - ps)) * p.beta < 1e-2


def test_requires_dissipation():
    with pytest.raises(ValueError):
        sc.step_sde(sc.default_initial_state(P), P.with_(gamma=0.0), NoiseStream(0), 1e-3)


def test_escape_and_negative_spread(caplog):
    with pytest.raises(TrajectoryEscaped):
        sc.step_sde(sc.SemiclassicalState(1e4, 0.0), P, NoiseStream(0), 1e-3)
    with caplog.at_level(logging.WARNING, logger="qcduffing.semiclassical"):
        s = sc.step_sde(sc.SemiclassicalState(1.0, 0.0, mu=-0.5), P, NoiseStream(0), 1e-3)
    assert s.mu < 0  # reported, not clamped
    assert "non-positive" in caplog.text


def test_engine_reset_rescales_full_deviation():
    e = sc.SemiclassicalEngine(P)
    fid = e.initial_state()
    per = fid + np.array([1e-3, 2e-3, 3e-3, 0.0, -1e-3])
    out = e.reset_perturbed(fid, per, 1e-6, 1.0, None)
    assert np.allclose(out - fid, 1e-6 * (per - fid))
    assert e.default_delta0() == pytest.approx(2e-6)
