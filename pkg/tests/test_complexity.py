import logging
import math

import numpy as np
import pytest

from qcduffing.classical import ClassicalState, tangent_spectrum
from qcduffing.complexity import (
    LyapunovProtocol,
    complexity,
    lyapunov_estimate,
    perturb,
    phase_distance,
    realization_seed,
)
from qcduffing.noise import NoiseStream, derive_seed
from qcduffing.params import NumericsConfig, SystemParams
from qcduffing.quantum import QuantumState, coherent_state
from qcduffing.semiclassical import SemiclassicalState

P = SystemParams(0.25, 0.13)


def test_complexity_definition():
    assert complexity(0.12, 0.13) == pytest.approx(0.25)
    assert complexity(-0.25, 0.25) == 0.0


def test_protocol_validation():
    for kw in (dict(delta0=0.0), dict(reset_interval=-1.0), dict(n_realizations=0),
               dict(n_periods=100, transient_periods=100), dict(transient_periods=-1)):
        with pytest.raises(ValueError):
            LyapunovProtocol(**kw)


def test_phase_distance():
    a = ClassicalState(1.0, 2.0, 0.5)
    b = ClassicalState(4.0, 6.0, 0.5)
    assert phase_distance(a, b) == 5.0
    with pytest.raises(TypeError):
        phase_distance(a, SemiclassicalState(1.0, 2.0, t=0.5))
    with pytest.raises(ValueError):
        phase_distance(a, ClassicalState(1.0, 2.0, 0.6))
    qa, qb = coherent_state(32, 1.0, 0.0), coherent_state(32, 1.0, 0.5)
    assert phase_distance(qa, qb) == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("state", [ClassicalState(1.0, 0.5), SemiclassicalState(1.0, 0.5, 0.7, 0.6, 0.1),
                                   QuantumState(coherent_state(48, 1.0, 0.5).amplitudes)])
def test_perturb_has_requested_size(state):
    out = perturb(state, 1e-4, NoiseStream(3))
    assert phase_distance(state, out) == pytest.approx(1e-4, rel=1e-6)
    assert perturb(state, 0.0, NoiseStream(3)) is state


def test_periodic_orbit_gives_minus_gamma():
    est = lyapunov_estimate("classical", P.with_(gamma=0.25), LyapunovProtocol(n_periods=300, n_realizations=2))
    assert est.lam == pytest.approx(-0.25, abs=2e-3)
    assert est.K == pytest.approx(0.0, abs=2e-3)
    assert not est.chaotic


def test_chaotic_estimate_close_to_tangent_flow():
    prot = LyapunovProtocol(n_periods=600, n_realizations=1)
    est = lyapunov_estimate("classical", P, prot)
    lam_t, _ = tangent_spectrum(P, NumericsConfig(), 600, 100)
    assert est.lam == pytest.approx(lam_t, rel=0.05)
    assert est.chaotic and est.K > P.gamma


def test_reproducible_and_seed_bookkeeping():
    prot = LyapunovProtocol(n_periods=30, n_realizations=3, transient_periods=5)
    num = NumericsConfig(sde_steps_per_period=2048)
    p = SystemParams(0.5, 0.1)
    a = lyapunov_estimate("semiclassical", p, prot, 42, num)
    b = lyapunov_estimate("semiclassical", p, prot, 42, num)
    assert a.per_realization == b.per_realization
    assert a.seeds == [derive_seed(42, r) for r in range(3)] == [realization_seed(42, r) for r in range(3)]
    arr = np.array(a.per_realization)
    assert a.lam == pytest.approx(arr.mean())
    assert a.stderr == pytest.approx(arr.std(ddof=1) / math.sqrt(3))
    assert a.resets == 3 * 30
    d = a.as_dict()
    assert d["K"] == a.K and d["model"] == "semiclassical"


def test_quantum_estimate_runs():
    prot = LyapunovProtocol(n_periods=12, n_realizations=2, transient_periods=2)
    num = NumericsConfig()
    est = lyapunov_estimate("quantum", SystemParams(1.0, 0.3), prot, 1, num)
    assert math.isfinite(est.lam) and est.delta0 == 1e-4


def test_reset_interval_must_fit_grid():
    with pytest.raises(ValueError):
        lyapunov_estimate("classical", P, LyapunovProtocol(reset_interval=1.0, n_periods=20, n_realizations=1,
                                                           transient_periods=1))


class _CollapsingEngine:
    """Pair stepper whose perturbed copy merges with the fiducial once."""

    dt = 2 * math.pi / 64
    calls = 0

    def default_delta0(self):
        return 1e-3

    def initial_state(self):
        return np.zeros(2)

    def centroid(self, s):
        return float(s[0]), float(s[1])

    def displace(self, s, dx, dp):
        return s + np.array([dx, dp])

    def advance_pair(self, a, b, k0, n, stream):
        self.calls += 1
        if self.calls == 3:
            return a.copy(), a.copy()
        return a, a + 2.0 * (b - a)

    def reset_perturbed(self, fid, per, delta0, distance, direction):
        return fid + (delta0 / distance) * (per - fid)


def test_collapsed_perturbation_is_rekicked(caplog):
    prot = LyapunovProtocol(n_periods=10, n_realizations=1, transient_periods=1)
    with caplog.at_level(logging.WARNING, logger="qcduffing.complexity"):
        est = lyapunov_estimate("classical", P.with_(omega=1.0), prot, engine=_CollapsingEngine())
    assert est.rekicks == 1
    assert "re-kicking" in caplog.text
    assert est.lam == pytest.approx(math.log(2) / P.period)
