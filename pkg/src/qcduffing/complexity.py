"""Largest Lyapunov exponent and dynamical complexity K = lambda + gamma.

One protocol serves all three engines. A fiducial state and a kicked copy
are evolved with identical noise; after every reset interval the centroid
separation d is logged as ln(d/delta0)/interval and the perturbed state is
pulled back to distance delta0 along the current deviation. The exponent
is the mean of those rates after the transient, averaged over realizations.

Rates use the natural logarithm so that K = lambda + gamma compares
directly with the phase-space contraction rate gamma. A globally
attracting periodic orbit with complex Floquet multipliers has
lambda = -gamma, i.e. K = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .classical import ClassicalState
from .engines import make_engine
from .noise import KICK_STREAM, NOISE_STREAM, NoiseStream, derive_seed
from .params import NumericsConfig, SystemParams
from .quantum import QuantumState, centroid, displace
from .semiclassical import SemiclassicalState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LyapunovProtocol:
    """Reset-and-average settings. ``None`` picks the engine/period default."""

    delta0: float | None = None
    reset_interval: float | None = None
    n_periods: int = 3000
    n_realizations: int = 8
    transient_periods: int = 100

    def __post_init__(self):
        if self.delta0 is not None and not self.delta0 > 0:
            raise ValueError("delta0 must be > 0")
        if self.reset_interval is not None and not self.reset_interval > 0:
            raise ValueError("reset_interval must be > 0")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.transient_periods < 0 or self.n_periods <= self.transient_periods:
            raise ValueError("need n_periods > transient_periods >= 0")


@dataclass
class LyapunovEstimate:
    lam: float
    stderr: float
    resets: int
    model: str
    params: SystemParams
    protocol: LyapunovProtocol
    base_seed: int
    seeds: list[int] = field(default_factory=list)
    per_realization: list[float] = field(default_factory=list)
    rekicks: int = 0
    delta0: float = float("nan")
    reset_interval: float = float("nan")

    @property
    def K(self) -> float:
        return complexity(self.lam, self.params.gamma)

    @property
    def chaotic(self) -> bool:
        return self.lam > 0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["K"] = self.K
        return d


def complexity(lam: float, gamma: float) -> float:
    """K = lambda + gamma."""
    return lam + gamma


def _position(state):
    if isinstance(state, QuantumState):
        return centroid(state.amplitudes)
    return state.x, state.p


def phase_distance(a, b) -> float:
    """Centroid separation sqrt(dx^2 + dp^2) of two states of the same engine."""
    if type(a) is not type(b):
        raise TypeError("states come from different engines")
    if not math.isclose(a.t, b.t, rel_tol=0, abs_tol=1e-9 * max(1.0, abs(a.t))):
        raise ValueError(f"time mismatch: {a.t} vs {b.t}")
    xa, pa = _position(a)
    xb, pb = _position(b)
    return math.hypot(xa - xb, pa - pb)


def perturb(state, delta0: float, rng: NoiseStream):
    """Kick ``state`` by ``delta0`` in a uniformly random phase-space direction.

    Quantum states receive a small coherent displacement, which moves the
    centroid by delta0 and keeps the state normalized.
    """
    if delta0 == 0:
        return state
    ux, uy = rng.unit_direction()
    dx, dp = delta0 * ux, delta0 * uy
    if isinstance(state, QuantumState):
        return QuantumState(displace(state.amplitudes, dx, dp), state.t)
    if isinstance(state, (ClassicalState, SemiclassicalState)):
        out = type(state)(**asdict(state))
        out.x += dx
        out.p += dp
        return out
    raise TypeError(f"cannot perturb {type(state).__name__}")


def _steps_per_reset(engine, interval: float) -> int:
    n = round(interval / engine.dt)
    if n < 1 or abs(n * engine.dt - interval) > 1e-9 * interval:
        raise ValueError(f"reset interval {interval} is not a multiple of the step {engine.dt}")
    return n


def _intervals(total_time: float, interval: float, what: str) -> int:
    n = round(total_time / interval)
    if abs(n * interval - total_time) > 1e-9 * max(1.0, total_time):
        raise ValueError(f"{what} is not a whole number of reset intervals")
    return n


def realization_seed(base_seed: int, index: int) -> int:
    return derive_seed(base_seed, index)


def _run_realization(engine, seed: int, delta0: float, interval: float, n_intervals: int, n_transient: int):
    noise = NoiseStream(seed, 0, NOISE_STREAM)
    kicks = NoiseStream(seed, 0, KICK_STREAM)
    steps = _steps_per_reset(engine, interval)
    fid = engine.initial_state()
    ux, uy = kicks.unit_direction()
    per = engine.displace(fid, delta0 * ux, delta0 * uy)
    acc = 0.0
    count = 0
    rekicks = 0
    k = 0
    for i in range(n_intervals):
        fid, per = engine.advance_pair(fid, per, k, steps, noise)
        k += steps
        x1, p1 = engine.centroid(fid)
        x2, p2 = engine.centroid(per)
        d = math.hypot(x2 - x1, p2 - p1)
        if d == 0.0:
            rekicks += 1
            log.warning("perturbation collapsed at t=%.6g; re-kicking", k * engine.dt)
            ux, uy = kicks.unit_direction()
            per = engine.displace(fid, delta0 * ux, delta0 * uy)
            continue
        if i >= n_transient:
            acc += math.log(d / delta0)
            count += 1
        per = engine.reset_perturbed(fid, per, delta0, d, ((x2 - x1) / d, (p2 - p1) / d))
    if count == 0:
        raise RuntimeError("no post-transient intervals were accumulated")
    return acc / (count * interval), n_intervals, rekicks


def lyapunov_estimate(
    model: str,
    params: SystemParams,
    protocol: LyapunovProtocol = LyapunovProtocol(),
    base_seed: int = 0,
    numerics: NumericsConfig = NumericsConfig(),
    engine=None,
) -> LyapunovEstimate:
    """Estimate lambda and K for one engine at one parameter point.

    Realization ``r`` uses seed ``derive_seed(base_seed, r)`` for both its
    noise and its kick direction, so reruns are bit-identical.
    """
    if engine is None:
        engine = make_engine(model, params, numerics)
    delta0 = protocol.delta0 if protocol.delta0 is not None else engine.default_delta0()
    interval = protocol.reset_interval if protocol.reset_interval is not None else params.period
    n_intervals = _intervals(protocol.n_periods * params.period, interval, "n_periods")
    n_transient = _intervals(protocol.transient_periods * params.period, interval, "transient_periods")
    seeds = [realization_seed(base_seed, r) for r in range(protocol.n_realizations)]
    lams = []
    resets = 0
    rekicks = 0
    for seed in seeds:
        lam, n_resets, n_rekicks = _run_realization(engine, seed, delta0, interval, n_intervals, n_transient)
        lams.append(lam)
        resets += n_resets
        rekicks += n_rekicks
    arr = np.array(lams)
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return LyapunovEstimate(
        lam=float(arr.mean()),
        stderr=stderr,
        resets=resets,
        model=model,
        params=params,
        protocol=protocol,
        base_seed=base_seed,
        seeds=seeds,
        per_realization=lams,
        rekicks=rekicks,
        delta0=delta0,
        reset_interval=interval,
    )
