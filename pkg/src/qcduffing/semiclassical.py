"""Second-order moment truncation of the quantum dynamics.

State: centroid (x, p) = (<Q>, <P>) plus the spreads
mu = sigma_QQ, kappa = sigma_PP and r = (sigma_QP + sigma_PQ)/2.

Only the centroid receives noise, through the Ito terms

    dx += 2 sqrt(G) [ (mu - 1/2) dxi_R - r dxi_I ]
    dp += 2 sqrt(G) [ r dxi_R - (kappa - 1/2) dxi_I ]

with dxi = dxi_R + i dxi_I from :mod:`qcduffing.noise`. The spreads evolve
deterministically. A coherent wavepacket (mu = kappa = 1/2, r = 0) feels no
centroid diffusion.

Integrator: Heun predictor-corrector on the drift; the noise is added
Euler-Maruyama style with coefficients frozen at the start of the step, which
keeps the scheme consistent with the Ito reading.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import TrajectoryEscaped
from .noise import NoiseStream, gaussian_pair
from .params import NumericsConfig, SystemParams

log = logging.getLogger(__name__)

ESCAPE_FACTOR = 100.0

# kernel status codes
_OK = 0
_ESCAPED = 1
_NEGATIVE_SPREAD = 2


@dataclass
class SemiclassicalState:
    x: float
    p: float
    mu: float = 0.5
    kappa: float = 0.5
    r: float = 0.0
    t: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.p, self.mu, self.kappa, self.r])


def default_initial_state(params: SystemParams) -> SemiclassicalState:
    """Coherent wavepacket at rest in the right-hand well."""
    return SemiclassicalState(1.0 / params.beta, 0.0, 0.5, 0.5, 0.0, 0.0)


@nb.njit(inline="always", cache=True)
def _drift(x, p, mu, ka, r, t, beta, gamma, drive, omega):
    b2 = beta * beta
    c = 1.0 - 3.0 * b2 * x * x
    fx = p
    fp = -b2 * (x * x * x + 3.0 * mu * x) + x - 2.0 * gamma * p + drive * math.cos(omega * t)
    fmu = 2.0 * r + 2.0 * gamma * (mu - mu * mu - r * r + 0.25)
    fka = 2.0 * r * c + 2.0 * gamma * (-ka - ka * ka - r * r + 0.25)
    fr = mu * c + ka - 2.0 * gamma * r * (mu + ka)
    return fx, fp, fmu, fka, fr


@nb.njit(inline="always", cache=True)
def _heun(x, p, mu, ka, r, t, dt, beta, gamma, drive, omega, dxr, dxi):
    sg = 2.0 * math.sqrt(gamma)
    nx = sg * ((mu - 0.5) * dxr - r * dxi)
    npp = sg * (r * dxr - (ka - 0.5) * dxi)
    a0, a1, a2, a3, a4 = _drift(x, p, mu, ka, r, t, beta, gamma, drive, omega)
    b0, b1, b2, b3, b4 = _drift(
        x + dt * a0 + nx,
        p + dt * a1 + npp,
        mu + dt * a2,
        ka + dt * a3,
        r + dt * a4,
        t + dt,
        beta,
        gamma,
        drive,
        omega,
    )
    h = 0.5 * dt
    return (
        x + h * (a0 + b0) + nx,
        p + h * (a1 + b1) + npp,
        mu + h * (a2 + b2),
        ka + h * (a3 + b3),
        r + h * (a4 + b4),
    )


@nb.njit(inline="always", cache=True)
def _bad(s, limit):
    if not (abs(s[0]) <= limit):
        return True
    for i in range(1, 5):
        if not math.isfinite(s[i]):
            return True
    return False


@nb.njit(cache=True)
def _advance_record(s, k0, n_records, every, dt, beta, gamma, drive, omega, limit, key0, key1, ctr0, out):
    """Advance ``n_records*every`` steps in place, storing s after every ``every`` steps."""
    scale = math.sqrt(0.5 * dt)
    status = _OK
    k = 0
    for rec in range(n_records):
        for _ in range(every):
            z0, z1 = gaussian_pair(key0, key1, ctr0 + np.uint64(k))
            s[0], s[1], s[2], s[3], s[4] = _heun(
                s[0], s[1], s[2], s[3], s[4], (k0 + k) * dt, dt, beta, gamma, drive, omega, scale * z0, scale * z1
            )
            k += 1
            if _bad(s, limit):
                return k, _ESCAPED
            if s[2] <= 0.0 or s[3] <= 0.0:
                status = _NEGATIVE_SPREAD
        for i in range(5):
            out[rec, i] = s[i]
    return k, status


@nb.njit(cache=True)
def _advance_pair(a, b, k0, n, dt, beta, gamma, drive, omega, limit, key0, key1, ctr0):
    scale = math.sqrt(0.5 * dt)
    status = _OK
    for k in range(n):
        z0, z1 = gaussian_pair(key0, key1, ctr0 + np.uint64(k))
        t = (k0 + k) * dt
        dxr = scale * z0
        dxi = scale * z1
        a[0], a[1], a[2], a[3], a[4] = _heun(a[0], a[1], a[2], a[3], a[4], t, dt, beta, gamma, drive, omega, dxr, dxi)
        b[0], b[1], b[2], b[3], b[4] = _heun(b[0], b[1], b[2], b[3], b[4], t, dt, beta, gamma, drive, omega, dxr, dxi)
        if _bad(a, limit) or _bad(b, limit):
            return k + 1, _ESCAPED
        if a[2] <= 0.0 or a[3] <= 0.0:
            status = _NEGATIVE_SPREAD
    return n, status


@nb.njit(cache=True)
def _evolve_moments(mu, ka, r, n, dt, beta, gamma, x, out):
    # frozen centroid: only the spread equations, Heun steps
    for k in range(n):
        _, _, a2, a3, a4 = _drift(x, 0.0, mu, ka, r, 0.0, beta, gamma, 0.0, 0.0)
        _, _, b2, b3, b4 = _drift(x, 0.0, mu + dt * a2, ka + dt * a3, r + dt * a4, 0.0, beta, gamma, 0.0, 0.0)
        mu += 0.5 * dt * (a2 + b2)
        ka += 0.5 * dt * (a3 + b3)
        r += 0.5 * dt * (a4 + b4)
        out[k, 0] = mu
        out[k, 1] = ka
        out[k, 2] = r


def _args(params: SystemParams):
    return params.beta, params.gamma, params.drive, params.omega, ESCAPE_FACTOR / params.beta


def semiclassical_drift(state: SemiclassicalState, params: SystemParams) -> tuple[float, float, float, float, float]:
    """Deterministic rates (dx, dp, dmu, dkappa, dr) per unit time."""
    b, g, f, w, _ = _args(params)
    out = _drift(state.x, state.p, state.mu, state.kappa, state.r, state.t, b, g, f, w)
    return tuple(float(v) for v in out)


def moment_rates(mu, kappa, r, x=0.0, beta=0.0, gamma=0.0):
    """Spread rates (dmu, dkappa, dr) for a given centroid position.

    Accepts beta = 0, where the centroid decouples and the spreads obey a
    linear system that conserves r**2 - mu*kappa when gamma = 0.
    """
    _, _, a, b, c = _drift(x, 0.0, mu, kappa, r, 0.0, beta, gamma, 0.0, 0.0)
    return float(a), float(b), float(c)


def evolve_moments(mu, kappa, r, duration, dt, x=0.0, beta=0.0, gamma=0.0) -> np.ndarray:
    """Integrate the spread equations alone with the centroid frozen at ``x``.

    Returns an array of shape (n_steps, 3) with (mu, kappa, r) after each step.
    """
    n = int(round(duration / dt))
    out = np.empty((n, 3))
    _evolve_moments(float(mu), float(kappa), float(r), n, dt, beta, gamma, x, out)
    return out


def semiclassical_noise_coefficients(state: SemiclassicalState, params: SystemParams) -> np.ndarray:
    """2x2 matrix mapping (dxi_R, dxi_I) onto the centroid increments (dx, dp)."""
    sg = 2.0 * math.sqrt(params.gamma)
    return np.array(
        [
            [sg * (state.mu - 0.5), -sg * state.r],
            [sg * state.r, -sg * (state.kappa - 0.5)],
        ]
    )


def _check(status, k_end, dt, what="semiclassical"):
    if status == _ESCAPED:
        t = k_end * dt
        raise TrajectoryEscaped(f"{what} trajectory escaped or went non-finite at t={t:.6g}", t=t)
    if status == _NEGATIVE_SPREAD:
        log.warning("spread variable mu or kappa became non-positive before t=%.6g", k_end * dt)


def step_sde(
    state: SemiclassicalState,
    params: SystemParams,
    stream: NoiseStream,
    dt: float,
    increment: complex | None = None,
) -> SemiclassicalState:
    """One stochastic Heun step; consumes exactly one complex increment.

    Passing ``increment`` bypasses the stream (for fixed-path refinement).
    """
    params.require_dissipative()
    b, g, f, w, limit = _args(params)
    dxi = stream.next_increment(dt) if increment is None else complex(increment)
    out = _heun(state.x, state.p, state.mu, state.kappa, state.r, state.t, dt, b, g, f, w, dxi.real, dxi.imag)
    s = np.array(out)
    if _bad(s, limit):
        raise TrajectoryEscaped(f"semiclassical trajectory escaped at t={state.t + dt:.6g}", t=state.t + dt)
    if s[2] <= 0 or s[3] <= 0:
        log.warning("spread variable mu or kappa became non-positive at t=%.6g", state.t + dt)
    return SemiclassicalState(*(float(v) for v in s), t=state.t + dt)


def integrate(
    state: SemiclassicalState,
    params: SystemParams,
    stream: NoiseStream,
    numerics: NumericsConfig = NumericsConfig(),
    n_periods: float = 1,
    samples_per_period: int = 32,
):
    """Integrate on the SDE grid, recording ``samples_per_period`` times per period.

    Returns ``(times, states, final_state)`` where ``states`` has columns
    x, p, mu, kappa, r and includes the initial point.
    """
    params.require_dissipative()
    spp = numerics.sde_steps_per_period
    if spp % samples_per_period:
        raise ValueError("samples_per_period must divide sde_steps_per_period")
    every = spp // samples_per_period
    n_records = int(round(n_periods * samples_per_period))
    dt = params.period / spp
    k0 = round(state.t / dt)
    if abs(k0 * dt - state.t) > 1e-9 * max(1.0, abs(state.t)):
        raise ValueError(f"state time {state.t} is not on the SDE grid")
    out = np.empty((n_records + 1, 5))
    s = state.as_array()
    out[0] = s
    b, g, f, w, limit = _args(params)
    k0s, k1s = stream.key
    done, status = _advance_record(
        s, k0, n_records, every, dt, b, g, f, w, limit, k0s, k1s, np.uint64(stream.counter), out[1:]
    )
    stream.advance(done)
    _check(status, k0 + done, dt)
    times = (k0 + every * np.arange(n_records + 1)) * dt
    final = SemiclassicalState(*(float(v) for v in s), t=(k0 + done) * dt)
    return times, out, final


def stroboscopic(state, params, stream, numerics=NumericsConfig(), n_periods=1):
    """(x, p) at the end of each of the next ``n_periods`` periods, plus the final state."""
    _, out, final = integrate(state, params, stream, numerics, n_periods, samples_per_period=1)
    return out[1:, 0].copy(), out[1:, 1].copy(), final


class SemiclassicalEngine:
    """Pair stepper used by the Lyapunov protocol; both members share one noise stream."""

    name = "semiclassical"
    stochastic = True

    def __init__(self, params: SystemParams, numerics: NumericsConfig = NumericsConfig()):
        params.require_dissipative()
        self.params = params
        self.steps_per_period = numerics.sde_steps_per_period
        self.dt = params.period / self.steps_per_period

    def default_delta0(self) -> float:
        return 1e-6 / self.params.beta

    def initial_state(self) -> np.ndarray:
        return default_initial_state(self.params).as_array()

    def centroid(self, s):
        return float(s[0]), float(s[1])

    def advance_pair(self, a, b, k0, n, stream: NoiseStream):
        a = a.copy()
        b = b.copy()
        bt, g, f, w, limit = _args(self.params)
        k0s, k1s = stream.key
        done, status = _advance_pair(a, b, k0, n, self.dt, bt, g, f, w, limit, k0s, k1s, np.uint64(stream.counter))
        stream.advance(done)
        _check(status, k0 + done, self.dt)
        return a, b

    def advance(self, a, k0, n, stream: NoiseStream):
        s = a.copy()
        bt, g, f, w, limit = _args(self.params)
        k0s, k1s = stream.key
        junk = np.empty((1, 5))
        done, status = _advance_record(s, k0, 1, n, self.dt, bt, g, f, w, limit, k0s, k1s, np.uint64(stream.counter), junk)
        stream.advance(done)
        _check(status, k0 + done, self.dt)
        return s

    def displace(self, s, dx, dp):
        out = s.copy()
        out[0] += dx
        out[1] += dp
        return out

    def reset_perturbed(self, fid, per, delta0, distance, direction):
        # rescale the whole deviation (centroid and spreads) by the same factor
        return fid + (delta0 / distance) * (per - fid)
