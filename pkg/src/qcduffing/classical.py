"""Deterministic integration of the classical driven double-well oscillator.

Fixed-step RK4 only: the step must divide the drive period so that
stroboscopic samples fall exactly on t = n*T. Time inside the kernels is
always ``k * dt`` for an integer global step index ``k``.

The tangent (variational) flow gives an independent route to the Lyapunov
spectrum and serves as the oracle for the reset-and-rescale estimator in
:mod:`qcduffing.complexity`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import TrajectoryEscaped
from .params import NumericsConfig, SystemParams

ESCAPE_FACTOR = 100.0


@dataclass
class ClassicalState:
    x: float
    p: float
    t: float = 0.0


@dataclass
class TangentVector:
    dx: float
    dp: float


def default_initial_state(params: SystemParams) -> ClassicalState:
    """Rest at the right-hand well minimum, t = 0."""
    return ClassicalState(1.0 / params.beta, 0.0, 0.0)


@nb.njit(inline="always", cache=True)
def _force(x, p, t, beta, gamma, drive, omega):
    return -2.0 * gamma * p - beta * beta * x * x * x + x + drive * math.cos(omega * t)


@nb.njit(inline="always", cache=True)
def _rk4(x, p, t, dt, beta, gamma, drive, omega):
    h = 0.5 * dt
    k1x = p
    k1p = _force(x, p, t, beta, gamma, drive, omega)
    k2x = p + h * k1p
    k2p = _force(x + h * k1x, k2x, t + h, beta, gamma, drive, omega)
    k3x = p + h * k2p
    k3p = _force(x + h * k2x, k3x, t + h, beta, gamma, drive, omega)
    k4x = p + dt * k3p
    k4p = _force(x + dt * k3x, k4x, t + dt, beta, gamma, drive, omega)
    x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    p += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return x, p


@nb.njit(inline="always", cache=True)
def _rk4_tangent(x, p, u, v, t, dt, beta, gamma, drive, omega):
    # joint RK4 of the flow and its linearization; returns only the tangent
    b2 = beta * beta
    h = 0.5 * dt
    k1x = p
    k1p = _force(x, p, t, beta, gamma, drive, omega)
    l1u = v
    l1v = (1.0 - 3.0 * b2 * x * x) * u - 2.0 * gamma * v
    x2 = x + h * k1x
    p2 = p + h * k1p
    u2 = u + h * l1u
    v2 = v + h * l1v
    k2x = p2
    k2p = _force(x2, p2, t + h, beta, gamma, drive, omega)
    l2u = v2
    l2v = (1.0 - 3.0 * b2 * x2 * x2) * u2 - 2.0 * gamma * v2
    x3 = x + h * k2x
    p3 = p + h * k2p
    u3 = u + h * l2u
    v3 = v + h * l2v
    k3x = p3
    l3u = v3
    l3v = (1.0 - 3.0 * b2 * x3 * x3) * u3 - 2.0 * gamma * v3
    x4 = x + dt * k3x
    u4 = u + dt * l3u
    v4 = v + dt * l3v
    l4u = v4
    l4v = (1.0 - 3.0 * b2 * x4 * x4) * u4 - 2.0 * gamma * v4
    u += dt / 6.0 * (l1u + 2.0 * l2u + 2.0 * l3u + l4u)
    v += dt / 6.0 * (l1v + 2.0 * l2v + 2.0 * l3v + l4v)
    return u, v


@nb.njit(inline="always", cache=True)
def _escaped(x, p, limit):
    return not (abs(x) <= limit) or not math.isfinite(p)


@nb.njit(cache=True)
def _advance(x, p, k0, n, dt, beta, gamma, drive, omega, limit):
    """Advance n steps from global step k0. Returns (x, p, steps_done, ok)."""
    for s in range(n):
        x, p = _rk4(x, p, (k0 + s) * dt, dt, beta, gamma, drive, omega)
        if _escaped(x, p, limit):
            return x, p, s + 1, False
    return x, p, n, True


@nb.njit(cache=True)
def _advance_record(x, p, k0, n_records, every, dt, beta, gamma, drive, omega, limit, xs, ps):
    k = k0
    for r in range(n_records):
        for s in range(every):
            x, p = _rk4(x, p, k * dt, dt, beta, gamma, drive, omega)
            k += 1
            if _escaped(x, p, limit):
                return x, p, k - k0, False
        xs[r] = x
        ps[r] = p
    return x, p, k - k0, True


@nb.njit(cache=True)
def _advance_pair(xa, pa, xb, pb, k0, n, dt, beta, gamma, drive, omega, limit):
    for s in range(n):
        t = (k0 + s) * dt
        xa, pa = _rk4(xa, pa, t, dt, beta, gamma, drive, omega)
        xb, pb = _rk4(xb, pb, t, dt, beta, gamma, drive, omega)
        if _escaped(xa, pa, limit) or _escaped(xb, pb, limit):
            return xa, pa, xb, pb, s + 1, False
    return xa, pa, xb, pb, n, True


@nb.njit(cache=True)
def _tangent_spectrum(x, p, spp, n_periods, transient, dt, beta, gamma, drive, omega, limit):
    # two tangent vectors, Gram-Schmidt once per period
    u1, v1, u2, v2 = 1.0, 0.0, 0.0, 1.0
    s1 = 0.0
    s2 = 0.0
    k = 0
    for n in range(n_periods):
        for s in range(spp):
            t = k * dt
            u1, v1 = _rk4_tangent(x, p, u1, v1, t, dt, beta, gamma, drive, omega)
            u2, v2 = _rk4_tangent(x, p, u2, v2, t, dt, beta, gamma, drive, omega)
            x, p = _rk4(x, p, t, dt, beta, gamma, drive, omega)
            k += 1
            if _escaped(x, p, limit):
                return s1, s2, n, False
        n1 = math.sqrt(u1 * u1 + v1 * v1)
        u1 /= n1
        v1 /= n1
        proj = u1 * u2 + v1 * v2
        u2 -= proj * u1
        v2 -= proj * v1
        n2 = math.sqrt(u2 * u2 + v2 * v2)
        u2 /= n2
        v2 /= n2
        if n >= transient:
            s1 += math.log(n1)
            s2 += math.log(n2)
    return s1, s2, n_periods, True


def _args(params: SystemParams):
    return params.beta, params.gamma, params.drive, params.omega, ESCAPE_FACTOR / params.beta


def _escape_error(t):
    return TrajectoryEscaped(f"trajectory escaped (|x| > 100/beta or non-finite) at t={t:.6g}", t=t)


def classical_derivative(state: ClassicalState, params: SystemParams) -> tuple[float, float]:
    """Right-hand side (dx/dt, dp/dt) of the equation of motion."""
    b, g, f, w, _ = _args(params)
    return state.p, float(_force(state.x, state.p, state.t, b, g, f, w))


def step_deterministic(state: ClassicalState, params: SystemParams, dt: float) -> ClassicalState:
    """One RK4 step of size dt."""
    b, g, f, w, limit = _args(params)
    x, p = _rk4(state.x, state.p, state.t, dt, b, g, f, w)
    if _escaped(x, p, limit):
        raise _escape_error(state.t + dt)
    return ClassicalState(float(x), float(p), state.t + dt)


def tangent_step(state: ClassicalState, v: TangentVector, params: SystemParams, dt: float) -> TangentVector:
    """Advance a deviation vector one RK4 step along the trajectory through ``state``."""
    b, g, f, w, _ = _args(params)
    du, dv = _rk4_tangent(state.x, state.p, v.dx, v.dp, state.t, dt, b, g, f, w)
    return TangentVector(float(du), float(dv))


def _step_index(t: float, dt: float) -> int:
    k = round(t / dt)
    if abs(k * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"state time {t} is not on the integration grid (dt={dt})")
    return k


def integrate(
    state: ClassicalState,
    params: SystemParams,
    numerics: NumericsConfig = NumericsConfig(),
    n_periods: float = 1,
    samples_per_period: int = 32,
):
    """Integrate and record (t, x, p) ``samples_per_period`` times per period.

    Returns ``(times, xs, ps, final_state)``; the initial point is included.
    """
    spp = numerics.steps_per_period
    if spp % samples_per_period:
        raise ValueError("samples_per_period must divide steps_per_period")
    every = spp // samples_per_period
    n_records = int(round(n_periods * samples_per_period))
    dt = params.period / spp
    k0 = _step_index(state.t, dt)
    xs = np.empty(n_records + 1)
    ps = np.empty(n_records + 1)
    xs[0], ps[0] = state.x, state.p
    b, g, f, w, limit = _args(params)
    x, p, done, ok = _advance_record(state.x, state.p, k0, n_records, every, dt, b, g, f, w, limit, xs[1:], ps[1:])
    if not ok:
        raise _escape_error((k0 + done) * dt)
    times = (k0 + every * np.arange(n_records + 1)) * dt
    return times, xs, ps, ClassicalState(float(x), float(p), (k0 + done) * dt)


def stroboscopic(
    state: ClassicalState,
    params: SystemParams,
    numerics: NumericsConfig = NumericsConfig(),
    n_periods: int = 1,
):
    """(x, p) at the end of each of the next ``n_periods`` drive periods."""
    _, xs, ps, final = integrate(state, params, numerics, n_periods, samples_per_period=1)
    return xs[1:], ps[1:], final


def advance(state: ClassicalState, params: SystemParams, n_steps: int, dt: float) -> ClassicalState:
    b, g, f, w, limit = _args(params)
    k0 = _step_index(state.t, dt)
    x, p, done, ok = _advance(state.x, state.p, k0, n_steps, dt, b, g, f, w, limit)
    if not ok:
        raise _escape_error((k0 + done) * dt)
    return ClassicalState(float(x), float(p), (k0 + n_steps) * dt)


def tangent_spectrum(
    params: SystemParams,
    numerics: NumericsConfig = NumericsConfig(),
    n_periods: int = 1000,
    transient_periods: int = 100,
    state: ClassicalState | None = None,
) -> tuple[float, float]:
    """Both Lyapunov exponents (natural log, per unit time) from the tangent flow."""
    if n_periods <= transient_periods:
        raise ValueError("n_periods must exceed transient_periods")
    if state is None:
        state = default_initial_state(params)
    if state.t != 0.0:
        raise ValueError("tangent_spectrum starts from t = 0")
    spp = numerics.steps_per_period
    dt = params.period / spp
    b, g, f, w, limit = _args(params)
    s1, s2, n, ok = _tangent_spectrum(state.x, state.p, spp, n_periods, transient_periods, dt, b, g, f, w, limit)
    if not ok:
        raise _escape_error(n * params.period)
    span = (n_periods - transient_periods) * params.period
    return s1 / span, s2 / span


class ClassicalEngine:
    """Pair stepper used by the Lyapunov protocol (no noise)."""

    name = "classical"
    stochastic = False

    def __init__(self, params: SystemParams, numerics: NumericsConfig = NumericsConfig()):
        self.params = params
        self.steps_per_period = numerics.steps_per_period
        self.dt = params.period / self.steps_per_period

    def default_delta0(self) -> float:
        return 1e-6 / self.params.beta

    def initial_state(self) -> np.ndarray:
        return np.array([1.0 / self.params.beta, 0.0])

    def centroid(self, s: np.ndarray) -> tuple[float, float]:
        return float(s[0]), float(s[1])

    def advance_pair(self, a: np.ndarray, b: np.ndarray, k0: int, n: int, stream=None):
        bt, g, f, w, limit = _args(self.params)
        xa, pa, xb, pb, done, ok = _advance_pair(a[0], a[1], b[0], b[1], k0, n, self.dt, bt, g, f, w, limit)
        if not ok:
            raise _escape_error((k0 + done) * self.dt)
        return np.array([xa, pa]), np.array([xb, pb])

    def advance(self, a: np.ndarray, k0: int, n: int, stream=None) -> np.ndarray:
        bt, g, f, w, limit = _args(self.params)
        x, p, done, ok = _advance(a[0], a[1], k0, n, self.dt, bt, g, f, w, limit)
        if not ok:
            raise _escape_error((k0 + done) * self.dt)
        return np.array([x, p])

    def displace(self, s: np.ndarray, dx: float, dp: float) -> np.ndarray:
        out = s.copy()
        out[0] += dx
        out[1] += dp
        return out

    def reset_perturbed(self, fid, per, delta0, distance, direction):
        return fid + (delta0 / distance) * (per - fid)
