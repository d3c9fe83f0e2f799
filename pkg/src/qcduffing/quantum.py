"""Quantum state diffusion in a truncated number basis.

Conventions: [Q, P] = i, Q = (a + a^dag)/sqrt(2), P = i(a^dag - a)/sqrt(2),
so a coherent state has sigma_QQ = sigma_PP = 1/2. The scaled Hamiltonian is

    H = P^2/2 + beta^2 Q^4/4 - Q^2/2 + (G/2)(QP + PQ) - (g/beta) Q cos(omega t)

with the single Lindblad operator L = sqrt(G)(Q + iP) = sqrt(2G) a.

One step applies the Ito increment

    dpsi = f(psi) dt + (L - <L>) psi dxi,
    f(psi) = -i H psi + <L>^* L psi - L^dag L psi / 2 - |<L>|^2 psi / 2,

then renormalizes. The drift is integrated with classic RK4 and the noise
term is frozen at the start of the step. Explicit Euler on the drift is
unconditionally unstable for the top of the truncated spectrum, and the
largest eigenvalue of H grows like beta^2 N^2.

H is banded (half-bandwidth 4), so the kernels work on diagonals rather
than on the dense matrices kept in :class:`OperatorSet`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammaln

from .errors import BasisDimensionError, CapacityError, StabilityError, TrajectoryEscaped
from .noise import NoiseStream, gaussian_pair
from .params import NumericsConfig, SystemParams

DEFAULT_N_MAX = 1536
# the dense operator set holds 9 complex N x N matrices
_MEMORY_BUDGET_BYTES = 2 * 1024**3


def initial_dimension(beta: float) -> int:
    """Starting basis size ceil(8/beta^2) + 32."""
    return math.ceil(8.0 / beta**2) + 32


@dataclass(frozen=True, eq=False)
class OperatorSet:
    n: int
    gamma: float
    a: np.ndarray
    q: np.ndarray
    p: np.ndarray
    q2: np.ndarray
    q4: np.ndarray
    p2: np.ndarray
    qp_pq: np.ndarray
    lindblad: np.ndarray
    ldl: np.ndarray

    @property
    def number(self) -> np.ndarray:
        return np.diag(np.arange(self.n, dtype=np.complex128))


def _hermitian(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def build_operators(n: int, gamma: float = 1.0, n_max: int = DEFAULT_N_MAX) -> OperatorSet:
    """Dense truncated-basis operators. Powers are products of truncated matrices."""
    if n < 2:
        raise ValueError(f"basis dimension must be >= 2, got {n}")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if n > n_max or 9 * 16 * n * n > _MEMORY_BUDGET_BYTES:
        raise CapacityError(f"basis dimension {n} exceeds capacity (n_max={n_max})")
    a = np.diag(np.sqrt(np.arange(1, n, dtype=np.float64)), 1).astype(np.complex128)
    ad = a.conj().T
    q = (a + ad) / math.sqrt(2.0)
    p = 1j * (ad - a) / math.sqrt(2.0)
    q2 = _hermitian(q @ q)
    p2 = _hermitian(p @ p)
    q4 = _hermitian(q2 @ q2)
    qp_pq = _hermitian(q @ p + p @ q)
    lind = math.sqrt(gamma) * (q + 1j * p)
    ldl = _hermitian(lind.conj().T @ lind)
    return OperatorSet(n, gamma, a, q, p, q2, q4, p2, qp_pq, lind, ldl)


def hamiltonian(ops: OperatorSet, params: SystemParams, t: float) -> np.ndarray:
    """H_D + H_R + H_ex at time t (the damping term uses ``params.gamma``)."""
    b2 = params.beta**2
    h = 0.5 * ops.p2 + 0.25 * b2 * ops.q4 - 0.5 * ops.q2
    h = h + 0.5 * params.gamma * ops.qp_pq
    return h - params.drive * math.cos(params.omega * t) * ops.q


@dataclass
class QuantumState:
    amplitudes: np.ndarray
    t: float = 0.0

    @property
    def n(self) -> int:
        return len(self.amplitudes)


def tail_mass(amplitudes: np.ndarray) -> float:
    """Probability in the top 10% of basis levels."""
    n = len(amplitudes)
    m = max(1, math.ceil(0.1 * n))
    tail = amplitudes[n - m :]
    return float(np.vdot(tail, tail).real)


def participation_ratio(amplitudes: np.ndarray) -> float:
    prob = np.abs(amplitudes) ** 2
    return float(1.0 / np.sum(prob * prob))


def _coherent_log_weights(alpha: complex, n: int) -> np.ndarray:
    k = np.arange(n)
    a2 = abs(alpha) ** 2
    if abs(alpha) == 0:
        w = np.full(n, -np.inf)
        w[0] = 0.0
        return w
    return -a2 + 2 * k * math.log(abs(alpha)) - gammaln(k + 1)


def _suggest_dimension(alpha: complex, tol: float) -> int:
    n = 16
    while True:
        w = np.exp(_coherent_log_weights(alpha, n))
        m = math.ceil(0.1 * n)
        if max(0.0, 1.0 - w.sum()) + w[n - m :].sum() < tol:
            return n
        n = int(n * 1.25) + 1


def coherent_state(n: int, x: float, p: float, tol: float = 1e-6) -> QuantumState:
    """Coherent state with <Q> = x and <P> = p, i.e. alpha = (x + ip)/sqrt(2)."""
    alpha = complex(x, p) / math.sqrt(2.0)
    logw = _coherent_log_weights(alpha, n)
    prob = np.exp(logw)
    missing = max(0.0, 1.0 - prob.sum())
    m = math.ceil(0.1 * n)
    if missing + prob[n - m :].sum() >= tol:
        raise BasisDimensionError(
            f"coherent state |alpha|^2={abs(alpha)**2:.4g} does not fit in N={n}",
            suggested_n=_suggest_dimension(alpha, tol),
        )
    phase = np.exp(1j * np.arange(n) * np.angle(alpha)) if alpha != 0 else np.ones(n)
    amp = np.sqrt(prob) * phase
    amp /= np.linalg.norm(amp)
    return QuantumState(amp.astype(np.complex128), 0.0)


def expectation(state: QuantumState, op: np.ndarray) -> float:
    """<psi|A|psi> for a Hermitian A; checks the imaginary part vanishes."""
    psi = state.amplitudes
    if op.shape != (len(psi), len(psi)):
        raise ValueError(f"dimension mismatch: state N={len(psi)}, operator {op.shape}")
    v = np.vdot(psi, op @ psi)
    if abs(v.imag) > 1e-10 * max(1.0, abs(v.real)):
        raise ValueError(f"expectation has imaginary part {v.imag:.3e}; operator not Hermitian?")
    return float(v.real)


def grow_basis(state: QuantumState, ops: OperatorSet, factor: float = 1.5, n_max: int = DEFAULT_N_MAX):
    """Zero-pad into a basis ``factor`` times larger and rebuild the operators."""
    if factor <= 1:
        raise ValueError("growth factor must be > 1")
    n_new = max(ops.n + 1, math.ceil(ops.n * factor))
    if n_new > n_max:
        raise CapacityError(f"basis growth to N={n_new} exceeds n_max={n_max}")
    new_ops = build_operators(n_new, ops.gamma, n_max)
    amp = np.zeros(n_new, dtype=np.complex128)
    amp[: state.n] = state.amplitudes
    return QuantumState(amp, state.t), new_ops


# ---------------------------------------------------------------- kernels


@dataclass(eq=False)
class _Bands:
    """Diagonal storage of the static Hamiltonian and the ladder factors.

    The static part only couples levels n and n + {0, 2, 4}: ``d0`` and
    ``d4`` are real; ``d2`` = d2r + i*d2i picks up the imaginary (QP + PQ)
    contribution. Kernels keep real and imaginary parts in separate arrays,
    which lets LLVM vectorize the band sweeps.
    """

    n: int
    d0: np.ndarray
    d2r: np.ndarray
    d2i: np.ndarray
    d4: np.ndarray
    sq: np.ndarray  # sqrt(i+1) for i < n-1, 0 at the top
    work: np.ndarray = field(repr=False)


def _bands(n: int, params: SystemParams) -> _Bands:
    if n < 5:
        raise ValueError("QSD kernels need N >= 5")
    ops = build_operators(n, 0.0, n_max=max(n, DEFAULT_N_MAX))
    h = 0.5 * ops.p2 + 0.25 * params.beta**2 * ops.q4 - 0.5 * ops.q2 + 0.5 * params.gamma * ops.qp_pq
    for k in (1, 3):
        assert not np.any(np.diagonal(h, k)), "odd diagonals must vanish"
    d0 = np.ascontiguousarray(np.diagonal(h).real)
    d2 = np.zeros(n, dtype=np.complex128)
    d2[: n - 2] = np.diagonal(h, 2)
    d4 = np.zeros(n)
    d4[: n - 4] = np.diagonal(h, 4).real
    sq = np.zeros(n)
    sq[:-1] = np.sqrt(np.arange(1, n))
    return _Bands(n, d0, d2.real.copy(), d2.imag.copy(), d4, sq, np.zeros((12, n)))


# RK4 stays stable for |lambda dt| below ~2.8 on the imaginary axis
_RK4_LIMIT = 2.8


def spectral_bound(bands: _Bands, params: SystemParams) -> float:
    """Gershgorin bound on |eigenvalues| of the drift operator."""
    d2 = np.hypot(bands.d2r, bands.d2i)
    row = np.abs(bands.d0) + d2 + bands.d4
    row[2:] += d2[:-2]
    row[4:] += bands.d4[:-4]
    row += math.sqrt(2.0) * params.drive * bands.sq.max()
    return float(row.max()) + params.gamma * (bands.n - 1)


def check_step(bands: _Bands, params: SystemParams, dt: float):
    """Raise StabilityError when dt exceeds the explicit stability limit."""
    bound = spectral_bound(bands, params)
    if dt * bound > _RK4_LIMIT:
        need = 2 ** math.ceil(math.log2(params.period * bound / _RK4_LIMIT))
        raise StabilityError(
            f"dt={dt:.3g} is unstable at N={bands.n} (spectral bound {bound:.4g}); "
            f"use sde_steps_per_period >= {need}",
            suggested_steps=need,
        )


@nb.njit(cache=True)
def _drift(xr, xi, d0, d2r, d2i, d4, sq, c_drive, gamma2, outr, outi):
    """(outr, outi) = f(psi); returns <L> of the normalized psi as (re, im)."""
    n = xr.shape[0]
    norm2 = 0.0
    er = 0.0
    ei = 0.0
    for i in range(n):
        norm2 += xr[i] * xr[i] + xi[i] * xi[i]
    for i in range(n - 1):
        s = sq[i]
        er += s * (xr[i] * xr[i + 1] + xi[i] * xi[i + 1])
        ei += s * (xr[i] * xi[i + 1] - xi[i] * xr[i + 1])
    sg = math.sqrt(gamma2)
    er *= sg / norm2
    ei *= sg / norm2
    l2 = 0.5 * (er * er + ei * ei)
    hg = 0.5 * gamma2
    cq = c_drive * 0.7071067811865476
    # H psi, band by band
    for i in range(n):
        outr[i] = d0[i] * xr[i]
        outi[i] = d0[i] * xi[i]
    for i in range(n - 2):
        outr[i] += d2r[i] * xr[i + 2] - d2i[i] * xi[i + 2]
        outi[i] += d2r[i] * xi[i + 2] + d2i[i] * xr[i + 2]
        outr[i + 2] += d2r[i] * xr[i] + d2i[i] * xi[i]
        outi[i + 2] += d2r[i] * xi[i] - d2i[i] * xr[i]
    for i in range(n - 4):
        outr[i] += d4[i] * xr[i + 4]
        outi[i] += d4[i] * xi[i + 4]
        outr[i + 4] += d4[i] * xr[i]
        outi[i + 4] += d4[i] * xi[i]
    for i in range(n - 1):
        c = cq * sq[i]
        outr[i] += c * xr[i + 1]
        outi[i] += c * xi[i + 1]
        outr[i + 1] += c * xr[i]
        outi[i + 1] += c * xi[i]
    # f = -i H psi + <L>^* L psi - (L^dag L + |<L>|^2) psi / 2
    for i in range(n):
        fr = outi[i]
        fi = -outr[i]
        if i < n - 1:
            lr = sg * sq[i] * xr[i + 1]
            li = sg * sq[i] * xi[i + 1]
            fr += er * lr + ei * li
            fi += er * li - ei * lr
        d = hg * i + l2
        outr[i] = fr - d * xr[i]
        outi[i] = fi - d * xi[i]
    return er, ei


@nb.njit(cache=True)
def _qsd_step(xr, xi, t, dt, d0, d2r, d2i, d4, sq, drive, omega, gamma2, nr, ni, work, renorm):
    """One step in place; (nr, ni) is the complex increment. False on blow-up."""
    n = xr.shape[0]
    k1r, k1i, k2r, k2i, k3r, k3i, k4r, k4i, tr, ti = (
        work[0], work[1], work[2], work[3], work[4], work[5], work[6], work[7], work[8], work[9]
    )
    c0 = -drive * math.cos(omega * t)
    ch = -drive * math.cos(omega * (t + 0.5 * dt))
    c1 = -drive * math.cos(omega * (t + dt))
    er, ei = _drift(xr, xi, d0, d2r, d2i, d4, sq, c0, gamma2, k1r, k1i)
    hd = 0.5 * dt
    for i in range(n):
        tr[i] = xr[i] + hd * k1r[i]
        ti[i] = xi[i] + hd * k1i[i]
    _drift(tr, ti, d0, d2r, d2i, d4, sq, ch, gamma2, k2r, k2i)
    for i in range(n):
        tr[i] = xr[i] + hd * k2r[i]
        ti[i] = xi[i] + hd * k2i[i]
    _drift(tr, ti, d0, d2r, d2i, d4, sq, ch, gamma2, k3r, k3i)
    for i in range(n):
        tr[i] = xr[i] + dt * k3r[i]
        ti[i] = xi[i] + dt * k3i[i]
    _drift(tr, ti, d0, d2r, d2i, d4, sq, c1, gamma2, k4r, k4i)
    sg = math.sqrt(gamma2)
    d6 = dt / 6.0
    norm2 = 0.0
    for i in range(n):
        # (L - <L>) psi at the start of the step
        if i < n - 1:
            gr = sg * sq[i] * xr[i + 1] - (er * xr[i] - ei * xi[i])
            gi = sg * sq[i] * xi[i + 1] - (er * xi[i] + ei * xr[i])
        else:
            gr = -(er * xr[i] - ei * xi[i])
            gi = -(er * xi[i] + ei * xr[i])
        vr = xr[i] + d6 * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]) + gr * nr - gi * ni
        vi = xi[i] + d6 * (k1i[i] + 2.0 * k2i[i] + 2.0 * k3i[i] + k4i[i]) + gr * ni + gi * nr
        tr[i] = vr
        ti[i] = vi
        norm2 += vr * vr + vi * vi
    if not math.isfinite(norm2) or norm2 == 0.0:
        return False
    s = 1.0 / math.sqrt(norm2) if renorm else 1.0
    for i in range(n):
        xr[i] = tr[i] * s
        xi[i] = ti[i] * s
    return True


@nb.njit(cache=True)
def _advance(xr, xi, k0, n_steps, dt, d0, d2r, d2i, d4, sq, drive, omega, gamma2, key0, key1, ctr0, work, renorm):
    scale = math.sqrt(0.5 * dt)
    for k in range(n_steps):
        z0, z1 = gaussian_pair(key0, key1, ctr0 + np.uint64(k))
        if not _qsd_step(xr, xi, (k0 + k) * dt, dt, d0, d2r, d2i, d4, sq, drive, omega, gamma2,
                         scale * z0, scale * z1, work, renorm):
            return k + 1
    return n_steps


@nb.njit(cache=True)
def _advance_pair(ar, ai, br, bi, k0, n_steps, dt, d0, d2r, d2i, d4, sq, drive, omega, gamma2, key0, key1, ctr0,
                  work, renorm):
    scale = math.sqrt(0.5 * dt)
    for k in range(n_steps):
        z0, z1 = gaussian_pair(key0, key1, ctr0 + np.uint64(k))
        t = (k0 + k) * dt
        nr = scale * z0
        ni = scale * z1
        if not _qsd_step(ar, ai, t, dt, d0, d2r, d2i, d4, sq, drive, omega, gamma2, nr, ni, work, renorm):
            return k + 1
        if not _qsd_step(br, bi, t, dt, d0, d2r, d2i, d4, sq, drive, omega, gamma2, nr, ni, work, renorm):
            return k + 1
    return n_steps


def _split(psi: np.ndarray):
    return np.ascontiguousarray(psi.real), np.ascontiguousarray(psi.imag)


@nb.njit(cache=True)
def _ladder_mean(psi, sq):
    acc = 0j
    for i in range(psi.shape[0] - 1):
        acc += psi[i].conjugate() * sq[i] * psi[i + 1]
    return acc


def centroid(amplitudes: np.ndarray) -> tuple[float, float]:
    """(<Q>, <P>) computed from <a> without building dense matrices."""
    n = len(amplitudes)
    sq = np.zeros(n)
    sq[:-1] = np.sqrt(np.arange(1, n))
    am = _ladder_mean(amplitudes, sq) / np.vdot(amplitudes, amplitudes).real
    return math.sqrt(2.0) * am.real, math.sqrt(2.0) * am.imag


def moments(amplitudes: np.ndarray) -> tuple[float, float, float, float]:
    """(<Q>, <P>, sigma_QQ, sigma_PP) from ladder expectations."""
    n = len(amplitudes)
    psi = amplitudes / np.linalg.norm(amplitudes)
    k = np.arange(n)
    am = np.vdot(psi[:-1], np.sqrt(k[1:]) * psi[1:])
    a2 = np.vdot(psi[:-2], np.sqrt(k[1:-1] * k[2:]) * psi[2:]) if n > 2 else 0j
    nm = float(np.sum(k * np.abs(psi) ** 2))
    q = math.sqrt(2.0) * am.real
    p = math.sqrt(2.0) * am.imag
    # <Q^2> = (2<n> + 1 + 2 Re<a^2>)/2, <P^2> = (2<n> + 1 - 2 Re<a^2>)/2
    qq = nm + 0.5 + a2.real
    pp = nm + 0.5 - a2.real
    # truncated a^dag a a^dag terms: top level contributes [a, a^dag] = 1 - N|N-1><N-1|
    top = n * abs(psi[-1]) ** 2
    qq -= 0.5 * top
    pp -= 0.5 * top
    return q, p, qq - q * q, pp - p * p


def displace(amplitudes: np.ndarray, dx: float, dp: float) -> np.ndarray:
    """Apply exp(alpha a^dag - alpha^* a) with alpha = (dx + i dp)/sqrt(2)."""
    if dx == 0.0 and dp == 0.0:
        return amplitudes.copy()
    n = len(amplitudes)
    alpha = complex(dx, dp) / math.sqrt(2.0)
    a = sp.diags(np.sqrt(np.arange(1, n, dtype=np.float64)), 1, format="csr").astype(np.complex128)
    gen = alpha * a.conj().T - alpha.conjugate() * a
    out = expm_multiply(gen, amplitudes)
    return out / np.linalg.norm(out)


class QuantumEngine:
    """Truncated-basis QSD engine with on-demand basis growth."""

    name = "quantum"
    stochastic = True

    def __init__(
        self,
        params: SystemParams,
        numerics: NumericsConfig = NumericsConfig(),
        n: int | None = None,
        n_max: int = DEFAULT_N_MAX,
        growth_factor: float = 1.5,
        grow: bool = True,
    ):
        self.params = params
        self.grow = grow
        self.numerics = numerics
        self.steps_per_period = numerics.sde_steps_per_period
        self.dt = params.period / self.steps_per_period
        self.n_max = n_max
        self.growth_factor = growth_factor
        self.tail_tolerance = numerics.basis_tail_tolerance
        n0 = initial_dimension(params.beta) if n is None else n
        if n0 > n_max:
            raise CapacityError(f"initial basis N={n0} exceeds n_max={n_max}; beta too small for the quantum engine")
        self._set_dimension(n0)

    def _set_dimension(self, n: int):
        bands = _bands(n, self.params)
        check_step(bands, self.params, self.dt)
        self.n = n
        self.bands = bands

    def default_delta0(self) -> float:
        return 1e-4

    def initial_state(self) -> np.ndarray:
        x0 = 1.0 / self.params.beta
        while True:
            try:
                return coherent_state(self.n, x0, 0.0, self.tail_tolerance).amplitudes
            except BasisDimensionError as exc:
                if exc.suggested_n > self.n_max:
                    raise CapacityError(f"initial state needs N={exc.suggested_n} > n_max") from exc
                self._set_dimension(exc.suggested_n)

    def centroid(self, s):
        return centroid(s)

    def _pad(self, s: np.ndarray) -> np.ndarray:
        if len(s) == self.n:
            return s
        out = np.zeros(self.n, dtype=np.complex128)
        out[: len(s)] = s
        return out

    def _grow_if_needed(self, *states):
        while self.grow and any(tail_mass(s) > self.tail_tolerance for s in states):
            n_new = max(self.n + 1, math.ceil(self.n * self.growth_factor))
            if n_new > self.n_max:
                raise CapacityError(f"basis growth to N={n_new} exceeds n_max={self.n_max}")
            self._set_dimension(n_new)
            states = tuple(self._pad(s) for s in states)
        return states

    def _kernel_args(self):
        p = self.params
        b = self.bands
        return b.d0, b.d2r, b.d2i, b.d4, b.sq, p.drive, p.omega, 2.0 * p.gamma

    def _failed(self, k):
        t = k * self.dt
        return TrajectoryEscaped(f"quantum amplitudes became non-finite at t={t:.6g}", t=t)

    def advance(self, a, k0, n, stream: NoiseStream):
        ar, ai = _split(self._pad(a))
        k0s, k1s = stream.key
        done = _advance(ar, ai, k0, n, self.dt, *self._kernel_args(), k0s, k1s, np.uint64(stream.counter),
                        self.bands.work, self.numerics.renormalize_each_step)
        stream.advance(done)
        if done != n:
            raise self._failed(k0 + done)
        (a,) = self._grow_if_needed(ar + 1j * ai)
        return a

    def advance_pair(self, a, b, k0, n, stream: NoiseStream):
        ar, ai = _split(self._pad(a))
        br, bi = _split(self._pad(b))
        k0s, k1s = stream.key
        done = _advance_pair(ar, ai, br, bi, k0, n, self.dt, *self._kernel_args(), k0s, k1s,
                             np.uint64(stream.counter), self.bands.work, self.numerics.renormalize_each_step)
        stream.advance(done)
        if done != n:
            raise self._failed(k0 + done)
        return self._grow_if_needed(ar + 1j * ai, br + 1j * bi)

    def displace(self, s, dx, dp):
        return displace(s, dx, dp)

    def reset_perturbed(self, fid, per, delta0, distance, direction):
        return displace(fid, delta0 * direction[0], delta0 * direction[1])


def qsd_step(
    state: QuantumState,
    ops: OperatorSet,
    params: SystemParams,
    stream: NoiseStream,
    dt: float,
    renormalize: bool = True,
    increment: complex | None = None,
) -> QuantumState:
    """One Ito QSD step (RK4 drift, Euler-Maruyama noise); consumes one increment.

    An explicit ``increment`` is used instead of drawing from ``stream``,
    which lets convergence studies refine a fixed Brownian path.

    ``params.gamma`` must match the operator set. Basis growth is handled by
    the trajectory drivers, not here.
    """
    if not math.isclose(params.gamma, ops.gamma, rel_tol=0, abs_tol=1e-15):
        raise ValueError("operator set was built for a different gamma")
    if state.n != ops.n:
        raise ValueError("state and operator dimensions differ")
    b = _bands(ops.n, params)
    check_step(b, params, dt)
    xr, xi = _split(state.amplitudes)
    dxi = stream.next_increment(dt) if increment is None else complex(increment)
    ok = _qsd_step(xr, xi, state.t, dt, b.d0, b.d2r, b.d2i, b.d4, b.sq, params.drive, params.omega,
                   2.0 * params.gamma, dxi.real, dxi.imag, b.work, renormalize)
    if not ok:
        raise TrajectoryEscaped(f"quantum amplitudes became non-finite at t={state.t + dt:.6g}", t=state.t + dt)
    return QuantumState(xr + 1j * xi, state.t + dt)


def integrate(
    state: QuantumState,
    params: SystemParams,
    stream: NoiseStream,
    numerics: NumericsConfig = NumericsConfig(),
    n_periods: float = 1,
    samples_per_period: int = 32,
    n_max: int = DEFAULT_N_MAX,
):
    """Integrate a single QSD trajectory and record observables.

    Returns ``(records, final_state)``; ``records`` is a float array with
    columns t, <Q>, <P>, sigma_QQ, sigma_PP, participation_ratio, N and
    includes the initial point. The basis grows when the tail mass exceeds
    ``numerics.basis_tail_tolerance`` at a sampling instant.
    """
    spp = numerics.sde_steps_per_period
    if spp % samples_per_period:
        raise ValueError("samples_per_period must divide sde_steps_per_period")
    every = spp // samples_per_period
    n_records = int(round(n_periods * samples_per_period))
    engine = QuantumEngine(params, numerics, n=state.n, n_max=max(n_max, state.n))
    dt = engine.dt
    k = round(state.t / dt)
    if abs(k * dt - state.t) > 1e-9 * max(1.0, abs(state.t)):
        raise ValueError(f"state time {state.t} is not on the SDE grid")
    psi = state.amplitudes.astype(np.complex128)
    (psi,) = engine._grow_if_needed(psi)
    records = np.empty((n_records + 1, 7))

    def record(i, psi, k):
        q, p, sqq, spp_ = moments(psi)
        records[i] = (k * dt, q, p, sqq, spp_, participation_ratio(psi), len(psi))

    record(0, psi, k)
    for i in range(n_records):
        psi = engine.advance(psi, k, every, stream)
        k += every
        record(i + 1, psi, k)
    return records, QuantumState(psi, k * dt)
