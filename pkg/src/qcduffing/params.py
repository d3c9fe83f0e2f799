"""Dimensionless parameters of the driven, damped double-well oscillator.

All engines work in scaled units where the equation of motion reads

    x'' + 2*gamma*x' + beta**2 * x**3 - x = (g / beta) * cos(omega * t)

``beta`` plays the role of an effective Planck constant
(beta**2 = hbar / (m l**2 omega_0)); small beta is the classical limit and
the wells sit at x = +-1/beta.

The reference drive frequency is inferred rather than given: stroboscopic
sampling at t = 2*n*pi implies a drive period of 2*pi, so ``omega``
defaults to 1.0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

DEFAULT_G = 0.3
DEFAULT_OMEGA = 1.0


@dataclass(frozen=True)
class SystemParams:
    beta: float
    gamma: float
    g: float = DEFAULT_G
    omega: float = DEFAULT_OMEGA

    def __post_init__(self):
        for name in ("beta", "gamma", "g", "omega"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"{name} must be a finite number, got {v!r}")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.g < 0:
            raise ValueError(f"g must be >= 0, got {self.g}")
        if self.omega <= 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")

    @property
    def period(self) -> float:
        """Drive period 2*pi/omega."""
        return 2.0 * math.pi / self.omega

    @property
    def drive(self) -> float:
        """Force amplitude g/beta appearing in the equation of motion."""
        return self.g / self.beta

    def require_dissipative(self):
        # gamma = 0 is a singular limit for the open-system engines
        if self.gamma <= 0:
            raise ValueError("semiclassical and quantum engines require gamma > 0")

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class NumericsConfig:
    """Step counts and tolerances shared by the integrators.

    ``steps_per_period`` drives the deterministic RK4 integrator,
    ``sde_steps_per_period`` the two stochastic engines. Both must be
    integers so that stroboscopic samples land exactly on t = n*T.
    """

    steps_per_period: int = 4096
    sde_steps_per_period: int = 16384
    basis_tail_tolerance: float = 1e-6
    renormalize_each_step: bool = True

    def __post_init__(self):
        if int(self.steps_per_period) != self.steps_per_period or self.steps_per_period < 64:
            raise ValueError(f"steps_per_period must be an integer >= 64, got {self.steps_per_period}")
        if int(self.sde_steps_per_period) != self.sde_steps_per_period or self.sde_steps_per_period < 1024:
            raise ValueError(
                f"sde_steps_per_period must be an integer >= 1024, got {self.sde_steps_per_period}"
            )
        if not (0.0 < self.basis_tail_tolerance <= 1e-4):
            raise ValueError(f"basis_tail_tolerance must lie in (0, 1e-4], got {self.basis_tail_tolerance}")

    def with_(self, **changes) -> "NumericsConfig":
        return replace(self, **changes)


def potential_value(x, params: SystemParams):
    """Double-well potential V(x) = beta**2 x**4 / 4 - x**2 / 2."""
    b2 = params.beta * params.beta
    return 0.25 * b2 * x**4 - 0.5 * x**2


def well_minima(params: SystemParams) -> tuple[float, float]:
    """Nonzero stationary points of the potential, (-1/beta, +1/beta)."""
    w = 1.0 / params.beta
    return (-w, w)


def rescale(x, p, params: SystemParams, lam: float):
    """Apply the symmetry beta -> lam*beta, x -> x/lam, p -> p/lam.

    Classical trajectories of the original system map onto those of the
    rescaled one: lam * x_rescaled(t) == x_original(t).
    """
    if lam <= 0:
        raise ValueError(f"scale factor must be > 0, got {lam}")
    return x / lam, p / lam, params.with_(beta=params.beta * lam)
