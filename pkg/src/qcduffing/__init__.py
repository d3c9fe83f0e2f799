"""Classical, semiclassical and quantum-state-diffusion simulations of the
open driven double-well (Duffing) oscillator, with Lyapunov/complexity,
bifurcation and Poincare-section analyses."""

__version__ = "0.1.0"

from .params import NumericsConfig, SystemParams, potential_value, rescale, well_minima  # noqa: E402
from .noise import NoiseStream  # noqa: E402
from .complexity import LyapunovEstimate, LyapunovProtocol, complexity, lyapunov_estimate  # noqa: E402

__all__ = [
    "NumericsConfig",
    "SystemParams",
    "potential_value",
    "rescale",
    "well_minima",
    "NoiseStream",
    "LyapunovEstimate",
    "LyapunovProtocol",
    "complexity",
    "lyapunov_estimate",
]
