"""Model-name dispatch for the three dynamical engines."""

from __future__ import annotations

from .classical import ClassicalEngine
from .params import NumericsConfig, SystemParams
from .quantum import QuantumEngine
from .semiclassical import SemiclassicalEngine

MODELS = ("classical", "semiclassical", "quantum")

_ENGINES = {
    "classical": ClassicalEngine,
    "semiclassical": SemiclassicalEngine,
    "quantum": QuantumEngine,
}


def make_engine(model: str, params: SystemParams, numerics: NumericsConfig = NumericsConfig()):
    try:
        cls = _ENGINES[model]
    except KeyError:
        raise ValueError(f"unknown model {model!r}; expected one of {', '.join(MODELS)}") from None
    return cls(params, numerics)
