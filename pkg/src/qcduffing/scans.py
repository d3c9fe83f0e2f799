"""Bifurcation diagrams, Poincare sections and K-versus-gamma sweeps.

Every scan cell starts fresh from the engine's default initial condition
(no continuation along the gamma grid) and draws its noise from a seed
derived from the scan's base seed and the cell's grid indices. Any cell can
therefore be recomputed on its own, and results never depend on execution
order or worker count.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import classical, quantum, semiclassical
from .complexity import LyapunovEstimate, LyapunovProtocol, lyapunov_estimate
from .engines import MODELS
from .errors import QCDuffingError
from .noise import NoiseStream, derive_seed
from .params import NumericsConfig, SystemParams

log = logging.getLogger(__name__)

WORKERS_ENV = "QCDUFFING_WORKERS"


def gamma_grid(gamma_min: float, gamma_max: float, gamma_step: float) -> np.ndarray:
    """Inclusive, evenly spaced grid; 0.01..0.30 step 0.001 gives 291 points."""
    if gamma_step <= 0 or gamma_max < gamma_min:
        raise ValueError("need gamma_step > 0 and gamma_max >= gamma_min")
    n = int(round((gamma_max - gamma_min) / gamma_step)) + 1
    return np.round(gamma_min + gamma_step * np.arange(n), 12)


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else 1
    return max(1, int(workers))


def _map(fn, tasks, workers):
    workers = resolve_workers(workers)
    if workers == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


@dataclass
class PoincareSection:
    points: np.ndarray  # (n, 2): x, p
    periods: np.ndarray  # drive-period index of each point
    params: SystemParams
    model: str
    seed: int | None


def poincare_section(
    model: str,
    params: SystemParams,
    n_periods: int,
    discard: int = 10,
    seed: int = 0,
    numerics: NumericsConfig = NumericsConfig(),
) -> PoincareSection:
    """Stroboscopic (x, p) at t = n*T for n = discard+1 .. n_periods.

    Quantum and semiclassical points are expectation values <Q>, <P>.
    """
    if n_periods <= discard:
        raise ValueError("n_periods must exceed discard")
    if model == "classical":
        xs, ps, _ = classical.stroboscopic(classical.default_initial_state(params), params, numerics, n_periods)
        used_seed = None
    elif model == "semiclassical":
        state = semiclassical.default_initial_state(params)
        xs, ps, _ = semiclassical.stroboscopic(state, params, NoiseStream(seed), numerics, n_periods)
        used_seed = seed
    elif model == "quantum":
        params.require_dissipative()
        engine = quantum.QuantumEngine(params, numerics)
        psi0 = quantum.QuantumState(engine.initial_state(), 0.0)
        rec, _ = quantum.integrate(psi0, params, NoiseStream(seed), numerics, n_periods, samples_per_period=1)
        xs, ps = rec[1:, 1], rec[1:, 2]
        used_seed = seed
    else:
        raise ValueError(f"unknown model {model!r}")
    pts = np.column_stack([xs[discard:], ps[discard:]])
    return PoincareSection(pts, np.arange(discard + 1, n_periods + 1), params, model, used_seed)


@dataclass
class BifurcationScan:
    gammas: np.ndarray
    values: list  # per gamma: recorded stroboscopic x (None for failed cells)
    status: list[str]
    errors: list[str]
    params: SystemParams
    model: str
    periods: int
    discard: int
    seed: int
    seeds: list = field(default_factory=list)


def _bifurcation_cell(task):
    model, params, periods, discard, seed, numerics = task
    try:
        sec = poincare_section(model, params, periods, discard, seed, numerics)
        return sec.points[:, 0].copy(), "ok", ""
    except (QCDuffingError, ValueError, FloatingPointError) as exc:
        return None, "failed", f"{type(exc).__name__}: {exc}"


def bifurcation_scan(
    model: str,
    params_template: SystemParams,
    gamma_min: float,
    gamma_max: float,
    gamma_step: float,
    periods: int = 200,
    discard: int = 10,
    seed: int = 0,
    numerics: NumericsConfig = NumericsConfig(),
    workers: int | None = 1,
) -> BifurcationScan:
    """Record x(t = nT) for n = discard+1..periods at every gamma of the grid."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    gammas = gamma_grid(gamma_min, gamma_max, gamma_step)
    cell_seeds = [derive_seed(seed, i) for i in range(len(gammas))]
    tasks = [
        (model, params_template.with_(gamma=float(g)), periods, discard, s, numerics)
        for g, s in zip(gammas, cell_seeds)
    ]
    results = _map(_bifurcation_cell, tasks, workers)
    values, status, errors = zip(*results) if results else ((), (), ())
    for g, st, err in zip(gammas, status, errors):
        if st != "ok":
            log.warning("bifurcation cell gamma=%g failed: %s", g, err)
    return BifurcationScan(
        gammas, list(values), list(status), list(errors), params_template, model, periods, discard, seed, cell_seeds
    )


def distinct_count(values: np.ndarray, tol: float) -> int:
    """Number of clusters of 1-D values separated by more than ``tol``."""
    if values is None or len(values) == 0:
        return 0
    v = np.sort(values)
    return int(1 + np.count_nonzero(np.diff(v) > tol))


@dataclass
class ComplexityCell:
    model: str
    beta: float
    gamma: float
    seed: int
    series_index: int
    gamma_index: int
    estimate: LyapunovEstimate | None = None
    status: str = "ok"
    error: str = ""


@dataclass
class ComplexityMap:
    cells: list[ComplexityCell]
    series: list[tuple[str, float]]
    gammas: np.ndarray
    protocol: LyapunovProtocol
    base_seed: int

    def curve(self, model: str, beta: float):
        """(gamma, K) arrays of the successful cells of one series."""
        sel = [c for c in self.cells if c.model == model and c.beta == beta and c.estimate is not None]
        return np.array([c.gamma for c in sel]), np.array([c.estimate.K for c in sel])


def cell_seed(base_seed: int, series_index: int, gamma_index: int) -> int:
    return derive_seed(base_seed, series_index, gamma_index)


def sweep_cell(
    model: str,
    beta: float,
    gamma: float,
    protocol: LyapunovProtocol,
    base_seed: int,
    series_index: int,
    gamma_index: int,
    params_template: SystemParams | None = None,
    numerics: NumericsConfig = NumericsConfig(),
) -> ComplexityCell:
    """One cell of :func:`k_vs_gamma_sweep`, runnable on its own."""
    seed = cell_seed(base_seed, series_index, gamma_index)
    cell = ComplexityCell(model, beta, gamma, seed, series_index, gamma_index)
    try:
        template = params_template or SystemParams(beta, gamma)
        params = template.with_(beta=beta, gamma=gamma)
        cell.estimate = lyapunov_estimate(model, params, protocol, seed, numerics)
    except (QCDuffingError, ValueError, FloatingPointError, RuntimeError) as exc:
        cell.status = "failed"
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def _sweep_task(task):
    return sweep_cell(*task)


def k_vs_gamma_sweep(
    series: list[tuple[str, float]],
    gammas,
    protocol: LyapunovProtocol,
    base_seed: int = 0,
    workers: int | None = 1,
    numerics: NumericsConfig = NumericsConfig(),
    params_template: SystemParams | None = None,
) -> ComplexityMap:
    """Lyapunov/K estimate for every (model, beta) series at every gamma.

    Cells run concurrently when ``workers`` > 1; the returned cells are in
    grid order (series-major) regardless.
    """
    gammas = np.asarray(gammas, dtype=float)
    for model, _ in series:
        if model not in MODELS:
            raise ValueError(f"unknown model {model!r}")
    tasks = [
        (model, float(beta), float(g), protocol, base_seed, i, j, params_template, numerics)
        for i, (model, beta) in enumerate(series)
        for j, g in enumerate(gammas)
    ]
    cells = _map(_sweep_task, tasks, workers)
    for c in cells:
        if c.status != "ok":
            log.warning("sweep cell %s beta=%g gamma=%g failed: %s", c.model, c.beta, c.gamma, c.error)
    return ComplexityMap(cells, list(series), gammas, protocol, base_seed)
