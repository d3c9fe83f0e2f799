"""Command-line entry point: ``qcduffing <command> [options]``.

Commands: simulate, bifurcation, poincare, lyapunov, sweep. Parameters come
from an optional ``--config`` file of ``key=value`` lines, overridden by
flags. Failures print one JSON object on stderr and exit non-zero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, classical, quantum, semiclassical
from .complexity import LyapunovProtocol, lyapunov_estimate
from .engines import MODELS
from .errors import ConfigError, QCDuffingError, TrajectoryEscaped
from .noise import NoiseStream
from .output import write_csv, write_svg_scatter
from .params import NumericsConfig, SystemParams
from .scans import bifurcation_scan, gamma_grid, k_vs_gamma_sweep, poincare_section, resolve_workers

COMMANDS = ("simulate", "bifurcation", "poincare", "lyapunov", "sweep")
FILE_KEYS = ("beta", "gamma", "g", "omega", "steps_per_period", "sde_steps_per_period", "basis_tail_tolerance")
_FILE_TYPES = {"steps_per_period": int, "sde_steps_per_period": int}
_DEFAULT_PERIODS = {"simulate": 10, "bifurcation": 200, "poincare": 500}
# desk-scale exponent lengths; quantum runs dominate cost
_LYAPUNOV_PERIODS = {"classical": 3000, "semiclassical": 3000, "quantum": 500}


@dataclass
class RunConfig:
    command: str
    model: str
    params: SystemParams | None
    numerics: NumericsConfig
    protocol: LyapunovProtocol | None
    base_seed: int
    output: Path
    workers: int
    periods: int
    discard: int = 10
    samples_per_period: int = 32
    gamma_grid: tuple[float, float, float] = (0.01, 0.30, 0.001)
    series: list = field(default_factory=list)
    svg: bool = False

    def header(self) -> dict:
        meta = {
            "command": self.command,
            "model": self.model,
            "seed": self.base_seed,
            "numerics": asdict(self.numerics),
            "periods": self.periods,
        }
        if self.params is not None:
            meta["params"] = asdict(self.params)
        if self.protocol is not None:
            meta["protocol"] = asdict(self.protocol)
        if self.command in ("bifurcation", "poincare"):
            meta["discard"] = self.discard
        if self.command in ("bifurcation", "sweep"):
            meta["gamma_grid"] = list(self.gamma_grid)
        if self.command == "sweep":
            meta["series"] = [list(s) for s in self.series]
        if self.command == "simulate":
            meta["samples_per_period"] = self.samples_per_period
        return meta


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qcduffing", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="key=value parameter file")
        p.add_argument("--model", choices=MODELS, default="classical")
        p.add_argument("--beta", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--g", type=float)
        p.add_argument("--omega", type=float)
        p.add_argument("--steps-per-period", type=int, dest="steps_per_period")
        p.add_argument("--sde-steps-per-period", type=int, dest="sde_steps_per_period")
        p.add_argument("--basis-tail-tolerance", type=float, dest="basis_tail_tolerance")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=Path)
        p.add_argument("--threads", type=int, help="worker processes (default: $QCDUFFING_WORKERS or 1)")
        p.add_argument("--periods", type=int)
        p.add_argument("--svg", action="store_true", help="also write an SVG scatter plot")
        if name in ("bifurcation", "poincare"):
            p.add_argument("--discard", type=int, default=10)
        if name == "simulate":
            p.add_argument("--samples-per-period", type=int, default=32, dest="samples_per_period")
        if name in ("bifurcation", "sweep"):
            p.add_argument("--gamma-min", type=float, default=0.01)
            p.add_argument("--gamma-max", type=float, default=0.30)
            p.add_argument("--gamma-step", type=float, default=0.001)
        if name in ("lyapunov", "sweep"):
            p.add_argument("--realizations", type=int, default=8)
            p.add_argument("--transient", type=int, default=100)
            p.add_argument("--delta0", type=float)
            p.add_argument("--reset-interval", type=float, dest="reset_interval")
            p.add_argument("--full", action="store_true", help="use 3000 periods for every model")
        if name == "sweep":
            p.add_argument(
                "--series",
                action="append",
                default=[],
                help="MODEL[:BETA], repeatable (e.g. classical, semiclassical:0.02, quantum:0.205)",
            )
    return parser


def read_config_file(path) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}", token=str(path)) from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value", token=raw)
        if key not in FILE_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}", token=key)
        conv = _FILE_TYPES.get(key, float)
        try:
            values[key] = conv(value.strip())
        except ValueError:
            raise ConfigError(f"line {lineno}: invalid value for {key}", token=value.strip()) from None
    return values


def _parse_series(items, default_beta):
    out = []
    for item in items:
        model, _, beta = item.partition(":")
        if model not in MODELS:
            raise ConfigError(f"unknown model in --series: {model!r}", token=item)
        if beta:
            try:
                b = float(beta)
            except ValueError:
                raise ConfigError("invalid beta in --series", token=item) from None
        elif default_beta is not None:
            b = default_beta
        else:
            raise ConfigError("--series entry needs a beta (MODEL:BETA) or a global --beta", token=item)
        out.append((model, b))
    return out


def parse_config(argv, config_file=None) -> RunConfig:
    """Build a validated :class:`RunConfig`. Flags override file values."""
    args = _build_parser().parse_args(argv)
    values = {}
    path = config_file or args.config
    if path is not None:
        values.update(read_config_file(path))
    for key in FILE_KEYS:
        v = getattr(args, key)
        if v is not None:
            values[key] = v

    numerics_kw = {k: values[k] for k in ("steps_per_period", "sde_steps_per_period", "basis_tail_tolerance") if k in values}
    try:
        numerics = NumericsConfig(**numerics_kw)
    except ValueError as exc:
        raise ConfigError(str(exc), token=str(numerics_kw)) from None

    command = args.command
    needs_gamma = command in ("simulate", "poincare", "lyapunov")
    needs_beta = command != "sweep" or not args.series
    for key, required in (("beta", needs_beta), ("gamma", needs_gamma)):
        if required and key not in values:
            raise ConfigError(f"missing required parameter --{key}", token=f"--{key}")

    params = None
    if "beta" in values:
        try:
            params = SystemParams(
                beta=values["beta"],
                gamma=values.get("gamma", 0.1),
                g=values.get("g", 0.3),
                omega=values.get("omega", 1.0),
            )
        except ValueError as exc:
            raise ConfigError(str(exc), token=str(exc).split()[0]) from None
        if args.model != "classical" and command in ("simulate", "poincare", "lyapunov") and params.gamma <= 0:
            raise ConfigError("semiclassical and quantum engines require gamma > 0", token="--gamma")

    protocol = None
    periods = args.periods
    if command in ("lyapunov", "sweep"):
        if periods is None:
            periods = 3000 if args.full else _LYAPUNOV_PERIODS[args.model]
        try:
            protocol = LyapunovProtocol(
                delta0=args.delta0,
                reset_interval=args.reset_interval,
                n_periods=periods,
                n_realizations=args.realizations,
                transient_periods=args.transient,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif periods is None:
        periods = _DEFAULT_PERIODS[command]
    if periods < 1:
        raise ConfigError("--periods must be positive", token=str(periods))

    grid = (0.01, 0.30, 0.001)
    if command in ("bifurcation", "sweep"):
        grid = (args.gamma_min, args.gamma_max, args.gamma_step)
        try:
            gamma_grid(*grid)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    series = []
    if command == "sweep":
        series = _parse_series(args.series or [args.model], values.get("beta"))

    discard = getattr(args, "discard", 10)
    if command in ("bifurcation", "poincare") and periods <= discard:
        raise ConfigError("--periods must exceed --discard", token=str(periods))

    out = args.out or Path(f"{command}_{args.model}.csv")
    return RunConfig(
        command=command,
        model=args.model,
        params=params,
        numerics=numerics,
        protocol=protocol,
        base_seed=args.seed,
        output=out,
        workers=resolve_workers(args.threads),
        periods=periods,
        discard=discard,
        samples_per_period=getattr(args, "samples_per_period", 32),
        gamma_grid=grid,
        series=series,
        svg=args.svg,
    )


def _run_simulate(cfg: RunConfig):
    p = cfg.params
    if cfg.model == "classical":
        t, xs, ps, _ = classical.integrate(
            classical.default_initial_state(p), p, cfg.numerics, cfg.periods, cfg.samples_per_period
        )
        cols, rows = ["t", "x", "p"], zip(t, xs, ps)
        seed = None
    elif cfg.model == "semiclassical":
        t, st, _ = semiclassical.integrate(
            semiclassical.default_initial_state(p), p, NoiseStream(cfg.base_seed), cfg.numerics, cfg.periods,
            cfg.samples_per_period,
        )
        cols, rows = ["t", "x", "p", "mu", "kappa", "r"], ((ti, *s) for ti, s in zip(t, st))
        seed = cfg.base_seed
    else:
        engine = quantum.QuantumEngine(p, cfg.numerics)
        psi0 = quantum.QuantumState(engine.initial_state(), 0.0)
        rec, _ = quantum.integrate(psi0, p, NoiseStream(cfg.base_seed), cfg.numerics, cfg.periods,
                                   cfg.samples_per_period)
        cols = ["t", "Q", "P", "sigma_QQ", "sigma_PP", "participation_ratio", "N"]
        rows = ((*r[:6], int(r[6])) for r in rec)
        seed = cfg.base_seed
    meta = cfg.header()
    meta["seed"] = "" if seed is None else seed
    if cfg.model == "quantum":
        meta["scheme"] = "RK4 drift + Euler-Maruyama noise, renormalized"
        meta["dt"] = p.period / cfg.numerics.sde_steps_per_period
    rows = list(rows)
    write_csv(cfg.output, meta, cols, rows)
    if cfg.svg:
        write_svg_scatter(cfg.output.with_suffix(".svg"), [r[1] for r in rows], [r[2] for r in rows],
                          f"{cfg.model} trajectory", "x", "p", size=2.0)


def _run_bifurcation(cfg: RunConfig, log_lines):
    scan = bifurcation_scan(cfg.model, cfg.params, *cfg.gamma_grid, periods=cfg.periods, discard=cfg.discard,
                            seed=cfg.base_seed, numerics=cfg.numerics, workers=cfg.workers)
    rows = []
    for i, (g, vals, st, err) in enumerate(zip(scan.gammas, scan.values, scan.status, scan.errors)):
        log_lines.append({"cell": i, "gamma": float(g), "seed": scan.seeds[i], "status": st, "error": err})
        if vals is None:
            continue
        rows.extend((float(g), cfg.discard + 1 + n, float(x)) for n, x in enumerate(vals))
    write_csv(cfg.output, cfg.header(), ["gamma", "period_index", "x"], rows)
    if cfg.svg:
        write_svg_scatter(cfg.output.with_suffix(".svg"), [r[0] for r in rows], [r[2] for r in rows],
                          f"{cfg.model} bifurcation diagram", "gamma", "x(t = nT)", size=0.5)
    return all(s == "ok" for s in scan.status)


def _run_poincare(cfg: RunConfig):
    sec = poincare_section(cfg.model, cfg.params, cfg.periods, cfg.discard, cfg.base_seed, cfg.numerics)
    rows = [(int(n), float(x), float(p)) for n, (x, p) in zip(sec.periods, sec.points)]
    write_csv(cfg.output, cfg.header(), ["n", "x", "p"], rows)
    if cfg.svg:
        write_svg_scatter(cfg.output.with_suffix(".svg"), sec.points[:, 0], sec.points[:, 1],
                          f"{cfg.model} Poincare section, gamma={cfg.params.gamma}", "x", "p", size=2.0)


def _run_lyapunov(cfg: RunConfig):
    est = lyapunov_estimate(cfg.model, cfg.params, cfg.protocol, cfg.base_seed, cfg.numerics)
    p = cfg.params
    cols = ["model", "beta", "gamma", "g", "omega", "lambda", "K", "stderr", "n_periods", "n_realizations",
            "delta0", "reset_interval", "base_seed"]
    row = (cfg.model, p.beta, p.gamma, p.g, p.omega, est.lam, est.K, est.stderr, cfg.protocol.n_periods,
           cfg.protocol.n_realizations, est.delta0, est.reset_interval, cfg.base_seed)
    meta = cfg.header()
    meta["realization_seeds"] = est.seeds
    write_csv(cfg.output, meta, cols, [row])


def _run_sweep(cfg: RunConfig, log_lines):
    template = cfg.params or SystemParams(1.0, 0.1)
    kmap = k_vs_gamma_sweep(cfg.series, gamma_grid(*cfg.gamma_grid), cfg.protocol, cfg.base_seed, cfg.workers,
                            cfg.numerics, template)
    rows = []
    for c in kmap.cells:
        e = c.estimate
        rows.append((c.model, c.beta, c.gamma, e.lam if e else None, e.K if e else None, e.stderr if e else None,
                     c.seed, c.status))
        log_lines.append({"model": c.model, "beta": c.beta, "gamma": c.gamma, "series": c.series_index,
                          "cell": c.gamma_index, "seed": c.seed, "status": c.status, "error": c.error})
    write_csv(cfg.output, cfg.header(), ["model", "beta", "gamma", "lambda", "K", "stderr", "seed", "status"], rows)
    if cfg.svg:
        ok = [r for r in rows if r[4] is not None]
        write_svg_scatter(cfg.output.with_suffix(".svg"), [r[2] for r in ok], [r[4] for r in ok],
                          "K = lambda + gamma", "gamma", "K", size=6.0)
    return all(c.status == "ok" for c in kmap.cells)


def _write_log(cfg: RunConfig, lines):
    path = cfg.output.with_suffix(".jsonl")
    path.write_text("".join(json.dumps(l, sort_keys=True) + "\n" for l in lines))


def run(cfg: RunConfig) -> int:
    """Dispatch a validated config; returns the process exit status."""
    log_lines = []
    complete = True
    if cfg.command == "simulate":
        _run_simulate(cfg)
    elif cfg.command == "bifurcation":
        complete = _run_bifurcation(cfg, log_lines)
    elif cfg.command == "poincare":
        _run_poincare(cfg)
    elif cfg.command == "lyapunov":
        _run_lyapunov(cfg)
    elif cfg.command == "sweep":
        complete = _run_sweep(cfg, log_lines)
    if log_lines:
        _write_log(cfg, log_lines)
    return 0 if complete else 3


def _error_json(exc, kind):
    payload = {"status": "error", "kind": kind, "type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError) and exc.token is not None:
        payload["token"] = exc.token
    if isinstance(exc, TrajectoryEscaped) and exc.t is not None:
        payload["t"] = exc.t
    return json.dumps(payload)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(_error_json(exc, "config"), file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except (QCDuffingError, ValueError, RuntimeError) as exc:
        print(_error_json(exc, "runtime"), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
