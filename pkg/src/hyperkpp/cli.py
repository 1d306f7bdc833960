"""Command-line experiments with deterministic CSV output."""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from . import __version__
from .diagnostics import (
    compare_profile,
    estimate_speed,
    front_position,
    gaussian_perturbation,
    jump_sharpness,
    linear_lyapunov_series,
    nonlinear_energy_series,
    reference_point,
)
from .dispersion import Regime, RegimeError, classify, minimal_speed, wave_parameters
from .growth import DomainError, logistic, validate
from .profile import NoFrontError, ProfileOptions, build, build_minimal, residual
from .solver import GridSpec, current, density, init_step_state, run

COMMANDS = ("simulate", "profile", "dispersion", "speedscan", "stability")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field or line."""


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    epsilon: float = 0.5
    speed: float | None = None
    growth: str = "logistic"
    rate: float = 1.0
    a: float = -30.0
    b: float = 120.0
    dx: float = 0.05
    t_end: float = 60.0
    cfl: float = 0.9
    snapshot_every: float = 1.0
    level: float = 0.5
    discard: float = 0.5
    out: str | None = None
    jobs: int | None = None
    epsilons: tuple[float, ...] | None = None
    amplitude: float = 0.01
    width: float = 2.0
    center: float | None = None
    mode: str = "nonlinear"
    snapshot_format: str = "long"

    @property
    def grid(self) -> GridSpec:
        return GridSpec.from_dx(self.a, self.b, self.dx)

    def growth_function(self):
        return logistic(self.rate)


FLOAT_KEYS = {"epsilon", "speed", "rate", "a", "b", "dx", "t_end", "cfl", "snapshot_every",
              "level", "discard", "amplitude", "width", "center"}
KEYS = {f.name for f in fields(ExperimentConfig)} - {"command"}

PRESETS = {
    "fig1a": {"epsilon": 0.5, "a": -30.0, "b": 120.0, "dx": 0.05, "t_end": 60.0},
    "fig1b": {"epsilon": 1.0, "a": -30.0, "b": 120.0, "dx": 0.05, "t_end": 60.0},
    "fig1c": {"epsilon": 2.0, "a": -30.0, "b": 120.0, "dx": 0.05, "t_end": 120.0},
}

# Moving-frame grids for the stability command; the parabolic grid is
# recentred on the front and the hyperbolic one stops at the jump.
STABILITY_DEFAULTS = {
    "parabolic": {"a": -40.0, "b": 40.0, "dx": 0.0125, "t_end": 40.0, "snapshot_every": 0.5},
    "other": {"a": -60.0, "b": 0.0, "dx": 0.025, "t_end": 20.0, "snapshot_every": 0.5},
}


def fmt(x) -> str:
    """Shortest round-trip text for floats; integers and strings pass through."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (tuple, list)):
        return ",".join(fmt(v) for v in x)
    return str(x)


def _convert(key: str, raw: str, where: str = ""):
    raw = raw.strip()
    try:
        if key in FLOAT_KEYS:
            return None if raw in ("", "none") and key in ("speed", "center") else float(raw)
        if key == "jobs":
            return None if raw in ("", "none") else int(raw)
        if key == "epsilons":
            return None if raw in ("", "none") else tuple(float(v) for v in raw.split(",") if v.strip())
        if key == "out":
            return None if raw in ("", "none") else raw
    except ValueError:
        raise ConfigError(f"{where}{key}: cannot parse {raw!r}") from None
    return raw


def read_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {n}: expected 'key = value', got {line.strip()!r}")
        key, raw = (p.strip() for p in body.split("=", 1))
        key = key.replace("-", "_")
        if key not in KEYS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        values[key] = _convert(key, raw, where=f"line {n}: ")
    return values


def dump_config(cfg: ExperimentConfig) -> str:
    """Config file text that parses back to ``cfg`` (command excluded)."""
    lines = []
    for f in fields(cfg):
        if f.name == "command":
            continue
        lines.append(f"{f.name} = {fmt(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    def need(cond, name, what):
        if not cond:
            raise ConfigError(f"{name}: {what}, got {getattr(cfg, name)!r}")

    need(cfg.command in COMMANDS, "command", f"must be one of {COMMANDS}")
    for name in FLOAT_KEYS:
        v = getattr(cfg, name)
        need(v is None or math.isfinite(v), name, "must be finite")
    need(cfg.epsilon > 0, "epsilon", "must be positive")
    need(cfg.speed is None or cfg.speed >= 0, "speed", "must be nonnegative")
    need(cfg.growth == "logistic", "growth", "only 'logistic' is supported")
    need(cfg.rate > 0, "rate", "must be positive")
    need(cfg.b > cfg.a, "b", "must exceed a")
    need(cfg.dx > 0, "dx", "must be positive")
    n = (cfg.b - cfg.a) / cfg.dx
    need(abs(n - round(n)) < 1e-9 * max(1.0, n), "dx", "must divide b - a")
    need(cfg.t_end >= 0, "t_end", "must be nonnegative")
    need(0 < cfg.cfl < 1, "cfl", "must lie in (0, 1)")
    need(cfg.snapshot_every > 0, "snapshot_every", "must be positive")
    need(0 < cfg.level < 1, "level", "must lie in (0, 1)")
    need(0 <= cfg.discard < 1, "discard", "must lie in [0, 1)")
    need(cfg.jobs is None or cfg.jobs >= 1, "jobs", "must be at least 1")
    need(cfg.epsilons is None or (len(cfg.epsilons) > 0 and all(e > 0 for e in cfg.epsilons)),
         "epsilons", "must be a nonempty list of positive numbers")
    need(cfg.amplitude >= 0, "amplitude", "must be nonnegative")
    need(cfg.width > 0, "width", "must be positive")
    need(cfg.mode in ("linear", "nonlinear"), "mode", "must be 'linear' or 'nonlinear'")
    need(cfg.snapshot_format in ("long", "files"), "snapshot_format", "must be 'long' or 'files'")
    return cfg


def _flag(parser, name, **kw):
    dash = "--" + name.replace("_", "-")
    names = [dash] if "-" not in dash[2:] else [dash, "--" + name]
    parser.add_argument(*names, dest=name, default=None, **kw)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _flag(common, "config", metavar="FILE", help="key = value file; flags override it")
    _flag(common, "preset", choices=sorted(PRESETS), help="step-data runs at eps = 0.5, 1, 2")
    for key in ("epsilon", "speed", "rate", "a", "b", "dx", "t_end", "level", "amplitude",
                "width", "center"):
        _flag(common, key, type=str)
    _flag(common, "cfl", type=str, help="time step as a fraction of the stability limit")
    _flag(common, "snapshot_every", type=str)
    _flag(common, "discard", type=str, help="fraction of the run ignored by the speed fit")
    _flag(common, "growth", type=str)
    _flag(common, "out", type=str)
    _flag(common, "jobs", type=str)
    _flag(common, "epsilons", type=str, help="comma-separated list")
    _flag(common, "mode", type=str, help="stability: linear or nonlinear")
    _flag(common, "snapshot_format", type=str, help="simulate: long or files")
    parser = argparse.ArgumentParser(prog="hyperkpp", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for c in COMMANDS:
        sub.add_parser(c, parents=[common])
    return parser


def _parabolic(values: dict) -> bool:
    eps, rate = values.get("epsilon", 0.5), values.get("rate", 1.0)
    if not (eps > 0 and rate > 0):
        return True  # left for validation to reject
    return classify(eps, logistic(rate)) is Regime.PARABOLIC


def parse_config(argv=None) -> ExperimentConfig:
    """Resolve defaults, preset, config file and flags (in increasing priority)."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            raise
        raise ConfigError("invalid command line") from None
    values: dict = {}
    if ns.command == "stability":
        values.update(STABILITY_DEFAULTS["parabolic"])
    if ns.command == "speedscan":
        values["epsilons"] = (0.5, 1.0, 2.0)
    if ns.preset:
        values.update(PRESETS[ns.preset])
    file_values = {}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                file_values = read_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"config: cannot read {ns.config}: {exc.strerror}") from None
    flag_values = {k: _convert(k, v) for k, v in vars(ns).items()
                   if k in KEYS and v is not None}
    values.update(file_values)
    values.update(flag_values)
    if ns.command == "stability" and not _parabolic(values):
        explicit = {**file_values, **flag_values}
        for k, v in STABILITY_DEFAULTS["other"].items():
            if k not in explicit:
                values[k] = v
    return validate_config(ExperimentConfig(command=ns.command, **values))


def _metadata(cfg: ExperimentConfig, extra: dict | None = None) -> list[str]:
    lines = [f"# hyperkpp version = {__version__}", f"# command = {cfg.command}"]
    lines += [f"# {line}" for line in dump_config(cfg).splitlines()]
    for k, v in (extra or {}).items():
        lines.append(f"# {k} = {fmt(v)}")
    return lines


def csv_text(cfg, columns, rows, extra=None) -> str:
    buf = io.StringIO()
    for line in _metadata(cfg, extra):
        buf.write(line + "\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _emit(text: str, path: str | None, stdout) -> None:
    if path is None or path == "-":
        stdout.write(text)
        return
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _simulate(cfg: ExperimentConfig):
    g = cfg.growth_function()
    grid = cfg.grid
    snaps = []

    def obs(t, state):
        snaps.append((t, grid.centers, density(state).copy(), current(state).copy()))

    final = run(init_step_state(grid, cfg.epsilon), cfg.epsilon, g, cfg.t_end, cfg.cfl,
                observer=obs, snapshot_every=cfg.snapshot_every)
    return g, grid, snaps, final


def cmd_simulate(cfg: ExperimentConfig, stdout=sys.stdout) -> int:
    g, grid, snaps, final = _simulate(cfg)
    fit = estimate_speed([(t, x, r) for t, x, r, _ in snaps], cfg.level, cfg.discard)
    s_star = minimal_speed(cfg.epsilon, g)
    out = cfg.out or "simulate_output"
    os.makedirs(out, exist_ok=True)
    extra = {"s_star": s_star, "measured_speed": fit.speed, "r_squared": fit.r_squared}
    front = []
    for t, x, r, _ in snaps:
        try:
            front.append((t, front_position(x, r, cfg.level)))
        except ValueError:
            front.append((t, float("nan")))
    _emit(csv_text(cfg, ["t", "x_front"], front, extra), os.path.join(out, "speed.csv"), stdout)
    if cfg.snapshot_format == "long":
        rows = ((t, xi, ri, ji) for t, x, r, j in snaps for xi, ri, ji in zip(x, r, j))
        _emit(csv_text(cfg, ["t", "x", "rho", "j"], rows), os.path.join(out, "snapshots.csv"), stdout)
    else:
        for t, x, r, _ in snaps:
            _emit(csv_text(cfg, ["x", "rho"], zip(x, r), {"t": t}),
                  os.path.join(out, f"rho_t{fmt(t)}.csv"), stdout)
    stdout.write(f"speed {fmt(fit.speed)} theory {fmt(s_star)} "
                 f"rel_error {fmt(abs(fit.speed - s_star) / s_star)}\n")
    regime = classify(cfg.epsilon, g)
    rho = density(final)
    if regime is Regime.CRITICAL:
        prof = build_minimal(cfg.epsilon, g, critical=True)
        shift, linf, l2 = compare_profile(grid.centers, rho, prof)
        stdout.write(f"profile shift {fmt(shift)} linf {fmt(linf)} l2 {fmt(l2)}\n")
    elif regime is Regime.HYPERBOLIC:
        th = wave_parameters(cfg.epsilon, g).theta
        width, back = jump_sharpness(grid.centers, rho, th)
        stdout.write(f"jump width_cells {width} back_value {fmt(back)} theta {fmt(th)}\n")
    return EXIT_OK


def cmd_profile(cfg: ExperimentConfig, stdout=sys.stdout) -> int:
    g = cfg.growth_function()
    params = wave_parameters(cfg.epsilon, g, cfg.speed)
    prof = build(params, g, ProfileOptions())
    res = residual(prof, g)
    extra = {"kind": prof.kind.value, "epsilon": params.epsilon, "s": params.s,
             "theta": params.theta, "lambda": params.lam, "residual": res,
             "shift_convention": prof.shift_convention.value}
    _emit(csv_text(cfg, ["z", "nu"], zip(prof.z, prof.nu), extra), cfg.out, stdout)
    return EXIT_OK


def dispersion_row(eps: float, g):
    p = wave_parameters(eps, g)
    nan = float("nan")
    return (eps, p.regime.value, p.s_star, nan if p.lam is None else p.lam,
            nan if p.lam_prime is None else p.lam_prime, p.theta)


def cmd_dispersion(cfg: ExperimentConfig, stdout=sys.stdout) -> int:
    g = cfg.growth_function()
    eps_list = cfg.epsilons or (cfg.epsilon,)
    rows = [dispersion_row(e, g) for e in eps_list]
    cols = ["epsilon", "regime", "s_star", "lambda", "lambda_prime", "theta"]
    _emit(csv_text(cfg, cols, rows), cfg.out, stdout)
    return EXIT_OK


def _scan_one(cfg: ExperimentConfig):
    g = cfg.growth_function()
    s_star = minimal_speed(cfg.epsilon, g)
    try:
        _, _, snaps, _ = _simulate(cfg)
        fit = estimate_speed([(t, x, r) for t, x, r, _ in snaps], cfg.level, cfg.discard)
        return cfg.epsilon, s_star, fit.speed, None
    except Exception as exc:  # recorded per epsilon; the scan continues
        return cfg.epsilon, s_star, float("nan"), f"{type(exc).__name__}: {exc}"


def cmd_speedscan(cfg: ExperimentConfig, stdout=sys.stdout) -> int:
    jobs = cfg.jobs or os.cpu_count() or 1
    cfgs = [replace(cfg, epsilon=e) for e in cfg.epsilons]
    if jobs == 1 or len(cfgs) == 1:
        results = [_scan_one(c) for c in cfgs]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(cfgs))) as pool:
            results = list(pool.map(_scan_one, cfgs))
    rows, extra = [], {}
    for eps, s_star, s_meas, err in results:
        rows.append((eps, s_star, s_meas, abs(s_meas - s_star) / s_star))
        if err is not None:
            extra[f"failed epsilon {fmt(eps)}"] = err
    cols = ["epsilon", "s_star_theory", "s_measured", "rel_error"]
    _emit(csv_text(cfg, cols, rows, extra), cfg.out, stdout)
    return EXIT_OK if not extra else EXIT_NUMERICAL


def cmd_stability(cfg: ExperimentConfig, stdout=sys.stdout) -> int:
    g = cfg.growth_function()
    grid = cfg.grid
    regime = classify(cfg.epsilon, g)
    parabolic = regime is Regime.PARABOLIC
    if not parabolic and cfg.mode == "nonlinear":
        raise RegimeError("the energy suite needs eps^2 F'(0) < 1; use --mode linear "
                          "for the weighted L2 functional")
    if not parabolic and grid.b > 0:
        raise ConfigError("b: the weight is defined on the support of the front (z <= 0)")
    prof = build_minimal(cfg.epsilon, g, ProfileOptions(z_range=(grid.a, max(grid.b, 0.0))))
    center = cfg.center if cfg.center is not None else reference_point(prof)
    upper = None if parabolic else min(0.0, grid.b)
    if regime is Regime.CRITICAL:
        upper = -1.0
    u0 = gaussian_perturbation(grid.centers, center, cfg.amplitude, cfg.width, upper=upper)
    if cfg.mode == "linear":
        series = linear_lyapunov_series(prof, g, grid, u0, t_end=cfg.t_end,
                                        snapshot_every=cfg.snapshot_every, cfl_fraction=cfg.cfl)
        rows = zip(series.t, series.lyapunov)
        _emit(csv_text(cfg, ["t", "lyapunov"], rows, {"center": center}), cfg.out, stdout)
        return EXIT_OK
    series = nonlinear_energy_series(prof, g, grid, u0, t_end=cfg.t_end,
                                     snapshot_every=cfg.snapshot_every, cfl_fraction=cfg.cfl)
    cols = ["t", "lyapunov", "e1u", "e2u", "e1w", "e2w", "e_combined"]
    rows = [[getattr(r, c) for c in cols] for r in series.reports]
    first = series.reports[0] if series.reports else None
    extra = {"center": center, "sup_norm": float(series.sup_norm.max())}
    if first is not None:
        extra.update({"z0": first.z0, "delta": first.deltas[0], "delta_prime": first.deltas[1],
                      "delta_second": first.deltas[2]})
    _emit(csv_text(cfg, cols, rows, extra), cfg.out, stdout)
    return EXIT_OK


HANDLERS = {"simulate": cmd_simulate, "profile": cmd_profile, "dispersion": cmd_dispersion,
            "speedscan": cmd_speedscan, "stability": cmd_stability}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg = parse_config(argv)
        g = cfg.growth_function()
        report = validate(g)
        if not report.passed:
            raise ConfigError(f"growth: failed checks {report.failures()}")
        return HANDLERS[cfg.command](cfg, stdout)
    except (ConfigError, RegimeError, NoFrontError, DomainError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except Exception as exc:
        stderr.write(f"numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
