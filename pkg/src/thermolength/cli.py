"""Command-line front end: parameter sweeps written as CSV.

Subcommands::

    thermolength run CONFIG [--jobs N]
    thermolength check CONFIG
    thermolength figure1 [--out PATH]
    thermolength figure2 [--out PATH]

Config files are flat ``key = value`` text with dotted keys, e.g.::

    params.beta = 1.2
    params.omega0 = 0.9
    params.omega1 = 0.5
    protocol.kind = sudden
    sweep.variable = omega1
    sweep.from = 0.3
    sweep.to = 0.9
    sweep.steps = 25
    outputs = sigma, bounds, trace_distance
    out_path = sweep.csv

Exit status: 0 success, 2 a bound inequality failed beyond its slack,
64 unreadable or invalid config, 70 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _hyperbolic as hyp
from .bounds import BoundReport, evaluate_bounds
from .dynamics import (
    DEFAULT_TOL,
    OscillatorParams,
    Protocol,
    adiabaticity,
    integrate_trajectory,
)
from .errors import DomainError, ThermolengthError
from .gaussian import (
    GridSpec,
    equilibrium_state,
    fock_populations,
    kernel_nonequilibrium,
    kernel_pair,
    nonequilibrium_state,
    population_grid,
    resolvable_levels,
)
from .metrics import trace_distance

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_CONFIG = 64
EXIT_NUMERIC = 70

PRESET_VERSION = "1"

COLUMNS = (
    "qstar",
    "omega1",
    "sigma",
    "s_bures",
    "leading_bures",
    "bures_distance_sq",
    "s_trace",
    "upper_eigenvalue",
    "upper_population",
    "fidelity",
)
OUTPUT_GROUPS = {
    "sigma": ("sigma",),
    "bounds": ("s_bures", "leading_bures", "bures_distance_sq"),
    "fidelity": ("fidelity",),
    "trace_distance": ("s_trace",),
    "upper_bound": ("upper_eigenvalue", "upper_population"),
}
# columns that need the driven state itself, not only Q*
PROTOCOL_ONLY = ("s_trace", "upper_population")
SWEEP_VARIABLES = ("qstar", "omega1", "tau")

_PARAM_KEYS = ("hbar", "mass", "beta", "omega0", "omega1")
KNOWN_KEYS = (
    {f"params.{k}" for k in _PARAM_KEYS}
    | {"protocol.kind", "protocol.tau", "protocol.table", "protocol.interpolation"}
    | {"grid.n_points", "grid.half_width_mult"}
    | {"sweep.variable", "sweep.from", "sweep.to", "sweep.steps"}
    | {"integrator.tol", "populations.n_max", "outputs", "out_path"}
)


class ConfigError(ThermolengthError, ValueError):
    """Config file is unreadable or describes an invalid run."""


@dataclass(frozen=True)
class Sweep:
    variable: str
    start: float
    stop: float
    steps: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class RunConfig:
    params: OscillatorParams
    protocol: Protocol = Protocol.sudden()
    grid: GridSpec = GridSpec()
    sweep: Optional[Sweep] = None
    outputs: Tuple[str, ...] = ("sigma", "s_bures", "leading_bures", "bures_distance_sq")
    out_path: str = "results.csv"
    tol: float = DEFAULT_TOL
    population_levels: int = 60

    @property
    def qstar_only(self) -> bool:
        return self.sweep is not None and self.sweep.variable == "qstar"

    def columns(self) -> List[str]:
        cols = []
        if self.sweep is not None:
            cols.append(self.sweep.variable)
        if "qstar" not in cols:
            cols.append("qstar")
        for name in self.outputs:
            if self.qstar_only and name in PROTOCOL_ONLY:
                continue
            if name not in cols:
                cols.append(name)
        return cols

    def dropped_outputs(self) -> List[str]:
        return [c for c in self.outputs if self.qstar_only and c in PROTOCOL_ONLY]


# --------------------------------------------------------------------------
# config parsing


def _parse_pairs(text: str) -> Dict[str, str]:
    pairs: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _number(pairs, key, default=None, kind=float):
    if key not in pairs:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        value = kind(pairs[key])
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {pairs[key]!r} as {kind.__name__}") from None
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite")
    return value


def _parse_table(text: str):
    points = []
    for item in text.split(","):
        try:
            t, w = item.split(":")
            points.append((float(t), float(w)))
        except ValueError:
            raise ConfigError(f"protocol.table: bad entry {item.strip()!r}, expected 't:omega'") from None
    return tuple(points)


def _parse_outputs(text: str) -> Tuple[str, ...]:
    names: List[str] = []
    for item in (s.strip() for s in text.split(",")):
        if not item:
            continue
        if item in OUTPUT_GROUPS:
            expanded = OUTPUT_GROUPS[item]
        elif item in COLUMNS and item not in ("qstar", "omega1"):
            expanded = (item,)
        else:
            raise ConfigError(f"outputs: unknown quantity {item!r}")
        names.extend(c for c in expanded if c not in names)
    if not names:
        raise ConfigError("outputs: no quantities requested")
    return tuple(names)


def parse_config(text: str) -> RunConfig:
    """Build a :class:`RunConfig` from config-file text."""
    pairs = _parse_pairs(text)
    values = {}
    for k in _PARAM_KEYS:
        default = 1.0 if k in ("hbar", "mass") else None
        values[k] = _number(pairs, f"params.{k}", default)
        if not values[k] > 0.0:
            raise ConfigError(f"params.{k} must be > 0, got {values[k]!r}")
    params = OscillatorParams(values["beta"], values["omega0"], values["omega1"], values["hbar"], values["mass"])

    kind = pairs.get("protocol.kind", "sudden")
    table = _parse_table(pairs["protocol.table"]) if "protocol.table" in pairs else None
    try:
        if kind == "tabulated":
            if table is None:
                raise ConfigError("protocol.table is required for protocol.kind = tabulated")
            protocol = Protocol("tabulated", table[-1][0], table, pairs.get("protocol.interpolation", "pchip"))
        else:
            protocol = Protocol(kind, _number(pairs, "protocol.tau", 0.0), table)
        protocol.validate(params)
    except DomainError as exc:
        raise ConfigError(f"protocol: {exc}") from None

    try:
        grid = GridSpec(_number(pairs, "grid.n_points", 601, int), _number(pairs, "grid.half_width_mult", 8.0))
    except ThermolengthError as exc:
        raise ConfigError(f"grid: {exc}") from None

    sweep = None
    if "sweep.variable" in pairs:
        sweep = Sweep(
            pairs["sweep.variable"],
            _number(pairs, "sweep.from"),
            _number(pairs, "sweep.to"),
            _number(pairs, "sweep.steps", kind=int),
        )
        _check_sweep(sweep, params, protocol)
    elif any(k.startswith("sweep.") for k in pairs):
        raise ConfigError("sweep.variable is required when other sweep keys are given")

    tol = _number(pairs, "integrator.tol", DEFAULT_TOL)
    if not 1e-14 < tol < 1e-3:
        raise ConfigError(f"integrator.tol must lie in (1e-14, 1e-3), got {tol!r}")
    n_max = _number(pairs, "populations.n_max", 60, int)
    if not 1 <= n_max <= 200:
        raise ConfigError(f"populations.n_max must lie in [1, 200], got {n_max!r}")

    return RunConfig(
        params,
        protocol,
        grid,
        sweep,
        _parse_outputs(pairs.get("outputs", "sigma, bounds")),
        pairs.get("out_path", "results.csv"),
        tol,
        n_max,
    )


def _check_sweep(sweep: Sweep, params: OscillatorParams, protocol: Protocol) -> None:
    if sweep.variable not in SWEEP_VARIABLES:
        raise ConfigError(f"sweep.variable must be one of {SWEEP_VARIABLES}, got {sweep.variable!r}")
    if sweep.steps < 2:
        raise ConfigError(f"sweep.steps must be >= 2, got {sweep.steps!r}")
    if not sweep.start <= sweep.stop:
        raise ConfigError("sweep.from must not exceed sweep.to")
    if sweep.start == sweep.stop and sweep.variable != "omega1":
        raise ConfigError("sweep.from must be < sweep.to")
    if sweep.variable == "qstar" and sweep.start < 1.0:
        raise ConfigError("sweep.from: Q* must be >= 1")
    if sweep.variable == "omega1":
        if sweep.start <= 0.0:
            raise ConfigError("sweep.from: omega1 must be > 0")
        if protocol.kind == "tabulated":
            raise ConfigError("an omega1 sweep cannot use a tabulated protocol with fixed endpoints")
    if sweep.variable == "tau":
        if protocol.kind in ("sudden", "tabulated"):
            raise ConfigError(f"a tau sweep needs a linear or smoothstep protocol, not {protocol.kind!r}")
        if sweep.start < 0.0:
            raise ConfigError("sweep.from: tau must be >= 0")


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc}") from None
    return parse_config(text)


# --------------------------------------------------------------------------
# presets


def figure1_config(out_path: str = "figure1.csv") -> RunConfig:
    """Entropy production and Bures-angle bounds against Q* (no protocol needed)."""
    return RunConfig(
        OscillatorParams(beta=1.2, omega0=0.9, omega1=0.5, hbar=1.0, mass=1.0),
        Protocol.sudden(),
        GridSpec(),
        Sweep("qstar", 1.0, 5.0, 200),
        ("sigma", "s_bures", "leading_bures"),
        out_path,
    )


def figure2_config(out_path: str = "figure2.csv") -> RunConfig:
    """Sudden switch from omega0 = 0.9: Bures-angle versus trace-distance bounds."""
    return RunConfig(
        OscillatorParams(beta=4.8, omega0=0.9, omega1=0.5, hbar=1.0, mass=1.0),
        Protocol.sudden(),
        GridSpec(),
        Sweep("omega1", 0.3, 0.9, 25),
        ("sigma", "s_bures", "s_trace"),
        out_path,
    )


# --------------------------------------------------------------------------
# evaluation


@dataclass
class PointResult:
    row: Dict[str, float]
    report: BoundReport
    warnings: List[str] = field(default_factory=list)


def _point_setup(config: RunConfig, value: Optional[float]):
    params, protocol = config.params, config.protocol
    if config.sweep is None:
        return params, protocol, None
    var = config.sweep.variable
    if var == "omega1":
        params = params.with_omega1(float(value))
    elif var == "tau":
        protocol = replace(protocol, tau=float(value))
    return params, protocol, (float(value) if var == "qstar" else None)


def evaluate_point(config: RunConfig, value: Optional[float] = None) -> PointResult:
    """Evaluate every requested column at one sweep value."""
    params, protocol, qstar = _point_setup(config, value)
    wanted = set(config.columns())
    warnings = []
    td = None
    pops = None
    if qstar is None:
        traj = integrate_trajectory(params, protocol, config.tol)
        qstar = adiabaticity(params, traj)
        if "s_trace" in wanted:
            k_ne, k_eq = kernel_pair(params, traj, config.grid)
            result = trace_distance(k_ne, k_eq)
            if not result.converged:
                warnings.append(f"trace distance not grid-converged (change {result.refinement_change:.2e})")
            td = result.value
        if "upper_population" in wanted:
            spec = config.grid.resolve(nonequilibrium_state(params, traj), equilibrium_state(params, params.omega1))
            spec = population_grid(params, params.omega1, config.population_levels, spec)
            k_ne = kernel_nonequilibrium(params, traj, spec)
            n_max = min(config.population_levels, resolvable_levels(k_ne, params, params.omega1))
            pops = fock_populations(k_ne, params, params.omega1, n_max)
    report = evaluate_bounds(params, qstar, td, pops, upper="upper_eigenvalue" in wanted)
    values = {
        "qstar": report.qstar,
        "omega1": params.omega1,
        "tau": protocol.tau,
        "sigma": report.sigma_exact,
        "s_bures": report.lower_bures_angle_s,
        "leading_bures": report.lower_bures_angle_leading,
        "bures_distance_sq": report.lower_bures_distance,
        "s_trace": report.lower_trace,
        "upper_eigenvalue": report.upper_eigenvalue,
        "upper_population": report.upper_population,
        "fidelity": report.fidelity,
    }
    return PointResult({c: values[c] for c in config.columns()}, report, warnings)


def _evaluate_star(args):
    return evaluate_point(*args)


def evaluate(config: RunConfig, jobs: int = 1) -> List[PointResult]:
    """Evaluate all sweep points; results are in sweep order for any ``jobs``."""
    points = [None] if config.sweep is None else [float(v) for v in config.sweep.values()]
    tasks = [(config, v) for v in points]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_evaluate_star, tasks))
    return [evaluate_point(*t) for t in tasks]


def format_value(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def write_csv(columns: Sequence[str], results: Sequence[PointResult], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for res in results:
        writer.writerow([format_value(res.row[c]) for c in columns])


def render_csv(config: RunConfig, results: Sequence[PointResult]) -> str:
    buf = io.StringIO()
    write_csv(config.columns(), results, buf)
    return buf.getvalue()


def run(config: RunConfig, jobs: int = 1, out=None, err=None) -> int:
    """Evaluate ``config``, write its CSV and print a summary; returns the exit status."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    for name in config.dropped_outputs():
        print(f"warning: {name} needs a concrete protocol; column omitted from Q* sweep", file=err)
    try:
        results = evaluate(config, jobs)
    except ThermolengthError as exc:
        print(f"error: numerical failure: {exc}", file=err)
        return EXIT_NUMERIC
    text = render_csv(config, results)
    try:
        with open(config.out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"error: cannot write {config.out_path!r}: {exc}", file=err)
        return EXIT_NUMERIC

    status = EXIT_OK
    columns = config.columns()
    for i, res in enumerate(results):
        for w in res.warnings:
            print(f"warning: row {i}: {w}", file=err)
        violations = res.report.violations()
        if violations:
            status = EXIT_VIOLATION
            cells = ", ".join(f"{c}={format_value(res.row[c])}" for c in columns)
            print(f"VIOLATION row {i}: {cells}", file=out)
            for v in violations:
                print(f"  {v}", file=out)
    gaps = [r.report.sigma_exact - r.report.lower_bures_angle_s for r in results]
    print(f"wrote {len(results)} rows to {config.out_path}", file=out)
    print(f"columns: {','.join(columns)}", file=out)
    print(f"min sigma - s(2L/pi): {min(gaps)!r}", file=out)
    print("status: " + ("ok" if status == EXIT_OK else "bound violations found"), file=out)
    return status


# --------------------------------------------------------------------------
# check


def check(config: RunConfig) -> List[str]:
    """Static adequacy checks; returns warnings without evaluating any bound."""
    warnings = []
    params, grid = config.params, config.grid
    omegas = [params.omega0, params.omega1]
    if config.sweep is not None and config.sweep.variable == "omega1":
        omegas += [config.sweep.start, config.sweep.stop]
    states = [equilibrium_state(params, w) for w in omegas]
    spec = grid.resolve(*states)
    w_min = min(omegas)
    if hyp.is_asymptotic(params.half_arg(w_min)):
        ground = math.sqrt(params.hbar / (2.0 * params.mass * w_min))
        warnings.append(
            f"grid half-width recomputed from ground-state width: "
            f"L = {grid.half_width_mult:g} * {ground:.6g} = {spec.half_width:.6g} (thermal width saturated)"
        )
    _, dx = spec.nodes()
    sd_p = max(math.sqrt(s.var_pp) for s in states)
    if dx * sd_p / params.hbar > 0.5:
        warnings.append(
            f"grid spacing {dx:.3g} may not resolve coherences (momentum sd {sd_p:.3g}); increase grid.n_points"
        )
    for name in config.dropped_outputs():
        warnings.append(f"{name} needs a concrete protocol and will be omitted from the Q* sweep")
    return warnings


# --------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thermolength", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="evaluate a config and write its CSV")
    p_run.add_argument("config")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_check = sub.add_parser("check", help="validate a config without computing")
    p_check.add_argument("config")
    for name in ("figure1", "figure2"):
        p_fig = sub.add_parser(name, help=f"reproduce the {name} preset")
        p_fig.add_argument("--out", default=f"{name}.csv")
        p_fig.add_argument("--jobs", type=int, default=1)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "figure1":
            return run(figure1_config(args.out), args.jobs)
        if args.command == "figure2":
            return run(figure2_config(args.out), args.jobs)
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "check":
        try:
            warnings = check(config)
        except ThermolengthError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for w in warnings:
            print(f"warning: {w}")
        print("ok")
        return EXIT_OK
    return run(config, args.jobs)


if __name__ == "__main__":
    raise SystemExit(main())
