"""Batch command line: ``nlx <command> [flags]`` or ``nlx --config experiment.json``.

Exit codes: 0 success, 1 error, 2 a verdict failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Sequence

from . import bsde, choquet, closedform, pde
from .claim import (DECREASING, INCREASING, TerminalClaim, format_intervals, interval_indicator, parse_claim,
                    parse_intervals)
from .driver import KappaIgnorance, Linear, TimeFunction, Zero, classify_linearity, eval_driver, parse_driver
from .report import FAIL, NOT_APPLICABLE, PASS, Report, ReportError, emit_report, write_table

COMMANDS = ("gexp", "capacity", "choquet", "gap", "pde-compare", "slope", "classify")
N_CLAIMS = {"gexp": 1, "choquet": 1, "pde-compare": 1, "gap": 2,
            "capacity": 0, "slope": 0, "classify": 0}
DEFAULT_STEPS = {"pde-compare": 8001, "slope": 200}
_INPUT_FIELDS = {
    "gexp": ["claims", "T", "steps"],
    "capacity": ["set", "T", "steps"],
    "choquet": ["claims", "T", "steps", "thresholds"],
    "gap": ["claims", "T", "steps", "thresholds"],
    "pde-compare": ["claims", "T", "steps", "x_points", "nx"],
    "slope": ["steps", "b", "horizons"],
    "classify": ["times"],
}

TOLERANCES = {
    "version": "1",
    "oracle_abs": 2e-3,
    "pde_abs": 5e-3,
    "slope_abs": 5e-3,
    "gap_strictness_factor": 5.0,
    "linear_gap_abs": 1e-12,
    "linearity": 1e-9,
    "capacity_range": 1e-12,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    driver: str
    claims: tuple[str, ...] = ()
    T: float = 1.0
    steps: int = 2000
    thresholds: int = 200
    format: str = "json"
    output: str | None = None
    set: str | None = None
    x_points: tuple[float, ...] = (-1.0, 0.0, 1.0)
    nx: int = 3001
    b: tuple[float, ...] = (2.0, -1.0)
    horizons: tuple[float, ...] = (0.1, 0.05, 0.025)
    times: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    table: str | None = None

    def echo(self) -> dict[str, Any]:
        """The fields that influence this command's numbers."""
        d = asdict(self)
        keep = ["command", "driver"] + _INPUT_FIELDS[self.command]
        return {k: list(d[k]) if isinstance(d[k], tuple) else d[k] for k in keep}


def _positive(name: str, value, kind=float):
    try:
        v = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a {kind.__name__}, got {value!r}") from None
    if kind is int and v != float(value):
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    if not (math.isfinite(v) and v > 0):
        raise ConfigError(f"{name}: must be positive, got {value!r}")
    return v


def _floats(name: str, value) -> tuple[float, ...]:
    if isinstance(value, str):
        value = [p for p in value.replace(",", " ").split()]
    try:
        out = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a list of numbers, got {value!r}") from None
    if not out:
        raise ConfigError(f"{name}: must not be empty")
    return out


def validate_config(raw: dict[str, Any], base_dir: str | Path | None = None) -> ExperimentConfig:
    """The single validator behind both the flag and the JSON-file forms."""
    raw = {k: v for k, v in raw.items() if v is not None}
    command = raw.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command: unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    known = set(ExperimentConfig.__dataclass_fields__) | {"claim"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown field")

    driver = raw.get("driver", "zero" if command != "classify" else None)
    if driver is None:
        raise ConfigError("driver: required")
    try:
        parse_driver(str(driver), base_dir)
    except ValueError as exc:
        raise ConfigError(f"driver: {exc}") from None

    claims = raw.get("claims", raw.get("claim", ()))
    if isinstance(claims, str):
        claims = (claims,)
    claims = tuple(str(c) for c in claims)
    if len(claims) != N_CLAIMS[command]:
        raise ConfigError(f"claims: {command} needs {N_CLAIMS[command]} claim(s), got {len(claims)}")
    for c in claims:
        try:
            parse_claim(c, base_dir)
        except ValueError as exc:
            raise ConfigError(f"claims: {exc}") from None

    fmt = raw.get("format", "json")
    if fmt not in ("json", "csv"):
        raise ConfigError(f"format: must be json or csv, got {fmt!r}")

    interval_set = raw.get("set")
    if command == "capacity":
        if interval_set is None:
            raise ConfigError("set: capacity needs --set")
        try:
            choquet.check_intervals(parse_intervals(str(interval_set)))
        except ValueError as exc:
            raise ConfigError(f"set: {exc}") from None

    cfg = ExperimentConfig(
        command=command,
        driver=str(driver),
        claims=claims,
        T=_positive("T", raw.get("T", 1.0)),
        steps=_positive("steps", raw.get("steps", DEFAULT_STEPS.get(command, 2000)), int),
        thresholds=_positive("thresholds", raw.get("thresholds", 200), int),
        format=fmt,
        output=raw.get("output"),
        set=None if interval_set is None else str(interval_set),
        x_points=_floats("x_points", raw.get("x_points", (-1.0, 0.0, 1.0))),
        nx=_positive("nx", raw.get("nx", 3001), int),
        b=_floats("b", raw.get("b", (2.0, -1.0))),
        horizons=_floats("horizons", raw.get("horizons", (0.1, 0.05, 0.025))),
        times=_floats("times", raw.get("times", (0.0, 0.25, 0.5, 0.75, 1.0))),
        table=raw.get("table"),
    )
    if cfg.thresholds < 2:
        raise ConfigError("thresholds: must be at least 2")
    if cfg.nx < 3:
        raise ConfigError("nx: must be at least 3")
    if any(h <= 0 for h in cfg.horizons):
        raise ConfigError("horizons: must be positive")
    return cfg


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nlx", description="g-expectations, g-capacities and Choquet integrals.")
    parser.add_argument("--config", help="JSON file with the experiment fields")
    parser.add_argument("--format", choices=("json", "csv"))
    parser.add_argument("--output")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--driver")
        if N_CLAIMS[name] == 1:
            p.add_argument("--claim")
        elif N_CLAIMS[name] == 2:
            p.add_argument("--claims", nargs=2)
        p.add_argument("--T", type=str)
        p.add_argument("--steps", type=str)
        p.add_argument("--format", dest="sub_format", choices=("json", "csv"))
        p.add_argument("--output", dest="sub_output")
        if name in ("choquet", "gap"):
            p.add_argument("--thresholds", type=str)
        if name == "choquet":
            p.add_argument("--table", help="write the per-threshold CSV here")
        if name == "capacity":
            p.add_argument("--set", help='intervals "lo,hi;lo,hi" (inf allowed)')
        if name == "pde-compare":
            p.add_argument("--x-points", dest="x_points", nargs="+")
            p.add_argument("--nx", type=str)
            p.add_argument("--table", help="write the PDE surface (t, x, u) here")
        if name == "slope":
            p.add_argument("--b", nargs="+")
            p.add_argument("--horizons", nargs="+")
        if name == "classify":
            p.add_argument("--times", nargs="+")
    return parser


def parse_config(argv: Sequence[str]) -> ExperimentConfig:
    args = build_parser().parse_args(list(argv))
    if args.config:
        path = Path(args.config)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be an object")
        if args.command:
            raise ConfigError("config: give either --config or a command, not both")
        if args.format:
            raw["format"] = args.format
        if args.output:
            raw["output"] = args.output
        return validate_config(raw, path.parent)
    if not args.command:
        raise ConfigError("command: missing (or pass --config)")
    raw = {k: v for k, v in vars(args).items()
           if k not in ("config", "format", "output", "sub_format", "sub_output")}
    raw["format"] = args.sub_format or args.format
    raw["output"] = args.sub_output or args.output
    return validate_config(raw)


# -- experiments ---------------------------------------------------------------

def _oracle(driver, f: TerminalClaim, T: float):
    """Closed-form E_g[f(W_T)] when one exists for this driver/claim pair."""
    if isinstance(driver, Zero):
        return closedform.girsanov_linear_expectation(f, TimeFunction.constant(0.0), T)
    if isinstance(driver, Linear):
        return closedform.girsanov_linear_expectation(f, driver.nu, T)
    if (isinstance(driver, KappaIgnorance) and driver.nu.is_constant and driver.nu.values[0] == 0.0
            and min(driver.mu.values) >= 0 and f.monotone_flag in (INCREASING, DECREASING)):
        return closedform.monotone_kappa_expectation(f, driver.mu, T)
    return None


def _verdict(flags: list[bool]) -> str:
    if not flags:
        return NOT_APPLICABLE
    return PASS if all(flags) else FAIL


def _run_gexp(cfg, driver, claims, base_dir):
    f = claims[0]
    value, err = bsde.richardson(lambda n: bsde.g_expectation(f, driver, cfg.T, n), cfg.steps)
    oracle = _oracle(driver, f, cfg.T)
    row = {"driver": cfg.driver, "claim": cfg.claims[0], "T": cfg.T, "steps": cfg.steps,
           "e_g": value, "richardson_error": err, "oracle": oracle,
           "abs_error": None if oracle is None else abs(value - oracle)}
    flags = [] if oracle is None else [row["abs_error"] <= TOLERANCES["oracle_abs"]]
    row["verdict"] = _verdict(flags)
    return list(row), [row], row["verdict"], []


def _run_capacity(cfg, driver, claims, base_dir):
    A = choquet.check_intervals(parse_intervals(cfg.set))
    value, err = bsde.richardson(lambda n: choquet.Capacity(driver, cfg.T, n)(A), cfg.steps)
    tol = TOLERANCES["capacity_range"]
    oracle = _oracle(driver, interval_indicator(A), cfg.T)
    row = {"driver": cfg.driver, "set": format_intervals(A), "T": cfg.T, "steps": cfg.steps,
           "capacity": value, "richardson_error": err, "oracle": oracle}
    flags = [-tol <= value <= 1 + tol]
    if oracle is not None:
        flags.append(abs(value - oracle) <= TOLERANCES["oracle_abs"])
    row["verdict"] = _verdict(flags)
    return list(row), [row], row["verdict"], []


def _run_choquet(cfg, driver, claims, base_dir):
    f = claims[0]
    cap = choquet.Capacity(driver, cfg.T, cfg.steps)
    res = choquet.choquet_expectation(cap, f, cfg.thresholds)
    e_g = bsde.g_expectation(f, driver, cfg.T, cfg.steps)
    oracle = _oracle(driver, f, cfg.T) if isinstance(driver, (Zero, Linear)) else None
    row = {"driver": cfg.driver, "claim": cfg.claims[0], "T": cfg.T, "steps": cfg.steps,
           "thresholds": cfg.thresholds, "choquet": res.value,
           "quadrature_error": res.quadrature_error_estimate, "e_g": e_g, "oracle": oracle}
    flags = [f.f_min - 1e-12 <= res.value <= f.f_max + 1e-12]
    if oracle is not None:
        flags.append(abs(res.value - oracle) <= TOLERANCES["oracle_abs"] + res.quadrature_error_estimate)
    row["verdict"] = _verdict(flags)
    if cfg.table:
        write_table(cfg.table, ["s", "V", "partial_integral"], res.table())
    return list(row), [row], row["verdict"], []


def _run_gap(cfg, driver, claims, base_dir):
    f, h = claims
    res = choquet.additivity_gaps(driver, f, h, cfg.T, cfg.steps, cfg.thresholds)
    verdict_info = classify_linearity(driver, [0.0, cfg.T / 2, cfg.T])
    choquet_ok = abs(res.choquet_gap) <= res.choquet_gap_error
    if verdict_info.is_linear_in_z and verdict_info.max_residual <= TOLERANCES["linearity"]:
        flags = [abs(res.g_gap) <= TOLERANCES["linear_gap_abs"], choquet_ok]
        note = ("driver is linear in z: E_g matched an additive expectation on this pair, "
                "consistent with a Choquet representation")
    else:
        strict = abs(res.g_gap) > TOLERANCES["gap_strictness_factor"] * res.g_gap_error
        mu = verdict_info.mu_hat.values
        if min(mu) >= 0:
            strict = strict and res.g_gap < 0
        elif max(mu) <= 0:
            strict = strict and res.g_gap > 0
        flags = [strict, choquet_ok]
        note = ("driver is nonlinear in z: E_g is not additive on this comonotonic pair while the "
                "Choquet integral is; numerical evidence that no capacity reproduces E_g")
    row = {"claim1": cfg.claims[0], "claim2": cfg.claims[1],
           "e_g_sum_parts": res.e_sum_parts, "e_g_joint": res.e_joint,
           "g_gap": res.g_gap, "g_gap_error": res.g_gap_error,
           "choquet_sum_parts": res.c_sum_parts, "choquet_joint": res.c_joint,
           "choquet_gap": res.choquet_gap, "choquet_gap_error": res.choquet_gap_error}
    row["verdict"] = _verdict(flags)
    return list(row), [row], row["verdict"], [note]


def _run_pde(cfg, driver, claims, base_dir):
    f = claims[0]
    rows_out = pde.feynman_kac_compare(driver, f, cfg.T, cfg.x_points, cfg.nx, cfg.steps)
    if cfg.table:
        x_lo, x_hi = pde.compare_domain(f, cfg.T, cfg.x_points, cfg.nx)
        surface = pde.solve_nonlinear_heat(driver, f, cfg.T, x_lo, x_hi, cfg.nx)
        write_table(cfg.table, ["t", "x", "u"], surface.rows())
    rows = []
    for r in rows_out:
        ok = r.diff <= TOLERANCES["pde_abs"]
        rows.append({"x": r.x, "u_pde": r.u_pde, "e_g_lattice": r.e_g_lattice, "abs_diff": r.diff,
                     "verdict": PASS if ok else FAIL})
    return ["x", "u_pde", "e_g_lattice", "abs_diff", "verdict"], rows, \
        _verdict([r["verdict"] == PASS for r in rows]), []


def _run_slope(cfg, driver, claims, base_dir):
    rows = []
    for b in cfg.b:
        target = eval_driver(driver, 0.0, b, 0.0)
        for s, slope in bsde.representation_slope(driver, b, cfg.horizons, cfg.steps):
            ok = abs(slope - target) <= TOLERANCES["slope_abs"]
            rows.append({"b": b, "s": s, "slope": slope, "target": target,
                         "abs_error": abs(slope - target), "verdict": PASS if ok else FAIL})
    return ["b", "s", "slope", "target", "abs_error", "verdict"], rows, \
        _verdict([r["verdict"] == PASS for r in rows]), []


def _run_classify(cfg, driver, claims, base_dir):
    v = classify_linearity(driver, cfg.times, TOLERANCES["linearity"])
    ok = v.max_residual <= TOLERANCES["linearity"]
    rows = [{"t": t, "mu_hat": m, "nu_hat": n, "is_linear_in_z": v.is_linear_in_z,
             "max_residual": v.max_residual, "verdict": PASS if ok else FAIL}
            for t, m, n in zip(v.mu_hat.times, v.mu_hat.values, v.nu_hat.values)]
    return ["t", "mu_hat", "nu_hat", "is_linear_in_z", "max_residual", "verdict"], rows, \
        PASS if ok else FAIL, []


_RUNNERS = {
    "gexp": _run_gexp, "capacity": _run_capacity, "choquet": _run_choquet, "gap": _run_gap,
    "pde-compare": _run_pde, "slope": _run_slope, "classify": _run_classify,
}


def run_experiment(cfg: ExperimentConfig, base_dir: str | Path | None = None) -> Report:
    driver = parse_driver(cfg.driver, base_dir)
    claims = [parse_claim(c, base_dir) for c in cfg.claims]
    columns, rows, verdict, notes = _RUNNERS[cfg.command](cfg, driver, claims, base_dir)
    return Report(cfg.command, cfg.echo(), dict(TOLERANCES), columns, rows, verdict, notes)


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        report = run_experiment(cfg)
        emit_report(report, cfg.format, cfg.output)
    except (ConfigError, ReportError) as exc:
        print(f"nlx: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, IndexError) as exc:
        print(f"nlx: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 2 if report.verdict == FAIL else 0


if __name__ == "__main__":
    sys.exit(main())
