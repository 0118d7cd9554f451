"""Command-line front end: ``delta-hartree {solve,verify,sweep,nonexistence}``.

Exit codes
----------
solve         0 converged, 3 not converged, 2 parameters outside the regime, 1 I/O or config error
verify        0 every identity passes, 1 otherwise (including unreadable reports)
sweep         0 rows written, 1 empty value list or I/O error
nonexistence  0 limit within 1% of the closed form, 1 outside or I/O error, 2 wrong regime
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from math import pi, sqrt

from .radial import GridError, RadialGrid, Spacing, build_grid
from .regimes import InvalidParameterError, Parameters, RegimeError, classify_regime
from .riesz import RieszOperator
from .solver import (
    BoundStateReport,
    SolverOptions,
    ZeroMassError,
    gradient_multiplier,
    minimize_h1,
    minimize_x,
)
from .state import SingularState, boundary_residual
from .verify import (
    IdentityReport,
    NoConvergenceError,
    critical_identity_residual,
    curve_csv,
    energy_comparison,
    nehari_residual,
    pohozaev_residual,
    reports_json,
    scaling_family_curve,
)

log = logging.getLogger("delta_hartree")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_REGIME = 2
EXIT_NO_CONVERGENCE = 3

BOUNDARY_TOL = 1e-2
NONEXISTENCE_TOL = 1e-2
DEFAULT_T_VALUES = (1.0, 0.5, 0.25, 0.125)
SWEEP_VARIABLES = ("mu", "alpha", "p")

# ground states at unit mass are ~100 wide, so the run grid reaches far out
DEFAULT_RUN_GRID = {"r_min": 1e-6, "r_max": 1000.0, "n": 4096, "spacing": "logarithmic"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OutputSpec:
    path: str | None = None
    format: str = "json"

    def __post_init__(self):
        if self.format not in ("json", "csv"):
            raise ConfigError(f"output format must be json or csv, got {self.format!r}")


@dataclass(frozen=True)
class RunConfig:
    params: Parameters
    grid: dict = field(default_factory=lambda: dict(DEFAULT_RUN_GRID))
    solver: SolverOptions = field(default_factory=SolverOptions)
    output: OutputSpec = field(default_factory=OutputSpec)

    def build_grid(self) -> RadialGrid:
        return build_grid(**self.grid)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "grid": dict(self.grid),
            "solver": self.solver.to_dict(),
            "output": {"path": self.output.path, "format": self.output.format},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict) or "params" not in data:
            raise ConfigError("config needs a 'params' object")
        try:
            params = Parameters(**_only(data["params"], Parameters))
            grid = dict(DEFAULT_RUN_GRID)
            grid.update(data.get("grid") or {})
            grid = {
                "r_min": float(grid["r_min"]),
                "r_max": float(grid["r_max"]),
                "n": int(grid["n"]),
                "spacing": Spacing(grid["spacing"]).value,
            }
            solver = SolverOptions(**_only(data.get("solver") or {}, SolverOptions))
            output = OutputSpec(**_only(data.get("output") or {}, OutputSpec))
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        return cls(params, grid, solver, output)


def _only(data: dict, cls) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__} section must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return dict(data)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return RunConfig.from_dict(data)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DELTA_HARTREE_THREADS", "1")))
    except ValueError:
        return 1


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# solve


def cmd_solve(config: RunConfig, mode: str, out: str | None = None) -> int:
    params = config.params
    reg = classify_regime(params)
    if mode == "h1" and not reg.ye_existence:
        print(f"regime error: charge-free ground states need (3+beta)/3 < p < (5+beta)/3 (p={params.p})", file=sys.stderr)
        return EXIT_REGIME
    if mode == "x" and not reg.ground_state_regime:
        why = "mass-critical exponent" if reg.mass_critical else "outside the ground state regime"
        print(f"regime error: {why} (p={params.p}, beta={params.beta})", file=sys.stderr)
        return EXIT_REGIME
    try:
        grid = config.build_grid()
    except GridError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    op = RieszOperator.build(params.beta, grid)
    report = minimize_h1(params, grid, op, config.solver) if mode == "h1" else minimize_x(params, grid, op, config.solver)
    path = out or config.output.path
    if config.output.format == "csv":
        u = report.state
        rows = zip(grid.nodes, u.phi.values, u.u_values)
        text = curve_csv(("r", "phi", "u"), rows)
    else:
        text = report_json(report, config)
    try:
        _write(path, text)
    except OSError as exc:
        print(f"cannot write {path}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    e = report.energy
    print(
        f"mode={mode} converged={report.converged} iterations={report.iterations} "
        f"E={e.energy!r} q={report.state.q!r} omega={report.omega!r}",
        file=sys.stderr,
    )
    return EXIT_OK if report.converged else EXIT_NO_CONVERGENCE


def report_json(report: BoundStateReport, config: RunConfig) -> str:
    payload = {"timestamp": _timestamp(), "config": config.to_dict(), "report": report.to_dict()}
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# verify


def load_report(path: str):
    """``(state, params, omega)`` from a solve report."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    rep = data["report"]
    params = Parameters(**data["config"]["params"])
    state = SingularState.from_dict(rep["state"])
    return state, params, rep.get("omega")


def identity_reports(u: SingularState, params: Parameters, op: RieszOperator, omega: float | None = None) -> list[IdentityReport]:
    if omega is None:
        omega = 0.0 if u.mass == 0.0 else gradient_multiplier(u, op, params)
    out = [nehari_residual(u, omega, op, params), pohozaev_residual(u, omega, op, params)]
    if u.q != 0.0:
        target = (params.alpha + sqrt(u.lam) / (4.0 * pi)) * u.q
        res = abs(boundary_residual(u, params.alpha))
        out.append(
            IdentityReport(u.phi.at_origin(), target, res, bool(res <= BOUNDARY_TOL), BOUNDARY_TOL, "boundary", "normalized by state size")
        )
    if classify_regime(params).mass_critical:
        out.append(critical_identity_residual(u, params.alpha, params))
    return out


def cmd_verify(config: RunConfig | None, report_path: str, out: str | None = None) -> int:
    try:
        u, params, _ = load_report(report_path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"cannot read report {report_path}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if config is not None:
        params = config.params
    try:
        op = RieszOperator.build(params.beta, u.grid)
        # the multiplier is re-derived from the state, never trusted from the file
        reports = identity_reports(u, params, op)
    except (RegimeError, ZeroMassError, ValueError) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for r in reports:
        print(f"{r.name:18s} {'PASS' if r.passed else 'FAIL'} residual={r.residual:.3e} threshold={r.threshold:.0e} {r.note}".rstrip())
    if out:
        try:
            _write(out, reports_json(reports) + "\n")
        except OSError as exc:
            print(f"cannot write {out}: {exc}", file=sys.stderr)
            return EXIT_FAIL
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# ---------------------------------------------------------------------------
# sweep


SWEEP_HEADER = ("variable", "value", "e_x", "e_h1", "gap", "q", "omega", "converged", "flag")


def _sweep_row(config: RunConfig, variable: str, value: float, grid: RadialGrid, ops: dict) -> tuple:
    nan = float("nan")
    try:
        params = replace(config.params, **{variable: value})
    except InvalidParameterError:
        return (variable, value, nan, nan, nan, nan, nan, False, "invalid-parameters")
    reg = classify_regime(params)
    if reg.mass_critical:
        return (variable, value, nan, nan, nan, nan, nan, False, "mass-critical")
    if not reg.ground_state_regime:
        return (variable, value, nan, nan, nan, nan, nan, False, "outside-regime")
    op = ops[params.beta]
    try:
        cmp = energy_comparison(params, grid, op, config.solver)
        x = cmp.x_report
        flag = "ok" if cmp.gap > 0 else "gap-not-positive"
        return (variable, value, cmp.e_x, cmp.e_h1, cmp.gap, x.state.q, x.omega, True, flag)
    except NoConvergenceError as exc:
        x, h1 = exc.reports
        return (variable, value, x.energy.energy, h1.energy.energy, h1.energy.energy - x.energy.energy, x.state.q, x.omega, False, "not-converged")


def cmd_sweep(config: RunConfig, variable: str, values: list[float], out: str | None = None) -> int:
    if variable not in SWEEP_VARIABLES:
        print(f"sweep variable must be one of {SWEEP_VARIABLES}", file=sys.stderr)
        return EXIT_FAIL
    if not values:
        print("empty value list", file=sys.stderr)
        return EXIT_FAIL
    try:
        grid = config.build_grid()
    except GridError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    ops = {config.params.beta: RieszOperator.build(config.params.beta, grid)}
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        # results are collected in input order
        rows = list(pool.map(lambda v: _sweep_row(config, variable, v, grid, ops), values))
    text = curve_csv(SWEEP_HEADER, rows)
    path = out or config.output.path
    try:
        _write(path, text)
    except OSError as exc:
        print(f"cannot write {path}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# ---------------------------------------------------------------------------
# nonexistence


def cmd_nonexistence(config: RunConfig, t_values=DEFAULT_T_VALUES, out: str | None = None) -> int:
    params = config.params
    reg = classify_regime(params)
    if not reg.mass_critical or params.alpha < 0:
        print(f"regime error: the scaling family needs p = (3+beta)/3 and alpha >= 0 (p={params.p}, alpha={params.alpha})", file=sys.stderr)
        return EXIT_REGIME
    t_values = list(t_values)
    try:
        curve = scaling_family_curve(params, t_values)
    except ValueError as exc:
        print(f"invalid t values: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        _write(out or config.output.path, curve_csv(("t", "energy"), curve.rows()))
    except OSError as exc:
        print(f"cannot write: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if curve.limit is None:
        log.warning("a single t value was given: extrapolation skipped")
        print(f"closed_form={curve.closed_form!r} limit=skipped", file=sys.stderr)
        return EXIT_OK
    rel = curve.relative_error
    print(f"limit={curve.limit!r} closed_form={curve.closed_form!r} relative_error={rel:.3e}", file=sys.stderr)
    return EXIT_OK if rel <= NONEXISTENCE_TOL else EXIT_FAIL


# ---------------------------------------------------------------------------
# entry point


def _float_list(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", help="output file (defaults to the config's output path, else stdout)")
    common.add_argument("--seed", type=int, help="overrides the solver seed")

    parser = argparse.ArgumentParser(prog="delta-hartree", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="minimize the energy at fixed mass")
    p.add_argument("--mode", choices=("h1", "x"), default="x")

    p = sub.add_parser("verify", parents=[common], help="check the identities on a solve report")
    p.add_argument("--report", required=True)

    p = sub.add_parser("sweep", parents=[common], help="energy comparison over one parameter")
    p.add_argument("--sweep", required=True, choices=SWEEP_VARIABLES, dest="variable")
    p.add_argument("--values", required=True, type=_float_list)

    p = sub.add_parser("nonexistence", parents=[common], help="scaling family limit at the mass-critical power")
    p.add_argument("--values", "--t-values", dest="values", type=_float_list, default=list(DEFAULT_T_VALUES))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for regime errors here
        return EXIT_OK if exc.code == 0 else EXIT_FAIL
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.seed is not None:
        config = replace(config, solver=replace(config.solver, seed=args.seed))
    if args.command == "solve":
        return cmd_solve(config, args.mode, args.out)
    if args.command == "verify":
        return cmd_verify(config, args.report, args.out)
    if args.command == "sweep":
        return cmd_sweep(config, args.variable, args.values, args.out)
    return cmd_nonexistence(config, args.values, args.out)


if __name__ == "__main__":
    sys.exit(main())
