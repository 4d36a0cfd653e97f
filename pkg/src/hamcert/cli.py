"""Command-line driver: declarative problem files in, structured reports out.

A problem file is a sectioned key = value document (``schema = 1``) that
declares the two components (kernel, weight, nonlinearity, envelope,
optional bound hints), the cone variant, the certification ladder, and
solver settings.  Subcommands run the assumption checks, the constants
table, scenario certification, non-existence sampling, the Picard solver,
and the Green-family property suite.

Exit codes: 0 holds/passed/converged, 2 fails, 3 inconclusive, 1 error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, exprlang, greens3
from .conditions import (
    _SCENARIOS,
    Box4,
    Certificate,
    HintPolicy,
    Scenario,
    Verdict,
    certify,
    check_nonexistence,
)
from .constants import compute_table
from .exprlang import ExprError
from .quadopt import QuadratureFailure
from .model import (
    AssumptionReport,
    BoundHints,
    Component,
    ConeVariant,
    Envelope,
    HINT_VARS,
    KernelSpec,
    SystemProblem,
    check_kernel_derivative,
    verify_A3,
    verify_A4,
    verify_nonneg_f,
)
from .solver import (
    GridPair,
    bump_init,
    cone_membership,
    derivative_consistency,
    export_table,
    localization_check,
    picard,
)


class ProblemFileError(ValueError):
    def __init__(self, message: str, path: str, line: int, col: int = 1):
        super().__init__(f"{path}:{line}:{col}: {message}")
        self.path = path
        self.line = line
        self.col = col


_GREEN_RE = re.compile(r"green\((.*)\)\s*$")

_ENVELOPE_KEYS = ("phi", "psi", "a", "b", "c", "gamma", "delta", "d")
_HINT_KEYS = ("sup_hint", "inf_plain_hint", "inf_star_hint")
_SECTION_KEYS = {
    "component.1": {"kernel", "kernel_dt", "weight", "f", *_ENVELOPE_KEYS, *_HINT_KEYS},
    "component.2": {"kernel", "kernel_dt", "weight", "f", *_ENVELOPE_KEYS, *_HINT_KEYS},
    "cone": {"variant"},
    "check": {
        "scenario", "rho", "r", "s", "sigma",
        "resolution", "nonexistence_box", "nonexistence_resolution",
    },
    "solver": {"n", "theta", "tol", "max_iter", "init", "scale"},
}

_VARIANTS = {v.value: v for v in ConeVariant}


@dataclasses.dataclass(frozen=True)
class _Entry:
    value: str
    line: int
    col: int


def _parse_sections(text: str, path: str) -> dict[str, dict[str, _Entry]]:
    sections: dict[str, dict[str, _Entry]] = {}
    current: str | None = None
    saw_schema = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("["):
            m = re.fullmatch(r"\[([a-z0-9.]+)\]", stripped)
            if m is None:
                raise ProblemFileError(f"malformed section header {stripped!r}", path, lineno)
            name = m.group(1)
            if name not in _SECTION_KEYS:
                raise ProblemFileError(f"unknown section [{name}]", path, lineno)
            if name in sections:
                raise ProblemFileError(f"duplicate section [{name}]", path, lineno)
            if not saw_schema:
                raise ProblemFileError("first entry must be 'schema = 1'", path, lineno)
            sections[name] = {}
            current = name
            continue
        if "=" not in stripped:
            raise ProblemFileError(f"expected 'key = value', got {stripped!r}", path, lineno)
        key_part, _, value = raw.partition("=")
        key = key_part.strip()
        col = raw.index(key) + 1 if key else 1
        value = value.strip()
        if not key:
            raise ProblemFileError("missing key before '='", path, lineno, col)
        if not saw_schema:
            if key != "schema":
                raise ProblemFileError("first entry must be 'schema = 1'", path, lineno, col)
            if value != "1":
                raise ProblemFileError(f"unsupported schema {value!r}", path, lineno, col)
            saw_schema = True
            continue
        if key == "schema":
            raise ProblemFileError("duplicate schema entry", path, lineno, col)
        if current is None:
            raise ProblemFileError(f"key {key!r} outside any section", path, lineno, col)
        if key not in _SECTION_KEYS[current]:
            raise ProblemFileError(f"unknown key {key!r} in section [{current}]", path, lineno, col)
        if key in sections[current]:
            raise ProblemFileError(f"duplicate key {key!r} in section [{current}]", path, lineno, col)
        sections[current][key] = _Entry(value, lineno, col)
    if not saw_schema:
        raise ProblemFileError("first entry must be 'schema = 1'", path, 1)
    for required in ("component.1", "component.2"):
        if required not in sections:
            raise ProblemFileError(f"missing section [{required}]", path, 1)
    return sections


def _const(entry: _Entry, path: str) -> float:
    """Evaluate a variable-free arithmetic value such as 7/32 or 1e-10."""
    try:
        val = exprlang.evaluate(exprlang.parse(entry.value, ()), {})
    except ExprError as exc:
        raise ProblemFileError(str(exc), path, entry.line, entry.col) from exc
    return float(val)


def _expr(entry: _Entry, variables: tuple[str, ...], path: str):
    try:
        return exprlang.parse(entry.value, variables)
    except ExprError as exc:
        raise ProblemFileError(str(exc), path, entry.line, entry.col) from exc


def _pair(entry: _Entry, path: str) -> tuple[float, float]:
    parts = entry.value.split(",")
    if len(parts) != 2:
        raise ProblemFileError(
            f"expected two comma-separated values, got {entry.value!r}",
            path, entry.line, entry.col,
        )
    return (
        _const(_Entry(parts[0].strip(), entry.line, entry.col), path),
        _const(_Entry(parts[1].strip(), entry.line, entry.col), path),
    )


@dataclasses.dataclass(frozen=True)
class CheckConfig:
    scenario: Scenario | None
    ladder: tuple[tuple[float, float], ...]
    resolution: int
    nonexistence_box: tuple[float, float]
    nonexistence_resolution: int


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    n: int = 401
    theta: float = 1.0
    tol: float = 1e-10
    max_iter: int = 200
    init: str = "zero"
    scale: float = 1.0


@dataclasses.dataclass(frozen=True)
class LoadedProblem:
    problem: SystemProblem
    check: CheckConfig
    solver: SolverConfig
    green_params: tuple[greens3.GreenParams | None, greens3.GreenParams | None]
    path: str


def _build_component(
    sec: dict[str, _Entry], name: str, path: str
) -> tuple[Component, greens3.GreenParams | None]:
    for key in ("kernel", "weight", "f"):
        if key not in sec:
            raise ProblemFileError(f"[{name}] is missing {key!r}", path, 1)
    kentry = sec["kernel"]
    green = _GREEN_RE.fullmatch(kentry.value)
    params: greens3.GreenParams | None = None
    if green is not None:
        if "kernel_dt" in sec:
            e = sec["kernel_dt"]
            raise ProblemFileError(
                "kernel_dt is not allowed with a green(...) kernel", path, e.line, e.col
            )
        args = green.group(1).split(",")
        if len(args) != 2:
            raise ProblemFileError(
                "green(...) takes exactly two arguments (alpha, eta)",
                path, kentry.line, kentry.col,
            )
        alpha = _const(_Entry(args[0].strip(), kentry.line, kentry.col), path)
        eta = _const(_Entry(args[1].strip(), kentry.line, kentry.col), path)
        try:
            params = greens3.GreenParams(alpha, eta)
        except greens3.ParamError as exc:
            raise ProblemFileError(str(exc), path, kentry.line, kentry.col) from exc
        kernel = greens3.build_kernel(params)
        envelope = greens3.default_envelope(params)
        overrides = {}
        for key in _ENVELOPE_KEYS:
            if key in sec:
                if key in ("phi", "psi"):
                    overrides[key] = _expr(sec[key], ("s",), path)
                else:
                    overrides[key] = _const(sec[key], path)
        if overrides:
            envelope = dataclasses.replace(envelope, **overrides)
    else:
        if "kernel_dt" not in sec:
            raise ProblemFileError(
                "an expression kernel needs kernel_dt", path, kentry.line, kentry.col
            )
        kernel = KernelSpec.from_expressions(
            _expr(kentry, ("t", "s"), path),
            _expr(sec["kernel_dt"], ("t", "s"), path),
        )
        missing = [key for key in _ENVELOPE_KEYS if key not in sec]
        if missing:
            raise ProblemFileError(
                f"[{name}] with an expression kernel must declare {', '.join(missing)}",
                path, kentry.line,
            )
        envelope = Envelope(
            phi=_expr(sec["phi"], ("s",), path),
            psi=_expr(sec["psi"], ("s",), path),
            a=_const(sec["a"], path),
            b=_const(sec["b"], path),
            c=_const(sec["c"], path),
            gamma=_const(sec["gamma"], path),
            delta=_const(sec["delta"], path),
            d=_const(sec["d"], path),
        )
    hints = BoundHints(
        sup=_expr(sec["sup_hint"], HINT_VARS, path) if "sup_hint" in sec else None,
        inf_plain=_expr(sec["inf_plain_hint"], HINT_VARS, path) if "inf_plain_hint" in sec else None,
        inf_star=_expr(sec["inf_star_hint"], HINT_VARS, path) if "inf_star_hint" in sec else None,
    )
    component = Component(
        kernel=kernel,
        envelope=envelope,
        weight=_expr(sec["weight"], ("s",), path),
        f=_expr(sec["f"], ("t", "u1", "u2", "v1", "v2"), path),
        hints=hints,
    )
    return component, params


def _positive_int(entry: _Entry, path: str, minimum: int = 1) -> int:
    val = _const(entry, path)
    if val != int(val) or int(val) < minimum:
        raise ProblemFileError(
            f"expected an integer >= {minimum}, got {entry.value!r}",
            path, entry.line, entry.col,
        )
    return int(val)


def load_problem(path: str) -> LoadedProblem:
    text = Path(path).read_text()
    sections = _parse_sections(text, path)

    variant = ConeVariant.SIGN_CHANGING
    cone = sections.get("cone", {})
    if "variant" in cone:
        entry = cone["variant"]
        if entry.value not in _VARIANTS:
            raise ProblemFileError(
                f"unknown variant {entry.value!r}; one of {sorted(_VARIANTS)}",
                path, entry.line, entry.col,
            )
        variant = _VARIANTS[entry.value]

    comp1, params1 = _build_component(sections["component.1"], "component.1", path)
    comp2, params2 = _build_component(sections["component.2"], "component.2", path)
    problem = SystemProblem(comp1, comp2, variant)

    check_sec = sections.get("check", {})
    scenario: Scenario | None = None
    if "scenario" in check_sec:
        entry = check_sec["scenario"]
        try:
            scenario = Scenario(entry.value)
        except ValueError:
            raise ProblemFileError(
                f"unknown scenario {entry.value!r}", path, entry.line, entry.col
            ) from None
    ladder = []
    for rung in ("rho", "r", "s", "sigma"):
        if rung in check_sec:
            pair = _pair(check_sec[rung], path)
            if pair[0] <= 0 or pair[1] <= 0:
                e = check_sec[rung]
                raise ProblemFileError(f"radii must be positive, got {pair}", path, e.line, e.col)
            ladder.append(pair)
    if scenario is not None and scenario is not Scenario.NONEXISTENCE:
        need = len(_SCENARIOS[scenario][0])
        if len(ladder) != need:
            raise ProblemFileError(
                f"scenario {scenario.value} needs {need} radius pairs (rho, r, ...), "
                f"got {len(ladder)}",
                path, check_sec["scenario"].line,
            )
    box = (10.0, 10.0)
    if "nonexistence_box" in check_sec:
        box = _pair(check_sec["nonexistence_box"], path)
        if box[0] <= 0 or box[1] <= 0:
            e = check_sec["nonexistence_box"]
            raise ProblemFileError(f"box bounds must be positive, got {box}", path, e.line, e.col)
    check = CheckConfig(
        scenario=scenario,
        ladder=tuple(ladder),
        resolution=_positive_int(check_sec["resolution"], path, 2)
        if "resolution" in check_sec else 17,
        nonexistence_box=box,
        nonexistence_resolution=_positive_int(check_sec["nonexistence_resolution"], path, 2)
        if "nonexistence_resolution" in check_sec else 41,
    )

    solver_sec = sections.get("solver", {})
    solver = SolverConfig()
    if solver_sec:
        kwargs = {}
        if "n" in solver_sec:
            kwargs["n"] = _positive_int(solver_sec["n"], path, 101)
        if "theta" in solver_sec:
            kwargs["theta"] = _const(solver_sec["theta"], path)
        if "tol" in solver_sec:
            kwargs["tol"] = _const(solver_sec["tol"], path)
        if "max_iter" in solver_sec:
            kwargs["max_iter"] = _positive_int(solver_sec["max_iter"], path)
        if "init" in solver_sec:
            entry = solver_sec["init"]
            if entry.value not in ("zero", "bump"):
                raise ProblemFileError(
                    f"init must be 'zero' or 'bump', got {entry.value!r}",
                    path, entry.line, entry.col,
                )
            kwargs["init"] = entry.value
        if "scale" in solver_sec:
            kwargs["scale"] = _const(solver_sec["scale"], path)
        solver = SolverConfig(**kwargs)

    return LoadedProblem(problem, check, solver, (params1, params2), path)


# ---------------------------------------------------------------- reports


def _report_dict(report: AssumptionReport) -> dict:
    return {
        "name": report.name,
        "passed": report.passed,
        "note": report.note,
        "items": [
            {
                "name": it.name,
                "worst_violation": it.worst_violation,
                "location": list(it.location),
                "passed": it.passed,
            }
            for it in report.items
        ],
    }


def _print_reports(reports: list[AssumptionReport]) -> None:
    for rep in reports:
        print(f"{'PASS' if rep.passed else 'FAIL'}  {rep.name}")
        for it in rep.items:
            mark = "ok " if it.passed else "BAD"
            print(f"  {mark} {it.name}  (worst violation {it.worst_violation:.3e})")
        if rep.note:
            print(f"      {rep.note}")


def _print_certificate(cert: Certificate) -> None:
    if cert.ladder:
        rungs = " -> ".join(f"({r[0]:g}, {r[1]:g})" for r in cert.ladder)
        print(f"scenario {cert.scenario.value} along {rungs}")
    for out in cert.outcomes:
        print(f"  {out.condition} at ({out.rho[0]:g}, {out.rho[1]:g}): {out.verdict.value}")
        for e in out.entries:
            print(
                f"    {e.verdict.value:<12} {e.name}: {e.lhs:.6g} vs {e.rhs:.6g} "
                f"(margin {e.margin:.3e}, {e.bound_source})"
            )
    for alt in cert.alternatives:
        mark = "holds" if alt.holds else "fails"
        print(f"  {mark:<6} {alt.name}  (worst margin {alt.worst_margin:.3e}, {alt.samples} samples)")
    tail = " [rigorous]" if cert.rigorous else ""
    if cert.solution_count and cert.verdict is Verdict.HOLDS:
        tail += f"; at least {cert.solution_count} nontrivial solution(s)"
    print(f"verdict: {cert.verdict.value}{tail}")
    if cert.note:
        print(f"note: {cert.note}")


_VERDICT_EXIT = {Verdict.HOLDS: 0, Verdict.FAILS: 2, Verdict.INCONCLUSIVE: 3}


def _emit(doc: dict, args) -> None:
    if not args.no_meta:
        doc["meta"] = {
            "package": "hamcert",
            "version": __version__,
            "generated_unix": int(time.time()),
        }
    if args.out:
        Path(args.out).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------- commands


def _cmd_assumptions(loaded: LoadedProblem, args) -> tuple[int, dict]:
    problem = loaded.problem
    reports: list[AssumptionReport] = []
    for i, comp in enumerate(problem.components):
        rep = verify_A3(comp)
        reports.append(dataclasses.replace(rep, name=f"component {i + 1}: {rep.name}"))
        rep = verify_A4(comp)
        reports.append(dataclasses.replace(rep, name=f"component {i + 1}: {rep.name}"))
        if comp.kernel.is_expression:
            rep = check_kernel_derivative(comp.kernel)
            reports.append(dataclasses.replace(rep, name=f"component {i + 1}: {rep.name}"))
        if problem.variant is not ConeVariant.SIGN_CHANGING:
            b1, b2 = loaded.check.nonexistence_box
            box = Box4.sup_box(b1, b2, problem.variant)
            rep = verify_nonneg_f(comp, box.intervals())
            reports.append(dataclasses.replace(rep, name=f"component {i + 1}: {rep.name}"))
    _print_reports(reports)
    passed = all(r.passed for r in reports)
    doc = {"command": "assumptions", "passed": passed, "reports": [_report_dict(r) for r in reports]}
    return (0 if passed else 2), doc


def _constant_dict(res) -> dict:
    d = res.as_dict()
    d["reciprocal"] = 1.0 / res.constant
    return d


def _cmd_constants(loaded: LoadedProblem, args) -> tuple[int, dict]:
    table = compute_table(loaded.problem)
    rows = []
    for consts in table.components:
        for res in (consts.m, consts.m_star, consts.M, consts.M_star):
            rows.append(_constant_dict(res))
    width = max(len(r["name"]) for r in rows)
    for r in rows:
        print(
            f"{r['name']:<{width}}  {r['constant']:.12g}  (1/{r['name']} = {r['reciprocal']:.12g}, "
            f"quadrature error {r['quad_error']:.2e})"
        )
    doc = {"command": "constants", "constants": rows}
    return 0, doc


def _cmd_certify(loaded: LoadedProblem, args) -> tuple[int, dict]:
    check = loaded.check
    if check.scenario is None or check.scenario is Scenario.NONEXISTENCE:
        raise ValueError("the problem file's [check] section must name an existence scenario")
    table = compute_table(loaded.problem)
    policy = HintPolicy(args.hints)
    n = args.grid if args.grid else check.resolution
    cert = certify(loaded.problem, check.scenario, check.ladder, table, policy, n)
    _print_certificate(cert)
    doc = {"command": "certify", "certificate": cert.as_dict()}
    return _VERDICT_EXIT[cert.verdict], doc


def _cmd_nonexistence(loaded: LoadedProblem, args) -> tuple[int, dict]:
    problem = loaded.problem
    table = compute_table(problem)
    b1, b2 = loaded.check.nonexistence_box
    box = Box4.sup_box(b1, b2, problem.variant)
    n = args.grid if args.grid else loaded.check.nonexistence_resolution
    cert = check_nonexistence(problem, table, box, n)
    _print_certificate(cert)
    doc = {"command": "nonexistence", "certificate": cert.as_dict()}
    return _VERDICT_EXIT[cert.verdict], doc


def _cmd_solve(loaded: LoadedProblem, args) -> tuple[int, dict]:
    problem = loaded.problem
    cfg = loaded.solver
    n = args.grid if args.grid else cfg.n
    tol = args.tol if args.tol is not None else cfg.tol
    if cfg.init == "bump":
        start = bump_init(problem, n, cfg.scale)
    else:
        start = GridPair.zeros(n)
    result = picard(problem, start, cfg.theta, tol, cfg.max_iter)
    cone = cone_membership(result.pair, problem)
    annuli = [
        {
            "inner": [min(a[0], b[0]), min(a[1], b[1])],
            "outer": [max(a[0], b[0]), max(a[1], b[1])],
            "localized": localization_check(
                result,
                (min(a[0], b[0]), min(a[1], b[1])),
                (max(a[0], b[0]), max(a[1], b[1])),
            ),
        }
        for a, b in zip(loaded.check.ladder, loaded.check.ladder[1:])
    ]
    status = "converged" if result.converged else "not converged"
    print(f"{status} after {result.iterations} iterations; residual {result.residual:.3e} (n = {n})")
    for k, v in result.norms.items():
        print(f"  {k} = {v:.12g}")
    print(f"cone membership: {'PASS' if cone.passed else 'FAIL'}")
    for c in cone.checks:
        print(f"  {'ok ' if c.passed else 'BAD'} {c.name}  (slack {c.slack:.3e})")
    for a in annuli:
        print(f"  localized in [{a['inner']}, {a['outer']}]: {a['localized']}")
    if args.table:
        Path(args.table).write_text(export_table(result.pair))
        print(f"nodal table written to {args.table}")
    doc = {
        "command": "solve",
        "converged": result.converged,
        "iterations": result.iterations,
        "residual": result.residual,
        "residual_source": "sup norm of x - T(x) at the grid nodes",
        "n": n,
        "tol": tol,
        "norms": result.norms,
        "derivative_consistency": derivative_consistency(result.pair),
        "cone": {
            "passed": cone.passed,
            "tolerance": cone.tolerance,
            "checks": [{"name": c.name, "slack": c.slack, "passed": c.passed} for c in cone.checks],
        },
        "annuli": annuli,
    }
    return (0 if result.converged else 2), doc


def _cmd_green_check(loaded: LoadedProblem, args) -> tuple[int, dict]:
    found = False
    all_pass = True
    sections = []
    n_grid = args.grid if args.grid else 2001
    ode_tol = args.tol if args.tol is not None else 1e-4
    for i, params in enumerate(loaded.green_params):
        if params is None:
            continue
        found = True
        report = greens3.check_kernel_properties(params)
        _print_reports([report])
        entry = {
            "component": i + 1,
            "alpha": params.alpha,
            "eta": params.eta,
            "properties": _report_dict(report),
            "bvp": [],
        }
        ok = report.passed
        for h_text in ("1", "s"):
            h = exprlang.parse(h_text, ("s",))
            try:
                res = greens3.verify_bvp(params, h, n_grid=n_grid, ode_tol=ode_tol)
                entry["bvp"].append(
                    {
                        "h": h_text,
                        "ode_residual": res.ode_residual,
                        "ode_worst_node": res.ode_worst_node,
                        "bc_at_zero": res.bc_at_zero,
                        "bc_slope_at_zero": res.bc_slope_at_zero,
                        "bc_three_point": res.bc_three_point,
                        "n_grid": res.n_grid,
                        "passed": True,
                    }
                )
                print(
                    f"  bvp h = {h_text}: ode residual {res.ode_residual:.3e}, "
                    f"bc residuals ({res.bc_at_zero:.1e}, {res.bc_slope_at_zero:.1e}, "
                    f"{res.bc_three_point:.1e})"
                )
            except greens3.ResidualTooLarge as exc:
                ok = False
                entry["bvp"].append({"h": h_text, "passed": False, "error": str(exc)})
                print(f"  bvp h = {h_text}: FAIL ({exc})")
        all_pass = all_pass and ok
        sections.append(entry)
    if not found:
        raise ValueError("no component of this problem uses a green(...) kernel")
    doc = {"command": "green-check", "passed": all_pass, "components": sections}
    return (0 if all_pass else 2), doc


_COMMANDS = {
    "assumptions": _cmd_assumptions,
    "constants": _cmd_constants,
    "certify": _cmd_certify,
    "nonexistence": _cmd_nonexistence,
    "solve": _cmd_solve,
    "green-check": _cmd_green_check,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hamcert",
        description="certify and solve two-component Hammerstein systems with "
        "derivative-dependent nonlinearities",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("file", help="problem file (schema = 1)")
    parser.add_argument("--out", help="write a machine-readable JSON report here")
    parser.add_argument("--tol", type=float, default=None, help="override the command's tolerance")
    parser.add_argument("--grid", type=int, default=None, help="override the command's resolution")
    parser.add_argument("--no-meta", action="store_true", help="omit the metadata block for byte-identical reports")
    parser.add_argument(
        "--hints", choices=[p.value for p in HintPolicy], default="allow",
        help="how to treat user bound hints during certification",
    )
    parser.add_argument("--table", help="solve: write the nodal table (TSV) here")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        loaded = load_problem(args.file)
        code, doc = _COMMANDS[args.command](loaded, args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, RuntimeError, ExprError, QuadratureFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    doc["problem"] = args.file
    doc["schema"] = 1
    _emit(doc, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
