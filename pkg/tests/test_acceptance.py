"""Acceptance gate: one test per shipped criterion, one PASS/FAIL line each.

Every criterion is checked at its stated tolerance against pinned reference
values for the two bundled examples.  Two entries of criterion 3 and the
hatted half of criterion 4 are expected to fail: the computed values are
confirmed by independent oracles (see test_constants), and the bundled
third-order hint file records a closed-form lower bound that the grid
cross-check refutes.  Those failures are intentional and documented — the
suite reports them rather than weakening the reference values.
"""
from __future__ import annotations

import dataclasses
import math
import time

import numpy as np
import pytest

import conftest
from hamcert import exprlang
from hamcert.cli import load_problem
from hamcert.conditions import (
    HintInconsistent,
    Scenario,
    Verdict,
    certify,
    check_I1,
    check_nonexistence,
    Box4,
)
from hamcert.constants import compute_table
from hamcert.greens3 import GreenParams, build_kernel, check_kernel_properties, default_envelope, verify_bvp
from hamcert.model import (
    NONLIN_VARS,
    WEIGHT_VARS,
    BoundHints,
    Component,
    ConeVariant,
    SystemProblem,
)
from hamcert.solver import GridPair, apply_T, cone_membership, linear_image, picard

from conftest import bundled_path


def record(num: int, ok: bool, detail: str) -> str:
    line = f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} — {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def test_criterion_1_reference_constants_sign_changing():
    t0 = time.perf_counter()
    table = compute_table(load_problem(bundled_path("sign_changing.prob")).problem)
    elapsed = time.perf_counter() - t0
    expected = {
        ("comp1", "m"): 49 / 512,
        ("comp1", "m_star"): 9 / 16,
        ("comp1", "M"): 7203 / 262144,
        ("comp1", "M_star"): 343 / 32768,
        ("comp2", "m"): 81 / 800,
        ("comp2", "m_star"): 11 / 20,
        ("comp2", "M"): 24057 / 640000,
        ("comp2", "M_star"): 1331 / 64000,
    }
    bad = []
    for (comp, kind), ref in expected.items():
        got = 1.0 / getattr(getattr(table, comp), kind).constant
        if not math.isclose(got, ref, rel_tol=1e-9):
            bad.append(f"1/{kind}({comp}) = {got!r} != {ref!r}")
    ok = not bad and elapsed < 10.0
    detail = (
        f"eight reciprocal constants within 1e-9 in {elapsed:.2f}s"
        if ok
        else "; ".join(bad) or f"too slow: {elapsed:.2f}s"
    )
    line = record(1, ok, detail)
    assert ok, line


def test_criterion_2_window_integral_regression(sign_changing):
    from hamcert.model import window_integrals

    r11, r12 = window_integrals(sign_changing.problem.comp1)
    r21, r22 = window_integrals(sign_changing.problem.comp2)
    pairs = [
        (r11.value, 2401 / 65536),
        (r21.value, 8019 / 160000),
        (r12.value, 441 / 16384),
        (r22.value, 1331 / 32000),
    ]
    bad = [f"{got!r} != {ref!r}" for got, ref in pairs if abs(got - ref) > 1e-10]
    ok = not bad
    line = record(2, ok, "four window integrals within 1e-10" if ok else "; ".join(bad))
    assert ok, line


def test_criterion_3_third_order_reference_constants(third_table):
    mins_expected = {
        ("comp1", "M"): 11 / 648,
        ("comp1", "M_star"): 11 / 108,
        ("comp2", "M"): 17 / 5184,
        ("comp2", "M_star"): 7 / 144,
    }
    sup_bounds = {
        ("comp1", "m"): 1 / 24 + math.sqrt(2) / 3,
        ("comp1", "m_star"): 3 / 4,
        ("comp2", "m"): 43 / 324,
        ("comp2", "m_star"): 10 / 3,
    }
    bad = []
    for (comp, kind), ref in mins_expected.items():
        got = 1.0 / getattr(getattr(third_table, comp), kind).constant
        if not math.isclose(got, ref, rel_tol=1e-9):
            bad.append(
                f"1/{kind}({comp}) = {got!r}, reference {ref!r} "
                "(computed value confirmed by an independent summation oracle)"
            )
    for (comp, kind), bound in sup_bounds.items():
        got = 1.0 / getattr(getattr(third_table, comp), kind).constant
        if got > bound + 1e-9:
            bad.append(
                f"1/{kind}({comp}) = {got!r} exceeds the reference bound {bound!r} "
                "(computed value confirmed by an independent summation oracle)"
            )
    ok = not bad
    line = record(3, ok, "eight reference comparisons hold" if ok else "; ".join(bad))
    assert ok, line


def test_criterion_4_certification_end_to_end(sign_changing, sign_table, third_order, third_table):
    problems = []

    cert = certify(
        sign_changing.problem, Scenario.S2, ((0.03, 0.3), (700.0, 600.0)), sign_table
    )
    if cert.verdict is not Verdict.HOLDS or not cert.rigorous:
        problems.append(f"sign-changing S2 expected rigorous HOLDS, got {cert.verdict}")

    refute = check_I1(sign_changing.problem, 1.0, 1.0, sign_table)
    if refute.verdict is not Verdict.FAILS:
        problems.append(f"sign-changing I1 at unit radii expected FAILS, got {refute.verdict}")

    try:
        hat = certify(
            third_order.problem, Scenario.S2_HAT, third_order.check.ladder, third_table
        )
        if hat.verdict is not Verdict.HOLDS:
            problems.append(f"third-order hatted S2 expected HOLDS, got {hat.verdict}")
    except HintInconsistent as exc:
        problems.append(
            "third-order hatted S2 aborts: the bundled plain inf hint rho2/54 for "
            "component 2 is refuted by the grid cross-check (the pinned coordinate "
            f"enters the nonlinearity squared, so the true inf scales with rho2^2): {exc}"
        )

    ok = not problems
    line = record(4, ok, "both certificates behave as pinned" if ok else "; ".join(problems))
    assert ok, line


def test_criterion_5_green_kernel_property_suite():
    bad = []
    for alpha, eta in ((1.5, 0.5), (2.0, 1 / 3), (1.25, 0.7)):
        params = GreenParams(alpha, eta)
        items = {it.name: it for it in check_kernel_properties(params).items}
        jump = items["branch gluing is continuous"].worst_violation + 1e-10
        if jump >= 1e-10:
            bad.append(f"({alpha},{eta}): branch jump {jump:.2e}")
        for name in ("k >= 0 on [0,1]^2", "k <= phi on [0,1]^2", "k >= c*phi on the strip"):
            if not items[name].passed:
                bad.append(f"({alpha},{eta}): {name} violated by {items[name].worst_violation:.2e}")
        for h_text in ("1", "s"):
            rep = verify_bvp(params, exprlang.parse(h_text, ("s",)))
            if rep.ode_residual >= 1e-4:
                bad.append(f"({alpha},{eta}) h={h_text}: ode residual {rep.ode_residual:.2e}")
            worst_bc = max(abs(rep.bc_at_zero), abs(rep.bc_slope_at_zero), abs(rep.bc_three_point))
            if worst_bc >= 1e-8:
                bad.append(f"({alpha},{eta}) h={h_text}: bc residual {worst_bc:.2e}")
    ok = not bad
    line = record(
        5,
        ok,
        "continuity, envelope, and BVP residual checks hold for all three parameter sets"
        if ok
        else "; ".join(bad),
    )
    assert ok, line


def test_criterion_6_manufactured_fixed_point(sign_changing):
    one1 = exprlang.parse("1", NONLIN_VARS)
    comp1 = dataclasses.replace(sign_changing.problem.comp1, f=one1, hints=BoundHints())
    comp2 = dataclasses.replace(sign_changing.problem.comp2, f=one1, hints=BoundHints())
    problem = dataclasses.replace(sign_changing.problem, comp1=comp1, comp2=comp2)

    res = picard(problem, GridPair.zeros(401), theta=1.0)
    fine = picard(problem, GridPair.zeros(801), theta=1.0)
    doubling = max(
        float(np.max(np.abs(fine.pair.u[::2] - res.pair.u))),
        float(np.max(np.abs(fine.pair.v[::2] - res.pair.v))),
    )
    bad = []
    if not res.converged or res.iterations > 2:
        bad.append(f"converged={res.converged} after {res.iterations} iterations")
    if res.residual >= 1e-10:
        bad.append(f"residual {res.residual:.2e}")
    if doubling >= 1e-9:
        bad.append(f"grid-doubling drift {doubling:.2e}")
    ok = not bad
    line = record(
        6,
        ok,
        f"θ=1 fixed point in {res.iterations} iterations, doubling drift {doubling:.1e}"
        if ok
        else "; ".join(bad),
    )
    assert ok, line


def _nonneg_green_problem() -> SystemProblem:
    # a Green-kernel problem on the plain nonnegative cone; the derivative
    # fraction d is set to the family's sharp row-max ratio eta/alpha (the
    # declared formula fraction fails pointwise near s = 0, see the kernel
    # property suite), which is exactly what operator images satisfy
    params = GreenParams(1.5, 0.5)
    kernel = build_kernel(params)
    env = dataclasses.replace(default_envelope(params), d=params.eta / params.alpha)
    weight = exprlang.parse("1", WEIGHT_VARS)
    comp1 = Component(
        kernel, env, weight, exprlang.parse("1 + u1^2 + v1^2", NONLIN_VARS)
    )
    comp2 = Component(
        kernel, env, weight, exprlang.parse("1 + v2^2 + u2^2", NONLIN_VARS)
    )
    return SystemProblem(comp1, comp2, ConeVariant.NON_NEGATIVE)


def test_criterion_7_cone_invariance():
    problem = _nonneg_green_problem()
    rng = np.random.default_rng(2026)
    worst = np.inf
    bad = []
    for trial in range(100):
        q1 = 0.05 + rng.random(401) * rng.uniform(0.1, 50.0)
        q2 = 0.05 + rng.random(401) * rng.uniform(0.1, 50.0)
        start = linear_image(problem, q1, q2)
        start_report = cone_membership(start, problem)
        if not start_report.passed:
            bad.append(f"trial {trial}: generated start pair escaped the cone")
            break
        image_report = cone_membership(apply_T(problem, start), problem)
        slack = min(c.slack for c in image_report.checks)
        worst = min(worst, slack)
        if slack < -1e-9:
            bad.append(f"trial {trial}: image slack {slack:.2e}")
            break
    ok = not bad
    line = record(
        7,
        ok,
        f"100 random cone pairs map into the cone (worst slack {worst:.1e})"
        if ok
        else "; ".join(bad),
    )
    assert ok, line


def test_criterion_8_nonexistence_path(sign_changing, sign_table):
    m1 = sign_table.comp1.m.constant
    m2 = sign_table.comp2.m.constant
    comp1 = dataclasses.replace(
        sign_changing.problem.comp1,
        f=exprlang.parse(f"{m1 / 2!r}*abs(u1)", NONLIN_VARS),
        hints=BoundHints(),
    )
    comp2 = dataclasses.replace(
        sign_changing.problem.comp2,
        f=exprlang.parse(f"{m2 / 2!r}*abs(v1)", NONLIN_VARS),
        hints=BoundHints(),
    )
    problem = dataclasses.replace(sign_changing.problem, comp1=comp1, comp2=comp2)
    box = Box4.sup_box(10.0, 10.0, ConeVariant.SIGN_CHANGING)
    cert = check_nonexistence(problem, sign_table, box, n=41)
    bad = []
    if cert.verdict is not Verdict.HOLDS or cert.solution_count != 0:
        bad.append(f"expected supported non-existence, got {cert.verdict}")

    rng = np.random.default_rng(8)
    grid = np.linspace(0.0, 1.0, 401)
    worst_norm = 0.0
    for _ in range(20):
        arrays = rng.uniform(-1.0, 1.0, (4, 401))
        res = picard(problem, GridPair(grid, *arrays))
        worst_norm = max(worst_norm, max(res.norms.values()))
        if not res.converged:
            bad.append("picard failed to converge from a random start")
            break
    if worst_norm >= 1e-8:
        bad.append(f"limit norm {worst_norm:.2e}")
    ok = not bad
    line = record(
        8,
        ok,
        f"supported certificate and 20 random starts collapse to zero (worst norm {worst_norm:.1e})"
        if ok
        else "; ".join(bad),
    )
    assert ok, line
