"""Component assumptions: envelope checks, window integrals, kernel derivative."""
from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamcert import exprlang
from hamcert.model import (
    HINT_VARS,
    KERNEL_VARS,
    NONLIN_VARS,
    WEIGHT_VARS,
    BoundHints,
    Envelope,
    KernelSpec,
    check_kernel_derivative,
    verify_A3,
    verify_A4,
    verify_nonneg_f,
    window_integrals,
)


def test_envelope_validation():
    phi = exprlang.parse("s", ("s",))
    good = dict(phi=phi, psi=phi, a=0.25, b=0.75, c=0.5, gamma=0.0, delta=0.25, d=0.5)
    Envelope(**good)
    for bad in (
        dict(good, a=0.8),  # a >= b
        dict(good, gamma=0.3),  # gamma >= delta
        dict(good, c=0.0),
        dict(good, c=1.5),
        dict(good, d=-0.1),
        dict(good, b=1.2),
    ):
        with pytest.raises(ValueError):
            Envelope(**bad)


def test_envelope_certificate_holds_for_bundled_components(sign_changing):
    for comp in (sign_changing.problem.comp1, sign_changing.problem.comp2):
        report = verify_A3(comp)
        assert report.passed, [it for it in report.items if not it.passed]
        names = {it.name for it in report.items}
        assert "abs(k) <= phi on [0,1]^2" in names
        assert "k >= c*phi on [a,b]x[0,1]" in names
        assert "dk/dt >= d*psi on [gamma,delta]x[0,1]" in names


def test_envelope_detects_overstated_window_fraction(sign_changing):
    comp = sign_changing.problem.comp1
    env = dataclasses.replace(comp.envelope, c=0.76)
    bad = dataclasses.replace(comp, envelope=env)
    report = verify_A3(bad)
    assert not report.passed
    failing = [it for it in report.items if not it.passed]
    assert len(failing) == 1
    item = failing[0]
    assert item.name.startswith("k >= c*phi")
    # worst node sits at a window endpoint, where k/phi dips to its minimum
    t_worst = item.location[0]
    assert min(abs(t_worst - 7 / 32), abs(t_worst - 21 / 32)) < 0.01
    assert item.worst_violation > 0


@settings(max_examples=15, deadline=None)
@given(shrink=st.floats(min_value=0.05, max_value=1.0))
def test_envelope_monotone_in_cone_fractions(sign_changing, shrink):
    # any smaller c, d keeps a passing certificate passing
    comp = sign_changing.problem.comp1
    env = comp.envelope
    smaller = dataclasses.replace(env, c=env.c * shrink, d=env.d * shrink)
    assert verify_A3(dataclasses.replace(comp, envelope=smaller), n_t=60, n_s=60).passed


def test_window_integrals_match_closed_forms(sign_changing):
    r1, r2 = window_integrals(sign_changing.problem.comp1)
    assert abs(r1.value - 2401 / 65536) <= 1e-10
    assert abs(r2.value - 441 / 16384) <= 1e-10
    r1, r2 = window_integrals(sign_changing.problem.comp2)
    assert abs(r1.value - 8019 / 160000) <= 1e-10
    assert abs(r2.value - 1331 / 32000) <= 1e-10


def test_positive_window_mass_certificate(sign_changing):
    for comp in (sign_changing.problem.comp1, sign_changing.problem.comp2):
        assert verify_A4(comp).passed


def test_zero_weight_fails_window_positivity(sign_changing):
    comp = sign_changing.problem.comp1
    dead = dataclasses.replace(comp, weight=exprlang.parse("0", WEIGHT_VARS))
    report = verify_A4(dead)
    assert not report.passed


def test_nonlinearity_positivity_scan(sign_changing):
    comp = sign_changing.problem.comp1
    box = [(-2.0, 2.0)] * 4
    assert verify_nonneg_f(comp, box).passed

    signed = dataclasses.replace(comp, f=exprlang.parse("u1", NONLIN_VARS))
    report = verify_nonneg_f(signed, box)
    assert not report.passed
    item = report.items[0]
    assert item.worst_violation == pytest.approx(2.0)  # f = -2 at u1 = -2


def test_declared_derivative_cross_check(sign_changing):
    for comp in (sign_changing.problem.comp1, sign_changing.problem.comp2):
        assert check_kernel_derivative(comp.kernel).passed


def test_wrong_declared_derivative_is_caught(sign_changing):
    comp = sign_changing.problem.comp1
    wrong = KernelSpec.from_expressions(
        exprlang.parse("s*(7/8*t - t^2)", KERNEL_VARS),
        exprlang.parse("s*(7/8 - 3*t)", KERNEL_VARS),  # extra -t per unit s
    )
    report = check_kernel_derivative(wrong)
    assert not report.passed
    assert report.items[0].worst_violation == pytest.approx(1.0, abs=1e-3)


def test_hints_parse_against_radius_variables(sign_changing):
    hints = sign_changing.problem.comp1.hints
    assert hints.sup is not None
    value = exprlang.evaluate(hints.sup, {"rho1": 2.0, "rho2": 5.0})
    assert float(value) == pytest.approx(12.0)  # 6*rho1


def test_bound_hints_default_to_absent():
    hints = BoundHints()
    assert hints.sup is None and hints.inf_plain is None and hints.inf_star is None


def test_hint_vars_are_radii():
    assert HINT_VARS == ("rho1", "rho2")
