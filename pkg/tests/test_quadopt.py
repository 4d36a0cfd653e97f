"""Adaptive quadrature and box/interval extremizers against closed forms."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamcert.quadopt import (
    QuadratureFailure,
    box_extremum,
    box_extremum_with_witness,
    extremize,
    integrate,
    sign_change_roots,
)


@pytest.mark.parametrize("k", range(11))
def test_monomials_exact(k):
    res = integrate(lambda s: s**k, 0.0, 1.0)
    truth = 1.0 / (k + 1)
    assert abs(res.value - truth) <= 1e-14
    # the reported bound must cover the actual error (tiny slack for roundoff)
    assert abs(res.value - truth) <= max(res.error_bound, 1e-13)


def test_kink_with_declared_breakpoint():
    res = integrate(lambda s: abs(s - 1 / 3), 0.0, 1.0, breakpoints=(1 / 3,))
    assert abs(res.value - 5 / 18) <= 1e-13
    assert res.subdivisions <= 8


def test_kink_without_breakpoint_still_converges():
    res = integrate(lambda s: abs(s - 1 / 3), 0.0, 1.0)
    assert abs(res.value - 5 / 18) <= 1e-10


def test_oscillatory():
    res = integrate(lambda s: math.cos(40.0 * s), 0.0, 1.0)
    assert abs(res.value - math.sin(40.0) / 40.0) <= 1e-12


def test_breakpoints_outside_interval_are_ignored():
    res = integrate(lambda s: s, 0.0, 1.0, breakpoints=(-0.5, 2.0, 0.5))
    assert abs(res.value - 0.5) <= 1e-14


def test_divergent_integrand_raises():
    with pytest.raises(QuadratureFailure):
        integrate(lambda s: 1.0 / s, 0.0, 1.0, max_panels=512)


def test_extremize_sine():
    top = extremize(lambda x: math.sin(3 * math.pi * x), 0.0, 1.0, mode="max")
    assert top.value == pytest.approx(1.0, abs=1e-9)
    assert top.location == pytest.approx(1 / 6, abs=1e-6)
    bot = extremize(lambda x: math.sin(3 * math.pi * x), 0.0, 1.0, mode="min")
    assert bot.value == pytest.approx(-1.0, abs=1e-9)
    assert 0.0 <= bot.location <= 1.0
    assert bot.mode == "min"


def test_extremize_never_worse_than_seed_grid():
    def fn(x):
        return math.sin(17.0 * x) + 0.3 * math.cos(39.0 * x) - x * x

    seeds = np.linspace(0.0, 1.0, 129)
    best_seed = max(fn(x) for x in seeds)
    res = extremize(fn, 0.0, 1.0, mode="max", n_seed=129)
    assert res.value >= best_seed - 1e-12


def test_extremize_endpoints_count():
    # maximum attained at the right endpoint of the interval
    res = extremize(lambda x: x, 0.0, 2.0, mode="max")
    assert res.value == pytest.approx(2.0, abs=1e-12)
    assert res.location == pytest.approx(2.0, abs=1e-9)


def test_extremize_rejects_bad_mode():
    with pytest.raises(ValueError):
        extremize(lambda x: x, 0.0, 1.0, mode="sideways")


def test_sign_change_roots_quadratic():
    roots = sign_change_roots(lambda s: (s - 1 / 3) * (s - 0.77), 0.0, 1.0)
    assert len(roots) == 2
    assert roots[0] == pytest.approx(1 / 3, abs=1e-10)
    assert roots[1] == pytest.approx(0.77, abs=1e-10)


def test_sign_change_roots_none():
    assert sign_change_roots(lambda s: 1.0 + s, 0.0, 1.0) == ()


def test_box_extremum_linear_attains_corner():
    box = [(0.0, 1.0), (0.0, 2.0)]
    val, witness = box_extremum_with_witness(
        lambda u1, u2: u1 + 2.0 * u2, box, mode="sup"
    )
    assert val == pytest.approx(5.0, abs=1e-12)
    assert witness == pytest.approx((1.0, 2.0))
    low = box_extremum(lambda u1, u2: u1 + 2.0 * u2, box, mode="inf")
    assert low == pytest.approx(0.0, abs=1e-12)


def test_box_extremum_monotone_under_refinement():
    # nested grids (5, 9, 17, 33 points per axis) can only push a sup upward
    box = [(0.0, 1.0), (0.0, 1.0)]

    def fn(x, y):
        return np.cos(5.0 * x) * np.sin(7.0 * y) + 0.1 * x

    sups = [box_extremum(fn, box, mode="sup", n_per_axis=n) for n in (5, 9, 17, 33)]
    for coarse, fine in zip(sups, sups[1:]):
        assert fine >= coarse - 1e-15
    infs = [box_extremum(fn, box, mode="inf", n_per_axis=n) for n in (5, 9, 17, 33)]
    for coarse, fine in zip(infs, infs[1:]):
        assert fine <= coarse + 1e-15


def test_box_extremum_degenerate_interval():
    # a pinned coordinate (zero-width interval) is allowed
    val = box_extremum(lambda x, y: x * 10.0 + y, [(0.5, 0.5), (0.0, 1.0)], mode="sup")
    assert val == pytest.approx(6.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(min_value=-100.0, max_value=100.0, allow_nan=False),
    b=st.floats(min_value=-100.0, max_value=100.0, allow_nan=False),
)
def test_integrate_is_linear(a, b):
    res = integrate(lambda s: a * s * s + b * s, 0.0, 1.0)
    assert res.value == pytest.approx(a / 3 + b / 2, rel=1e-12, abs=1e-10)
