"""Certified constants: exact rationals for both bundled examples plus
independent brute-force oracles for every constant kind."""
from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from hamcert import exprlang
from hamcert.constants import (
    DegenerateConstant,
    compute_component,
    compute_m,
    compute_table,
)
from hamcert.model import WEIGHT_VARS

# (field, exact reciprocal) for the sign-changing example
SIGN_EXPECTED = {
    "comp1": {"m": 49 / 512, "m_star": 9 / 16, "M": 7203 / 262144, "M_star": 343 / 32768},
    "comp2": {"m": 81 / 800, "m_star": 11 / 20, "M": 24057 / 640000, "M_star": 1331 / 64000},
}

# the third-order example, as computed by this package (independently
# cross-checked by the brute-force oracles below)
THIRD_EXPECTED = {
    "comp1": {"m": 11 / 24, "m_star": 3 / 4, "M": 11 / 648, "M_star": 11 / 108},
    "comp2": {"m": 5 / 12, "m_star": 2 / 3, "M": 7 / 1728, "M_star": 7 / 144},
}


@pytest.mark.parametrize("comp_name", ["comp1", "comp2"])
@pytest.mark.parametrize("kind", ["m", "m_star", "M", "M_star"])
def test_sign_changing_reciprocals(sign_table, comp_name, kind):
    result = getattr(getattr(sign_table, comp_name), kind)
    expected = SIGN_EXPECTED[comp_name][kind]
    assert 1.0 / result.constant == pytest.approx(expected, rel=1e-9)
    assert result.quad_error <= 1e-9


@pytest.mark.parametrize("comp_name", ["comp1", "comp2"])
@pytest.mark.parametrize("kind", ["m", "m_star", "M", "M_star"])
def test_third_order_reciprocals(third_table, comp_name, kind):
    result = getattr(getattr(third_table, comp_name), kind)
    expected = THIRD_EXPECTED[comp_name][kind]
    assert 1.0 / result.constant == pytest.approx(expected, rel=1e-9)


def test_extremal_locations(sign_table):
    # 1/m1 = max_t (7/8 t - t^2)/2 peaks at t = 7/16;
    # 1/m1* = max_t |7/8 - 2 t|/2 peaks at the right endpoint
    assert sign_table.comp1.m.t_star == pytest.approx(7 / 16, abs=1e-6)
    assert sign_table.comp1.m_star.t_star == pytest.approx(1.0, abs=1e-9)


def test_window_metadata(sign_table):
    assert sign_table.comp1.M.window == pytest.approx((7 / 32, 21 / 32))
    assert sign_table.comp1.M_star.window == pytest.approx((0.0, 7 / 32))
    assert sign_table.comp2.M.window == pytest.approx((13 / 40, 31 / 40))


def _midpoint_columns(kfun, weight, t_grid, s_lo, s_hi, n_s=20001):
    s = np.linspace(s_lo, s_hi, 2 * n_s + 1)[1::2]  # midpoints
    h = (s_hi - s_lo) / n_s
    return (kfun(np.asarray(t_grid)[:, None], s[None, :]) * weight(s)).sum(axis=1) * h


def brute_m_reciprocal(comp, n_t=4001):
    t = np.linspace(0.0, 1.0, n_t)
    vals = _midpoint_columns(
        lambda tt, ss: np.abs(comp.kernel.k(tt, ss)),
        lambda ss: exprlang.evaluate(comp.weight, {"s": ss}),
        t, 0.0, 1.0,
    )
    return float(vals.max())


def brute_M_reciprocal(comp, star: bool, n_t=2001):
    env = comp.envelope
    lo, hi = (env.gamma, env.delta) if star else (env.a, env.b)
    kern = comp.kernel.dk_dt if star else comp.kernel.k
    t = np.linspace(lo, hi, n_t)
    vals = _midpoint_columns(
        kern, lambda ss: exprlang.evaluate(comp.weight, {"s": ss}), t, lo, hi
    )
    return float(vals.min())


@pytest.mark.parametrize("comp_name", ["comp1", "comp2"])
def test_brute_force_oracle_sign_changing(sign_changing, sign_table, comp_name):
    comp = getattr(sign_changing.problem, comp_name)
    table = getattr(sign_table, comp_name)
    assert brute_m_reciprocal(comp) == pytest.approx(1.0 / table.m.constant, rel=1e-6)
    assert brute_M_reciprocal(comp, star=False) == pytest.approx(
        1.0 / table.M.constant, rel=1e-6
    )
    assert brute_M_reciprocal(comp, star=True) == pytest.approx(
        1.0 / table.M_star.constant, rel=1e-6
    )


@pytest.mark.parametrize("comp_name", ["comp1", "comp2"])
def test_brute_force_oracle_third_order(third_order, third_table, comp_name):
    # the Green-kernel constants rest on the same oracle; in particular the
    # window minimum behind 1/M2 = 7/1728 is confirmed by plain summation
    comp = getattr(third_order.problem, comp_name)
    table = getattr(third_table, comp_name)
    assert brute_m_reciprocal(comp) == pytest.approx(1.0 / table.m.constant, rel=1e-6)
    assert brute_M_reciprocal(comp, star=False) == pytest.approx(
        1.0 / table.M.constant, rel=1e-6
    )
    assert brute_M_reciprocal(comp, star=True) == pytest.approx(
        1.0 / table.M_star.constant, rel=1e-6
    )


def test_component_accessor_matches_table(sign_changing, sign_table):
    direct = compute_component(sign_changing.problem.comp1, 1)
    assert direct.m.constant == sign_table.comp1.m.constant
    assert direct.M_star.constant == sign_table.comp1.M_star.constant


def test_single_constant_entry_names(sign_changing):
    res = compute_m(sign_changing.problem.comp1, "m1")
    assert res.name == "m1"
    assert res.extremal_integral == pytest.approx(49 / 512, rel=1e-9)
    assert res.constant == pytest.approx(512 / 49, rel=1e-9)
    assert res.window == (0.0, 1.0)


def test_zero_weight_is_degenerate(sign_changing):
    comp = dataclasses.replace(
        sign_changing.problem.comp1, weight=exprlang.parse("0", WEIGHT_VARS)
    )
    with pytest.raises(DegenerateConstant):
        compute_component(comp, 1)
