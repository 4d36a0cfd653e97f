"""Problem data model: kernels, envelopes, components and assumption checks.

A two-component system couples u and v through nonlinearities that read both
functions and their first derivatives.  Each component carries a kernel pair
(k, dk/dt), a nonnegative weight, an envelope certificate (phi, psi, windows
[a,b] and [gamma,delta], cone constants c and d) and optional user bound
hints for certification.  The verify_* functions sample the envelope
inequalities on grids; they support assumptions at a stated resolution, they
do not prove them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import exprlang
from .exprlang import Expr
from .quadopt import QuadResult, integrate

KERNEL_VARS = ("t", "s")
WEIGHT_VARS = ("s",)
ENVELOPE_VARS = ("s",)
NONLIN_VARS = ("t", "u1", "u2", "v1", "v2")
HINT_VARS = ("rho1", "rho2")

VIOLATION_TOL = 1e-9


class ConeVariant(Enum):
    SIGN_CHANGING = "sign_changing"
    NON_NEGATIVE = "nonnegative"
    NON_NEGATIVE_NON_DECREASING = "nonnegative_nondecreasing"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel k(t,s) with its t-derivative and declared s-breakpoints.

    ``breakpoints(t)`` lists interior abscissas where k(t, .) may lose
    smoothness.  ``is_expression`` marks closed-form kernels whose sign
    changes in s must be located numerically when |k| is integrated.
    """

    k: Callable
    dk_dt: Callable
    breakpoints: Callable[[float], tuple[float, ...]]
    is_expression: bool
    source: str

    @staticmethod
    def from_expressions(k_expr: Expr, dk_expr: Expr, source: str = "") -> "KernelSpec":
        def k(t, s):
            return exprlang.evaluate(k_expr, {"t": t, "s": s})

        def dk(t, s):
            return exprlang.evaluate(dk_expr, {"t": t, "s": s})

        label = source or f"k = {exprlang.pretty(k_expr)}"
        return KernelSpec(k, dk, lambda t: (), True, label)


@dataclass(frozen=True)
class CheckItem:
    name: str
    worst_violation: float
    location: tuple[float, ...]
    passed: bool


@dataclass(frozen=True)
class AssumptionReport:
    name: str
    items: tuple[CheckItem, ...]
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class Envelope:
    """Envelope certificate data for one component.

    phi bounds |k| from above on the square and c*phi bounds k from below on
    the strip [a,b] x [0,1]; psi and d play the same roles for dk/dt on
    [gamma,delta] x [0,1].
    """

    phi: Expr
    psi: Expr
    a: float
    b: float
    c: float
    gamma: float
    delta: float
    d: float

    def __post_init__(self):
        if not (0.0 <= self.a < self.b <= 1.0):
            raise ValueError(f"need 0 <= a < b <= 1, got a={self.a}, b={self.b}")
        if not (0.0 <= self.gamma < self.delta <= 1.0):
            raise ValueError(
                f"need 0 <= gamma < delta <= 1, got gamma={self.gamma}, delta={self.delta}"
            )
        if not (0.0 < self.c <= 1.0):
            raise ValueError(f"need c in (0, 1], got {self.c}")
        if not (0.0 < self.d <= 1.0):
            raise ValueError(f"need d in (0, 1], got {self.d}")


@dataclass(frozen=True)
class BoundHints:
    """User-supplied certified bounds over radius boxes.

    Each expression is over (rho1, rho2) and must bound the normalized
    nonlinearity: sup is an upper bound for sup f / rho_i over the sup box,
    inf_plain and inf_star are lower bounds for the two inf boxes.  They are
    cross-checked against grid estimates before use.
    """

    sup: Expr | None = None
    inf_plain: Expr | None = None
    inf_star: Expr | None = None


@dataclass(frozen=True)
class Component:
    kernel: KernelSpec
    envelope: Envelope
    weight: Expr
    f: Expr
    hints: BoundHints = field(default_factory=BoundHints)


@dataclass(frozen=True)
class SystemProblem:
    comp1: Component
    comp2: Component
    variant: ConeVariant = ConeVariant.SIGN_CHANGING

    @property
    def components(self) -> tuple[Component, Component]:
        return (self.comp1, self.comp2)


def _eval_weight(comp: Component, s):
    return exprlang.evaluate(comp.weight, {"s": s}) * np.ones_like(np.asarray(s, dtype=float))


def _grid_eval(fn: Callable, ts: np.ndarray, ss: np.ndarray) -> np.ndarray:
    return np.asarray(fn(ts[:, None], ss[None, :]), dtype=float) * np.ones((len(ts), len(ss)))


def _worst(violation: np.ndarray, ts: np.ndarray, ss: np.ndarray, name: str) -> CheckItem:
    flat = int(np.argmax(violation))
    i, j = np.unravel_index(flat, violation.shape)
    worst = float(violation[i, j])
    return CheckItem(name, worst, (float(ts[i]), float(ss[j])), worst <= VIOLATION_TOL)


def verify_A3(comp: Component, n_t: int = 200, n_s: int = 200) -> AssumptionReport:
    """Sample the four envelope inequalities for one component.

    Checks |k| <= phi and |dk/dt| <= psi on the unit square, k >= c*phi on
    [a,b] x [0,1] and dk/dt >= d*psi on [gamma,delta] x [0,1].  PASS means
    the worst sampled violation is at most 1e-9.
    """
    env = comp.envelope
    ts = np.linspace(0.0, 1.0, n_t)
    ss = np.linspace(0.0, 1.0, n_s)
    phi = exprlang.evaluate(env.phi, {"s": ss}) * np.ones_like(ss)
    psi = exprlang.evaluate(env.psi, {"s": ss}) * np.ones_like(ss)

    k_sq = _grid_eval(comp.kernel.k, ts, ss)
    dk_sq = _grid_eval(comp.kernel.dk_dt, ts, ss)
    items = [
        _worst(np.abs(k_sq) - phi[None, :], ts, ss, "abs(k) <= phi on [0,1]^2"),
        _worst(np.abs(dk_sq) - psi[None, :], ts, ss, "abs(dk/dt) <= psi on [0,1]^2"),
    ]

    ts_ab = np.linspace(env.a, env.b, n_t)
    k_strip = _grid_eval(comp.kernel.k, ts_ab, ss)
    items.append(_worst(env.c * phi[None, :] - k_strip, ts_ab, ss, "k >= c*phi on [a,b]x[0,1]"))

    ts_gd = np.linspace(env.gamma, env.delta, n_t)
    dk_strip = _grid_eval(comp.kernel.dk_dt, ts_gd, ss)
    items.append(
        _worst(env.d * psi[None, :] - dk_strip, ts_gd, ss, "dk/dt >= d*psi on [gamma,delta]x[0,1]")
    )

    return AssumptionReport(
        "envelope inequalities",
        tuple(items),
        all(it.passed for it in items),
        note=f"sampled on {n_t}x{n_s} grids; supports, does not prove",
    )


def verify_A4(comp: Component, tol: float = 1e-12) -> AssumptionReport:
    """Check that the two envelope window integrals are strictly positive."""
    env = comp.envelope

    def phi_g(s):
        return exprlang.evaluate(env.phi, {"s": s}) * exprlang.evaluate(comp.weight, {"s": s})

    def psi_g(s):
        return exprlang.evaluate(env.psi, {"s": s}) * exprlang.evaluate(comp.weight, {"s": s})

    r1 = integrate(phi_g, env.a, env.b, tol=tol)
    r2 = integrate(psi_g, env.gamma, env.delta, tol=tol)
    items = (
        CheckItem("int_a^b phi*g > 0", -r1.value, (env.a, env.b), r1.value > r1.error_bound),
        CheckItem(
            "int_gamma^delta psi*g > 0", -r2.value, (env.gamma, env.delta), r2.value > r2.error_bound
        ),
    )
    return AssumptionReport(
        "window integrals",
        items,
        all(it.passed for it in items),
        note=f"values {r1.value!r} and {r2.value!r} with quadrature errors "
        f"{r1.error_bound:.2e}, {r2.error_bound:.2e}",
    )


def window_integrals(comp: Component, tol: float = 1e-12) -> tuple[QuadResult, QuadResult]:
    """The pair (int_a^b phi*g, int_gamma^delta psi*g) with error bounds."""
    env = comp.envelope

    def phi_g(s):
        return exprlang.evaluate(env.phi, {"s": s}) * exprlang.evaluate(comp.weight, {"s": s})

    def psi_g(s):
        return exprlang.evaluate(env.psi, {"s": s}) * exprlang.evaluate(comp.weight, {"s": s})

    return (
        integrate(phi_g, env.a, env.b, tol=tol),
        integrate(psi_g, env.gamma, env.delta, tol=tol),
    )


def verify_nonneg_f(
    comp: Component, box: Sequence[tuple[float, float]], n: int = 33
) -> AssumptionReport:
    """Sample f >= 0 on [0,1] x box (box has one interval per argument slot)."""
    if len(box) != 4:
        raise ValueError("box must provide four intervals (u1, u2, v1, v2)")
    axes = [np.linspace(0.0, 1.0, n)]
    for lo, hi in box:
        if lo > hi:
            raise ValueError(f"bad box interval [{lo}, {hi}]")
        axes.append(np.array([lo]) if lo == hi else np.linspace(lo, hi, n))
    grids = np.meshgrid(*axes, indexing="ij", sparse=True)
    env = dict(zip(NONLIN_VARS, grids))
    vals = np.broadcast_to(
        np.asarray(exprlang.evaluate(comp.f, env), dtype=float),
        tuple(len(a) for a in axes),
    )
    flat = int(np.argmin(vals))
    idx = np.unravel_index(flat, vals.shape)
    worst = -float(vals[idx])
    point = tuple(float(axes[k][idx[k]]) for k in range(5))
    item = CheckItem("f >= 0 on [0,1] x box", worst, point, worst <= 0.0)
    return AssumptionReport(
        "nonnegative nonlinearity",
        (item,),
        item.passed,
        note=f"sampled at {n} points per axis",
    )


def check_kernel_derivative(
    spec: KernelSpec, n_t: int = 40, n_s: int = 40, step: float = 1e-5
) -> AssumptionReport:
    """Central-difference consistency of dk/dt against k, away from kinks."""
    ts = np.linspace(step, 1.0 - step, n_t)
    ss = np.linspace(0.0, 1.0, n_s)
    worst = -np.inf
    where = (0.0, 0.0)
    checked = 0
    for t in ts:
        bps = set(spec.breakpoints(float(t))) | ({float(t)} if not spec.is_expression else set())
        mask = np.ones_like(ss, dtype=bool)
        for bp in bps:
            mask &= np.abs(ss - bp) > 10 * step
        if not mask.any():
            continue
        s_ok = ss[mask]
        fd = (
            np.asarray(spec.k(t + step, s_ok), dtype=float)
            - np.asarray(spec.k(t - step, s_ok), dtype=float)
        ) / (2 * step)
        exact = np.asarray(spec.dk_dt(t, s_ok), dtype=float) * np.ones_like(s_ok)
        tol = np.maximum(1e-6, 1e-4 * np.abs(exact))
        viol = np.abs(fd - exact) - tol
        checked += len(s_ok)
        j = int(np.argmax(viol))
        if float(viol[j]) > worst:
            worst = float(viol[j])
            where = (float(t), float(s_ok[j]))
    item = CheckItem("central difference matches dk/dt", worst, where, worst <= 0.0)
    return AssumptionReport(
        "kernel derivative consistency",
        (item,),
        item.passed,
        note=f"{checked} samples, step {step:g}",
    )
