"""Collocation of the Hammerstein operator and Picard iteration.

State is a GridPair: nodal values of (u, u', v, v') on a uniform grid.  The
operator image is computed from precomputed kernel-times-weight matrices
over composite Gauss panels (panel edges at the grid nodes plus any declared
kernel breakpoints), with the nonlinearity evaluated at linearly
interpolated arguments.  u' is iterated through the derivative kernel, not
by differencing u.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exprlang
from .model import Component, ConeVariant, SystemProblem

# Gauss-Legendre 7 on [-1, 1]
_GL_X = np.array([
    -0.9491079123427585245262, -0.7415311855993944398639, -0.4058451513773971669066,
    0.0,
    0.4058451513773971669066, 0.7415311855993944398639, 0.9491079123427585245262,
])
_GL_W = np.array([
    0.1294849661688696932706, 0.2797053914892766679015, 0.3818300505051189449504,
    0.4179591836734693877551,
    0.3818300505051189449504, 0.2797053914892766679015, 0.1294849661688696932706,
])


class Divergence(RuntimeError):
    """An iterate exceeded the blow-up bound."""


@dataclass(frozen=True)
class GridPair:
    grid: np.ndarray
    u: np.ndarray
    du: np.ndarray
    v: np.ndarray
    dv: np.ndarray

    def __post_init__(self):
        n = len(self.grid)
        if n < 101:
            raise ValueError(f"grid needs at least 101 nodes, got {n}")
        for name in ("u", "du", "v", "dv"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")

    @staticmethod
    def zeros(n: int = 401) -> "GridPair":
        z = np.zeros(n)
        return GridPair(np.linspace(0.0, 1.0, n), z, z.copy(), z.copy(), z.copy())

    def norms(self) -> dict[str, float]:
        u_c = float(np.max(np.abs(self.u)))
        du_c = float(np.max(np.abs(self.du)))
        v_c = float(np.max(np.abs(self.v)))
        dv_c = float(np.max(np.abs(self.dv)))
        return {
            "u_C": u_c,
            "du_C": du_c,
            "v_C": v_c,
            "dv_C": dv_c,
            "u_C1": max(u_c, du_c),
            "v_C1": max(v_c, dv_c),
        }


@dataclass(frozen=True)
class SolutionResult:
    pair: GridPair
    residual: float
    iterations: int
    converged: bool
    norms: dict[str, float]


@dataclass(frozen=True)
class ConeCheck:
    name: str
    slack: float
    passed: bool


@dataclass(frozen=True)
class ConeReport:
    checks: tuple[ConeCheck, ...]
    passed: bool
    tolerance: float


class _Discretization:
    """Quadrature points and kernel matrices for one problem on one grid."""

    def __init__(self, problem: SystemProblem, grid: np.ndarray):
        self.grid = grid
        edges = set(grid.tolist())
        for comp in problem.components:
            for t in grid:
                edges.update(comp.kernel.breakpoints(float(t)))
        eps = 1e-12
        uniq = sorted(e for e in edges if 0.0 <= e <= 1.0)
        merged = [uniq[0]]
        for e in uniq[1:]:
            if e - merged[-1] > eps:
                merged.append(e)
        lo = np.array(merged[:-1])
        hi = np.array(merged[1:])
        half = 0.5 * (hi - lo)
        # quadrature nodes: panels x 7, flattened
        self.s = (0.5 * (lo + hi)[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        w = (half[:, None] * _GL_W[None, :]).ravel()
        self.matrices = []
        for comp in problem.components:
            g = np.asarray(
                exprlang.evaluate(comp.weight, {"s": self.s}) * np.ones_like(self.s),
                dtype=float,
            )
            gw = g * w
            k = np.asarray(comp.kernel.k(grid[:, None], self.s[None, :]), dtype=float)
            dk = np.asarray(comp.kernel.dk_dt(grid[:, None], self.s[None, :]), dtype=float)
            self.matrices.append((k * gw[None, :], dk * gw[None, :]))


_cache: dict[tuple[int, int], tuple[SystemProblem, _Discretization]] = {}


def _discretize(problem: SystemProblem, grid: np.ndarray) -> _Discretization:
    key = (id(problem), len(grid))
    hit = _cache.get(key)
    if hit is not None and hit[0] is problem:
        return hit[1]
    disc = _Discretization(problem, grid)
    _cache[key] = (problem, disc)
    return disc


def apply_T(problem: SystemProblem, p: GridPair) -> GridPair:
    """One application of the integral operator to a GridPair."""
    disc = _discretize(problem, p.grid)
    s = disc.s
    args = {
        "t": s,
        "u1": np.interp(s, p.grid, p.u),
        "u2": np.interp(s, p.grid, p.du),
        "v1": np.interp(s, p.grid, p.v),
        "v2": np.interp(s, p.grid, p.dv),
    }
    ones = np.ones_like(s)
    f1 = np.asarray(exprlang.evaluate(problem.comp1.f, args) * ones, dtype=float)
    f2 = np.asarray(exprlang.evaluate(problem.comp2.f, args) * ones, dtype=float)
    (k1, d1), (k2, d2) = disc.matrices
    return GridPair(p.grid, k1 @ f1, d1 @ f1, k2 @ f2, d2 @ f2)


def _sup_distance(a: GridPair, b: GridPair) -> float:
    return max(
        float(np.max(np.abs(a.u - b.u))),
        float(np.max(np.abs(a.du - b.du))),
        float(np.max(np.abs(a.v - b.v))),
        float(np.max(np.abs(a.dv - b.dv))),
    )


def _blend(x: GridPair, tx: GridPair, theta: float) -> GridPair:
    if theta == 1.0:
        return tx
    return GridPair(
        x.grid,
        (1 - theta) * x.u + theta * tx.u,
        (1 - theta) * x.du + theta * tx.du,
        (1 - theta) * x.v + theta * tx.v,
        (1 - theta) * x.dv + theta * tx.dv,
    )


def picard(
    problem: SystemProblem,
    init: GridPair,
    theta: float = 1.0,
    tol: float = 1e-10,
    max_iter: int = 200,
    blowup: float = 1e12,
) -> SolutionResult:
    """Damped Picard iteration x <- (1-theta) x + theta T(x).

    Stops when both the fixed-point residual ||T(x)-x|| and the step size
    fall to tol.  theta halves (at most 6 times) whenever the residual
    increases.  Fixed points promised by certificates need not be
    attracting; convergence to the zero solution is a common and honest
    outcome.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must be in (0, 1], got {theta}")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    x = init
    prev_residual = np.inf
    halvings = 0
    for iteration in range(1, max_iter + 1):
        tx = apply_T(problem, x)
        residual = _sup_distance(tx, x)
        if max(v for v in tx.norms().values()) > blowup:
            raise Divergence(
                f"iterate norm exceeded {blowup:.1e} at iteration {iteration}"
            )
        if residual > prev_residual and halvings < 6:
            theta *= 0.5
            halvings += 1
        step = theta * residual
        x = _blend(x, tx, theta)
        if residual <= tol and step <= tol:
            return SolutionResult(x, residual, iteration, True, x.norms())
        prev_residual = residual
    tx = apply_T(problem, x)
    residual = _sup_distance(tx, x)
    return SolutionResult(x, residual, max_iter, False, x.norms())


def derivative_consistency(p: GridPair) -> float:
    """Worst gap between central differences of u (v) and du (dv).

    Meaningful at a converged fixed point only; during iteration the four
    arrays evolve independently.
    """
    h = p.grid[1] - p.grid[0]
    worst = 0.0
    for w, dw in ((p.u, p.du), (p.v, p.dv)):
        central = (w[2:] - w[:-2]) / (2 * h)
        worst = max(worst, float(np.max(np.abs(central - dw[1:-1]))))
    return worst


def cone_membership(
    p: GridPair,
    problem: SystemProblem,
    tolerance: float = 1e-9,
) -> ConeReport:
    """Check the cone inequalities of both components at the grid nodes."""
    checks: list[ConeCheck] = []
    variant = problem.variant
    for label, comp, w, dw in (
        ("u", problem.comp1, p.u, p.du),
        ("v", problem.comp2, p.v, p.dv),
    ):
        env = comp.envelope
        norms = (float(np.max(np.abs(w))), float(np.max(np.abs(dw))))
        in_ab = (p.grid >= env.a - 1e-15) & (p.grid <= env.b + 1e-15)
        in_gd = (p.grid >= env.gamma - 1e-15) & (p.grid <= env.delta + 1e-15)
        min_ab = float(np.min(w[in_ab])) if np.any(in_ab) else np.inf
        min_gd = float(np.min(dw[in_gd])) if np.any(in_gd) else np.inf
        checks.append(
            ConeCheck(f"min {label} on [a,b] >= c*||{label}||", min_ab - env.c * norms[0],
                      min_ab - env.c * norms[0] >= -tolerance)
        )
        checks.append(
            ConeCheck(f"min {label}' on [gamma,delta] >= d*||{label}'||",
                      min_gd - env.d * norms[1], min_gd - env.d * norms[1] >= -tolerance)
        )
        if variant in (ConeVariant.NON_NEGATIVE, ConeVariant.NON_NEGATIVE_NON_DECREASING):
            low = float(np.min(w))
            checks.append(ConeCheck(f"{label} >= 0", low, low >= -tolerance))
        if variant is ConeVariant.NON_NEGATIVE_NON_DECREASING:
            low = float(np.min(dw))
            checks.append(ConeCheck(f"{label}' >= 0", low, low >= -tolerance))
    return ConeReport(tuple(checks), all(c.passed for c in checks), tolerance)


def localization_check(
    result: SolutionResult,
    inner: tuple[float, float],
    outer: tuple[float, float],
) -> bool:
    """True iff the solution sits in the closed outer box but not the open inner one."""
    u = result.norms["u_C1"]
    v = result.norms["v_C1"]
    return u <= outer[0] and v <= outer[1] and not (u < inner[0] and v < inner[1])


def bump_init(problem: SystemProblem, n: int = 401, scale: float = 1.0) -> GridPair:
    """Cone-shaped start profile: the operator image of the unit pair, rescaled.

    The image of any nonnegative pair lies in the cone, so this profile is a
    valid cone point at every positive scale.
    """
    ones = np.ones(n)
    grid = np.linspace(0.0, 1.0, n)
    base = apply_T(problem, GridPair(grid, ones, ones, ones, ones))
    top = max(v for v in base.norms().values())
    if top == 0.0:
        return GridPair.zeros(n)
    lam = scale / top
    return GridPair(grid, lam * base.u, lam * base.du, lam * base.v, lam * base.dv)


def linear_image(
    problem: SystemProblem,
    q1: np.ndarray,
    q2: np.ndarray,
    n: int = 401,
) -> GridPair:
    """Image of densities (q1, q2) under the plain kernel integrals.

    Computes w_i(t) = int k_i(t,s) g_i(s) q_i(s) ds and the derivative
    analog on the n-node grid; q_i are nodal values interpolated linearly.
    For nonnegative q the result lies in the cone by the envelope bounds.
    """
    grid = np.linspace(0.0, 1.0, n)
    disc = _discretize(problem, grid)
    s = disc.s
    q1s = np.interp(s, grid, q1)
    q2s = np.interp(s, grid, q2)
    (k1, d1), (k2, d2) = disc.matrices
    return GridPair(grid, k1 @ q1s, d1 @ q1s, k2 @ q2s, d2 @ q2s)


def export_table(p: GridPair) -> str:
    """Tab-separated table (t, u, u', v, v') for external plotting."""
    lines = ["t\tu\tdu\tv\tdv"]
    for j in range(len(p.grid)):
        lines.append(
            f"{p.grid[j]:.12g}\t{p.u[j]:.12g}\t{p.du[j]:.12g}"
            f"\t{p.v[j]:.12g}\t{p.dv[j]:.12g}"
        )
    return "\n".join(lines) + "\n"
