"""Radial p-Laplace solves and the semilinear fixed-point driver.

For radial data the divergence-form equation -div(|grad u|^(p-2) grad u) = h
on R^N with u'(0) = 0 and u(inf) = 0 reduces exactly to two nested
quadratures:

    F(s) = int_0^s t^(N-1) h(t) dt,
    u(rho) = int_rho^inf (s^(1-N) F(s))^(1/(p-1)) ds,

so the solver is a pair of cumulative trapezoid passes plus a closed-form
outer tail once F has saturated.  Dirichlet problems on a ball truncate the
outer integral at the boundary radius.  The semilinear problem
-Delta_p u = a(x) g(x, u) is solved by damped Picard iteration on this
inverse, with the weak-form residual against a fixed family of radial hat
test functions as the convergence measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from .errors import DomainError, FitError, GridError
from .radial import (
    PowerTail,
    RadialFunction,
    RadialGrid,
    WeightSpec,
    make_grid,
    sphere_area,
)

__all__ = [
    "ProblemSpec",
    "SolverConfig",
    "SolveReport",
    "Violation",
    "g_eval",
    "a_eval",
    "solve_radial_rhs",
    "solve_ball_dirichlet",
    "solve_semilinear",
    "weak_residual",
    "weak_residual_rhs",
    "comparison_check",
]

_G_FORMS = ("constant", "power", "bounded-power")

# 3-point Gauss-Legendre on [0, 1]
_GL_X = np.array([0.5 - math.sqrt(15.0) / 10.0, 0.5, 0.5 + math.sqrt(15.0) / 10.0])
_GL_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients of the prototype problem -Delta_p u = a(x) g(x, u).

    ``a_weight`` is the decaying envelope; the coefficient itself is
    a(x) = a_sign * c * w(x), i.e. one-signed.  ``g_form`` selects
    g(s) = c_g, c_g |s|^(r-1), or c_g (1 + |s|^(r-1)).
    """

    p: float
    N: int
    a_weight: WeightSpec
    a_sign: int = 1
    g_form: str = "constant"
    c_g: float = 1.0
    r_growth: float = 1.0
    domain: str = "whole-space"
    R: float | None = None
    lambda_: float = 1.0

    def __post_init__(self):
        if not (1.0 < self.p < self.N):
            raise DomainError(f"need 1 < p < N, got p={self.p}, N={self.N}")
        if self.lambda_ != 1.0:
            raise DomainError("prototype operator requires lambda = 1")
        if self.g_form not in _G_FORMS:
            raise DomainError(f"unknown g_form {self.g_form!r}")
        if self.c_g <= 0.0:
            raise DomainError(f"need c_g > 0, got {self.c_g}")
        if self.a_sign not in (-1, 1):
            raise DomainError("a_sign must be +1 or -1")
        if self.domain == "whole-space":
            p_star = self.N * self.p / (self.N - self.p)
            if self.g_form != "constant" and not (1.0 <= self.r_growth < p_star):
                raise DomainError(
                    f"need 1 <= r_growth < p* = {p_star}, got {self.r_growth}"
                )
        elif self.domain == "ball":
            if self.R is None or self.R <= 0.0:
                raise DomainError("ball domain needs R > 0")
        else:
            raise DomainError(f"unknown domain {self.domain!r}")

    @property
    def c_a(self) -> float:
        return self.a_weight.c

    @property
    def p_star(self) -> float:
        return self.N * self.p / (self.N - self.p)


@dataclass(frozen=True, eq=False)
class SolverConfig:
    grid: RadialGrid
    max_picard: int = 100
    damping: float = 0.5
    residual_tol: float = 1e-8
    grad_regularization: float = 1e-10

    def __post_init__(self):
        if self.max_picard < 1:
            raise DomainError("max_picard must be >= 1")
        if not (0.0 < self.damping <= 1.0):
            raise DomainError("damping must lie in (0, 1]")
        if self.residual_tol <= 0.0:
            raise DomainError("residual_tol must be > 0")
        if self.grad_regularization < 0.0:
            raise DomainError("grad_regularization must be >= 0")


@dataclass(frozen=True, eq=False)
class SolveReport:
    u: RadialFunction
    iterations: int
    residual: float
    converged: bool
    positivity: bool
    residual_tol: float
    residual_history: tuple = ()
    envelope: RadialFunction | None = None


@dataclass(frozen=True)
class Violation:
    index: int
    radius: float
    value: float
    bound: float

    @property
    def excess(self) -> float:
        return abs(self.value) - self.bound


def g_eval(spec: ProblemSpec, s):
    """Nonlinearity g(s) for the spec's form; nonnegative by construction."""
    s = np.asarray(s, dtype=float)
    if spec.g_form == "constant":
        out = np.full_like(s, spec.c_g)
    elif spec.g_form == "power":
        out = spec.c_g * np.abs(s) ** (spec.r_growth - 1.0)
    else:
        out = spec.c_g * (1.0 + np.abs(s) ** (spec.r_growth - 1.0))
    return out if out.ndim else float(out)


def a_eval(spec: ProblemSpec, r):
    return spec.a_sign * spec.a_weight.eval(r, spec.N)


def _tail_mass(h: RadialFunction, N: int) -> float:
    """Closed-form mass of h beyond its grid; FitError when not integrable."""
    if h.tail is None or h.tail.coeff == 0.0:
        return 0.0
    if h.tail.exponent <= N:
        raise FitError(
            f"right-hand side tail gamma={h.tail.exponent} <= N={N}: "
            "total mass quadrature does not converge"
        )
    return (
        h.sign
        * h.tail.coeff
        * h.grid.r_max ** (N - h.tail.exponent)
        / (h.tail.exponent - N)
    )


def _mass_invert(rhs_eval, grid: RadialGrid, p: float, N: int):
    """Cumulative mass and its radial inversion, both by per-cell Gauss rules.

    F(s) = int_0^s t^(N-1) rhs(t) dt is accumulated with 3-point Gauss per
    cell (plus sub-cell Gauss for the values of F at the cell's own Gauss
    points), then u(rho) = int_rho^r_max (s^(1-N) F(s))^(1/(p-1)) ds is
    integrated the same way, so the inversion is exact up to high-order
    quadrature of smooth per-cell integrands.  Returns (u_core, F_nodes,
    F_r_max) with u_core vanishing at r_max.

    Raises DomainError when F dips negative: the inversion formula only
    applies while the cumulative mass of the data stays nonnegative.
    """
    nodes = grid.nodes
    lo, hi = nodes[:-1], nodes[1:]
    width = hi - lo
    X = lo[:, None] + width[:, None] * _GL_X[None, :]
    seg = X - lo[:, None]
    T = lo[:, None, None] + seg[:, :, None] * _GL_X[None, None, :]
    fT = rhs_eval(T.reshape(-1)).reshape(T.shape) * T ** (N - 1)
    q = seg * np.einsum("ijk,k->ij", fT, _GL_W)
    fX = rhs_eval(X.reshape(-1)).reshape(X.shape) * X ** (N - 1)
    Q = width * (fX @ _GL_W)
    F_nodes = np.concatenate([[0.0], np.cumsum(Q)])
    F_gl = F_nodes[:-1][:, None] + q
    scale = max(float(np.max(F_nodes)), 1e-300)
    if min(float(np.min(F_nodes)), float(np.min(F_gl))) < -1e-10 * scale:
        raise DomainError(
            "cumulative mass of the right-hand side goes negative; "
            "the radial inversion only applies to nonnegative-mass data"
        )
    F_gl = np.maximum(F_gl, 0.0)
    F_nodes = np.maximum(F_nodes, 0.0)
    G_gl = (F_gl * X ** (1.0 - N)) ** (1.0 / (p - 1.0))
    O = width * (G_gl @ _GL_W)
    u_core = np.concatenate([np.cumsum(O[::-1])[::-1], [0.0]])
    return u_core, F_nodes, float(F_nodes[-1])


def _solve_whole_space(rhs_eval, grid: RadialGrid, p: float, N: int, tail_mass: float):
    """Shared whole-space inversion for profile and callable right-hand sides."""
    u_core, F_nodes, F_edge = _mass_invert(rhs_eval, grid, p, N)
    F_inf = max(F_edge + tail_mass, 0.0)
    m = (N - 1.0) / (p - 1.0)
    gamma_u = m - 1.0  # = (N - p)/(p - 1)
    tail_coeff = F_inf ** (1.0 / (p - 1.0)) / (m - 1.0)
    u_edge = tail_coeff * grid.r_max ** (-gamma_u)
    vals = u_core + u_edge
    tail = PowerTail(tail_coeff, gamma_u) if tail_coeff > 0.0 else None
    return RadialFunction(grid, vals, tail)


def solve_radial_rhs(
    h: RadialFunction, p: float, N: int, grid: RadialGrid | None = None
) -> SolveReport:
    """Whole-space radial solve of -Delta_p u = h with u(inf) = 0.

    The outer integral beyond r_max treats the mass as saturated at F(inf),
    which yields the closed-form decay u ~ C rho^(-(N-p)/(p-1)) recorded as
    the solution's tail model.
    """
    if not (1.0 < p < N):
        raise DomainError(f"need 1 < p < N, got p={p}, N={N}")
    grid = h.grid if grid is None else grid
    u = _solve_whole_space(h.eval, grid, p, N, _tail_mass(h, N))
    residual = _weak_residual_core(u, h.eval, p, N)
    return SolveReport(
        u=u,
        iterations=1,
        residual=residual,
        converged=True,
        positivity=bool(np.all(u.values >= 0.0)),
        residual_tol=math.inf,
    )


def solve_ball_dirichlet(h: RadialFunction, p: float, N: int, R: float) -> SolveReport:
    """Radial Dirichlet solve of -Delta_p u = h on the ball of radius R."""
    if R <= 0.0:
        raise DomainError(f"need R > 0, got {R}")
    if not (1.0 < p < N):
        raise DomainError(f"need 1 < p < N, got p={p}, N={N}")
    if abs(h.grid.r_max - R) > 1e-12 * R:
        raise GridError(
            f"right-hand side grid extends to {h.grid.r_max}, expected ball radius {R}"
        )
    grid = h.grid
    vals, _, _ = _mass_invert(h.eval, grid, p, N)
    u = RadialFunction(grid, vals, None)
    residual = _weak_residual_core(u, h.eval, p, N)
    return SolveReport(
        u=u,
        iterations=1,
        residual=residual,
        converged=True,
        positivity=bool(np.all(vals >= 0.0)),
        residual_tol=math.inf,
    )


def _rhs_tail_mass(spec: ProblemSpec, u: RadialFunction, rhs_edge: float) -> float:
    """Signed mass of a g(., u) beyond r_max from its leading power law."""
    if spec.domain != "whole-space" or rhs_edge == 0.0:
        return 0.0
    gamma_h = spec.N + spec.a_weight.alpha
    if spec.g_form == "power":
        if u.tail is None or u.tail.coeff == 0.0:
            return 0.0
        gamma_h += (spec.r_growth - 1.0) * u.tail.exponent
    r_max = u.grid.r_max
    coeff = rhs_edge * r_max**gamma_h  # keeps the sign of the edge value
    return coeff * r_max ** (spec.N - gamma_h) / (gamma_h - spec.N)


def _signed_solve_callable(rhs, grid: RadialGrid, spec: ProblemSpec, tail_mass: float):
    """solve(rhs+) - solve(rhs-) for a callable right-hand side.

    One-signed data (the prototype's sign-flag coefficient) takes a single
    inversion through the odd symmetry solve(-h) = -solve(h); genuinely
    mixed-sign data is split and recombined.
    """
    sample = rhs(grid.nodes)
    total = np.zeros(len(grid))
    tail = None
    sign = 1
    parts = []
    if np.any(sample > 0.0) or tail_mass > 0.0:
        parts.append((1.0, lambda r: np.maximum(rhs(r), 0.0), max(tail_mass, 0.0)))
    if np.any(sample < 0.0) or tail_mass < 0.0:
        parts.append((-1.0, lambda r: np.maximum(-rhs(r), 0.0), max(-tail_mass, 0.0)))
    for sgn, part, mass in parts:
        if spec.domain == "ball":
            vals, _, _ = _mass_invert(part, grid, spec.p, spec.N)
            u_part = RadialFunction(grid, vals)
        else:
            u_part = _solve_whole_space(part, grid, spec.p, spec.N, mass)
        total = total + sgn * u_part.values
        if u_part.tail is not None and (tail is None or u_part.tail.coeff > tail.coeff):
            tail = u_part.tail
            sign = int(sgn)
    return RadialFunction(grid, total, tail, sign)


def solve_semilinear(spec: ProblemSpec, cfg: SolverConfig) -> SolveReport:
    """Damped Picard iteration u_{k+1} = (1-d) u_k + d solve(a g(., u_k)).

    A constant g makes the right-hand side independent of u, so the first
    undamped step is already the fixed point; in that case damping is
    skipped.  Non-convergence is reported through the flag and the residual
    history, never raised.
    """
    grid = cfg.grid
    if spec.domain == "ball" and abs(grid.r_max - spec.R) > 1e-12 * spec.R:
        raise GridError("solver grid must span exactly the ball radius")
    damping = 1.0 if spec.g_form == "constant" else cfg.damping
    u = RadialFunction(grid, np.zeros(len(grid)), None)
    history = []
    converged = False
    residual = math.inf
    iterations = 0
    for iterations in range(1, cfg.max_picard + 1):
        spline = CubicSpline(grid.nodes, u.values)

        def rhs(r, _s=spline):
            return a_eval(spec, r) * g_eval(spec, _s(r))

        tail_mass = _rhs_tail_mass(spec, u, float(rhs(grid.r_max)))
        u_new = _signed_solve_callable(rhs, grid, spec, tail_mass)
        if damping < 1.0:
            mixed = (1.0 - damping) * u.values + damping * u_new.values
            tail, sign = _mix_tails(u, u_new, damping)
            u = RadialFunction(grid, mixed, tail, sign)
        else:
            u = u_new
        residual = weak_residual(u, spec, eps=cfg.grad_regularization)
        history.append(residual)
        if residual <= cfg.residual_tol:
            converged = True
            break
    envelope = _comparison_envelope(spec, u)
    return SolveReport(
        u=u,
        iterations=iterations,
        residual=residual,
        converged=converged,
        positivity=bool(np.all(u.values >= 0.0)),
        residual_tol=cfg.residual_tol,
        residual_history=tuple(history),
        envelope=envelope,
    )


def _mix_tails(u_old: RadialFunction, u_new: RadialFunction, d: float):
    """Convex combination of tail models; exponents agree along the iteration."""
    t_old, t_new = u_old.tail, u_new.tail
    if t_new is None and t_old is None:
        return None, 1
    if t_old is None:
        return PowerTail(d * t_new.coeff, t_new.exponent), u_new.sign
    if t_new is None:
        return PowerTail((1.0 - d) * t_old.coeff, t_old.exponent), u_old.sign
    signed = (1.0 - d) * u_old.sign * t_old.coeff + d * u_new.sign * t_new.coeff
    return PowerTail(abs(signed), t_new.exponent), (1 if signed >= 0 else -1)


def _comparison_envelope(spec: ProblemSpec, u: RadialFunction) -> RadialFunction:
    """Dominating profile v = solve(C w) with C = c_a c_g (1 + |u|_inf^(r-1))."""
    sup_u = float(np.max(np.abs(u.values)))
    C = spec.c_a * spec.c_g * (1.0 + sup_u ** (spec.r_growth - 1.0))
    w_vals = C * spec.a_weight.eval(u.grid.nodes, spec.N) / spec.a_weight.c
    gamma_w = spec.N + spec.a_weight.alpha
    tail = PowerTail(float(w_vals[-1]) * u.grid.r_max**gamma_w, gamma_w)
    h = RadialFunction(u.grid, w_vals, tail)
    if spec.domain == "ball":
        return solve_ball_dirichlet(h.with_tail(None), spec.p, spec.N, spec.R).u
    return solve_radial_rhs(h, spec.p, spec.N).u


def _hat_supports(grid: RadialGrid):
    """Node-index triples (a, m, b) of the fixed hat test family.

    Centers are log-spaced between r_max/1000 and r_max/4 and snapped to
    grid nodes so the hats are exactly piecewise linear on the grid.
    """
    nodes = grid.nodes
    n = nodes.size - 1
    targets = np.geomspace(grid.r_max / 1000.0, grid.r_max / 4.0, 12)
    hats = []
    seen = set()
    for c in targets:
        m = int(np.searchsorted(nodes, c))
        m = min(max(m, 2), n - 2)
        a = int(np.searchsorted(nodes, nodes[m] / 2.0))
        a = min(max(a, 1), m - 1)
        b = int(np.searchsorted(nodes, 1.5 * nodes[m]))
        b = min(max(b, m + 1), n)
        key = (a, m, b)
        if key not in seen:
            seen.add(key)
            hats.append(key)
    return hats


def _weak_residual_core(
    u: RadialFunction, rhs_eval, p: float, N: int, eps: float = 1e-10
) -> float:
    """Max normalized weak-form defect over the fixed hat family.

    The flux |u'|^(p-2) u' is evaluated at per-cell Gauss points from a cubic
    spline reconstruction of u (the piecewise-linear slopes alone would cap
    the measurable residual at the interpolation error); for p < 2 the flux
    is regularized as (u'^2 + eps^2)^((p-2)/2) u'.
    """
    nodes = u.grid.nodes
    spline = CubicSpline(nodes, u.values)
    dspline = spline.derivative()
    area = sphere_area(N)
    worst = 0.0
    for a, m, b in _hat_supports(u.grid):
        x_a, x_m, x_b = nodes[a], nodes[m], nodes[b]
        slope_up = 1.0 / (x_m - x_a)
        slope_dn = -1.0 / (x_b - x_m)

        lo = nodes[a:b]
        hi = nodes[a + 1 : b + 1]
        width = hi - lo
        pts = lo[:, None] + width[:, None] * _GL_X[None, :]
        wts = width[:, None] * _GL_W[None, :]
        phi_slope = np.where(pts < x_m, slope_up, slope_dn)

        du = dspline(pts)
        if p == 2.0:
            flux = du
        elif p > 2.0:
            flux = np.abs(du) ** (p - 2.0) * du
        else:
            flux = (du * du + eps * eps) ** ((p - 2.0) / 2.0) * du
        lhs = float(np.sum(wts * flux * phi_slope * pts ** (N - 1)))

        phi = np.where(
            pts < x_m, (pts - x_a) * slope_up, (x_b - pts) / (x_b - x_m)
        )
        rhs = float(np.sum(wts * rhs_eval(pts) * phi * pts ** (N - 1)))

        energy_p = (
            abs(slope_up) ** p * (x_m**N - x_a**N) / N
            + abs(slope_dn) ** p * (x_b**N - x_m**N) / N
        )
        phi_energy = (area * energy_p) ** (1.0 / p)
        worst = max(worst, area * abs(lhs - rhs) / phi_energy)
    return worst


def weak_residual(u: RadialFunction, spec: ProblemSpec, eps: float = 1e-10) -> float:
    """Weak-form residual of u against the spec's right-hand side a g(., u)."""
    spline = CubicSpline(u.grid.nodes, u.values)

    def rhs(r):
        return a_eval(spec, r) * g_eval(spec, spline(r))

    return _weak_residual_core(u, rhs, spec.p, spec.N, eps)


def weak_residual_rhs(u: RadialFunction, rhs, p: float, N: int, eps: float = 1e-10) -> float:
    """Weak-form residual of u against an explicit right-hand side.

    ``rhs`` may be a RadialFunction or any callable of the radius.
    """
    rhs_eval = rhs.eval if isinstance(rhs, RadialFunction) else rhs
    return _weak_residual_core(u, rhs_eval, p, N, eps)


def comparison_check(u: RadialFunction, v: RadialFunction, tol: float):
    """Nodes where |u| exceeds the dominating profile v by more than tol."""
    if not u.grid.same_as(v.grid):
        raise GridError("comparison requires profiles on a common grid")
    bad = np.abs(u.values) > v.values + tol
    return [
        Violation(int(i), float(u.grid.nodes[i]), float(u.values[i]), float(v.values[i]))
        for i in np.nonzero(bad)[0]
    ]
