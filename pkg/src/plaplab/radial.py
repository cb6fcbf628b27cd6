"""Radial grids, piecewise-linear profiles with power-law tails, and norms.

A profile u lives on a grid 0 = r_0 < r_1 < ... < r_n = r_max, is piecewise
linear between nodes, and optionally carries a tail model

    |u(r)| ~ C_t * r^(-gamma_t)   for r > r_max,

so integrals over all of R^N split into a grid part (composite trapezoid,
exact per cell where cheap to be) and a closed-form tail part.  Every norm
reports the tail contribution separately as ``truncation_error``.

Lebesgue norms are evaluated in the log domain throughout, which keeps the
huge exponents produced by norm bootstrapping (beta_k in the tens of
thousands) free of overflow and underflow.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gamma as gamma_fn, logsumexp

from .errors import DomainError, FitError, GridError

__all__ = [
    "RadialGrid",
    "PowerTail",
    "RadialFunction",
    "NormValue",
    "WeightSpec",
    "make_grid",
    "grid_from_nodes",
    "sphere_area",
    "lr_norm",
    "weighted_norm",
    "energy_norm",
    "weight_profile",
    "profile_from_callable",
    "write_profile_csv",
    "read_profile_csv",
]


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere S^(N-1) in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / gamma_fn(N / 2.0)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing radii from 0 to r_max; grading records provenance."""

    nodes: np.ndarray
    grading: str  # "uniform" | "geometric" | "custom"
    ratio: float | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 16:
            raise DomainError("grid needs at least 16 nodes")
        if nodes[0] != 0.0:
            raise DomainError("grid must start at radius 0")
        if not np.all(np.diff(nodes) > 0.0):
            raise DomainError("grid nodes must be strictly increasing")

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    def __len__(self) -> int:
        return self.nodes.size

    def same_as(self, other: "RadialGrid") -> bool:
        return self.nodes.size == other.nodes.size and np.array_equal(self.nodes, other.nodes)


def make_grid(r_max: float, n: int, grading: str = "geometric") -> RadialGrid:
    """Grid with n+1 nodes on [0, r_max].

    Geometric grading grows the spacing by a fixed ratio chosen so the first
    interval is at most r_max / n^2, which resolves integrands with algebraic
    behaviour at the origin.
    """
    if r_max <= 0.0:
        raise DomainError(f"need r_max > 0, got {r_max}")
    if n < 16:
        raise DomainError(f"need n >= 16, got {n}")
    if grading == "uniform":
        return RadialGrid(np.linspace(0.0, r_max, n + 1), "uniform")
    if grading != "geometric":
        raise DomainError(f"unknown grading {grading!r}")
    # Spacing h_k = h_0 g^k.  With x = n log g the first-interval condition
    # h_0 = r_max (g-1)/(g^n-1) = r_max/n^2 becomes f(x) = (e^x - 1) - n^2 (e^(x/n) - 1) = 0.
    def f(x: float) -> float:
        return math.expm1(x) - n * n * math.expm1(x / n)

    lo, hi = 1e-9, 100.0
    if f(lo) >= 0.0 or f(hi) <= 0.0:  # pragma: no cover - bracket always valid for n >= 16
        raise DomainError("geometric grading bracket failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    x = hi  # f(hi) >= 0 guarantees first interval <= r_max/n^2
    k = np.arange(n + 1, dtype=float)
    nodes = r_max * np.expm1(k * (x / n)) / np.expm1(x)
    nodes[0] = 0.0
    nodes[-1] = r_max
    return RadialGrid(nodes, "geometric", ratio=math.exp(x / n))


def grid_from_nodes(nodes) -> RadialGrid:
    """Wrap explicit node radii (CSV ingestion, bespoke test grids)."""
    return RadialGrid(np.asarray(nodes, dtype=float), "custom")


@dataclass(frozen=True)
class PowerTail:
    """|u(r)| ~ coeff * r^(-exponent) beyond the grid; exponent 0 = flat."""

    coeff: float
    exponent: float

    def __post_init__(self):
        if self.coeff < 0.0:
            raise DomainError(f"tail coefficient must be >= 0, got {self.coeff}")
        if self.exponent < 0.0:
            raise DomainError(f"tail exponent must be >= 0, got {self.exponent}")


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Nodal values on a grid, piecewise linear, with optional power tail.

    The tail models the magnitude |u|; ``sign`` carries the far-field sign so
    one-signed profiles evaluate consistently beyond r_max.
    """

    grid: RadialGrid
    values: np.ndarray
    tail: PowerTail | None = None
    sign: int = 1

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != self.grid.nodes.shape:
            raise GridError("values and grid nodes must have matching shape")
        if not np.all(np.isfinite(vals)):
            raise DomainError("profile values must be finite")
        if self.tail is not None and self.tail.coeff > 0.0:
            edge = self.tail.coeff * self.grid.r_max ** (-self.tail.exponent)
            last = abs(float(vals[-1]))
            if abs(edge - last) > 0.2 * max(edge, last):
                raise DomainError(
                    f"tail value {edge:.6g} at r_max disagrees with last node value "
                    f"{last:.6g} by more than 20%"
                )

    def eval(self, r):
        """Piecewise-linear values inside the grid, tail model beyond it."""
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self.grid.nodes, self.values)
        beyond = r > self.grid.r_max
        if np.any(beyond):
            if self.tail is None or self.tail.coeff == 0.0:
                out = np.where(beyond, 0.0, out)
            else:
                tail_vals = self.sign * self.tail.coeff * np.power(
                    np.maximum(r, 1e-300), -self.tail.exponent
                )
                out = np.where(beyond, tail_vals, out)
        return out if out.ndim else float(out)

    def scale(self, t: float) -> "RadialFunction":
        tail = None
        sign = self.sign
        if self.tail is not None:
            tail = PowerTail(abs(t) * self.tail.coeff, self.tail.exponent)
            sign = self.sign if t >= 0 else -self.sign
        return RadialFunction(self.grid, t * self.values, tail, sign)

    def positive_part(self) -> "RadialFunction":
        tail = self.tail if (self.tail is not None and self.sign > 0) else None
        return RadialFunction(self.grid, np.maximum(self.values, 0.0), tail, 1)

    def negative_part(self) -> "RadialFunction":
        tail = self.tail if (self.tail is not None and self.sign < 0) else None
        return RadialFunction(self.grid, np.maximum(-self.values, 0.0), tail, 1)

    def with_tail(self, tail: PowerTail | None, sign: int = 1) -> "RadialFunction":
        return RadialFunction(self.grid, self.values, tail, sign)


def profile_from_callable(fn, grid: RadialGrid, tail: PowerTail | None = None) -> RadialFunction:
    return RadialFunction(grid, np.asarray(fn(grid.nodes), dtype=float), tail)


@dataclass(frozen=True)
class WeightSpec:
    """Decaying weight w(x) = c / (1 + |x|^(N + alpha))."""

    alpha: float
    c: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise DomainError(f"need alpha > 0, got {self.alpha}")
        if self.c <= 0.0:
            raise DomainError(f"need c > 0, got {self.c}")

    def eval(self, r, N: int):
        r = np.asarray(r, dtype=float)
        out = self.c / (1.0 + r ** (N + self.alpha))
        return out if out.ndim else float(out)


def weight_profile(spec: WeightSpec, grid: RadialGrid, N: int) -> RadialFunction:
    """The weight as a profile on a grid, tail matched to its leading power."""
    vals = spec.eval(grid.nodes, N)
    gamma_t = N + spec.alpha
    coeff = float(vals[-1]) * grid.r_max**gamma_t
    return RadialFunction(grid, vals, PowerTail(coeff, gamma_t))


@dataclass(frozen=True)
class NormValue:
    exponent: float
    value: float
    truncation_error: float


def _log_trapz(log_f: np.ndarray, x: np.ndarray) -> float:
    """log of trapz(exp(log_f), x) without leaving the log domain."""
    dx = np.diff(x)
    log_half_dx = np.log(0.5 * dx)
    left = log_half_dx + log_f[:-1]
    right = log_half_dx + log_f[1:]
    return float(logsumexp(np.concatenate([left, right])))


def _log_abs(values: np.ndarray) -> np.ndarray:
    out = np.full_like(values, -np.inf)
    nz = values != 0.0
    out[nz] = np.log(np.abs(values[nz]))
    return out


def lr_norm(u: RadialFunction, r: float, N: int) -> NormValue:
    """Lebesgue norm |u|_r over R^N for radial u; r may be math.inf.

    Finite r: (sphere_area * int |u|^r rho^(N-1) drho + tail)^(1/r), grid part
    by trapezoid in the log domain, tail in closed form from the power model.
    Infinite r: max over nodes and the tail edge value.
    """
    if N < 2:
        raise DomainError(f"need N >= 2, got {N}")
    if math.isinf(r):
        node_max = float(np.max(np.abs(u.values)))
        tail_sup = 0.0
        if u.tail is not None and u.tail.coeff > 0.0:
            tail_sup = u.tail.coeff * u.grid.r_max ** (-u.tail.exponent)
        return NormValue(math.inf, max(node_max, tail_sup), max(0.0, tail_sup - node_max))
    if r < 1.0:
        raise DomainError(f"need r >= 1 or r = inf, got {r}")
    nodes = u.grid.nodes
    with np.errstate(divide="ignore"):
        log_rho = np.where(nodes > 0.0, np.log(np.maximum(nodes, 1e-300)), -np.inf)
    log_f = r * _log_abs(u.values) + (N - 1) * log_rho
    log_core = _log_trapz(log_f, nodes)
    log_tail = -np.inf
    if u.tail is not None and u.tail.coeff > 0.0:
        decay = r * u.tail.exponent
        if decay <= N:
            raise FitError(
                f"L^{r} tail integral diverges: r*gamma_t = {decay} <= N = {N}"
            )
        log_tail = (
            r * math.log(u.tail.coeff)
            + (N - decay) * math.log(u.grid.r_max)
            - math.log(decay - N)
        )
    log_area = math.log(sphere_area(N))
    log_total = np.logaddexp(log_core, log_tail) + log_area
    value = math.exp(log_total / r) if log_total > -np.inf else 0.0
    core_only = math.exp((log_core + log_area) / r) if log_core > -np.inf else 0.0
    return NormValue(r, value, max(0.0, value - core_only))


def weighted_norm(u: RadialFunction, q: float, weight: WeightSpec, N: int) -> NormValue:
    """Weighted Lebesgue norm (int w |u|^q dx)^(1/q).

    The weight decays like c r^(-(N+alpha)) so the tail converges for every
    tail model of u, including flat tails.
    """
    if q <= 1.0:
        raise DomainError(f"need q > 1, got {q}")
    if N < 2:
        raise DomainError(f"need N >= 2, got {N}")
    nodes = u.grid.nodes
    with np.errstate(divide="ignore"):
        log_rho = np.where(nodes > 0.0, np.log(np.maximum(nodes, 1e-300)), -np.inf)
    log_w = np.log(weight.eval(nodes, N))
    log_f = log_w + q * _log_abs(u.values) + (N - 1) * log_rho
    log_core = _log_trapz(log_f, nodes)
    log_tail = -np.inf
    if u.tail is not None and u.tail.coeff > 0.0:
        # beyond r_max the weight is its leading power c r^(-(N+alpha))
        decay = weight.alpha + q * u.tail.exponent
        log_tail = (
            math.log(weight.c)
            + q * math.log(u.tail.coeff)
            - decay * math.log(u.grid.r_max)
            - math.log(decay)
        )
    log_area = math.log(sphere_area(N))
    log_total = np.logaddexp(log_core, log_tail) + log_area
    value = math.exp(log_total / q) if log_total > -np.inf else 0.0
    core_only = math.exp((log_core + log_area) / q) if log_core > -np.inf else 0.0
    return NormValue(q, value, max(0.0, value - core_only))


def energy_norm(u: RadialFunction, p: float, N: int) -> NormValue:
    """Gradient norm (sphere_area * int |u'|^p rho^(N-1) drho)^(1/p).

    u' uses second-order centered differences in the interior and first-order
    one-sided stencils at the two ends; the tail differentiates the power
    model, so flat tails contribute nothing.
    """
    if not (1.0 < p < N):
        raise DomainError(f"need 1 < p < N, got p={p}, N={N}")
    nodes = u.grid.nodes
    du = np.gradient(u.values, nodes)
    core = sphere_area(N) * np.trapezoid(np.abs(du) ** p * nodes ** (N - 1), nodes)
    tail = 0.0
    if u.tail is not None and u.tail.coeff * u.tail.exponent > 0.0:
        slope_coeff = u.tail.coeff * u.tail.exponent  # |u'| ~ slope_coeff r^(-(gamma+1))
        decay = p * (u.tail.exponent + 1.0)
        if decay <= N:
            raise FitError(
                f"energy tail integral diverges: p*(gamma_t+1) = {decay} <= N = {N}"
            )
        tail = (
            sphere_area(N)
            * slope_coeff**p
            * u.grid.r_max ** (N - decay)
            / (decay - N)
        )
    value = (core + tail) ** (1.0 / p)
    core_only = core ** (1.0 / p)
    return NormValue(p, value, max(0.0, value - core_only))


def write_profile_csv(u: RadialFunction, path_or_buf) -> None:
    """Serialize as `radius,value` rows preceded by a `# tail:` comment line."""
    coeff = float(u.tail.coeff) if u.tail is not None else 0.0
    expo = float(u.tail.exponent) if u.tail is not None else 0.0
    lines = [f"# tail: C={coeff!r} gamma={expo!r}", "radius,value"]
    lines.extend(f"{float(r)!r},{float(v)!r}" for r, v in zip(u.grid.nodes, u.values))
    text = "\n".join(lines) + "\n"
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        with open(path_or_buf, "w") as fh:
            fh.write(text)
    else:
        path_or_buf.write(text)


def read_profile_csv(path_or_buf) -> RadialFunction:
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        with open(path_or_buf) as fh:
            text = fh.read()
    else:
        text = path_or_buf.read()
    tail = None
    radii, vals = [], []
    for line in io.StringIO(text):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "tail:" in line:
                parts = dict(
                    kv.split("=") for kv in line.split("tail:")[1].strip().split()
                )
                coeff, expo = float(parts["C"]), float(parts["gamma"])
                tail = PowerTail(coeff, expo) if coeff > 0.0 else None
            continue
        if line.startswith("radius"):
            continue
        r_txt, v_txt = line.split(",")
        radii.append(float(r_txt))
        vals.append(float(v_txt))
    grid = grid_from_nodes(radii)
    return RadialFunction(grid, np.asarray(vals), tail)
