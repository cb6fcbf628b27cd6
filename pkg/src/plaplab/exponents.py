"""Sobolev/iteration exponent arithmetic for sup-norm bootstrapping.

Everything here is exact scalar arithmetic on the exponent ladder

    beta_k = chi^k * beta,   chi = N / (N - p),   1 < p < N,

together with the infinite products

    theta0 = prod_{i>=0} (1 - p/(chi^i beta)),
    theta1 = prod_{i>=0} (1 - (p-1)/(chi^i beta)),

which control how a beta-norm bound is converted into a sup-norm bound.
Both products are truncated with an explicit geometric remainder bound so
callers get a certified absolute error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = [
    "ExponentParams",
    "IterationExponents",
    "critical_sobolev",
    "theta_products",
    "chain",
    "audit_exponent_choice",
]


@dataclass(frozen=True)
class ExponentParams:
    """Growth exponent p, dimension N, integrability beta, optional q > N."""

    p: float
    N: int
    beta: float
    q: float | None = None

    def __post_init__(self):
        if not (1.0 < self.p < self.N):
            raise DomainError(f"need 1 < p < N, got p={self.p}, N={self.N}")
        if not (self.beta > self.p):
            raise DomainError(f"need beta > p, got beta={self.beta}, p={self.p}")
        if self.q is not None and not (self.q > self.N):
            raise DomainError(f"need q > N, got q={self.q}, N={self.N}")

    @property
    def chi(self) -> float:
        return self.N / (self.N - self.p)


@dataclass(frozen=True)
class IterationExponents:
    """One realized exponent ladder: beta_k, partial products, and limits.

    ``theta_k[k]`` is the partial product over the first k factors, so
    ``theta_k[0] == 1`` and ``theta_k -> theta0`` as k grows.  ``tail_bound``
    is the certified bound on the log-product remainder at ``truncation_K``.
    """

    chi: float
    beta_k: tuple[float, ...]
    theta_k: tuple[float, ...]
    theta0: float
    theta1: float
    truncation_K: int
    tail_bound: float


def critical_sobolev(params: ExponentParams) -> float:
    """Largest Lebesgue exponent Np/(N-p) reached by the gradient-p energy space."""
    return params.N * params.p / (params.N - params.p)


def _truncated_product(a: float, beta: float, chi: float, tol: float):
    """prod_{i>=0}(1 - a/(chi^i beta)) with |error| <= tol.

    Factors increase to 1; once the current factor deficit x_i = a/(chi^i beta)
    drops below 1/2, the remaining log-product is bounded by twice the
    geometric sum 2 * (a/beta) * chi^(-K) / (chi - 1).
    """
    prod = 1.0
    i = 0
    while True:
        x = a / (chi**i * beta)
        prod *= 1.0 - x
        x_next = x / chi
        tail = 2.0 * (a / beta) * chi ** (-i) / (chi - 1.0)
        if x_next <= 0.5 and tail <= tol:
            return prod, i, tail
        i += 1
        if i > 100_000:  # unreachable for valid params; guards chi ~ 1 pathologies
            raise DomainError("product truncation failed to meet tolerance")


def theta_products(params: ExponentParams, tol: float = 1e-14) -> tuple[float, float]:
    """Limit exponents (theta0, theta1) of the iteration ladder.

    Both infinite products are truncated once the analytic remainder bound on
    the log-product drops below ``tol``; returned values carry an absolute
    error of at most ``tol``.
    """
    if tol <= 0.0:
        raise DomainError(f"need tol > 0, got {tol}")
    chi = params.chi
    theta0, _, _ = _truncated_product(params.p, params.beta, chi, tol)
    theta1, _, _ = _truncated_product(params.p - 1.0, params.beta, chi, tol)
    return theta0, theta1


def chain(params: ExponentParams, K: int) -> IterationExponents:
    """Exponent ladder beta_k = chi^k beta for k = 0..K with partial products.

    The partial products take every non-unit factor (the worst case of the
    per-step branch choice), so they decrease monotonically to theta0.
    """
    if K < 1:
        raise DomainError(f"need K >= 1, got {K}")
    chi = params.chi
    beta_k = tuple(params.beta * chi**k for k in range(K + 1))
    theta_k = [1.0]
    for k in range(K):
        theta_k.append(theta_k[-1] * (1.0 - params.p / (chi**k * params.beta)))
    tol = 1e-14
    theta0, trunc_K, tail = _truncated_product(params.p, params.beta, chi, tol)
    theta1, _, _ = _truncated_product(params.p - 1.0, params.beta, chi, tol)
    return IterationExponents(
        chi=chi,
        beta_k=beta_k,
        theta_k=tuple(theta_k),
        theta0=theta0,
        theta1=theta1,
        truncation_K=trunc_K,
        tail_bound=tail,
    )


def audit_exponent_choice(p: float, N: float, r: float) -> float:
    """Coefficient-integrability exponent q > N with (r - p) q / p = Np/(N-p).

    Valid for subcritical superlinear growth p < r < p*; the identity
    q = p p* / (r - p) then forces q > N automatically.
    """
    if not (1.0 < p < N):
        raise DomainError(f"need 1 < p < N, got p={p}, N={N}")
    p_star = N * p / (N - p)
    if not (p < r < p_star):
        raise DomainError(f"need p < r < p* = {p_star}, got r={r}")
    q = p * p_star / (r - p)
    assert q > N
    return q
