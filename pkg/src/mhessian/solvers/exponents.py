"""Integrability and Hoelder exponents attached to (m, n, p)."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ExponentRecord:
    m: int
    n: int
    p: float
    ell: float
    p_star: float
    k_exp: float
    holder_condition: bool
    limit_case: bool

    def tau(self, r: float) -> float:
        """tau = m r p / (p - r), defined for 0 < r < p."""
        if not 0 < r < self.p:
            raise ValueError(f"need 0 < r < p, got r={r}, p={self.p}")
        return self.m * r * self.p / (self.p - r)


def ell_exponent(m: int, n: int) -> float:
    return math.inf if m == n else (m + 1) / (n - m)


def p_star(m: int, n: int) -> float:
    """Critical exponent; 1 in the limit case m = n, nan when ell <= 1."""
    if m == n:
        return 1.0
    ell = ell_exponent(m, n)
    if ell <= 1:
        return math.nan
    delta = ell**2 * (n - m) ** 2 + 4 * ell * m * n
    return (ell * (n + m) + math.sqrt(delta)) / (2 * m * (ell - 1))


def k_exponent(m: int, n: int, p: float) -> float:
    return math.inf if m == n else n * (p - 1) / (p * (n - m))


def holder_condition(m: int, n: int, p: float) -> bool:
    ps = p_star(m, n)
    return (n - 1) / 2 < m <= n and not math.isnan(ps) and p > ps


def compute_exponents(m: int, n: int, p: float) -> ExponentRecord:
    if not 1 <= m:
        raise ValueError("m must be >= 1")
    if m > n:
        raise ValueError("m exceeds n")
    if not p > 1:
        raise ValueError("p must be > 1")
    return ExponentRecord(
        m=m,
        n=n,
        p=float(p),
        ell=ell_exponent(m, n),
        p_star=p_star(m, n),
        k_exp=k_exponent(m, n, p),
        holder_condition=holder_condition(m, n, p),
        limit_case=(m == n),
    )
