"""Prohorov distance on a fixed finite (pseudo-)metric.

Conventions: closed balls ``B_t(A) = {x : d(x, A) <= t}`` and closed
conditions throughout. For finite spaces the minimum over the finite
candidate set equals the infimum of the open-condition definition.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from mmkit.core import (
    Coupling,
    DimensionMismatch,
    FinitePseudoMetric,
    MassError,
    enforce_guard,
    to_rat,
)
from mmkit.flow import max_coupling_on


@dataclass(frozen=True)
class DistanceResult:
    value: Fraction
    witness: object
    candidates_examined: int


def _dist(M) -> tuple:
    return M.dist if isinstance(M, FinitePseudoMetric) else tuple(tuple(to_rat(v) for v in r) for r in M)


def _measures(d, mu, nu):
    mu = tuple(to_rat(v) for v in mu)
    nu = tuple(to_rat(v) for v in nu)
    if len(mu) != len(d) or len(nu) != len(d):
        raise DimensionMismatch("measure length does not match the number of points")
    for vec in (mu, nu):
        if any(v < 0 for v in vec) or sum(vec) != 1:
            raise MassError("expected a probability vector")
    return mu, nu


def prohorov(M, mu, nu) -> DistanceResult:
    """Exact Prohorov distance via Strassen feasibility and integer max-flow.

    ``value = min_t max(t, 1 - m(t))`` over ``t`` in {0} ∪ {distances}, where
    ``m(t)`` is the largest coupling mass on pairs at distance ``<= t``. The
    returned coupling attains the optimum.
    """
    d = _dist(M)
    mu, nu = _measures(d, mu, nu)
    n = len(d)
    thresholds = sorted({Fraction(0)} | {v for row in d for v in row})
    best = None
    examined = 0
    for t in thresholds:
        if best is not None and t >= best[0]:
            break
        examined += 1
        edges = [(i, j) for i in range(n) if mu[i] for j in range(n) if nu[j] and d[i][j] <= t]
        m, pi = max_coupling_on(mu, nu, edges)
        value = max(t, 1 - m)
        if best is None or value < best[0]:
            best = (value, pi)
    return DistanceResult(best[0], best[1], examined)


def coupling_defect(M, pi: Coupling, t: Fraction) -> Fraction:
    """Mass ``pi`` places on pairs farther apart than ``t``."""
    d = _dist(M)
    return sum(
        (v for i, row in enumerate(pi.pi) for j, v in enumerate(row) if d[i][j] > t),
        Fraction(0),
    )


def prohorov_oracle(M, mu, nu, limit: int | None = None) -> Fraction:
    """Prohorov distance by brute force over all subsets.

    The answer is the least candidate ``eps`` with
    ``mu(A) <= nu(B_eps(A)) + eps`` and the same with the roles swapped, for
    every subset ``A``. Candidates: 0, 1, every distance, and every gap
    ``mu(A) - nu(B_t(A))``.
    """
    d = _dist(M)
    mu, nu = _measures(d, mu, nu)
    n = len(d)
    enforce_guard("PROHOROV_ORACLE", n, limit)
    full = 1 << n

    def subset_sums(vec):
        out = [Fraction(0)] * full
        for A in range(1, full):
            low = (A & -A).bit_length() - 1
            out[A] = out[A & (A - 1)] + vec[low]
        return out

    mu_of, nu_of = subset_sums(mu), subset_sums(nu)

    def balls(t):
        # balls(t)[A] = bitmask of B_t(A)
        rows = [sum(1 << j for j in range(n) if d[i][j] <= t) for i in range(n)]
        out = [0] * full
        for A in range(1, full):
            low = (A & -A).bit_length() - 1
            out[A] = out[A & (A - 1)] | rows[low]
        return out

    def violated(eps, ball):
        for A in range(1, full):
            B = ball[A]
            if mu_of[A] - nu_of[B] > eps or nu_of[A] - mu_of[B] > eps:
                return True
        return False

    dists = sorted({Fraction(0)} | {v for row in d for v in row})
    ball_at = {t: balls(t) for t in dists}
    candidates = {Fraction(0), Fraction(1)} | set(dists)
    for t in dists:
        ball = ball_at[t]
        for A in range(1, full):
            candidates.add(mu_of[A] - nu_of[ball[A]])
            candidates.add(nu_of[A] - mu_of[ball[A]])

    for eps in sorted(c for c in candidates if 0 <= c <= 1):
        # B_eps(A) is the ball at the largest distance value not exceeding eps
        t = max(v for v in dists if v <= eps)
        if not violated(eps, ball_at[t]):
            return eps
    raise AssertionError("eps = 1 is always feasible")
