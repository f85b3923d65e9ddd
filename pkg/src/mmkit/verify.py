"""The single re-verification gate for every witness type.

A :class:`Report` lists each checked relation with its exact sides, so a
certificate can be audited line by line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from mmkit.core import (
    BoxWitness,
    ConstructionFailed,
    CorrWitness,
    DimensionMismatch,
    EpsWitness,
    FinitePseudoMetric,
    GHWitness,
    MapWitness,
    MMSpace,
    push_vector,
)
from mmkit.transport import prohorov

_RELATIONS = {
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
}


@dataclass(frozen=True)
class Check:
    name: str
    lhs: Fraction
    rhs: Fraction
    relation: str
    holds: bool


@dataclass
class Report:
    kind: str
    checks: list[Check] = field(default_factory=list)

    def add(self, name: str, lhs, rhs, relation: str) -> bool:
        lhs, rhs = Fraction(lhs), Fraction(rhs)
        ok = _RELATIONS[relation](lhs, rhs)
        self.checks.append(Check(name, lhs, rhs, relation, ok))
        return ok

    @property
    def valid(self) -> bool:
        return all(c.holds for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.holds]

    def __bool__(self) -> bool:
        return self.valid


def _metric(S) -> FinitePseudoMetric:
    return S.metric if isinstance(S, MMSpace) else S


def _check_map_range(report: Report, f: Sequence[int], X, Y) -> bool:
    if len(f) != X.n:
        raise DimensionMismatch(f"map has {len(f)} entries, source has {X.n} atoms")
    ok = True
    for i, v in enumerate(f):
        ok &= report.add(f"range[{X.labels[i]}]", v, Y.n, "<") & report.add(
            f"range_low[{X.labels[i]}]", v, 0, ">="
        )
    return ok


def _verify_map(X: MMSpace, Y: MMSpace, w: MapWitness) -> Report:
    r = Report("map")
    if not _check_map_range(r, w.f, X, Y):
        return r
    f = w.f
    for i in range(X.n):
        for j in range(i + 1, X.n):
            r.add(f"lipschitz[{X.labels[i]},{X.labels[j]}]", Y.d(f[i], f[j]), X.d(i, j), "<=")
    pushed = push_vector(X.mass, f, Y.n)
    for y in range(Y.n):
        r.add(f"pushforward[{Y.labels[y]}]", pushed[y], Y.mass[y], "==")
    return r


def _verify_eps(X: MMSpace, Y: MMSpace, w: EpsWitness) -> Report:
    r = Report("eps")
    r.add("eps_nonnegative", w.eps, 0, ">=")
    if not _check_map_range(r, w.f, X, Y):
        return r
    for i in w.domain:
        if not 0 <= i < X.n:
            raise DimensionMismatch(f"domain index {i} out of range")
    f, dom, eps = w.f, w.domain, w.eps
    r.add("domain_mass", X.measure(dom), 1 - eps, ">=")
    for a, i in enumerate(dom):
        for j in dom[a + 1 :]:
            r.add(
                f"lipschitz_eps[{X.labels[i]},{X.labels[j]}]",
                Y.d(f[i], f[j]),
                X.d(i, j) + eps,
                "<=",
            )
    pushed = push_vector(X.mass, f, Y.n)
    r.add("prohorov", prohorov(Y.metric, pushed, Y.mass).value, eps, "<=")
    return r


def _verify_box(X: MMSpace, Y: MMSpace, w: BoxWitness) -> Report:
    r = Report("box")
    pi = w.coupling
    if len(pi.mu) != X.n or len(pi.nu) != Y.n:
        raise DimensionMismatch("coupling shape does not match the spaces")
    for i in range(X.n):
        r.add(f"marginal_x[{X.labels[i]}]", pi.mu[i], X.mass[i], "==")
    for j in range(Y.n):
        r.add(f"marginal_y[{Y.labels[j]}]", pi.nu[j], Y.mass[j], "==")
    for i, j in w.kept:
        if not (0 <= i < X.n and 0 <= j < Y.n):
            raise DimensionMismatch(f"kept pair {(i, j)} out of range")
        r.add(f"kept_support[{X.labels[i]},{Y.labels[j]}]", pi.pi[i][j], 0, ">")
    r.add("kept_mass", pi.mass_on(w.kept), 1 - w.eps, ">=")
    kept = w.kept
    for a, (i, j) in enumerate(kept):
        for k, l in kept[a + 1 :]:
            r.add(
                f"distortion[({X.labels[i]},{Y.labels[j]}),({X.labels[k]},{Y.labels[l]})]",
                abs(X.d(i, k) - Y.d(j, l)),
                w.eps,
                "<=",
            )
    return r


def _verify_corr(K, L, w: CorrWitness) -> Report:
    r = Report("corr")
    for i, j in w.pairs:
        if not (0 <= i < K.n and 0 <= j < L.n):
            raise DimensionMismatch(f"pair {(i, j)} out of range")
    left = {i for i, _ in w.pairs}
    right = {j for _, j in w.pairs}
    for i in range(K.n):
        r.add(f"covers_left[{K.labels[i]}]", int(i in left), 1, "==")
    for j in range(L.n):
        r.add(f"covers_right[{L.labels[j]}]", int(j in right), 1, "==")
    dis = max(
        (abs(K.d(i, k) - L.d(j, l)) for i, j in w.pairs for k, l in w.pairs),
        default=Fraction(0),
    )
    r.add("distortion", dis, w.distortion, "==")
    return r


def _verify_gh(K, L, w: GHWitness) -> Report:
    r = Report("gh")
    r.add("eps_nonnegative", w.eps, 0, ">=")
    if not _check_map_range(r, w.f, K, L):
        return r
    f = w.f
    for i in range(K.n):
        for j in range(i + 1, K.n):
            r.add(f"lipschitz_eps[{K.labels[i]},{K.labels[j]}]", L.d(f[i], f[j]), K.d(i, j) + w.eps, "<=")
    image = sorted(set(f))
    for y in range(L.n):
        r.add(f"covering[{L.labels[y]}]", min(L.d(y, p) for p in image), w.eps, "<=")
    return r


def verify_witness(X, Y, w) -> Report:
    """Re-check ``w`` against source ``X`` and target ``Y``.

    Map/eps witnesses certify ``Y ≺ X`` / ``Y ≺_eps X`` (the map runs X -> Y);
    box and correspondence witnesses relate X (rows) to Y (columns).
    """
    if isinstance(w, MapWitness):
        return _verify_map(X, Y, w)
    if isinstance(w, EpsWitness):
        return _verify_eps(X, Y, w)
    if isinstance(w, BoxWitness):
        return _verify_box(X, Y, w)
    if isinstance(w, CorrWitness):
        return _verify_corr(_metric(X), _metric(Y), w)
    if isinstance(w, GHWitness):
        return _verify_gh(_metric(X), _metric(Y), w)
    raise TypeError(f"unknown witness type {type(w).__name__}")


# ---------------------------------------------------------------------------
# tight parameters


def lipschitz_defect(X, Y, f: Sequence[int], domain: Sequence[int] | None = None) -> Fraction:
    """``max(0, max d_Y(f x, f x') - d_X(x, x'))`` over pairs in ``domain``."""
    dom = range(X.n) if domain is None else list(domain)
    worst = Fraction(0)
    for i in dom:
        for j in dom:
            worst = max(worst, Y.d(f[i], f[j]) - X.d(i, j))
    return worst


def tight_eps(X: MMSpace, Y: MMSpace, f: Sequence[int], domain: Sequence[int]) -> Fraction:
    """Least eps at which ``(f, domain)`` certifies ``Y ≺_eps X``."""
    pushed = push_vector(X.mass, f, Y.n)
    return max(
        Fraction(0),
        1 - X.measure(domain),
        lipschitz_defect(X, Y, f, domain),
        prohorov(Y.metric, pushed, Y.mass).value,
    )


def tight_gh_eps(K, L, f: Sequence[int]) -> Fraction:
    K, L = _metric(K), _metric(L)
    image = sorted(set(f))
    cover = max(min(L.d(y, p) for p in image) for y in range(L.n))
    return max(lipschitz_defect(K, L, f), cover)


def require_valid(report: Report, what: str) -> Report:
    """Raise ConstructionFailed when a freshly built witness does not verify."""
    if not report.valid:
        bad = report.failures()[0]
        raise ConstructionFailed(
            f"{what}: check {bad.name} failed ({bad.lhs} {bad.relation} {bad.rhs})",
            check=bad.name,
        )
    return report
