"""Spaces, couplings, witnesses and the exact primitives on them.

All scalars are ``Fraction``. A :class:`MMSpace` always has full support:
atoms of zero mass are dropped by :func:`validate_space` and rejected by the
constructor.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, Sequence

# ---------------------------------------------------------------------------
# errors


class MMError(Exception):
    """Base class; ``code`` is the machine-readable name used by the CLI."""

    code = "error"

    def __init__(self, message: str, **detail):
        super().__init__(message)
        self.detail = detail


class MetricAxiomViolation(MMError):
    code = "metric_axiom_violation"

    def __init__(self, axiom: str, points: tuple, message: str = ""):
        self.axiom = axiom
        self.points = points
        super().__init__(message or f"{axiom} violated at {points}", axiom=axiom, points=list(points))


class MassError(MMError):
    code = "mass_error"


class SizeGuard(MMError):
    code = "size_guard"

    def __init__(self, guard: str, size: int, limit: int):
        self.guard = guard
        self.size = size
        self.limit = limit
        super().__init__(
            f"exact search guard {guard}: size {size} exceeds limit {limit} "
            f"(override with MMKIT_GUARD_{guard})",
            guard=guard,
            size=size,
            limit=limit,
        )


class DimensionMismatch(MMError):
    code = "dimension_mismatch"


class DenominatorMismatch(MMError):
    code = "denominator_mismatch"


class PreconditionFailed(MMError):
    code = "precondition_failed"


class ConstructionFailed(MMError):
    """A constructed object failed re-verification. Indicates a bug."""

    code = "construction_failed"


# ---------------------------------------------------------------------------
# size guards

GUARD_DEFAULTS = {
    "ISO": 10,
    "PROHOROV_ORACLE": 12,
    "BOX_NODES": 30,
    "BOX_ORACLE_D": 8,
    "BOX_UPPER_NODES": 40,
    "GH": 12,
    "GH_EPS": 12,
    "DOM_SOURCE": 14,
    "DOM_TARGET": 8,
    "EPS_MAPS": 200_000,
    "PRODUCT": 4096,
    "DOMINATOR_ATOMS": 4096,
}


def guard_limit(name: str, override: int | None = None) -> int:
    """Limit for guard ``name``; ``MMKIT_GUARD_<NAME>`` overrides the default."""
    if override is not None:
        return override
    env = os.environ.get(f"MMKIT_GUARD_{name}")
    if env:
        return int(env)
    return GUARD_DEFAULTS[name]


def enforce_guard(name: str, size: int, override: int | None = None) -> None:
    limit = guard_limit(name, override)
    if size > limit:
        raise SizeGuard(name, size, limit)


# ---------------------------------------------------------------------------
# rationals

_RAT_RE = re.compile(r"^[+-]?\d+(/\d+)?$")


def parse_rat(text: str) -> Fraction:
    """Parse ``"p/q"`` or ``"n"`` (optional sign). Decimals and floats are refused."""
    s = text.strip()
    if not _RAT_RE.match(s):
        raise ValueError(f"not a rational literal: {text!r}")
    value = Fraction(s)
    return value


def to_rat(x) -> Fraction:
    if isinstance(x, bool):
        raise TypeError("bool is not a rational")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return parse_rat(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def common_denominator(values: Iterable[Fraction]) -> int:
    return lcm(1, *(Fraction(v).denominator for v in values))


# ---------------------------------------------------------------------------
# metric spaces


def _freeze_matrix(dist) -> tuple[tuple[Fraction, ...], ...]:
    rows = tuple(tuple(to_rat(v) for v in row) for row in dist)
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise DimensionMismatch("distance matrix is not square")
    return rows


def _check_pseudo_axioms(labels, d) -> None:
    n = len(d)
    for i in range(n):
        if d[i][i] != 0:
            raise MetricAxiomViolation("zero_diagonal", (labels[i],))
        for j in range(i + 1, n):
            if d[i][j] != d[j][i]:
                raise MetricAxiomViolation("symmetry", (labels[i], labels[j]))
            if d[i][j] < 0:
                raise MetricAxiomViolation("nonnegativity", (labels[i], labels[j]))
    for i in range(n):
        di = d[i]
        for j in range(n):
            dij = di[j]
            dj = d[j]
            for k in range(n):
                if di[k] > dij + dj[k]:
                    raise MetricAxiomViolation("triangle", (labels[i], labels[j], labels[k]))


@dataclass(frozen=True)
class FinitePseudoMetric:
    """Labelled points with an exact distance matrix; zero off-diagonal allowed."""

    labels: tuple[str, ...]
    dist: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        d = _freeze_matrix(self.dist)
        labels = tuple(str(s) for s in self.labels)
        if len(labels) != len(d):
            raise DimensionMismatch(f"{len(labels)} labels for a {len(d)}x{len(d)} matrix")
        if len(d) == 0:
            raise DimensionMismatch("a space needs at least one point")
        if len(set(labels)) != len(labels):
            raise DimensionMismatch("point labels must be unique")
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "labels", labels)
        self._check()

    def _check(self) -> None:
        _check_pseudo_axioms(self.labels, self.dist)

    @property
    def n(self) -> int:
        return len(self.labels)

    def d(self, i: int, j: int) -> Fraction:
        return self.dist[i][j]

    @property
    def diam(self) -> Fraction:
        return max(max(row) for row in self.dist)

    def distance_values(self) -> set[Fraction]:
        return {v for row in self.dist for v in row}

    def restrict(self, indices: Sequence[int]):
        """Subspace on ``indices`` (same class as ``self``)."""
        idx = list(indices)
        return type(self)(
            tuple(self.labels[i] for i in idx),
            tuple(tuple(self.dist[i][j] for j in idx) for i in idx),
        )

    @classmethod
    def from_matrix(cls, dist, labels: Sequence[str] | None = None):
        d = _freeze_matrix(dist)
        if labels is None:
            labels = default_labels(len(d))
        return cls(tuple(labels), d)


class FiniteMetric(FinitePseudoMetric):
    """A finite metric space: a pseudo-metric with positive off-diagonal distances."""

    def _check(self) -> None:
        d = self.dist
        for i in range(len(d)):
            for j in range(i + 1, len(d)):
                if d[i][j] == 0 and d[j][i] == 0:
                    raise MetricAxiomViolation("positivity", (self.labels[i], self.labels[j]))
        super()._check()


def default_labels(n: int) -> tuple[str, ...]:
    if n <= 26:
        return tuple("abcdefghijklmnopqrstuvwxyz"[:n])
    return tuple(f"p{i}" for i in range(n))


@dataclass(frozen=True)
class MMSpace:
    metric: FiniteMetric
    mass: tuple[Fraction, ...]

    def __post_init__(self):
        mass = tuple(to_rat(m) for m in self.mass)
        if len(mass) != self.metric.n:
            raise DimensionMismatch(f"{len(mass)} masses for {self.metric.n} points")
        for label, m in zip(self.metric.labels, mass):
            if m <= 0:
                raise MassError(f"atom {label} has non-positive mass {m}", atom=label)
        if sum(mass) != 1:
            raise MassError(f"masses sum to {sum(mass)}, not 1")
        object.__setattr__(self, "mass", mass)

    @property
    def n(self) -> int:
        return self.metric.n

    @property
    def labels(self) -> tuple[str, ...]:
        return self.metric.labels

    @property
    def dist(self):
        return self.metric.dist

    def d(self, i: int, j: int) -> Fraction:
        return self.metric.dist[i][j]

    @property
    def diam(self) -> Fraction:
        return self.metric.diam

    def measure(self, indices: Iterable[int]) -> Fraction:
        return sum((self.mass[i] for i in indices), Fraction(0))


def validate_space(dist, mass, labels: Sequence[str] | None = None) -> MMSpace:
    """Check the raw data and return the support-normalized space.

    The full matrix must be a metric; zero-mass atoms are then dropped.
    """
    d = _freeze_matrix(dist)
    mass = tuple(to_rat(m) for m in mass)
    if len(mass) != len(d):
        raise DimensionMismatch(f"{len(mass)} masses for {len(d)} points")
    metric = FiniteMetric.from_matrix(d, labels)
    for label, m in zip(metric.labels, mass):
        if m < 0:
            raise MassError(f"atom {label} has negative mass {m}", atom=label)
    if sum(mass) != 1:
        raise MassError(f"masses sum to {sum(mass)}, not 1")
    keep = [i for i, m in enumerate(mass) if m > 0]
    return MMSpace(metric.restrict(keep), tuple(mass[i] for i in keep))


def one_point(label: str = "o") -> MMSpace:
    return MMSpace(FiniteMetric((label,), ((Fraction(0),),)), (Fraction(1),))


def uniform_space(metric: FiniteMetric) -> MMSpace:
    return MMSpace(metric, tuple(Fraction(1, metric.n) for _ in range(metric.n)))


# ---------------------------------------------------------------------------
# couplings and witnesses


@dataclass(frozen=True)
class Coupling:
    pi: tuple[tuple[Fraction, ...], ...]
    mu: tuple[Fraction, ...]
    nu: tuple[Fraction, ...]

    def __post_init__(self):
        pi = tuple(tuple(to_rat(v) for v in row) for row in self.pi)
        mu = tuple(to_rat(v) for v in self.mu)
        nu = tuple(to_rat(v) for v in self.nu)
        if len(pi) != len(mu) or any(len(r) != len(nu) for r in pi):
            raise DimensionMismatch("coupling shape does not match its marginals")
        for row in pi:
            if any(v < 0 for v in row):
                raise MassError("coupling has a negative entry")
        for i, row in enumerate(pi):
            if sum(row) != mu[i]:
                raise MassError(f"row {i} of coupling sums to {sum(row)}, expected {mu[i]}")
        for j in range(len(nu)):
            col = sum((pi[i][j] for i in range(len(pi))), Fraction(0))
            if col != nu[j]:
                raise MassError(f"column {j} of coupling sums to {col}, expected {nu[j]}")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)

    def support(self) -> list[tuple[int, int]]:
        return [(i, j) for i, row in enumerate(self.pi) for j, v in enumerate(row) if v > 0]

    def mass_on(self, pairs: Iterable[tuple[int, int]]) -> Fraction:
        return sum((self.pi[i][j] for i, j in pairs), Fraction(0))

    @classmethod
    def identity(cls, mass: Sequence[Fraction]) -> "Coupling":
        n = len(mass)
        pi = tuple(tuple(mass[i] if i == j else Fraction(0) for j in range(n)) for i in range(n))
        return cls(pi, tuple(mass), tuple(mass))

    @classmethod
    def product(cls, mu: Sequence[Fraction], nu: Sequence[Fraction]) -> "Coupling":
        return cls(tuple(tuple(a * b for b in nu) for a in mu), tuple(mu), tuple(nu))


@dataclass(frozen=True)
class MapWitness:
    """Map ``f`` from the source (dominating) space to the target; ``f[i]`` is a target index."""

    f: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(int(v) for v in self.f))


@dataclass(frozen=True)
class EpsWitness:
    """``f`` with nonexceptional ``domain`` certifying target ≺_eps source."""

    f: tuple[int, ...]
    domain: tuple[int, ...]
    eps: Fraction

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(int(v) for v in self.f))
        object.__setattr__(self, "domain", tuple(sorted({int(v) for v in self.domain})))
        object.__setattr__(self, "eps", to_rat(self.eps))

    @classmethod
    def exact(cls, w: MapWitness) -> "EpsWitness":
        return cls(w.f, tuple(range(len(w.f))), Fraction(0))

    def with_eps(self, eps) -> "EpsWitness":
        return EpsWitness(self.f, self.domain, eps)


@dataclass(frozen=True)
class BoxWitness:
    coupling: Coupling
    kept: tuple[tuple[int, int], ...]
    eps: Fraction

    def __post_init__(self):
        object.__setattr__(self, "kept", tuple(sorted({(int(i), int(j)) for i, j in self.kept})))
        object.__setattr__(self, "eps", to_rat(self.eps))


@dataclass(frozen=True)
class CorrWitness:
    pairs: tuple[tuple[int, int], ...]
    distortion: Fraction

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(sorted({(int(i), int(j)) for i, j in self.pairs})))
        object.__setattr__(self, "distortion", to_rat(self.distortion))


@dataclass(frozen=True)
class GHWitness:
    """Map between metric spaces for the Gromov-Hausdorff relation target ≺_eps source."""

    f: tuple[int, ...]
    eps: Fraction = field(default=Fraction(0))

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(int(v) for v in self.f))
        object.__setattr__(self, "eps", to_rat(self.eps))


# ---------------------------------------------------------------------------
# pushforward and quotients


def pushforward_map(X: MMSpace, f: Sequence[int], M: FinitePseudoMetric) -> tuple[MMSpace, list[int]]:
    """``f_*X`` on its support inside ``M`` plus the induced map X -> f_*X.

    Image atoms are ordered by their index in ``M``.
    """
    if len(f) != X.n:
        raise DimensionMismatch(f"map has {len(f)} entries for {X.n} atoms")
    for v in f:
        if not 0 <= v < M.n:
            raise DimensionMismatch(f"map value {v} out of range for {M.n} points")
    image = sorted(set(f))
    pos = {p: k for k, p in enumerate(image)}
    mass = [Fraction(0)] * len(image)
    for i, p in enumerate(f):
        mass[pos[p]] += X.mass[i]
    metric = FiniteMetric(
        tuple(M.labels[p] for p in image),
        tuple(tuple(M.dist[p][q] for q in image) for p in image),
    )
    return MMSpace(metric, tuple(mass)), [pos[p] for p in f]


def pushforward(X: MMSpace, f: Sequence[int], M: FinitePseudoMetric | None = None) -> MMSpace:
    """The mm-space ``(supp f_*mu_X, d_M, f_*mu_X)``; ``M`` defaults to X's own metric."""
    return pushforward_map(X, f, M if M is not None else X.metric)[0]


def push_vector(mass: Sequence[Fraction], f: Sequence[int], size: int) -> list[Fraction]:
    """``f_*mass`` as a length-``size`` vector (zeros kept)."""
    out = [Fraction(0)] * size
    for i, p in enumerate(f):
        out[p] += mass[i]
    return out


def pseudo_to_metric(P: FinitePseudoMetric, mass) -> tuple[MMSpace, MapWitness]:
    """Quotient by the zero-distance relation; classes are ordered by their lowest member."""
    mass = tuple(to_rat(m) for m in mass)
    if len(mass) != P.n:
        raise DimensionMismatch(f"{len(mass)} masses for {P.n} points")
    if any(m <= 0 for m in mass) or sum(mass) != 1:
        raise MassError("quotient needs a strictly positive probability vector")
    parent = list(range(P.n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(P.n):
        for j in range(i + 1, P.n):
            if P.dist[i][j] == 0:
                a, b = find(i), find(j)
                if a != b:
                    parent[max(a, b)] = min(a, b)
    roots = sorted({find(i) for i in range(P.n)})
    cls = {r: k for k, r in enumerate(roots)}
    proj = tuple(cls[find(i)] for i in range(P.n))
    qmass = [Fraction(0)] * len(roots)
    for i, k in enumerate(proj):
        qmass[k] += mass[i]
    metric = FiniteMetric(
        tuple(P.labels[r] for r in roots),
        tuple(tuple(P.dist[r][s] for s in roots) for r in roots),
    )
    X = MMSpace(metric, tuple(qmass))
    # projection is 1-Lipschitz: distances are constant on classes
    for i in range(P.n):
        for j in range(P.n):
            if metric.dist[proj[i]][proj[j]] != P.dist[i][j]:
                raise ConstructionFailed("pseudo-distance is not constant on quotient classes")
    return X, MapWitness(proj)


# ---------------------------------------------------------------------------
# isomorphism


def mm_isomorphic(X: MMSpace, Y: MMSpace, limit: int | None = None) -> bool:
    """Decide whether a distance- and mass-preserving bijection of atoms exists."""
    if X.n != Y.n:
        return False
    enforce_guard("ISO", X.n, limit)
    if sorted(X.mass) != sorted(Y.mass):
        return False
    sig_x = [(X.mass[i], tuple(sorted(X.dist[i]))) for i in range(X.n)]
    sig_y = [(Y.mass[j], tuple(sorted(Y.dist[j]))) for j in range(Y.n)]
    if sorted(sig_x) != sorted(sig_y):
        return False
    cand = [[j for j in range(Y.n) if sig_y[j] == sig_x[i]] for i in range(X.n)]
    order = sorted(range(X.n), key=lambda i: len(cand[i]))
    image: dict[int, int] = {}
    used = [False] * Y.n

    def extend(k: int) -> bool:
        if k == len(order):
            return True
        i = order[k]
        for j in cand[i]:
            if used[j]:
                continue
            if all(X.dist[i][a] == Y.dist[j][b] for a, b in image.items()):
                image[i] = j
                used[j] = True
                if extend(k + 1):
                    return True
                del image[i]
                used[j] = False
        return False

    return extend(0)
