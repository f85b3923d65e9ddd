"""Space constructors: products, quotient dominators, universal spaces, gluing, chain limits."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from mmkit.core import (
    ConstructionFailed,
    Coupling,
    BoxWitness,
    EpsWitness,
    FiniteMetric,
    FinitePseudoMetric,
    MapWitness,
    MMSpace,
    PreconditionFailed,
    enforce_guard,
    guard_limit,
    pseudo_to_metric,
    push_vector,
    to_rat,
)
from mmkit.metrics import gh
from mmkit.order import KuratowskiTable, kuratowski
from mmkit.transport import prohorov
from mmkit.verify import require_valid, tight_eps, tight_gh_eps, verify_witness

__all__ = [
    "ChainLimit",
    "DigitTable",
    "GlueResult",
    "KuratowskiTable",
    "UniversalSpaceSpec",
    "corollary_maps",
    "digit_table",
    "glue_chain",
    "glue_pair",
    "joint_quotient",
    "kuratowski",
    "net_chain_limit",
    "product",
    "quotient_dominator",
    "universal_dominate",
    "universal_space",
]


# ---------------------------------------------------------------------------
# products and quotients


def product(X: MMSpace, Y: MMSpace, limit: int | None = None) -> tuple[MMSpace, MapWitness, MapWitness]:
    """Sup-metric product with both projections; atom ``(i, j)`` has index ``i * |Y| + j``."""
    enforce_guard("PRODUCT", X.n * Y.n, limit)
    m = Y.n
    pairs = [(i, j) for i in range(X.n) for j in range(m)]
    metric = FiniteMetric(
        tuple(f"({X.labels[i]},{Y.labels[j]})" for i, j in pairs),
        tuple(tuple(max(X.d(i, k), Y.d(j, l)) for k, l in pairs) for i, j in pairs),
    )
    P = MMSpace(metric, tuple(X.mass[i] * Y.mass[j] for i, j in pairs))
    px = MapWitness(tuple(i for i, _ in pairs))
    py = MapWitness(tuple(j for _, j in pairs))
    require_valid(verify_witness(P, X, px), "first projection")
    require_valid(verify_witness(P, Y, py), "second projection")
    return P, px, py


def joint_quotient(
    W: MMSpace, targets: Sequence[MMSpace], maps: Sequence[MapWitness]
) -> tuple[MMSpace, list[MapWitness], MapWitness]:
    """Quotient of ``W`` by the largest pulled-back distance over all ``maps``.

    Returns the quotient ``X``, the induced maps ``X -> target`` and the
    projection ``W -> X``, all verified.
    """
    if not maps:
        raise PreconditionFailed("need at least one map")
    for V, f in zip(targets, maps):
        if not verify_witness(W, V, f).valid:
            raise PreconditionFailed(f"map onto {V.labels} does not verify as a domination")
    pseudo = FinitePseudoMetric(
        W.labels,
        tuple(
            tuple(max(V.d(f.f[a], f.f[b]) for V, f in zip(targets, maps)) for b in range(W.n))
            for a in range(W.n)
        ),
    )
    X, proj = pseudo_to_metric(pseudo, W.mass)
    induced = []
    for V, f in zip(targets, maps):
        g: list[int | None] = [None] * X.n
        for w, k in enumerate(proj.f):
            if g[k] is None:
                g[k] = f.f[w]
            elif g[k] != f.f[w]:
                raise ConstructionFailed("induced map is not constant on a quotient class")
        gw = MapWitness(tuple(g))
        require_valid(verify_witness(X, V, gw), "induced domination")
        induced.append(gw)
    require_valid(verify_witness(W, X, proj), "quotient projection")
    return X, induced, proj


def quotient_dominator(
    W: MMSpace, Y: MMSpace, Z: MMSpace, fY: MapWitness, fZ: MapWitness
) -> tuple[MMSpace, MapWitness, MapWitness, MapWitness]:
    """Smallest quotient ``X`` of ``W`` through which both dominations factor.

    Returns ``(X, gY, gZ, proj)`` certifying ``Y ≺ X``, ``Z ≺ X`` and ``X ≺ W``.
    """
    X, (gY, gZ), proj = joint_quotient(W, (Y, Z), (fY, fZ))
    return X, gY, gZ, proj


# ---------------------------------------------------------------------------
# universal spaces


@dataclass(frozen=True)
class UniversalSpaceSpec:
    """Truncated universal space: ``K`` digit atoms plus one tail atom, all at distance ``D``."""

    N: int
    D: Fraction
    K: int

    def __post_init__(self):
        object.__setattr__(self, "D", to_rat(self.D))
        if self.N < 2:
            raise PreconditionFailed("N must be at least 2")
        if self.D <= 0:
            raise PreconditionFailed("D must be positive")
        if self.K < 1:
            raise PreconditionFailed("depth must be at least 1")

    @property
    def p(self) -> tuple[Fraction, ...]:
        out: list[Fraction] = []
        left = Fraction(1)
        for _ in range(self.K):
            out.append(left / self.N)
            left -= out[-1]
        return tuple(out)

    @property
    def tail(self) -> Fraction:
        return 1 - sum(self.p)


def universal_space(spec: UniversalSpaceSpec) -> MMSpace:
    n = spec.K + 1
    labels = tuple(f"x{k}" for k in range(1, spec.K + 1)) + ("tail",)
    dist = tuple(tuple(Fraction(0) if i == j else spec.D for j in range(n)) for i in range(n))
    return MMSpace(FiniteMetric(labels, dist), spec.p + (spec.tail,))


@dataclass(frozen=True)
class DigitTable:
    """``digits[n]`` is the target atom of digit ``n``; ``tail`` receives the tail atom."""

    digits: tuple[int, ...]
    tail: int
    size: int

    @property
    def matrix(self) -> tuple[tuple[int, ...], ...]:
        """0/1 matrix with one row per target atom and one column per digit."""
        return tuple(tuple(int(d == k) for d in self.digits) for k in range(self.size))

    @property
    def map(self) -> tuple[int, ...]:
        return self.digits + (self.tail,)


def digit_table(spec: UniversalSpaceSpec, Y: MMSpace) -> DigitTable:
    """Greedy expansion: each digit goes to the atom with the largest residual mass.

    The residuals sum to ``N p_n`` before digit ``n`` and there are at most
    ``N`` atoms, so the largest residual is at least ``p_n`` and stays
    nonnegative after the subtraction.
    """
    if Y.n > spec.N:
        raise PreconditionFailed(f"{Y.n} atoms exceed N = {spec.N}")
    if Y.diam > spec.D:
        raise PreconditionFailed(f"diameter {Y.diam} exceeds D = {spec.D}")
    residual = list(Y.mass)
    digits = []
    for pn in spec.p:
        k = max(range(Y.n), key=lambda j: (residual[j], -j))
        if residual[k] < pn:
            raise ConstructionFailed("greedy digit invariant failed")
        residual[k] -= pn
        digits.append(k)
    tail = max(range(Y.n), key=lambda j: (residual[j], -j))
    return DigitTable(tuple(digits), tail, Y.n)


def universal_dominate(spec: UniversalSpaceSpec, Y: MMSpace) -> EpsWitness:
    """Witness for ``Y ≺_eps U`` with ``U = universal_space(spec)`` and the least verifying eps."""
    U = universal_space(spec)
    table = digit_table(spec, Y)
    f = table.map
    for a in range(U.n):
        for b in range(U.n):
            if Y.d(f[a], f[b]) > U.d(a, b):
                raise ConstructionFailed("digit map is not 1-Lipschitz")
    domain = tuple(range(U.n))
    eps = tight_eps(U, Y, f, domain)
    if eps > 2 * spec.tail:
        raise ConstructionFailed(f"universal eps {eps} exceeds twice the tail {spec.tail}")
    w = EpsWitness(f, domain, eps)
    require_valid(verify_witness(U, Y, w), "universal domination")
    return w


# ---------------------------------------------------------------------------
# gluing


@dataclass(frozen=True)
class GlueResult:
    """Disjoint union of the inputs; ``masses[k]`` is space ``k``'s measure pushed into it."""

    space: FinitePseudoMetric
    embeddings: tuple[tuple[int, ...], ...]
    masses: tuple[tuple[Fraction, ...], ...]
    dp_bounds: tuple[Fraction, ...]
    dp_total: Fraction


def glue_chain(
    spaces: Sequence[MMSpace],
    couplings: Sequence[Coupling],
    eps_list: Sequence,
    kept_sets: Sequence | None = None,
) -> GlueResult:
    """Glue consecutive spaces along box-style couplings.

    Between spaces ``k`` and ``k+1`` the bridge distance is
    ``min over kept (y, y') of d(z, y) + d(y', z') + eps_k``; a shortest-path
    closure supplies the distances between non-adjacent spaces. Every block
    stays isometric and consecutive measures end up within Prohorov distance
    ``eps_k``.
    """
    spaces = list(spaces)
    eps_list = [to_rat(e) for e in eps_list]
    if len(couplings) != len(spaces) - 1 or len(eps_list) != len(spaces) - 1:
        raise PreconditionFailed("need one coupling and one eps per adjacent pair")
    if kept_sets is None:
        kept_sets = [pi.support() for pi in couplings]
    kept_sets = [sorted(set(map(tuple, k))) for k in kept_sets]
    for k, (pi, kept, eps) in enumerate(zip(couplings, kept_sets, eps_list)):
        if not kept:
            raise PreconditionFailed(f"kept set {k} is empty")
        if tuple(pi.mu) != spaces[k].mass or tuple(pi.nu) != spaces[k + 1].mass:
            raise PreconditionFailed(f"coupling {k} does not couple the adjacent measures")
        if not verify_witness(spaces[k], spaces[k + 1], BoxWitness(pi, kept, eps)).valid:
            raise PreconditionFailed(f"coupling {k} with its kept set is not a box witness at {eps}")

    offsets = [0]
    for S in spaces:
        offsets.append(offsets[-1] + S.n)
    total = offsets[-1]
    inf = None
    d: list[list[Fraction | None]] = [[inf] * total for _ in range(total)]
    for k, S in enumerate(spaces):
        o = offsets[k]
        for i in range(S.n):
            for j in range(S.n):
                d[o + i][o + j] = S.d(i, j)
    for k, (kept, eps) in enumerate(zip(kept_sets, eps_list)):
        A, B = spaces[k], spaces[k + 1]
        oa, ob = offsets[k], offsets[k + 1]
        for z in range(A.n):
            for w in range(B.n):
                v = min(A.d(z, a) + B.d(b, w) for a, b in kept) + eps
                d[oa + z][ob + w] = d[ob + w][oa + z] = v
    for m in range(total):
        dm = d[m]
        for i in range(total):
            dim = d[i][m]
            if dim is None:
                continue
            di = d[i]
            for j in range(total):
                if dm[j] is not None and (di[j] is None or dim + dm[j] < di[j]):
                    di[j] = dim + dm[j]
    labels = tuple(f"{k}:{lab}" for k, S in enumerate(spaces) for lab in S.labels)
    space = FinitePseudoMetric(labels, tuple(tuple(row) for row in d))

    embeddings = []
    masses = []
    for k, S in enumerate(spaces):
        emb = tuple(range(offsets[k], offsets[k + 1]))
        for i in range(S.n):
            for j in range(S.n):
                if space.d(emb[i], emb[j]) != S.d(i, j):
                    raise ConstructionFailed(f"space {k} is not isometrically embedded after closure")
        embeddings.append(emb)
        masses.append(tuple(push_vector(S.mass, emb, total)))
    bounds = []
    for k, eps in enumerate(eps_list):
        dp = prohorov(space, masses[k], masses[k + 1]).value
        if dp > 2 * eps:
            raise ConstructionFailed(f"adjacent Prohorov distance {dp} exceeds {2 * eps}")
        bounds.append(dp)
    dp_total = prohorov(space, masses[0], masses[-1]).value
    if dp_total > 2 * sum(eps_list, Fraction(0)):
        raise ConstructionFailed(f"end-to-end Prohorov distance {dp_total} exceeds the telescoped bound")
    return GlueResult(space, tuple(embeddings), tuple(masses), tuple(bounds), dp_total)


def glue_pair(Y1: MMSpace, Y2: MMSpace, pi: Coupling, eps, kept=None) -> GlueResult:
    return glue_chain([Y1, Y2], [pi], [eps], None if kept is None else [kept])


# ---------------------------------------------------------------------------
# chain limits


def _metric(S):
    return S.metric if isinstance(S, MMSpace) else S


def _greedy_net(K, radius: Fraction) -> list[int]:
    """Farthest-point net from atom 0; every point ends strictly closer than ``radius``."""
    net = [0]
    gap = [K.d(x, 0) for x in range(K.n)]
    while True:
        far = max(range(K.n), key=lambda x: (gap[x], -x))
        if gap[far] < radius or gap[far] == 0:
            return sorted(net)
        net.append(far)
        gap = [min(gap[x], K.d(x, far)) for x in range(K.n)]


@dataclass(frozen=True)
class ChainLimit:
    """``tuples[x]`` is the compatible tuple generated by point ``x`` of the last space."""

    limit: FiniteMetric
    bound: Fraction
    nets: tuple[tuple[int, ...], ...]
    tuples: tuple[tuple[int, ...], ...]


def net_chain_limit(chain: Sequence, maps: Sequence[Sequence[int]], defects: Sequence) -> ChainLimit:
    """Finite truncation of the chain limit along ``maps[n]: X_{n+1} -> X_n``.

    Each map may shrink distances by at most ``defects[n]``. Nets of radius
    ``defects[n]`` and nearest-point projections give maps ``g_n`` into the
    nets; tuples are generated from the last space and compared at the last
    coordinate, which is where the limit distance is attained once the chain
    stops.
    """
    chain = [_metric(S) for S in chain]
    defects = [to_rat(e) for e in defects]
    if len(maps) != len(chain) - 1 or len(defects) != len(chain) - 1:
        raise PreconditionFailed("need one map and one defect per link")
    for n, (f, eps) in enumerate(zip(maps, defects)):
        src, dst = chain[n + 1], chain[n]
        if eps < 0 or len(f) != src.n or any(not 0 <= v < dst.n for v in f):
            raise PreconditionFailed(f"link {n} is malformed")
        for x in range(src.n):
            for y in range(src.n):
                if src.d(x, y) - eps > dst.d(f[x], f[y]):
                    raise PreconditionFailed(f"link {n} shrinks a distance by more than {eps}")

    nets = []
    gs = []
    for n, (f, eps) in enumerate(zip(maps, defects)):
        dst = chain[n]
        net = _greedy_net(dst, eps) if eps > 0 else list(range(dst.n))
        proj = [min(net, key=lambda p: (dst.d(x, p), p)) for x in range(dst.n)]
        g = [proj[f[x]] for x in range(chain[n + 1].n)]
        src = chain[n + 1]
        for x in range(src.n):
            for y in range(src.n):
                lhs, rhs = src.d(x, y) - 3 * eps, dst.d(g[x], g[y])
                if (eps > 0 and not lhs < rhs) or lhs > rhs:
                    raise ConstructionFailed(f"projected link {n} breaks the 3-defect inequality")
        nets.append(tuple(net))
        gs.append(g)
    last = chain[-1]
    nets.append(tuple(range(last.n)))

    tuples = []
    for x in range(last.n):
        t = [x]
        for g in reversed(gs):
            t.append(g[t[-1]])
        tuples.append(tuple(reversed(t)))
    limit = FiniteMetric(
        tuple(f"t{x}" for x in range(last.n)),
        tuple(tuple(last.d(t[-1], s[-1]) for s in tuples) for t in tuples),
    )
    bound = 3 * sum(defects, Fraction(0))
    if last.n + limit.n <= guard_limit("GH"):
        if gh(last, limit).value > bound:
            raise ConstructionFailed("limit is farther from the last space than the bound")
    return ChainLimit(limit, bound, tuple(nets), tuple(tuples))


def corollary_maps(Xn, Xn1, g: Sequence[int], eps) -> tuple[int, ...]:
    """From a GH map ``g: X_n -> X_{n+1}`` valid at ``eps`` build ``f: X_{n+1} -> X_n``
    shrinking distances by at most ``4 eps``.

    ``f`` snaps to the nearest point of ``g(X_n)`` and picks the lowest-index preimage.
    """
    Xn, Xn1 = _metric(Xn), _metric(Xn1)
    eps = to_rat(eps)
    if tight_gh_eps(Xn, Xn1, g) > eps:
        raise PreconditionFailed(f"map does not satisfy the GH clauses at {eps}")
    image = sorted(set(g))
    preimage = {}
    for x, y in enumerate(g):
        preimage.setdefault(y, x)
    f = tuple(preimage[min(image, key=lambda p: (Xn1.d(x, p), p))] for x in range(Xn1.n))
    for x in range(Xn1.n):
        for y in range(Xn1.n):
            if Xn1.d(x, y) - 4 * eps > Xn.d(f[x], f[y]):
                raise ConstructionFailed("corollary map shrinks a distance by more than 4 eps")
    return f
