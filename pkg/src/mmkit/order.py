"""The Lipschitz order, its eps-relaxation, and the constructive order lemmas."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product as cartesian
from typing import Sequence

from mmkit.core import (
    BoxWitness,
    ConstructionFailed,
    Coupling,
    EpsWitness,
    FiniteMetric,
    GHWitness,
    MapWitness,
    MMSpace,
    PreconditionFailed,
    common_denominator,
    enforce_guard,
    guard_limit,
    push_vector,
    to_rat,
)
from mmkit.flow import bits, max_weight_clique
from mmkit.metrics import box, box_upper_from_coupling, gh
from mmkit.transport import prohorov
from mmkit.verify import require_valid, tight_eps, tight_gh_eps, verify_witness

# subset-sum pruning is skipped above this common denominator
_SUBSET_SUM_SCALE = 10**6


# ---------------------------------------------------------------------------
# Kuratowski embedding


def sup_distance(u: Sequence[Fraction], v: Sequence[Fraction]) -> Fraction:
    return max((abs(a - b) for a, b in zip(u, v)), default=Fraction(0))


@dataclass(frozen=True)
class KuratowskiTable:
    """Row ``y`` is ``(d(y, y_1), ..., d(y, y_n))``; rows are isometric in the sup norm."""

    labels: tuple[str, ...]
    vectors: tuple[tuple[Fraction, ...], ...]

    def distance(self, i: int, j: int) -> Fraction:
        return sup_distance(self.vectors[i], self.vectors[j])


def kuratowski(K) -> KuratowskiTable:
    """Embed a finite (pseudo-)metric isometrically into sup-norm vectors."""
    K = K.metric if isinstance(K, MMSpace) else K
    table = KuratowskiTable(K.labels, K.dist)
    for i in range(K.n):
        for j in range(K.n):
            if table.distance(i, j) != K.d(i, j):
                raise ConstructionFailed(f"embedding is not isometric at {(K.labels[i], K.labels[j])}")
    return table


def _vector_space(vectors: Sequence[tuple], prefix: str = "z"):
    """Distinct vectors in first-occurrence order, their sup metric, and the index map."""
    image: dict[tuple, int] = {}
    for v in vectors:
        image.setdefault(v, len(image))
    points = list(image)
    metric = FiniteMetric(
        tuple(f"{prefix}{k}" for k in range(len(points))),
        tuple(tuple(sup_distance(u, v) for v in points) for u in points),
    )
    return metric, [image[v] for v in vectors], points


# ---------------------------------------------------------------------------
# exact domination


def _subset_sum_table(values: Sequence[int]) -> list[int]:
    """``table[k]`` has bit ``s`` set iff some subset of ``values[k:]`` sums to ``s``."""
    table = [1] * (len(values) + 1)
    for k in range(len(values) - 1, -1, -1):
        table[k] = table[k + 1] | (table[k + 1] << values[k])
    return table


def check_domination(
    X: MMSpace,
    Y: MMSpace,
    source_limit: int | None = None,
    target_limit: int | None = None,
) -> MapWitness | None:
    """Find a 1-Lipschitz ``f: X -> Y`` with ``f_* mu_X = mu_Y`` (certifying ``Y ≺ X``).

    Exhaustive backtracking: X-atoms by decreasing mass, Y-candidates by
    increasing index. ``None`` means no such map exists.
    """
    enforce_guard("DOM_SOURCE", X.n, source_limit)
    enforce_guard("DOM_TARGET", Y.n, target_limit)
    scale = common_denominator(X.mass + Y.mass)
    order = sorted(range(X.n), key=lambda i: (-X.mass[i], i))
    weights = [int(X.mass[i] * scale) for i in order]
    residual = [int(m * scale) for m in Y.mass]
    reach = _subset_sum_table(weights) if scale <= _SUBSET_SUM_SCALE else None
    f = [-1] * X.n

    def feasible(k: int) -> bool:
        if reach is None:
            return True
        return all(r == 0 or reach[k] >> r & 1 for r in residual)

    def extend(k: int) -> bool:
        if k == len(order):
            return not any(residual)
        i = order[k]
        w = weights[k]
        for j in range(Y.n):
            if residual[j] < w:
                continue
            if any(Y.d(j, f[a]) > X.d(i, a) for a in order[:k]):
                continue
            residual[j] -= w
            f[i] = j
            if feasible(k + 1) and extend(k + 1):
                return True
            residual[j] += w
            f[i] = -1
        return False

    if not extend(0):
        return None
    w = MapWitness(tuple(f))
    require_valid(verify_witness(X, Y, w), "domination witness")
    return w


def check_eps_domination(X: MMSpace, Y: MMSpace, eps, limit: int | None = None) -> EpsWitness | None:
    """Find ``(f, domain)`` certifying ``Y ≺_eps X``, or prove none exists.

    Maps are enumerated exhaustively. For a fixed map the best domain is a
    heaviest clique of the graph joining ``x, x'`` with
    ``d_Y(f x, f x') <= d_X(x, x') + eps``. Taking a maximum-weight clique
    loses nothing: every valid domain is a clique of this graph, hence is
    contained in a maximal clique, and enlarging the domain inside a clique
    keeps the Lipschitz clause while only increasing its mass.
    """
    eps = to_rat(eps)
    if eps < 0:
        raise PreconditionFailed("eps must be nonnegative")
    if eps == 0:
        w = check_domination(X, Y)
        return None if w is None else EpsWitness.exact(w)
    enforce_guard("EPS_MAPS", Y.n**X.n, limit)
    order = sorted(range(X.n), key=lambda i: (-X.mass[i], i))
    memo: dict[tuple, bool] = {}
    for choice in cartesian(range(Y.n), repeat=X.n):
        f = [0] * X.n
        for i, j in zip(order, choice):
            f[i] = j
        pushed = tuple(push_vector(X.mass, f, Y.n))
        ok = memo.get(pushed)
        if ok is None:
            ok = memo[pushed] = prohorov(Y.metric, pushed, Y.mass).value <= eps
        if not ok:
            continue
        adj = [0] * X.n
        for a in range(X.n):
            for b in range(X.n):
                if a != b and Y.d(f[a], f[b]) <= X.d(a, b) + eps:
                    adj[a] |= 1 << b
        weight, clique = max_weight_clique(adj, X.mass)
        if weight >= 1 - eps:
            w = EpsWitness(tuple(f), tuple(bits(clique)), eps)
            require_valid(verify_witness(X, Y, w), "eps-domination witness")
            return w
    return None


# ---------------------------------------------------------------------------
# box -> eps bridge


def eps_from_box(X: MMSpace, Y: MMSpace, bw: BoxWitness) -> EpsWitness:
    """Turn a box witness at ``eps`` into a witness for ``Y ≺_eps' X`` with ``eps' <= 3 eps``.

    Each X-atom goes to the Y-atom it shares the most kept coupling mass with.
    The recorded eps is the least value at which the witness verifies.
    """
    require_valid(verify_witness(X, Y, bw), "input box witness")
    pi = bw.coupling.pi
    f = [0] * X.n
    domain = []
    for i in range(X.n):
        row = [(pi[i][j], -j) for (a, j) in bw.kept if a == i]
        if row:
            f[i] = -max(row)[1]
            domain.append(i)
    tight = tight_eps(X, Y, f, domain)
    if tight > 3 * bw.eps:
        raise ConstructionFailed(f"box bridge gave eps {tight} above {3 * bw.eps}")
    w = EpsWitness(tuple(f), tuple(domain), tight)
    require_valid(verify_witness(X, Y, w), "eps witness from box")
    require_valid(verify_witness(X, Y, w.with_eps(3 * bw.eps)), "eps witness from box at the lemma bound")
    return w


# ---------------------------------------------------------------------------
# regularization


def _infimal_convolution(X, coords, domain):
    """``g_n(x) = min over x' in domain of [f_n(x') + d_X(x, x')]`` for every coordinate."""
    return [
        tuple(min(coords[a][c] + X.d(x, a) for a in domain) for c in range(len(coords[0])))
        for x in range(X.n)
    ]


def _check_convolution(coords, conv, domain, eps) -> None:
    for x in domain:
        for c, (a, b) in enumerate(zip(coords[x], conv[x])):
            if not 0 <= a - b <= eps:
                raise ConstructionFailed(f"convolution moved coordinate {c} of atom {x} by {a - b}")
    for x in domain:
        for y in domain:
            for c in range(len(coords[x])):
                gap = abs(abs(coords[x][c] - coords[y][c]) - abs(conv[x][c] - conv[y][c]))
                if gap > eps:
                    raise ConstructionFailed(f"coordinate gap {gap} exceeds {eps}")


def _glued_coupling(X, Y, Z, f, g, domain, eps):
    """Coupling of mu_Y and mu_Z through X plus the pairs kept by the regularization bound."""
    pushed = push_vector(X.mass, f, Y.n)
    rho = prohorov(Y.metric, Y.mass, pushed).witness.pi
    pi = [[Fraction(0)] * Z.n for _ in range(Y.n)]
    kept = set()
    dom = set(domain)
    for y in range(Y.n):
        for x in range(X.n):
            share = rho[y][f[x]] * X.mass[x] / pushed[f[x]]
            if share:
                pi[y][g[x]] += share
                if x in dom and Y.d(y, f[x]) <= eps:
                    kept.add((y, g[x]))
    return Coupling(pi, Y.mass, Z.mass), kept


def regularize(X: MMSpace, Y: MMSpace, w: EpsWitness, limit: int | None = None) -> tuple[MMSpace, MapWitness]:
    """Build ``Z`` with ``Z ≺ X`` exactly and ``box(Y, Z) <= 3 eps`` from ``Y ≺_eps X``.

    Coordinates of the Kuratowski image of ``f`` are replaced by their
    infimal convolutions with ``d_X`` over the domain; ``Z`` is the pushed
    measure on the resulting sup-norm vectors.
    """
    require_valid(verify_witness(X, Y, w), "input eps witness")
    eps, f = w.eps, w.f
    domain = list(w.domain) or list(range(X.n))
    table = kuratowski(Y.metric)
    coords = [table.vectors[f[x]] for x in range(X.n)]
    conv = _infimal_convolution(X, coords, domain)
    if w.domain:
        _check_convolution(coords, conv, domain, eps)
    metric, g, points = _vector_space(conv)
    mass = push_vector(X.mass, g, metric.n)
    Z = MMSpace(metric, tuple(mass))
    zw = MapWitness(tuple(g))
    require_valid(verify_witness(X, Z, zw), "regularized domination")

    if Y.n * Z.n <= guard_limit("BOX_NODES", limit):
        value = box(Y, Z).value
    else:
        pi, kept = _glued_coupling(X, Y, Z, f, g, w.domain, eps)
        if len(pi.support()) <= guard_limit("BOX_UPPER_NODES"):
            value = box_upper_from_coupling(Y, Z, pi).value
        else:
            bw = BoxWitness(pi, kept, 3 * eps)
            require_valid(verify_witness(Y, Z, bw), "regularization box bound")
            value = bw.eps
    if value > 3 * eps:
        raise ConstructionFailed(f"box(Y, Z) = {value} exceeds {3 * eps}")
    return Z, zw


def regularize_gh(K, L, f: Sequence[int], eps, limit: int | None = None) -> tuple[FiniteMetric, MapWitness]:
    """Metric version: from GH ``L ≺_eps K`` build ``Z`` with a 1-Lipschitz surjection ``K -> Z``
    and ``d_GH(L, Z) <= 2 eps``."""
    K = K.metric if isinstance(K, MMSpace) else K
    L = L.metric if isinstance(L, MMSpace) else L
    eps = to_rat(eps)
    f = tuple(int(v) for v in f)
    if len(f) != K.n or any(not 0 <= v < L.n for v in f):
        raise PreconditionFailed("map does not send the source into the target")
    if tight_gh_eps(K, L, f) > eps:
        raise PreconditionFailed(f"map does not satisfy the GH clauses at {eps}")
    table = kuratowski(L)
    coords = [table.vectors[f[x]] for x in range(K.n)]
    everything = list(range(K.n))
    conv = _infimal_convolution(K, coords, everything)
    _check_convolution(coords, conv, everything, eps)
    Z, g, points = _vector_space(conv)
    require_valid(verify_witness(K, Z, GHWitness(g)), "regularized surjection")

    if L.n + Z.n <= guard_limit("GH", limit):
        value = gh(L, Z).value
    else:
        # Hausdorff distance between the embedded copies bounds d_GH
        value = max(
            max(min(sup_distance(u, v) for v in points) for u in table.vectors),
            max(min(sup_distance(u, v) for u in table.vectors) for v in points),
        )
    if value > 2 * eps:
        raise ConstructionFailed(f"GH bound {value} exceeds {2 * eps}")
    return Z, MapWitness(tuple(g))


# ---------------------------------------------------------------------------
# composition


def _nearest(Y, y: int, targets: Sequence[int]) -> int:
    return min(targets, key=lambda t: (Y.d(y, t), t))


def compose_eps(X: MMSpace, Y: MMSpace, Z: MMSpace, wYX: EpsWitness, wZY: EpsWitness) -> EpsWitness:
    """From ``Y ≺_eps X`` (map X -> Y) and ``Z ≺_delta Y`` (map Y -> Z) build ``Z ≺ X``
    at ``3 eps + 4 delta`` or better.

    ``h = g ∘ π ∘ f`` with ``π`` the nearest-point map onto the domain of ``g``.
    """
    require_valid(verify_witness(X, Y, wYX), "first step")
    require_valid(verify_witness(Y, Z, wZY), "second step")
    eps, delta = wYX.eps, wZY.eps
    f, g = wYX.f, wZY.f
    targets = wZY.domain
    if targets:
        proj = [_nearest(Y, y, targets) for y in range(Y.n)]
    else:
        proj = list(range(Y.n))
    h = tuple(g[proj[f[x]]] for x in range(X.n))
    domain = [x for x in wYX.domain if targets and Y.d(f[x], proj[f[x]]) <= eps]
    tight = tight_eps(X, Z, h, domain)
    bound = 3 * eps + 4 * delta
    if tight > bound:
        raise ConstructionFailed(f"composed eps {tight} exceeds {bound}")
    w = EpsWitness(h, domain, tight)
    require_valid(verify_witness(X, Z, w), "composed witness")
    return w


@dataclass(frozen=True)
class ChainCertificate:
    """``steps[i]`` maps ``spaces[i+1] -> spaces[i]``; ``composed`` maps the last space to the first."""

    spaces: tuple[MMSpace, ...]
    steps: tuple[EpsWitness, ...]
    composed: EpsWitness
    bound: Fraction


def chain_compress(spaces: Sequence[MMSpace], steps: Sequence[EpsWitness]) -> ChainCertificate:
    """Compress ``X_1 ≺_e1 X_2 ≺_e2 ... X_N`` into one witness for ``X_1 ≺ X_N`` at ``5 Σ e_i`` or better.

    Every space is embedded by its own Kuratowski table; each step becomes a
    1-Lipschitz map between coordinate spaces by infimal convolution, and the
    composite is snapped to the nearest point of the first space.
    """
    spaces = tuple(spaces)
    steps = tuple(steps)
    if len(steps) != len(spaces) - 1:
        raise PreconditionFailed(f"{len(spaces)} spaces need {len(spaces) - 1} steps, got {len(steps)}")
    for k, w in enumerate(steps):
        if not verify_witness(spaces[k + 1], spaces[k], w).valid:
            raise PreconditionFailed(f"step {k} does not verify")
    first = spaces[0]
    total = sum((w.eps for w in steps), Fraction(0))
    bound = 5 * total
    if not steps:
        w = EpsWitness(tuple(range(first.n)), tuple(range(first.n)), 0)
        require_valid(verify_witness(first, first, w), "trivial chain")
        return ChainCertificate(spaces, steps, w, bound)

    tables = [kuratowski(S.metric).vectors for S in spaces]
    # current vectors of the last space's atoms, moved down one coordinate system per step
    current = list(tables[-1])
    for k in range(len(steps) - 1, -1, -1):
        w, src, dst = steps[k], k + 1, k
        domain = w.domain or tuple(range(spaces[src].n))
        coords = [tables[dst][w.f[a]] for a in domain]
        sources = [tables[src][a] for a in domain]
        current = [
            tuple(
                min(coords[t][c] + sup_distance(z, sources[t]) for t in range(len(domain)))
                for c in range(spaces[dst].n)
            )
            for z in current
        ]
    nearest = []
    gaps = []
    for z in current:
        dist = [sup_distance(z, tables[0][y]) for y in range(first.n)]
        y = min(range(first.n), key=lambda j: (dist[j], j))
        nearest.append(y)
        gaps.append(dist[y])
    last = spaces[-1]
    domain = [x for x in range(last.n) if gaps[x] <= 2 * total]
    tight = tight_eps(last, first, nearest, domain)
    if tight > bound:
        raise ConstructionFailed(f"compressed eps {tight} exceeds {bound}")
    composed = EpsWitness(tuple(nearest), domain, tight)
    require_valid(verify_witness(last, first, composed), "compressed chain witness")
    return ChainCertificate(spaces, steps, composed, bound)
