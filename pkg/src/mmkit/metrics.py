"""Box and Gromov-Hausdorff distances, each with an independent exhaustive oracle.

The box distance is computed in its coupling form: the least ``eps`` such
that some coupling ``pi`` of the two measures and some set ``S`` of pairs
satisfy ``pi(S) >= 1 - eps`` and ``|d_X(i,k) - d_Y(j,l)| <= eps`` on ``S x S``.
On finite spaces this has the same infimum as the interval-parameter
definition (parameters push Lebesgue measure to a coupling, and any coupling
is realized by parameters).
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

from mmkit.core import (
    BoxWitness,
    Coupling,
    CorrWitness,
    DenominatorMismatch,
    DimensionMismatch,
    GHWitness,
    MMSpace,
    enforce_guard,
    guard_limit,
)
from mmkit.flow import bits, max_coupling_on, max_weight_clique, maximal_cliques
from mmkit.transport import DistanceResult, prohorov, prohorov_oracle
from mmkit.verify import require_valid, verify_witness

__all__ = [
    "DistanceResult",
    "box",
    "box_oracle",
    "box_upper_from_coupling",
    "gh",
    "gh_eps_check",
    "prohorov",
    "prohorov_oracle",
]


def _pair_distortions(X, Y):
    n, m = X.n, Y.n
    N = n * m
    dis = [[Fraction(0)] * N for _ in range(N)]
    for p in range(N):
        i, j = divmod(p, m)
        for q in range(p + 1, N):
            k, l = divmod(q, m)
            dis[p][q] = dis[q][p] = abs(X.d(i, k) - Y.d(j, l))
    return dis


def _adjacency(dis, t, nodes=None) -> list[int]:
    N = len(dis)
    allowed = range(N) if nodes is None else nodes
    adj = [0] * N
    for p in allowed:
        row = dis[p]
        mask = 0
        for q in allowed:
            if q != p and row[q] <= t:
                mask |= 1 << q
        adj[p] = mask
    return adj


def box(X: MMSpace, Y: MMSpace, limit: int | None = None) -> DistanceResult:
    """Exact box distance with an optimal :class:`BoxWitness`.

    For each candidate threshold ``t`` (0 and every pair distortion) the
    compatibility graph on X×Y joins pairs whose distortion is ``<= t``;
    each maximal clique is scored by the largest coupling mass it can carry
    (exact max-flow), ``m(t)`` is the best score, and the answer is
    ``min_t max(t, 1 - m(t))``.
    """
    n, m = X.n, Y.n
    enforce_guard("BOX_NODES", n * m, limit)
    dis = _pair_distortions(X, Y)
    thresholds = sorted({Fraction(0)} | {v for row in dis for v in row})
    best = None
    examined = 0
    for t in thresholds:
        if best is not None and t >= best[0]:
            break
        adj = _adjacency(dis, t)
        top_mass, top = Fraction(-1), None
        for clique in maximal_cliques(adj):
            examined += 1
            pairs = [divmod(p, m) for p in bits(clique)]
            rows = {i for i, _ in pairs}
            cols = {j for _, j in pairs}
            bound = min(sum(X.mass[i] for i in rows), sum(Y.mass[j] for j in cols))
            if bound <= top_mass:
                continue
            mass, pi = max_coupling_on(X.mass, Y.mass, pairs)
            if mass > top_mass:
                top_mass, top = mass, (pi, pairs)
        value = max(t, 1 - top_mass)
        if best is None or value < best[0]:
            best = (value, top[0], top[1])
    value, pi, pairs = best
    kept = [(i, j) for i, j in pairs if pi.pi[i][j] > 0]
    w = BoxWitness(pi, kept, value)
    require_valid(verify_witness(X, Y, w), "box witness")
    return DistanceResult(value, w, examined)


def _integer_couplings(rows, cols):
    """All nonnegative integer matrices with the given row and column sums."""
    m = len(cols)
    mat = [[0] * m for _ in rows]
    left = list(cols)

    def fill_row(i, j, remaining):
        if j == m - 1:
            if remaining > left[j]:
                return
            mat[i][j] = remaining
            left[j] -= remaining
            yield from next_row(i + 1)
            left[j] += remaining
            mat[i][j] = 0
            return
        for v in range(min(remaining, left[j]), -1, -1):
            mat[i][j] = v
            left[j] -= v
            yield from fill_row(i, j + 1, remaining - v)
            left[j] += v
        mat[i][j] = 0

    def next_row(i):
        if i == len(rows):
            if not any(left):
                yield [row[:] for row in mat]
            return
        yield from fill_row(i, 0, rows[i])

    yield from next_row(0)


def box_oracle(X: MMSpace, Y: MMSpace, D: int, limit: int | None = None) -> Fraction:
    """Box distance by exhaustive search over atom-aligned parameters.

    Both spaces are blown up to ``D`` uniform atoms. A bijection of the atoms
    matters only through the integer matrix ``N[i][j]`` counting atoms of
    ``x_i`` matched with atoms of ``y_j``, and for a fixed bijection the best
    kept atom set is a union of whole classes ``(i, j)``. So we enumerate all
    integer matrices with margins ``D*mu_X`` and ``D*mu_Y`` and all class
    subsets ``S``, minimizing ``max(distortion(S), 1 - N(S)/D)``.
    """
    enforce_guard("BOX_ORACLE_D", D, limit)
    rows, cols = [], []
    for vec, out in ((X.mass, rows), (Y.mass, cols)):
        for v in vec:
            scaled = v * D
            if scaled.denominator != 1:
                raise DenominatorMismatch(f"mass {v} does not have denominator dividing {D}")
            out.append(int(scaled))
    best = Fraction(1)
    for N in _integer_couplings(rows, cols):
        support = [(i, j, N[i][j]) for i in range(X.n) for j in range(Y.n) if N[i][j]]
        total = len(support)
        suffix = [0] * (total + 1)
        for k in range(total - 1, -1, -1):
            suffix[k] = suffix[k + 1] + support[k][2]

        def search(k, chosen, dist, count):
            nonlocal best
            if dist >= best or 1 - Fraction(count + suffix[k], D) >= best:
                return
            if k == total:
                best = min(best, max(dist, 1 - Fraction(count, D)))
                return
            i, j, c = support[k]
            worst = dist
            for a, b in chosen:
                worst = max(worst, abs(X.d(i, a) - Y.d(j, b)))
            chosen.append((i, j))
            search(k + 1, chosen, worst, count + c)
            chosen.pop()
            search(k + 1, chosen, dist, count)

        search(0, [], Fraction(0), 0)
    return best


def box_upper_from_coupling(X: MMSpace, Y: MMSpace, pi: Coupling, limit: int | None = None) -> DistanceResult:
    """Upper bound on the box distance using the fixed coupling ``pi``.

    Chooses the kept set inside ``supp pi``. Within the BOX_UPPER_NODES guard
    this is exact for the given coupling (maximum-weight cliques per
    threshold); beyond it a greedy clique is improved by one-swap local
    search.
    """
    if tuple(pi.mu) != X.mass or tuple(pi.nu) != Y.mass:
        raise DimensionMismatch("coupling marginals do not match the spaces")
    supp = pi.support()
    S = len(supp)
    dis = [[abs(X.d(i, k) - Y.d(j, l)) for (k, l) in supp] for (i, j) in supp]
    weight = [pi.pi[i][j] for i, j in supp]
    thresholds = sorted({Fraction(0)} | {v for row in dis for v in row})
    exact = S <= guard_limit("BOX_UPPER_NODES", limit)
    best = None
    examined = 0
    for t in thresholds:
        if best is not None and t >= best[0]:
            break
        examined += 1
        adj = _adjacency(dis, t)
        if exact:
            w, clique = max_weight_clique(adj, weight)
            members = list(bits(clique))
        else:
            members = _greedy_clique(adj, weight)
            w = sum((weight[p] for p in members), Fraction(0))
        value = max(t, 1 - w)
        if best is None or value < best[0]:
            best = (value, members)
    value, members = best
    wit = BoxWitness(pi, [supp[p] for p in members], value)
    require_valid(verify_witness(X, Y, wit), "box upper-bound witness")
    return DistanceResult(value, wit, examined)


def _greedy_clique(adj, weight) -> list[int]:
    order = sorted(range(len(weight)), key=lambda p: (-weight[p], p))
    chosen: list[int] = []
    for p in order:
        if all(adj[p] >> q & 1 for q in chosen):
            chosen.append(p)
    improved = True
    while improved:
        improved = False
        current = sum(weight[p] for p in chosen)
        for p in order:
            if p in chosen:
                continue
            keep = [q for q in chosen if adj[p] >> q & 1]
            cand = keep + [p]
            if sum(weight[q] for q in cand) > current:
                chosen = sorted(cand)
                improved = True
                break
    return chosen


# ---------------------------------------------------------------------------
# Gromov-Hausdorff


def _metric(S):
    return S.metric if isinstance(S, MMSpace) else S


def _gh_feasible(K, L, compat, stats):
    """Search a correspondence whose pairs are pairwise compatible.

    Repeatedly pick the uncovered point with the fewest compatible pairs and
    branch on them; a pair covers both of its points.
    """
    n, m = K.n, L.n
    row_mask = [sum(1 << (i * m + j) for j in range(m)) for i in range(n)]
    col_mask = [sum(1 << (i * m + j) for i in range(n)) for j in range(m)]

    def rec(allowed, chosen, cov_k, cov_l):
        stats[0] += 1
        if cov_k == (1 << n) - 1 and cov_l == (1 << m) - 1:
            return chosen
        pick = None
        for i in range(n):
            if not cov_k >> i & 1:
                opts = allowed & row_mask[i]
                if pick is None or opts.bit_count() < pick.bit_count():
                    pick = opts
        for j in range(m):
            if not cov_l >> j & 1:
                opts = allowed & col_mask[j]
                if pick is None or opts.bit_count() < pick.bit_count():
                    pick = opts
        for p in bits(pick):
            i, j = divmod(p, m)
            found = rec(allowed & compat[p], chosen + [(i, j)], cov_k | 1 << i, cov_l | 1 << j)
            if found is not None:
                return found
        return None

    return rec((1 << (n * m)) - 1, [], 0, 0)


def gh(K, L, limit: int | None = None) -> DistanceResult:
    """Gromov-Hausdorff distance: half the least distortion of a correspondence.

    Feasibility at a threshold is decided by branch and bound over pair
    inclusion; the sorted finite candidate set is bisected.
    """
    K, L = _metric(K), _metric(L)
    enforce_guard("GH", K.n + L.n, limit)
    dis = _pair_distortions(K, L)
    N = K.n * L.n
    thresholds = sorted({Fraction(0)} | {v for row in dis for v in row})
    stats = [0]

    def feasible(t):
        compat = [0] * N
        for p in range(N):
            compat[p] = sum(1 << q for q in range(N) if dis[p][q] <= t)
        return _gh_feasible(K, L, compat, stats)

    lo, hi = 0, len(thresholds) - 1
    found = feasible(thresholds[hi])
    while lo < hi:
        mid = (lo + hi) // 2
        r = feasible(thresholds[mid])
        if r is not None:
            hi, found = mid, r
        else:
            lo = mid + 1
    distortion = max(
        (abs(K.d(i, k) - L.d(j, l)) for i, j in found for k, l in found), default=Fraction(0)
    )
    w = CorrWitness(found, distortion)
    require_valid(verify_witness(K, L, w), "correspondence witness")
    return DistanceResult(distortion / 2, w, stats[0])


def gh_eps_check(K, L, eps, limit: int | None = None) -> GHWitness | None:
    """Find ``f: K -> L`` with ``d_L(f x, f x') <= d_K(x, x') + eps`` and an eps-dense image.

    Exhaustive backtracking; ``None`` means no such map exists.
    """
    K, L = _metric(K), _metric(L)
    eps = Fraction(eps)
    enforce_guard("GH_EPS", K.n + L.n, limit)
    n, m = K.n, L.n
    near = [sum(1 << y for y in range(m) if L.d(y, p) <= eps) for p in range(m)]
    f = [0] * n
    full = (1 << m) - 1

    def rec(k, covered):
        if k == n:
            return covered == full
        for p in range(m):
            if all(L.d(p, f[a]) <= K.d(k, a) + eps for a in range(k)):
                f[k] = p
                if rec(k + 1, covered | near[p]):
                    return True
        return False

    if not rec(0, 0):
        return None
    w = GHWitness(tuple(f), eps)
    require_valid(verify_witness(K, L, w), "GH eps witness")
    return w
