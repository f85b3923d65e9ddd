"""Integer max-flow, bipartite transport and deterministic clique enumeration."""

from __future__ import annotations

from collections import deque
from fractions import Fraction
from typing import Iterator, Sequence

from mmkit.core import Coupling, common_denominator


class MaxFlow:
    """Dinic's algorithm on integer capacities."""

    def __init__(self, n: int):
        self.n = n
        self.graph: list[list[int]] = [[] for _ in range(n)]
        # edge arrays: head, capacity; edge e and e ^ 1 are a residual pair
        self.to: list[int] = []
        self.cap: list[int] = []

    def add_edge(self, u: int, v: int, c: int) -> int:
        if c < 0:
            raise ValueError("negative capacity")
        e = len(self.to)
        self.to += [v, u]
        self.cap += [c, 0]
        self.graph[u].append(e)
        self.graph[v].append(e + 1)
        return e

    def _bfs(self, s: int, t: int) -> list[int] | None:
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for e in self.graph[u]:
                if self.cap[e] > 0 and level[self.to[e]] < 0:
                    level[self.to[e]] = level[u] + 1
                    q.append(self.to[e])
        return level if level[t] >= 0 else None

    def _dfs(self, u: int, t: int, pushed: int, level, it) -> int:
        if u == t:
            return pushed
        adj = self.graph[u]
        while it[u] < len(adj):
            e = adj[it[u]]
            v = self.to[e]
            if self.cap[e] > 0 and level[v] == level[u] + 1:
                got = self._dfs(v, t, min(pushed, self.cap[e]), level, it)
                if got:
                    self.cap[e] -= got
                    self.cap[e ^ 1] += got
                    return got
            it[u] += 1
        return 0

    def run(self, s: int, t: int) -> int:
        total = 0
        while True:
            level = self._bfs(s, t)
            if level is None:
                return total
            it = [0] * self.n
            while True:
                got = self._dfs(s, t, 1 << 62, level, it)
                if not got:
                    break
                total += got

    def flow_on(self, e: int) -> int:
        return self.cap[e ^ 1]


def max_transport_int(supply: Sequence[int], demand: Sequence[int], edges: Sequence[tuple[int, int]]):
    """Maximum flow from ``supply`` to ``demand`` over bipartite ``edges``.

    Returns the value and a dict ``{(i, j): flow}`` with positive flows only.
    """
    m, n = len(supply), len(demand)
    s, t = m + n, m + n + 1
    mf = MaxFlow(m + n + 2)
    for i, c in enumerate(supply):
        if c:
            mf.add_edge(s, i, c)
    for j, c in enumerate(demand):
        if c:
            mf.add_edge(m + j, t, c)
    ids = [(i, j, mf.add_edge(i, m + j, min(supply[i], demand[j]))) for i, j in edges]
    value = mf.run(s, t)
    flows = {}
    for i, j, e in ids:
        fl = mf.flow_on(e)
        if fl:
            flows[(i, j)] = flows.get((i, j), 0) + fl
    return value, flows


def _complete(partial: list[list[int]], supply: Sequence[int], demand: Sequence[int]) -> list[list[int]]:
    """Extend a sub-coupling to full marginals (northwest corner on the residuals)."""
    rs = [supply[i] - sum(partial[i]) for i in range(len(supply))]
    rd = [demand[j] - sum(partial[i][j] for i in range(len(supply))) for j in range(len(demand))]
    i = j = 0
    while i < len(rs) and j < len(rd):
        if rs[i] == 0:
            i += 1
            continue
        if rd[j] == 0:
            j += 1
            continue
        q = min(rs[i], rd[j])
        partial[i][j] += q
        rs[i] -= q
        rd[j] -= q
    return partial


def max_coupling_on(mu: Sequence[Fraction], nu: Sequence[Fraction], edges: Sequence[tuple[int, int]]):
    """Largest mass a coupling of ``mu`` and ``nu`` can put on ``edges``, with such a coupling.

    Capacities are scaled to integers by the lcm of all denominators, so the
    result is exact.
    """
    scale = common_denominator(list(mu) + list(nu))
    supply = [int(m * scale) for m in mu]
    demand = [int(m * scale) for m in nu]
    value, flows = max_transport_int(supply, demand, edges)
    partial = [[0] * len(nu) for _ in mu]
    for (i, j), v in flows.items():
        partial[i][j] += v
    full = _complete(partial, supply, demand)
    pi = tuple(tuple(Fraction(v, scale) for v in row) for row in full)
    return Fraction(value, scale), Coupling(pi, tuple(mu), tuple(nu))


def max_coupling_mass(mu, nu, edges) -> Fraction:
    scale = common_denominator(list(mu) + list(nu))
    value, _ = max_transport_int([int(m * scale) for m in mu], [int(m * scale) for m in nu], edges)
    return Fraction(value, scale)


# ---------------------------------------------------------------------------
# cliques


def bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def maximal_cliques(adj: Sequence[int], candidates: int | None = None) -> Iterator[int]:
    """Bron-Kerbosch with pivoting; yields maximal cliques as bitmasks.

    ``adj[v]`` is the neighbour bitmask of ``v`` (no self loops). The pivot is
    the lowest-index vertex of P ∪ X and branches are taken in increasing
    index order, so the output order is deterministic.
    """
    n = len(adj)
    P0 = (1 << n) - 1 if candidates is None else candidates
    if P0 == 0:
        return
    stack = [(0, P0, 0)]
    while stack:
        R, P, X = stack.pop()
        if P == 0:
            if X == 0:
                yield R
            continue
        px = P | X
        u = (px & -px).bit_length() - 1
        branch = []
        for v in bits(P & ~adj[u]):
            vb = 1 << v
            branch.append((R | vb, P & adj[v], X & adj[v]))
            P &= ~vb
            X |= vb
        # LIFO: push in reverse to visit in increasing order
        stack.extend(reversed(branch))


def max_weight_clique(adj: Sequence[int], weight: Sequence[Fraction], candidates: int | None = None):
    """Heaviest clique (ties: first found in enumeration order). Returns (weight, mask)."""
    best_w, best = Fraction(-1), 0
    for c in maximal_cliques(adj, candidates):
        w = sum((weight[v] for v in bits(c)), Fraction(0))
        if w > best_w:
            best_w, best = w, c
    return max(best_w, Fraction(0)), best
