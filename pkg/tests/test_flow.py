import random
from fractions import Fraction as F

import networkx as nx
import pytest

from mmkit.flow import MaxFlow, bits, max_coupling_on, max_transport_int, max_weight_clique, maximal_cliques


def test_dinic_against_networkx():
    rng = random.Random(3)
    for _ in range(80):
        n = rng.randint(2, 9)
        mf = MaxFlow(n)
        G = nx.DiGraph()
        G.add_nodes_from(range(n))
        for _ in range(rng.randint(0, 3 * n)):
            u, v = rng.sample(range(n), 2)
            c = rng.randint(0, 9)
            mf.add_edge(u, v, c)
            if G.has_edge(u, v):
                G[u][v]["capacity"] += c
            else:
                G.add_edge(u, v, capacity=c)
        assert mf.run(0, n - 1) == nx.maximum_flow_value(G, 0, n - 1)


def test_negative_capacity_rejected():
    with pytest.raises(ValueError):
        MaxFlow(2).add_edge(0, 1, -1)


def test_transport_flows_respect_margins():
    value, flows = max_transport_int([3, 1], [2, 2], [(0, 0), (0, 1), (1, 1)])
    assert value == 4
    assert sum(v for (i, _), v in flows.items() if i == 0) <= 3
    assert sum(v for (_, j), v in flows.items() if j == 1) <= 2


def test_max_coupling_on_is_a_full_coupling():
    mu = (F(1, 2), F(1, 3), F(1, 6))
    nu = (F(1, 4), F(3, 4))
    mass, pi = max_coupling_on(mu, nu, [(0, 0), (2, 1)])
    assert mass == F(1, 4) + F(1, 6)
    assert pi.mass_on([(0, 0), (2, 1)]) == mass


def _adj_from_graph(G, n):
    return [sum(1 << v for v in G[u]) for u in range(n)]


def test_cliques_against_networkx():
    rng = random.Random(5)
    for _ in range(80):
        n = rng.randint(1, 10)
        G = nx.gnp_random_graph(n, rng.random(), seed=rng.randint(0, 10**6))
        ours = {frozenset(bits(c)) for c in maximal_cliques(_adj_from_graph(G, n))}
        theirs = {frozenset(c) for c in nx.find_cliques(G)}
        assert ours == theirs


def test_clique_order_is_deterministic():
    G = nx.cycle_graph(6)
    adj = _adj_from_graph(G, 6)
    assert list(maximal_cliques(adj)) == list(maximal_cliques(adj))


def test_max_weight_clique_against_networkx():
    rng = random.Random(8)
    for _ in range(60):
        n = rng.randint(1, 9)
        G = nx.gnp_random_graph(n, 0.5, seed=rng.randint(0, 10**6))
        weight = [rng.randint(1, 9) for _ in range(n)]
        for v in G:
            G.nodes[v]["w"] = weight[v]
        w, mask = max_weight_clique(_adj_from_graph(G, n), [F(x) for x in weight])
        _, expected = nx.max_weight_clique(G, weight="w")
        assert w == expected
        members = list(bits(mask))
        assert all(G.has_edge(a, b) for a in members for b in members if a < b)


def test_restricted_candidates():
    adj = _adj_from_graph(nx.complete_graph(4), 4)
    assert list(maximal_cliques(adj, 0b0101)) == [0b0101]
    assert list(maximal_cliques(adj, 0)) == []
