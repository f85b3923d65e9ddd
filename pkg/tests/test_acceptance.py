"""Acceptance criteria 1-14, one test each.

Each test records its outcome in ``conftest.ACCEPTANCE``; the terminal
summary prints one PASS/FAIL line per criterion.
"""

import json
import os
import random
import subprocess
import sys
import time
from contextlib import contextmanager
from fractions import Fraction as F

import pytest

from conftest import ACCEPTANCE, DATA
from gen import assert_metric_axioms, perturb, quotient_of, random_mass, random_metric, random_space
from mmkit.construct import (
    UniversalSpaceSpec,
    digit_table,
    glue_chain,
    product,
    quotient_dominator,
    universal_dominate,
    universal_space,
)
from mmkit.core import GHWitness, MapWitness, MMSpace, mm_isomorphic, validate_space
from mmkit.metrics import box, box_oracle, gh, gh_eps_check, prohorov, prohorov_oracle
from mmkit.order import chain_compress, check_domination, compose_eps, eps_from_box, regularize, regularize_gh
from mmkit.pipeline import PipelineConfig, common_dominator
from mmkit.verify import verify_witness

# every space built by a constructor in this module, by kind
CONSTRUCTED: dict[str, list] = {}


def keep(kind, S):
    CONSTRUCTED.setdefault(kind, []).append(S)


@contextmanager
def criterion(k, text):
    ACCEPTANCE[k] = (False, text)
    start = time.perf_counter()
    yield
    ACCEPTANCE[k] = (True, f"{text} [{time.perf_counter() - start:.2f}s]")
    print(f"criterion {k}: PASS {text}")


def random_box_instance(rng):
    """Two spaces with at most 4 atoms and masses over 8."""
    return (
        random_space(rng, rng.randint(1, 4), denom=8),
        random_space(rng, rng.randint(1, 4), denom=8),
    )


def box_instances():
    rng = random.Random(1003)
    return [random_box_instance(rng) for _ in range(100)]


def test_criterion_01_fixture_orders():
    with criterion(1, "fixture: Z, W below X and Y via `order check`"):
        expected = {("X", "Z"): {"a": "a", "b": "b", "c": "b"}, ("X", "W"): {"a": "a", "b": "a", "c": "c"}}
        for src in ("X", "Y"):
            for dst in ("Z", "W"):
                start = time.perf_counter()
                p = subprocess.run(
                    [sys.executable, "-m", "mmkit", "order", "check", str(DATA / f"fixture_{src}.json"), str(DATA / f"fixture_{dst}.json")],
                    capture_output=True,
                    text=True,
                    env=dict(os.environ),
                )
                elapsed = time.perf_counter() - start
                assert p.returncode == 0, p.stderr
                doc = json.loads(p.stdout)
                assert doc["valid"]
                if (src, dst) in expected:
                    assert doc["payload"]["witness"]["map"] == expected[(src, dst)]
                assert elapsed < 1, f"{src} -> {dst} took {elapsed:.2f}s"


def test_criterion_02_prohorov_oracle():
    with criterion(2, "prohorov equals the subset oracle on 200 instances"):
        rng = random.Random(1002)
        start = time.perf_counter()
        for _ in range(200):
            n = rng.randint(1, 6)
            M = random_metric(rng, n, top=3, denom=rng.choice((1, 2, 3)))
            denom = rng.choice((4, 6, 8, 12))
            mu = random_mass(rng, n, denom, positive=False)
            nu = random_mass(rng, n, denom, positive=False)
            assert prohorov(M, mu, nu).value == prohorov_oracle(M, mu, nu)
        assert time.perf_counter() - start < 60


def test_criterion_03_box_oracle():
    with criterion(3, "box equals the atomized oracle on 100 instances"):
        start = time.perf_counter()
        for X, Y in box_instances():
            assert box(X, Y).value == box_oracle(X, Y, 8)
        assert time.perf_counter() - start < 120


def test_criterion_04_box_vs_prohorov():
    with criterion(4, "box of two measures on one metric is at most twice their Prohorov distance"):
        rng = random.Random(1004)
        for _ in range(200):
            n = rng.randint(1, 5)
            M = random_metric(rng, n)
            mu = random_mass(rng, n, positive=False)
            nu = random_mass(rng, n, positive=False)
            X, Y = validate_space(M.dist, mu), validate_space(M.dist, nu)
            assert box(X, Y).value <= 2 * prohorov(M, mu, nu).value


def test_criterion_05_eps_from_box():
    with criterion(5, "box witnesses give eps-dominations at three times the box value"):
        for X, Y in box_instances():
            r = box(X, Y)
            w = eps_from_box(X, Y, r.witness)
            assert verify_witness(X, Y, w.with_eps(3 * r.value)).valid


def test_criterion_06_regularize():
    with criterion(6, "regularization: exact domination plus box and GH bounds"):
        rng = random.Random(1006)
        done = 0
        while done < 50:
            X = random_space(rng, rng.randint(1, 5))
            Y = perturb(rng, random_space(rng, rng.randint(1, 3))) if rng.random() < 0.3 else perturb(rng, X)
            w = eps_from_box(X, Y, box(X, Y).witness)
            assert verify_witness(X, Y, w).valid
            Z, zw = regularize(X, Y, w)
            assert verify_witness(X, Z, zw).valid
            assert box(Y, Z).value <= 3 * w.eps
            keep("regularize", Z)
            done += 1

        done = 0
        while done < 50:
            K, L = random_metric(rng, rng.randint(1, 4)), random_metric(rng, rng.randint(1, 4))
            for eps in sorted({F(0)} | {abs(a - b) for a in K.distance_values() for b in L.distance_values()} | {L.diam}):
                g = gh_eps_check(K, L, eps)
                if g is not None:
                    break
            Z, zw = regularize_gh(K, L, g.f, eps)
            assert verify_witness(K, Z, GHWitness(zw.f)).valid
            assert set(zw.f) == set(range(Z.n))
            assert gh(L, Z).value <= 2 * eps
            keep("regularize", Z)
            done += 1


def test_criterion_07_quotient_dominator():
    with criterion(7, "quotient dominator witnesses verify and the construction is idempotent"):
        rng = random.Random(1007)
        for _ in range(50):
            W = random_space(rng, rng.randint(1, 6))
            Y, fy = quotient_of(rng, W, rng.randint(1, W.n))
            Z, fz = quotient_of(rng, W, rng.randint(1, W.n))
            X, gY, gZ, proj = quotient_dominator(W, Y, Z, MapWitness(fy), MapWitness(fz))
            assert verify_witness(X, Y, gY).valid
            assert verify_witness(X, Z, gZ).valid
            assert verify_witness(W, X, proj).valid
            X2, *_ = quotient_dominator(X, Y, Z, gY, gZ)
            assert mm_isomorphic(X, X2)
            keep("quotient", X)


def test_criterion_08_composition():
    with criterion(8, "compose_eps within 3e+4d and chain_compress within 5 sum e"):
        rng = random.Random(1008)
        for _ in range(50):
            length = rng.randint(2, 4)
            spaces = [random_space(rng, rng.randint(1, 4))]
            while len(spaces) < length:
                spaces.append(perturb(rng, spaces[-1]))
            steps = [eps_from_box(b, a, box(b, a).witness) for a, b in zip(spaces, spaces[1:])]
            cert = chain_compress(spaces, steps)
            total = sum(w.eps for w in steps)
            assert verify_witness(spaces[-1], spaces[0], cert.composed.with_eps(5 * total)).valid
            # pairwise: X -> Y at eps, Y -> Z at delta
            X, Y = spaces[1], spaces[0]
            Z = perturb(rng, Y)
            wYX, wZY = steps[0], eps_from_box(Y, Z, box(Y, Z).witness)
            h = compose_eps(X, Y, Z, wYX, wZY)
            assert verify_witness(X, Z, h.with_eps(3 * wYX.eps + 4 * wZY.eps)).valid


def test_criterion_09_universal():
    with criterion(9, "universal spaces dominate within the tail bound"):
        rng = random.Random(1009)
        start = time.perf_counter()
        exact = 0
        for trial in range(120):
            N = 2 if trial < 80 else rng.randint(3, 4)
            K = rng.randint(1, 8)
            D = F(rng.randint(2, 6), 2)
            spec = UniversalSpaceSpec(N, D, K)
            n = rng.randint(1, N)
            denom = rng.choice((2, 4, 8, 16, 3, 6, 12))
            while denom < n:
                denom *= 2
            Y = MMSpace(random_metric(rng, n, top=1, denom=1), random_mass(rng, n, denom))
            assert Y.diam <= D
            U = universal_space(spec)
            keep("universal", U)
            w = universal_dominate(spec, Y)
            assert verify_witness(U, Y, w).valid
            if N == 2:
                assert w.eps <= F(2) ** (1 - K)
            assert w.eps <= 2 * spec.tail
            table = digit_table(spec, Y)
            residual = list(Y.mass)
            for p, d in zip(spec.p, table.digits):
                residual[d] -= p
            if sum(1 for r in residual if r) <= 1:
                exact += 1
                assert w.eps == 0
        assert exact > 0
        assert time.perf_counter() - start < 10


def test_criterion_10_pipeline():
    with criterion(10, "pipeline certificate for the fixture family and singleton round-trip"):
        start = time.perf_counter()
        X = validate_space([[0 if i == j else 1 for j in range(4)] for i in range(4)], ["1/2", "1/3", "1/6", "0"], "abcd")
        Z = validate_space([[0 if i == j else 1 for j in range(4)] for i in range(4)], ["1/2", "1/2", "0", "0"], "abcd")
        W = validate_space([[0 if i == j else 1 for j in range(4)] for i in range(4)], ["5/6", "0", "1/6", "0"], "abcd")
        schedule = (F(1, 2), F(1, 4), F(1, 8))
        config = PipelineConfig(schedule, "ambient", X, (check_domination(X, Z), check_domination(X, W)))
        cert = common_dominator([Z, W], config)
        assert [lv.eps for lv in cert.levels] == list(schedule)
        for lv in cert.levels:
            for Y, w in zip((Z, W), lv.members):
                assert w.eps == lv.eps and verify_witness(lv.space, Y, w).valid
            assert lv.from_ambient.eps == 2 * lv.eps
            assert verify_witness(X, lv.space, lv.from_ambient).valid
            keep("pipeline", lv.space)
        for coarse, fine, step in zip(cert.levels, cert.levels[1:], cert.steps):
            assert step.eps == 2 * coarse.eps
            assert verify_witness(fine.space, coarse.space, step).valid

        rng = random.Random(1010)
        for _ in range(10):
            Y = random_space(rng, rng.randint(1, 5))
            single = common_dominator([Y], PipelineConfig((F(2), F(1), F(1, 4))))
            assert mm_isomorphic(single.levels[-1].space, Y)
            keep("pipeline", single.levels[-1].space)
        assert time.perf_counter() - start < 30


def test_criterion_11_glue():
    with criterion(11, "glued chains: isometric embeddings, adjacent Prohorov within 2 eps"):
        rng = random.Random(1011)
        for _ in range(30):
            spaces = [random_space(rng, rng.randint(1, 4))]
            for _ in range(rng.randint(1, 3)):
                spaces.append(perturb(rng, spaces[-1]) if rng.random() < 0.7 else random_space(rng, rng.randint(1, 4)))
            ws = [box(a, b).witness for a, b in zip(spaces, spaces[1:])]
            eps = [w.eps for w in ws]
            r = glue_chain(spaces, [w.coupling for w in ws], eps, [w.kept for w in ws])
            for S, emb in zip(spaces, r.embeddings):
                for i in range(S.n):
                    for j in range(S.n):
                        assert r.space.d(emb[i], emb[j]) == S.d(i, j)
            for k, e in enumerate(eps):
                assert prohorov(r.space, r.masses[k], r.masses[k + 1]).value <= 2 * e
            keep("glue", r.space)


def test_criterion_12_diameter_bound():
    with criterion(12, "two spaces below X are within box distance 1 - max atom of X"):
        rng = random.Random(1012)
        for _ in range(100):
            X = random_space(rng, rng.randint(1, 5))
            Y, f = quotient_of(rng, X, rng.randint(1, min(3, X.n)))
            Z, g = quotient_of(rng, X, rng.randint(1, min(3, X.n)))
            assert verify_witness(X, Y, MapWitness(f)).valid
            assert verify_witness(X, Z, MapWitness(g)).valid
            assert box(Y, Z).value <= 1 - max(X.mass)


def test_criterion_13_scalar_lemma():
    with criterion(13, "|a-b| and |c-d| differ by at most eps, exhaustively"):
        values = sorted({F(p, q) for q in range(1, 7) for p in range(-q, q + 1)})
        pairs = [(a, c) for a in values for c in values if a >= c]
        for a, c in pairs:
            for b, d in pairs:
                eps = max(a - c, b - d)
                assert abs(abs(a - b) - abs(c - d)) <= eps


def test_criterion_14_metric_axioms():
    with criterion(14, "metric axioms on every constructed space"):
        rng = random.Random(1014)
        for _ in range(20):
            P, _, _ = product(random_space(rng, rng.randint(1, 4)), random_space(rng, rng.randint(1, 4)))
            keep("product", P)
        kinds = {"product", "quotient", "glue", "regularize", "pipeline", "universal"}
        missing = kinds - CONSTRUCTED.keys()
        if missing:
            pytest.fail(f"no spaces recorded for {sorted(missing)}; run the whole module")
        for kind, spaces in CONSTRUCTED.items():
            for S in spaces:
                assert_metric_axioms(S, pseudo=(kind == "glue"))
