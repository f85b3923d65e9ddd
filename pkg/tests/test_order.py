import random
from fractions import Fraction as F
from itertools import product as cartesian

import pytest

from gen import assert_metric_axioms, perturb, quotient_of, random_metric, random_space
from mmkit.core import (
    EpsWitness,
    FiniteMetric,
    MapWitness,
    MMSpace,
    PreconditionFailed,
    SizeGuard,
    mm_isomorphic,
    one_point,
    push_vector,
    validate_space,
)
from mmkit.metrics import box, gh
from mmkit.order import (
    chain_compress,
    check_domination,
    check_eps_domination,
    compose_eps,
    eps_from_box,
    kuratowski,
    regularize,
    regularize_gh,
)
from mmkit.verify import verify_witness

ONES4 = [[0 if i == j else 1 for j in range(4)] for i in range(4)]
X_FIX = validate_space(ONES4, ["1/2", "1/3", "1/6", "0"], "abcd")
Y_FIX = validate_space(ONES4, ["5/12", "5/12", "1/12", "1/12"], "abcd")
Z_FIX = validate_space(ONES4, ["1/2", "1/2", "0", "0"], "abcd")
W_FIX = validate_space(ONES4, ["5/6", "0", "1/6", "0"], "abcd")
UNIFORM2 = validate_space([[0, 1], [1, 0]], ["1/2", "1/2"])


def naive_domination(X, Y):
    for f in cartesian(range(Y.n), repeat=X.n):
        if push_vector(X.mass, f, Y.n) != list(Y.mass):
            continue
        if all(Y.d(f[a], f[b]) <= X.d(a, b) for a in range(X.n) for b in range(X.n)):
            return f
    return None


def eps_pair(rng, n=None):
    """A space, a nearby space, and a verified eps-witness between them."""
    X = random_space(rng, n or rng.randint(1, 4))
    Y = perturb(rng, X)
    w = eps_from_box(X, Y, box(X, Y).witness)
    return X, Y, w


class TestDomination:
    def test_fixture_z(self):
        w = check_domination(X_FIX, Z_FIX)
        assert w.f == (0, 1, 1)

    def test_fixture_w(self):
        assert check_domination(X_FIX, W_FIX).f == (0, 0, 1)

    def test_point_cannot_split(self):
        assert check_domination(one_point(), UNIFORM2) is None

    def test_fixture_incomparable(self):
        assert check_domination(X_FIX, Y_FIX) is None
        assert check_domination(Y_FIX, X_FIX) is None

    def test_complete_against_naive(self):
        rng = random.Random(21)
        found = 0
        for _ in range(150):
            X = random_space(rng, rng.randint(1, 5), denom=6, top=2, ddenom=1)
            if rng.random() < 0.5:
                Y, _ = quotient_of(rng, X, rng.randint(1, min(4, X.n)))
            else:
                Y = random_space(rng, rng.randint(1, 4), denom=6, top=2, ddenom=1)
            ours = check_domination(X, Y)
            assert (ours is None) == (naive_domination(X, Y) is None)
            if ours is not None:
                found += 1
                assert verify_witness(X, Y, ours).valid
        assert found > 20

    def test_guard(self):
        big = validate_space([[0 if i == j else 1 for j in range(15)] for i in range(15)], [F(1, 15)] * 15)
        with pytest.raises(SizeGuard):
            check_domination(big, one_point())

    def test_partial_order(self):
        rng = random.Random(22)
        for _ in range(50):
            X = random_space(rng, rng.randint(1, 4), denom=4, top=2, ddenom=1)
            assert check_domination(X, X) is not None
            Y, f = quotient_of(rng, X, rng.randint(1, X.n))
            Z, g = quotient_of(rng, Y, rng.randint(1, Y.n))
            assert verify_witness(X, Z, MapWitness(tuple(g[f[i]] for i in range(X.n)))).valid
            V = random_space(rng, rng.randint(1, 4), denom=4, top=2, ddenom=1)
            if check_domination(X, V) and check_domination(V, X):
                assert mm_isomorphic(X, V)

    def test_antisymmetry_on_copies(self):
        rng = random.Random(23)
        for _ in range(20):
            X = random_space(rng, rng.randint(1, 4))
            perm = list(range(X.n))
            rng.shuffle(perm)
            dist = [[X.d(perm[i], perm[j]) for j in range(X.n)] for i in range(X.n)]
            V = validate_space(dist, [X.mass[p] for p in perm])
            assert check_domination(X, V) and check_domination(V, X)
            assert mm_isomorphic(X, V)


class TestEpsDomination:
    def test_zero_matches_exact(self):
        rng = random.Random(24)
        for _ in range(60):
            X = random_space(rng, rng.randint(1, 4), denom=4, top=2, ddenom=1)
            Y = random_space(rng, rng.randint(1, 3), denom=4, top=2, ddenom=1)
            exact = check_domination(X, Y)
            relaxed = check_eps_domination(X, Y, 0)
            assert (exact is None) == (relaxed is None)
            if exact is not None:
                assert relaxed.f == exact.f and relaxed.domain == tuple(range(X.n))
                for e in sorted({abs(X.d(a, b) - Y.d(c, d)) for a in range(X.n) for b in range(X.n) for c in range(Y.n) for d in range(Y.n)}):
                    assert verify_witness(X, Y, relaxed.with_eps(e)).valid

    def test_one_point_target(self):
        X = random_space(random.Random(25), 4)
        w = check_eps_domination(X, one_point(), 0)
        assert w.f == (0, 0, 0, 0) and w.domain == (0, 1, 2, 3)

    def test_three_times_box(self):
        rng = random.Random(26)
        for _ in range(30):
            X, Y = random_space(rng, rng.randint(1, 3)), random_space(rng, rng.randint(1, 3))
            beta = box(X, Y).value
            assert check_eps_domination(X, Y, 3 * beta) is not None

    def test_negative_eps(self):
        with pytest.raises(PreconditionFailed):
            check_eps_domination(X_FIX, Z_FIX, -1)

    def test_detects_absence(self):
        assert check_eps_domination(one_point(), UNIFORM2, F(1, 4)) is None
        assert check_eps_domination(one_point(), UNIFORM2, F(1, 2)) is not None


class TestEpsFromBox:
    def test_self(self):
        X = random_space(random.Random(27), 4)
        w = eps_from_box(X, X, box(X, X).witness)
        assert w.eps == 0 and verify_witness(X, X, MapWitness(w.f)).valid

    def test_fixture(self):
        bw = box(Z_FIX, X_FIX).witness
        w = eps_from_box(Z_FIX, X_FIX, bw)
        assert w.eps <= 3 * bw.eps
        assert verify_witness(Z_FIX, X_FIX, w).valid

    def test_point_vs_uniform(self):
        bw = box(one_point(), UNIFORM2).witness
        w = eps_from_box(one_point(), UNIFORM2, bw)
        assert bw.eps == F(1, 2) and w.eps <= F(3, 2)


class TestRegularize:
    def test_exact_reproduces_target(self):
        rng = random.Random(28)
        for _ in range(25):
            X = random_space(rng, rng.randint(1, 5))
            Y, f = quotient_of(rng, X, rng.randint(1, X.n))
            Z, zw = regularize(X, Y, EpsWitness.exact(MapWitness(f)))
            assert mm_isomorphic(Z, Y)
            assert verify_witness(X, Z, zw).valid

    def test_fixture_small_eps(self):
        bw = box(Z_FIX, X_FIX).witness
        w = eps_from_box(Z_FIX, X_FIX, bw)
        Z, zw = regularize(Z_FIX, X_FIX, w)
        assert verify_witness(Z_FIX, Z, zw).valid
        assert box(X_FIX, Z).value <= 3 * w.eps
        assert_metric_axioms(Z)

    def test_one_point(self):
        X = random_space(random.Random(29), 3)
        Z, _ = regularize(X, one_point(), EpsWitness((0, 0, 0), (0, 1, 2), 0))
        assert Z.n == 1

    def test_random_witnesses(self):
        rng = random.Random(30)
        for _ in range(30):
            X, Y, w = eps_pair(rng)
            Z, zw = regularize(X, Y, w)
            assert verify_witness(X, Z, zw).valid
            assert box(Y, Z).value <= 3 * w.eps
            assert_metric_axioms(Z)

    def test_gh_two_points(self):
        K = FiniteMetric.from_matrix([[0, 1], [1, 0]])
        L = FiniteMetric.from_matrix([[0, F(9, 8)], [F(9, 8), 0]])
        Z, g = regularize_gh(K, L, (0, 1), F(1, 8))
        assert gh(L, Z).value <= F(1, 4)
        assert sorted(set(g.f)) == list(range(Z.n))

    def test_gh_exact_and_point(self):
        rng = random.Random(31)
        K = random_metric(rng, 4)
        Z, _ = regularize_gh(K, K, (0, 1, 2, 3), 0)
        assert gh(K, Z).value == 0
        Z, _ = regularize_gh(K, one_point().metric, (0, 0, 0, 0), 0)
        assert Z.n == 1

    def test_gh_precondition(self):
        K = FiniteMetric.from_matrix([[0, 1], [1, 0]])
        L = FiniteMetric.from_matrix([[0, 2], [2, 0]])
        with pytest.raises(PreconditionFailed):
            regularize_gh(K, L, (0, 1), F(1, 2))


class TestComposition:
    def test_exact(self):
        rng = random.Random(32)
        X = random_space(rng, 5)
        Y, f = quotient_of(rng, X, 3)
        Z, g = quotient_of(rng, Y, 2)
        w = compose_eps(X, Y, Z, EpsWitness.exact(MapWitness(f)), EpsWitness.exact(MapWitness(g)))
        assert w.eps == 0

    def test_exact_second_step(self):
        rng = random.Random(33)
        for _ in range(30):
            X, Y, wYX = eps_pair(rng)
            Z, g = quotient_of(rng, Y, rng.randint(1, Y.n))
            w = compose_eps(X, Y, Z, wYX, EpsWitness.exact(MapWitness(g)))
            assert w.eps <= 3 * wYX.eps
            assert verify_witness(X, Z, w).valid

    def test_fixture_perturbed(self):
        rng = random.Random(34)
        Xp = perturb(rng, X_FIX)
        wXXp = eps_from_box(Xp, X_FIX, box(Xp, X_FIX).witness)
        wWX = EpsWitness.exact(check_domination(X_FIX, W_FIX))
        w = compose_eps(Xp, X_FIX, W_FIX, wXXp, wWX)
        assert w.eps <= 3 * wXXp.eps
        assert verify_witness(Xp, W_FIX, w).valid

    def test_chain_exact(self):
        rng = random.Random(35)
        X = random_space(rng, 5)
        Y, f = quotient_of(rng, X, 3)
        cert = chain_compress([Y, X], [EpsWitness.exact(MapWitness(f))])
        assert cert.composed.eps == 0

    def test_chain_agrees_with_pairwise(self):
        rng = random.Random(36)
        for _ in range(15):
            X1 = random_space(rng, rng.randint(1, 4))
            X2 = perturb(rng, X1)
            X3 = perturb(rng, X2)
            s1 = eps_from_box(X2, X1, box(X2, X1).witness)
            s2 = eps_from_box(X3, X2, box(X3, X2).witness)
            cert = chain_compress([X1, X2, X3], [s1, s2])
            assert cert.composed.eps <= 5 * (s1.eps + s2.eps)
            pair = compose_eps(X3, X2, X1, s2, s1)
            assert pair.eps <= 3 * s2.eps + 4 * s1.eps

    def test_chain_of_fixture_copies(self):
        rng = random.Random(37)
        spaces = [X_FIX]
        steps = []
        for _ in range(3):
            nxt = perturb(rng, spaces[-1], step=F(1, 40), move=F(1, 40))
            w = eps_from_box(nxt, spaces[-1], box(nxt, spaces[-1]).witness)
            if w.eps > F(1, 20):
                pytest.fail(f"perturbation too large: {w.eps}")
            steps.append(w.with_eps(F(1, 20)))
            spaces.append(nxt)
        cert = chain_compress(spaces, steps)
        assert cert.composed.eps <= F(3, 4)
        assert verify_witness(spaces[-1], spaces[0], cert.composed).valid

    def test_chain_bad_step(self):
        with pytest.raises(PreconditionFailed):
            chain_compress([Z_FIX, X_FIX], [EpsWitness((0, 0, 0), (0, 1, 2), 0)])


def _grid(denominators=range(1, 7), lo=-1, hi=1):
    return sorted({F(p, q) for q in denominators for p in range(lo * q, hi * q + 1)})


def test_scalar_lemma_exhaustive():
    values = _grid()
    pairs = [(a, c) for a in values for c in values if 0 <= a - c <= 1]
    for a, c in pairs:
        for b, d in pairs:
            eps = max(a - c, b - d)
            assert abs(abs(a - b) - abs(c - d)) <= eps


class TestKuratowski:
    def test_one_point(self):
        assert kuratowski(one_point().metric).vectors == ((0,),)

    def test_two_points(self):
        t = kuratowski(FiniteMetric.from_matrix([[0, 1], [1, 0]]))
        assert t.vectors == ((0, 1), (1, 0)) and t.distance(0, 1) == 1

    def test_random(self):
        rng = random.Random(38)
        for _ in range(20):
            K = random_metric(rng, 5)
            t = kuratowski(K)
            for i in range(5):
                for j in range(5):
                    assert t.distance(i, j) == K.d(i, j)
