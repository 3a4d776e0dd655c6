from fractions import Fraction as Fr

import pytest

import oracles
from anosov import lie
from anosov.errors import RankMismatch, TooLarge, UnsupportedRank

SYSTEMS = [("A", r) for r in range(1, 5)] + [("B", 2), ("B", 3), ("C", 2), ("C", 3), ("D", 3), ("D", 4)]


def reflect(v, a):
    """s_a(v) = v - 2<v,a>/<a,a> a, exactly."""
    c = 2 * sum(x * y for x, y in zip(v, a)) / sum(x * x for x in a)
    return tuple(x - c * y for x, y in zip(v, a))


def closure(simple):
    """All roots generated from the simple roots by simple reflections."""
    roots = set(simple)
    frontier = list(simple)
    while frontier:
        new = []
        for v in frontier:
            for a in simple:
                w = reflect(v, a)
                if w not in roots:
                    roots.add(w)
                    new.append(w)
        frontier = new
    return roots


@pytest.fixture(scope="module", params=SYSTEMS, ids=lambda s: f"{s[0]}{s[1]}")
def rs(request):
    return lie.build_root_system(*request.param)


def test_build_examples():
    a1 = lie.build_root_system("A", 1)
    assert [a.coords for a in a1.simple_roots] == [(1, -1)]
    assert len(a1.positive_roots) == 1
    assert len(lie.build_root_system("B", 2).positive_roots) == 4
    assert len(lie.build_root_system("D", 3).positive_roots) == 6


def test_positive_root_counts_and_closure(rs):
    r = rs.rank
    count = {"A": r * (r + 1) // 2, "B": r * r, "C": r * r, "D": r * (r - 1)}[rs.family]
    assert len(rs.positive_roots) == count
    every = closure([a.coords for a in rs.simple_roots])
    pos = {a.coords for a in rs.positive_roots}
    assert every == pos | {tuple(-x for x in p) for p in pos}


def test_positive_roots_are_nonnegative_combinations(rs):
    # solve in the simple-root basis by exact least squares (it is a basis)
    import numpy as np
    s = np.array([[float(x) for x in a.coords] for a in rs.simple_roots])
    for a in rs.positive_roots:
        c, *_ = np.linalg.lstsq(s.T, np.array([float(x) for x in a.coords]), rcond=None)
        assert np.allclose(c, np.round(c)) and np.all(np.round(c) >= 0)


def test_d3_is_a3():
    # D3 simple roots (e1-e2, e2-e3, e2+e3): the first is the middle node, so
    # (a2, a1, a3) -> (b1, b2, b3) extends linearly to an isometry onto A3
    d3, a3 = lie.build_root_system("D", 3), lie.build_root_system("A", 3)
    src = [d3.simple_roots[i].coords for i in (1, 0, 2)]
    dst = [b.coords for b in a3.simple_roots]

    def coords_in(basis, v):
        # 3 unknowns, solved exactly on the first independent rows
        m = [list(col) + [x] for col, x in zip(zip(*basis), v)]
        sol = oracles.null_space([row[:3] + [-row[3]] for row in m], 4)
        (vec,) = sol
        return [x / vec[3] for x in vec[:3]]

    image = set()
    for a in list(d3.positive_roots) + [-r for r in d3.positive_roots]:
        c = coords_in(src, a.coords)
        image.add(a3.weight([sum(ci * b[k] for ci, b in zip(c, dst)) for k in range(4)]).coords)
    allA = {r.coords for r in a3.positive_roots} | {(-r).coords for r in a3.positive_roots}
    assert image == allA
    gram = lambda vs: [[sum(x * y for x, y in zip(u, v)) for v in vs] for u in vs]
    assert gram(src) == gram(dst)


def test_unsupported_ranks():
    for fam, r in (("D", 1), ("D", 2), ("B", 1), ("C", 1), ("A", 0), ("E", 6)):
        with pytest.raises(UnsupportedRank):
            lie.build_root_system(fam, r)


def test_weyl_enumerate_examples():
    assert len(lie.weyl_enumerate(lie.build_root_system("A", 1))) == 2
    assert len(lie.weyl_enumerate(lie.build_root_system("B", 2))) == 8
    a3 = lie.weyl_enumerate(lie.build_root_system("A", 3))
    assert len(a3) == 24 and max(w.length for w in a3) == 6


def test_weyl_group_matches_signed_permutations(rs):
    elements = lie.weyl_enumerate(rs)
    assert len(elements) == rs.weyl_order() == len({w.key for w in elements})
    if rs.family == "A":
        return
    even = rs.family == "D"
    brute = {(p, s) for p, s in oracles.signed_permutations(rs.rank, even=even)}
    assert {w.key for w in elements} == brute


def test_length_equals_inversion_count(rs):
    for w in lie.weyl_enumerate(rs):
        assert w.length == lie.inversion_count(rs, w)


def test_closed_under_generators(rs):
    keys = {w.key for w in lie.weyl_enumerate(rs)}
    for w in lie.weyl_enumerate(rs):
        for j in range(1, rs.rank + 1):
            assert w.compose(lie.simple_reflection(rs, j)).key in keys


def test_weyl_permutes_roots(rs):
    roots = {a.coords for a in rs.positive_roots} | {(-a).coords for a in rs.positive_roots}
    for w in lie.weyl_enumerate(rs):
        assert {lie.act_on_weight(w, rs.weight(r)).coords for r in roots} == roots


def test_too_large():
    with pytest.raises(TooLarge):
        lie.weyl_enumerate(lie.build_root_system("A", 10))


def test_longest_element_examples():
    a1 = lie.build_root_system("A", 1)
    assert lie.longest_element(a1).word == (1,)
    a3 = lie.build_root_system("A", 3)
    w0 = lie.longest_element(a3)
    assert w0.perm == (3, 2, 1, 0) and w0.length == 6
    assert max(lie.weyl_enumerate(a3), key=lambda w: w.length).key == w0.key
    b2 = lie.build_root_system("B", 2)
    w0 = lie.longest_element(b2)
    assert w0.signs == (-1, -1) and w0.perm == (0, 1) and w0.length == 4


def test_w0_sends_positive_to_negative(rs):
    w0 = lie.longest_element(rs)
    assert all(rs.is_negative_root(lie.act_on_weight(w0, a)) for a in rs.positive_roots)


def test_opposition_involution():
    assert lie.opposition_involution(lie.build_root_system("A", 3)) == {1: 3, 2: 2, 3: 1}
    assert lie.opposition_involution(lie.build_root_system("C", 2)) == {1: 1, 2: 2}
    assert lie.opposition_involution(lie.build_root_system("A", 1)) == {1: 1}
    assert lie.opposition_involution(lie.build_root_system("D", 3)) == {1: 1, 2: 3, 3: 2}
    assert lie.opposition_involution(lie.build_root_system("D", 4)) == {1: 1, 2: 2, 3: 3, 4: 4}


def test_iota_is_involution(rs):
    iota = lie.opposition_involution(rs)
    assert all(iota[iota[j]] == j for j in iota)


def test_half_sum_examples():
    assert lie.half_sum_positive(lie.build_root_system("A", 1)).coords == (Fr(1, 2), Fr(-1, 2))
    assert lie.half_sum_positive(lie.build_root_system("A", 2)).coords == (1, 0, -1)
    assert lie.half_sum_positive(lie.build_root_system("B", 2)).coords == (Fr(3, 2), Fr(1, 2))


def test_rho_pairs_positively_with_simple_roots(rs):
    # oracle: direct summation of the positive roots
    total = [Fr(0)] * rs.dim
    for a in rs.positive_roots:
        total = [x + y for x, y in zip(total, a.coords)]
    assert rs.rho.coords == tuple(x / 2 for x in total)
    assert all(rs.rho.dot(a) > 0 for a in rs.simple_roots)


def test_rho_pairing_maximal_at_identity():
    for fam, r in [("A", 1), ("A", 2), ("A", 3), ("B", 2), ("B", 3), ("C", 3), ("D", 3)]:
        rs = lie.build_root_system(fam, r)
        rr = rs.rho.dot(rs.rho)
        for w in lie.weyl_enumerate(rs):
            val = rs.rho.dot(lie.act_on_weight(w, rs.rho))
            assert val <= rr and (val == rr) == (w.length == 0)


def test_order_key(rs):
    zero = rs.weight([0] * rs.dim)
    assert lie.key_sign(lie.orderA_key(rs, zero)) == 0
    assert lie.weight_sign(rs, -rs.rho) == -1
    for a in rs.positive_roots:
        assert lie.weight_sign(rs, a) == 1
        assert lie.weight_sign(rs, -a) == -1


def test_act_on_weight_examples():
    a3 = lie.build_root_system("A", 3)
    e1 = a3.weight([1, 0, 0, 0])
    w0 = lie.longest_element(a3)
    assert lie.act_on_weight(lie.identity_element(a3), e1) == e1
    assert lie.act_on_weight(w0, e1) == a3.weight([0, 0, 0, 1])
    b2 = lie.build_root_system("B", 2)
    assert lie.act_on_weight(lie.simple_reflection(b2, 1), b2.weight([1, 0])).coords == (0, 1)
    with pytest.raises(RankMismatch):
        lie.act_on_weight(w0, b2.weight([1, 0]))


def test_reduced_words_are_reduced_and_canonical(rs):
    for w in lie.weyl_enumerate(rs):
        cur = lie.identity_element(rs)
        for j in w.word:
            cur = cur.compose(lie.simple_reflection(rs, j))
        assert cur.key == w.key
    assert lie.with_word(rs, lie.longest_element(rs)).word == lie.longest_element(rs).word


def test_json_roundtrip_shape():
    d = lie.build_root_system("B", 2).to_json()
    assert d["family"] == "B" and d["rank"] == 2
    assert d["simple_roots"][1] == [[0, 1], [1, 1]]
