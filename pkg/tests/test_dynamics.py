import numpy as np
import pytest

import oracles
from anosov import dynamics as dyn
from anosov.errors import EmptySample, NoPairs, NotProximal, PingPongFailed, TooLarge, ValidationError
from anosov.numlin import BilinearForm, Subspace, cartan_projection, distance, jordan_projection

E = np.e


@pytest.fixture(scope="module")
def integers():
    return dyn.RepresentationSpec((np.diag([E, 1 / E]),))


@pytest.fixture(scope="module")
def trivial():
    return dyn.load_representation(dyn.fixture_path("trivial.json"))


# --- words -----------------------------------------------------------------

def test_word_examples():
    words = dyn.enumerate_reduced_words(1, 3, include_identity=True)
    assert [w.letters for w in words] == [(), (1,), (-1,), (1, 1), (-1, -1), (1, 1, 1), (-1, -1, -1)]
    assert [w.letters for w in dyn.enumerate_reduced_words(2, 1)] == [(1,), (-1,), (2,), (-2,)]
    assert len(dyn.enumerate_reduced_words(2, 2)) == 16


@pytest.mark.parametrize("k, L", [(1, 5), (2, 4), (3, 3)])
def test_words_match_brute_force(k, L):
    # oracle: all strings over the 2k letters, keeping those without cancellation
    letters = [s * i for i in range(1, k + 1) for s in (1, -1)]
    brute = set()
    frontier = [()]
    for _ in range(L):
        frontier = [w + (x,) for w in frontier for x in letters if not w or w[-1] != -x]
        brute.update(frontier)
    words = dyn.enumerate_reduced_words(k, L)
    assert len(words) == len(brute) == dyn.word_count(k, L)
    assert {w.letters for w in words} == brute
    key = [(len(w), [abs(x) * 2 + (x < 0) for x in w.letters]) for w in words]
    assert key == sorted(key)


def test_word_validation():
    with pytest.raises(ValidationError):
        dyn.ReducedWord((1, -1))
    with pytest.raises(ValidationError):
        dyn.ReducedWord((0,))
    with pytest.raises(TooLarge):
        dyn.enumerate_reduced_words(2, 20)
    w = dyn.ReducedWord((1, 2, -1))
    assert w.inverse().letters == (1, -2, -1)
    assert not w.is_cyclically_reduced()
    assert w.label() == "a b a^-1"


# --- constructors ----------------------------------------------------------

def test_schottky_fixture_matches_constructor(schottky):
    built = dyn.schottky_sl2(2, 3.0, [0.0, np.pi / 4])
    for g, h in zip(built.generators, schottky.generators):
        assert np.allclose(g, h, atol=1e-12)
    assert oracles.ping_pong_grid(built.generators)


@pytest.mark.parametrize("t, angles", [(0.1, (0.0, np.pi / 4)), (3.0, (0.0, 0.0)), (0.5, (0.0, np.pi / 2))])
def test_schottky_failures_agree_with_grid(t, angles):
    d = np.diag([np.exp(t), np.exp(-t)])
    rot = [np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]]) for a in angles]
    gens = [r @ d @ r.T for r in rot]
    assert not oracles.ping_pong_grid(gens)
    with pytest.raises(PingPongFailed) as info:
        dyn.schottky_sl2(2, t, list(angles))
    assert info.value.pair is not None


@pytest.mark.parametrize("t", [1.0, 2.0, 2.5, 3.0, 5.0])
def test_certificate_agrees_with_grid(t):
    d = np.diag([np.exp(t), np.exp(-t)])
    r = np.array([[1.0, -1.0], [1.0, 1.0]]) / np.sqrt(2)
    expected = oracles.ping_pong_grid([d, r @ d @ r.T])
    try:
        dyn.schottky_sl2(2, t, [0.0, np.pi / 4])
        passed = True
    except PingPongFailed:
        passed = False
    assert passed == expected


def test_principal_embedding():
    assert np.allclose(dyn.principal_sl2_to_sln(2)(np.array([[1.0, 2.0], [3.0, 7.0]])), [[1, 2], [3, 7]])
    emb = dyn.principal_sl2_to_sln(3)
    assert np.allclose(emb(np.diag([E, 1 / E])), np.diag([E**2, 1, E**-2]))
    # explicit action on x^2, xy, y^2 under (x, y) -> (x, y) g
    a, b, c, d = 2.0, 1.0, 3.0, 2.0
    x2 = [a * a, 2 * a * c, c * c]
    xy = [a * b, a * d + b * c, c * d]
    y2 = [b * b, 2 * b * d, d * d]
    assert np.allclose(emb(np.array([[a, b], [c, d]])), np.column_stack([x2, xy, y2]))
    rng = np.random.default_rng(0)
    for n in (3, 4, 5):
        emb = dyn.principal_sl2_to_sln(n)
        g, h = rng.standard_normal((2, 2, 2))
        assert np.allclose(emb(g @ h), emb(g) @ emb(h), atol=1e-8)
        t = 0.7
        assert np.allclose(emb(np.diag([np.exp(t), np.exp(-t)])), np.diag(np.exp(t * np.arange(n - 1, -n, -2))))


def test_principal_rotation_preserves_discriminant():
    th = 0.4
    r = dyn.principal_sl2_to_sln(3)(np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]))
    f = dyn.ADJOINT_FORM
    assert np.allclose(r.T @ f @ r, f)
    assert sorted(BilinearForm(f).signature) == [1, 2]


def test_representation_validation():
    with pytest.raises(ValidationError):
        dyn.RepresentationSpec((np.diag([2.0, 1.0]),))
    with pytest.raises(ValidationError):
        dyn.RepresentationSpec((np.eye(2),), "Opq")
    with pytest.raises(ValidationError):
        dyn.RepresentationSpec((np.diag([2.0, 0.5]),), "Opq", BilinearForm(np.eye(2)))
    with pytest.raises(ValidationError):
        dyn.load_representation('{"n": 3, "generators": [{"matrix": [[1, 0], [0, 1]]}]}')


def test_adjoint_realization(adjoint):
    assert adjoint.family == "Opq" and sorted(adjoint.form.signature) == [1, 2]
    assert adjoint.to_json()["p"] == 1


# --- scans -------------------------------------------------------------------

def test_trivial_scan_fails(trivial):
    rep = dyn.divergence_scan(trivial, L=6)
    assert all(v == 0 for v in rep.minima["mu1-mu2"])
    assert rep.fits["mu1-mu2"].slope == pytest.approx(0, abs=1e-12)
    assert not rep.passed


def test_scan_counts_and_exact_svd_oracle(schottky):
    rep = dyn.divergence_scan(schottky, L=6)
    assert rep.word_counts == tuple(4 * 3 ** (L - 1) for L in range(1, 7))
    for L in range(1, 7):
        vals = []
        for w in dyn.enumerate_reduced_words(2, L):
            if len(w) == L:
                # det = 1, so s1/s2 = s1^2 and only the well-conditioned top value is needed
                s = np.linalg.svd(schottky.evaluate(w), compute_uv=False)
                vals.append(2 * np.log(s[0]))
        assert rep.minima["mu1-mu2"][L - 1] == pytest.approx(min(vals), rel=1e-9)
        assert rep.maxima["mu1-mu2"][L - 1] == pytest.approx(max(vals), rel=1e-9)


def test_schottky_slope(schottky):
    rep = dyn.divergence_scan(schottky, L=10)
    assert rep.fits["mu1-mu2"].slope >= 4.0
    assert rep.passed


def test_principal_slopes(schottky):
    rep = dyn.divergence_scan(dyn.principal_image(schottky, 3), L=8)
    assert set(rep.fits) == {"mu1-mu2", "mu2-mu3"}
    assert all(f.slope > 0 for f in rep.fits.values())


def test_root_functional_parsing():
    r = dyn.root_functional("2mu3", 4)
    assert r.coeffs == (0, 0, 2, 0)
    assert dyn.root_functional("mu1 - mu2", 3)(np.array([3.0, 1.0, -4.0])) == 2.0
    for bad in ("mu9", "nu1", "mu1-mu1", (1, 1)):
        with pytest.raises(ValidationError):
            dyn.root_functional(bad, 3)


def test_qi_integers(integers, trivial):
    rep = dyn.qi_constants(integers, L=8)
    assert rep.env_min == pytest.approx([np.sqrt(2) * L for L in range(1, 9)])
    assert rep.K_hat == pytest.approx(np.sqrt(2), abs=1e-6)
    assert rep.C_hat == pytest.approx(0, abs=1e-6)
    assert dyn.qi_constants(trivial, L=6).fail


def test_qi_schottky(schottky):
    rep = dyn.qi_constants(schottky, L=8)
    assert np.isfinite(rep.K_hat) and not rep.fail
    ell = np.arange(1, 9)
    assert np.all(np.asarray(rep.env_max) <= rep.K_hat * ell + rep.C_hat + 1e-9)
    assert np.all(np.asarray(rep.env_min) >= ell / rep.K_hat - rep.C_hat - 1e-9)


def test_qi_fit_is_optimal_on_grid():
    ell = np.arange(1, 9)
    lo, hi = 2.0 * ell - 3, 5.0 * ell + 1
    k, c = dyn.qi_fit(ell, lo, hi)
    grid = np.linspace(1, 10, 9001)
    brute = min(kk + max(0, np.max(hi - kk * ell), np.max(ell / kk - lo)) for kk in grid)
    assert k + c <= brute + 1e-6


# --- words: algebraic invariants ---------------------------------------------

def test_inverse_reverse_negate_and_subadditivity(schottky):
    words = dyn.enumerate_reduced_words(2, 3)
    mus = {w.letters: cartan_projection(schottky.compound(w)) for w in words}
    for w in words:
        assert np.allclose(mus[w.inverse().letters], -mus[w.letters][::-1], atol=1e-9)
    for u in words:
        for v in words:
            if u.letters[-1] == -v.letters[0]:
                continue
            uv = dyn.ReducedWord(u.letters + v.letters)
            lhs = np.linalg.norm(cartan_projection(schottky.compound(uv)))
            assert lhs <= np.linalg.norm(mus[u.letters]) + np.linalg.norm(mus[v.letters]) + 1e-6


def test_jordan_majorized_by_cartan(schottky):
    rep = dyn.principal_image(schottky, 3)
    for w in dyn.enumerate_reduced_words(2, 4):
        cp = rep.compound(w)
        lam, mu = np.cumsum(jordan_projection(cp)), np.cumsum(cartan_projection(cp))
        assert np.all(lam <= mu + 1e-6)


# --- proximality ---------------------------------------------------------------

def test_proximal_diagonal():
    rep = dyn.proximal_data(np.diag([E**3, 1.0, E**-3]))
    assert rep.gap == pytest.approx(3.0)
    assert distance(rep.x_plus, Subspace.coordinate(3, [0])) < 1e-12
    assert distance(rep.x_minus, Subspace.coordinate(3, [1, 2])) < 1e-12
    assert rep.r == pytest.approx(1.0)
    assert rep.epsilon >= 0 and rep.epsilon_consistent


def test_proximal_rotation():
    with pytest.raises(NotProximal):
        dyn.proximal_data(np.array([[0.0, -1.0], [1.0, 0.0]]))


def test_proximal_fibonacci():
    phi = (1 + np.sqrt(5)) / 2
    rep = dyn.proximal_data(np.array([[2.0, 1.0], [1.0, 1.0]]))
    assert distance(rep.x_plus, Subspace.span([phi, 1.0])) < 1e-12
    assert distance(rep.x_minus, Subspace.span([-1 / phi, 1.0])) < 1e-12
    # the two eigenlines are orthogonal for a symmetric matrix
    assert rep.r == pytest.approx(1.0)
    assert 0 <= rep.r <= 1


@pytest.mark.parametrize("seed", range(5))
def test_power_invariance(seed):
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((4, 4))
    g = q @ np.diag([3.0, -1.5, 1.0, 0.4]) @ np.linalg.inv(q)
    base = dyn.proximal_data(g, estimate_epsilon=False)
    assert distance(base.x_plus, Subspace.span(q[:, 0])) < 1e-8
    for m in (2, 3):
        rep = dyn.proximal_data(np.linalg.matrix_power(g, m), estimate_epsilon=False)
        assert distance(rep.x_plus, base.x_plus) < 1e-8


def test_every_schottky_word_is_proximal(schottky):
    for w in dyn.enumerate_reduced_words(2, 6):
        rep = dyn.proximal_data(schottky.compound(w), estimate_epsilon=False)
        assert rep.gap > 0


# --- limit sets ------------------------------------------------------------

def test_limit_set_integers(integers, trivial):
    sample = dyn.limit_set_sample(integers, 5)
    assert len(sample) == 2
    assert distance(sample.points[0], Subspace.coordinate(2, [0])) < 1e-12
    assert distance(sample.points[1], Subspace.coordinate(2, [1])) < 1e-12
    with pytest.raises(EmptySample):
        dyn.limit_set_sample(trivial, 4)


def test_limit_set_in_ping_pong_disks(schottky):
    cert = dyn.ping_pong_certificate(schottky)
    centers = dict(cert.disks)
    sizes = []
    for L in (1, 2, 3, 4, 6, 8):
        sample = dyn.limit_set_sample(schottky, L)
        sizes.append(len(sample))
        for p, w in zip(sample.points, sample.words):
            first = w.label().split()[0]
            c = centers[first]
            assert distance(p, Subspace.span([np.cos(c), np.sin(c)])) < 0.1
    # new points from length 4 on sit within the dedup radius of old ones
    assert sizes == sorted(sizes) and sizes[0] < sizes[1] < sizes[2]


def test_margin_integers(integers):
    rep = dyn.transversality_margin(dyn.limit_set_sample(integers, 5))
    assert rep.min_margin == pytest.approx(1.0)
    assert rep.pairs == 2


def test_margin_schottky_exact_rank(schottky):
    sample = dyn.limit_set_sample(schottky, 6)
    rep = dyn.transversality_margin(sample, sep=0.05)
    assert rep.min_margin > 0
    assert sum(rep.histogram) == rep.pairs
    for i, p in enumerate(sample.points):
        for j, q in enumerate(sample.points):
            if distance(p, q) > 0.05:
                m = np.column_stack([p.basis, sample.duals[j].basis])
                assert oracles.det(oracles.frac(m)) != 0


def test_margin_no_pairs(integers):
    s = dyn.limit_set_sample(integers, 5)
    dup = dyn.LimitSetSample("line", (s.points[0], s.points[0]), (s.duals[0], s.duals[0]),
                             (s.words[0], s.words[0]), 5, 2)
    with pytest.raises(NoPairs):
        dyn.transversality_margin(dup, sep=0.5)
