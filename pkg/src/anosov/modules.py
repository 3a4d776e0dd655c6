"""Self-dual G-modules, their weight combinatorics and the set S_φ.

A module family is a closed enumeration of the concrete modules that carry
an invariant nondegenerate form.  For each we produce the exact weight
multiset, split it by the sign of :func:`anosov.lie.orderA_key`, and compute

    S_φ = { w ∈ W | w·λ > 0 }

for the highest weight λ.  This is the exact sign-test form of the set of
Weyl elements whose weight line lies in a maximal isotropic AN-invariant
subspace T ⊇ V₊ (any such T meets V₋ trivially, and every Weyl translate
of λ is nonzero), so no choice of T inside V₀ is needed.
"""

from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement
from math import comb

import numpy as np

from . import lie
from .errors import DegenerateForm, UnsupportedFamily
from .numlin import BilinearForm, signature_of

TAGS = (
    "Standard",
    "WedgeK",
    "EndStd",
    "EndWedgeK",
    "WedgeMiddle",
    "WedgeTwoOrth",
    "OrthStd",
    "SympStd",
    "SympAdjoint",
)


@dataclass(frozen=True)
class ModuleFamily:
    """A module family tag with its integer parameters.

    ``n`` is the dimension of the defining representation of SL(n) for the
    A-type tags (``WedgeMiddle`` takes the total dimension 2m) and the
    symplectic dimension 2m for ``SympStd``/``SympAdjoint``.
    """

    tag: str
    n: int = None
    k: int = None
    p: int = None
    q: int = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise UnsupportedFamily(f"unknown module family {self.tag!r}")
        t, n, k, p, q = self.tag, self.n, self.k, self.p, self.q
        if t in ("WedgeTwoOrth", "OrthStd"):
            if p is None or q is None or not 1 <= p <= q:
                raise UnsupportedFamily(f"{t} needs 1 <= p <= q, got p={p}, q={q}")
            return
        if n is None or n < 2 or n > 16:
            raise UnsupportedFamily(f"{t} needs 2 <= n <= 16, got n={n}")
        if t == "Standard" and n != 2:
            raise UnsupportedFamily("Standard(n) is self-dual only for n = 2")
        if t == "WedgeK" and (k is None or 2 * k != n):
            raise UnsupportedFamily("WedgeK(n, k) is self-dual only for n = 2k")
        if t == "EndWedgeK" and (k is None or not 1 <= k < n):
            raise UnsupportedFamily(f"EndWedgeK needs 1 <= k < n, got k={k}")
        if t in ("WedgeMiddle", "SympStd", "SympAdjoint") and n % 2:
            raise UnsupportedFamily(f"{t} needs an even dimension, got {n}")

    def __str__(self):
        if self.tag in ("WedgeTwoOrth", "OrthStd"):
            return f"{self.tag}({self.p},{self.q})"
        if self.tag in ("WedgeK", "EndWedgeK"):
            return f"{self.tag}({self.n},{self.k})"
        return f"{self.tag}({self.n})"

    def root_system(self):
        if self.tag in ("WedgeTwoOrth", "OrthStd"):
            return lie.build_root_system("D" if self.p == self.q else "B", self.p)
        if self.tag in ("SympStd", "SympAdjoint"):
            return lie.build_root_system("C", self.n // 2)
        return lie.build_root_system("A", self.n - 1)

    @property
    def form_kind(self):
        if self.tag == "Standard" or self.tag == "SympStd":
            return "antisymmetric"
        if self.tag in ("WedgeMiddle", "WedgeK"):
            half = self.n // 2
            return "symmetric" if half % 2 == 0 else "antisymmetric"
        return "symmetric"

    @property
    def dimension(self):
        t, n = self.tag, self.n
        if t == "Standard":
            return 2
        if t in ("WedgeK", "WedgeMiddle"):
            return comb(n, n // 2)
        if t == "EndStd":
            return n * n
        if t == "EndWedgeK":
            return comb(n, self.k) ** 2
        if t == "OrthStd":
            return self.p + self.q
        if t == "WedgeTwoOrth":
            return comb(self.p + self.q, 2)
        if t == "SympStd":
            return n
        return n * (n + 1) // 2

    def to_json(self):
        out = {"tag": self.tag}
        for name in ("n", "k", "p", "q"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out


@dataclass(frozen=True)
class WeightMultiset:
    family: ModuleFamily
    entries: tuple  # ((WeightVector, multiplicity), ...), descending in the order

    @property
    def dimension(self):
        return sum(m for _, m in self.entries)

    def counter(self):
        return Counter(dict(self.entries))

    def multiplicity(self, mu):
        return dict(self.entries).get(mu, 0)


def _standard_weights(fam, rs):
    """Weights of the defining representation, as a list with repetition."""
    d = rs.dim
    unit = [[1 if j == i else 0 for j in range(d)] for i in range(d)]
    if fam.tag in ("OrthStd", "WedgeTwoOrth"):
        plus = [rs.weight(u) for u in unit]
        zeros = [rs.weight([0] * d)] * (fam.q - fam.p)
        return plus + zeros + [-w for w in reversed(plus)]
    if fam.tag in ("SympStd", "SympAdjoint"):
        plus = [rs.weight(u) for u in unit]
        return plus + [-w for w in plus]
    return [rs.weight(u) for u in unit]


def _wedge_weights(rs, k):
    d = rs.dim
    out = []
    for s in combinations(range(d), k):
        out.append(rs.weight([1 if i in s else 0 for i in range(d)]))
    return out


def weight_multiset(fam):
    rs = fam.root_system()
    t = fam.tag
    if t == "Standard":
        ws = _standard_weights(fam, rs)
    elif t in ("WedgeK", "WedgeMiddle"):
        ws = _wedge_weights(rs, fam.n // 2)
    elif t == "EndStd":
        std = _standard_weights(fam, rs)
        ws = [a - b for a in std for b in std]
    elif t == "EndWedgeK":
        wk = _wedge_weights(rs, fam.k)
        ws = [a - b for a in wk for b in wk]
    elif t in ("OrthStd", "SympStd"):
        ws = _standard_weights(fam, rs)
    elif t == "WedgeTwoOrth":
        std = _standard_weights(fam, rs)
        ws = [a + b for a, b in combinations(std, 2)]
    else:  # SympAdjoint = Sym^2 of the standard module
        std = _standard_weights(fam, rs)
        ws = [a + b for a, b in combinations_with_replacement(std, 2)]
    counts = Counter(ws)
    entries = sorted(counts.items(), key=lambda item: lie.orderA_key(rs, item[0]), reverse=True)
    ms = WeightMultiset(fam, tuple(entries))
    assert ms.dimension == fam.dimension
    return ms


@dataclass(frozen=True)
class SplitReport:
    dim_plus: int
    dim_zero: int
    dim_minus: int
    highest_weight: lie.WeightVector
    form_kind: str

    def to_json(self):
        return {
            "dim_plus": self.dim_plus,
            "dim_zero": self.dim_zero,
            "dim_minus": self.dim_minus,
            "highest_weight": self.highest_weight.to_json(),
            "form_kind": self.form_kind,
        }


def split_by_order(ms, rs=None):
    rs = rs or ms.family.root_system()
    dims = {1: 0, 0: 0, -1: 0}
    for mu, m in ms.entries:
        dims[lie.weight_sign(rs, mu)] += m
    highest = max((mu for mu, _ in ms.entries), key=lambda mu: lie.orderA_key(rs, mu))
    return SplitReport(dims[1], dims[0], dims[-1], highest, ms.family.form_kind)


def wedge2_form(form_matrix):
    """Induced form on Λ²V: ``F(a∧b, c∧d) = F(a,c)F(b,d) - F(a,d)F(b,c)``.

    Basis ``e_i ∧ e_j`` (i < j) in lexicographic order.
    """
    f = np.asarray(form_matrix, dtype=np.float64)
    pairs = list(combinations(range(f.shape[0]), 2))
    out = np.empty((len(pairs), len(pairs)))
    for a, (i, j) in enumerate(pairs):
        for b, (k, l) in enumerate(pairs):
            out[a, b] = f[i, k] * f[j, l] - f[i, l] * f[j, k]
    return out, pairs


def v0_gram(p, q):
    """Gram matrix of the invariant form on the zero-weight space of Λ²R^{p,q}.

    R^{p+q} carries :meth:`BilinearForm.split`: isotropic pairs ``(e_i, f_i)``
    of weights ``±ε_i`` and ``q - p`` definite vectors ``u_a`` of weight 0.
    The zero-weight basis is ``e_i ∧ f_i`` (i = 1..p) followed by
    ``u_a ∧ u_b`` (a < b).
    """
    fam = ModuleFamily("WedgeTwoOrth", p=p, q=q)
    n = p + q
    full, pairs = wedge2_form(BilinearForm.split(p, q).matrix)
    index = {pr: i for i, pr in enumerate(pairs)}
    basis = [index[(i, n - 1 - i)] for i in range(p)]
    basis += [index[(a, b)] for a, b in combinations(range(p, n - p), 2)]
    zero_mult = weight_multiset(fam).multiplicity(fam.root_system().weight([0] * p)) if p >= 2 else len(basis)
    assert zero_mult == len(basis)
    return full[np.ix_(basis, basis)]


def v0_signature(fam):
    """Signature of the invariant form restricted to V₀ for WedgeTwoOrth(p, q)."""
    if fam.tag != "WedgeTwoOrth":
        raise UnsupportedFamily("v0_signature is defined for WedgeTwoOrth(p, q)")
    if fam.q <= fam.p:
        raise UnsupportedFamily("v0_signature needs q > p")
    sig = signature_of(v0_gram(fam.p, fam.q))
    if sig[2]:
        raise DegenerateForm(f"V0 form has a {sig[2]}-dimensional kernel")
    return sig


def _perm_sign(seq):
    sign = 1
    seq = list(seq)
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def wedge_pairing_form(n):
    """The form ``v ⊗ w ↦ v ∧ w`` on Λⁿ R^{2n}, in the basis e_I (I lexicographic)."""
    subsets = list(combinations(range(2 * n), n))
    index = {s: i for i, s in enumerate(subsets)}
    f = np.zeros((len(subsets), len(subsets)))
    full = set(range(2 * n))
    for a, s in enumerate(subsets):
        comp = tuple(sorted(full - set(s)))
        f[a, index[comp]] = _perm_sign(s + comp)
    return f


@dataclass(frozen=True)
class SPhiSet:
    members: tuple
    highest_weight: lie.WeightVector
    root_system: lie.RootSystemData
    theta: tuple = field(default=())  # simple roots orthogonal to λ (1-based)

    def __contains__(self, w):
        return w.key in self._keys

    @property
    def _keys(self):
        return frozenset(w.key for w in self.members)

    def to_json(self):
        return {
            "root_system": self.root_system.label,
            "highest_weight": self.highest_weight.to_json(),
            "theta": list(self.theta),
            "size": len(self.members),
            "members": [list(w.word) for w in self.members],
        }


def s_phi(fam, rs=None):
    rs = rs or fam.root_system()
    ms = weight_multiset(fam)
    lam = split_by_order(ms, rs).highest_weight
    members = tuple(
        w for w in lie.weyl_enumerate(rs) if lie.weight_sign(rs, lie.act_on_weight(w, lam)) > 0
    )
    theta = tuple(j for j, a in enumerate(rs.simple_roots, start=1) if lam.dot(a) == 0)
    return SPhiSet(members, lam, rs, theta)


@dataclass(frozen=True)
class Certificate:
    holds: bool
    applicable: bool
    vcd: int
    w0_excluded: bool
    failing: tuple = ()
    reason: str = ""

    def to_json(self):
        return {
            "holds": self.holds,
            "applicable": self.applicable,
            "not_applicable": not self.applicable,
            "vcd": self.vcd,
            "w0_excluded": self.w0_excluded,
            "failing_simple_roots": list(self.failing),
            "reason": self.reason,
        }


def nonemptiness_certificate(sphi, rs=None, vcd=1):
    """Combinatorial sufficient condition for Ω ⊂ G/AN to be nonempty.

    vcd 1: ``w_0 ∉ S_φ``.  vcd 2: additionally ``w_0 s_α ∉ S_φ`` for every
    simple α.  Rank one with vcd 2 is reported as not applicable.
    """
    rs = rs or sphi.root_system
    if vcd not in (1, 2):
        raise UnsupportedFamily(f"vcd must be 1 or 2, got {vcd}")
    w0 = lie.longest_element(rs)
    w0_out = w0 not in sphi
    if vcd == 1:
        return Certificate(w0_out, True, 1, w0_out, (), "" if w0_out else "w0 in S_phi")
    if rs.rank < 2:
        return Certificate(False, False, 2, w0_out, (), "rank-one factor: the codimension branch is not decidable here")
    failing = tuple(
        j for j in range(1, rs.rank + 1) if w0.compose(lie.simple_reflection(rs, j)) in sphi
    )
    holds = w0_out and not failing
    return Certificate(holds, True, 2, w0_out, failing, "" if holds else "some w0*s_alpha in S_phi")
