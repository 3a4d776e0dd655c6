"""Incidence sets K_ξ in flag varieties and Monte-Carlo domain sampling.

For a finite limit-set sample A ⊂ F_i, a point x of the opposite variety
F_{1-i} lies in K_A when it is incident to some sampled point: the smaller
subspace is contained in the larger one.  Ω = F_{1-i} ∖ K_A is then sampled
by drawing random points.  Since the sample is finite, measured Ω fractions
are upper bounds that shrink as the word length L grows.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import ceil

import numpy as np

from .errors import InvalidParams, KindMismatch, MalformedFlag, ValidationError
from .numlin import (
    DEFAULT_TOL,
    BilinearForm,
    Subspace,
    form_perp,
    intersection_dim,
    is_isotropic,
    random_isotropic,
)

KINDS = ("IsotropicLine", "MaximalIsotropic", "PartialFlag", "FullFlag", "Line", "Hyperplane")
CHUNK = 1000  # trials per RNG stream


@dataclass(frozen=True, eq=False)
class FlagPoint:
    kind: str
    subspaces: tuple
    form: BilinearForm = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KindMismatch(f"unknown flag kind {self.kind!r}")
        subs = tuple(self.subspaces)
        if not subs:
            raise MalformedFlag("a flag needs at least one subspace")
        n = subs[0].ambient_dim
        if any(s.ambient_dim != n for s in subs):
            raise MalformedFlag("subspaces of a flag live in different dimensions")
        dims = [s.dim for s in subs]
        if any(b <= a for a, b in zip(dims, dims[1:])):
            raise MalformedFlag(f"flag dimensions {dims} are not strictly increasing")
        for a, b in zip(subs, subs[1:]):
            if intersection_dim(a, b) != a.dim:
                raise MalformedFlag("flag subspaces are not nested")
        if self.kind in ("IsotropicLine", "MaximalIsotropic"):
            if self.form is None:
                raise KindMismatch(f"{self.kind} needs a form")
            if not is_isotropic(subs[0], self.form):
                raise MalformedFlag(f"{self.kind} subspace is not isotropic")
            want = 1 if self.kind == "IsotropicLine" else self.form.witt_index
            if dims != [want]:
                raise MalformedFlag(f"{self.kind} must have dimension {want}, got {dims}")
        elif self.kind == "Line" and dims != [1]:
            raise MalformedFlag("Line must be one-dimensional")
        elif self.kind == "Hyperplane" and dims != [n - 1]:
            raise MalformedFlag("Hyperplane must have codimension one")
        elif self.kind == "FullFlag" and dims != list(range(1, n)):
            raise MalformedFlag(f"a full flag of R^{n} has dimensions 1..{n - 1}")
        elif self.kind == "PartialFlag" and len(dims) != 2:
            raise MalformedFlag("PartialFlag holds (F_k, F_{n-k})")
        object.__setattr__(self, "subspaces", subs)

    @property
    def ambient_dim(self):
        return self.subspaces[0].ambient_dim

    @property
    def space(self):
        """The single subspace of a one-step flag."""
        return self.subspaces[0]

    def apply(self, g):
        """Image under g.  Not re-validated: for long words the round-off in
        g·V can exceed the isotropy tolerance although g preserves the form."""
        out = object.__new__(FlagPoint)
        object.__setattr__(out, "kind", self.kind)
        object.__setattr__(out, "subspaces", tuple(s.apply(g) for s in self.subspaces))
        object.__setattr__(out, "form", self.form)
        return out

    def to_json(self):
        return {"kind": self.kind, "subspaces": [s.to_json() for s in self.subspaces]}

    @classmethod
    def standard(cls, n):
        return cls("FullFlag", tuple(Subspace.coordinate(n, range(k)) for k in range(1, n)))

    @classmethod
    def from_basis(cls, basis):
        """Full flag ``F_i = span(columns 1..i)`` of an invertible matrix."""
        b = np.asarray(basis, dtype=np.float64)
        return cls("FullFlag", tuple(Subspace.span(b[:, :k]) for k in range(1, b.shape[0])))


def _opposite_kind(kind, form):
    if form is None:
        return {"Line": "Hyperplane", "Hyperplane": "Line"}[kind]
    return {"IsotropicLine": "MaximalIsotropic", "MaximalIsotropic": "IsotropicLine"}[kind]


@dataclass(frozen=True, eq=False)
class LimitSetSampleRef:
    """A finite sample of a limit set in F_i (i = 0 lines, i = 1 the larger points)."""

    flag_type: int
    points: tuple
    form: BilinearForm = None
    words: tuple = ()
    L: int = None
    labels: tuple = None

    def __post_init__(self):
        if self.flag_type not in (0, 1):
            raise KindMismatch(f"flag type must be 0 or 1, got {self.flag_type}")
        pts = tuple(self.points)
        kinds = {p.kind for p in pts}
        if len(kinds) > 1:
            raise KindMismatch(f"sample mixes kinds {sorted(kinds)}")
        if pts and len({p.ambient_dim for p in pts}) > 1:
            raise KindMismatch("sample points live in different dimensions")
        object.__setattr__(self, "points", pts)

    @property
    def kind(self):
        if self.points:
            return self.points[0].kind
        if self.form is None:
            return ("Line", "Hyperplane")[self.flag_type]
        return ("IsotropicLine", "MaximalIsotropic")[self.flag_type]

    @property
    def opposite_kind(self):
        return _opposite_kind(self.kind, self.form)

    def __len__(self):
        return len(self.points)

    def bases(self):
        return np.array([p.space.basis for p in self.points])

    def apply(self, g):
        return LimitSetSampleRef(self.flag_type, tuple(p.apply(g) for p in self.points), self.form,
                                 self.words, self.L, self.labels)

    @classmethod
    def from_dynamics(cls, sample):
        """Wrap a :class:`anosov.dynamics.LimitSetSample`."""
        form = sample.form
        if form is None:
            kind, i = "Line", 0
        elif sample.flagtype == "line":
            kind, i = "IsotropicLine", 0
        else:
            kind, i = "MaximalIsotropic", 1
        pts = tuple(FlagPoint(kind, (p,), form) for p in sample.points)
        return cls(i, pts, form, sample.words, sample.L, sample.labels)

    def to_json(self):
        return {
            "flag_type": self.flag_type,
            "kind": self.kind,
            "L": self.L,
            "size": len(self.points),
            "points": [p.to_json() for p in self.points],
        }


# ---------------------------------------------------------------------------
# Membership
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Membership:
    member: bool
    witness: object = None
    detail: dict = field(default_factory=dict)

    def __bool__(self):
        return self.member


def _incident(small, large, tol):
    return intersection_dim(small, large, tol) == small.dim


def _incidence_counts(xs, ys, tol):
    """Boolean (len(xs), len(ys)) matrix: is the smaller of x, y inside the larger?

    ``xs`` and ``ys`` are stacks of orthonormal bases.  Incidence holds when
    every principal cosine exceeds ``1 - tol``; for a line this is the norm
    of its projection.
    """
    a, b = xs.shape[2], ys.shape[2]
    if a > b:
        return _incidence_counts(ys, xs, tol).T
    prod = np.einsum("tna,mnb->tmab", xs, ys)
    if a == 1:
        cos = np.linalg.norm(prod[:, :, 0, :], axis=2)
    else:
        cos = np.linalg.svd(prod, compute_uv=False)[..., -1]
    return cos > 1.0 - tol


def k_membership(x, sample, tol=DEFAULT_TOL):
    """Is ``x`` incident to some sampled limit point?  Witness is the first index."""
    if x.kind != sample.opposite_kind:
        raise KindMismatch(f"sample of {sample.kind} points needs a {sample.opposite_kind} query, got {x.kind}")
    if sample.points and x.ambient_dim != sample.points[0].ambient_dim:
        raise KindMismatch("query and sample live in different dimensions")
    if not sample.points:
        return Membership(False)
    hits = np.flatnonzero(_incidence_counts(x.space.basis[None], sample.bases(), tol)[0])
    if hits.size == 0:
        return Membership(False)
    return Membership(True, int(hits[0]), {"count": int(hits.size)})


def random_point(kind, n, rng, form=None):
    """A random point of the given one-step flag variety.

    Lines and hyperplanes: Gaussian vectors (uniform on projective space).
    Isotropic kinds: :func:`anosov.numlin.random_isotropic`.
    """
    if kind == "Line":
        return FlagPoint(kind, (Subspace.span(rng.standard_normal(n)),))
    if kind == "Hyperplane":
        return FlagPoint(kind, (Subspace.span(rng.standard_normal(n)).complement(),))
    dim = 1 if kind == "IsotropicLine" else form.witt_index
    return FlagPoint(kind, (random_isotropic(form, dim, rng),), form)


def incident_point(kind, point, rng, form=None):
    """A random point of ``kind`` incident to the sample point ``point``."""
    sub = point.space
    n = sub.ambient_dim
    if kind == "Hyperplane":  # hyperplane through a line
        normal = sub.complement().basis @ rng.standard_normal(n - 1)
        return FlagPoint(kind, (Subspace.span(normal).complement(),))
    if kind == "Line":  # line inside a hyperplane
        return FlagPoint(kind, (Subspace.span(sub.basis @ rng.standard_normal(sub.dim)),))
    if kind == "MaximalIsotropic":
        big = random_isotropic(form, form.witt_index, rng, containing=sub)
        # keep the sample vectors as literal columns so incidence is exact
        rest = big.basis - sub.basis @ (sub.basis.T @ big.basis)
        u = np.linalg.svd(rest, full_matrices=False)[0]
        basis = np.column_stack([sub.basis, u[:, : big.dim - sub.dim]])
        return FlagPoint(kind, (Subspace(basis),), form)
    return FlagPoint(kind, (Subspace.span(sub.basis @ rng.standard_normal(sub.dim)),), form)


@dataclass(frozen=True)
class DomainSampleReport:
    trials: int
    hits: int
    seed: int
    sample_size: int
    L: int
    example_member: FlagPoint = None
    example_non_member: FlagPoint = None
    member_constructed: bool = False

    @property
    def fraction(self):
        return self.hits / self.trials

    def to_json(self):
        return {
            "trials": self.trials,
            "hits": self.hits,
            "fraction": self.fraction,
            "seed": self.seed,
            "sample_size": self.sample_size,
            "L": self.L,
            "example_member": self.example_member.to_json() if self.example_member else None,
            "example_member_constructed": self.member_constructed,
            "example_non_member": self.example_non_member.to_json() if self.example_non_member else None,
        }

    def csv_rows(self):
        return [["trials", "hits", "fraction", "seed", "sample_size", "L"],
                [self.trials, self.hits, self.fraction, self.seed, self.sample_size, self.L]]


def _run_chunk(sample, kind, n, count, seed_seq, tol):
    rng = np.random.default_rng(seed_seq)
    pts = [random_point(kind, n, rng, sample.form) for _ in range(count)]
    if sample.points:
        inc = _incidence_counts(np.array([p.space.basis for p in pts]), sample.bases(), tol).any(axis=1)
    else:
        inc = np.zeros(count, dtype=bool)
    return pts, inc


def domain_sample(sample, trials, seed, tol=DEFAULT_TOL, threads=1, n=None):
    """Fraction of random points of F_{1-i} that avoid K_A (i.e. lie in Ω).

    Trials are split into streams of 1000 with independent child seeds of
    ``seed``, so the result does not depend on ``threads``.
    """
    if trials < 1:
        raise InvalidParams("trials must be >= 1")
    if sample.points:
        n = sample.points[0].ambient_dim
    elif n is None:
        n = sample.form.n if sample.form is not None else None
    if n is None:
        raise InvalidParams("empty sample without a form needs the ambient dimension n")
    kind = sample.opposite_kind
    sizes = [min(CHUNK, trials - s) for s in range(0, trials, CHUNK)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        results = list(pool.map(lambda a: _run_chunk(sample, kind, n, a[0], a[1], tol), zip(sizes, seeds)))
    hits, member, non_member = 0, None, None
    for pts, inc in results:
        hits += int(np.sum(~inc))
        for p, flag in zip(pts, inc):
            if flag and member is None:
                member = p
            if not flag and non_member is None:
                non_member = p
    constructed = False
    if member is None and sample.points:
        rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(len(sizes) + 1)[-1])
        member = incident_point(kind, sample.points[0], rng, sample.form)
        constructed = True
    return DomainSampleReport(trials, hits, int(seed), len(sample), sample.L, member, non_member, constructed)


@dataclass(frozen=True)
class EquivarianceReport:
    checked: int
    base_member: bool
    violations: tuple  # words whose pushed query disagrees

    @property
    def ok(self):
        return not self.violations

    def to_json(self, labels=None):
        return {
            "checked": self.checked,
            "base_member": self.base_member,
            "violations": [w.label(labels) for w in self.violations],
        }


def _frac_matrix(a):
    return [[Fraction(float(v)) for v in row] for row in np.atleast_2d(a)]


def _frac_mul(a, b):
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in zip(*b)] for row in a]


def _frac_inv(a):
    n = len(a)
    m = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for c in range(n):
        piv = next(r for r in range(c, n) if m[r][c] != 0)
        m[c], m[piv] = m[piv], m[c]
        p = m[c][c]
        m[c] = [v / p for v in m[c]]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c]
                m[r] = [v - f * w for v, w in zip(m[r], m[c])]
    return [row[n:] for row in m]


def _frac_rank(cols):
    """Rank of the matrix whose columns are ``cols`` (lists of Fractions)."""
    rows = [list(r) for r in zip(*cols)]
    rank = 0
    for c in range(len(cols)):
        piv = next((r for r in range(rank, len(rows)) if rows[r][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for r in range(rank + 1, len(rows)):
            if rows[r][c] != 0:
                f = rows[r][c] / rows[rank][c]
                rows[r] = [v - f * w for v, w in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def _exact_member(x_cols, sample_cols):
    """Exact incidence of a point with any sample point (columns as Fractions)."""
    for cols in sample_cols:
        small, large = (x_cols, cols) if len(x_cols) <= len(cols) else (cols, x_cols)
        if _frac_rank(large + small) == _frac_rank(large):
            return True
    return False


def _exact_cols(g, basis):
    cols = [list(c) for c in zip(*_frac_matrix(basis))]
    if g is None:
        return cols
    return [list(c) for c in zip(*_frac_mul(g, [list(r) for r in zip(*cols)]))]


def equivariance_check(sample, rep, x, words, pushed=True, tol=DEFAULT_TOL, exact=True):
    """Compare ``x ∈ K_A`` with ``ρ(w)x ∈ K_{ρ(w)A}`` (or ``K_A`` if not pushed).

    With ``exact`` the generators and bases are read as exact rationals and
    incidence is a rank test, so the comparison is invariant by construction
    and any violation is an implementation error or (unpushed) truncation.
    The floating path compares at ``tol``; strongly contracting words squeeze
    everything below any fixed tolerance, so it reports spurious violations.
    """
    k_membership(x, sample, tol)  # kind check
    bad = []
    if not exact:
        base = bool(k_membership(x, sample, tol))
        for w in words:
            g = rep.evaluate(w)
            g = g / np.abs(g).max()
            target = sample.apply(g) if pushed else sample
            if bool(k_membership(x.apply(g), target, tol)) != base:
                bad.append(w)
        return EquivarianceReport(len(words), base, tuple(bad))

    letters = []
    for gen in rep.generators:
        f = _frac_matrix(gen)
        letters.extend([f, _frac_inv(f)])
    xb = x.space.basis
    sb = sample.bases()
    base = _exact_member(_exact_cols(None, xb), [_exact_cols(None, b) for b in sb])
    plain = [_exact_cols(None, b) for b in sb]
    for w in words:
        g = None
        for code in w.codes():
            g = letters[code] if g is None else _frac_mul(g, letters[code])
        if g is None:
            continue
        target = [_exact_cols(g, b) for b in sb] if pushed else plain
        if _exact_member(_exact_cols(g, xb), target) != base:
            bad.append(w)
    return EquivarianceReport(len(words), base, tuple(bad))


# ---------------------------------------------------------------------------
# SL(n) incidence tests
# ---------------------------------------------------------------------------

def sln_K_Ad_membership(x, xi, tol=DEFAULT_TOL):
    """``∃ k: F_1 ⊂ ξ_k ⊂ F_{n-1}`` for x = (F_1, F_{n-1}) and a full flag ξ."""
    if x.kind != "PartialFlag" or [s.dim for s in x.subspaces] != [1, x.ambient_dim - 1]:
        raise KindMismatch("x must be a PartialFlag(1, n-1)")
    if xi.kind != "FullFlag" or xi.ambient_dim != x.ambient_dim:
        raise KindMismatch("xi must be a full flag of the same dimension")
    line, hyper = x.subspaces
    for k, sub in enumerate(xi.subspaces, start=1):
        if _incident(line, sub, tol) and _incident(sub, hyper, tol):
            return Membership(True, k)
    return Membership(False)


def lex_sequences(flag, xi_k, xi_nk, tol=DEFAULT_TOL):
    """``I`` and ``J`` of the lexicographic test, from intersection dimensions.

    ``i_l = min{i | dim F_i ∩ ξ_k = l}`` and
    ``j_l = max{j | dim(F_j + ξ_{n-k}) = n-k-1+l}``, using
    ``dim(F_j + ξ) = j + n - k - dim(F_j ∩ ξ)``.
    """
    n = flag.ambient_dim
    k = xi_k.dim
    if flag.kind != "FullFlag":
        raise KindMismatch("flag must be a FullFlag")
    if xi_nk.dim != n - k or xi_k.ambient_dim != n or xi_nk.ambient_dim != n:
        raise ValidationError(f"need dim ξ_k = k and dim ξ_(n-k) = n-k in R^{n}")
    if not 1 <= k <= n - k:
        raise ValidationError(f"need 1 <= k <= n/2, got k = {k}")
    if intersection_dim(xi_k, xi_nk, tol) != k:
        raise ValidationError("ξ_k must be contained in ξ_(n-k)")
    levels = list(flag.subspaces) + [Subspace(np.eye(n))]
    cap = [intersection_dim(f, xi_k, tol) for f in levels]
    sums = [j + n - k - intersection_dim(f, xi_nk, tol) for j, f in enumerate(levels, start=1)]
    dims = [0] + cap
    if any(b - a not in (0, 1) for a, b in zip(dims, dims[1:])) or cap[-1] != k:
        raise MalformedFlag(f"intersection dimensions {cap} are not a valid Schubert sequence")
    sums0 = [n - k] + sums
    if any(b - a not in (0, 1) for a, b in zip(sums0, sums0[1:])) or sums[-1] != n:
        raise MalformedFlag(f"sum dimensions {sums} are not a valid Schubert sequence")
    seq_i = tuple(min(i for i, c in enumerate(cap, start=1) if c == l) for l in range(1, k + 1))
    seq_j = tuple(max((j for j, s in enumerate(sums0) if s == n - k - 1 + l), default=0) for l in range(1, k + 1))
    if any(b <= a for a, b in zip(seq_i, seq_i[1:])):
        raise MalformedFlag(f"sequence {seq_i} is not strictly increasing")
    return seq_i, seq_j


def sln_Kprime_k_membership(flag, xi_k, xi_nk, tol=DEFAULT_TOL):
    """Is the full flag in ``{F | ∃ I: Λ^k ξ_k ⊂ F_I ⊂ (Λ^k ξ_{n-k}^⊥)^⊥}``?

    ``F_I`` increases with I, so membership means the smallest I with
    ``Λ^k ξ_k ⊂ F_I`` (that is, I = (i_l)) still has ``F_I`` inside the
    hyperplane.  The first basis k-vector leaving the hyperplane has index
    ``B = (j_l + 1)``, giving the test ``I <_lex B``.
    """
    seq_i, seq_j = lex_sequences(flag, xi_k, xi_nk, tol)
    seq_b = tuple(j + 1 for j in seq_j)
    return Membership(seq_i < seq_b, None, {"I": list(seq_i), "J": list(seq_j), "B": list(seq_b)})


def grassmannian_membership(P, lines, tol=DEFAULT_TOL):
    """Does some sampled line lie in the n-dimensional subspace P of R^{2n}?"""
    if P.ambient_dim != 2 * P.dim:
        raise KindMismatch("P must be an n-dimensional subspace of R^(2n)")
    for idx, line in enumerate(lines):
        if line.dim != 1 or line.ambient_dim != P.ambient_dim:
            raise KindMismatch("samples must be lines in the same space")
        if _incident(line, P, tol):
            return Membership(True, idx)
    return Membership(False)


# ---------------------------------------------------------------------------
# Codimension arithmetic
# ---------------------------------------------------------------------------

GROUP_FAMILIES = ("Opq", "Upq", "Sppq", "OC", "SpR", "SpC", "SOstar")


def codim_delta(family, vcd, p=None, q=None, n=None, m=None):
    """Lower bound δ on the codimension of K_ξ minus the boundary dimension.

    ``Opq/Upq/Sppq(p, q)``: q, 2q, 4q minus vcd.  ``OC(m)`` (m = 2n or 2n-1):
    2n - vcd.  ``SpR(2n)``: n + 1 - vcd.  ``SpC(2n)``: 2n + 2 - vcd.
    ``SOstar(2n)``: 4n - 2 - vcd.  ``n`` is half the matrix size for the
    even-dimensional families.
    """
    if vcd is None or int(vcd) < 1:
        raise InvalidParams("vcd must be >= 1")
    vcd = int(vcd)
    if family in ("Opq", "Upq", "Sppq"):
        if p is None or q is None or not 1 <= p <= q:
            raise InvalidParams(f"{family} needs 1 <= p <= q")
        return {"Opq": 1, "Upq": 2, "Sppq": 4}[family] * q - vcd
    if family == "OC":
        if m is None or m < 1:
            raise InvalidParams("OC needs m >= 1")
        return 2 * ceil(m / 2) - vcd
    if family in ("SpR", "SpC", "SOstar"):
        if n is None or n < 1:
            raise InvalidParams(f"{family} needs n >= 1 (matrix size 2n)")
        return {"SpR": n + 1, "SpC": 2 * n + 2, "SOstar": 4 * n - 2}[family] - vcd
    raise InvalidParams(f"unknown group family {family!r}; expected one of {GROUP_FAMILIES}")


def schubert_codim_min(n, k):
    """Minimum of ``n-k + (k-1)(s-1) + k(u-s)`` over 1 <= s <= u <= n-1."""
    if not (1 <= k and 2 * k <= n):
        raise InvalidParams(f"need 1 <= k <= n/2, got n={n}, k={k}")
    best = None
    for s in range(1, n):
        for u in range(s, n):
            val = n - k + (k - 1) * (s - 1) + k * (u - s)
            if best is None or val < best[0]:
                best = (val, (s, u))
    return best


def coordinate_pairs(n, k):
    """All coordinate pairs ``S ⊂ T`` with |S| = k, |T| = n - k (0-based tuples)."""
    for t in combinations(range(n), n - k):
        for s in combinations(t, k):
            yield s, t
