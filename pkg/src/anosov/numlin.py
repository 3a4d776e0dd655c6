"""Numerical linear algebra kernel.

Decompositions of group elements (Cartan and Jordan projections), subspace
arithmetic through principal angles, and bilinear-form aware operations
(form-orthogonal complements, transversality, signatures).

Group elements that are long products of generators are badly conditioned
(condition numbers of 1e40 are routine), and a plain SVD of the product
matrix only resolves singular values down to ``eps * sigma_1``.  The
:class:`CompoundProduct` representation avoids that loss: it carries every
exterior power ``Λ^k g`` separately, and since ``σ_1 ··· σ_k = ||Λ^k g||``
each Cartan coordinate is recovered from top singular values alone, which
are always computed to full relative precision.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateForm,
    DimensionMismatch,
    NonconvergentEigen,
    SingularInput,
    ValidationError,
)

DEFAULT_TOL = 1e-8
_SINGULAR_FLOOR = 1e-300
_EIG_RESIDUAL = 1e-9


def as_square(g, name="matrix"):
    a = np.array(g, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionMismatch(f"{name} must be a nonempty square 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


def compound_matrix(g, k):
    """k-th exterior power of ``g`` in the lexicographic basis of k-subsets."""
    g = as_square(g)
    n = g.shape[0]
    if not 1 <= k <= n:
        raise DimensionMismatch(f"exterior degree {k} outside 1..{n}")
    if k == 1:
        return g.copy()
    subsets = list(combinations(range(n), k))
    out = np.empty((len(subsets), len(subsets)))
    for a, rows in enumerate(subsets):
        sub = g[rows, :]
        for b, cols in enumerate(subsets):
            out[a, b] = np.linalg.det(sub[:, cols])
    return out


class CompoundProduct:
    """A matrix held through its normalized exterior powers.

    ``mats[k-1]`` is ``Λ^k g / exp(logs[k-1])`` for ``k = 1..n-1`` and
    ``logdet`` is ``log|det g|``.  Multiplication and powers act degree by
    degree, so no cancellation ever happens between huge and tiny singular
    directions.
    """

    __slots__ = ("n", "mats", "logs", "logdet")

    def __init__(self, n, mats, logs, logdet):
        self.n = n
        self.mats = mats
        self.logs = np.asarray(logs, dtype=np.float64)
        self.logdet = float(logdet)

    @classmethod
    def from_matrix(cls, g):
        g = as_square(g)
        n = g.shape[0]
        _, logdet = np.linalg.slogdet(g)
        if not np.isfinite(logdet):
            raise SingularInput("matrix is singular")
        mats, logs = [], []
        for k in range(1, n):
            c = compound_matrix(g, k)
            s = np.abs(c).max()
            mats.append(c / s)
            logs.append(np.log(s))
        return cls(n, mats, logs, logdet)

    @classmethod
    def identity(cls, n):
        mats = [np.eye(len(list(combinations(range(n), k)))) for k in range(1, n)]
        return cls(n, mats, np.zeros(n - 1), 0.0)

    def __matmul__(self, other):
        if other.n != self.n:
            raise DimensionMismatch("compound products of different dimensions")
        mats, logs = [], []
        for a, b, la, lb in zip(self.mats, other.mats, self.logs, other.logs):
            c = a @ b
            s = np.abs(c).max()
            mats.append(c / s)
            logs.append(la + lb + np.log(s))
        return CompoundProduct(self.n, mats, logs, self.logdet + other.logdet)

    def power(self, m):
        """``g^m`` for ``m >= 0`` by repeated squaring."""
        if m < 0:
            raise ValidationError("negative powers need the inverse element")
        result = CompoundProduct.identity(self.n)
        base = self
        while m:
            if m & 1:
                result = result @ base
            m >>= 1
            if m:
                base = base @ base
        return result

    def matrix(self):
        """Normalized first exterior power (``g`` up to a positive scalar)."""
        if self.n == 1:
            return np.ones((1, 1))
        return self.mats[0]

    def log_norms(self):
        """``log ||Λ^k g||`` for k = 0..n."""
        tops = [np.log(np.linalg.norm(m, 2)) for m in self.mats]
        return np.concatenate([[0.0], np.asarray(tops) + self.logs, [self.logdet]])

    def log_spectral_radii(self):
        """``log |λ_1 ··· λ_k|`` for k = 0..n."""
        tops = [np.log(np.max(np.abs(np.linalg.eigvals(m)))) for m in self.mats]
        return np.concatenate([[0.0], np.asarray(tops) + self.logs, [self.logdet]])

    def cartan(self):
        return np.diff(self.log_norms())

    def jordan(self):
        return np.diff(self.log_spectral_radii())


def cartan_projection(g):
    """Sorted logarithms of the singular values of ``g``.

    ``g`` may be a square array or a :class:`CompoundProduct`; the latter
    stays accurate for products whose condition number exceeds 1/eps.
    """
    if isinstance(g, CompoundProduct):
        return g.cartan()
    g = as_square(g)
    s = np.linalg.svd(g, compute_uv=False)
    if s[-1] < _SINGULAR_FLOOR:
        raise SingularInput(f"smallest singular value {s[-1]:.3e} below {_SINGULAR_FLOOR}")
    return np.log(s)


def jordan_projection(g):
    """Sorted logarithms of the eigenvalue moduli of ``g``."""
    if isinstance(g, CompoundProduct):
        return g.jordan()
    g = as_square(g)
    s = np.linalg.svd(g, compute_uv=False)
    if s[-1] < _SINGULAR_FLOOR:
        raise SingularInput(f"smallest singular value {s[-1]:.3e} below {_SINGULAR_FLOOR}")
    w, v = np.linalg.eig(g)
    resid = np.linalg.norm(g @ v - v * w, axis=0) / np.linalg.norm(v, axis=0)
    if np.max(resid) > _EIG_RESIDUAL * max(1.0, s[0]):
        raise NonconvergentEigen(f"eigenpair residual {np.max(resid):.3e}")
    return np.sort(np.log(np.abs(w)))[::-1]


# ---------------------------------------------------------------------------
# Subspaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Subspace:
    """A linear subspace of R^n stored by an orthonormal basis (n x k).

    ``k = 0`` denotes the zero subspace.
    """

    basis: np.ndarray

    def __post_init__(self):
        b = np.array(self.basis, dtype=np.float64)
        if b.ndim != 2:
            raise DimensionMismatch("subspace basis must be 2-D")
        if not np.all(np.isfinite(b)):
            raise ValidationError("subspace basis has non-finite entries")
        if b.shape[1] and np.max(np.abs(b.T @ b - np.eye(b.shape[1]))) > 1e-10:
            raise ValidationError("subspace basis is not orthonormal; use Subspace.span")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def span(cls, vectors, tol=DEFAULT_TOL):
        """Orthonormalized span of the columns of ``vectors`` (rank-revealing)."""
        v = np.array(vectors, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[1] == 0:
            return cls.zero(v.shape[0])
        u, s, _ = np.linalg.svd(v, full_matrices=False)
        if s[0] == 0.0:
            return cls.zero(v.shape[0])
        rank = int(np.sum(s > tol * s[0]))
        return cls(u[:, :rank])

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((n, 0)))

    @classmethod
    def coordinate(cls, n, indices):
        """Span of the standard basis vectors ``e_i`` (0-based indices)."""
        b = np.zeros((n, len(indices)))
        for col, i in enumerate(indices):
            b[i, col] = 1.0
        return cls(b)

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    @property
    def dim(self):
        return self.basis.shape[1]

    def projector(self):
        return self.basis @ self.basis.T

    def complement(self):
        """Euclidean orthogonal complement."""
        if self.dim == 0:
            return Subspace(np.eye(self.ambient_dim))
        return Subspace(scipy.linalg.null_space(self.basis.T))

    def apply(self, g):
        """Image of the subspace under the linear map ``g``."""
        return Subspace.span(np.asarray(g) @ self.basis)

    def to_json(self):
        return {"ambient_dim": self.ambient_dim, "basis": self.basis.T.tolist()}

    @classmethod
    def from_json(cls, obj):
        rows = np.array(obj["basis"], dtype=np.float64).reshape(-1, obj["ambient_dim"])
        return cls.span(rows.T)


def _check_pair(a, b):
    if a.ambient_dim != b.ambient_dim:
        raise DimensionMismatch(f"ambient dimensions differ: {a.ambient_dim} vs {b.ambient_dim}")


def principal_cosines(a, b):
    """Cosines of the principal angles between ``a`` and ``b``, descending."""
    _check_pair(a, b)
    if a.dim == 0 or b.dim == 0:
        return np.zeros(0)
    return np.clip(np.linalg.svd(a.basis.T @ b.basis, compute_uv=False), 0.0, 1.0)


def principal_sines(a, b):
    """Sines of the principal angles, ascending (min(dim a, dim b) values).

    Computed from ``(I - P_b) a`` so small angles keep full precision.
    """
    _check_pair(a, b)
    if a.dim > b.dim:
        a, b = b, a
    if a.dim == 0:
        return np.zeros(0)
    resid = a.basis - b.basis @ (b.basis.T @ a.basis)
    return np.sort(np.linalg.svd(resid, compute_uv=False))


def intersection_dim(a, b, tol=DEFAULT_TOL):
    """Dimension of ``a ∩ b``: principal angles with cosine above ``1 - tol``."""
    if not 0.0 < tol < 1.0:
        raise ValidationError(f"tol must lie in (0, 1), got {tol}")
    return int(np.sum(principal_cosines(a, b) > 1.0 - tol))


def distance(a, b):
    """Largest principal-angle sine between equal-dimensional subspaces.

    For lines this is the usual sine of the angle; in general it equals
    ``||P_a - P_b||_2``, a metric on the Grassmannian.
    """
    if a.dim != b.dim:
        raise DimensionMismatch(f"distance needs equal dimensions, got {a.dim} and {b.dim}")
    s = principal_sines(a, b)
    return float(s[-1]) if s.size else 0.0


def gap_to(a, b):
    """Smallest principal-angle sine from ``a`` to ``b`` (0 iff they meet)."""
    s = principal_sines(a, b)
    return float(s[0]) if s.size else 1.0


# ---------------------------------------------------------------------------
# Bilinear forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BilinearForm:
    """A nondegenerate symmetric or antisymmetric bilinear form on R^n."""

    matrix: np.ndarray
    kind: str = None

    def __post_init__(self):
        m = as_square(self.matrix, "form")
        if np.max(np.abs(m - m.T)) <= 1e-12:
            kind = "symmetric"
        elif np.max(np.abs(m + m.T)) <= 1e-12:
            kind = "antisymmetric"
        else:
            raise ValidationError("form is neither symmetric nor antisymmetric to 1e-12")
        if self.kind is not None and self.kind != kind:
            raise ValidationError(f"form declared {self.kind} but is {kind}")
        s = np.linalg.svd(m, compute_uv=False)
        if s[-1] <= 1e-8 * s[0]:
            raise DegenerateForm(f"form is degenerate (singular values {s[0]:.3e} .. {s[-1]:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "kind", kind)

    @classmethod
    def split(cls, p, q):
        """Signature (p, q) form, p <= q, in a hyperbolic basis.

        ``F(e_i, e_{n+1-i}) = 1`` for ``i <= p`` and ``-1`` on the middle
        ``q - p`` basis vectors, so ``span(e_1..e_p)`` is maximal isotropic.
        """
        if not 0 <= p <= q:
            raise ValidationError(f"split form needs 0 <= p <= q, got ({p}, {q})")
        n = p + q
        m = np.zeros((n, n))
        for i in range(p):
            m[i, n - 1 - i] = m[n - 1 - i, i] = 1.0
        for i in range(p, n - p):
            m[i, i] = -1.0
        return cls(m)

    @classmethod
    def diagonal(cls, p, q):
        return cls(np.diag([1.0] * p + [-1.0] * q))

    @classmethod
    def symplectic(cls, n):
        """Standard symplectic form on R^{2n}: ``ω(e_i, e_{n+i}) = 1``."""
        m = np.zeros((2 * n, 2 * n))
        m[:n, n:] = np.eye(n)
        m[n:, :n] = -np.eye(n)
        return cls(m)

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def signature(self):
        """``(p, q)`` for symmetric forms, ``None`` for antisymmetric ones."""
        if self.kind != "symmetric":
            return None
        p, q, _ = signature_of(self.matrix)
        return p, q

    @property
    def witt_index(self):
        if self.kind == "antisymmetric":
            return self.n // 2
        return min(self.signature)

    def __call__(self, u, v):
        return np.asarray(u).T @ self.matrix @ np.asarray(v)

    def canonical_frame(self):
        """Columns ``C`` with ``C^T F C`` in normal form.

        Symmetric: ``diag(I_p, -I_q)``.  Antisymmetric: ``[[0, I], [-I, 0]]``.
        """
        if self.kind == "symmetric":
            w, q = np.linalg.eigh(self.matrix)
            order = np.concatenate([np.flatnonzero(w > 0)[::-1], np.flatnonzero(w < 0)])
            return q[:, order] / np.sqrt(np.abs(w[order]))
        t, z = scipy.linalg.schur(self.matrix, output="real")
        es, fs = [], []
        i = 0
        while i < self.n:
            b = t[i, i + 1]
            scale = np.sqrt(abs(b))
            es.append(z[:, i] / scale)
            fs.append(np.sign(b) * z[:, i + 1] / scale)
            i += 2
        return np.column_stack(es + fs)

    def to_json(self):
        return self.matrix.tolist()


def is_isotropic(p, form, tol=DEFAULT_TOL):
    if p.ambient_dim != form.n:
        raise DimensionMismatch("subspace and form live in different dimensions")
    if p.dim == 0:
        return True
    return bool(np.max(np.abs(p.basis.T @ form.matrix @ p.basis)) <= tol)


def form_perp(p, form):
    """F-orthogonal complement ``{v | F(p, v) = 0 for all p in P}``."""
    if p.ambient_dim != form.n:
        raise DimensionMismatch("subspace and form live in different dimensions")
    if p.dim == 0:
        return Subspace(np.eye(form.n))
    if p.dim == form.n:
        return Subspace.zero(form.n)
    return Subspace(scipy.linalg.null_space(p.basis.T @ form.matrix))


def is_transverse(p, q, form, tol=DEFAULT_TOL):
    """``P ∩ Q^{⊥F} = 0`` for isotropic subspaces of equal dimension."""
    if p.dim != q.dim:
        raise DimensionMismatch(f"transversality needs equal dimensions, got {p.dim} and {q.dim}")
    return intersection_dim(p, form_perp(q, form), tol) == 0


def signature_of(s):
    """``(positive, negative, null)`` eigenvalue counts of a symmetric matrix.

    Eigenvalues within ``1e-8 * ||S||`` of zero count as null.
    """
    s = as_square(s)
    if np.max(np.abs(s - s.T)) > 1e-10:
        raise ValidationError("signature_of needs a symmetric matrix (to 1e-10)")
    w = np.linalg.eigvalsh((s + s.T) / 2)
    thr = 1e-8 * np.max(np.abs(w)) if w.size else 0.0
    return int(np.sum(w > thr)), int(np.sum(w < -thr)), int(np.sum(np.abs(w) <= thr))


def random_isotropic(form, dim, rng, containing=None):
    """A random ``dim``-dimensional isotropic subspace, by iterated extension.

    Starting from ``containing`` (or 0), take the Euclidean complement M of
    the current subspace U inside ``U^{⊥F}``; the form restricted to M is
    nondegenerate, and a random null vector of it extends U.  Symmetric
    forms: ``x + y`` with x, y drawn uniformly on the unit spheres of the
    positive and negative eigenspaces (eigenvector coordinates rescaled so
    the two parts have equal form-length).  Antisymmetric forms: any
    Gaussian vector of M.  The resulting law has a smooth positive density
    against the invariant measure but is not invariant itself.
    """
    if not 0 <= dim <= form.witt_index:
        raise DimensionMismatch(f"isotropic dimension {dim} outside 0..{form.witt_index}")
    u = Subspace.zero(form.n) if containing is None else containing
    if u.ambient_dim != form.n or not is_isotropic(u, form) or u.dim > dim:
        raise ValidationError("containing subspace must be isotropic of dimension <= dim")
    while u.dim < dim:
        perp = form_perp(u, form)
        m = perp.basis
        if u.dim:
            m = m @ scipy.linalg.null_space(u.basis.T @ m)
        gram = m.T @ form.matrix @ m
        if form.kind == "antisymmetric":
            v = m @ rng.standard_normal(m.shape[1])
        else:
            w, q = np.linalg.eigh((gram + gram.T) / 2)
            pos, neg = w > 0, w < 0
            c = rng.standard_normal(int(pos.sum()))
            d = rng.standard_normal(int(neg.sum()))
            c /= np.linalg.norm(c)
            d /= np.linalg.norm(d)
            coeff = q[:, pos] @ (c / np.sqrt(w[pos])) + q[:, neg] @ (d / np.sqrt(-w[neg]))
            v = m @ coeff
        u = Subspace.span(np.column_stack([u.basis, v]))
    return u
