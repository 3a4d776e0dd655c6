"""Dynamics of finitely generated matrix groups at desk scale.

The group is always a free group F_k on the given generators; every element
is a reduced word.  Words are scanned degree by degree in length-then-lex
order, each level extending the previous one by one letter on the right.
Products are carried as normalized exterior-power stacks (see
:class:`anosov.numlin.CompoundProduct`) so Cartan projections of long words
stay accurate.
"""

import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from itertools import combinations

import numpy as np
import scipy.linalg
import scipy.optimize

from . import _kernels
from .errors import (
    EmptySample,
    NoPairs,
    NotProximal,
    PingPongFailed,
    TooLarge,
    ValidationError,
)
from .numlin import (
    BilinearForm,
    CompoundProduct,
    Subspace,
    as_square,
    compound_matrix,
    distance,
    form_perp,
    gap_to,
    is_isotropic,
    random_isotropic,
)

WORD_CAP = 10**7
SLOPE_MIN = 0.05
DEDUP_RADIUS = 1e-6
SEP_DEFAULT = 0.05
PING_PONG_RADIUS = 0.1
GAP_MIN = 1e-6
FAMILIES = ("SLnR", "SpR", "Opq")

# -discriminant of a x^2 + b xy + c y^2, preserved by Sym^2 of SL(2, R); signature (1, 2)
ADJOINT_FORM = np.array([[0.0, 0.0, 2.0], [0.0, -1.0, 0.0], [2.0, 0.0, 0.0]])


# ---------------------------------------------------------------------------
# Representations
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RepresentationSpec:
    """Images of the free generators, with the ambient group family."""

    generators: tuple
    family: str = "SLnR"
    form: BilinearForm = None
    labels: tuple = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        gens = tuple(as_square(g, "generator") for g in self.generators)
        if not gens:
            raise ValidationError("a representation needs at least one generator")
        n = gens[0].shape[0]
        if any(g.shape != (n, n) for g in gens):
            raise ValidationError("generators have different sizes")
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        labels = self.labels or tuple(_default_label(i) for i in range(len(gens)))
        if len(labels) != len(gens) or len(set(labels)) != len(labels):
            raise ValidationError("labels must be distinct, one per generator")
        form = self.form
        if form is not None and not isinstance(form, BilinearForm):
            form = BilinearForm(form)
        if self.family == "SLnR":
            for lab, g in zip(labels, gens):
                if abs(abs(np.linalg.det(g)) - 1.0) > 1e-6:
                    raise ValidationError(f"generator {lab}: |det| = {abs(np.linalg.det(g)):.9g} != 1")
        else:
            want = "antisymmetric" if self.family == "SpR" else "symmetric"
            if form is None or form.kind != want:
                raise ValidationError(f"{self.family} needs a {want} form")
        if form is not None:
            if form.n != n:
                raise ValidationError("form and generators have different sizes")
            for lab, g in zip(labels, gens):
                err = np.max(np.abs(g.T @ form.matrix @ g - form.matrix))
                if err > 1e-8 * max(1.0, np.linalg.norm(g, 2) ** 2):
                    raise ValidationError(f"generator {lab} does not preserve the form (error {err:.3e})")
        for g in gens:
            g.setflags(write=False)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "labels", tuple(labels))
        object.__setattr__(self, "form", form)

    @property
    def n(self):
        return self.generators[0].shape[0]

    @property
    def rank(self):
        return len(self.generators)

    @cached_property
    def letter_matrices(self):
        """Matrices of the letters in code order ``a, a^-1, b, b^-1, ...``."""
        out = []
        for g in self.generators:
            out.extend([g, np.linalg.inv(g)])
        return np.array(out)

    def evaluate(self, word):
        """Plain matrix product of a word (short words only)."""
        m = np.eye(self.n)
        for code in word.codes():
            m = m @ self.letter_matrices[code]
        return m

    def compound(self, word):
        """The word as a :class:`CompoundProduct` (accurate for long words)."""
        cp = CompoundProduct.identity(self.n)
        for code in word.codes():
            cp = cp @ CompoundProduct.from_matrix(self.letter_matrices[code])
        return cp

    def to_json(self):
        out = {"family": self.family, "n": self.n}
        if self.family == "Opq":
            p, q = self.form.signature
            out.update(p=min(p, q), q=max(p, q))
        out["generators"] = [{"name": lab, "matrix": g.tolist()} for lab, g in zip(self.labels, self.generators)]
        if self.form is not None:
            out["form"] = self.form.to_json()
        if self.provenance:
            out["provenance"] = self.provenance
        return out


def _default_label(i):
    return "abcdefghijklmnopqrstuvwxyz"[i] if i < 26 else f"g{i + 1}"


def load_representation(source):
    """Read a representation from a JSON file path, a JSON string or a dict."""
    if isinstance(source, dict):
        data = source
    else:
        text = str(source)
        if text.lstrip().startswith("{"):
            data = json.loads(text)
        else:
            with open(text, encoding="utf-8") as fh:
                data = json.load(fh)
    try:
        gens = [np.array(g["matrix"], dtype=np.float64) for g in data["generators"]]
        labels = tuple(str(g.get("name", _default_label(i))) for i, g in enumerate(data["generators"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed representation file: {exc}") from exc
    family = data.get("family", "SLnR")
    n = data.get("n")
    if n is not None and any(g.shape != (n, n) for g in gens):
        raise ValidationError(f"declared n = {n} does not match the generator sizes")
    form = BilinearForm(np.array(data["form"], dtype=np.float64)) if data.get("form") is not None else None
    if family == "Opq" and form is not None and "p" in data:
        if sorted(form.signature) != sorted((data["p"], data["q"])):
            raise ValidationError(f"form signature {form.signature} != declared ({data['p']}, {data['q']})")
    return RepresentationSpec(tuple(gens), family, form, labels, dict(data.get("provenance", {})))


def fixture_path(name):
    """Path of a bundled representation file (e.g. ``schottky_k2_t3.json``)."""
    return resources.files("anosov") / "data" / name


# ---------------------------------------------------------------------------
# Reduced words
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedWord:
    """Signed 1-based generator indices; ``-i`` is the inverse of generator i."""

    letters: tuple

    def __post_init__(self):
        letters = tuple(int(x) for x in self.letters)
        if any(x == 0 for x in letters):
            raise ValidationError("letter 0 is not a generator")
        for x, y in zip(letters, letters[1:]):
            if y == -x:
                raise ValidationError(f"word {letters} is not reduced")
        object.__setattr__(self, "letters", letters)

    def __len__(self):
        return len(self.letters)

    def codes(self):
        return [2 * (abs(x) - 1) + (x < 0) for x in self.letters]

    @classmethod
    def from_codes(cls, codes):
        return cls(tuple((c // 2 + 1) * (-1 if c % 2 else 1) for c in codes))

    def inverse(self):
        return ReducedWord(tuple(-x for x in reversed(self.letters)))

    def is_cyclically_reduced(self):
        return len(self.letters) < 2 or self.letters[0] != -self.letters[-1]

    def label(self, labels=None):
        if not self.letters:
            return "e"
        labels = labels or [_default_label(i) for i in range(max(abs(x) for x in self.letters))]
        return " ".join(labels[abs(x) - 1] + ("^-1" if x < 0 else "") for x in self.letters)

    def __str__(self):
        return self.label()


def word_count(k, L):
    """Number of nontrivial reduced words of length <= L in F_k."""
    if k < 1 or L < 0:
        raise ValidationError(f"need k >= 1 and L >= 0, got k={k}, L={L}")
    return sum(2 * k * (2 * k - 1) ** (length - 1) for length in range(1, L + 1))


def _check_cap(k, L, cap):
    total = word_count(k, L)
    if total > cap:
        raise TooLarge(f"{total} reduced words of length <= {L} exceed the cap {cap}")
    return total


def _level_indices(k, L):
    """Per length: (parent index into the previous level, letter code)."""
    letters = np.arange(2 * k)
    parent = np.zeros(2 * k, dtype=np.int64)
    last = letters.copy()
    out = [(parent, letters)]
    for _ in range(2, L + 1):
        n_prev = last.shape[0]
        par = np.repeat(np.arange(n_prev), 2 * k)
        let = np.tile(np.arange(2 * k), n_prev)
        keep = let != (last[par] ^ 1)
        par, let = par[keep], let[keep]
        out.append((par, let))
        last = let
    return out


def _codes_of(levels, length, idx):
    codes = []
    for lev in range(length - 1, -1, -1):
        parent, letters = levels[lev]
        codes.append(int(letters[idx]))
        idx = int(parent[idx])
    return codes[::-1]


def enumerate_reduced_words(k, L, include_identity=False, cap=WORD_CAP):
    """Every reduced word of length <= L in F_k, in length-then-lex order.

    Letters are ordered ``a < a^-1 < b < b^-1 < ...``.
    """
    _check_cap(k, L, cap)
    words = [ReducedWord(())] if include_identity else []
    if L == 0:
        return words
    levels = _level_indices(k, L)
    for length in range(1, L + 1):
        for idx in range(levels[length - 1][0].shape[0]):
            words.append(ReducedWord.from_codes(_codes_of(levels, length, idx)))
    return words


@dataclass
class _Level:
    length: int
    index: tuple  # the (parent, letters) arrays of every level so far
    mats: list  # per exterior degree: (N, d, d) normalized products
    logs: list  # per exterior degree: (N,) log scales
    logdet: np.ndarray

    def cartan(self):
        tops = [_kernels.log_top_singular(m) + lg for m, lg in zip(self.mats, self.logs)]
        norms = np.column_stack([np.zeros_like(self.logdet)] + tops + [self.logdet])
        return np.diff(norms, axis=1)

    def jordan(self):
        tops = [np.log(np.abs(np.linalg.eigvals(m)).max(axis=1)) + lg for m, lg in zip(self.mats, self.logs)]
        radii = np.column_stack([np.zeros_like(self.logdet)] + tops + [self.logdet])
        return np.diff(radii, axis=1)

    def word(self, i):
        return ReducedWord.from_codes(_codes_of(self.index, self.length, i))

    def compound(self, i):
        return CompoundProduct(len(self.mats) + 1, [m[i] for m in self.mats], [lg[i] for lg in self.logs], self.logdet[i])

    def __len__(self):
        return self.logdet.shape[0]


def _letter_stacks(rep):
    mats, logs = [], []
    for k in range(1, rep.n):
        stack, scales = [], []
        for g in rep.letter_matrices:
            c = compound_matrix(g, k)
            s = np.abs(c).max()
            stack.append(c / s)
            scales.append(np.log(s))
        mats.append(np.ascontiguousarray(stack))
        logs.append(np.array(scales))
    logdet = np.array([np.linalg.slogdet(g)[1] for g in rep.letter_matrices])
    return mats, logs, logdet


def scan_levels(rep, L, cap=WORD_CAP):
    """Yield one :class:`_Level` per word length 1..L."""
    if rep.n < 2:
        raise ValidationError("scans need matrices of size >= 2")
    _check_cap(rep.rank, L, cap)
    index = _level_indices(rep.rank, L)
    gmats, glogs, gdet = _letter_stacks(rep)
    mats = [np.eye(m.shape[1])[None] for m in gmats]
    logs = [np.zeros(1) for _ in gmats]
    logdet = np.zeros(1)
    for length in range(1, L + 1):
        parent, letters = index[length - 1]
        new_mats, new_logs = [], []
        for m, lg, gm, gl in zip(mats, logs, gmats, glogs):
            prod, plog = _kernels.extend_level(m, lg, parent, letters, gm)
            new_mats.append(prod)
            new_logs.append(plog + gl[letters])
        mats, logs = new_mats, new_logs
        logdet = logdet[parent] + gdet[letters]
        yield _Level(length, index, mats, logs, logdet)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _angle(v):
    return float(np.arctan2(v[1], v[0]) % np.pi)


def _pdist(a, b):
    """Sine distance between the lines at angles a and b."""
    return abs(np.sin(a - b))


@dataclass(frozen=True)
class PingPongCertificate:
    radius: float
    disks: tuple  # ((label, center angle), ...): attracting disk of each letter
    min_separation: float  # smallest sine distance between disk centers
    max_image_distance: float  # worst image distance from an attracting center

    def to_json(self):
        return {
            "radius": self.radius,
            "disks": [{"letter": lab, "center_angle": c} for lab, c in self.disks],
            "min_center_separation": self.min_separation,
            "max_image_distance": self.max_image_distance,
        }


def ping_pong_certificate(rep, radius=PING_PONG_RADIUS):
    """Check the ping-pong criterion for a proximal SL(2, R) generating set.

    The attracting disk of each letter is the sine-radius ball around its
    attracting eigenline.  The disks must be pairwise disjoint, and each
    letter must map the complement of its repelling disk (the attracting
    disk of its inverse) into its own attracting disk.  On P^1 the image of
    that complementary arc is the arc through the image of its midpoint,
    so checking the two boundary points and the midpoint is exact.
    """
    if rep.n != 2:
        raise ValidationError("ping-pong certificate is implemented for SL(2, R)")
    delta = np.arcsin(radius)
    mats = rep.letter_matrices
    centers, names = [], []
    for code, g in enumerate(mats):
        w, v = np.linalg.eig(g)
        if np.iscomplexobj(w) and np.any(np.abs(w.imag) > 0):
            raise PingPongFailed(f"letter {code} is elliptic", pair=(code, code))
        order = np.argsort(-np.abs(w.real))
        if abs(abs(w.real[order[0]]) - abs(w.real[order[1]])) < GAP_MIN:
            raise PingPongFailed(f"letter {code} is not proximal", pair=(code, code))
        centers.append(_angle(v[:, order[0]].real))
        names.append(rep.labels[code // 2] + ("^-1" if code % 2 else ""))
    min_sep = np.inf
    for i, j in combinations(range(len(centers)), 2):
        d = np.arcsin(min(1.0, _pdist(centers[i], centers[j])))
        min_sep = min(min_sep, _pdist(centers[i], centers[j]))
        if d <= 2 * delta:
            raise PingPongFailed(f"disks of {names[i]} and {names[j]} overlap", pair=(names[i], names[j]))
    worst = 0.0
    for code, g in enumerate(mats):
        rep_center = centers[code ^ 1]
        for phi in (rep_center + delta + 1e-12, rep_center - delta - 1e-12, rep_center + np.pi / 2):
            img = _angle(g @ np.array([np.cos(phi), np.sin(phi)]))
            d = _pdist(img, centers[code])
            worst = max(worst, d)
            if d >= radius:
                raise PingPongFailed(
                    f"{names[code]} maps a point outside its repelling disk to distance {d:.3g} "
                    f"from its attracting center",
                    pair=(names[code], names[code ^ 1]),
                )
    return PingPongCertificate(float(radius), tuple(zip(names, centers)), float(min_sep), float(worst))


def schottky_sl2(k, t, angles, radius=PING_PONG_RADIUS):
    """Hyperbolic generators ``R(θ_i) diag(e^t, e^-t) R(θ_i)^T``, ping-pong checked."""
    if k < 2:
        raise ValidationError("a Schottky group needs k >= 2 generators")
    if len(angles) != k:
        raise ValidationError(f"need {k} angles, got {len(angles)}")
    if not t > 0:
        raise ValidationError("translation length must be positive")
    d = np.diag([np.exp(t), np.exp(-t)])
    gens = tuple(_rotation(a) @ d @ _rotation(a).T for a in angles)
    rep = RepresentationSpec(gens, "SLnR")
    cert = ping_pong_certificate(rep, radius)
    prov = {"construction": "schottky_sl2", "k": k, "t": float(t), "angles": [float(a) for a in angles],
            "ping_pong": cert.to_json()}
    return RepresentationSpec(gens, "SLnR", None, rep.labels, prov)


def principal_sl2_to_sln(n):
    """The n-dimensional irreducible representation of SL(2, R), as a function.

    Sym^{n-1} acting on binary forms by substitution ``(x, y) -> (x, y) g``,
    in the monomial basis ``x^{n-1}, x^{n-2} y, ..., y^{n-1}``; diag(s, 1/s)
    maps to diag(s^{n-1}, s^{n-3}, ..., s^{1-n}).
    """
    if n < 2:
        raise ValidationError("principal embedding needs n >= 2")
    P = np.polynomial.polynomial

    def embed(g):
        g = as_square(g)
        if g.shape != (2, 2):
            raise ValidationError("principal embedding takes 2x2 matrices")
        (a, b), (c, d) = g
        out = np.zeros((n, n))
        for j in range(n):
            # x^{n-1-j} y^j with x -> a x + c y, y -> b x + d y, in powers of y/x
            coeffs = P.polymul(P.polypow([a, c], n - 1 - j), P.polypow([b, d], j))
            out[: len(coeffs), j] = coeffs
        return out

    return embed


def principal_image(rep, n):
    """Compose an SL(2, R) representation with the principal embedding."""
    embed = principal_sl2_to_sln(n)
    prov = dict(rep.provenance, principal_dimension=n)
    return RepresentationSpec(tuple(embed(g) for g in rep.generators), "SLnR", None, rep.labels, prov)


def adjoint_realization(rep):
    """SL(2, R) acting on binary quadratic forms: a representation into O(1, 2)."""
    embed = principal_sl2_to_sln(3)
    prov = dict(rep.provenance, realization="adjoint O(1,2)")
    return RepresentationSpec(tuple(embed(g) for g in rep.generators), "Opq", BilinearForm(ADJOINT_FORM),
                              rep.labels, prov)


# ---------------------------------------------------------------------------
# Divergence and quasi-isometry scans
# ---------------------------------------------------------------------------

_TERM = re.compile(r"\s*([+-]?)\s*(\d*)\s*\*?\s*mu\s*(\d+)\s*")


@dataclass(frozen=True)
class RootFunctional:
    name: str
    coeffs: tuple

    def __call__(self, mu):
        return np.asarray(mu) @ np.asarray(self.coeffs, dtype=np.float64)


def root_functional(spec, n):
    """Parse ``"mu1-mu2"``, ``"2mu3"`` or a pair ``(i, j)`` (1-based) into a functional."""
    if isinstance(spec, RootFunctional):
        return spec
    coeffs = np.zeros(n)
    if isinstance(spec, (tuple, list)) and len(spec) == 2:
        i, j = int(spec[0]), int(spec[1])
        if not (1 <= i <= n and 1 <= j <= n and i != j):
            raise ValidationError(f"root ({i}, {j}) invalid for n = {n}")
        coeffs[i - 1], coeffs[j - 1] = 1.0, -1.0
        return RootFunctional(f"mu{i}-mu{j}", tuple(coeffs))
    text = str(spec).replace(" ", "")
    pos = 0
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos:
            raise ValidationError(f"cannot parse root functional {spec!r}")
        idx = int(m.group(3))
        if not 1 <= idx <= n:
            raise ValidationError(f"mu{idx} out of range for n = {n}")
        coeffs[idx - 1] += (-1 if m.group(1) == "-" else 1) * (int(m.group(2)) if m.group(2) else 1)
        pos = m.end()
    if not np.any(coeffs):
        raise ValidationError(f"root functional {spec!r} is zero")
    return RootFunctional(text, tuple(coeffs))


def simple_roots(n):
    return [root_functional((i, i + 1), n) for i in range(1, n)]


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    rms: float
    spread: float
    passed: bool

    def to_json(self):
        return {"slope": self.slope, "intercept": self.intercept, "C": -self.intercept,
                "residual_rms": self.rms, "range": self.spread, "passed": self.passed}


def fit_minima(lengths, minima, slope_min=SLOPE_MIN):
    """OLS line through (L, min_L); PASS iff slope > slope_min and RMS < 10% of range."""
    x = np.asarray(lengths, dtype=np.float64)
    y = np.asarray(minima, dtype=np.float64)
    if x.size < 2:
        raise ValidationError("a line fit needs at least two lengths")
    slope, intercept = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    spread = float(y.max() - y.min())
    passed = bool(slope > slope_min and rms < 0.1 * spread)
    return LineFit(float(slope), float(intercept), rms, spread, passed)


@dataclass(frozen=True)
class DivergenceScanReport:
    lengths: tuple
    word_counts: tuple
    roots: tuple  # RootFunctional
    minima: dict
    means: dict
    maxima: dict
    fits: dict
    fit_from: int
    slope_min: float

    @property
    def passed(self):
        return all(f.passed for f in self.fits.values())

    def to_json(self):
        return {
            "lengths": list(self.lengths),
            "word_counts": list(self.word_counts),
            "roots": [{"name": r.name, "coeffs": list(r.coeffs)} for r in self.roots],
            "minima": {k: list(v) for k, v in self.minima.items()},
            "means": {k: list(v) for k, v in self.means.items()},
            "maxima": {k: list(v) for k, v in self.maxima.items()},
            "fit_from": self.fit_from,
            "slope_min": self.slope_min,
            "fits": {k: f.to_json() for k, f in self.fits.items()},
            "verdict": "PASS" if self.passed else "FAIL",
        }

    def csv_rows(self):
        header = ["length", "words"]
        for r in self.roots:
            header += [f"min_{r.name}", f"mean_{r.name}", f"max_{r.name}"]
        rows = [header]
        for i, length in enumerate(self.lengths):
            row = [length, self.word_counts[i]]
            for r in self.roots:
                row += [self.minima[r.name][i], self.means[r.name][i], self.maxima[r.name][i]]
            rows.append(row)
        return rows


def divergence_scan(rep, roots=None, L=8, slope_min=SLOPE_MIN, fit_from=None, cap=WORD_CAP):
    """Minimum over words of each length of every root functional of μ."""
    roots = [root_functional(r, rep.n) for r in (roots or simple_roots(rep.n))]
    if L < 2:
        raise ValidationError("divergence scan needs L >= 2")
    fit_from = max(1, L // 2) if fit_from is None else int(fit_from)
    stats = {r.name: ([], [], []) for r in roots}
    counts = []
    for level in scan_levels(rep, L, cap):
        mu = level.cartan()
        counts.append(len(level))
        for r in roots:
            vals = r(mu)
            lo, mid, hi = stats[r.name]
            lo.append(float(vals.min()))
            mid.append(float(vals.mean()))
            hi.append(float(vals.max()))
    lengths = tuple(range(1, L + 1))
    sel = [i for i, length in enumerate(lengths) if length >= fit_from]
    fits = {
        r.name: fit_minima([lengths[i] for i in sel], [stats[r.name][0][i] for i in sel], slope_min)
        for r in roots
    }
    return DivergenceScanReport(
        lengths, tuple(counts), tuple(roots),
        {k: tuple(v[0]) for k, v in stats.items()},
        {k: tuple(v[1]) for k, v in stats.items()},
        {k: tuple(v[2]) for k, v in stats.items()},
        fits, fit_from, slope_min,
    )


@dataclass(frozen=True)
class QIReport:
    K_hat: float
    C_hat: float
    lengths: tuple
    env_min: tuple
    env_max: tuple
    lower_slope: float
    fail: bool

    def to_json(self):
        return {
            "K_hat": self.K_hat,
            "C_hat": self.C_hat,
            "lengths": list(self.lengths),
            "norm_min": list(self.env_min),
            "norm_max": list(self.env_max),
            "lower_envelope_slope": self.lower_slope,
            "fail": self.fail,
        }


def qi_fit(lengths, env_min, env_max):
    """Smallest ``K + C`` with ``ℓ/K - C <= env <= K ℓ + C`` on the envelopes.

    For fixed K the best C is ``max(0, max(env_max - Kℓ), max(ℓ/K - env_min))``,
    a convex function of K, so the total is minimized by a bounded scalar
    search over K >= 1.
    """
    ell = np.asarray(lengths, dtype=np.float64)
    lo = np.asarray(env_min, dtype=np.float64)
    hi = np.asarray(env_max, dtype=np.float64)

    def c_of(k):
        return max(0.0, float(np.max(hi - k * ell)), float(np.max(ell / k - lo)))

    k_top = max(2.0, float(np.max(hi / ell)) + 1.0, float(np.max(ell / np.maximum(lo, 1e-12))) + 1.0)
    k_top = min(k_top, 1e12)
    res = scipy.optimize.minimize_scalar(lambda k: k + c_of(k), bounds=(1.0, k_top), method="bounded",
                                         options={"xatol": 1e-10})
    k = float(res.x)
    if 1.0 + c_of(1.0) <= k + c_of(k):
        k = 1.0
    return k, c_of(k)


def qi_constants(rep, L=8, slope_min=SLOPE_MIN, cap=WORD_CAP):
    """Quasi-isometry constants of ``γ -> ρ(γ)`` from the ``||μ||_2`` envelopes."""
    env_min, env_max = [], []
    for level in scan_levels(rep, L, cap):
        norms = np.linalg.norm(level.cartan(), axis=1)
        env_min.append(float(norms.min()))
        env_max.append(float(norms.max()))
    lengths = tuple(range(1, L + 1))
    k, c = qi_fit(lengths, env_min, env_max)
    upper = [i for i, length in enumerate(lengths) if length >= max(1, L // 2)]
    slope = float(np.polyfit([lengths[i] for i in upper], [env_min[i] for i in upper], 1)[0]) if len(upper) > 1 else 0.0
    return QIReport(k, c, lengths, tuple(env_min), tuple(env_max), slope, bool(slope <= slope_min))


# ---------------------------------------------------------------------------
# Proximality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProximalityReport:
    flagtype: str
    x_plus: Subspace
    x_minus: Subspace
    repelling: Subspace  # points P with P ∩ repelling ≠ 0 form V⁻(x⁻)
    gap: float
    r: float
    epsilon: float = None
    epsilon_consistent: bool = None

    def to_json(self):
        return {
            "flagtype": self.flagtype,
            "x_plus": self.x_plus.to_json(),
            "x_minus": self.x_minus.to_json(),
            "gap": self.gap,
            "r": self.r,
            "epsilon": self.epsilon,
            "epsilon_consistent": self.epsilon_consistent,
        }


def _top_invariant(mat, count, log_threshold):
    """Real Schur basis of the invariant subspace of eigenvalues with |λ| > e^threshold."""
    thr = np.exp(log_threshold)
    t, z, sdim = scipy.linalg.schur(mat, output="real", sort=lambda re, im: np.hypot(re, im) > thr)
    if sdim != count:
        raise NotProximal(f"expected {count} dominant eigenvalues, found {sdim}")
    return Subspace.span(z[:, :count])


def _flag_dim(flagtype, form):
    if flagtype == "line":
        return 1
    if flagtype == "maximal_isotropic":
        if form is None:
            raise ValidationError("maximal_isotropic flag type needs a form")
        return form.witt_index
    raise ValidationError(f"unknown flag type {flagtype!r}")


def proximal_data(g, flagtype="line", form=None, estimate_epsilon=True, samples=1000, seed=0):
    """Attracting point, repelling locus, gap, r and ε of a proximal element.

    ``g`` is a square array or a :class:`CompoundProduct`.  With l the flag
    dimension, x⁺ is the dominant l-dimensional invariant subspace and
    ``R = (dominant l-space of g^T)^⊥`` is the complementary invariant
    subspace.  For the line type x⁻ = R (a hyperplane); for the isotropic
    type x⁻ = R^{⊥F}.  In both cases V⁻(x⁻) is the set of points meeting R,
    and r is the smallest principal sine between x⁺ and R.
    """
    cp = g if isinstance(g, CompoundProduct) else CompoundProduct.from_matrix(g)
    if cp.n < 2:
        raise ValidationError("proximality needs n >= 2")
    l = _flag_dim(flagtype, form)
    if form is not None and form.n != cp.n:
        raise ValidationError("form and matrix sizes differ")
    jor = cp.jordan()
    gap = float(jor[l - 1] - jor[l])
    if not np.isfinite(gap) or gap < GAP_MIN:
        raise NotProximal(f"eigenvalue gap {gap:.3e} below {GAP_MIN}")
    mat = cp.matrix()
    thr = 0.5 * (jor[l - 1] + jor[l]) - cp.logs[0]
    x_plus = _top_invariant(mat, l, thr)
    repelling = _top_invariant(mat.T, l, thr).complement()
    if flagtype == "maximal_isotropic":
        if not is_isotropic(x_plus, form, 1e-6):
            raise ValidationError("attracting subspace is not isotropic; g does not preserve the form")
        x_minus = form_perp(repelling, form)
    else:
        x_minus = repelling
    r = gap_to(x_plus, repelling)
    eps = consistent = None
    if estimate_epsilon:
        eps, consistent = _estimate_epsilon(mat, x_plus, repelling, form if l > 1 else None, l, samples, seed)
    return ProximalityReport(flagtype, x_plus, x_minus, repelling, gap, float(r), eps, consistent)


def _lipschitz(mat, u):
    """Upper bound on the derivative of ``U -> mat·U`` on the Grassmannian at U."""
    n = mat.shape[0]
    q, r = np.linalg.qr(mat @ u)
    proj_out = np.eye(n) - q @ q.T
    proj_in = np.eye(n) - u @ u.T
    return np.linalg.norm(proj_out @ mat @ proj_in, 2) * np.linalg.norm(np.linalg.inv(r), 2), Subspace.span(q)


def _estimate_epsilon(mat, x_plus, repelling, form, l, samples, seed):
    """Smallest ε (bisection, 20 steps) with g·B_ε(x⁻) ⊂ b_ε(x⁺) and Lip ≤ ε on B_ε(x⁻).

    B_ε(x⁻) is sampled by ``samples`` random points plus, for the line type,
    points on its boundary shell (distance exactly ε from the repelling
    hyperplane), where the contraction is weakest.
    """
    rng = np.random.default_rng(seed)
    n = mat.shape[0]
    half = samples // 2
    if form is None and l == 1:
        pts = rng.standard_normal((samples - half, n))
        base = [Subspace.span(p) for p in pts]
        normal = repelling.complement().basis[:, 0]
        shell_dirs = rng.standard_normal((half, n))
        shell_dirs -= np.outer(shell_dirs @ normal, normal)
        shell_dirs /= np.linalg.norm(shell_dirs, axis=1)[:, None]
    else:
        base = [random_isotropic(form, l, rng) for _ in range(samples)]
        shell_dirs = None

    pre = [(u, gap_to(u, repelling)) + _lipschitz(mat, u.basis) for u in base]

    def needed(eps):
        worst = 0.0
        for u, d, lip, img in pre:
            if d >= eps:
                worst = max(worst, lip, distance(img, x_plus))
        if shell_dirs is not None:
            for z in shell_dirs:
                v = eps * normal + np.sqrt(max(0.0, 1 - eps * eps)) * z
                lip, img = _lipschitz(mat, v[:, None])
                worst = max(worst, lip, distance(img, x_plus))
        return worst

    hi = 1.0
    if needed(hi) > hi:
        return float(needed(hi)), False
    lo = 0.0
    for _ in range(20):
        mid = 0.5 * (lo + hi)
        if needed(mid) <= mid:
            hi = mid
        else:
            lo = mid
    return float(hi), True


# ---------------------------------------------------------------------------
# Limit sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LimitSetSample:
    """Attracting points of proximal words, with the dual point ξ⁻ at each.

    For the line type without a form the dual is the attracting hyperplane
    of the same word; with a form it is ``form_perp`` of the point.
    """

    flagtype: str
    points: tuple
    duals: tuple
    words: tuple
    L: int
    scanned: int
    form: BilinearForm = None
    labels: tuple = None
    skipped: int = 0  # proximal words whose dominant subspace was unresolvable

    def __len__(self):
        return len(self.points)

    def to_json(self):
        return {
            "flagtype": self.flagtype,
            "L": self.L,
            "scanned_words": self.scanned,
            "skipped_words": self.skipped,
            "size": len(self.points),
            "points": [
                {"word": list(w.letters), "label": w.label(self.labels), "basis": p.basis.T.tolist()}
                for p, w in zip(self.points, self.words)
            ],
        }

    def csv_rows(self):
        n = self.points[0].ambient_dim if self.points else 0
        dim = self.points[0].dim if self.points else 0
        header = ["word"] + [f"v{c + 1}_{i + 1}" for c in range(dim) for i in range(n)]
        rows = [header]
        for p, w in zip(self.points, self.words):
            rows.append([w.label(self.labels)] + p.basis.T.ravel().tolist())
        return rows


def _inverse_index(level):
    """Index of the inverse word inside the same level."""
    lookup = {level.word(i).letters: i for i in range(len(level))}
    return np.array([lookup[level.word(i).inverse().letters] for i in range(len(level))])


def limit_set_sample(rep, L, flagtype="line", form=None, dedup_radius=DEDUP_RADIUS, cap=WORD_CAP):
    """Attracting fixed points of every proximal word of length <= L, deduplicated.

    Points are kept in length-then-lex order, so each carries a shortest
    producing word.  Dominant subspaces come from an ordered real Schur
    form: LAPACK's balanced eigenvector routine loses the dominant
    eigenvector of long, badly scaled products.  Without a form, the dual
    hyperplane of g is the kernel of the dominant left eigenvector of g^-1;
    words whose inverse is not proximal are skipped.
    """
    form = form if form is not None else rep.form
    l = _flag_dim(flagtype, form)
    pts, duals, words = [], [], []
    scanned = skipped = 0
    for level in scan_levels(rep, L, cap):
        scanned += len(level)
        jor = level.jordan()
        gaps = jor[:, l - 1] - jor[:, l]
        ok = np.isfinite(gaps) & (gaps >= GAP_MIN)
        if not ok.any():
            continue
        mats, scale = level.mats[0], level.logs[0]
        inv = _inverse_index(level) if form is None else None
        for i in np.flatnonzero(ok):
            if inv is not None and not ok[inv[i]]:
                continue
            thr = 0.5 * (jor[i, l - 1] + jor[i, l]) - scale[i]
            try:
                p = _top_invariant(mats[i], l, thr)
                if form is None:
                    j = inv[i]
                    normal = _top_invariant(mats[j].T, 1, 0.5 * (jor[j, 0] + jor[j, 1]) - scale[j])
                    dual = normal.complement()
                else:
                    dual = form_perp(p, form)
            except NotProximal:
                # dominant eigenvalues below round-off of the normalized product
                skipped += 1
                continue
            pts.append(p)
            duals.append(dual)
            words.append(level.word(i))
    if not pts:
        raise EmptySample(f"no proximal word among {scanned} words of length <= {L}")
    keep = _dedup(pts, dedup_radius)
    return LimitSetSample(
        flagtype,
        tuple(pts[i] for i in keep),
        tuple(duals[i] for i in keep),
        tuple(words[i] for i in keep),
        L, scanned, form, rep.labels, skipped,
    )


def _dedup(points, radius):
    if points[0].dim == 1:
        arr = np.ascontiguousarray([p.basis[:, 0] for p in points])
        return np.flatnonzero(_kernels.dedup_lines(arr, radius))
    kept = []
    for i, p in enumerate(points):
        if all(distance(p, points[j]) > radius for j in kept):
            kept.append(i)
    return np.array(kept, dtype=np.int64)


@dataclass(frozen=True)
class MarginReport:
    min_margin: float
    pairs: int
    argmin: tuple
    histogram: tuple
    edges: tuple
    sep: float

    def to_json(self):
        return {
            "min_margin": self.min_margin,
            "pairs": self.pairs,
            "argmin": list(self.argmin),
            "histogram": list(self.histogram),
            "bin_edges": list(self.edges),
            "sep": self.sep,
        }


def transversality_margin(sample, form=None, sep=SEP_DEFAULT, bins=10, chunk=512):
    """Smallest singular value of ``[x⁺_g | ξ⁻_h]`` over pairs more than ``sep`` apart."""
    if len(sample) == 0:
        raise EmptySample("empty limit-set sample")
    pts = sample.points
    duals = [form_perp(p, form) for p in pts] if form is not None else list(sample.duals)
    edges = np.linspace(0.0, 1.0, bins + 1)
    hist = np.zeros(bins, dtype=np.int64)
    best, arg, count = np.inf, (-1, -1), 0
    if pts[0].dim == 1:
        x = np.array([p.basis[:, 0] for p in pts])
        nu = np.array([d.complement().basis[:, 0] for d in duals])
        for start in range(0, len(pts), chunk):
            xs = x[start:start + chunk]
            far = np.sqrt(np.clip(1.0 - (xs @ x.T) ** 2, 0.0, 1.0)) > sep
            c = np.clip(np.abs(xs @ nu.T), 0.0, 1.0)
            marg = np.sqrt(np.clip(1.0 - np.sqrt(1.0 - c * c), 0.0, None))
            vals = marg[far]
            if vals.size:
                count += vals.size
                hist += np.histogram(np.clip(vals, 0, 1), edges)[0]
                masked = np.where(far, marg, np.inf)
                i, j = np.unravel_index(np.argmin(masked), masked.shape)
                if masked[i, j] < best:
                    best, arg = float(masked[i, j]), (start + int(i), int(j))
    else:
        for i, p in enumerate(pts):
            for j, d in enumerate(duals):
                if i == j or distance(p, pts[j]) <= sep:
                    continue
                m = float(np.linalg.svd(np.column_stack([p.basis, d.basis]), compute_uv=False)[-1])
                count += 1
                hist += np.histogram([min(m, 1.0)], edges)[0]
                if m < best:
                    best, arg = m, (i, j)
    if count == 0:
        raise NoPairs(f"no pair of sample points is more than {sep} apart")
    return MarginReport(best, count, arg, tuple(int(h) for h in hist), tuple(float(e) for e in edges), float(sep))
