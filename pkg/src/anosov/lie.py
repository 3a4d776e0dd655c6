"""Classical root systems and their Weyl groups, in exact rational arithmetic.

Conventions (standard ε-coordinates):

* ``A_r`` lives in the trace-zero hyperplane of Q^{r+1}; every weight is
  normalized by subtracting the mean of its coordinates, so two vectors that
  differ by a multiple of (1, ..., 1) become equal.
* ``B_r``: simple roots ``ε_i - ε_{i+1}`` and ``ε_r``.
* ``C_r``: simple roots ``ε_i - ε_{i+1}`` and ``2ε_r``.
* ``D_r``: simple roots ``ε_i - ε_{i+1}`` and ``ε_{r-1} + ε_r``.

Weyl elements are signed permutations: ``w(ε_i) = signs[i] · ε_{perm[i]}``.
Simple reflections are numbered from 1 in words and mappings.
"""

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from math import factorial

from .errors import RankMismatch, TooLarge, UnsupportedRank, ValidationError

WEYL_LIMIT = 10**6
FAMILIES = ("A", "B", "C", "D")


@dataclass(frozen=True)
class WeightVector:
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(Fraction(c) for c in self.coords))

    def __add__(self, other):
        return WeightVector(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other):
        return WeightVector(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self):
        return WeightVector(tuple(-a for a in self.coords))

    def scaled(self, c):
        c = Fraction(c)
        return WeightVector(tuple(c * a for a in self.coords))

    def dot(self, other):
        if len(self.coords) != len(other.coords):
            raise RankMismatch("weights of different lengths")
        return sum((a * b for a, b in zip(self.coords, other.coords)), Fraction(0))

    def is_zero(self):
        return all(c == 0 for c in self.coords)

    def to_json(self):
        return [[c.numerator, c.denominator] for c in self.coords]

    def __str__(self):
        return "(" + ", ".join(str(c) for c in self.coords) + ")"


@dataclass(frozen=True)
class RootSystemData:
    family: str
    rank: int
    simple_roots: tuple
    positive_roots: tuple
    cartan_pairings: tuple

    @property
    def dim(self):
        """Length of the ε-coordinate vectors."""
        return self.rank + 1 if self.family == "A" else self.rank

    def weight(self, coords):
        """Build a weight in this system's coordinates (normalized for type A)."""
        coords = [Fraction(c) for c in coords]
        if len(coords) != self.dim:
            raise RankMismatch(f"{self.family}{self.rank} weights have {self.dim} coordinates, got {len(coords)}")
        if self.family == "A":
            mean = sum(coords, Fraction(0)) / len(coords)
            coords = [c - mean for c in coords]
        return WeightVector(tuple(coords))

    @property
    def label(self):
        return f"{self.family}{self.rank}"

    def weyl_order(self):
        r = self.rank
        if self.family == "A":
            return factorial(r + 1)
        if self.family in ("B", "C"):
            return 2**r * factorial(r)
        return 2 ** (r - 1) * factorial(r)

    def is_positive_root(self, v):
        return v in self._positive_set

    def is_negative_root(self, v):
        return (-v) in self._positive_set

    @cached_property
    def _positive_set(self):
        return frozenset(self.positive_roots)

    @cached_property
    def rho(self):
        return half_sum_positive(self)

    def to_json(self):
        return {
            "family": self.family,
            "rank": self.rank,
            "simple_roots": [a.to_json() for a in self.simple_roots],
            "positive_roots": [a.to_json() for a in self.positive_roots],
            "cartan_pairings": [list(row) for row in self.cartan_pairings],
        }


def build_root_system(family, rank):
    family = str(family).upper()
    if family not in FAMILIES:
        raise UnsupportedRank(f"unknown family {family!r}")
    rank = int(rank)
    min_rank = {"A": 1, "B": 2, "C": 2, "D": 3}[family]
    if rank < min_rank:
        raise UnsupportedRank(f"{family}{rank}: rank must be at least {min_rank}")
    dim = rank + 1 if family == "A" else rank

    def vec(pairs):
        v = [Fraction(0)] * dim
        for i, c in pairs:
            v[i] += c
        return v

    simple = [vec([(i, 1), (i + 1, -1)]) for i in range(rank if family == "A" else rank - 1)]
    if family == "B":
        simple.append(vec([(rank - 1, 1)]))
    elif family == "C":
        simple.append(vec([(rank - 1, 2)]))
    elif family == "D":
        simple.append(vec([(rank - 2, 1), (rank - 1, 1)]))

    positive = []
    for i in range(dim):
        for j in range(i + 1, dim):
            positive.append(vec([(i, 1), (j, -1)]))
            if family != "A":
                positive.append(vec([(i, 1), (j, 1)]))
        if family == "B":
            positive.append(vec([(i, 1)]))
        elif family == "C":
            positive.append(vec([(i, 2)]))

    proto = RootSystemData(family, rank, (), (), ())
    simple_w = tuple(proto.weight(v) for v in simple)
    positive_w = tuple(sorted((proto.weight(v) for v in positive), key=lambda w: w.coords, reverse=True))
    cartan = tuple(
        tuple(int(2 * a.dot(b) / b.dot(b)) for b in simple_w) for a in simple_w
    )
    return RootSystemData(family, rank, simple_w, positive_w, cartan)


@dataclass(frozen=True)
class WeylElement:
    """Signed permutation with a canonical reduced word (1-based letters)."""

    perm: tuple
    signs: tuple
    word: tuple = ()

    @property
    def length(self):
        return len(self.word)

    @property
    def key(self):
        return (self.perm, self.signs)

    def compose(self, other):
        """``self ∘ other`` (apply ``other`` first); the word is not recomputed."""
        perm = tuple(self.perm[other.perm[i]] for i in range(len(self.perm)))
        signs = tuple(other.signs[i] * self.signs[other.perm[i]] for i in range(len(self.perm)))
        return WeylElement(perm, signs)

    def to_json(self):
        return {"word": list(self.word), "perm": [p + 1 for p in self.perm], "signs": list(self.signs)}


def _raw_act(perm, signs, coords):
    out = [Fraction(0)] * len(coords)
    for i, c in enumerate(coords):
        out[perm[i]] = signs[i] * c
    return tuple(out)


def act_on_weight(w, mu):
    """Signed-permutation action on ε-coordinates; exact."""
    if len(w.perm) != len(mu.coords):
        raise RankMismatch(f"Weyl element acts on {len(w.perm)} coordinates, weight has {len(mu.coords)}")
    return WeightVector(_raw_act(w.perm, w.signs, mu.coords))


def simple_reflection(rs, j):
    """Simple reflection ``s_j`` for 1-based ``j``."""
    if not 1 <= j <= rs.rank:
        raise RankMismatch(f"simple reflection index {j} outside 1..{rs.rank}")
    d = rs.dim
    perm = list(range(d))
    signs = [1] * d
    i = j - 1
    last = j == rs.rank
    if not last or rs.family == "A":
        perm[i], perm[i + 1] = i + 1, i
    elif rs.family in ("B", "C"):
        signs[i] = -1
    else:
        perm[i - 1], perm[i] = i, i - 1
        signs[i - 1] = signs[i] = -1
    return WeylElement(tuple(perm), tuple(signs), (j,))


def inversion_count(rs, w):
    """Number of positive roots sent to negative roots."""
    return sum(1 for a in rs.positive_roots if rs.is_negative_root(act_on_weight(w, a)))


def reduced_word(rs, w):
    """Greedy descent: strip the smallest simple reflection that shortens ``w``."""
    letters = []
    cur = WeylElement(w.perm, w.signs)
    simples = [simple_reflection(rs, j) for j in range(1, rs.rank + 1)]
    while True:
        for j, s in enumerate(simples, start=1):
            if rs.is_negative_root(act_on_weight(cur, rs.simple_roots[j - 1])):
                cur = cur.compose(s)
                letters.append(j)
                break
        else:
            break
    return tuple(reversed(letters))


def with_word(rs, w):
    return WeylElement(w.perm, w.signs, reduced_word(rs, w))


def identity_element(rs):
    return WeylElement(tuple(range(rs.dim)), (1,) * rs.dim, ())


def weyl_enumerate(rs):
    """All of W, each once, sorted by (length, reduced word)."""
    order = rs.weyl_order()
    if order > WEYL_LIMIT:
        raise TooLarge(f"|W({rs.label})| = {order} exceeds {WEYL_LIMIT}")
    simples = [simple_reflection(rs, j) for j in range(1, rs.rank + 1)]
    start = identity_element(rs)
    seen = {start.key: start}
    queue = deque([start])
    while queue:
        w = queue.popleft()
        for s in simples:
            nxt = w.compose(s)
            if nxt.key not in seen:
                seen[nxt.key] = nxt
                queue.append(nxt)
    elements = [with_word(rs, w) for w in seen.values()]
    elements.sort(key=lambda w: (w.length, w.word))
    return elements


def longest_element(rs):
    d = rs.dim
    if rs.family == "A":
        perm, signs = tuple(range(d - 1, -1, -1)), (1,) * d
    elif rs.family == "D" and rs.rank % 2 == 1:
        perm, signs = tuple(range(d)), (-1,) * (d - 1) + (1,)
    else:
        perm, signs = tuple(range(d)), (-1,) * d
    w0 = with_word(rs, WeylElement(perm, signs))
    if w0.length != len(rs.positive_roots):
        raise ValidationError("longest element construction is inconsistent")  # pragma: no cover
    return w0


def opposition_involution(rs):
    """``ι(α) = -w_0(α)`` on simple roots, as a 1-based index mapping."""
    w0 = longest_element(rs)
    index = {a: j for j, a in enumerate(rs.simple_roots, start=1)}
    return {j: index[-act_on_weight(w0, a)] for j, a in enumerate(rs.simple_roots, start=1)}


def half_sum_positive(rs):
    total = WeightVector((0,) * rs.dim)
    for a in rs.positive_roots:
        total = total + a
    return total.scaled(Fraction(1, 2))


def orderA_key(rs, mu):
    """Lexicographic key: ``(<ρ, μ>, ε-coordinates of μ)``.

    The order it induces refines the positive roots; ``μ > 0`` iff the key's
    first nonzero entry is positive.
    """
    mu = rs.weight(mu.coords)
    return (rs.rho.dot(mu),) + mu.coords


def key_sign(key):
    for c in key:
        if c > 0:
            return 1
        if c < 0:
            return -1
    return 0


def weight_sign(rs, mu):
    return key_sign(orderA_key(rs, mu))
