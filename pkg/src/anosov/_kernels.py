"""Hot inner loops of the word scans, in two interchangeable backends.

The numba backend is used when numba imports cleanly and the environment
variable ``ANOSOV_DISABLE_NUMBA`` is unset (or set to ``0``).  The numpy
backend is a batched, vectorized rewrite of the same loops and is always
importable as ``*_numpy`` for parity tests and benchmarks.

All matrices handled here are kept normalized (max-abs entry 1) with the
discarded scale carried separately as a natural logarithm, so products of
long words never overflow.
"""

import os

import numpy as np

_DISABLED = os.environ.get("ANOSOV_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("numba disabled by ANOSOV_DISABLE_NUMBA")
    import numba
except ImportError:  # pragma: no cover - exercised by the benchmark subprocess
    numba = None


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------

def extend_level_numpy(mats, logs, parent, letters, gens):
    """Right-multiply ``mats[parent[i]]`` by ``gens[letters[i]]`` and renormalize."""
    prod = np.matmul(mats[parent], gens[letters])
    scale = np.abs(prod).max(axis=(1, 2))
    prod /= scale[:, None, None]
    return prod, logs[parent] + np.log(scale)


def log_top_singular_numpy(mats):
    """Log of the largest singular value of each matrix in a stack."""
    return np.log(np.linalg.svd(mats, compute_uv=False)[:, 0])


def dedup_lines_numpy(points, radius):
    """Greedy deduplication of unit vectors up to sign, in input order.

    Returns a boolean mask of the kept rows.  A row is dropped when its sine
    distance to an already kept row is ``<= radius``.
    """
    m = points.shape[0]
    keep = np.zeros(m, dtype=np.bool_)
    kept = np.empty_like(points)
    nk = 0
    for i in range(m):
        p = points[i]
        if nk:
            c = kept[:nk] @ p
            resid = p[None, :] - c[:, None] * kept[:nk]
            if np.min(np.sqrt((resid * resid).sum(axis=1))) <= radius:
                continue
        kept[nk] = p
        nk += 1
        keep[i] = True
    return keep


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def extend_level_numba(mats, logs, parent, letters, gens):
        n_out = parent.shape[0]
        d = mats.shape[1]
        out = np.empty((n_out, d, d))
        out_logs = np.empty(n_out)
        for w in range(n_out):
            a = mats[parent[w]]
            b = gens[letters[w]]
            big = 0.0
            for i in range(d):
                for j in range(d):
                    s = 0.0
                    for k in range(d):
                        s += a[i, k] * b[k, j]
                    out[w, i, j] = s
                    if abs(s) > big:
                        big = abs(s)
            for i in range(d):
                for j in range(d):
                    out[w, i, j] /= big
            out_logs[w] = logs[parent[w]] + np.log(big)
        return out, out_logs

    @numba.njit(cache=True)
    def dedup_lines_numba(points, radius):
        m, n = points.shape
        keep = np.zeros(m, dtype=np.bool_)
        kept = np.empty((m, n))
        nk = 0
        for i in range(m):
            dup = False
            for j in range(nk):
                c = 0.0
                for a in range(n):
                    c += kept[j, a] * points[i, a]
                s2 = 0.0
                for a in range(n):
                    r = points[i, a] - c * kept[j, a]
                    s2 += r * r
                if np.sqrt(s2) <= radius:
                    dup = True
                    break
            if not dup:
                for a in range(n):
                    kept[nk, a] = points[i, a]
                nk += 1
                keep[i] = True
        return keep

    BACKEND = "numba"
    extend_level = extend_level_numba
    log_top_singular = log_top_singular_numpy  # batched LAPACK beats a jitted loop
    dedup_lines = dedup_lines_numba
else:
    BACKEND = "numpy"
    extend_level = extend_level_numpy
    log_top_singular = log_top_singular_numpy
    dedup_lines = dedup_lines_numpy
