"""Hot numeric kernels with numba-jitted and pure-numpy implementations.

Every kernel exists twice: a ``_nb_*`` variant compiled with ``numba.njit``
and a ``_np_*`` variant written in plain numpy. The active implementation is
chosen once at import time: set ``PLACELAB_NUMBA=0`` in the environment to
force the numpy path (it is also used automatically when numba is missing).
``benchmarks/bench_kernels.py`` times both paths against each other.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = os.environ.get("PLACELAB_NUMBA", "1").strip().lower()
_WANT_NUMBA = _ENV_FLAG not in ("0", "false", "off", "no")

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]


NUMBA_ENABLED = _WANT_NUMBA and _HAVE_NUMBA


# ---------------------------------------------------------------------------
# Canvas replay: last-writer-wins over a dense grid.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _nb_replay(xs, ys, colors, grid):
    for i in range(xs.shape[0]):
        grid[ys[i], xs[i]] = colors[i]


def _np_replay(xs, ys, colors, grid):
    if xs.shape[0] == 0:
        return
    # numpy leaves the write order for duplicate fancy indices unspecified,
    # so keep only the last event per cell before assigning.
    flat = ys.astype(np.int64) * grid.shape[1] + xs.astype(np.int64)
    _, first_in_reversed = np.unique(flat[::-1], return_index=True)
    last = flat.shape[0] - 1 - first_in_reversed
    grid.reshape(-1)[flat[last]] = colors[last]


# ---------------------------------------------------------------------------
# Per-cell placement counts.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _nb_accumulate(xs, ys, counts):
    for i in range(xs.shape[0]):
        counts[ys[i], xs[i]] += 1


def _np_accumulate(xs, ys, counts):
    if xs.shape[0] == 0:
        return
    flat = ys.astype(np.int64) * counts.shape[1] + xs.astype(np.int64)
    binned = np.bincount(flat, minlength=counts.size)
    counts.reshape(-1)[:] += binned.astype(counts.dtype)


# ---------------------------------------------------------------------------
# Even-odd polygon rasterization over integer lattice points.
#
# A lattice point is in the mask when it lies strictly inside the polygon
# under the even-odd (ray crossing) rule, or exactly on a polygon edge.
# ---------------------------------------------------------------------------

_EDGE_EPS = 1e-9


@njit(cache=True)
def _nb_polygon_hits(px, py, x0, y0, nx, ny):
    out = np.zeros((ny, nx), dtype=np.bool_)
    n = px.shape[0]
    for jy in range(ny):
        yq = float(y0 + jy)
        for ix in range(nx):
            xq = float(x0 + ix)
            inside = False
            on_edge = False
            for k in range(n):
                x1 = px[k]
                y1 = py[k]
                x2 = px[(k + 1) % n]
                y2 = py[(k + 1) % n]
                # boundary test: collinear and within the segment bbox
                cross = (x2 - x1) * (yq - y1) - (y2 - y1) * (xq - x1)
                if abs(cross) <= _EDGE_EPS:
                    if (
                        min(x1, x2) - _EDGE_EPS <= xq <= max(x1, x2) + _EDGE_EPS
                        and min(y1, y2) - _EDGE_EPS <= yq <= max(y1, y2) + _EDGE_EPS
                    ):
                        on_edge = True
                        break
                if (y1 > yq) != (y2 > yq):
                    x_at = x1 + (x2 - x1) * (yq - y1) / (y2 - y1)
                    if xq < x_at:
                        inside = not inside
            out[jy, ix] = inside or on_edge
    return out


def _np_polygon_hits(px, py, x0, y0, nx, ny):
    xq = (x0 + np.arange(nx, dtype=np.float64))[None, :]
    yq = (y0 + np.arange(ny, dtype=np.float64))[:, None]
    inside = np.zeros((ny, nx), dtype=bool)
    on_edge = np.zeros((ny, nx), dtype=bool)
    n = px.shape[0]
    for k in range(n):
        x1, y1 = px[k], py[k]
        x2, y2 = px[(k + 1) % n], py[(k + 1) % n]
        cross = (x2 - x1) * (yq - y1) - (y2 - y1) * (xq - x1)
        collinear = np.abs(cross) <= _EDGE_EPS
        in_box = (
            (xq >= min(x1, x2) - _EDGE_EPS)
            & (xq <= max(x1, x2) + _EDGE_EPS)
            & (yq >= min(y1, y2) - _EDGE_EPS)
            & (yq <= max(y1, y2) + _EDGE_EPS)
        )
        on_edge |= collinear & in_box
        straddles = (y1 > yq) != (y2 > yq)
        if y2 != y1:
            x_at = x1 + (x2 - x1) * (yq - y1) / (y2 - y1)
            inside ^= straddles & (xq < x_at)
    return inside | on_edge


# ---------------------------------------------------------------------------
# Exact greedy split search for regression trees.
#
# Maximizes sum(g_left)^2/n_left + sum(g_right)^2/n_right over all
# (feature, threshold) pairs, which is equivalent to minimizing the summed
# child squared error. Candidate thresholds are the sorted unique feature
# values; a row goes left when value <= threshold. Ties keep the earliest
# feature in `feats` order and the smallest threshold.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _nb_best_split(X, g, feats, min_leaf):
    n = X.shape[0]
    total = 0.0
    for i in range(n):
        total += g[i]
    parent = total * total / n
    best_gain = 0.0
    best_feat = -1
    best_thr = 0.0
    best_nl = 0
    for fi in range(feats.shape[0]):
        f = feats[fi]
        order = np.argsort(X[:, f], kind="mergesort")
        left_sum = 0.0
        for pos in range(n - 1):
            row = order[pos]
            left_sum += g[row]
            v = X[row, f]
            v_next = X[order[pos + 1], f]
            if v == v_next:
                continue
            nl = pos + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            right_sum = total - left_sum
            gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent
            if gain > best_gain + 1e-12:
                best_gain = gain
                best_feat = f
                best_thr = v
                best_nl = nl
    return best_feat, best_thr, best_gain, best_nl


def _np_best_split(X, g, feats, min_leaf):
    n = X.shape[0]
    total = float(g.sum())
    parent = total * total / n
    best_gain = 0.0
    best_feat = -1
    best_thr = 0.0
    best_nl = 0
    counts = np.arange(1, n, dtype=np.float64)
    for f in feats:
        col = X[:, f]
        order = np.argsort(col, kind="mergesort")
        sv = col[order]
        csum = np.cumsum(g[order])[:-1]
        valid = sv[:-1] != sv[1:]
        nl = counts
        nr = n - nl
        valid &= (nl >= min_leaf) & (nr >= min_leaf)
        if not valid.any():
            continue
        gain = np.where(
            valid, csum * csum / nl + (total - csum) ** 2 / nr - parent, -np.inf
        )
        pos = int(np.argmax(gain))
        if gain[pos] > best_gain + 1e-12:
            best_gain = float(gain[pos])
            best_feat = int(f)
            best_thr = float(sv[pos])
            best_nl = pos + 1
    return best_feat, best_thr, best_gain, best_nl


# ---------------------------------------------------------------------------
# Triangle counts per node on an undirected simple graph in CSR form.
# Neighbor lists must be sorted and free of self-loops.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _nb_triangles(indptr, indices):
    n = indptr.shape[0] - 1
    tri = np.zeros(n, dtype=np.int64)
    for u in range(n):
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if v <= u:
                continue
            i = indptr[u]
            j = indptr[v]
            while i < indptr[u + 1] and j < indptr[v + 1]:
                a = indices[i]
                b = indices[j]
                if a < b:
                    i += 1
                elif b < a:
                    j += 1
                else:
                    if a > v:
                        tri[u] += 1
                        tri[v] += 1
                        tri[a] += 1
                    i += 1
                    j += 1
    return tri


def _np_triangles(indptr, indices):
    from scipy import sparse

    n = indptr.shape[0] - 1
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    data = np.ones(indices.shape[0], dtype=np.int64)
    a = sparse.csr_matrix((data, indices, indptr), shape=(n, n))
    paths = (a @ a).multiply(a)
    return np.asarray(paths.sum(axis=1)).ravel() // 2


_NUMPY_IMPLS = {
    "replay": _np_replay,
    "accumulate": _np_accumulate,
    "polygon_hits": _np_polygon_hits,
    "best_split": _np_best_split,
    "triangles": _np_triangles,
}

_NUMBA_IMPLS = {
    "replay": _nb_replay,
    "accumulate": _nb_accumulate,
    "polygon_hits": _nb_polygon_hits,
    "best_split": _nb_best_split,
    "triangles": _nb_triangles,
}

_ACTIVE = _NUMBA_IMPLS if NUMBA_ENABLED else _NUMPY_IMPLS

replay = _ACTIVE["replay"]
accumulate = _ACTIVE["accumulate"]
polygon_hits = _ACTIVE["polygon_hits"]
best_split = _ACTIVE["best_split"]
triangles = _ACTIVE["triangles"]
