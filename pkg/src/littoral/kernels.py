"""Hot inner loops with a numba implementation and a pure-numpy twin.

Every public function takes an optional ``backend`` argument (``"numba"`` or
``"numpy"``); ``None`` picks the process-wide default from
:mod:`littoral._accel`. Both paths return identical results and are checked
against each other in the test suite.
"""
import numpy as np

from littoral._accel import njit, resolve


def integral_image(x):
    """Zero-padded 2-D cumulative sum, ``S[i, j] = x[:i, :j].sum()``."""
    s = np.zeros((x.shape[0] + 1, x.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(x, axis=0, dtype=np.float64), axis=1, out=s[1:, 1:])
    return s


def cfar_alpha(n_train, p_fa):
    """CA-CFAR threshold multiplier for ``n_train`` exponential-power cells."""
    n = np.asarray(n_train, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = n * (p_fa ** (-1.0 / n) - 1.0)
    return np.where(n > 0, alpha, np.inf)


# ---------------------------------------------------------------------------
# CA-CFAR
# ---------------------------------------------------------------------------

@njit(cache=True)
def _cfar_numba(power, s, half_outer_a, half_outer_r, half_inner_a, half_inner_r, p_fa):
    n_a, n_r = power.shape
    out = np.zeros((n_a, n_r), dtype=np.bool_)
    for a in range(n_a):
        oa0 = max(0, a - half_outer_a)
        oa1 = min(n_a, a + half_outer_a + 1)
        ia0 = max(0, a - half_inner_a)
        ia1 = min(n_a, a + half_inner_a + 1)
        for r in range(n_r):
            or0 = max(0, r - half_outer_r)
            or1 = min(n_r, r + half_outer_r + 1)
            ir0 = max(0, r - half_inner_r)
            ir1 = min(n_r, r + half_inner_r + 1)
            outer = s[oa1, or1] - s[oa0, or1] - s[oa1, or0] + s[oa0, or0]
            inner = s[ia1, ir1] - s[ia0, ir1] - s[ia1, ir0] + s[ia0, ir0]
            n = (oa1 - oa0) * (or1 - or0) - (ia1 - ia0) * (ir1 - ir0)
            if n <= 0:
                continue
            nf = float(n)
            alpha = nf * (p_fa ** (-1.0 / nf) - 1.0)
            out[a, r] = power[a, r] * nf > alpha * (outer - inner)
    return out


def _box_sums(s, n_a, n_r, half_a, half_r):
    a = np.arange(n_a)
    r = np.arange(n_r)
    a0 = np.maximum(0, a - half_a)[:, None]
    a1 = np.minimum(n_a, a + half_a + 1)[:, None]
    r0 = np.maximum(0, r - half_r)[None, :]
    r1 = np.minimum(n_r, r + half_r + 1)[None, :]
    total = s[a1, r1] - s[a0, r1] - s[a1, r0] + s[a0, r0]
    count = (a1 - a0) * (r1 - r0)
    return total, count


def _cfar_numpy(power, s, half_outer_a, half_outer_r, half_inner_a, half_inner_r, p_fa):
    n_a, n_r = power.shape
    outer, n_outer = _box_sums(s, n_a, n_r, half_outer_a, half_outer_r)
    inner, n_inner = _box_sums(s, n_a, n_r, half_inner_a, half_inner_r)
    n = (n_outer - n_inner).astype(np.float64)
    alpha = cfar_alpha(n, p_fa)
    with np.errstate(invalid="ignore"):
        out = power * n > alpha * (outer - inner)
    return out & (n > 0)


def cfar_mask(power, n_train_az, n_train_rg, n_guard_az, n_guard_rg, p_fa, backend=None):
    """Boolean detection mask of a 2-D cell-averaging CFAR on ``power``.

    The training region is the rectangular ring between the guard window
    (half-widths ``n_guard_*``) and the outer window (half-widths
    ``n_guard_* + n_train_*``). Windows are truncated at the map edges, and the
    threshold multiplier is recomputed for the truncated training count.
    """
    power = np.ascontiguousarray(power, dtype=np.float64)
    s = integral_image(power)
    args = (
        power, s,
        int(n_guard_az + n_train_az), int(n_guard_rg + n_train_rg),
        int(n_guard_az), int(n_guard_rg), float(p_fa),
    )
    if resolve(backend) == "numba":
        return _cfar_numba(*args)
    return _cfar_numpy(*args)


# ---------------------------------------------------------------------------
# DBSCAN support: eps-neighbourhood graph and cluster expansion
# ---------------------------------------------------------------------------

@njit(cache=True)
def _neighbours_numba(points, eps):
    n = points.shape[0]
    eps2 = eps * eps
    counts = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        c = 0
        for j in range(n):
            da = points[i, 0] - points[j, 0]
            dr = points[i, 1] - points[j, 1]
            if da * da + dr * dr <= eps2:
                c += 1
        counts[i + 1] = c
    indptr = np.cumsum(counts)
    indices = np.empty(indptr[n], dtype=np.int64)
    for i in range(n):
        k = indptr[i]
        for j in range(n):
            da = points[i, 0] - points[j, 0]
            dr = points[i, 1] - points[j, 1]
            if da * da + dr * dr <= eps2:
                indices[k] = j
                k += 1
    return indptr, indices


def _neighbours_numpy(points, eps, block=2048):
    n = points.shape[0]
    eps2 = eps * eps
    rows = []
    for start in range(0, n, block):
        chunk = points[start:start + block]
        d2 = ((chunk[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
        rows.append(d2 <= eps2)
    if not rows:
        return np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    adj = np.vstack(rows)
    counts = adj.sum(axis=1)
    indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    indices = np.nonzero(adj)[1].astype(np.int64)
    return indptr, indices


def eps_neighbours(points, eps, backend=None):
    """CSR adjacency ``(indptr, indices)`` of the Euclidean eps-graph.

    Each point is its own neighbour. Neighbour lists are in ascending index
    order.
    """
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    if resolve(backend) == "numba":
        return _neighbours_numba(points, float(eps))
    return _neighbours_numpy(points, float(eps))


@njit(cache=True)
def _expand_numba(indptr, indices, min_pts):
    n = indptr.shape[0] - 1
    labels = np.full(n, -1, dtype=np.int64)
    core = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        core[i] = indptr[i + 1] - indptr[i] >= min_pts
    queue = np.empty(n, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        head = 0
        tail = 0
        queue[tail] = i
        tail += 1
        while head < tail:
            p = queue[head]
            head += 1
            if not core[p]:
                continue
            for k in range(indptr[p], indptr[p + 1]):
                q = indices[k]
                if labels[q] == -1:
                    labels[q] = cluster
                    queue[tail] = q
                    tail += 1
        cluster += 1
    return labels, core


def _expand_python(indptr, indices, min_pts):
    n = len(indptr) - 1
    labels = np.full(n, -1, dtype=np.int64)
    core = np.diff(indptr) >= min_pts
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        queue = [i]
        head = 0
        while head < len(queue):
            p = queue[head]
            head += 1
            if not core[p]:
                continue
            for q in indices[indptr[p]:indptr[p + 1]]:
                if labels[q] == -1:
                    labels[q] = cluster
                    queue.append(q)
        cluster += 1
    return labels, core


def dbscan_labels(points, eps, min_pts, backend=None):
    """Cluster labels (``-1`` for noise) and core flags for ``points``.

    Points are visited in the given order; a border point reachable from
    several clusters joins the one expanded first.
    """
    backend = resolve(backend)
    indptr, indices = eps_neighbours(points, eps, backend=backend)
    if backend == "numba":
        return _expand_numba(indptr, indices, int(min_pts))
    return _expand_python(indptr, indices, int(min_pts))


# ---------------------------------------------------------------------------
# Gaussian-mixture merging
# ---------------------------------------------------------------------------

@njit(cache=True)
def _merge_numba(w, m, P, P_inv, order, thresh):
    k, d = m.shape
    alive = np.ones(k, dtype=np.bool_)
    out_w = np.zeros(k)
    out_m = np.zeros((k, d))
    out_P = np.zeros((k, d, d))
    n_out = 0
    for jj in range(k):
        j = order[jj]
        if not alive[j]:
            continue
        W = 0.0
        mm = np.zeros(d)
        members = np.zeros(k, dtype=np.bool_)
        for i in range(k):
            if not alive[i]:
                continue
            d2 = 0.0
            for a in range(d):
                da = m[i, a] - m[j, a]
                for b in range(d):
                    d2 += da * P_inv[j, a, b] * (m[i, b] - m[j, b])
            if d2 <= thresh:
                members[i] = True
                alive[i] = False
                W += w[i]
                for a in range(d):
                    mm[a] += w[i] * m[i, a]
        for a in range(d):
            mm[a] /= W
        PP = np.zeros((d, d))
        for i in range(k):
            if not members[i]:
                continue
            for a in range(d):
                for b in range(d):
                    PP[a, b] += w[i] * (P[i, a, b] + (m[i, a] - mm[a]) * (m[i, b] - mm[b]))
        out_w[n_out] = W
        out_m[n_out] = mm
        out_P[n_out] = PP / W
        n_out += 1
    return out_w[:n_out], out_m[:n_out], out_P[:n_out]


def _merge_numpy(w, m, P, P_inv, order, thresh):
    alive = np.ones(w.size, dtype=bool)
    out_w, out_m, out_P = [], [], []
    for j in order:
        if not alive[j]:
            continue
        dm = m - m[j]
        d2 = np.einsum("ki,ij,kj->k", dm, P_inv[j], dm)
        sel = np.flatnonzero(alive & (d2 <= thresh))
        alive[sel] = False
        ws = w[sel]
        W = ws.sum()
        mm = ws @ m[sel] / W
        dev = m[sel] - mm
        out_w.append(W)
        out_m.append(mm)
        out_P.append(np.einsum("k,kij->ij", ws, P[sel] + dev[:, :, None] * dev[:, None, :]) / W)
    return np.asarray(out_w), np.asarray(out_m), np.asarray(out_P)


def merge_components(w, m, P, thresh, backend=None):
    """Greedy moment-matched merge of a Gaussian mixture.

    Components are taken in decreasing weight; each absorbs every remaining
    component within squared Mahalanobis distance ``thresh`` (measured with
    the leading component's covariance).
    """
    w = np.ascontiguousarray(w, dtype=np.float64)
    m = np.ascontiguousarray(m, dtype=np.float64)
    P = np.ascontiguousarray(P, dtype=np.float64)
    P_inv = np.linalg.inv(P)
    order = np.argsort(-w, kind="stable")
    if resolve(backend) == "numba":
        return _merge_numba(w, m, P, P_inv, order, float(thresh))
    return _merge_numpy(w, m, P, P_inv, order, float(thresh))
