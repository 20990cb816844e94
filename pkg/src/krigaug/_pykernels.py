"""Pure-numpy kernels.

Reference implementations of the routines in ``_ckernels.pyx``. Both must
produce bit-identical output: every reduction here is a sequential
left-to-right accumulation (``np.cumsum``/``np.bincount``), matching the
plain loops of the compiled version, and the tree builder draws its
per-node feature subsets from the same splitmix64 stream.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(state):
    """Advance a splitmix64 state; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def pair_bin_sums(x, y, values, edges):
    """Sum of squared increments and pair counts per distance bin.

    Bin ``k`` holds unordered pairs with distance in ``(edges[k-1], edges[k]]``
    (``edges[-1]`` is taken as 0). Pairs outside every bin are ignored.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    v = np.ascontiguousarray(values, dtype=np.float64)
    edges = np.ascontiguousarray(edges, dtype=np.float64)
    nb = edges.shape[0]
    sums = np.zeros(nb)
    counts = np.zeros(nb, dtype=np.int64)
    n = x.shape[0]
    for i in range(n - 1):
        dx = x[i] - x[i + 1:]
        dy = y[i] - y[i + 1:]
        d = np.sqrt(dx * dx + dy * dy)
        k = np.searchsorted(edges, d, side="left")
        keep = (d > 0.0) & (k < nb)
        if not keep.any():
            continue
        dv = v[i] - v[i + 1:][keep]
        kk = k[keep]
        # np.add.at is unbuffered: accumulates in pair order like the C loop
        np.add.at(sums, kk, dv * dv)
        counts += np.bincount(kk, minlength=nb)
    return sums, counts


def build_tree(X, y, w, max_depth, min_leaf, max_features, rng_state):
    """Grow one CART regression tree.

    Parameters
    ----------
    X : (n, d) float64
        Feature matrix (already restricted to the usable columns).
    y : (n,) float64
        Labels.
    w : (n,) float64
        Non-negative integer-valued sample weights (bootstrap counts). Rows
        with zero weight do not participate.
    max_depth : int
        Negative for unlimited depth.
    min_leaf : int
        Minimum total weight on each side of a split.
    max_features : int
        Size of the random feature subset tried at every node.
    rng_state : int
        splitmix64 seed for the feature subsets.

    Returns
    -------
    feature, threshold, left, right, value : ndarrays
        Node arrays in creation order. Leaves have ``feature == -1``.
        Samples go left when ``x[feature] <= threshold``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    d = X.shape[1]
    rows = np.flatnonzero(w > 0)
    cap = max(2 * rows.shape[0], 1)
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    state = int(rng_state) & _MASK64
    n_nodes = 1
    stack = [(0, rows, 0)]
    while stack:
        node, seg, depth = stack.pop()
        ws = w[seg]
        ys = y[seg]
        W = np.cumsum(ws)[-1] if seg.shape[0] else 0.0
        S = np.cumsum(ws * ys)[-1] if seg.shape[0] else 0.0
        mean = S / W if W > 0 else 0.0
        value[node] = mean
        if (max_depth >= 0 and depth >= max_depth) or W < 2 * min_leaf or seg.shape[0] < 2:
            continue
        if ys.min() == ys.max():
            continue
        perm = list(range(d))
        for i in range(max_features):
            state, r = splitmix64(state)
            j = i + r % (d - i)
            perm[i], perm[j] = perm[j], perm[i]
        chosen = sorted(perm[:max_features])

        yc = ys - mean
        best_score = np.inf
        best_f = -1
        best_thr = 0.0
        for f in chosen:
            xs = X[seg, f]
            order = np.lexsort((seg, xs))
            v = xs[order]
            wo = ws[order]
            yo = yc[order]
            cw = np.cumsum(wo)
            cs = np.cumsum(wo * yo)
            cs2 = np.cumsum(wo * yo * yo)
            tw, ts, ts2 = cw[-1], cs[-1], cs2[-1]
            cw, cs, cs2 = cw[:-1], cs[:-1], cs2[:-1]
            rw = tw - cw
            valid = (v[:-1] != v[1:]) & (cw >= min_leaf) & (rw >= min_leaf)
            if not valid.any():
                continue
            idx = np.flatnonzero(valid)
            cwv, csv, cs2v, rwv = cw[idx], cs[idx], cs2[idx], rw[idx]
            rs = ts - csv
            rs2 = ts2 - cs2v
            score = (cs2v - csv * csv / cwv) + (rs2 - rs * rs / rwv)
            m = int(np.argmin(score))
            if score[m] < best_score:
                best_score = score[m]
                best_f = f
                i = idx[m]
                thr = 0.5 * (v[i] + v[i + 1])
                if thr >= v[i + 1]:
                    thr = v[i]
                best_thr = thr
        if best_f < 0:
            continue
        go_left = X[seg, best_f] <= best_thr
        lid = n_nodes
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = lid + 1
        stack.append((lid + 1, seg[~go_left], depth + 1))
        stack.append((lid, seg[go_left], depth + 1))
    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


def predict_forest(feature, threshold, left, right, value, offsets, X):
    """Mean prediction of a forest stored as concatenated node arrays.

    ``offsets`` has one entry per tree plus a final end marker; child
    indices are local to their tree.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    acc = np.zeros(n)
    rows = np.arange(n)
    for t in range(n_trees):
        o = offsets[t]
        node = np.zeros(n, dtype=np.int64)
        while True:
            f = feature[o + node]
            active = f >= 0
            if not active.any():
                break
            a = np.flatnonzero(active)
            na = node[a]
            go_left = X[rows[a], f[a]] <= threshold[o + na]
            node[a] = np.where(go_left, left[o + na], right[o + na])
        acc += value[o + node]
    return acc / n_trees
