# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: pairwise semivariogram binning, regression-tree growth
and forest prediction. Arithmetic mirrors ``_pykernels`` step for step."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport qsort

cnp.import_array()


cdef struct KeyedRow:
    double v
    int64_t row


cdef int _cmp_keyed(const void* a, const void* b) noexcept nogil:
    cdef const KeyedRow* p = <const KeyedRow*> a
    cdef const KeyedRow* q = <const KeyedRow*> b
    if p.v < q.v:
        return -1
    if p.v > q.v:
        return 1
    if p.row < q.row:
        return -1
    if p.row > q.row:
        return 1
    return 0


cdef inline uint64_t _splitmix64(uint64_t* state) noexcept nogil:
    cdef uint64_t z
    state[0] = state[0] + <uint64_t> 0x9E3779B97F4A7C15
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t> 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t> 0x94D049BB133111EB
    return z ^ (z >> 31)


def splitmix64(state):
    cdef uint64_t s = <uint64_t> (int(state) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t out = _splitmix64(&s)
    return int(s), int(out)


def pair_bin_sums(x, y, values, edges):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] vv = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[::1] ev = np.ascontiguousarray(edges, dtype=np.float64)
    cdef Py_ssize_t nb = ev.shape[0]
    sums_arr = np.zeros(nb)
    counts_arr = np.zeros(nb, dtype=np.int64)
    cdef double[::1] sums = sums_arr
    cdef int64_t[::1] counts = counts_arr
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t i, j, lo, hi, mid
    cdef double dx, dy, d, dv
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                dx = xv[i] - xv[j]
                dy = yv[i] - yv[j]
                d = sqrt(dx * dx + dy * dy)
                if d <= 0.0:
                    continue
                # first k with edges[k] >= d
                lo = 0
                hi = nb
                while lo < hi:
                    mid = (lo + hi) >> 1
                    if ev[mid] < d:
                        lo = mid + 1
                    else:
                        hi = mid
                if lo >= nb:
                    continue
                dv = vv[i] - vv[j]
                sums[lo] += dv * dv
                counts[lo] += 1
    return sums_arr, counts_arr


cdef void _grow(
    const double[:, ::1] X,
    const double[::1] y,
    const double[::1] w,
    int64_t[::1] rows,
    int64_t[::1] scratch,
    KeyedRow* keyed,
    int64_t[::1] stack_node,
    int64_t[::1] stack_start,
    int64_t[::1] stack_end,
    int64_t[::1] stack_depth,
    int64_t[::1] feature,
    double[::1] threshold,
    int64_t[::1] left,
    int64_t[::1] right,
    double[::1] value,
    int64_t[::1] perm,
    int64_t max_depth,
    double min_leaf,
    int64_t max_features,
    uint64_t state,
    int64_t* n_nodes_out,
) noexcept nogil:
    cdef int64_t d = X.shape[1]
    cdef int64_t top = 0
    cdef int64_t n_nodes = 1
    cdef int64_t node, start, end, depth, k, i, j, f, r, fi, tmp, best_f, nl, mid
    cdef double W, S, mean, ymin, ymax, yc, cw, cs, cs2, tw, ts, ts2, rw, rs, rs2
    cdef double score, best_score, thr, best_thr, wr
    cdef int64_t n_seg

    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = rows.shape[0]
    stack_depth[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        n_seg = end - start

        W = 0.0
        S = 0.0
        for k in range(start, end):
            r = rows[k]
            W = W + w[r]
            S = S + w[r] * y[r]
        mean = S / W if W > 0 else 0.0
        value[node] = mean
        if (max_depth >= 0 and depth >= max_depth) or W < 2 * min_leaf or n_seg < 2:
            continue
        ymin = y[rows[start]]
        ymax = ymin
        for k in range(start + 1, end):
            r = rows[k]
            if y[r] < ymin:
                ymin = y[r]
            if y[r] > ymax:
                ymax = y[r]
        if ymin == ymax:
            continue

        for i in range(d):
            perm[i] = i
        for i in range(max_features):
            j = i + <int64_t> (_splitmix64(&state) % <uint64_t> (d - i))
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
        # insertion sort of the chosen prefix: ascending feature order
        for i in range(1, max_features):
            tmp = perm[i]
            j = i - 1
            while j >= 0 and perm[j] > tmp:
                perm[j + 1] = perm[j]
                j -= 1
            perm[j + 1] = tmp

        best_score = INFINITY
        best_f = -1
        best_thr = 0.0
        for fi in range(max_features):
            f = perm[fi]
            for k in range(n_seg):
                r = rows[start + k]
                keyed[k].v = X[r, f]
                keyed[k].row = r
            qsort(keyed, n_seg, sizeof(KeyedRow), _cmp_keyed)
            tw = 0.0
            ts = 0.0
            ts2 = 0.0
            for k in range(n_seg):
                r = keyed[k].row
                yc = y[r] - mean
                tw = tw + w[r]
                ts = ts + w[r] * yc
                ts2 = ts2 + w[r] * yc * yc
            cw = 0.0
            cs = 0.0
            cs2 = 0.0
            for k in range(n_seg - 1):
                r = keyed[k].row
                yc = y[r] - mean
                cw = cw + w[r]
                cs = cs + w[r] * yc
                cs2 = cs2 + w[r] * yc * yc
                if keyed[k].v == keyed[k + 1].v:
                    continue
                rw = tw - cw
                if cw < min_leaf or rw < min_leaf:
                    continue
                rs = ts - cs
                rs2 = ts2 - cs2
                score = (cs2 - cs * cs / cw) + (rs2 - rs * rs / rw)
                if score < best_score:
                    best_score = score
                    best_f = f
                    thr = 0.5 * (keyed[k].v + keyed[k + 1].v)
                    if thr >= keyed[k + 1].v:
                        thr = keyed[k].v
                    best_thr = thr
        if best_f < 0:
            continue

        # stable partition of rows[start:end]
        nl = 0
        for k in range(start, end):
            r = rows[k]
            if X[r, best_f] <= best_thr:
                rows[start + nl] = r
                nl += 1
            else:
                scratch[k - start - nl] = r
        for k in range(n_seg - nl):
            rows[start + nl + k] = scratch[k]
        mid = start + nl

        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes + 1
        stack_start[top] = mid
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = n_nodes
        stack_start[top] = start
        stack_end[top] = mid
        stack_depth[top] = depth + 1
        top += 1
        n_nodes += 2
    n_nodes_out[0] = n_nodes


def build_tree(X, y, w, max_depth, min_leaf, max_features, rng_state):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    w_arr = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] wv = w_arr
    rows_arr = np.flatnonzero(w_arr > 0).astype(np.int64)
    cdef int64_t n = rows_arr.shape[0]
    cdef int64_t cap = max(2 * n, 1)
    cdef int64_t d = Xv.shape[1]
    if not 1 <= max_features <= d:
        raise ValueError("max_features must lie in [1, n_features]")

    cdef int64_t[::1] rows = rows_arr
    cdef int64_t[::1] scratch = np.empty(max(n, 1), dtype=np.int64)
    keyed_buf = np.empty(max(n, 1) * sizeof(KeyedRow), dtype=np.uint8)
    cdef unsigned char[::1] keyed_bytes = keyed_buf
    cdef KeyedRow* keyed = <KeyedRow*> &keyed_bytes[0]
    cdef int64_t[::1] stack_node = np.empty(cap + 1, dtype=np.int64)
    cdef int64_t[::1] stack_start = np.empty(cap + 1, dtype=np.int64)
    cdef int64_t[::1] stack_end = np.empty(cap + 1, dtype=np.int64)
    cdef int64_t[::1] stack_depth = np.empty(cap + 1, dtype=np.int64)
    feature_arr = np.full(cap, -1, dtype=np.int64)
    threshold_arr = np.zeros(cap)
    left_arr = np.full(cap, -1, dtype=np.int64)
    right_arr = np.full(cap, -1, dtype=np.int64)
    value_arr = np.zeros(cap)
    cdef int64_t[::1] feature = feature_arr
    cdef double[::1] threshold = threshold_arr
    cdef int64_t[::1] left = left_arr
    cdef int64_t[::1] right = right_arr
    cdef double[::1] value = value_arr
    cdef int64_t[::1] perm = np.empty(max(d, 1), dtype=np.int64)
    cdef int64_t md = max_depth
    cdef double ml = min_leaf
    cdef int64_t mf = max_features
    cdef uint64_t state = <uint64_t> (int(rng_state) & 0xFFFFFFFFFFFFFFFF)
    cdef int64_t n_nodes = 0
    with nogil:
        _grow(Xv, yv, wv, rows, scratch, keyed, stack_node, stack_start, stack_end,
              stack_depth, feature, threshold, left, right, value, perm,
              md, ml, mf, state, &n_nodes)
    return (
        feature_arr[:n_nodes].copy(),
        threshold_arr[:n_nodes].copy(),
        left_arr[:n_nodes].copy(),
        right_arr[:n_nodes].copy(),
        value_arr[:n_nodes].copy(),
    )


def predict_forest(feature, threshold, left, right, value, offsets, X):
    cdef const int64_t[::1] fv = np.ascontiguousarray(feature, dtype=np.int64)
    cdef const double[::1] tv = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef const int64_t[::1] lv = np.ascontiguousarray(left, dtype=np.int64)
    cdef const int64_t[::1] rv = np.ascontiguousarray(right, dtype=np.int64)
    cdef const double[::1] vv = np.ascontiguousarray(value, dtype=np.float64)
    cdef const int64_t[::1] ov = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0]
    cdef Py_ssize_t n_trees = ov.shape[0] - 1
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, t
    cdef int64_t o, node, f
    cdef double acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for t in range(n_trees):
                o = ov[t]
                node = 0
                f = fv[o]
                while f >= 0:
                    if Xv[i, f] <= tv[o + node]:
                        node = lv[o + node]
                    else:
                        node = rv[o + node]
                    f = fv[o + node]
                acc = acc + vv[o + node]
            out[i] = acc / n_trees
    return out_arr
