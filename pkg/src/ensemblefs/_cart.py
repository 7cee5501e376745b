"""Numba kernels for binary CART trees on Gini impurity.

Trees are stored as flat parallel arrays: ``feature`` (-1 marks a leaf),
``threshold`` (go left when ``x <= threshold``), ``left``/``right`` child
indices and ``value`` (fraction of class 1 among the node's samples).
"""

import numpy as np
from numba import njit

_MIN_GAIN = 1e-12


@njit(cache=True)
def _next(state):
    # xorshift64*; state is a 1-element uint64 array
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return x * np.uint64(2685821657736338717)


@njit(cache=True)
def _randbelow(state, n):
    return np.int64(_next(state) % np.uint64(n))


@njit(cache=True)
def _gini(pos, total):
    if total == 0:
        return 0.0
    p = pos / total
    return 2.0 * p * (1.0 - p)


@njit(nogil=True, cache=True)
def build_tree(X, y, weight, presorted, max_depth, n_sub, seed, min_split):
    """Grow one tree on rows with positive ``weight`` (bootstrap counts).

    ``presorted[f]`` lists all row indices ordered by ``X[:, f]``. Each
    node's rows are kept as one segment per column, sorted by that column,
    and split segments are partitioned stably so no node ever sorts.

    Returns (feature, threshold, left, right, value, importance) where
    ``importance`` holds unnormalized Gini decrease per column of ``X``,
    each split weighted by its share of the total weight.
    """
    p = X.shape[1]
    n_all = X.shape[0]
    n = 0
    total_w = 0
    for r in range(n_all):
        if weight[r] > 0:
            n += 1
            total_w += weight[r]
    rows = np.empty((p, n), np.int64)
    for f in range(p):
        k = 0
        for i in range(n_all):
            r = presorted[f, i]
            if weight[r] > 0:
                rows[f, k] = r
                k += 1

    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    importance = np.zeros(p)

    state = np.empty(1, np.uint64)
    state[0] = np.uint64(seed) | np.uint64(1)
    perm = np.arange(p)
    chosen = np.empty(n_sub, np.int64)
    goes_left = np.zeros(n_all, np.bool_)
    buf = np.empty(n, np.int64)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        wn = 0
        pos = 0
        for i in range(start, end):
            r = rows[0, i]
            wn += weight[r]
            pos += weight[r] * y[r]
        value[node] = pos / wn
        if depth >= max_depth or wn < min_split or pos == 0 or pos == wn:
            continue
        parent = _gini(pos, wn)

        # partial Fisher-Yates draw of n_sub distinct columns
        for i in range(p):
            perm[i] = i
        for i in range(n_sub):
            j = i + _randbelow(state, p - i)
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
            chosen[i] = perm[i]
        cand = np.sort(chosen)

        best_gain = _MIN_GAIN
        best_f = -1
        best_thr = 0.0
        for f in cand:
            lw = 0
            lpos = 0
            for i in range(start, end - 1):
                r = rows[f, i]
                lw += weight[r]
                lpos += weight[r] * y[r]
                a = X[r, f]
                b = X[rows[f, i + 1], f]
                if not a < b:
                    continue
                rw = wn - lw
                child = (lw * _gini(lpos, lw) + rw * _gini(pos - lpos, rw)) / wn
                gain = parent - child
                if gain > best_gain + _MIN_GAIN or (best_f == -1 and gain > best_gain):
                    best_gain = gain
                    best_f = f
                    thr = 0.5 * (a + b)
                    if not thr < b:
                        thr = a
                    best_thr = thr
        if best_f == -1:
            continue

        n_left = 0
        for i in range(start, end):
            r = rows[best_f, i]
            goes_left[r] = X[r, best_f] <= best_thr
            if goes_left[r]:
                n_left += 1
        mid = start + n_left
        for f in range(p):
            lo = start
            hi = 0
            for i in range(start, end):
                r = rows[f, i]
                if goes_left[r]:
                    rows[f, lo] = r
                    lo += 1
                else:
                    buf[hi] = r
                    hi += 1
            for i in range(hi):
                rows[f, mid + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_thr
        importance[best_f] += (wn / total_w) * best_gain
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        st_node[sp] = rnode
        st_start[sp] = mid
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lnode
        st_start[sp] = start
        st_end[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), importance)


@njit(nogil=True, cache=True)
def forest_votes(X, roots, feature, threshold, left, right, value):
    """Number of trees voting class 1 for each row (leaf value 0.5 votes 1)."""
    n = X.shape[0]
    votes = np.zeros(n, np.int64)
    for r in range(n):
        for t in range(roots.shape[0]):
            node = roots[t]
            while feature[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            if value[node] >= 0.5:
                votes[r] += 1
    return votes
