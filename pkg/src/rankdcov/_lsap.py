"""Compiled kernels for the assignment solvers."""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def hungarian_kernel(cost):
    # Shortest augmenting path with row/column potentials; rows are inserted
    # in index order and ties go to the lowest column index.
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j] = row (1-based) matched to column j
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.zeros(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = inf
            used[j] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    perm = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        perm[p[j] - 1] = j - 1
    return perm, u[1:].copy(), v[1:].copy()


# --------------------------------------------------------------------------
# bit-scaling solver


@njit(cache=True)
def _augment_maximal(cost, alpha, beta, row_mate, col_mate, marked, nxt, path_cols, path_rows):
    # Depth-first search from every exposed column for vertex-disjoint
    # augmenting paths in the admissible graph, augmenting each one as found.
    n = cost.shape[0]
    for i in range(n):
        marked[i] = False
    for j in range(n):
        nxt[j] = 0
    found = 0
    for root in range(n):
        if col_mate[root] != -1:
            continue
        depth = 0
        path_cols[0] = root
        while depth >= 0:
            j = path_cols[depth]
            hit = -1
            while nxt[j] < n:
                i = nxt[j]
                nxt[j] += 1
                if not marked[i] and row_mate[i] != j and alpha[i] + beta[j] == cost[i, j] + 1:
                    hit = i
                    break
            if hit == -1:
                depth -= 1
                continue
            marked[hit] = True
            path_rows[depth] = hit
            k = row_mate[hit]
            if k == -1:
                # augment along path_cols[0..depth], path_rows[0..depth]
                for t in range(depth + 1):
                    r = path_rows[t]
                    c = path_cols[t]
                    row_mate[r] = c
                    col_mate[c] = r
                    alpha[r] -= 1
                found += 1
                break
            depth += 1
            path_cols[depth] = k
    return found


@njit(cache=True)
def _hungarian_search(cost, alpha, beta, row_mate, col_mate):
    # Grow alternating trees from all exposed columns, shifting duals until an
    # admissible edge reaches an exposed row.
    n = cost.shape[0]
    in_LS = np.zeros(n, dtype=np.bool_)
    in_LT = np.zeros(n, dtype=np.bool_)
    slack = np.empty(n, dtype=np.int64)
    big = np.iinfo(np.int64).max
    for i in range(n):
        slack[i] = big
    for j in range(n):
        if col_mate[j] == -1:
            in_LT[j] = True
            for i in range(n):
                s = cost[i, j] + 1 - alpha[i] - beta[j]
                if s < slack[i]:
                    slack[i] = s
    while True:
        delta = big
        arg = -1
        for i in range(n):
            if not in_LS[i] and slack[i] < delta:
                delta = slack[i]
                arg = i
        if delta > 0:
            for i in range(n):
                if in_LS[i]:
                    alpha[i] -= delta
                else:
                    slack[i] -= delta
            for j in range(n):
                if in_LT[j]:
                    beta[j] += delta
        i = arg
        if row_mate[i] == -1:
            return
        in_LS[i] = True
        k = row_mate[i]
        in_LT[k] = True
        for r in range(n):
            if not in_LS[r]:
                s = cost[r, k] + 1 - alpha[r] - beta[k]
                if s < slack[r]:
                    slack[r] = s


@njit(cache=True)
def _match_stage(cost, alpha, beta):
    n = cost.shape[0]
    row_mate = np.full(n, -1, dtype=np.int64)
    col_mate = np.full(n, -1, dtype=np.int64)
    marked = np.zeros(n, dtype=np.bool_)
    nxt = np.zeros(n, dtype=np.int64)
    path_cols = np.empty(n, dtype=np.int64)
    path_rows = np.empty(n, dtype=np.int64)
    matched = 0
    phases = 0
    while True:
        matched += _augment_maximal(
            cost, alpha, beta, row_mate, col_mate, marked, nxt, path_cols, path_rows
        )
        phases += 1
        if matched == n:
            break
        _hungarian_search(cost, alpha, beta, row_mate, col_mate)
    return row_mate, phases


@njit(cache=True)
def gabow_tarjan_kernel(scaled, nbits):
    # scaled = (n + 1) * cost; stage r works on the top r bits of every entry.
    n = scaled.shape[0]
    alpha = np.zeros(n, dtype=np.int64)
    beta = np.zeros(n, dtype=np.int64)
    row_mate = np.full(n, -1, dtype=np.int64)
    total_phases = 0
    stage_cost = np.empty_like(scaled)
    for r in range(1, nbits + 1):
        shift = nbits - r
        for i in range(n):
            for j in range(n):
                stage_cost[i, j] = scaled[i, j] >> shift
        if r > 1:
            # doubling alone would allow slack 2 on every edge; one unit less
            # on the rows restores 1-feasibility for the empty matching
            for i in range(n):
                alpha[i] = 2 * alpha[i] - 1
            for j in range(n):
                beta[j] = 2 * beta[j]
        row_mate, phases = _match_stage(stage_cost, alpha, beta)
        total_phases += phases
    return row_mate, total_phases


@njit(cache=True)
def exact_duals(cost, perm, alpha):
    # Bellman-Ford on rows: alpha_i <= alpha_k + c[i, perm[k]] - c[k, perm[k]].
    # Terminates because the matching is optimal (no negative cycles).
    n = cost.shape[0]
    for _ in range(n + 1):
        changed = False
        for k in range(n):
            base = alpha[k] - cost[k, perm[k]]
            for i in range(n):
                cand = base + cost[i, perm[k]]
                if cand < alpha[i]:
                    alpha[i] = cand
                    changed = True
        if not changed:
            break
    beta = np.empty(n, dtype=cost.dtype)
    for i in range(n):
        beta[perm[i]] = cost[i, perm[i]] - alpha[i]
    return alpha, beta, changed
