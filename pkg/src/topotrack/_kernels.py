"""Compiled inner loops of the assignment solvers.

The solvers never mutate cost entries. Both Munkres kernels carry dual
offsets instead: u[i] is the total amount added to row i and v[j] the total
subtracted from column j, so the effective entry is always
raw[i, j] + u[i] - v[j]. Zeros are detected with a small absolute tolerance
(ZERO) because effective values are recombined from floats; the drift is
orders of magnitude below every tolerance promised by the solvers.

Per-column minima over uncovered rows (colmin_val / colmin_row) avoid full
matrix rescans when hunting zeros. colmin_row holds the smallest uncovered
row attaining the minimum, so picking the column minimizing
(colmin_row[j], j) yields the lexicographically lowest uncovered zero.
"""

import numpy as np
from numba import njit

ZERO = 1e-11

# counter slots shared by the Munkres kernels
N_PRIMES = 0
N_EPS = 1
N_AUGMENTS = 2
N_BANS = 3
N_PHASES = 4


@njit(cache=True, nogil=True)
def full_munkres_kernel(C):
    """Dense square Munkres. Returns (star_col, counters)."""
    n = C.shape[0]
    counters = np.zeros(5, dtype=np.int64)
    star_col = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return star_col, counters
    u = np.zeros(n, dtype=np.float64)
    v = np.zeros(n, dtype=np.float64)
    for i in range(n):
        mn = C[i, 0]
        for j in range(1, n):
            if C[i, j] < mn:
                mn = C[i, j]
        u[i] = -mn
    for j in range(n):
        mn = C[0, j] + u[0]
        for i in range(1, n):
            val = C[i, j] + u[i]
            if val < mn:
                mn = val
        v[j] = mn

    star_row = np.full(n, -1, dtype=np.int64)
    prime_col = np.full(n, -1, dtype=np.int64)
    row_cov = np.zeros(n, dtype=np.bool_)
    col_cov = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        for j in range(n):
            if star_row[j] == -1 and C[i, j] + u[i] - v[j] <= ZERO:
                star_col[i] = j
                star_row[j] = i
                break
    n_cov = 0
    for j in range(n):
        if star_row[j] >= 0:
            col_cov[j] = True
            n_cov += 1

    colmin_val = np.empty(n, dtype=np.float64)
    colmin_row = np.full(n, -1, dtype=np.int64)

    while n_cov < n:
        counters[N_PHASES] += 1
        for j in range(n):
            if col_cov[j]:
                colmin_val[j] = np.inf
                colmin_row[j] = -1
            else:
                mv = np.inf
                mr = -1
                for i in range(n):
                    if not row_cov[i]:
                        val = C[i, j] + u[i] - v[j]
                        if val < mv:
                            mv = val
                            mr = i
                colmin_val[j] = mv
                colmin_row[j] = mr

        while True:
            zr = -1
            zc = -1
            for j in range(n):
                if not col_cov[j] and colmin_val[j] <= ZERO:
                    r = colmin_row[j]
                    if zr == -1 or r < zr:
                        zr = r
                        zc = j
            if zr == -1:
                eps = np.inf
                for j in range(n):
                    if not col_cov[j] and colmin_val[j] < eps:
                        eps = colmin_val[j]
                counters[N_EPS] += 1
                for i in range(n):
                    if row_cov[i]:
                        u[i] += eps
                for j in range(n):
                    if not col_cov[j]:
                        v[j] += eps
                        colmin_val[j] -= eps
                continue

            counters[N_PRIMES] += 1
            prime_col[zr] = zc
            sc = star_col[zr]
            if sc == -1:
                counters[N_AUGMENTS] += 1
                r = zr
                c = zc
                while True:
                    sr = star_row[c]
                    star_row[c] = r
                    star_col[r] = c
                    if sr == -1:
                        break
                    r = sr
                    c = prime_col[sr]
                for i in range(n):
                    prime_col[i] = -1
                    row_cov[i] = False
                n_cov = 0
                for j in range(n):
                    col_cov[j] = star_row[j] >= 0
                    if col_cov[j]:
                        n_cov += 1
                break
            else:
                row_cov[zr] = True
                col_cov[sc] = False
                for j in range(n):
                    if not col_cov[j] and (colmin_row[j] == zr or j == sc):
                        mv = np.inf
                        mr = -1
                        for i in range(n):
                            if not row_cov[i]:
                                val = C[i, j] + u[i] - v[j]
                                if val < mv:
                                    mv = val
                                    mr = i
                        colmin_val[j] = mv
                        colmin_row[j] = mr
    return star_col, counters


@njit(cache=True, nogil=True)
def _rescan_column(
    j, cindptr, csc_rows, csc_vals, lastrow, u, v, row_cov, n,
    colmin_val, colmin_row,
):
    # min effective value over uncovered rows of column j; the last row
    # (index n, never covered) is checked after the interior rows so that
    # ties keep the smallest row
    mv = np.inf
    mr = -1
    for idx in range(cindptr[j], cindptr[j + 1]):
        i = csc_rows[idx]
        if not row_cov[i]:
            val = csc_vals[idx] + u[i] - v[j]
            if val < mv:
                mv = val
                mr = i
    lval = lastrow[j] - v[j]
    if lval < mv:
        mv = lval
        mr = n
    colmin_val[j] = mv
    colmin_row[j] = mr


@njit(cache=True, nogil=True)
def reduced_kernel(
    n, m, indptr, csr_cols, csr_vals, cindptr, csc_rows, csc_vals,
    lastrow, colmin_raw,
):
    """Sparse solver on the (n+1) x m reduced matrix.

    Interior entry (i, j) holds c(i, j) - cdiag1(i); the dense last row
    holds cdiag2(j). Missing interior entries are pruned matches. Returns
    (star_col, star_row, last_star, banned, u, v, counters).
    """
    counters = np.zeros(5, dtype=np.int64)
    star_col = np.full(n, -1, dtype=np.int64)
    star_row = np.full(m, -1, dtype=np.int64)
    last_star = np.zeros(m, dtype=np.bool_)
    banned = np.zeros(m, dtype=np.bool_)
    u = np.zeros(n, dtype=np.float64)
    v = np.zeros(m, dtype=np.float64)
    if m == 0:
        return star_col, star_row, last_star, banned, u, v, counters

    # initial column subtraction; a column whose minimum sits in the last
    # row exposes a last-row zero, which is banned if every interior entry
    # stays strictly positive (those matches can never participate)
    for j in range(m):
        mn = lastrow[j]
        for idx in range(cindptr[j], cindptr[j + 1]):
            if csc_vals[idx] < mn:
                mn = csc_vals[idx]
        v[j] = mn
        if lastrow[j] - mn <= ZERO and colmin_raw[j] > mn + ZERO:
            banned[j] = True
            counters[N_BANS] += 1

    # star independent zeros, interior rows first in row-major order, then
    # last-row zeros (all mutually independent)
    for i in range(n):
        for idx in range(indptr[i], indptr[i + 1]):
            j = csr_cols[idx]
            if (
                not banned[j]
                and star_row[j] == -1
                and not last_star[j]
                and csr_vals[idx] - v[j] <= ZERO
            ):
                star_col[i] = j
                star_row[j] = i
                break
    for j in range(m):
        if not banned[j] and star_row[j] == -1 and lastrow[j] - v[j] <= ZERO:
            last_star[j] = True

    prime_col = np.full(n, -1, dtype=np.int64)
    row_cov = np.zeros(n, dtype=np.bool_)
    col_cov = np.zeros(m, dtype=np.bool_)
    resolved = 0
    for j in range(m):
        col_cov[j] = star_row[j] >= 0 or last_star[j]
        if col_cov[j] or banned[j]:
            resolved += 1

    colmin_val = np.empty(m, dtype=np.float64)
    colmin_row = np.full(m, -1, dtype=np.int64)

    # every per-phase loop walks one of three shrinking lists instead of
    # the full ranges: live_cols (columns still unresolved at phase
    # start), extra_cols (starred columns a prime uncovered this phase),
    # primed_rows (rows primed this phase). Iteration order differs from
    # an ascending scan but every consumer is order-free: rescans and v
    # updates act per column, eps takes an exact min, and the zero hunt
    # picks the lexicographic minimum over the whole queue.
    live_cols = np.empty(m, dtype=np.int64)
    n_live = 0
    for j in range(m):
        if not col_cov[j] and not banned[j]:
            live_cols[n_live] = j
            n_live += 1
    extra_cols = np.empty(m, dtype=np.int64)
    n_extra = 0
    primed_rows = np.empty(n, dtype=np.int64)
    n_primed = 0

    # columns whose current minimum may be zero, deduplicated by `queued`
    # and compacted lazily while hunting; scanning only these keeps the
    # per-prime cost proportional to the handful of live zeros instead
    # of m
    zero_cols = np.empty(m, dtype=np.int64)
    queued = np.zeros(m, dtype=np.bool_)
    qlen = 0

    while resolved < m:
        counters[N_PHASES] += 1
        for k in range(qlen):
            queued[zero_cols[k]] = False
        qlen = 0
        w = 0
        for k in range(n_live):
            j = live_cols[k]
            if banned[j] or col_cov[j]:
                continue
            live_cols[w] = j
            w += 1
            _rescan_column(
                j, cindptr, csc_rows, csc_vals, lastrow, u, v, row_cov, n,
                colmin_val, colmin_row,
            )
            if colmin_val[j] <= ZERO:
                zero_cols[qlen] = j
                queued[j] = True
                qlen += 1
        n_live = w
        n_extra = 0
        n_primed = 0

        while True:
            zr = -1
            zc = -1
            w = 0
            for k in range(qlen):
                j = zero_cols[k]
                if banned[j] or col_cov[j] or colmin_val[j] > ZERO:
                    queued[j] = False
                    continue
                zero_cols[w] = j
                w += 1
                r = colmin_row[j]
                if zr == -1 or r < zr or (r == zr and j < zc):
                    zr = r
                    zc = j
            qlen = w
            if zr == -1:
                eps = np.inf
                for k in range(n_live):
                    j = live_cols[k]
                    if not banned[j] and colmin_val[j] < eps:
                        eps = colmin_val[j]
                for k in range(n_extra):
                    j = extra_cols[k]
                    if not banned[j] and colmin_val[j] < eps:
                        eps = colmin_val[j]
                counters[N_EPS] += 1
                for k in range(n_primed):
                    u[primed_rows[k]] += eps
                for k in range(n_live + n_extra):
                    if k < n_live:
                        j = live_cols[k]
                    else:
                        j = extra_cols[k - n_live]
                    if banned[j]:
                        continue
                    v[j] += eps
                    colmin_val[j] -= eps
                    # a zero surfacing in the last row of a column whose
                    # interior entries all stay strictly above their row
                    # residuals proves the column belongs to the diagonal
                    if lastrow[j] - v[j] <= ZERO and colmin_raw[j] > v[j] + ZERO:
                        banned[j] = True
                        counters[N_BANS] += 1
                        resolved += 1
                        colmin_val[j] = np.inf
                    elif colmin_val[j] <= ZERO and not queued[j]:
                        zero_cols[qlen] = j
                        queued[j] = True
                        qlen += 1
                continue

            counters[N_PRIMES] += 1
            if zr < n:
                prime_col[zr] = zc
                primed_rows[n_primed] = zr
                n_primed += 1
            if zr == n or star_col[zr] == -1:
                counters[N_AUGMENTS] += 1
                r = zr
                c = zc
                while True:
                    sr = star_row[c]
                    if r == n:
                        last_star[c] = True
                        star_row[c] = -1
                    else:
                        star_row[c] = r
                        star_col[r] = c
                    if sr == -1:
                        break
                    r = sr
                    c = prime_col[sr]
                # the path's terminal column c is the one that gained a
                # star (or went to the last row); every other cover state
                # rolls back to its phase-start value
                for k in range(n_primed):
                    i = primed_rows[k]
                    prime_col[i] = -1
                    row_cov[i] = False
                for k in range(n_extra):
                    col_cov[extra_cols[k]] = True
                col_cov[c] = True
                resolved += 1
                break
            else:
                sc = star_col[zr]
                row_cov[zr] = True
                col_cov[sc] = False
                extra_cols[n_extra] = sc
                n_extra += 1
                # covering zr can only disturb columns whose minimum sat at
                # zr, and those all hold an interior entry of row zr; the
                # freshly uncovered sc needs a rescan regardless
                for idx in range(indptr[zr], indptr[zr + 1]):
                    j = csr_cols[idx]
                    if not banned[j] and not col_cov[j] and colmin_row[j] == zr:
                        _rescan_column(
                            j, cindptr, csc_rows, csc_vals, lastrow, u, v,
                            row_cov, n, colmin_val, colmin_row,
                        )
                        if colmin_val[j] <= ZERO and not queued[j]:
                            zero_cols[qlen] = j
                            queued[j] = True
                            qlen += 1
                if not banned[sc]:
                    _rescan_column(
                        sc, cindptr, csc_rows, csc_vals, lastrow, u, v,
                        row_cov, n, colmin_val, colmin_row,
                    )
                    if colmin_val[sc] <= ZERO and not queued[sc]:
                        zero_cols[qlen] = sc
                        queued[sc] = True
                        qlen += 1
    return star_col, star_row, last_star, banned, u, v, counters


@njit(cache=True, nogil=True)
def auction_kernel(V, prices, eps_start, eps_final, max_bids):
    """Forward auction with epsilon scaling and a free null option.

    V[i, j] is the benefit of giving object j to person i; taking the null
    option is always worth exactly 0. Prices are read and updated in place
    so a caller can warm-start. Returns (person_obj, obj_person, rounds,
    stages, bids, converged) where person_obj holds -2 for null.
    """
    n, m = V.shape
    person_obj = np.full(n, -1, dtype=np.int64)
    obj_person = np.full(m, -1, dtype=np.int64)
    rounds = 0
    stages = 0
    bids = 0
    eps = eps_start
    if eps < eps_final:
        eps = eps_final
    while True:
        stages += 1
        for i in range(n):
            person_obj[i] = -1
        for j in range(m):
            obj_person[j] = -1
        pending = n
        while pending > 0:
            rounds += 1
            for i in range(n):
                if person_obj[i] != -1:
                    continue
                bids += 1
                if bids > max_bids:
                    return person_obj, obj_person, rounds, stages, bids, False
                best = 0.0  # the null option
                second = 0.0
                bj = -2
                for j in range(m):
                    val = V[i, j] - prices[j]
                    if val > best:
                        second = best
                        best = val
                        bj = j
                    elif val > second:
                        second = val
                if bj == -2:
                    person_obj[i] = -2
                    pending -= 1
                else:
                    prices[bj] += best - second + eps
                    prev = obj_person[bj]
                    if prev >= 0:
                        person_obj[prev] = -1
                    else:
                        pending -= 1
                    obj_person[bj] = i
                    person_obj[i] = bj
        # an object ending the stage unassigned was never bid during it;
        # its price is leftover from earlier stages and only pads the
        # duality gap, so drop it (held objects keep their prices)
        for j in range(m):
            if obj_person[j] == -1:
                prices[j] = 0.0
        if eps <= eps_final:
            return person_obj, obj_person, rounds, stages, bids, True
        eps = eps / 5.0
        if eps < eps_final:
            eps = eps_final
