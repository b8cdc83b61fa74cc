"""Independent reference implementations used only by tests.

Everything here is deliberately written without reusing library code: the
diagram oracle recomputes connected components from scratch with BFS after
every vertex insertion, and the matching oracle enumerates assignments
exhaustively. Slow and simple on purpose.
"""

import itertools

import numpy as np


def grid_adjacency(dims):
    """Freudenthal adjacency, rebuilt independently with explicit loops."""
    nx, ny, nz = dims
    if nz == 1:
        offs = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (1, 1, 0), (-1, -1, 0)]
    else:
        offs = []
        for sign in (1, -1):
            for dx, dy, dz in itertools.product((0, sign), repeat=3):
                if (dx, dy, dz) != (0, 0, 0):
                    offs.append((dx, dy, dz))
    adj = []
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                cur = []
                for dx, dy, dz in offs:
                    a, b, c = x + dx, y + dy, z + dz
                    if 0 <= a < nx and 0 <= b < ny and 0 <= c < nz:
                        cur.append(a + nx * (b + ny * c))
                adj.append(cur)
    return adj


def sweep_components_oracle(values, dims, descending):
    """Pairs from scratch: insert vertices one by one, BFS the active set.

    Returns (finite_pairs, first_vertex, last_vertex) where finite_pairs is a
    list of (extremum_vertex, saddle_vertex).
    """
    values = np.asarray(values, dtype=float).ravel()
    n = values.size
    adj = grid_adjacency(dims)
    if descending:
        order = sorted(range(n), key=lambda v: (-values[v], -v))
    else:
        order = sorted(range(n), key=lambda v: (values[v], v))
    rank = {v: i for i, v in enumerate(order)}
    active = set()
    comps = {}  # oldest vertex -> set of member vertices
    pairs = []
    for v in order:
        active.add(v)
        seen = {v}
        stack = [v]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w in active and w not in seen:
                    seen.add(w)
                    stack.append(w)
        merged = [rep for rep in comps if rep in seen]
        new_rep = min(merged + [v], key=lambda r: rank[r])
        for rep in merged:
            if rep != new_rep:
                pairs.append((rep, v))
            del comps[rep]
        comps[new_rep] = seen
    return pairs, order[0], order[-1]


def diagram_signature_oracle(values, dims):
    """Set-of-tuples signature of the expected diagram of a field.

    Tuples are (pair_class, essential, birth_vertex, death_vertex) where the
    vertices are (extremum, saddle) for min_saddle and (saddle, extremum) for
    saddle_max; the essential rows carry (global_min, global_max).
    """
    lo_pairs, gmin, gmax = sweep_components_oracle(values, dims, descending=False)
    hi_pairs, _, _ = sweep_components_oracle(values, dims, descending=True)
    sig = set()
    for m, s in lo_pairs:
        sig.add(("min_saddle", False, m, s))
    sig.add(("min_saddle", True, gmin, gmax))
    for M, s in hi_pairs:
        sig.add(("saddle_max", False, s, M))
    sig.add(("saddle_max", True, gmin, gmax))
    return sig


def diagram_signature(diagram):
    """The same signature computed from a PersistenceDiagram."""
    sig = set()
    for p in diagram.pairs:
        sig.add(
            (
                p.pair_class,
                p.essential,
                p.birth_point.vertex_id,
                p.death_point.vertex_id,
            )
        )
    return sig


def local_extrema_count(values, dims, kind):
    """Count local minima or maxima under the (value, id) tie-broken order."""
    values = np.asarray(values, dtype=float).ravel()
    adj = grid_adjacency(dims)
    count = 0
    for v in range(values.size):
        if kind == "min":
            is_ext = all(
                (values[u], u) > (values[v], v) for u in adj[v]
            )
        else:
            is_ext = all(
                (values[u], u) < (values[v], v) for u in adj[v]
            )
        count += is_ext
    return count


def exhaustive_min_matching(costs, diag1, diag2):
    """Optimal partial matching by brute enumeration (powered domain).

    Returns (best_cost, best_matchings) where best_matchings is the set of
    frozensets of (i, j) matches attaining the optimum within 1e-12.
    """
    costs = np.asarray(costs, dtype=float)
    diag1 = np.asarray(diag1, dtype=float)
    diag2 = np.asarray(diag2, dtype=float)
    n, m = costs.shape
    base = diag1.sum() + diag2.sum()
    best = base
    arg = {frozenset()}
    for k in range(1, min(n, m) + 1):
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.combinations(range(m), k):
                for perm in itertools.permutations(cols):
                    c = base
                    for i, j in zip(rows, perm):
                        c += costs[i, j] - diag1[i] - diag2[j]
                    if c < best - 1e-12:
                        best = c
                        arg = {frozenset(zip(rows, perm))}
                    elif abs(c - best) <= 1e-12:
                        arg.add(frozenset(zip(rows, perm)))
    return best, arg
