"""Exact and approximate solvers for the diagram assignment problem.

Matching two diagrams means choosing a partial injection between their
points: matched points pay the lifted distance, unmatched points pay their
own diagonal cost. All arithmetic happens on costs raised to the nu-th
power so the objective stays an additive sum; callers take the 1/nu root
when they want a distance.

Four routes to the same optimum (the last one approximate):

- ``solve_full_munkres``: the classical (n+m) x (n+m) matrix whose
  top-right and bottom-left blocks hold diagonal costs. Exact, dense,
  the reference everything else is measured against.
- ``solve_reduced``: an (n+1) x m matrix whose last row carries the
  per-column diagonal costs and whose interior rows are shifted by the
  per-row diagonal costs, stored sparsely with pruned entries absent.
  Exact, and much faster when most points sit near the diagonal.
- ``solve_auction``: epsilon-scaled forward auction with a free null
  option per row; cost exceeds the optimum by at most a declared budget.
- ``brute_force``: exhaustive enumeration for tiny instances.

The reduced solver counts a column as settled when it is matched to an
interior row, starred in the last row, or banned. Banning happens when a
zero surfaces in the last row of a column whose stored interior entries
all exceed the column's accumulated subtraction: matching that column to
any row would then cost strictly more than sending it to the diagonal, so
no optimum does. Running until every column is settled (rather than
stopping after min(m, n) covered lines) is what makes the result exact;
stopping early can leave a strictly cheaper diagonal swap undiscovered.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._kernels import (
    N_AUGMENTS,
    N_BANS,
    N_EPS,
    N_PHASES,
    N_PRIMES,
    ZERO,
    auction_kernel,
    full_munkres_kernel,
    reduced_kernel,
)
from .metric import powered_cost_arrays

SOLVERS = ("reduced", "full", "auction", "brute")

_SOLVER_LABELS = {
    "reduced": "reduced_munkres",
    "full": "full_munkres",
    "auction": "auction",
    "brute": "brute_force",
}

_BRUTE_LIMIT = 12
_AUCTION_MAX_BIDS = 5_000_000
_AUCTION_MAX_CORRECTIONS = 1


class AuctionNonConvergence(RuntimeError):
    """Auction hit its iteration cap or failed its cost certificate.

    The partial result (best assignment found) rides along in ``result``.
    """

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True, eq=False)
class ReducedState:
    """Terminal state of the sparse solver, kept for inspection.

    Arrays live in solver orientation: when ``transposed`` is true the
    rows correspond to the second diagram. The stored entries are the
    untouched reduced-matrix values; the duals accumulated by the solver
    are folded in by ``current_entry``, and adding both residuals on top
    recovers the original powered cost (``reconstructed_entry``).
    """

    n_cols: int
    transposed: bool
    banned_columns: frozenset[int]
    _indptr: np.ndarray
    _cols: np.ndarray
    _vals: np.ndarray
    _last_row: np.ndarray
    _u: np.ndarray
    _v: np.ndarray
    _diag_row: np.ndarray

    @property
    def n_rows(self):
        """Interior row count plus the diagonal row."""
        return len(self._u) + 1

    @cached_property
    def entries(self):
        """Sparse map (row, col) -> stored value; pruned cells absent.

        Row ``n_rows - 1`` is the diagonal row, always fully present.
        """
        out = {}
        n = len(self._u)
        for i in range(n):
            for idx in range(self._indptr[i], self._indptr[i + 1]):
                out[(i, int(self._cols[idx]))] = float(self._vals[idx])
        for j in range(self.n_cols):
            out[(n, j)] = float(self._last_row[j])
        return out

    @property
    def row_residuals(self):
        """Length n_rows; the diagonal row never accumulates epsilon."""
        return np.append(self._diag_row - self._u, 0.0)

    @property
    def col_residuals(self):
        return self._v.copy()

    def current_entry(self, i, j):
        """Stored value adjusted by the duals; None for a pruned cell."""
        if i == len(self._u):
            return float(self._last_row[j] - self._v[j])
        for idx in range(self._indptr[i], self._indptr[i + 1]):
            if self._cols[idx] == j:
                return float(self._vals[idx] + self._u[i] - self._v[j])
        return None

    def reconstructed_entry(self, i, j):
        cur = self.current_entry(i, j)
        if cur is None:
            return None
        return cur + float(self.row_residuals[i]) + float(self._v[j])


@dataclass(frozen=True, eq=False)
class AssignmentResult:
    """A partial injection between two diagrams plus its powered cost.

    ``matches`` holds (index in D1, index in D2) sorted by the first
    index; every index of either diagram appears exactly once across
    matches and the two unmatched tuples. ``total_cost`` is the sum of
    powered costs, before any 1/nu root.
    """

    matches: tuple
    unmatched_1: tuple
    unmatched_2: tuple
    total_cost: float
    solver: str
    stats: dict = field(default_factory=dict)
    reduced_state: ReducedState | None = None

    def to_json(self):
        return {
            "matches": [[int(i), int(j)] for i, j in self.matches],
            "unmatched_1": [int(i) for i in self.unmatched_1],
            "unmatched_2": [int(j) for j in self.unmatched_2],
            "total_cost": float(self.total_cost),
            "solver": self.solver,
            "stats": _plain_stats(self.stats),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            matches=tuple((int(i), int(j)) for i, j in obj["matches"]),
            unmatched_1=tuple(int(i) for i in obj["unmatched_1"]),
            unmatched_2=tuple(int(j) for j in obj["unmatched_2"]),
            total_cost=float(obj["total_cost"]),
            solver=str(obj["solver"]),
            stats=dict(obj["stats"]),
        )


def _plain_stats(stats):
    out = {}
    for key, val in stats.items():
        if isinstance(val, (bool, str)):
            out[key] = val
        elif isinstance(val, (int, np.integer)):
            out[key] = int(val)
        else:
            out[key] = float(val)
    return out


def _as_cost_arrays(costs, diag1, diag2):
    costs = np.ascontiguousarray(costs, dtype=np.float64)
    diag1 = np.ascontiguousarray(diag1, dtype=np.float64)
    diag2 = np.ascontiguousarray(diag2, dtype=np.float64)
    if costs.ndim != 2 or costs.shape != (len(diag1), len(diag2)):
        raise ValueError(
            f"cost matrix {costs.shape} does not line up with "
            f"{len(diag1)} row and {len(diag2)} column diagonal costs"
        )
    if not (
        np.all(np.isfinite(costs))
        and np.all(np.isfinite(diag1))
        and np.all(np.isfinite(diag2))
    ):
        raise ValueError("assignment costs must be finite")
    return costs, diag1, diag2


def _total_cost(matches, n, m, costs, diag1, diag2):
    matched1 = np.zeros(n, dtype=bool)
    matched2 = np.zeros(m, dtype=bool)
    total = 0.0
    for i, j in matches:
        matched1[i] = True
        matched2[j] = True
        total += costs[i, j]
    total += float(diag1[~matched1].sum()) + float(diag2[~matched2].sum())
    return total


def _assemble(matches, n, m, costs, diag1, diag2, label, stats, state=None):
    matches = tuple(sorted(matches))
    matched1 = {i for i, _ in matches}
    matched2 = {j for _, j in matches}
    return AssignmentResult(
        matches=matches,
        unmatched_1=tuple(i for i in range(n) if i not in matched1),
        unmatched_2=tuple(j for j in range(m) if j not in matched2),
        total_cost=_total_cost(matches, n, m, costs, diag1, diag2),
        solver=label,
        stats=stats,
        reduced_state=state,
    )


def _all_diagonal(n, m, diag1, diag2, label, t0):
    stats = {"wall_ms": (time.perf_counter() - t0) * 1e3, "n_rows": n, "n_cols": m}
    return AssignmentResult(
        matches=(),
        unmatched_1=tuple(range(n)),
        unmatched_2=tuple(range(m)),
        total_cost=float(diag1.sum()) + float(diag2.sum()),
        solver=label,
        stats=stats,
    )


def _full_costs(costs, diag1, diag2, label, t0):
    n, m = costs.shape
    if n == 0 or m == 0:
        return _all_diagonal(n, m, diag1, diag2, label, t0)
    side = n + m
    C = np.zeros((side, side), dtype=np.float64)
    C[:n, :m] = costs
    C[:n, m:] = diag1[:, None]
    C[n:, :m] = diag2[None, :]
    star_col, counters = full_munkres_kernel(C)
    matches = [(i, int(star_col[i])) for i in range(n) if star_col[i] < m]
    stats = {
        "wall_ms": (time.perf_counter() - t0) * 1e3,
        "n_rows": n,
        "n_cols": m,
        "primes": counters[N_PRIMES],
        "eps_phases": counters[N_EPS],
        "augments": counters[N_AUGMENTS],
        "phases": counters[N_PHASES],
    }
    return _assemble(matches, n, m, costs, diag1, diag2, label, stats)


def _prunable_from_costs(costs, diag1, diag2):
    # a match costing more than both diagonal exits combined is never
    # used by any optimum (in the powered domain the bound is looser
    # than the geometric predicate but just as sound)
    return costs > diag1[:, None] + diag2[None, :]


def _reduced_costs(costs, diag1, diag2, prunable, label, t0, force_fallback):
    n0, m0 = costs.shape
    if n0 == 0 or m0 == 0:
        return _all_diagonal(n0, m0, diag1, diag2, label, t0)

    transposed = n0 > m0
    if transposed:
        ck = np.ascontiguousarray(costs.T)
        d1k, d2k = diag2, diag1
        pk = prunable.T if prunable is not None else None
    else:
        ck, d1k, d2k, pk = costs, diag1, diag2, prunable
    n, m = ck.shape

    if pk is None:
        rows, cols = np.nonzero(np.ones((n, m), dtype=bool))
    else:
        rows, cols = np.nonzero(~pk)
    vals = ck[rows, cols] - d1k[rows]
    nnz = len(rows)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    order = np.lexsort((rows, cols))
    csc_rows = np.ascontiguousarray(rows[order])
    csc_vals = np.ascontiguousarray(vals[order])
    cindptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=m), out=cindptr[1:])
    colmin_raw = np.full(m, np.inf)
    np.minimum.at(colmin_raw, cols, vals)
    lastrow = np.ascontiguousarray(d2k)

    star_col, star_row, last_star, banned, u, v, counters = reduced_kernel(
        n, m,
        indptr, np.ascontiguousarray(cols), np.ascontiguousarray(vals),
        cindptr, csc_rows, csc_vals,
        lastrow, colmin_raw,
    )

    state = ReducedState(
        n_cols=m,
        transposed=transposed,
        banned_columns=frozenset(int(j) for j in np.nonzero(banned)[0]),
        _indptr=indptr,
        _cols=np.ascontiguousarray(cols),
        _vals=vals,
        _last_row=lastrow,
        _u=u,
        _v=v,
        _diag_row=d1k,
    )

    # terminal certificate: the found solution costs sum(v) - sum(u) and
    # the duals bound every feasible solution from below by that same
    # number, provided (a) no adjusted entry is negative, (b) matched
    # cells and diagonal columns sit exactly at zero, (c) unmatched rows
    # carry no dual. Exact arithmetic guarantees all three; a violation
    # means floats corrupted the run, and the dense reference redoes the
    # leftover subproblem (columns proven diagonal stay out of it)
    violated = force_fallback
    if not violated:
        tol = 1e-9
        adj = vals + u[rows] - v[cols]
        violated = bool(np.any(adj < -tol)) or bool(np.any(lastrow - v < -tol))
    if not violated:
        # rows/cols come out of nonzero in row-major order, so the flat
        # keys are sorted and searchsorted finds each starred entry
        starred = np.nonzero(star_row >= 0)[0]
        si = star_row[starred]
        keys = si * m + starred
        pos = np.searchsorted(rows * m + cols, keys)
        found = (pos < nnz) & (rows[np.minimum(pos, nnz - 1)] == si) & (
            cols[np.minimum(pos, nnz - 1)] == starred
        )
        if not np.all(found):
            violated = True
        else:
            raw = vals[pos]
            violated = bool(np.any(np.abs(raw + u[si] - v[starred]) > tol))
        rest = star_row < 0
        if not violated:
            diag_ok = last_star | banned
            violated = bool(np.any(rest & ~diag_ok)) or bool(
                np.any(np.abs(lastrow[rest] - v[rest]) > tol)
            )
        if not violated:
            violated = bool(np.any(u[star_col < 0] != 0.0))

    if violated:
        keep = np.array([j for j in range(m) if not banned[j]], dtype=np.int64)
        sub = _full_costs(
            np.ascontiguousarray(ck[:, keep]), d1k, d2k[keep], label, t0
        )
        matches_k = [(i, int(keep[j])) for i, j in sub.matches]
        fell_back = True
    else:
        matches_k = [(i, int(star_col[i])) for i in range(n) if star_col[i] >= 0]
        fell_back = False

    if transposed:
        matches = [(j, i) for i, j in matches_k]
    else:
        matches = matches_k

    stats = {
        "wall_ms": (time.perf_counter() - t0) * 1e3,
        "n_rows": n0,
        "n_cols": m0,
        "nnz": nnz,
        "pruned_fraction": 1.0 - nnz / (n * m),
        "primes": counters[N_PRIMES],
        "eps_phases": counters[N_EPS],
        "augments": counters[N_AUGMENTS],
        "bans": counters[N_BANS],
        "phases": counters[N_PHASES],
        "transposed": transposed,
        "fallback": fell_back,
    }
    return _assemble(matches, n0, m0, costs, diag1, diag2, label, stats, state)


def _auction_costs(costs, diag1, diag2, accuracy, label, t0, max_bids):
    if accuracy <= 0:
        raise ValueError(f"auction accuracy must be positive, got {accuracy}")
    n0, m0 = costs.shape
    if n0 == 0 or m0 == 0:
        return _all_diagonal(n0, m0, diag1, diag2, label, t0)

    transposed = n0 > m0
    if transposed:
        ck = np.ascontiguousarray(costs.T)
        d1k, d2k = diag2, diag1
    else:
        ck, d1k, d2k = costs, diag1, diag2
    n, m = ck.shape

    # benefit of matching over sending both ends to the diagonal; the
    # null option (stay on the diagonal) is always worth exactly 0
    V = np.ascontiguousarray(d1k[:, None] + d2k[None, :] - ck)
    scale = max(float(ck.max()), float(d1k.max()), float(d2k.max()))
    budget = accuracy * scale * n
    eps_final = 0.25 * accuracy * scale
    eps_start = 0.5 * scale

    prices = np.zeros(m, dtype=np.float64)
    rounds = stages = bids = corrections = 0

    def result_from(person_obj, gap):
        matches_k = [(i, int(person_obj[i])) for i in range(n) if person_obj[i] >= 0]
        matches = [(j, i) for i, j in matches_k] if transposed else matches_k
        stats = {
            "wall_ms": (time.perf_counter() - t0) * 1e3,
            "n_rows": n0,
            "n_cols": m0,
            "rounds": rounds,
            "stages": stages,
            "bids": bids,
            "corrections": corrections,
            "accuracy": accuracy,
            "scale": scale,
            "accuracy_budget": budget,
            "gap_bound": gap,
            "transposed": transposed,
        }
        return _assemble(matches, n0, m0, costs, diag1, diag2, label, stats)

    eps0 = eps_start
    while True:
        person_obj, obj_person, r, s, b, converged = auction_kernel(
            V, prices, eps0, eps_final, max_bids
        )
        rounds += r
        stages += s
        bids += b
        value = 0.0
        for i in range(n):
            if person_obj[i] >= 0:
                value += V[i, person_obj[i]]
        # weak duality: any nonnegative prices give an upper bound on the
        # achievable total benefit, hence on how far the found cost can
        # sit above the optimum
        slack = np.max(V - prices[None, :], axis=1)
        gap = float(np.maximum(slack, 0.0).sum()) + float(prices.sum()) - value
        if not converged:
            raise AuctionNonConvergence(
                f"auction stopped after {bids} bids without assigning everyone",
                result_from(person_obj, gap),
            )
        if gap <= budget * (1 + 1e-12) + 1e-300:
            return result_from(person_obj, gap)
        if corrections >= _AUCTION_MAX_CORRECTIONS:
            raise AuctionNonConvergence(
                f"auction cost certificate {gap} above budget {budget} "
                f"after {corrections} corrective passes",
                result_from(person_obj, gap),
            )
        # prices inherited from coarse stages can strand an abandoned
        # object above anyone's willingness to pay, hiding a better deal
        # from the certificate; one blank-priced pass at final epsilon is
        # immune (prices never drop within a stage, so every unassigned
        # object finishes at price zero and the gap stays under n * eps)
        corrections += 1
        prices[:] = 0.0
        eps0 = eps_final


def _brute_costs(costs, diag1, diag2, label, t0):
    n, m = costs.shape
    if n + m > _BRUTE_LIMIT:
        raise ValueError(
            f"brute force limited to {_BRUTE_LIMIT} total points, got {n + m}"
        )
    if n == 0 or m == 0:
        return _all_diagonal(n, m, diag1, diag2, label, t0)
    base = float(diag1.sum()) + float(diag2.sum())
    best_cost = base
    best = ()
    for k in range(1, min(n, m) + 1):
        for rsub in itertools.combinations(range(n), k):
            for csub in itertools.permutations(range(m), k):
                delta = 0.0
                for r, c in zip(rsub, csub):
                    delta += costs[r, c] - diag1[r] - diag2[c]
                if base + delta < best_cost:
                    best_cost = base + delta
                    best = tuple(zip(rsub, csub))
    stats = {"wall_ms": (time.perf_counter() - t0) * 1e3, "n_rows": n, "n_cols": m}
    return _assemble(best, n, m, costs, diag1, diag2, label, stats)


def solve_costs(
    costs,
    diag1,
    diag2,
    solver="reduced",
    prune=True,
    accuracy=1e-4,
    _force_fallback=False,
    _max_bids=_AUCTION_MAX_BIDS,
):
    """Solve directly from a powered cost matrix and diagonal cost vectors.

    ``costs[i, j]`` is the powered cost of matching row point i to column
    point j; ``diag1`` and ``diag2`` hold the powered diagonal exit costs.
    """
    t0 = time.perf_counter()
    costs, diag1, diag2 = _as_cost_arrays(costs, diag1, diag2)
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}, expected one of {SOLVERS}")
    label = _SOLVER_LABELS[solver]
    if solver == "full":
        return _full_costs(costs, diag1, diag2, label, t0)
    if solver == "reduced":
        prunable = _prunable_from_costs(costs, diag1, diag2) if prune else None
        return _reduced_costs(
            costs, diag1, diag2, prunable, label, t0, _force_fallback
        )
    if solver == "auction":
        return _auction_costs(costs, diag1, diag2, accuracy, label, t0, _max_bids)
    return _brute_costs(costs, diag1, diag2, label, t0)


def solve(
    points1,
    points2,
    params,
    solver="reduced",
    prune=True,
    accuracy=1e-4,
    _force_fallback=False,
):
    """Optimally match two sequences of MatchPoints of one pair class.

    Costs are built from ``params`` in the nu-th-power domain. The
    reduced solver drops matches that the diagonal provably beats
    (disable with ``prune=False``; the result must not change).
    """
    t0 = time.perf_counter()
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}, expected one of {SOLVERS}")
    label = _SOLVER_LABELS[solver]
    costs, diag1, diag2, prunable = powered_cost_arrays(points1, points2, params)
    n, m = costs.shape
    if n == 0 or m == 0:
        return _all_diagonal(n, m, diag1, diag2, label, t0)
    if solver == "full":
        return _full_costs(costs, diag1, diag2, label, t0)
    if solver == "reduced":
        return _reduced_costs(
            costs, diag1, diag2, prunable if prune else None, label, t0,
            _force_fallback,
        )
    if solver == "auction":
        return _auction_costs(
            costs, diag1, diag2, accuracy, label, t0, _AUCTION_MAX_BIDS
        )
    return _brute_costs(costs, diag1, diag2, label, t0)


def solve_full_munkres(points1, points2, params):
    """Dense reference solver on the classical augmented matrix."""
    return solve(points1, points2, params, solver="full")


def solve_reduced(points1, points2, params, prune=True, _force_fallback=False):
    """Sparse solver on the reduced matrix; exact, fast near the diagonal."""
    return solve(
        points1, points2, params, solver="reduced", prune=prune,
        _force_fallback=_force_fallback,
    )


def solve_auction(points1, points2, params, accuracy=1e-4):
    """Approximate solver with a certified cost budget (see stats)."""
    return solve(points1, points2, params, solver="auction", accuracy=accuracy)


def brute_force(points1, points2, params):
    """Exhaustive minimum over all partial injections; tiny inputs only."""
    return solve(points1, points2, params, solver="brute")
