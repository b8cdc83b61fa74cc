"""Distances between persistence diagram points.

The plain distance compares birth/death values with an L-nu norm. The lifted
distance adds the spatial coordinates of the pairs' extrema, weighted per
component, which is what makes matchings follow features geometrically. Both
the point-to-point and point-to-diagonal costs are defined here; the
assignment solvers consume them raised to the nu-th power and only the final
reported distances take the 1/nu root.

Coordinates and scalar values are assumed normalized (grid.normalize) when
the default weights are used; nothing here enforces that.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .persistence import PAIR_CLASSES, PersistenceDiagram

__all__ = [
    "MetricParams",
    "MatchPoint",
    "DIAGONAL_MODES",
    "match_points",
    "pointwise_distance",
    "lifted_distance",
    "diagonal_cost",
    "prune_predicate",
    "powered_cost_arrays",
    "wasserstein_distance",
]

DIAGONAL_MODES = ("classical_projection", "lifted_eq8")


@dataclass(frozen=True)
class MetricParams:
    """Weights of the lifted distance.

    alpha weights the birth gap, beta the death gap, gamma the three spatial
    axes. diagonal_mode picks how a point's cost-to-diagonal treats the
    scalar part: "classical_projection" charges alpha and beta each for half
    the persistence (the distance to the orthogonal projection onto the
    diagonal), "lifted_eq8" charges the raw |birth| and |death| magnitudes.
    Both charge the gamma-weighted gap between the pair's own two critical
    points.
    """

    nu: float = 2.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: tuple[float, float, float] = (1.0, 1.0, 1.0)
    diagonal_mode: str = "classical_projection"

    def __post_init__(self):
        if self.nu < 1.0:
            raise ValueError(f"nu must be >= 1, got {self.nu}")
        gamma = tuple(float(g) for g in self.gamma)
        if len(gamma) != 3:
            raise ValueError("gamma needs exactly three components")
        weights = (self.alpha, self.beta) + gamma
        if any(w < 0 for w in weights):
            raise ValueError(f"weights must be >= 0, got {weights}")
        if all(w == 0 for w in weights):
            raise ValueError("at least one weight must be positive")
        if self.diagonal_mode not in DIAGONAL_MODES:
            raise ValueError(
                f"diagonal_mode must be one of {DIAGONAL_MODES}, "
                f"got {self.diagonal_mode!r}"
            )
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "nu", float(self.nu))

    @classmethod
    def for_maxima(cls, **overrides) -> "MetricParams":
        """Default weights for saddle_max pairs: damp the birth (saddle) gap."""
        base = dict(alpha=0.1, beta=1.0, gamma=(1.0, 1.0, 1.0))
        base.update(overrides)
        return cls(**base)

    @classmethod
    def for_minima(cls, **overrides) -> "MetricParams":
        """Default weights for min_saddle pairs: damp the death (saddle) gap."""
        base = dict(alpha=1.0, beta=0.1, gamma=(1.0, 1.0, 1.0))
        base.update(overrides)
        return cls(**base)

    @classmethod
    def for_class(cls, pair_class: str, **overrides) -> "MetricParams":
        if pair_class == "saddle_max":
            return cls.for_maxima(**overrides)
        if pair_class == "min_saddle":
            return cls.for_minima(**overrides)
        raise ValueError(f"unknown pair_class {pair_class!r}")


@dataclass(frozen=True)
class MatchPoint:
    """What the matcher sees of a persistence pair."""

    birth: float
    death: float
    extremum: tuple[float, float, float]
    other: tuple[float, float, float]
    pair_class: str

    @property
    def persistence(self) -> float:
        return self.death - self.birth


def match_points(
    diagram: PersistenceDiagram, pair_class: str
) -> tuple[MatchPoint, ...]:
    """Project one class of a diagram to MatchPoints, preserving pair order."""
    if pair_class not in PAIR_CLASSES:
        raise ValueError(f"unknown pair_class {pair_class!r}")
    out = []
    for p in diagram.pairs_of_class(pair_class):
        ext = p.extremum
        other = p.death_point if ext is p.birth_point else p.birth_point
        out.append(
            MatchPoint(
                birth=p.birth,
                death=p.death,
                extremum=ext.coords,
                other=other.coords,
                pair_class=pair_class,
            )
        )
    return tuple(out)


def pointwise_distance(p: MatchPoint, q: MatchPoint, nu: float = 2.0) -> float:
    """L-nu distance in the birth/death plane, ignoring geometry."""
    if nu < 1.0:
        raise ValueError(f"nu must be >= 1, got {nu}")
    return (abs(p.birth - q.birth) ** nu + abs(p.death - q.death) ** nu) ** (1.0 / nu)


def lifted_distance(p: MatchPoint, q: MatchPoint, params: MetricParams) -> float:
    nu = params.nu
    g = params.gamma
    acc = (
        params.alpha * abs(p.birth - q.birth) ** nu
        + params.beta * abs(p.death - q.death) ** nu
        + g[0] * abs(p.extremum[0] - q.extremum[0]) ** nu
        + g[1] * abs(p.extremum[1] - q.extremum[1]) ** nu
        + g[2] * abs(p.extremum[2] - q.extremum[2]) ** nu
    )
    return acc ** (1.0 / nu)


def _own_gap_term(p: MatchPoint, params: MetricParams) -> float:
    g = params.gamma
    nu = params.nu
    return (
        g[0] * abs(p.extremum[0] - p.other[0]) ** nu
        + g[1] * abs(p.extremum[1] - p.other[1]) ** nu
        + g[2] * abs(p.extremum[2] - p.other[2]) ** nu
    )


def diagonal_cost(p: MatchPoint, params: MetricParams) -> float:
    """Cost of leaving p unmatched (cancelled against the diagonal)."""
    nu = params.nu
    if params.diagonal_mode == "lifted_eq8":
        scalar = params.alpha * abs(p.birth) ** nu + params.beta * abs(p.death) ** nu
    else:
        half = (p.death - p.birth) / 2.0
        scalar = (params.alpha + params.beta) * abs(half) ** nu
    return (scalar + _own_gap_term(p, params)) ** (1.0 / nu)


def prune_predicate(p: MatchPoint, q: MatchPoint, params: MetricParams) -> bool:
    """True when matching p with q can never beat cancelling both."""
    return lifted_distance(p, q, params) > diagonal_cost(p, params) + diagonal_cost(
        q, params
    )


def _stack(points: Sequence[MatchPoint]):
    n = len(points)
    arr = np.empty((n, 8), dtype=np.float64)
    for i, p in enumerate(points):
        arr[i, 0] = p.birth
        arr[i, 1] = p.death
        arr[i, 2:5] = p.extremum
        arr[i, 5:8] = p.other
    return arr


def powered_cost_arrays(
    points1: Sequence[MatchPoint],
    points2: Sequence[MatchPoint],
    params: MetricParams,
):
    """Vectorized cost construction for the solvers.

    Returns (costs, diag1, diag2, prunable): costs[i, j] is the lifted
    distance raised to the nu-th power, diag1/diag2 are powered diagonal
    costs, and prunable[i, j] marks entries whose unpowered lifted distance
    exceeds the sum of the two unpowered diagonal costs.
    """
    nu = params.nu
    a = _stack(points1)
    b = _stack(points2)
    n, m = a.shape[0], b.shape[0]

    def diag_pow(arr):
        if params.diagonal_mode == "lifted_eq8":
            scalar = (
                params.alpha * np.abs(arr[:, 0]) ** nu
                + params.beta * np.abs(arr[:, 1]) ** nu
            )
        else:
            half = (arr[:, 1] - arr[:, 0]) / 2.0
            scalar = (params.alpha + params.beta) * np.abs(half) ** nu
        gaps = np.abs(arr[:, 2:5] - arr[:, 5:8]) ** nu
        return scalar + gaps @ np.asarray(params.gamma)

    diag1 = diag_pow(a)
    diag2 = diag_pow(b)

    if n == 0 or m == 0:
        costs = np.zeros((n, m), dtype=np.float64)
        prunable = np.zeros((n, m), dtype=bool)
        return costs, diag1, diag2, prunable

    db = np.abs(a[:, None, 0] - b[None, :, 0]) ** nu
    dd = np.abs(a[:, None, 1] - b[None, :, 1]) ** nu
    costs = params.alpha * db + params.beta * dd
    for axis, g in enumerate(params.gamma):
        if g != 0.0:
            costs += g * np.abs(a[:, None, 2 + axis] - b[None, :, 2 + axis]) ** nu

    inv = 1.0 / nu
    prunable = costs**inv > diag1[:, None] ** inv + diag2[None, :] ** inv
    return costs, diag1, diag2, prunable


def wasserstein_distance(
    points1: Sequence[MatchPoint],
    points2: Sequence[MatchPoint],
    params: MetricParams,
    solver: str = "reduced",
) -> float:
    """Optimal transport distance between two one-class diagrams.

    The optimum of the matching problem is a sum of nu-th powers; the
    distance is its 1/nu root.
    """
    from . import assignment

    result = assignment.solve(points1, points2, params, solver=solver)
    return result.total_cost ** (1.0 / params.nu)
