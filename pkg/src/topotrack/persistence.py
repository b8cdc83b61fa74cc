"""Persistence diagrams of grid scalar fields.

Two sublevel/superlevel sweeps with union-find produce the two pair classes:
minima paired with merge saddles ("min_saddle") and split saddles paired with
maxima ("saddle_max"). Ties between equal values are broken by vertex id, so
every sweep order is total and every output is deterministic. The global
minimum/maximum pair is reported once per class and flagged essential.

Grid connectivity is the Freudenthal triangulation of the regular grid:
6 neighbors in 2D (4 axis neighbors plus the (+1,+1) and (-1,-1) diagonals),
14 in 3D (all nonzero offsets in {0,1}^3 and in {0,-1}^3). Boundary vertices
simply have fewer neighbors; nothing wraps.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import ScalarField

__all__ = [
    "CriticalPoint",
    "PersistencePair",
    "PersistenceDiagram",
    "PAIR_CLASSES",
    "compute_diagram",
    "threshold_diagram",
    "compute_segmentation",
    "save_diagram",
    "load_diagram",
]

PAIR_CLASSES = ("min_saddle", "saddle_max")

_OFFSETS_2D = (
    (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (1, 1, 0), (-1, -1, 0),
)
_OFFSETS_3D = tuple(
    (dx, dy, dz)
    for s in (1, -1)
    for dx in (0, s)
    for dy in (0, s)
    for dz in (0, s)
    if (dx, dy, dz) != (0, 0, 0)
)

_NEIGHBOR_CACHE: dict[tuple[int, int, int], list[list[int]]] = {}


def _neighbor_lists(dims: tuple[int, int, int]) -> list[list[int]]:
    """Adjacency lists for the Freudenthal triangulation of a grid."""
    cached = _NEIGHBOR_CACHE.get(dims)
    if cached is not None:
        return cached
    nx, ny, nz = dims
    offsets = _OFFSETS_2D if nz == 1 else _OFFSETS_3D
    n = nx * ny * nz
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for vid in range(n):
        x = vid % nx
        y = (vid // nx) % ny
        z = vid // (nx * ny)
        row = nbrs[vid]
        for dx, dy, dz in offsets:
            u, v, w = x + dx, y + dy, z + dz
            if 0 <= u < nx and 0 <= v < ny and 0 <= w < nz:
                row.append(u + nx * (v + ny * w))
    _NEIGHBOR_CACHE[dims] = nbrs
    return nbrs


@dataclass(frozen=True)
class CriticalPoint:
    vertex_id: int
    coords: tuple[float, float, float]
    value: float
    index: int  # 0 minimum, d maximum, in between for saddles


@dataclass(frozen=True)
class PersistencePair:
    """A birth/death pair. Values are read off the two critical points."""

    pair_id: int
    pair_class: str
    essential: bool
    birth_point: CriticalPoint
    death_point: CriticalPoint

    def __post_init__(self):
        if self.pair_class not in PAIR_CLASSES:
            raise ValueError(f"unknown pair_class {self.pair_class!r}")
        if self.death < self.birth:
            raise ValueError(
                f"death {self.death} below birth {self.birth} in pair {self.pair_id}"
            )

    @property
    def birth(self) -> float:
        return self.birth_point.value

    @property
    def death(self) -> float:
        return self.death_point.value

    @property
    def persistence(self) -> float:
        return self.death - self.birth

    @property
    def extremum(self) -> CriticalPoint:
        """The pair's non-saddle critical point (minimum or maximum)."""
        return self.birth_point if self.pair_class == "min_saddle" else self.death_point


@dataclass(frozen=True)
class PersistenceDiagram:
    pairs: tuple[PersistencePair, ...]
    time_index: int
    field_range: tuple[float, float]

    def pairs_of_class(self, pair_class: str) -> tuple[PersistencePair, ...]:
        if pair_class not in PAIR_CLASSES:
            raise ValueError(f"unknown pair_class {pair_class!r}")
        return tuple(p for p in self.pairs if p.pair_class == pair_class)

    def __len__(self) -> int:
        return len(self.pairs)


def _find(parent: list[int], x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def _sweep(values: np.ndarray, nbrs: list[list[int]], descending: bool):
    """Union-find sweep in (value, id) order; reversed order if descending.

    Returns (pairs, first, last) where pairs lists (extremum_vertex,
    saddle_vertex) in death order and first/last are the sweep's first and
    last vertices (the global extrema under the tie-broken order).
    """
    n = values.size
    order = np.argsort(values, kind="stable")
    if descending:
        order = order[::-1]
    order = order.tolist()
    pos = [0] * n
    for r, v in enumerate(order):
        pos[v] = r
    parent = list(range(n))
    rep = list(range(n))  # root -> extremum vertex of its component
    pairs: list[tuple[int, int]] = []
    for v in order:
        pv = pos[v]
        roots: list[int] = []
        for u in nbrs[v]:
            if pos[u] < pv:
                r = _find(parent, u)
                if r not in roots:
                    roots.append(r)
        if not roots:
            continue  # v is a new local extremum; rep[v] is already v
        roots.sort(key=lambda r: pos[rep[r]])
        surv = roots[0]
        for r in roots[1:]:
            pairs.append((rep[r], v))
            parent[r] = surv
        parent[v] = surv
    return pairs, order[0], order[-1]


def compute_diagram(field: ScalarField) -> PersistenceDiagram:
    """Both pair classes of a field, plus one essential pair per class."""
    nbrs = _neighbor_lists(field.dims)
    vals = field.values
    d = 2 if field.dims[2] == 1 else 3

    def cp(v: int, index: int) -> CriticalPoint:
        return CriticalPoint(
            vertex_id=v,
            coords=field.vertex_coords(v),
            value=float(vals[v]),
            index=index,
        )

    min_pairs, gmin, gmax = _sweep(vals, nbrs, descending=False)
    max_pairs, _, _ = _sweep(vals, nbrs, descending=True)

    pairs: list[PersistencePair] = []
    pid = 0
    for m, s in min_pairs:
        pairs.append(PersistencePair(pid, "min_saddle", False, cp(m, 0), cp(s, 1)))
        pid += 1
    pairs.append(PersistencePair(pid, "min_saddle", True, cp(gmin, 0), cp(gmax, d)))
    pid += 1
    for M, s in max_pairs:
        pairs.append(
            PersistencePair(pid, "saddle_max", False, cp(s, d - 1), cp(M, d))
        )
        pid += 1
    pairs.append(PersistencePair(pid, "saddle_max", True, cp(gmin, 0), cp(gmax, d)))

    return PersistenceDiagram(
        pairs=tuple(pairs),
        time_index=field.time_index,
        field_range=(float(vals.min()), float(vals.max())),
    )


def threshold_diagram(
    diagram: PersistenceDiagram, threshold: float, fraction: bool = False
) -> PersistenceDiagram:
    """Keep pairs with persistence strictly above the threshold.

    With fraction=True the threshold is a fraction of the field's value
    range. Essential pairs are always kept.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    cut = threshold
    if fraction:
        lo, hi = diagram.field_range
        cut = threshold * (hi - lo)
    kept = tuple(
        p for p in diagram.pairs if p.essential or p.persistence > cut
    )
    return PersistenceDiagram(
        pairs=kept, time_index=diagram.time_index, field_range=diagram.field_range
    )


def compute_segmentation(
    field: ScalarField, direction: str = "max", min_persistence: float = 0.0
) -> np.ndarray:
    """Label each vertex with the extremum vertex id of its leaf region.

    direction "max" sweeps downward from the maxima (split-tree leaves),
    "min" upward from the minima (merge-tree leaves). A vertex joining an
    existing component takes that component's current label; when components
    merge, vertices added afterwards take the older extremum's label. A
    component whose extremum dies with persistence <= min_persistence is
    absorbed: its vertices are relabeled into the surviving region.
    """
    if direction not in ("max", "min"):
        raise ValueError(f"direction must be 'max' or 'min', got {direction!r}")
    nbrs = _neighbor_lists(field.dims)
    vals = field.values
    n = vals.size
    order = np.argsort(vals, kind="stable")
    if direction == "max":
        order = order[::-1]
    order = order.tolist()
    pos = [0] * n
    for r, v in enumerate(order):
        pos[v] = r
    parent = list(range(n))
    rep = list(range(n))
    labels = np.empty(n, dtype=np.int64)
    region: dict[int, list[int]] = {}  # root -> vertices carrying its label
    for v in order:
        pv = pos[v]
        roots: list[int] = []
        for u in nbrs[v]:
            if pos[u] < pv:
                r = _find(parent, u)
                if r not in roots:
                    roots.append(r)
        if not roots:
            labels[v] = v
            region[v] = [v]
            continue
        roots.sort(key=lambda r: pos[rep[r]])
        surv = roots[0]
        for r in roots[1:]:
            if abs(vals[rep[r]] - vals[v]) <= min_persistence:
                dying = region.pop(r)
                labels[dying] = rep[surv]
                region[surv].extend(dying)
            else:
                del region[r]  # region frozen; labels stay
            parent[r] = surv
        parent[v] = surv
        labels[v] = rep[surv]
        region[surv].append(v)
    return labels


_CSV_COLUMNS = (
    "pair_id", "pair_class", "essential", "birth", "death", "persistence",
    "b_vertex", "b_x", "b_y", "b_z", "b_value",
    "d_vertex", "d_x", "d_y", "d_z", "d_value",
)

_DIAGRAM_FILE_RE = re.compile(r"^diagram_(\d+)\.csv$")


def save_diagram(diagram: PersistenceDiagram, path) -> None:
    """Write the diagram as CSV. Floats use repr, so loading is bit-exact."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_CSV_COLUMNS)
        for p in diagram.pairs:
            b, d = p.birth_point, p.death_point
            w.writerow(
                [
                    p.pair_id, p.pair_class, int(p.essential),
                    repr(p.birth), repr(p.death), repr(p.persistence),
                    b.vertex_id, repr(b.coords[0]), repr(b.coords[1]),
                    repr(b.coords[2]), repr(b.value),
                    d.vertex_id, repr(d.coords[0]), repr(d.coords[1]),
                    repr(d.coords[2]), repr(d.value),
                ]
            )


def load_diagram(path, time_index: int | None = None) -> PersistenceDiagram:
    """Read a diagram CSV written by save_diagram.

    The critical-point index is not a CSV column; it is reconstructed from
    the pair class, with the ambient dimension inferred from whether any z
    coordinate varies. time_index defaults to the <k> of a diagram_<k>.csv
    file name, else 0. The field range is recovered from the essential pair.
    """
    path = Path(path)
    if time_index is None:
        m = _DIAGRAM_FILE_RE.match(path.name)
        time_index = int(m.group(1)) if m else 0
    with path.open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != list(_CSV_COLUMNS):
            raise ValueError(f"{path}: unexpected diagram header {header}")
        rows = list(r)

    zs = {row[9] for row in rows} | {row[14] for row in rows}
    d = 2 if len(zs) <= 1 else 3

    pairs: list[PersistencePair] = []
    for row in rows:
        (
            pair_id, pair_class, essential, birth, death, pers,
            b_vertex, b_x, b_y, b_z, b_value,
            d_vertex, d_x, d_y, d_z, d_value,
        ) = row
        if pair_class not in PAIR_CLASSES:
            raise ValueError(f"{path}: unknown pair_class {pair_class!r}")
        birth, death, pers = float(birth), float(death), float(pers)
        if abs(pers - (death - birth)) > 1e-9:
            raise ValueError(
                f"{path}: pair {pair_id} persistence {pers} inconsistent with "
                f"death-birth {death - birth}"
            )
        if abs(birth - float(b_value)) > 1e-9 or abs(death - float(d_value)) > 1e-9:
            raise ValueError(
                f"{path}: pair {pair_id} birth/death disagree with point values"
            )
        ess = bool(int(essential))
        if ess:
            b_idx, d_idx = 0, d
        elif pair_class == "min_saddle":
            b_idx, d_idx = 0, 1
        else:
            b_idx, d_idx = d - 1, d
        bp = CriticalPoint(
            int(b_vertex), (float(b_x), float(b_y), float(b_z)), float(b_value), b_idx
        )
        dp = CriticalPoint(
            int(d_vertex), (float(d_x), float(d_y), float(d_z)), float(d_value), d_idx
        )
        pairs.append(PersistencePair(int(pair_id), pair_class, ess, bp, dp))

    ess_pairs = [p for p in pairs if p.essential]
    if ess_pairs:
        field_range = (ess_pairs[0].birth, ess_pairs[0].death)
    elif pairs:
        field_range = (min(p.birth for p in pairs), max(p.death for p in pairs))
    else:
        field_range = (0.0, 0.0)
    return PersistenceDiagram(
        pairs=tuple(pairs), time_index=time_index, field_range=field_range
    )
