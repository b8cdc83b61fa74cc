"""Trajectories of matched persistence pairs across time.

match_series runs one assignment per consecutive diagram pair and
extract_trajectories chains the matches: a trajectory starts when a pair
has no partner in the previous timestep and ends when it has none in the
next. detect_merge_split then scans for close encounters, where two
trajectories pass within epsilon of each other in the lifted metric at a
timestep where one of them ends (merge) or starts (split); the trajectory
that started first survives and, when it was the one that ended, takes
over the other's remainder, so the oldest identifier carries the feature
onward. overlap_tracking is the diagram-free baseline that matches
extremum regions of consecutive timesteps by counted shared vertices.

Trajectory points live at the extremum of each pair; the saddle end is
kept only through the birth/death values. Segment costs are unpowered
lifted distances, one per consecutive point pair.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assignment import AssignmentResult, AuctionNonConvergence, solve
from .grid import TimeSeries
from .metric import MatchPoint, MetricParams, lifted_distance, match_points
from .persistence import PAIR_CLASSES, PersistenceDiagram, compute_segmentation

EVENT_KINDS = ("merge", "split")


@dataclass(frozen=True)
class MatchingSeries:
    """One assignment per consecutive diagram pair, single pair class."""

    pair_class: str
    params: MetricParams
    solver: str
    diagrams: tuple[PersistenceDiagram, ...]
    points: tuple[tuple[MatchPoint, ...], ...]
    results: tuple[AssignmentResult, ...]

    def __post_init__(self):
        if len(self.results) != len(self.diagrams) - 1:
            raise ValueError(
                f"{len(self.results)} matchings cannot cover "
                f"{len(self.diagrams)} diagrams"
            )
        if len(self.points) != len(self.diagrams):
            raise ValueError("one point tuple per diagram required")

    @property
    def time_indices(self) -> tuple[int, ...]:
        return tuple(d.time_index for d in self.diagrams)


@dataclass(frozen=True)
class TrajectoryPoint:
    """One timestep of a tracked feature, anchored at its extremum."""

    time_index: int
    coords: tuple[float, float, float]
    value: float
    birth: float
    death: float

    @property
    def persistence(self) -> float:
        return self.death - self.birth


@dataclass(frozen=True)
class Trajectory:
    id: int
    pair_class: str
    points: tuple[TrajectoryPoint, ...]
    segment_costs: tuple[float, ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError(f"trajectory {self.id} has no points")
        if len(self.segment_costs) != len(self.points) - 1:
            raise ValueError(
                f"trajectory {self.id}: {len(self.segment_costs)} segment "
                f"costs for {len(self.points)} points"
            )

    @property
    def start_time(self) -> int:
        return self.points[0].time_index

    @property
    def end_time(self) -> int:
        return self.points[-1].time_index

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class TrackingEvent:
    kind: str
    time_index: int
    surviving: int
    absorbed: int

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class TrackingResult:
    trajectories: tuple[Trajectory, ...]
    events: tuple[TrackingEvent, ...] = ()

    def to_json(self) -> dict:
        return {
            "trajectories": [
                {
                    "id": t.id,
                    "class": t.pair_class,
                    "points": [
                        {
                            "t": int(p.time_index),
                            "x": p.coords[0],
                            "y": p.coords[1],
                            "z": p.coords[2],
                            "value": p.value,
                            "birth": p.birth,
                            "death": p.death,
                            "persistence": p.persistence,
                        }
                        for p in t.points
                    ],
                    "segment_costs": [float(c) for c in t.segment_costs],
                }
                for t in self.trajectories
            ],
            "events": [
                {
                    "kind": e.kind,
                    "t": int(e.time_index),
                    "surviving": int(e.surviving),
                    "absorbed": int(e.absorbed),
                }
                for e in self.events
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TrackingResult":
        trajectories = tuple(
            Trajectory(
                id=int(t["id"]),
                pair_class=str(t["class"]),
                points=tuple(
                    TrajectoryPoint(
                        time_index=int(p["t"]),
                        coords=(float(p["x"]), float(p["y"]), float(p["z"])),
                        value=float(p["value"]),
                        birth=float(p["birth"]),
                        death=float(p["death"]),
                    )
                    for p in t["points"]
                ),
                segment_costs=tuple(float(c) for c in t["segment_costs"]),
            )
            for t in obj["trajectories"]
        )
        events = tuple(
            TrackingEvent(
                kind=str(e["kind"]),
                time_index=int(e["t"]),
                surviving=int(e["surviving"]),
                absorbed=int(e["absorbed"]),
            )
            for e in obj["events"]
        )
        return cls(trajectories=trajectories, events=events)


def save_tracking(result: TrackingResult, path) -> None:
    Path(path).write_text(
        json.dumps(result.to_json(), indent=2, sort_keys=True) + "\n"
    )


def load_tracking(path) -> TrackingResult:
    return TrackingResult.from_json(json.loads(Path(path).read_text()))


def match_series(
    diagrams,
    params: MetricParams | None = None,
    pair_class: str = "saddle_max",
    solver: str = "reduced",
    accuracy: float = 1e-4,
    workers: int = 1,
) -> MatchingSeries:
    """Match every consecutive diagram pair of one class.

    Each pair is an independent solver run, so `workers` > 1 spreads them
    over a thread pool (the solver kernels release the GIL); the output
    is identical for any worker count. Solver failures are re-raised with
    the offending timestep pair named.
    """
    diagrams = tuple(diagrams)
    if len(diagrams) < 2:
        raise ValueError("need at least two timesteps to match")
    if pair_class not in PAIR_CLASSES:
        raise ValueError(f"unknown pair_class {pair_class!r}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if params is None:
        params = MetricParams.for_class(pair_class)
    points = tuple(match_points(d, pair_class) for d in diagrams)

    def pair_result(t: int) -> AssignmentResult:
        t0, t1 = diagrams[t].time_index, diagrams[t + 1].time_index
        try:
            return solve(
                points[t], points[t + 1], params,
                solver=solver, accuracy=accuracy,
            )
        except AuctionNonConvergence as exc:
            raise AuctionNonConvergence(
                f"between timesteps {t0} and {t1}: {exc}", exc.result
            ) from None
        except Exception as exc:
            raise RuntimeError(
                f"matching timesteps {t0} and {t1} failed: {exc}"
            ) from exc

    steps = range(len(diagrams) - 1)
    if workers == 1:
        results = tuple(pair_result(t) for t in steps)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = tuple(pool.map(pair_result, steps))
    return MatchingSeries(
        pair_class=pair_class,
        params=params,
        solver=solver,
        diagrams=diagrams,
        points=points,
        results=results,
    )


def _anchor(mp: MatchPoint, time_index: int) -> TrajectoryPoint:
    value = mp.death if mp.pair_class == "saddle_max" else mp.birth
    return TrajectoryPoint(
        time_index=time_index,
        coords=mp.extremum,
        value=value,
        birth=mp.birth,
        death=mp.death,
    )


def extract_trajectories(series: MatchingSeries) -> TrackingResult:
    """Chain the matchings into trajectories; no events yet.

    Identifiers count up in first-appearance order: timestep first, then
    position within the diagram. Every diagram pair instance lands in
    exactly one trajectory point.
    """
    builders: list[tuple[list, list]] = []
    active: dict[int, int] = {}

    def open_builder(t: int, idx: int) -> int:
        point = _anchor(series.points[t][idx], series.diagrams[t].time_index)
        builders.append(([point], []))
        return len(builders) - 1

    for i in range(len(series.points[0])):
        active[i] = open_builder(0, i)

    for t, result in enumerate(series.results):
        step = dict(result.matches)
        nxt: dict[int, int] = {}
        for i, slot in active.items():
            j = step.get(i)
            if j is None:
                continue  # unmatched ahead: the trajectory ends here
            p, q = series.points[t][i], series.points[t + 1][j]
            pts, costs = builders[slot]
            pts.append(_anchor(q, series.diagrams[t + 1].time_index))
            costs.append(lifted_distance(p, q, series.params))
            nxt[j] = slot
        for j in range(len(series.points[t + 1])):
            if j not in nxt:
                nxt[j] = open_builder(t + 1, j)
        active = nxt

    trajectories = tuple(
        Trajectory(
            id=k,
            pair_class=series.pair_class,
            points=tuple(pts),
            segment_costs=tuple(costs),
        )
        for k, (pts, costs) in enumerate(builders)
    )
    return TrackingResult(trajectories=trajectories)


def _as_match_point(p: TrajectoryPoint, pair_class: str) -> MatchPoint:
    return MatchPoint(
        birth=p.birth, death=p.death,
        extremum=p.coords, other=p.coords,
        pair_class=pair_class,
    )


def _candidate_pairs(entries, epsilon, params):
    """Indices of entry pairs that could sit within epsilon.

    entries is a list of (trajectory id, TrajectoryPoint). The spatial
    terms alone bound the lifted distance from below, so with every gamma
    positive a bucket grid of cell epsilon / min(gamma)^(1/nu) only needs
    neighboring cells checked; a zero gamma leaves an axis unweighted and
    forces the quadratic scan.
    """
    k = len(entries)
    min_gamma = min(params.gamma)
    if min_gamma <= 0.0 or k < 16:
        for a in range(k):
            for b in range(a + 1, k):
                yield a, b
        return
    cell = epsilon / min_gamma ** (1.0 / params.nu)
    buckets: dict[tuple[int, int, int], list[int]] = {}
    for idx, (_, p) in enumerate(entries):
        key = (
            math.floor(p.coords[0] / cell),
            math.floor(p.coords[1] / cell),
            math.floor(p.coords[2] / cell),
        )
        buckets.setdefault(key, []).append(idx)
    for (kx, ky, kz), members in buckets.items():
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    other = buckets.get((kx + dx, ky + dy, kz + dz))
                    if other is None:
                        continue
                    for a in members:
                        for b in other:
                            if a < b:
                                yield a, b


def detect_merge_split(
    result: TrackingResult, epsilon: float, params: MetricParams
) -> TrackingResult:
    """Classify close encounters between trajectories of one class.

    At every timestep both trajectories cover, their diagram points are
    compared in the lifted metric; a distance strictly below epsilon
    qualifies the pair. A merge needs both already running and exactly
    one ending there; a split needs both continuing and exactly one
    starting there. The trajectory with the earlier start survives
    (lower id on a tie). When a merge's survivor is the one that ended,
    the other trajectory hands over its strictly-later points (the
    reconnecting segment's cost is recomputed for the new predecessor);
    both keep their point at the shared timestep. A trajectory joins at
    most one event per timestep, in deterministic scan order. Epsilon 0
    never fires; rescanning an already-processed result reproduces it.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    if epsilon == 0 or len(result.trajectories) < 2:
        return TrackingResult(trajectories=result.trajectories)

    order = [t.id for t in result.trajectories]
    classes = {t.id: t.pair_class for t in result.trajectories}
    state: dict[int, tuple[list, list]] = {
        t.id: (list(t.points), list(t.segment_costs))
        for t in result.trajectories
    }
    starts = {t.id: t.start_time for t in result.trajectories}

    all_times = sorted({
        p.time_index for t in result.trajectories for p in t.points
    })
    events: list[TrackingEvent] = []

    for tk in all_times:
        # one event per trajectory per timestep: a pair that just traded
        # its tail away must not immediately re-qualify against a third
        used: set[int] = set()
        entries = []
        for tid in order:
            pts, _ = state[tid]
            # points are time-ordered and gap-free, so membership is a
            # range check and the position an offset count
            if pts[0].time_index <= tk <= pts[-1].time_index:
                for pos, p in enumerate(pts):
                    if p.time_index == tk:
                        entries.append((tid, p, pos))
                        break
        flat = [(tid, p) for tid, p, _ in entries]
        candidates = sorted(
            (entries[a][0], entries[b][0])
            for a, b in _candidate_pairs(flat, epsilon, params)
        )
        for id_a, id_b in candidates:
            if id_a > id_b:
                id_a, id_b = id_b, id_a
            if classes[id_a] != classes[id_b]:
                continue
            pts_a, _ = state[id_a]
            pts_b, _ = state[id_b]
            pa = next(p for p in pts_a if p.time_index == tk)
            pb = next(p for p in pts_b if p.time_index == tk)
            d = lifted_distance(
                _as_match_point(pa, classes[id_a]),
                _as_match_point(pb, classes[id_b]),
                params,
            )
            if not d < epsilon:
                continue
            a_starts = starts[id_a] == tk
            b_starts = starts[id_b] == tk
            a_ends = pts_a[-1].time_index == tk
            b_ends = pts_b[-1].time_index == tk
            if id_a in used or id_b in used:
                continue
            if not a_starts and not b_starts and (a_ends != b_ends):
                kind = "merge"
            elif not a_ends and not b_ends and (a_starts != b_starts):
                kind = "split"
            else:
                continue
            used.add(id_a)
            used.add(id_b)
            if (starts[id_a], id_a) <= (starts[id_b], id_b):
                surviving, absorbed = id_a, id_b
            else:
                surviving, absorbed = id_b, id_a
            events.append(TrackingEvent(kind, tk, surviving, absorbed))
            if kind == "merge":
                ended = id_a if a_ends else id_b
                if surviving == ended:
                    cont = id_b if a_ends else id_a
                    _reconnect(state, ended, cont, tk, classes[cont], params)

    trajectories = tuple(
        Trajectory(
            id=tid,
            pair_class=classes[tid],
            points=tuple(state[tid][0]),
            segment_costs=tuple(state[tid][1]),
        )
        for tid in order
    )
    return TrackingResult(trajectories=trajectories, events=tuple(events))


def _reconnect(state, ended, cont, tk, pair_class, params):
    """Move cont's strictly-later points onto the ended trajectory."""
    pts_e, costs_e = state[ended]
    pts_c, costs_c = state[cont]
    pos = next(k for k, p in enumerate(pts_c) if p.time_index == tk)
    moved = pts_c[pos + 1:]
    kept_costs = costs_c[pos + 1:]  # costs into moved[1:], unchanged pairs
    bridge = lifted_distance(
        _as_match_point(pts_e[-1], pair_class),
        _as_match_point(moved[0], pair_class),
        params,
    )
    pts_e.extend(moved)
    costs_e.append(bridge)
    costs_e.extend(kept_costs)
    del pts_c[pos + 1:]
    del costs_c[pos:]


def _region_attributes(field, labels, direction):
    """Per region: (coords, extremum value, birth, death).

    The region's extremum vertex anchors the point; the region's value
    span stands in for the pair's birth/death (its far end is where the
    region meets its neighbors).
    """
    uniq, inverse = np.unique(labels, return_inverse=True)
    if direction == "max":
        far = np.full(len(uniq), np.inf)
        np.minimum.at(far, inverse, field.values)
    else:
        far = np.full(len(uniq), -np.inf)
        np.maximum.at(far, inverse, field.values)
    out = {}
    for k, lab in enumerate(uniq):
        lab = int(lab)
        ext = float(field.values[lab])
        birth, death = (float(far[k]), ext) if direction == "max" else (ext, float(far[k]))
        out[lab] = (field.vertex_coords(lab), ext, birth, death)
    return out


def _overlap_matches(labels_a, labels_b, n_vertices):
    """Greedy best-overlap matching between two label fields.

    Region pairs score by shared-vertex count; descending score, ties by
    the two extremum ids, each region matched at most once.
    """
    key = labels_a.astype(np.int64) * n_vertices + labels_b
    uk, counts = np.unique(key, return_counts=True)
    la = (uk // n_vertices).astype(np.int64)
    lb = (uk % n_vertices).astype(np.int64)
    order = np.lexsort((lb, la, -counts))
    taken_a: set[int] = set()
    taken_b: set[int] = set()
    matches: dict[int, int] = {}
    for idx in order:
        a, b = int(la[idx]), int(lb[idx])
        if a in taken_a or b in taken_b:
            continue
        matches[a] = b
        taken_a.add(a)
        taken_b.add(b)
    return matches


def overlap_tracking(
    series: TimeSeries,
    persistence_threshold: float = 0.0,
    direction: str = "max",
) -> TrackingResult:
    """Baseline tracker on extremum regions instead of diagram points.

    Each timestep is segmented into leaf regions (split tree for "max",
    merge tree for "min"; regions shallower than the persistence
    threshold absorbed). Regions of consecutive timesteps match greedily
    by shared-vertex count; zero overlap never matches, so a feature
    that jumps farther than its own support breaks its trajectory.
    Segment costs are zero: overlap counts are scores, not distances.
    """
    if not series.uniform:
        raise ValueError("overlap tracking needs one grid shared by all timesteps")
    if direction not in ("max", "min"):
        raise ValueError(f"direction must be 'max' or 'min', got {direction!r}")
    if persistence_threshold < 0:
        raise ValueError(
            f"persistence threshold must be >= 0, got {persistence_threshold}"
        )
    pair_class = "saddle_max" if direction == "max" else "min_saddle"

    labels = [
        compute_segmentation(f, direction, persistence_threshold) for f in series
    ]
    attrs = [
        _region_attributes(f, lab, direction) for f, lab in zip(series, labels)
    ]

    builders: list[tuple[list, list]] = []
    active: dict[int, int] = {}

    def open_builder(t: int, lab: int) -> int:
        coords, value, birth, death = attrs[t][lab]
        point = TrajectoryPoint(
            time_index=series[t].time_index,
            coords=coords, value=value, birth=birth, death=death,
        )
        builders.append(([point], []))
        return len(builders) - 1

    for lab in sorted(attrs[0]):
        active[lab] = open_builder(0, lab)

    nv = series[0].n_vertices
    for t in range(len(series) - 1):
        step = _overlap_matches(labels[t], labels[t + 1], nv)
        nxt: dict[int, int] = {}
        for lab, slot in active.items():
            lab2 = step.get(lab)
            if lab2 is None:
                continue
            coords, value, birth, death = attrs[t + 1][lab2]
            pts, costs = builders[slot]
            pts.append(
                TrajectoryPoint(
                    time_index=series[t + 1].time_index,
                    coords=coords, value=value, birth=birth, death=death,
                )
            )
            costs.append(0.0)
            nxt[lab2] = slot
        for lab2 in sorted(attrs[t + 1]):
            if lab2 not in nxt:
                nxt[lab2] = open_builder(t + 1, lab2)
        active = nxt

    trajectories = tuple(
        Trajectory(
            id=k,
            pair_class=pair_class,
            points=tuple(pts),
            segment_costs=tuple(costs),
        )
        for k, (pts, costs) in enumerate(builders)
    )
    return TrackingResult(trajectories=trajectories)


def trajectories_to_vtk(result: TrackingResult) -> str:
    """Legacy ASCII polydata: one polyline per trajectory.

    Point scalars: time, extremum value, persistence, the cost of the
    segment entering the point (0 at each trajectory start) and the
    trajectory id.
    """
    coords: list[str] = []
    cells: list[str] = []
    time_s: list[str] = []
    value_s: list[str] = []
    pers_s: list[str] = []
    cost_s: list[str] = []
    id_s: list[str] = []
    offset = 0
    for t in result.trajectories:
        ids = range(offset, offset + len(t.points))
        cells.append(" ".join([str(len(t.points))] + [str(i) for i in ids]))
        for k, p in enumerate(t.points):
            coords.append(f"{p.coords[0]!r} {p.coords[1]!r} {p.coords[2]!r}")
            time_s.append(repr(float(p.time_index)))
            value_s.append(repr(p.value))
            pers_s.append(repr(p.persistence))
            cost_s.append(repr(float(t.segment_costs[k - 1])) if k else "0.0")
            id_s.append(str(t.id))
        offset += len(t.points)

    total = offset
    lines = [
        "# vtk DataFile Version 3.0",
        "feature trajectories",
        "ASCII",
        "DATASET POLYDATA",
        f"POINTS {total} double",
        *coords,
        f"LINES {len(result.trajectories)} {total + len(result.trajectories)}",
        *cells,
        f"POINT_DATA {total}",
    ]
    for name, vals, typ in (
        ("time", time_s, "double"),
        ("value", value_s, "double"),
        ("persistence", pers_s, "double"),
        ("segment_cost", cost_s, "double"),
        ("trajectory_id", id_s, "int"),
    ):
        lines.append(f"SCALARS {name} {typ} 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(vals)
    return "\n".join(lines) + "\n"


def save_vtk(result: TrackingResult, path) -> None:
    Path(path).write_text(trajectories_to_vtk(result))
