from dataclasses import replace

import numpy as np
import pytest

from topotrack.assignment import AssignmentResult
from topotrack.grid import (
    TimeSeries,
    gen_gaussian_mixture,
    gen_translating_gaussians,
    gen_whirling_gaussians,
)
from topotrack.metric import MatchPoint, MetricParams, lifted_distance
from topotrack.persistence import PersistenceDiagram, compute_diagram, threshold_diagram
from topotrack.tracking import (
    MatchingSeries,
    TrackingEvent,
    TrackingResult,
    Trajectory,
    TrajectoryPoint,
    _as_match_point,
    detect_merge_split,
    extract_trajectories,
    load_tracking,
    match_series,
    overlap_tracking,
    save_tracking,
    trajectories_to_vtk,
)

PARAMS = MetricParams.for_maxima()


def mp(birth, death, pos, pair_class="saddle_max"):
    pos = (float(pos[0]), float(pos[1]), 0.0)
    return MatchPoint(
        birth=birth, death=death, extremum=pos, other=pos, pair_class=pair_class
    )


def empty_diagram(t):
    return PersistenceDiagram(pairs=(), time_index=t, field_range=(0.0, 1.0))


def hand_series(points, matches, pair_class="saddle_max"):
    """MatchingSeries from explicit per-step points and match lists."""
    points = tuple(tuple(p) for p in points)
    results = []
    for t, step in enumerate(matches):
        step = tuple(sorted(step))
        m1 = {i for i, _ in step}
        m2 = {j for _, j in step}
        results.append(
            AssignmentResult(
                matches=step,
                unmatched_1=tuple(
                    i for i in range(len(points[t])) if i not in m1
                ),
                unmatched_2=tuple(
                    j for j in range(len(points[t + 1])) if j not in m2
                ),
                total_cost=0.0,
                solver="reduced_munkres",
                stats={},
            )
        )
    return MatchingSeries(
        pair_class=pair_class,
        params=PARAMS,
        solver="reduced",
        diagrams=tuple(empty_diagram(t) for t in range(len(points))),
        points=points,
        results=tuple(results),
    )


def traj(tid, times, xs, pair_class="saddle_max", birth=0.2, death=0.9):
    pts = tuple(
        TrajectoryPoint(
            time_index=t, coords=(float(x), 0.0, 0.0),
            value=death, birth=birth, death=death,
        )
        for t, x in zip(times, xs)
    )
    costs = tuple(
        lifted_distance(
            _as_match_point(a, pair_class), _as_match_point(b, pair_class), PARAMS
        )
        for a, b in zip(pts, pts[1:])
    )
    return Trajectory(id=tid, pair_class=pair_class, points=pts, segment_costs=costs)


@pytest.fixture(scope="module")
def whirling_diagrams():
    series = gen_whirling_gaussians(8, 20, amplitude=np.linspace(1.0, 0.55, 8))
    return [
        threshold_diagram(compute_diagram(f), 0.15, fraction=True) for f in series
    ]


def converging_series(timesteps):
    """Two gaussians meeting head-on, a broad hill holding the global max."""
    return gen_translating_gaussians(
        timesteps,
        dims=(96, 64, 1),
        centers=((0.3, 0.25, 0.0), (0.7, 0.25, 0.0)),
        velocities=((0.025, 0.0, 0.0), (-0.025, 0.0, 0.0)),
        sigmas=(0.05, 0.05),
        amplitudes=(1.0, 0.8),
        static_hill=((0.5, 0.55, 0.0), 0.3, 1.6),
    )


def tracked(series, threshold=0.04):
    diagrams = [
        threshold_diagram(compute_diagram(f), threshold, fraction=True)
        for f in series
    ]
    return extract_trajectories(match_series(diagrams, pair_class="saddle_max"))


class TestTypes:
    def test_trajectory_needs_points(self):
        with pytest.raises(ValueError, match="no points"):
            Trajectory(id=0, pair_class="saddle_max", points=(), segment_costs=())

    def test_segment_cost_length_checked(self):
        p = TrajectoryPoint(0, (0.0, 0.0, 0.0), 1.0, 0.0, 1.0)
        with pytest.raises(ValueError, match="segment"):
            Trajectory(
                id=0, pair_class="saddle_max", points=(p,), segment_costs=(1.0,)
            )

    def test_event_kind_checked(self):
        with pytest.raises(ValueError, match="kind"):
            TrackingEvent(kind="vanish", time_index=0, surviving=0, absorbed=1)

    def test_series_shape_checked(self):
        with pytest.raises(ValueError, match="matchings"):
            MatchingSeries(
                pair_class="saddle_max",
                params=PARAMS,
                solver="reduced",
                diagrams=(empty_diagram(0), empty_diagram(1)),
                points=((), ()),
                results=(),
            )

    def test_trajectory_span(self):
        t = traj(0, (3, 4, 5), (0.0, 0.1, 0.2))
        assert t.start_time == 3 and t.end_time == 5 and len(t) == 3


class TestMatchSeries:
    def test_needs_two_timesteps(self, whirling_diagrams):
        with pytest.raises(ValueError, match="two timesteps"):
            match_series(whirling_diagrams[:1])

    def test_unknown_class(self, whirling_diagrams):
        with pytest.raises(ValueError, match="pair_class"):
            match_series(whirling_diagrams[:2], pair_class="saddles")

    def test_workers_validated(self, whirling_diagrams):
        with pytest.raises(ValueError, match="workers"):
            match_series(whirling_diagrams[:2], workers=0)

    def test_identity_on_repeated_diagram(self, whirling_diagrams):
        d = whirling_diagrams[0]
        ms = match_series([d, d], pair_class="saddle_max")
        n = len(ms.points[0])
        assert ms.results[0].matches == tuple((i, i) for i in range(n))
        assert ms.results[0].total_cost == pytest.approx(0.0, abs=1e-12)

    def test_whirling_counts(self, whirling_diagrams):
        ms = match_series(whirling_diagrams, pair_class="saddle_max")
        assert len(ms.results) == 19
        assert all(len(r.matches) == 8 for r in ms.results)
        assert ms.time_indices == tuple(range(20))

    def test_workers_do_not_change_output(self, whirling_diagrams):
        one = match_series(whirling_diagrams, pair_class="saddle_max")
        four = match_series(whirling_diagrams, pair_class="saddle_max", workers=4)
        for a, b in zip(one.results, four.results):
            assert a.matches == b.matches
            assert a.total_cost == b.total_cost

    def test_solver_error_names_timesteps(self, whirling_diagrams):
        # 8 pairs per side overruns the brute-force size guard
        with pytest.raises(RuntimeError, match="timesteps 0 and 1"):
            match_series(
                whirling_diagrams[:2], pair_class="saddle_max", solver="brute"
            )


class TestExtract:
    def test_whirling_eight_full_span(self, whirling_diagrams):
        result = extract_trajectories(
            match_series(whirling_diagrams, pair_class="saddle_max")
        )
        assert len(result.trajectories) == 8
        assert all(t.start_time == 0 for t in result.trajectories)
        assert all(t.end_time == 19 for t in result.trajectories)
        assert result.events == ()

    def test_window_feature(self):
        # a single feature alive only in timesteps 3..7
        pts = [() for _ in range(10)]
        for t in range(3, 8):
            pts[t] = (mp(0.2, 0.9, (0.1 * t, 0.0)),)
        matches = [
            [(0, 0)] if pts[t] and pts[t + 1] else [] for t in range(9)
        ]
        result = extract_trajectories(hand_series(pts, matches))
        assert len(result.trajectories) == 1
        t = result.trajectories[0]
        assert t.start_time == 3 and t.end_time == 7 and len(t) == 5

    def test_all_matchings_empty_gives_singletons(self):
        pts = [
            (mp(0.2, 0.9, (0.0, 0.0)), mp(0.1, 0.8, (0.5, 0.5)))
            for _ in range(4)
        ]
        matches = [[] for _ in range(3)]
        result = extract_trajectories(hand_series(pts, matches))
        assert len(result.trajectories) == 8
        assert all(len(t) == 1 for t in result.trajectories)

    def test_ids_by_first_appearance(self):
        pts = [
            (mp(0.2, 0.9, (0.0, 0.0)),),
            (mp(0.2, 0.9, (0.0, 0.0)), mp(0.1, 0.8, (0.5, 0.5))),
            (mp(0.2, 0.9, (0.0, 0.0)), mp(0.1, 0.8, (0.5, 0.5))),
        ]
        matches = [[(0, 0)], [(0, 0), (1, 1)]]
        result = extract_trajectories(hand_series(pts, matches))
        spans = [(t.id, t.start_time, t.end_time) for t in result.trajectories]
        assert spans == [(0, 0, 2), (1, 1, 2)]

    def test_conservation(self, whirling_diagrams):
        ms = match_series(whirling_diagrams, pair_class="saddle_max")
        result = extract_trajectories(ms)
        total_pairs = sum(len(p) for p in ms.points)
        assert sum(len(t) for t in result.trajectories) == total_pairs

    def test_segment_costs_are_lifted_distances(self, whirling_diagrams):
        ms = match_series(whirling_diagrams, pair_class="saddle_max")
        result = extract_trajectories(ms)
        for t in result.trajectories:
            for a, b, c in zip(t.points, t.points[1:], t.segment_costs):
                d = lifted_distance(
                    _as_match_point(a, t.pair_class),
                    _as_match_point(b, t.pair_class),
                    ms.params,
                )
                assert c == pytest.approx(d, abs=1e-12)

    def test_deterministic(self, whirling_diagrams):
        a = extract_trajectories(
            match_series(whirling_diagrams, pair_class="saddle_max")
        )
        b = extract_trajectories(
            match_series(whirling_diagrams, pair_class="saddle_max")
        )
        assert a.to_json() == b.to_json()


class TestMergeSplitRules:
    def test_epsilon_validated(self):
        result = TrackingResult(trajectories=(traj(0, (0, 1), (0.0, 0.1)),))
        with pytest.raises(ValueError, match="epsilon"):
            detect_merge_split(result, -0.1, PARAMS)

    def test_epsilon_zero_is_noop(self):
        trs = (traj(0, (0, 1, 2), (0.0, 0.0, 0.0)),
               traj(1, (0, 1, 2), (0.0, 0.0, 0.0)))
        result = TrackingResult(trajectories=trs)
        out = detect_merge_split(result, 0.0, PARAMS)
        assert out.events == ()
        assert out.trajectories == trs

    def test_merge_relabels_when_survivor_ended(self):
        # a (older) ends at t=2; b passes nearby and keeps going
        a = traj(0, (0, 1, 2), (0.00, 0.01, 0.02))
        b = traj(1, (1, 2, 3, 4), (0.12, 0.03, 0.04, 0.05))
        out = detect_merge_split(TrackingResult((a, b)), 0.05, PARAMS)
        assert out.events == (TrackingEvent("merge", 2, 0, 1),)
        a2, b2 = out.trajectories
        assert [p.time_index for p in a2.points] == [0, 1, 2, 3, 4]
        assert [p.time_index for p in b2.points] == [1, 2]
        # the reconnecting segment cost is the distance actually bridged
        bridge = lifted_distance(
            _as_match_point(a.points[-1], "saddle_max"),
            _as_match_point(b.points[2], "saddle_max"),
            PARAMS,
        )
        assert a2.segment_costs[2] == pytest.approx(bridge)
        assert a2.segment_costs[:2] == a.segment_costs
        assert a2.segment_costs[3] == pytest.approx(b.segment_costs[2])
        assert b2.segment_costs == b.segment_costs[:1]

    def test_merge_without_relabel_when_younger_ends(self):
        # b (younger) ends; a continues; ids and points stay put
        a = traj(0, (0, 1, 2, 3, 4), (0.00, 0.01, 0.02, 0.03, 0.04))
        b = traj(1, (1, 2), (0.12, 0.03))
        out = detect_merge_split(TrackingResult((a, b)), 0.05, PARAMS)
        assert out.events == (TrackingEvent("merge", 2, 0, 1),)
        assert out.trajectories == (a, b)

    def test_split_records_event_without_surgery(self):
        a = traj(0, (0, 1, 2, 3, 4), (0.00, 0.01, 0.02, 0.03, 0.04))
        b = traj(1, (2, 3, 4), (0.03, 0.05, 0.07))
        out = detect_merge_split(TrackingResult((a, b)), 0.05, PARAMS)
        assert out.events == (TrackingEvent("split", 2, 0, 1),)
        assert out.trajectories == (a, b)

    def test_tie_on_start_time_prefers_lower_id(self):
        a = traj(0, (0, 1, 2, 3), (0.00, 0.01, 0.02, 0.03))
        b = traj(1, (0, 1, 2), (0.04, 0.03, 0.025))
        out = detect_merge_split(TrackingResult((a, b)), 0.05, PARAMS)
        assert out.events == (TrackingEvent("merge", 2, 0, 1),)

    def test_distance_gate_is_strict(self):
        a = traj(0, (0, 1, 2, 3), (0.0, 0.0, 0.0, 0.0))
        b = traj(1, (1, 2), (0.2, 0.1))
        out = detect_merge_split(TrackingResult((a, b)), 0.1, PARAMS)
        assert out.events == ()
        out = detect_merge_split(TrackingResult((a, b)), 0.100001, PARAMS)
        assert out.events == (TrackingEvent("merge", 2, 0, 1),)

    def test_classes_never_mix(self):
        a = traj(0, (0, 1, 2, 3), (0.00, 0.01, 0.02, 0.03))
        b = traj(1, (1, 2), (0.12, 0.03), pair_class="min_saddle")
        out = detect_merge_split(TrackingResult((a, b)), 0.05, PARAMS)
        assert out.events == ()

    def test_one_event_per_trajectory_per_timestep(self):
        a = traj(0, (0, 1, 2), (0.00, 0.01, 0.02))
        b = traj(1, (1, 2, 3, 4), (0.12, 0.03, 0.04, 0.05))
        c = traj(2, (1, 2, 3, 4), (0.13, 0.04, 0.05, 0.06))
        out = detect_merge_split(TrackingResult((a, b, c)), 0.05, PARAMS)
        assert out.events == (TrackingEvent("merge", 2, 0, 1),)

    def test_idempotent_on_hand_fixture(self):
        a = traj(0, (0, 1, 2), (0.00, 0.01, 0.02))
        b = traj(1, (1, 2, 3, 4), (0.12, 0.03, 0.04, 0.05))
        once = detect_merge_split(TrackingResult((a, b)), 0.05, PARAMS)
        twice = detect_merge_split(once, 0.05, PARAMS)
        assert once.to_json() == twice.to_json()


@pytest.fixture(scope="module")
def palindrome():
    return tracked(converging_series(17))


class TestMergeSplitFixture:
    def test_merge_then_split(self, palindrome):
        out = detect_merge_split(palindrome, 0.35, PARAMS)
        kinds = [(e.kind, e.time_index) for e in out.events]
        assert kinds == [("merge", 5), ("split", 11)]
        merge, split = out.events
        survivors = {t.id: t.start_time for t in palindrome.trajectories}
        assert survivors[merge.surviving] <= survivors[merge.absorbed]
        assert survivors[split.surviving] < survivors[split.absorbed]

    def test_small_epsilon_sees_nothing(self, palindrome):
        out = detect_merge_split(palindrome, 0.25, PARAMS)
        assert out.events == ()

    def test_idempotent(self, palindrome):
        once = detect_merge_split(palindrome, 0.35, PARAMS)
        twice = detect_merge_split(once, 0.35, PARAMS)
        assert once.to_json() == twice.to_json()

    def test_time_reversal_swaps_kinds(self):
        series = converging_series(9)  # converge and stay converged
        forward = detect_merge_split(tracked(series), 0.35, PARAMS)
        assert [e.kind for e in forward.events] == ["merge"]
        last = len(series) - 1
        reversed_fields = tuple(
            replace(f, time_index=last - f.time_index)
            for f in reversed(series.fields)
        )
        backward = detect_merge_split(
            tracked(TimeSeries(fields=reversed_fields)), 0.35, PARAMS
        )
        assert [e.kind for e in backward.events] == ["split"]
        assert backward.events[0].time_index == last - forward.events[0].time_index


class TestOverlap:
    def test_static_field_matches_itself(self):
        f = gen_gaussian_mixture(
            (48, 48, 1),
            centers=((0.3, 0.3, 0.0), (0.7, 0.7, 0.0)),
            sigmas=(0.1, 0.1),
            amplitudes=(1.0, 0.8),
        )
        series = TimeSeries(fields=(f, replace(f, time_index=1)))
        result = overlap_tracking(series)
        assert len(result.trajectories) == 2
        for t in result.trajectories:
            assert len(t) == 2
            assert t.points[0].coords == t.points[1].coords
            assert t.segment_costs == (0.0,)

    def test_jump_beyond_support_breaks_trajectory(self):
        def frame(x, t):
            return gen_gaussian_mixture(
                (96, 64, 1),
                centers=((x, 0.33, 0.0), (0.5, 0.33, 0.0)),
                sigmas=(0.04, 0.25),
                amplitudes=(1.0, 2.5),
                time_index=t,
            )
        series = TimeSeries(fields=(frame(0.15, 0), frame(0.85, 1)))
        result = overlap_tracking(series)
        spans = sorted((t.start_time, t.end_time) for t in result.trajectories)
        assert spans == [(0, 0), (0, 1), (1, 1)]

    def test_min_direction(self):
        f = gen_gaussian_mixture(
            (48, 48, 1),
            centers=((0.3, 0.3, 0.0), (0.7, 0.7, 0.0)),
            sigmas=(0.1, 0.1),
            amplitudes=(-1.0, -0.8),
        )
        series = TimeSeries(fields=(f, replace(f, time_index=1)))
        result = overlap_tracking(series, direction="min")
        assert len(result.trajectories) == 2
        assert all(t.pair_class == "min_saddle" for t in result.trajectories)
        for t in result.trajectories:
            assert t.points[0].birth == t.points[0].value
            assert t.points[0].death >= t.points[0].birth

    def test_rejects_bad_arguments(self):
        f = gen_gaussian_mixture((8, 8, 1), [], [], [])
        series = TimeSeries(fields=(f,))
        with pytest.raises(ValueError, match="direction"):
            overlap_tracking(series, direction="up")
        with pytest.raises(ValueError, match="threshold"):
            overlap_tracking(series, persistence_threshold=-1.0)

    def test_rejects_nonuniform_series(self):
        a = gen_gaussian_mixture((8, 8, 1), [], [], [], time_index=0)
        b = gen_gaussian_mixture((9, 8, 1), [], [], [], time_index=1)
        series = TimeSeries(fields=(a, b))
        with pytest.raises(ValueError, match="uniform|grid"):
            overlap_tracking(series)

    def test_deterministic(self):
        series = converging_series(5)
        a = overlap_tracking(series, persistence_threshold=0.05)
        b = overlap_tracking(series, persistence_threshold=0.05)
        assert a.to_json() == b.to_json()


class TestSerialization:
    def build(self):
        a = traj(0, (0, 1, 2), (0.00, 0.01, 0.02))
        b = traj(1, (1, 2, 3, 4), (0.12, 0.03, 0.04, 0.05))
        return detect_merge_split(TrackingResult((a, b)), 0.05, PARAMS)

    def test_json_round_trip(self, tmp_path):
        result = self.build()
        path = tmp_path / "tracking.json"
        save_tracking(result, path)
        back = load_tracking(path)
        assert back.to_json() == result.to_json()
        assert back.events == result.events

    def test_json_shape(self):
        obj = self.build().to_json()
        assert set(obj) == {"trajectories", "events"}
        t = obj["trajectories"][0]
        assert set(t) == {"id", "class", "points", "segment_costs"}
        p = t["points"][0]
        assert set(p) == {
            "t", "x", "y", "z", "value", "birth", "death", "persistence"
        }
        e = obj["events"][0]
        assert set(e) == {"kind", "t", "surviving", "absorbed"}

    def test_file_bytes_deterministic(self, tmp_path):
        result = self.build()
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_tracking(result, p1)
        save_tracking(result, p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestVtk:
    def build(self):
        return TrackingResult(trajectories=(
            traj(0, (0, 1, 2), (0.0, 0.1, 0.2)),
            traj(1, (2,), (0.5,)),
        ))

    def test_polyline_layout(self):
        text = trajectories_to_vtk(self.build())
        lines = text.splitlines()
        assert lines[0].startswith("# vtk DataFile")
        assert "DATASET POLYDATA" in lines
        assert "POINTS 4 double" in lines
        assert "LINES 2 6" in lines
        idx = lines.index("LINES 2 6")
        assert lines[idx + 1] == "3 0 1 2"
        assert lines[idx + 2] == "1 3"
        assert "POINT_DATA 4" in lines

    def test_scalar_blocks(self):
        lines = trajectories_to_vtk(self.build()).splitlines()
        for name in ("time", "value", "persistence", "segment_cost", "trajectory_id"):
            assert any(l.startswith(f"SCALARS {name} ") for l in lines)
        # first point of each polyline carries no entering segment
        idx = lines.index("SCALARS segment_cost double 1")
        costs = lines[idx + 2: idx + 6]
        assert costs[0] == "0.0"
        assert costs[3] == "0.0"
