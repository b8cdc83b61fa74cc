"""Command-line pipeline from synthetic fields to tracked trajectories.

Subcommands:

  gen      write a synthetic time series as step_<t>.json files
  diagram  compute one persistence diagram CSV per timestep
  track    match diagrams through time, write trajectories + events JSON
  bench    time the assignment solvers on one diagram pair, or the two
           trackers across temporal strides

Every command is deterministic for a fixed flag set and --seed; all
randomness flows through one generator seeded with that value, and the seed
is echoed in the manifest written next to the outputs. File formats are the
ones defined by grid (json fields), persistence (diagram CSVs) and tracking
(trajectory JSON, VTK polylines).
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import (
    TimeSeries,
    add_noise,
    downsample_time,
    gen_gaussian_mixture,
    gen_translating_gaussians,
    gen_whirling_gaussians,
    load_series,
    normalize,
    save_series,
)
from .metric import DIAGONAL_MODES, MatchPoint, MetricParams
from .persistence import (
    PAIR_CLASSES,
    compute_diagram,
    load_diagram,
    save_diagram,
    threshold_diagram,
)
from .assignment import solve
from .tracking import (
    detect_merge_split,
    extract_trajectories,
    match_series,
    overlap_tracking,
    save_tracking,
    save_vtk,
)

__all__ = ["RunConfig", "build_parser", "main"]

SCENARIOS = ("gaussians", "merge_fixture", "translating", "whirling")
SOLVER_CHOICES = ("reduced", "full", "auction")


@dataclass(frozen=True)
class RunConfig:
    """Validated knob set shared by the diagram, track and bench commands."""

    input: str | None = None
    out: str | None = None
    pair_class: str = "saddle_max"
    nu: float = 2.0
    alpha: float | None = None
    beta: float | None = None
    gamma: tuple[float, float, float] = (1.0, 1.0, 1.0)
    diagonal_mode: str = "classical_projection"
    threshold: float = 0.0
    threshold_fraction: bool = False
    epsilon: float = 0.0
    solver: str = "reduced"
    auction_accuracy: float | None = None
    stride: int = 1
    workers: int = 1
    seed: int = 0
    normalize: bool = True

    def __post_init__(self):
        if self.solver not in SOLVER_CHOICES:
            raise ValueError(f"solver must be one of {SOLVER_CHOICES}")
        if self.auction_accuracy is not None and self.solver != "auction":
            raise ValueError("--auction-accuracy only applies to --solver auction")
        if self.threshold < 0:
            raise ValueError(f"threshold must be >= 0, got {self.threshold}")
        if self.threshold_fraction and self.threshold > 1:
            raise ValueError(
                f"a fractional threshold cannot exceed 1, got {self.threshold}"
            )
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        fields = {
            name: getattr(args, name)
            for name in (
                "pair_class", "nu", "alpha", "beta", "diagonal_mode",
                "threshold", "threshold_fraction", "epsilon", "solver",
                "auction_accuracy", "stride", "workers", "seed", "normalize",
            )
            if hasattr(args, name)
        }
        if hasattr(args, "gamma"):
            fields["gamma"] = tuple(float(g) for g in args.gamma)
        if hasattr(args, "input_dir"):
            fields["input"] = args.input_dir
        if hasattr(args, "out"):
            fields["out"] = args.out
        return cls(**fields)

    def metric_params(self) -> MetricParams:
        overrides = dict(
            nu=self.nu, gamma=self.gamma, diagonal_mode=self.diagonal_mode
        )
        if self.alpha is not None:
            overrides["alpha"] = self.alpha
        if self.beta is not None:
            overrides["beta"] = self.beta
        return MetricParams.for_class(self.pair_class, **overrides)

    def accuracy(self) -> float:
        return 1e-4 if self.auction_accuracy is None else self.auction_accuracy


def _write_manifest(dirpath: Path, doc: dict) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    (dirpath / "manifest.json").write_text(text)


# ---------------------------------------------------------------------------
# gen

# four bumps of distinct height, well inside the unit square
_FOUR_GAUSSIANS = dict(
    centers=((0.25, 0.25, 0.0), (0.7, 0.3, 0.0), (0.3, 0.75, 0.0), (0.75, 0.7, 0.0)),
    sigmas=(0.08, 0.09, 0.07, 0.08),
    amplitudes=(1.0, 0.8, 0.9, 0.7),
)

# two slow gaussians meeting head-on below a broad hill that keeps the
# global maximum
_MERGE_FIXTURE = dict(
    dims=(96, 64, 1),
    centers=((0.3, 0.25, 0.0), (0.7, 0.25, 0.0)),
    velocities=((0.025, 0.0, 0.0), (-0.025, 0.0, 0.0)),
    sigmas=(0.05, 0.05),
    amplitudes=(1.0, 0.8),
    static_hill=((0.5, 0.55, 0.0), 0.3, 1.6),
)

# three gaussians crossing the domain in parallel lanes over a flat
# background; each step moves them about three region radii, so strided
# region overlap loses the two non-global features while their values
# translate rigidly
_TRANSLATING = dict(
    dims=(96, 64, 1),
    centers=((0.1, 0.15, 0.0), (0.1, 0.33, 0.0), (0.1, 0.51, 0.0)),
    velocities=((0.04, 0.0, 0.0),) * 3,
    sigmas=(0.05, 0.045, 0.04),
    amplitudes=(1.0, 0.8, 0.65),
    static_hill=None,
)

_SCENARIO_STEPS = {
    "gaussians": 1,
    "merge_fixture": 9,
    "translating": 21,
    "whirling": 50,
}


def _scenario_series(scenario: str, timesteps: int) -> TimeSeries:
    if scenario == "gaussians":
        fields = tuple(
            gen_gaussian_mixture((64, 64, 1), time_index=t, **_FOUR_GAUSSIANS)
            for t in range(timesteps)
        )
        return TimeSeries(fields=fields)
    if scenario == "whirling":
        return gen_whirling_gaussians(8, timesteps)
    if scenario == "translating":
        return gen_translating_gaussians(timesteps, **_TRANSLATING)
    if scenario == "merge_fixture":
        return gen_translating_gaussians(timesteps, **_MERGE_FIXTURE)
    raise ValueError(f"unknown scenario {scenario!r}")


def cmd_gen(args: argparse.Namespace) -> int:
    timesteps = args.timesteps
    if timesteps is None:
        timesteps = _SCENARIO_STEPS[args.scenario]
    if timesteps < 1:
        raise ValueError(f"timesteps must be >= 1, got {timesteps}")
    if args.noise < 0:
        raise ValueError(f"noise must be >= 0, got {args.noise}")
    series = _scenario_series(args.scenario, timesteps)
    if args.noise > 0:
        master = np.random.default_rng(args.seed)
        series = TimeSeries(fields=tuple(
            add_noise(f, args.noise, int(master.integers(2**63)))
            for f in series
        ))
    out = Path(args.out)
    save_series(series, out)
    manifest = {
        "command": "gen",
        "scenario": args.scenario,
        "timesteps": timesteps,
        "dims": list(series.fields[0].dims),
        "noise": args.noise,
        "seed": args.seed,
        "files": [f"step_{f.time_index}.json" for f in series],
    }
    _write_manifest(out, manifest)
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# diagram

def _compute_diagrams(series: TimeSeries, cfg: RunConfig) -> list:
    def one(field):
        return threshold_diagram(
            compute_diagram(field), cfg.threshold, fraction=cfg.threshold_fraction
        )

    if cfg.workers == 1:
        return [one(f) for f in series]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(one, series.fields))


def cmd_diagram(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_args(args)
    series = load_series(args.series_dir)
    info = None
    if cfg.normalize:
        series, info = normalize(series)
    diagrams = _compute_diagrams(series, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for d in diagrams:
        save_diagram(d, out / f"diagram_{d.time_index}.csv")
    if info is not None:
        (out / "normalization.json").write_text(
            json.dumps(info.to_dict(), indent=2, sort_keys=True) + "\n"
        )
    _write_manifest(out, {
        "command": "diagram",
        "source": str(args.series_dir),
        "threshold": cfg.threshold,
        "threshold_fraction": cfg.threshold_fraction,
        "normalize": cfg.normalize,
        "seed": cfg.seed,
        "pairs_per_step": [len(d) for d in diagrams],
        "files": [f"diagram_{d.time_index}.csv" for d in diagrams],
    })
    print(f"wrote {len(diagrams)} diagrams to {out}")
    return 0


# ---------------------------------------------------------------------------
# track

_DIAGRAM_NAME = re.compile(r"^diagram_(\d+)\.csv$")


def _load_diagram_dir(path: Path) -> list:
    entries = []
    for p in path.iterdir():
        m = _DIAGRAM_NAME.match(p.name)
        if m:
            entries.append((int(m.group(1)), p))
    entries.sort()
    return [load_diagram(p, time_index=k) for k, p in entries]


def _input_diagrams(cfg: RunConfig) -> list:
    """Diagrams from either a diagram directory or a raw series directory.

    The threshold is (re)applied on both routes, so tracking a diagram
    directory written with the same threshold gives identical results to
    tracking its source series.
    """
    src = Path(cfg.input)
    if not src.is_dir():
        raise ValueError(f"{src}: not a directory")
    if any(src.glob("diagram_*.csv")):
        diagrams = _load_diagram_dir(src)[:: cfg.stride]
        return [
            threshold_diagram(d, cfg.threshold, fraction=cfg.threshold_fraction)
            for d in diagrams
        ]
    if any(src.glob("step_*.json")):
        series = load_series(src)
        if cfg.normalize:
            series, _ = normalize(series)
        series = downsample_time(series, cfg.stride)
        return _compute_diagrams(series, cfg)
    raise ValueError(f"{src}: neither diagram_<t>.csv nor step_<t>.json files")


def cmd_track(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_args(args)
    diagrams = _input_diagrams(cfg)
    params = cfg.metric_params()
    series = match_series(
        diagrams,
        params=params,
        pair_class=cfg.pair_class,
        solver=cfg.solver,
        accuracy=cfg.accuracy(),
        workers=cfg.workers,
    )
    result = detect_merge_split(extract_trajectories(series), cfg.epsilon, params)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_tracking(result, out)
    if args.vtk is not None:
        save_vtk(result, args.vtk)
    print(
        f"{len(result.trajectories)} trajectories, "
        f"{len(result.events)} events -> {out}"
    )
    return 0


# ---------------------------------------------------------------------------
# bench

def _synthetic_pair(rng, n: int):
    """Two diagrams sharing n//4 prominent features plus near-diagonal noise."""
    first, second = [], []

    def point(b, d, pos):
        xyz = (float(pos[0]), float(pos[1]), 0.0)
        lo, hi = float(min(b, d)), float(max(b, d))
        return MatchPoint(
            birth=lo, death=hi, extremum=xyz, other=xyz, pair_class="saddle_max"
        )

    for _ in range(max(1, n // 4)):
        d = rng.uniform(0.25, 0.9)
        b = d - rng.uniform(0.15, 0.6) * d
        pos = rng.uniform(0.05, 0.95, 2)
        first.append(point(b, d, pos))
        second.append(point(
            b + rng.normal(0.0, 0.004),
            d + rng.normal(0.0, 0.004),
            pos + rng.normal(0.0, 0.01, 2),
        ))
    for side in (first, second):
        while len(side) < n:
            b = rng.uniform(0.0, 0.6)
            side.append(point(b, b + rng.uniform(0.001, 0.02), rng.uniform(0.05, 0.95, 2)))
    return tuple(first), tuple(second)


def _parse_sweep(text: str, kind, flag: str):
    try:
        values = [kind(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"{flag} wants a comma-separated list, got {text!r}")
    if not values:
        raise ValueError(f"{flag} is empty")
    return values


def _bench_solvers(args: argparse.Namespace, cfg: RunConfig) -> list[tuple]:
    if args.n_pairs < 2:
        raise ValueError(f"--n-pairs must be >= 2, got {args.n_pairs}")
    thresholds = _parse_sweep(args.thresholds, float, "--thresholds")
    rng = np.random.default_rng(cfg.seed)
    pts1, pts2 = _synthetic_pair(rng, args.n_pairs)
    params = MetricParams.for_maxima()
    # first solver calls pay one-off kernel loading; keep it out of the rows
    warm1, warm2 = pts1[:2], pts2[:2]
    for solver in SOLVER_CHOICES:
        solve(warm1, warm2, params, solver=solver, accuracy=cfg.accuracy())
    rows = []
    for ti, cut in enumerate(thresholds):
        d1 = tuple(p for p in pts1 if p.persistence > cut)
        d2 = tuple(p for p in pts2 if p.persistence > cut)
        for solver in SOLVER_CHOICES:
            start = time.perf_counter()
            res = solve(d1, d2, params, solver=solver, accuracy=cfg.accuracy())
            wall = (time.perf_counter() - start) * 1000.0
            rows.append(
                (f"solvers-{ti:02d}", solver, len(d1), len(d2),
                 cut, res.total_cost, wall)
            )
    return rows


def _bench_trackers(args: argparse.Namespace, cfg: RunConfig) -> list[tuple]:
    strides = _parse_sweep(args.strides, int, "--strides")
    if any(s < 1 for s in strides):
        raise ValueError(f"strides must be >= 1, got {strides}")
    series = _scenario_series("translating", args.timesteps)
    if cfg.normalize:
        series, _ = normalize(series)
    params = MetricParams.for_maxima()
    # first solve pays one-off kernel loading; keep it out of the rows
    warm = _synthetic_pair(np.random.default_rng(0), 2)
    solve(warm[0], warm[1], params)
    rows = []
    for si, stride in enumerate(strides):
        sub = downsample_time(series, stride)
        config_id = f"trackers-{si:02d}"

        start = time.perf_counter()
        diagrams = [
            threshold_diagram(
                compute_diagram(f), cfg.threshold, fraction=cfg.threshold_fraction
            )
            for f in sub
        ]
        matched = match_series(diagrams, params=params, workers=cfg.workers)
        tracked = extract_trajectories(matched)
        wall = (time.perf_counter() - start) * 1000.0
        cost = sum(r.total_cost for r in matched.results)
        rows.append(
            (config_id, "wasserstein", len(sub), len(tracked.trajectories),
             float(stride), cost, wall)
        )

        start = time.perf_counter()
        # the overlap threshold is absolute; on a normalized series the
        # value range is 1, so fractional and absolute cuts coincide
        regions = overlap_tracking(sub, persistence_threshold=cfg.threshold)
        wall = (time.perf_counter() - start) * 1000.0
        rows.append(
            (config_id, "overlap", len(sub), len(regions.trajectories),
             float(stride), 0.0, wall)
        )
    return rows


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_args(args)
    if args.mode == "solvers":
        rows = _bench_solvers(args, cfg)
    else:
        rows = _bench_trackers(args, cfg)
    out = Path(args.out)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ("config_id", "solver", "n_pairs_1", "n_pairs_2",
             "threshold", "cost", "wall_ms")
        )
        for cid, solver, n1, n2, thresh, cost, wall in rows:
            w.writerow(
                (cid, solver, n1, n2, repr(float(thresh)),
                 repr(float(cost)), f"{wall:.3f}")
            )
    print(f"wrote {len(rows)} bench rows to {out}")
    return 0


# ---------------------------------------------------------------------------
# parser

def _add_threshold_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--threshold", type=float, default=0.0,
        help="drop pairs with persistence <= this cut (default 0)",
    )
    p.add_argument(
        "--threshold-fraction", dest="threshold_fraction", action="store_true",
        help="read --threshold as a fraction of each field's value range",
    )


def _add_metric_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("metric")
    g.add_argument(
        "--pair-class", dest="pair_class", choices=PAIR_CLASSES,
        default="saddle_max", help="which diagram class to track",
    )
    g.add_argument("--nu", type=float, default=2.0, help="norm exponent")
    g.add_argument(
        "--alpha", type=float, default=None,
        help="birth weight (default 0.1 for saddle_max, 1.0 for min_saddle)",
    )
    g.add_argument(
        "--beta", type=float, default=None,
        help="death weight (default 1.0 for saddle_max, 0.1 for min_saddle)",
    )
    g.add_argument(
        "--gamma", type=float, nargs=3, default=(1.0, 1.0, 1.0),
        metavar=("GX", "GY", "GZ"), help="spatial weights",
    )
    g.add_argument(
        "--diagonal-mode", dest="diagonal_mode", choices=DIAGONAL_MODES,
        default="classical_projection", help="cost of leaving a point unmatched",
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="topotrack",
        description="Track critical points of scalar field time series.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a synthetic time series")
    gen.add_argument("scenario", choices=SCENARIOS)
    gen.add_argument(
        "--timesteps", type=int, default=None,
        help="series length (per-scenario default when omitted)",
    )
    gen.add_argument(
        "--noise", type=float, default=0.0,
        help="uniform noise amplitude as a fraction of the value range",
    )
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output series directory")
    gen.set_defaults(func=cmd_gen)

    dia = sub.add_parser("diagram", help="compute per-timestep diagrams")
    dia.add_argument("series_dir", help="directory of step_<t>.json files")
    _add_threshold_args(dia)
    dia.add_argument(
        "--no-normalize", dest="normalize", action="store_false",
        help="keep raw coordinates and values",
    )
    dia.add_argument("--workers", type=int, default=1)
    dia.add_argument("--seed", type=int, default=0)
    dia.add_argument("--out", required=True, help="output diagram directory")
    dia.set_defaults(func=cmd_diagram)

    trk = sub.add_parser("track", help="match diagrams and extract trajectories")
    trk.add_argument(
        "input_dir",
        help="series directory (step_<t>.json) or diagram directory "
        "(diagram_<t>.csv)",
    )
    _add_metric_args(trk)
    _add_threshold_args(trk)
    trk.add_argument(
        "--epsilon", type=float, default=0.0,
        help="merge/split reconnection radius (0 disables)",
    )
    trk.add_argument("--solver", choices=SOLVER_CHOICES, default="reduced")
    trk.add_argument(
        "--auction-accuracy", dest="auction_accuracy", type=float, default=None,
        help="relative cost slack for --solver auction (default 1e-4)",
    )
    trk.add_argument("--stride", type=int, default=1, help="keep every n-th timestep")
    trk.add_argument("--workers", type=int, default=1)
    trk.add_argument("--seed", type=int, default=0)
    trk.add_argument(
        "--no-normalize", dest="normalize", action="store_false",
        help="skip normalization when reading a series directory",
    )
    trk.add_argument("--vtk", default=None, help="also write polylines here")
    trk.add_argument("--out", required=True, help="output tracking JSON path")
    trk.set_defaults(func=cmd_track)

    ben = sub.add_parser("bench", help="wall-time tables as CSV")
    ben.add_argument("mode", choices=("solvers", "trackers"))
    ben.add_argument(
        "--n-pairs", dest="n_pairs", type=int, default=1000,
        help="synthetic diagram size for solvers mode",
    )
    ben.add_argument(
        "--thresholds", default="0,0.01,0.02,0.05",
        help="comma list of persistence cuts swept in solvers mode",
    )
    ben.add_argument(
        "--strides", default="1,2,5",
        help="comma list of temporal strides swept in trackers mode",
    )
    ben.add_argument(
        "--timesteps", type=int, default=21,
        help="translating fixture length for trackers mode",
    )
    _add_threshold_args(ben)
    ben.add_argument(
        "--auction-accuracy", dest="auction_accuracy", type=float, default=None,
        help="auction slack in solvers mode (default 1e-4)",
    )
    ben.add_argument("--workers", type=int, default=1)
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--out", required=True, help="output CSV path")
    # bench always sweeps the auction solver, so the accuracy flag is valid
    ben.set_defaults(func=cmd_bench, solver="auction")

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
