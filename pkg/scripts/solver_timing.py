#!/usr/bin/env python3
"""Time the assignment solvers on synthetic diagram pairs.

Two instance families, both 75% short-lived noise: `uniform` spreads
the noise over the whole domain (a dense solver resolves most of it
greedily), `clustered` concentrates it in tight interchangeable clouds,
the regime real fields produce in rough regions and the one the sparse
solver is built for. Walls are per solve, costs come from the same run;
reduced and full must agree to 1e-9 or the script aborts.

    python3 scripts/solver_timing.py --family clustered --sizes 200,500,1000
"""

import argparse
import sys
import time

import numpy as np

from topotrack.assignment import solve
from topotrack.metric import MatchPoint, MetricParams

PARAMS = MetricParams.for_maxima()


def _point(b, d, pos):
    xyz = (float(pos[0]), float(pos[1]), float(pos[2]))
    lo, hi = (b, d) if b <= d else (d, b)
    return MatchPoint(
        birth=float(lo), death=float(hi), extremum=xyz, other=xyz,
        pair_class="saddle_max",
    )


def _real_features(rng, k):
    feats = []
    for _ in range(k):
        d = rng.uniform(0.25, 0.9)
        b = d - rng.uniform(0.15, 0.6) * d
        pos = rng.uniform(0.05, 0.95, 3)
        pos[2] = 0.0
        feats.append((b, d, pos))
    return feats


def _uniform_noise(rng, k):
    pts = []
    for _ in range(k):
        b = rng.uniform(0.0, 0.6)
        pos = rng.uniform(0.0, 1.0, 3)
        pos[2] = 0.0
        pts.append(_point(b, b + rng.uniform(0.001, 0.02), pos))
    return pts


def uniform_pair(rng, n):
    real = _real_features(rng, n // 4)
    first = [_point(b, d, pos) for b, d, pos in real] + _uniform_noise(
        rng, n - len(real)
    )
    second = [
        _point(
            b + rng.normal(0.0, 0.004),
            d + rng.normal(0.0, 0.004),
            pos + rng.normal(0.0, 0.01, 3),
        )
        for b, d, pos in real
    ] + _uniform_noise(rng, n - len(real))
    return first, second


def clustered_pair(rng, n, n_clusters=8, cluster_size=12):
    n_real = n // 4
    n_hard = min(n_clusters * cluster_size, (n - n_real) * 2 // 3)
    centers = rng.uniform(0.1, 0.9, (n_clusters, 3))
    centers[:, 2] = 0.0
    base_birth = rng.uniform(0.05, 0.5, n_clusters)
    real = _real_features(rng, n_real)
    sides = []
    for copy in range(2):
        if copy == 0:
            pts = [_point(b, d, pos) for b, d, pos in real]
        else:
            pts = [
                _point(
                    b + rng.normal(0.0, 0.004),
                    d + rng.normal(0.0, 0.004),
                    pos + rng.normal(0.0, 0.01, 3),
                )
                for b, d, pos in real
            ]
        s_birth, s_pos = (0.003, 0.012) if copy == 0 else (0.001, 0.004)
        for k in range(n_hard):
            c = k % n_clusters
            b = base_birth[c] + rng.normal(0.0, s_birth)
            d = b + rng.uniform(0.001, 0.012)
            pos = centers[c] + rng.normal(0.0, s_pos, 3)
            pos[2] = 0.0
            pts.append(_point(b, d, pos))
        pts.extend(_uniform_noise(rng, n - n_real - n_hard))
        sides.append(pts)
    return sides[0], sides[1]


FAMILIES = {"uniform": uniform_pair, "clustered": clustered_pair}


def parse_args(argv):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", choices=sorted(FAMILIES), default="clustered")
    ap.add_argument("--sizes", default="200,400,600,800,1000",
                    help="comma-separated pair counts")
    ap.add_argument("--solvers", default="reduced,full,auction",
                    help="comma-separated subset of the solver names")
    ap.add_argument("--accuracy", type=float, default=1e-4,
                    help="auction cost slack")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeats", type=int, default=1,
                    help="keep the best wall of this many runs")
    return ap.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    sizes = [int(tok) for tok in args.sizes.split(",") if tok.strip()]
    solvers = [tok.strip() for tok in args.solvers.split(",") if tok.strip()]
    gen = FAMILIES[args.family]

    # first calls pay one-off kernel loading; keep them off the table
    warm1, warm2 = gen(np.random.default_rng(1), 16)
    for solver in solvers:
        solve(warm1, warm2, PARAMS, solver=solver, accuracy=args.accuracy)

    header = f"{'n':>6} " + " ".join(f"{s:>14}" for s in solvers)
    print(f"family={args.family}  (walls in ms, best of {args.repeats})")
    print(header)
    exact = {}
    for n in sizes:
        pts1, pts2 = gen(np.random.default_rng(args.seed + n), n)
        cells = []
        for solver in solvers:
            best = np.inf
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                res = solve(
                    pts1, pts2, PARAMS, solver=solver, accuracy=args.accuracy
                )
                best = min(best, time.perf_counter() - t0)
            if solver in ("reduced", "full"):
                key = (n, "exact")
                if key in exact and abs(exact[key] - res.total_cost) > 1e-9:
                    print(f"cost mismatch at n={n}: {solver} disagrees")
                    return 1
                exact[key] = res.total_cost
            cells.append(f"{best * 1e3:>14.2f}")
        print(f"{n:>6} " + " ".join(cells))
    return 0


if __name__ == "__main__":
    sys.exit(main())
