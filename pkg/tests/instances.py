"""Shared random-instance generators for the assignment solvers.

Two flavors: bare cost arrays with no structure, and diagram pairs that
imitate consecutive timesteps of a tracked field (a core of persistent
features both sides share, drowned in short-lived noise near the
diagonal). The second flavor is what the sparse solver is built for.
"""

import numpy as np

from topotrack.metric import MatchPoint


def random_costs(rng, n, m, scale=1.0, diag_scale=None):
    """Dense instance: uniform interior costs and diagonal exits."""
    if diag_scale is None:
        diag_scale = scale
    return (
        rng.uniform(0.0, scale, (n, m)),
        rng.uniform(0.0, diag_scale, n),
        rng.uniform(0.0, diag_scale, m),
    )


def _point(birth, death, pos, pair_class="saddle_max"):
    lo, hi = (birth, death) if birth <= death else (death, birth)
    pos = (float(pos[0]), float(pos[1]), float(pos[2]))
    return MatchPoint(
        birth=float(lo), death=float(hi), extremum=pos, other=pos,
        pair_class=pair_class,
    )


def _noise_points(rng, k):
    pts = []
    for _ in range(k):
        b = rng.uniform(0.0, 0.6)
        d = b + rng.uniform(0.001, 0.02)
        pos = rng.uniform(0.0, 1.0, 3)
        pos[2] = 0.0
        pts.append(_point(b, d, pos))
    return pts


def _real_features(rng, k):
    feats = []
    for _ in range(k):
        d = rng.uniform(0.25, 0.9)
        b = d - rng.uniform(0.15, 0.6) * d
        pos = rng.uniform(0.05, 0.95, 3)
        pos[2] = 0.0
        feats.append((b, d, pos))
    return feats


def _jittered(rng, feats):
    pts = []
    for b, d, pos in feats:
        b2 = b + rng.normal(0.0, 0.004)
        d2 = d + rng.normal(0.0, 0.004)
        pos2 = pos + rng.normal(0.0, 0.01, 3)
        pos2[2] = 0.0
        pts.append(_point(b2, d2, pos2))
    return pts


def diagram_pair(rng, n):
    """Two n-point diagrams resembling consecutive timesteps.

    A quarter of each side is persistent features shared by both (the
    second copy slightly perturbed in value and position); the remaining
    three quarters are fresh short-lived noise hugging the diagonal.
    """
    n_real = n // 4
    real = _real_features(rng, n_real)

    first = [_point(b, d, pos) for b, d, pos in real]
    first.extend(_noise_points(rng, n - n_real))

    second = _jittered(rng, real)
    second.extend(_noise_points(rng, n - n_real))
    return first, second


def clustered_pair(rng, n, n_clusters=8, cluster_size=12):
    """Diagram pair whose noise is spatially clustered, like real fields.

    Sampling noise in a scalar field concentrates where the field is
    rough: each turbulent region sheds a cloud of short-lived pairs that
    sit close together in birth, death, and position, so any member of a
    cloud can stand in for any other at nearly the same cost. Both sides
    draw fresh points from the same clouds. The resulting assignment
    problem is genuinely contended, which is where a dense solver pays
    for the full matrix; uniformly spread noise (``diagram_pair``) is
    the easy case where a greedy star initialization already resolves
    almost everything.

    A quarter of each side is shared persistent features, the clouds are
    capped at ``n_clusters * cluster_size`` points, and any remaining
    budget is uniform near-diagonal noise.
    """
    n_real = n // 4
    n_hard = min(n_clusters * cluster_size, (n - n_real) * 2 // 3)
    n_easy = n - n_real - n_hard

    centers = rng.uniform(0.1, 0.9, (n_clusters, 3))
    centers[:, 2] = 0.0
    base_birth = rng.uniform(0.05, 0.5, n_clusters)
    real = _real_features(rng, n_real)

    sides = []
    for copy in range(2):
        pts = [_point(b, d, pos) for b, d, pos in real] if copy == 0 else (
            _jittered(rng, real)
        )
        # the second side's clouds are tighter, so every first-side
        # member of a cloud competes for the same few partners
        s_birth, s_pos = (0.003, 0.012) if copy == 0 else (0.001, 0.004)
        for k in range(n_hard):
            c = k % n_clusters
            b = base_birth[c] + rng.normal(0.0, s_birth)
            d = b + rng.uniform(0.001, 0.012)
            pos = centers[c] + rng.normal(0.0, s_pos, 3)
            pos[2] = 0.0
            pts.append(_point(b, d, pos))
        pts.extend(_noise_points(rng, n_easy))
        sides.append(pts)
    return sides[0], sides[1]
