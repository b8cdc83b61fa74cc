"""Topological feature tracking for time-varying scalar fields.

Pipeline: persistence diagrams per timestep (grid, persistence), a lifted
distance between diagram points (metric), exact or approximate optimal
matching between consecutive diagrams (assignment), and trajectory assembly
with merge/split events (tracking). The cli module exposes the same pipeline
as a command line tool.
"""

from .assignment import (
    SOLVERS,
    AssignmentResult,
    AuctionNonConvergence,
    ReducedState,
    brute_force,
    solve,
    solve_auction,
    solve_costs,
    solve_full_munkres,
    solve_reduced,
)
from .grid import (
    NormalizationInfo,
    ScalarField,
    TimeSeries,
    add_noise,
    downsample_time,
    gen_gaussian_mixture,
    gen_translating_gaussians,
    gen_whirling_gaussians,
    load_field,
    load_series,
    normalize,
    save_field,
    save_series,
)
from .metric import (
    MatchPoint,
    MetricParams,
    diagonal_cost,
    lifted_distance,
    match_points,
    pointwise_distance,
    powered_cost_arrays,
    prune_predicate,
    wasserstein_distance,
)
from .persistence import (
    PAIR_CLASSES,
    CriticalPoint,
    PersistenceDiagram,
    PersistencePair,
    compute_diagram,
    compute_segmentation,
    load_diagram,
    save_diagram,
    threshold_diagram,
)
from .tracking import (
    MatchingSeries,
    TrackingEvent,
    TrackingResult,
    Trajectory,
    TrajectoryPoint,
    detect_merge_split,
    extract_trajectories,
    load_tracking,
    match_series,
    overlap_tracking,
    save_tracking,
    save_vtk,
    trajectories_to_vtk,
)

__version__ = "0.1.0"
