"""Regular-grid scalar fields and time series.

Fields live on axis-aligned regular grids. Values are stored flat in
x-fastest order (index = x + nx*(y + ny*z)), which is also the vertex id
used everywhere else in the package.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "ScalarField",
    "TimeSeries",
    "NormalizationInfo",
    "load_field",
    "save_field",
    "load_series",
    "save_series",
    "gen_gaussian_mixture",
    "gen_whirling_gaussians",
    "gen_translating_gaussians",
    "add_noise",
    "downsample_time",
    "normalize",
]

_STEP_RE = re.compile(r"^step_(\d+)\.json$")


@dataclass(frozen=True)
class ScalarField:
    """One timestep of a scalar field on a regular grid."""

    dims: tuple[int, int, int]
    origin: tuple[float, float, float]
    spacing: tuple[float, float, float]
    values: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValueError(f"dims must be three integers >= 1, got {self.dims}")
        origin = tuple(float(c) for c in self.origin)
        spacing = tuple(float(c) for c in self.spacing)
        if len(origin) != 3 or len(spacing) != 3:
            raise ValueError("origin and spacing must have three components")
        if any(s <= 0 for s in spacing):
            raise ValueError(f"spacing components must be > 0, got {self.spacing}")
        vals = np.asarray(self.values, dtype=np.float64).ravel()
        n = dims[0] * dims[1] * dims[2]
        if vals.size != n:
            raise ValueError(f"expected {n} values for dims {dims}, got {vals.size}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "time_index", int(self.time_index))

    @property
    def n_vertices(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def vertex_xyz(self, vid: int) -> tuple[int, int, int]:
        """Grid indices (ix, iy, iz) of a vertex id."""
        nx, ny, _ = self.dims
        return vid % nx, (vid // nx) % ny, vid // (nx * ny)

    def vertex_coords(self, vid: int) -> tuple[float, float, float]:
        """World coordinates of a vertex id."""
        ix, iy, iz = self.vertex_xyz(vid)
        ox, oy, oz = self.origin
        sx, sy, sz = self.spacing
        return ox + sx * ix, oy + sy * iy, oz + sz * iz

    def value_range(self) -> tuple[float, float]:
        return float(self.values.min()), float(self.values.max())


@dataclass(frozen=True)
class TimeSeries:
    """Fields ordered by strictly increasing time_index."""

    fields: tuple[ScalarField, ...]
    uniform: bool = field(init=False)

    def __post_init__(self):
        flds = tuple(self.fields)
        if not flds:
            raise ValueError("a series needs at least one field")
        times = [f.time_index for f in flds]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"time indices must strictly increase, got {times}")
        first = flds[0]
        uni = all(
            f.dims == first.dims
            and f.origin == first.origin
            and f.spacing == first.spacing
            for f in flds
        )
        object.__setattr__(self, "fields", flds)
        object.__setattr__(self, "uniform", uni)

    def __len__(self) -> int:
        return len(self.fields)

    def __iter__(self):
        return iter(self.fields)

    def __getitem__(self, i) -> ScalarField:
        return self.fields[i]


@dataclass(frozen=True)
class NormalizationInfo:
    """Affine maps applied by normalize(), kept for inverting outputs.

    Forward maps: coord' = (coord - coord_offset) * coord_scale and
    value' = (value - value_offset) * value_scale. A constant series has
    value_degenerate set; its values were all mapped to 0.
    """

    coord_offset: tuple[float, float, float]
    coord_scale: float
    value_offset: float
    value_scale: float
    value_degenerate: bool = False

    def invert_coords(self, xyz: Sequence[float]) -> tuple[float, float, float]:
        ox, oy, oz = self.coord_offset
        s = self.coord_scale
        return xyz[0] / s + ox, xyz[1] / s + oy, xyz[2] / s + oz

    def invert_value(self, v: float) -> float:
        if self.value_degenerate:
            return self.value_offset
        return v / self.value_scale + self.value_offset

    def to_dict(self) -> dict:
        return {
            "coord_offset": list(self.coord_offset),
            "coord_scale": self.coord_scale,
            "value_offset": self.value_offset,
            "value_scale": self.value_scale,
            "value_degenerate": self.value_degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationInfo":
        return cls(
            coord_offset=tuple(float(c) for c in d["coord_offset"]),
            coord_scale=float(d["coord_scale"]),
            value_offset=float(d["value_offset"]),
            value_scale=float(d["value_scale"]),
            value_degenerate=bool(d["value_degenerate"]),
        )


def _check_finite(values: np.ndarray, dims: tuple[int, int, int], path) -> None:
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        vid = int(bad[0])
        nx, ny, _ = dims
        ix, iy, iz = vid % nx, (vid // nx) % ny, vid // (nx * ny)
        raise ValueError(
            f"{path}: non-finite value at vertex {vid} (x={ix}, y={iy}, z={iz})"
        )


def save_field(fld: ScalarField, path, format: str = "json_field") -> None:
    """Write a field. json_field round-trips bit-exactly; csv_grid is 2D only."""
    path = Path(path)
    if format == "json_field":
        doc = {
            "dims": list(fld.dims),
            "origin": list(fld.origin),
            "spacing": list(fld.spacing),
            "time": fld.time_index,
            "values": fld.values.tolist(),
        }
        path.write_text(json.dumps(doc))
    elif format == "csv_grid":
        nx, ny, nz = fld.dims
        if nz != 1:
            raise ValueError("csv_grid only stores 2D fields (nz must be 1)")
        grid = fld.values.reshape(ny, nx)
        lines = [",".join(repr(v) for v in row) for row in grid.tolist()]
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown field format {format!r}")


def load_field(path, format: str = "json_field") -> ScalarField:
    path = Path(path)
    if format == "json_field":
        doc = json.loads(path.read_text())
        for key in ("dims", "origin", "spacing", "time", "values"):
            if key not in doc:
                raise ValueError(f"{path}: missing key {key!r}")
        dims = tuple(int(d) for d in doc["dims"])
        values = np.asarray(doc["values"], dtype=np.float64)
        n = dims[0] * dims[1] * dims[2]
        if values.size != n:
            raise ValueError(
                f"{path}: dims {dims} promise {n} values, file has {values.size}"
            )
        _check_finite(values, dims, path)
        return ScalarField(
            dims=dims,
            origin=tuple(doc["origin"]),
            spacing=tuple(doc["spacing"]),
            values=values,
            time_index=int(doc["time"]),
        )
    if format == "csv_grid":
        rows = [
            [float(tok) for tok in line.split(",")]
            for line in path.read_text().strip().splitlines()
        ]
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ValueError(f"{path}: ragged csv rows, widths {sorted(widths)}")
        arr = np.asarray(rows, dtype=np.float64)
        dims = (arr.shape[1], arr.shape[0], 1)
        _check_finite(arr.ravel(), dims, path)
        return ScalarField(
            dims=dims,
            origin=(0.0, 0.0, 0.0),
            spacing=(1.0, 1.0, 1.0),
            values=arr.ravel(),
            time_index=0,
        )
    raise ValueError(f"unknown field format {format!r}")


def save_series(series: TimeSeries, dirpath) -> None:
    """Write one step_<time_index>.json per field into a directory."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    for fld in series:
        save_field(fld, dirpath / f"step_{fld.time_index}.json")


def load_series(dirpath) -> TimeSeries:
    dirpath = Path(dirpath)
    entries = []
    for p in dirpath.iterdir():
        m = _STEP_RE.match(p.name)
        if m:
            entries.append((int(m.group(1)), p))
    if not entries:
        raise ValueError(f"{dirpath}: no step_<k>.json files")
    entries.sort()
    fields = []
    for k, p in entries:
        fld = load_field(p)
        if fld.time_index != k:
            raise ValueError(
                f"{p}: filename index {k} disagrees with time {fld.time_index}"
            )
        fields.append(fld)
    return TimeSeries(fields=tuple(fields))


def _world_grid(dims, origin, spacing):
    nx, ny, nz = dims
    xs = origin[0] + spacing[0] * np.arange(nx)
    ys = origin[1] + spacing[1] * np.arange(ny)
    zs = origin[2] + spacing[2] * np.arange(nz)
    # x-fastest layout: z is the outermost axis
    Z, Y, X = np.meshgrid(zs, ys, xs, indexing="ij")
    return X.ravel(), Y.ravel(), Z.ravel()


def gen_gaussian_mixture(
    dims: Sequence[int],
    centers: Sequence[Sequence[float]],
    sigmas: Sequence[float],
    amplitudes: Sequence[float],
    origin: Sequence[float] = (0.0, 0.0, 0.0),
    spacing: Sequence[float] | None = None,
    time_index: int = 0,
) -> ScalarField:
    """Sum of isotropic gaussian bumps sampled on a grid.

    With no centers the field is constant zero. The default spacing puts the
    longest axis on [0, 1].
    """
    dims = tuple(int(d) for d in dims)
    if len(centers) != len(sigmas) or len(centers) != len(amplitudes):
        raise ValueError("centers, sigmas and amplitudes must have equal length")
    if spacing is None:
        longest = max(d - 1 for d in dims)
        h = 1.0 / longest if longest > 0 else 1.0
        spacing = (h, h, h)
    X, Y, Z = _world_grid(dims, tuple(origin), tuple(spacing))
    vals = np.zeros(X.size, dtype=np.float64)
    for (cx, cy, cz), sig, amp in zip(centers, sigmas, amplitudes):
        if sig <= 0:
            raise ValueError(f"sigma must be > 0, got {sig}")
        r2 = (X - cx) ** 2 + (Y - cy) ** 2 + (Z - cz) ** 2
        vals += amp * np.exp(-r2 / (2.0 * sig * sig))
    return ScalarField(
        dims=dims,
        origin=tuple(float(c) for c in origin),
        spacing=tuple(float(c) for c in spacing),
        values=vals,
        time_index=time_index,
    )


def _amplitude_list(amplitude, n: int) -> list[float]:
    if np.isscalar(amplitude):
        return [float(amplitude)] * n
    amps = [float(a) for a in amplitude]
    if len(amps) != n:
        raise ValueError(f"need {n} amplitudes, got {len(amps)}")
    return amps


def gen_whirling_gaussians(
    n: int,
    timesteps: int,
    dims: Sequence[int] = (64, 64, 1),
    orbit_radius: float = 0.3,
    angular_speed: float = 2.0 * math.pi / 60.0,
    sigma: float = 0.07,
    amplitude=1.0,
) -> TimeSeries:
    """n gaussians orbiting the domain center, one field per timestep.

    Gaussian k starts at angle 2*pi*k/n and advances by angular_speed per
    step. amplitude may be a scalar or one value per gaussian.
    """
    dims = tuple(int(d) for d in dims)
    amps = _amplitude_list(amplitude, n)
    longest = max(d - 1 for d in dims)
    h = 1.0 / longest if longest > 0 else 1.0
    cx = h * (dims[0] - 1) / 2.0
    cy = h * (dims[1] - 1) / 2.0
    cz = h * (dims[2] - 1) / 2.0
    fields = []
    for t in range(timesteps):
        centers = []
        for k in range(n):
            theta = 2.0 * math.pi * k / n + angular_speed * t
            centers.append(
                (
                    cx + orbit_radius * math.cos(theta),
                    cy + orbit_radius * math.sin(theta),
                    cz,
                )
            )
        fields.append(
            gen_gaussian_mixture(
                dims, centers, [sigma] * n, amps, spacing=(h, h, h), time_index=t
            )
        )
    return TimeSeries(fields=tuple(fields))


def gen_translating_gaussians(
    timesteps: int,
    dims: Sequence[int] = (96, 64, 1),
    centers: Sequence[Sequence[float]] = ((0.15, 0.3, 0.0), (0.15, 0.7, 0.0)),
    velocities: Sequence[Sequence[float]] = ((0.05, 0.0, 0.0), (0.05, 0.0, 0.0)),
    sigmas: Sequence[float] = (0.03, 0.03),
    amplitudes: Sequence[float] = (1.0, 0.8),
    static_hill: tuple[Sequence[float], float, float] | None = (
        (0.5, 0.5, 0.0),
        0.35,
        1.2,
    ),
) -> TimeSeries:
    """Gaussians moving on straight lines, plus an optional broad static hill.

    The hill (center, sigma, amplitude) anchors the global maximum away from
    the moving features.
    """
    dims = tuple(int(d) for d in dims)
    k = len(centers)
    if len(velocities) != k or len(sigmas) != k or len(amplitudes) != k:
        raise ValueError("centers, velocities, sigmas, amplitudes must match")
    fields = []
    for t in range(timesteps):
        cs = [
            (c[0] + v[0] * t, c[1] + v[1] * t, c[2] + v[2] * t)
            for c, v in zip(centers, velocities)
        ]
        ss = list(sigmas)
        aa = list(amplitudes)
        if static_hill is not None:
            hc, hs, ha = static_hill
            cs.append(tuple(hc))
            ss.append(hs)
            aa.append(ha)
        fields.append(gen_gaussian_mixture(dims, cs, ss, aa, time_index=t))
    return TimeSeries(fields=tuple(fields))


def add_noise(fld: ScalarField, fraction: float, seed: int) -> ScalarField:
    """Perturb each vertex by an independent uniform sample.

    Samples are drawn from [-fraction/2, +fraction/2] scaled by the field's
    value range, so no value moves by more than fraction*range/2.
    """
    if fraction < 0:
        raise ValueError(f"noise fraction must be >= 0, got {fraction}")
    if fraction == 0:
        return fld
    lo, hi = fld.value_range()
    rng = np.random.default_rng(seed)
    span = hi - lo
    noise = rng.uniform(-0.5 * fraction, 0.5 * fraction, fld.values.size) * span
    return replace(fld, values=fld.values + noise)


def downsample_time(series: TimeSeries, stride: int) -> TimeSeries:
    """Keep every stride-th field, starting from the first."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    return TimeSeries(fields=series.fields[::stride])


def normalize(series: TimeSeries) -> tuple[TimeSeries, NormalizationInfo]:
    """Map the series into normalized units.

    Coordinates shift and scale uniformly so the longest bounding-box axis
    over all timesteps spans [0, 1] (aspect ratio preserved). Values map
    affinely so the global min/max over all timesteps span [0, 1]; a constant
    series maps to 0 everywhere and is flagged degenerate.
    """
    los = np.array([f.origin for f in series])
    his = np.array(
        [
            [
                f.origin[a] + f.spacing[a] * (f.dims[a] - 1)
                for a in range(3)
            ]
            for f in series
        ]
    )
    bbox_min = los.min(axis=0)
    extent = float((his.max(axis=0) - bbox_min).max())
    cscale = 1.0 / extent if extent > 0 else 1.0

    vmin = min(f.values.min() for f in series)
    vmax = max(f.values.max() for f in series)
    vspan = float(vmax - vmin)
    degenerate = vspan == 0.0
    vscale = 0.0 if degenerate else 1.0 / vspan

    fields = []
    for f in series:
        origin = tuple((np.asarray(f.origin) - bbox_min) * cscale)
        spacing = tuple(s * cscale for s in f.spacing)
        values = (
            np.zeros_like(f.values) if degenerate else (f.values - vmin) * vscale
        )
        fields.append(
            ScalarField(
                dims=f.dims,
                origin=origin,
                spacing=spacing,
                values=values,
                time_index=f.time_index,
            )
        )
    info = NormalizationInfo(
        coord_offset=tuple(float(c) for c in bbox_min),
        coord_scale=cscale,
        value_offset=float(vmin),
        value_scale=vscale,
        value_degenerate=degenerate,
    )
    return TimeSeries(fields=tuple(fields)), info
