"""Dense (a, h0) scans, ridge/belt detection, and operating-region metrics.

A scan evaluates the imbalance, the mean satisfaction, their analytic
gradients, and finite-difference curvatures at every grid cell, all as one
vectorized pass over the cost classes; cells are mathematically independent,
so the output is identical however the work is scheduled.

The operating region is the set of cells meeting both service objectives
(I <= i_max and s_bar >= s_min).  Its area share of the scan window (AoR, in
percent, by uniform cell counting) measures robustness; the maximum threshold
curvature |d2I/dh0^2| along the region's boundary (MCR) measures how sharp
the performance cliff at the edge of acceptability is.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .qoe import _imbalance_arrays
from .sensitivity import _gradient_arrays
from .topology import CostHistogram

LAYER_NAMES = (
    "I",
    "s_bar",
    "dI_da",
    "dI_dh0",
    "ds_da",
    "ds_dh0",
    "d2I_aa",
    "d2I_h0h0",
    "d2I_ah0",
)
CSV_HEADER = "a,h0," + ",".join(LAYER_NAMES)


@dataclass(frozen=True)
class AxisSpec:
    """One scan axis: steps values from lo to hi, linearly or log-spaced."""

    lo: float
    hi: float
    steps: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.spacing not in ("linear", "log"):
            raise ParameterError(f"spacing must be 'linear' or 'log', got {self.spacing!r}")
        if not (self.lo < self.hi):
            raise ParameterError("axis needs lo < hi")
        if self.steps < 2:
            raise ParameterError("axis needs at least 2 steps")
        if self.spacing == "log" and self.lo <= 0:
            raise ParameterError("log axis needs lo > 0")

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.lo, self.hi, self.steps)
        return np.linspace(self.lo, self.hi, self.steps)


@dataclass(frozen=True)
class GridSpec:
    """The scan window: a strictness axis and a linear threshold axis."""

    a_axis: AxisSpec
    h0_axis: AxisSpec

    def __post_init__(self):
        if self.a_axis.lo <= 0:
            raise ParameterError("strictness axis needs lo > 0")
        if self.h0_axis.lo <= 0:
            raise ParameterError("threshold axis needs lo > 0")
        if self.h0_axis.spacing != "linear":
            raise ParameterError("threshold axis must be linear")

    def window(self) -> dict:
        return {
            "a_min": self.a_axis.lo,
            "a_max": self.a_axis.hi,
            "a_steps": self.a_axis.steps,
            "a_spacing": self.a_axis.spacing,
            "h0_min": self.h0_axis.lo,
            "h0_max": self.h0_axis.hi,
            "h0_steps": self.h0_axis.steps,
        }


def default_grid_spec(h: CostHistogram) -> GridSpec:
    """64 log-spaced a in [0.05, 20] by 256 linear h0 in [0.5, max cost + 0.5]."""
    return GridSpec(
        a_axis=AxisSpec(lo=0.05, hi=20.0, steps=64, spacing="log"),
        h0_axis=AxisSpec(lo=0.5, hi=float(h.costs[-1]) + 0.5, steps=256),
    )


@dataclass(frozen=True, eq=False)
class ScanGrid:
    """Dense layers over the scan window, indexed [a_index, h0_index]."""

    spec: GridSpec
    a_values: np.ndarray
    h0_values: np.ndarray
    layers: dict[str, np.ndarray]

    def layer(self, name: str) -> np.ndarray:
        if name not in self.layers:
            raise ParameterError(f"unknown layer {name!r}; have {sorted(self.layers)}")
        return self.layers[name]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.a_values.size, self.h0_values.size)


def scan(h: CostHistogram, spec: GridSpec | None = None) -> ScanGrid:
    """Evaluate every layer at every grid cell.

    Curvature layers are central differences of the analytic gradient with
    per-cell steps max(1e-4, 1e-4*theta), capped at theta/2 so the stencil
    stays in the domain; d2I_ah0 differentiates dI_da along h0.
    """
    if spec is None:
        spec = default_grid_spec(h)
    a_values = spec.a_axis.values()
    h0_values = spec.h0_axis.values()
    mesh_a, mesh_h0 = np.meshgrid(a_values, h0_values, indexing="ij")
    a_flat = mesh_a.ravel()
    h0_flat = mesh_h0.ravel()
    shape = mesh_a.shape

    imbalance, s_bar = _imbalance_arrays(h.costs, h.counts, a_flat, h0_flat)
    dI_da, dI_dh0, ds_da, ds_dh0 = _gradient_arrays(h.costs, h.counts, a_flat, h0_flat)

    step_a = np.minimum(np.maximum(1e-4, 1e-4 * a_flat), a_flat / 2)
    step_h = np.minimum(np.maximum(1e-4, 1e-4 * h0_flat), h0_flat / 2)
    ap_da, _, _, _ = _gradient_arrays(h.costs, h.counts, a_flat + step_a, h0_flat)
    am_da, _, _, _ = _gradient_arrays(h.costs, h.counts, a_flat - step_a, h0_flat)
    hp_da, hp_dh, _, _ = _gradient_arrays(h.costs, h.counts, a_flat, h0_flat + step_h)
    hm_da, hm_dh, _, _ = _gradient_arrays(h.costs, h.counts, a_flat, h0_flat - step_h)
    d2_aa = (ap_da - am_da) / (2 * step_a)
    d2_h0h0 = (hp_dh - hm_dh) / (2 * step_h)
    d2_ah0 = (hp_da - hm_da) / (2 * step_h)

    layers = {
        "I": imbalance,
        "s_bar": s_bar,
        "dI_da": dI_da,
        "dI_dh0": dI_dh0,
        "ds_da": ds_da,
        "ds_dh0": ds_dh0,
        "d2I_aa": d2_aa,
        "d2I_h0h0": d2_h0h0,
        "d2I_ah0": d2_ah0,
    }
    return ScanGrid(
        spec=spec,
        a_values=a_values,
        h0_values=h0_values,
        layers={k: v.reshape(shape) for k, v in layers.items()},
    )


def detect_ridges(grid: ScanGrid, percentile: float = 90.0) -> tuple[np.ndarray, np.ndarray]:
    """High-curvature ridge cells and low-curvature stable-belt cells.

    Ridge: |d2I/dh0^2| above the given percentile of its grid distribution;
    belt: at or below the complementary percentile.  A flat landscape has no
    ridge and is all belt.
    """
    if not (50 <= percentile < 100):
        raise ParameterError(f"percentile must be in [50, 100), got {percentile}")
    curvature = np.abs(grid.layer("d2I_h0h0"))
    ridge = curvature > np.percentile(curvature, percentile)
    belt = curvature <= np.percentile(curvature, 100.0 - percentile)
    return ridge, belt


@dataclass(frozen=True, eq=False)
class OperatingRegion:
    """Cells meeting I <= i_max and s_bar >= s_min, with AoR and MCR."""

    mask: np.ndarray
    i_max: float
    s_min: float
    aor_percent: float
    boundary_cells: tuple[tuple[int, int], ...]
    mcr: float
    mcr_defined: bool

    def to_dict(self, spec: GridSpec | None = None) -> dict:
        out = {
            "i_max": self.i_max,
            "s_min": self.s_min,
            "aor_percent": self.aor_percent,
            "mcr": self.mcr if self.mcr_defined else None,
            "boundary_cell_count": len(self.boundary_cells),
        }
        if spec is not None:
            out["window"] = spec.window()
        return out


def operating_region(grid: ScanGrid, i_max: float, s_min: float) -> OperatingRegion:
    """Extract the feasible region and its AoR / MCR.

    The boundary is every masked cell with an unmasked 4-neighbor, plus masked
    cells on the window border (a cliff just outside the window still counts).
    MCR is the maximum |d2I/dh0^2| over boundary cells; an empty region has
    AoR 0 and an undefined MCR.
    """
    if not (0 <= i_max <= 1):
        raise ParameterError(f"i_max must be in [0, 1], got {i_max}")
    if not (0 <= s_min <= 1):
        raise ParameterError(f"s_min must be in [0, 1], got {s_min}")
    mask = (grid.layer("I") <= i_max) & (grid.layer("s_bar") >= s_min)
    aor = 100.0 * float(mask.mean())
    if not mask.any():
        return OperatingRegion(
            mask=mask,
            i_max=i_max,
            s_min=s_min,
            aor_percent=0.0,
            boundary_cells=(),
            mcr=math.nan,
            mcr_defined=False,
        )
    exposed = np.zeros_like(mask)
    exposed[0, :] = exposed[-1, :] = True
    exposed[:, 0] = exposed[:, -1] = True
    exposed[1:, :] |= ~mask[:-1, :]
    exposed[:-1, :] |= ~mask[1:, :]
    exposed[:, 1:] |= ~mask[:, :-1]
    exposed[:, :-1] |= ~mask[:, 1:]
    boundary = mask & exposed
    cells = tuple((int(i), int(j)) for i, j in zip(*np.nonzero(boundary)))
    curvature = np.abs(grid.layer("d2I_h0h0"))
    mcr = float(max(curvature[i, j] for i, j in cells))
    return OperatingRegion(
        mask=mask,
        i_max=i_max,
        s_min=s_min,
        aor_percent=aor,
        boundary_cells=cells,
        mcr=mcr,
        mcr_defined=True,
    )


def curvature_asymmetry(grid: ScanGrid, floor: float = 1e-12) -> np.ndarray:
    """Per-cell |d2I/dh0^2| / max(|d2I/da^2|, floor)."""
    if not (floor > 0):
        raise ParameterError("floor must be > 0")
    return np.abs(grid.layer("d2I_h0h0")) / np.maximum(np.abs(grid.layer("d2I_aa")), floor)


def write_grid_csv(grid: ScanGrid, stream) -> None:
    """Emit the grid as CSV: header row, then h0-major rows at %.9g, LF ends."""
    stream.write(CSV_HEADER + "\n")
    mats = [grid.layers[name] for name in LAYER_NAMES]
    for i, a in enumerate(grid.a_values):
        for j, h0 in enumerate(grid.h0_values):
            cells = [f"{a:.9g}", f"{h0:.9g}"] + [f"{m[i, j]:.9g}" for m in mats]
            stream.write(",".join(cells) + "\n")


def _detect_spacing(values: np.ndarray) -> str:
    if values.size < 3:
        return "linear"
    d = np.diff(values)
    if np.allclose(d, d[0], rtol=1e-6, atol=0):
        return "linear"
    r = values[1:] / values[:-1]
    if np.allclose(r, r[0], rtol=1e-6, atol=0):
        return "log"
    raise ParameterError("axis values are neither linearly nor log spaced")


def read_grid_csv(stream) -> ScanGrid:
    """Rebuild a ScanGrid from its CSV form (inverse of write_grid_csv)."""
    header = stream.readline().strip()
    if header != CSV_HEADER:
        raise ParameterError(f"unexpected CSV header {header!r}")
    data = np.loadtxt(stream, delimiter=",", ndmin=2)
    if data.shape[1] != 2 + len(LAYER_NAMES):
        raise ParameterError("unexpected CSV column count")
    a_col = data[:, 0]
    h0_col = data[:, 1]
    n_h0 = 1
    while n_h0 < a_col.size and a_col[n_h0] == a_col[0]:
        n_h0 += 1
    if a_col.size % n_h0 != 0:
        raise ParameterError("CSV rows do not form a full grid")
    n_a = a_col.size // n_h0
    a_values = a_col[::n_h0].copy()
    h0_values = h0_col[:n_h0].copy()
    spec = GridSpec(
        a_axis=AxisSpec(
            lo=float(a_values[0]),
            hi=float(a_values[-1]),
            steps=n_a,
            spacing=_detect_spacing(a_values),
        ),
        h0_axis=AxisSpec(lo=float(h0_values[0]), hi=float(h0_values[-1]), steps=n_h0),
    )
    layers = {
        name: data[:, 2 + k].reshape(n_a, n_h0) for k, name in enumerate(LAYER_NAMES)
    }
    return ScanGrid(spec=spec, a_values=a_values, h0_values=h0_values, layers=layers)
