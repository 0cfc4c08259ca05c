"""File emitters (PGM heatmaps, JSON), validation suites, and comparisons.

Images are binary PGM (P5, maxval 255) with a JSON sidecar recording the
value range and scaling so pixel values stay invertible; JSON payloads carry
the tool version and the effective configuration, with floats rendered at 9
significant digits so outputs are stable golden files.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from .asymptotics import (
    default_fit_thresholds,
    default_small_a_samples,
    fit_small_a_slope,
    staircase,
)
from .errors import ParameterError
from .landscape import GridSpec, ScanGrid, default_grid_spec, operating_region, scan
from .qoe import (
    SlaPoint,
    ShareVector,
    _imbalance_arrays,
    decompose,
    find_decomposability_violation,
    find_scale_dependence_violation,
    imbalance_of_shares,
    shares_from_scores,
)
from .sensitivity import diagnose, gradient, gradient_fd
from .topology import CostHistogram, Topology, hop_histogram, largest_component, moments

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# JSON rendering
# ---------------------------------------------------------------------------

def round9(value):
    """Recursively round floats to 9 significant digits; NaN becomes null."""
    if isinstance(value, dict):
        return {k: round9(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round9(v) for v in value]
    if isinstance(value, np.ndarray):
        return [round9(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return None
        return float(f"{v:.9g}")
    return value


def render_json(payload: dict, config: dict | None = None) -> str:
    """Serialize a payload with the reproducibility header."""
    doc = {"tool_version": __version__}
    if config is not None:
        doc["config"] = config
    doc.update(payload)
    return json.dumps(round9(doc), indent=2) + "\n"


# ---------------------------------------------------------------------------
# PGM heatmaps
# ---------------------------------------------------------------------------

def write_pgm_heatmap(layer: np.ndarray, path, scaling: str = "minmax", window: dict | None = None) -> dict:
    """Write a layer as a binary PGM image plus a JSON sidecar.

    The layer is indexed [a, h0] as in ScanGrid; image rows run h0-descending,
    columns a-ascending.  minmax maps [min, max] onto [0, 255]; absmax maps
    [-A, A] with A = max|value|, putting zero at midgray.  A constant layer
    becomes all-midgray with a flag in the sidecar.
    """
    if scaling not in ("minmax", "absmax"):
        raise ParameterError(f"scaling must be 'minmax' or 'absmax', got {scaling!r}")
    arr = np.asarray(layer, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ParameterError("layer must be a non-empty 2-D grid")
    vmin = float(arr.min())
    vmax = float(arr.max())
    if scaling == "minmax":
        lo, hi = vmin, vmax
    else:
        amp = max(abs(vmin), abs(vmax))
        lo, hi = -amp, amp
    constant = not (hi > lo)
    img = arr.T[::-1, :]
    if constant:
        pixels = np.full(img.shape, 127, dtype=np.uint8)
    else:
        norm = (img - lo) / (hi - lo)
        pixels = np.clip(np.floor(norm * 255.0), 0, 255).astype(np.uint8)
    height, width = pixels.shape
    path = Path(path)
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
    sidecar = {
        "min": vmin,
        "max": vmax,
        "scaling": scaling,
        "constant": constant,
        "rows": "h0 descending",
        "cols": "a ascending",
    }
    if window is not None:
        sidecar["window"] = window
    with open(str(path) + ".json", "w") as f:
        f.write(json.dumps(round9(sidecar), indent=2) + "\n")
    return sidecar


# ---------------------------------------------------------------------------
# Multi-topology comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    name: str
    nodes: int
    var_h: float
    aor_percent: float
    mcr: float
    mcr_defined: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "nodes": self.nodes,
            "var_h": self.var_h,
            "aor_percent": self.aor_percent,
            "mcr": self.mcr if self.mcr_defined else None,
        }


def ensure_connected(g: Topology) -> Topology:
    """Apply the CLI policy for disconnected inputs: keep the largest
    component and say so."""
    lcc = largest_component(g)
    if lcc is not g:
        log.warning("input disconnected; using largest component (N=%d)", lcc.node_count)
    return lcc


def compare(
    topologies: list[tuple[str, Topology]],
    i_max: float,
    s_min: float,
    spec: GridSpec | None = None,
) -> tuple[list[ComparisonRow], GridSpec]:
    """Var(h), AoR, and MCR per topology under one shared window/constraints."""
    if len(topologies) < 2:
        raise ParameterError("compare needs at least 2 topologies")
    prepared = []
    for name, g in topologies:
        try:
            connected = ensure_connected(g)
            prepared.append((name, connected, hop_histogram(connected)))
        except Exception as exc:
            raise ParameterError(f"topology {name!r}: {exc}") from exc
    if spec is None:
        widest = max(float(h.costs[-1]) for _, _, h in prepared)
        spec = default_grid_spec(
            CostHistogram(costs=np.array([widest]), counts=np.array([2]))
        )
    rows = []
    for name, g, h in prepared:
        region = operating_region(scan(h, spec), i_max, s_min)
        rows.append(
            ComparisonRow(
                name=name,
                nodes=g.node_count,
                var_h=moments(h).variance,
                aor_percent=region.aor_percent,
                mcr=region.mcr,
                mcr_defined=region.mcr_defined,
            )
        )
    return rows, spec


def format_comparison_table(rows: list[ComparisonRow]) -> str:
    headers = ("name", "N", "var_h", "AoR%", "MCR")
    body = [
        (
            r.name,
            str(r.nodes),
            f"{r.var_h:.9g}",
            f"{r.aor_percent:.9g}",
            f"{r.mcr:.9g}" if r.mcr_defined else "undefined",
        )
        for r in rows
    ]
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    for b in body:
        lines.append("  ".join(b[i].ljust(widths[i]) for i in range(len(headers))))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Validation suites
# ---------------------------------------------------------------------------

def _check(name: str, value, threshold: str, passed: bool) -> dict:
    return {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}


def validate_small_a(
    h: CostHistogram,
    h0_pair: tuple[float, float] | None = None,
    a_samples=None,
    ratio_band: tuple[float, float] = (0.98, 1.02),
    agreement_tol: float = 0.02,
) -> dict:
    """Quadratic-law checks: fit/theory ratio inside the band at two
    thresholds, and threshold-independence of the fitted slope."""
    if a_samples is None:
        a_samples = default_small_a_samples()
    if h0_pair is None:
        h0_pair = default_fit_thresholds(h)
    reports = [fit_small_a_slope(h, h0, a_samples) for h0 in h0_pair]
    checks = []
    if reports[0].k_theory == 0:
        for rep in reports:
            checks.append(
                _check(
                    f"zero-variance fit is zero (h0={rep.h0_used:g})",
                    rep.k_fit,
                    "== 0",
                    rep.k_fit == 0.0,
                )
            )
    else:
        for rep in reports:
            checks.append(
                _check(
                    f"ratio k_fit/k_theory (h0={rep.h0_used:g})",
                    rep.ratio,
                    f"in [{ratio_band[0]}, {ratio_band[1]}]",
                    ratio_band[0] <= rep.ratio <= ratio_band[1],
                )
            )
        spread = abs(reports[0].k_fit - reports[1].k_fit) / max(
            abs(reports[0].k_fit), abs(reports[1].k_fit)
        )
        checks.append(
            _check(
                "h0-independence of k_fit",
                spread,
                f"<= {agreement_tol}",
                spread <= agreement_tol,
            )
        )
    return {
        "mode": "small-a",
        "reports": [r.to_dict() for r in reports],
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }


def _plateau_midpoints(h: CostHistogram) -> np.ndarray:
    """Representative h0 per plateau: interior midpoints plus mirrored points
    half a gap below the cheapest cost and above the dearest."""
    costs = h.costs
    if costs.size == 1:
        gap = 1.0
        mids = []
    else:
        gap = float(costs[1] - costs[0])
        mids = ((costs[:-1] + costs[1:]) / 2).tolist()
    last_gap = float(costs[-1] - costs[-2]) if costs.size > 1 else 1.0
    below = max(float(costs[0]) - 0.5 * gap, 0.5 * float(costs[0]))
    return np.array([below] + mids + [float(costs[-1]) + 0.5 * last_gap])


def validate_large_a(
    h: CostHistogram, a_lo: float = 10.0, a_hi: float = 20.0, dev_tol: float = 0.02
) -> dict:
    """Staircase checks at plateau midpoints: deviation below dev_tol at a_lo,
    and shrinking (exponential-convergence ordering) from a_lo to a_hi."""
    profile = staircase(h)
    mids = _plateau_midpoints(h)
    limits = np.array([profile.limit_at(x) for x in mids])
    dev_lo = np.abs(_imbalance_arrays(h.costs, h.counts, np.full_like(mids, a_lo), mids)[0] - limits)
    dev_hi = np.abs(_imbalance_arrays(h.costs, h.counts, np.full_like(mids, a_hi), mids)[0] - limits)
    shrinks = bool(np.all((dev_hi < dev_lo) | (dev_lo <= 1e-15)))
    checks = [
        _check(
            f"max plateau-midpoint deviation at a={a_lo:g}",
            float(dev_lo.max()),
            f"< {dev_tol}",
            float(dev_lo.max()) < dev_tol,
        ),
        _check(
            f"deviation shrinks from a={a_lo:g} to a={a_hi:g} at every midpoint",
            float((dev_hi - dev_lo).max()),
            "< 0",
            shrinks,
        ),
    ]
    return {
        "mode": "large-a",
        "midpoints": mids.tolist(),
        "deviation_lo": dev_lo.tolist(),
        "deviation_hi": dev_hi.tolist(),
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }


def validate_gradient(
    h: CostHistogram,
    n_samples: int = 50,
    seed: int = 0,
    rel_tol: float = 1e-5,
    abs_floor: float = 1e-10,
    sum_tol: float = 1e-10,
    fd_step: float = 1e-5,
) -> dict:
    """Analytic gradient vs central differences at random SLA points, plus the
    diagnostic sum identity.  Errors are normalized by abs_floor + rel_tol *
    magnitude, so a reported value <= 1 passes."""
    rng = np.random.Generator(np.random.Philox(seed))
    worst_grad = 0.0
    worst_sum = 0.0
    for _ in range(n_samples):
        sla = SlaPoint(
            a=float(rng.uniform(0.2, 8.0)),
            h0=float(rng.uniform(0.5, float(h.costs[-1]))),
        )
        analytic = gradient(h, sla)
        fd = gradient_fd(h, sla, step=fd_step)
        for got, ref in (
            (analytic.dI_da, fd.dI_da),
            (analytic.dI_dh0, fd.dI_dh0),
            (analytic.ds_da, fd.ds_da),
            (analytic.ds_dh0, fd.ds_dh0),
        ):
            scale = abs_floor + rel_tol * max(abs(got), abs(ref))
            worst_grad = max(worst_grad, abs(got - ref) / scale)
        for param, component in (("a", analytic.dI_da), ("h0", analytic.dI_dh0)):
            total = sum(r.contribution for r in diagnose(h, sla, param))
            worst_sum = max(worst_sum, abs(total - component) / sum_tol)
    checks = [
        _check(
            f"gradient vs FD error over {n_samples} samples "
            f"(normalized by {abs_floor:g} + {rel_tol:g}*magnitude)",
            worst_grad,
            "<= 1",
            worst_grad <= 1.0,
        ),
        _check(
            f"diagnostic contributions sum to the gradient (normalized by {sum_tol:g})",
            worst_sum,
            "<= 1",
            worst_sum <= 1.0,
        ),
    ]
    return {
        "mode": "gradient",
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }


def validate_axioms(seed: int = 0, n_vectors: int = 1000) -> dict:
    """Randomized axiom suite for the imbalance plus counterexample searches
    showing where the reference indices fail."""
    rng = np.random.Generator(np.random.Philox(seed))
    worst = {"anonymity": 0.0, "scale": 0.0, "transfer": 0.0, "decomposition": 0.0}
    calibration_ok = True
    for _ in range(n_vectors):
        n = int(rng.integers(2, 13))
        shares = rng.dirichlet(np.ones(n))
        base = imbalance_of_shares(shares)
        # A1: anonymity
        worst["anonymity"] = max(
            worst["anonymity"], abs(imbalance_of_shares(shares[rng.permutation(n)]) - base)
        )
        # A2: scale invariance of the normalize-then-score pipeline
        for lam in (1e-6, 1.0, 1e6):
            scaled = imbalance_of_shares(shares_from_scores(lam * shares))
            worst["scale"] = max(worst["scale"], abs(scaled - base))
        # A3: calibration at the extremes
        uniform = np.full(n, 1.0 / n)
        onehot = np.zeros(n)
        onehot[int(rng.integers(n))] = 1.0
        calibration_ok &= imbalance_of_shares(uniform) == 0.0
        calibration_ok &= imbalance_of_shares(onehot) == 1.0
        # A4: rank-preserving transfer from a larger to a smaller share
        i, j = int(np.argmax(shares)), int(np.argmin(shares))
        if shares[i] > shares[j]:
            delta = float(rng.uniform(0, (shares[i] - shares[j]) / 2))
            transferred = shares.copy()
            transferred[i] -= delta
            transferred[j] += delta
            worst["transfer"] = max(
                worst["transfer"], imbalance_of_shares(transferred) - base
            )
        # A5: entropy-gap chain rule
        if n >= 4:
            perm = rng.permutation(n)
            cut = int(rng.integers(1, n))
            grouping = [perm[:cut].tolist(), perm[cut:].tolist()]
            try:
                dec = decompose(ShareVector(values=tuple(shares)), grouping)
            except Exception:
                continue
            total_gap = math.log2(n) * base
            worst["decomposition"] = max(
                worst["decomposition"], abs(dec.reconstruction - total_gap)
            )
    counterexamples = {
        "gini_a5": find_decomposability_violation("gini", seed=seed),
        "jfi_a5": find_decomposability_violation("jfi", seed=seed),
        "cv_a5": find_decomposability_violation("cv", seed=seed),
        "variance_a2": find_scale_dependence_violation("variance", seed=seed),
    }
    checks = [
        _check("A1 anonymity deviation", worst["anonymity"], "<= 1e-12", worst["anonymity"] <= 1e-12),
        _check("A2 scale-invariance deviation", worst["scale"], "<= 1e-12", worst["scale"] <= 1e-12),
        _check("A3 calibration exact at extremes", calibration_ok, "== True", calibration_ok),
        _check("A4 transfer never increases I", worst["transfer"], "<= 1e-12", worst["transfer"] <= 1e-12),
        _check("A5 gap reconstruction deviation", worst["decomposition"], "<= 1e-9", worst["decomposition"] <= 1e-9),
    ]
    for cell, record in counterexamples.items():
        checks.append(
            _check(
                f"counterexample found: {cell}",
                record["residual"] if record else None,
                "|residual| > 1e-6",
                record is not None,
            )
        )
    return {
        "mode": "axioms",
        "n_vectors": n_vectors,
        "checks": checks,
        "counterexamples": counterexamples,
        "passed": all(c["passed"] for c in checks),
    }


VALIDATE_MODES = ("small-a", "large-a", "gradient", "axioms")


def validate(h: CostHistogram, mode: str, seed: int = 0, **kwargs) -> dict:
    """Dispatch one validation mode against a topology's cost histogram."""
    if mode == "small-a":
        return validate_small_a(h, **kwargs)
    if mode == "large-a":
        return validate_large_a(h, **kwargs)
    if mode == "gradient":
        return validate_gradient(h, seed=seed, **kwargs)
    if mode == "axioms":
        return validate_axioms(seed=seed, **kwargs)
    raise ParameterError(f"unknown validation mode {mode!r}; choose from {VALIDATE_MODES}")
