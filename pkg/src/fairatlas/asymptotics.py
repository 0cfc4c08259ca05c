"""Asymptotic anchors of the imbalance landscape.

Tolerant limit: as the strictness a approaches 0 the imbalance follows a
quadratic law I ~ k * a^2 whose coefficient

    k = Var(h) / (8 * ln2 * log2(M))

depends on the topology only through the variance of the all-pairs cost
distribution and is independent of the threshold.  (A variant without the
ln2 factor circulates; the two-class closed form, whose slope against a^2 is
exactly 1/(32 ln2), pins the form used here.  Both are reported.)

Strict limit: as a grows the imbalance approaches a staircase in h0,

    I_inf(h0) = 1 - log2(K(h0)) / log2(M)

where K(h0) counts ordered pairs with cost strictly below h0.  Below the
cheapest cost, where K would be 0, the limiting share distribution is uniform
over the minimum-cost pairs, so that plateau uses the minimum-cost count (an
artifact convention).  Around each riser the finite-a curve deviates from the
staircase over an h0 window whose width shrinks like 1/a.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .qoe import LN2, _imbalance_arrays
from .topology import CostHistogram, moments


def small_a_coefficient(h: CostHistogram) -> float:
    """Quadratic-law coefficient Var(h) / (8 * ln2 * log2 M)."""
    return moments(h).variance / (8.0 * LN2 * math.log2(h.pair_total))


def small_a_coefficient_alt(h: CostHistogram) -> float:
    """The ln2-free variant Var(h) / (8 * log2 M), reported for comparison."""
    return moments(h).variance / (8.0 * math.log2(h.pair_total))


def default_small_a_samples() -> np.ndarray:
    """16 log-spaced strictness samples in [1e-3, 1e-2]."""
    return np.geomspace(1e-3, 1e-2, 16)


def default_fit_thresholds(h: CostHistogram) -> tuple[float, float]:
    """Two thresholds, one cost unit either side of the mean cost.

    Keeping the offset at one cost unit keeps a*(h0 - mean) small over the
    default strictness samples even for very dispersed topologies, so both
    fits sit in the quadratic regime.  The lower value is clamped positive.
    """
    mu = moments(h).mean
    return (max(mu - 1.0, 0.25 * float(h.costs[0])), mu + 1.0)


@dataclass(frozen=True)
class SmallAReport:
    """Theory coefficient vs an origin-constrained least-squares slope of
    I against a^2 over the given strictness samples."""

    k_theory: float
    k_theory_alt: float
    k_fit: float
    ratio: float
    fit_r2: float
    a_samples: tuple[float, ...]
    h0_used: float

    def to_dict(self) -> dict:
        return {
            "k_theory": self.k_theory,
            "k_theory_alt": self.k_theory_alt,
            "k_fit": self.k_fit,
            "ratio": self.ratio,
            "fit_r2": self.fit_r2,
            "a_samples": list(self.a_samples),
            "h0_used": self.h0_used,
        }


def fit_small_a_slope(
    h: CostHistogram, h0: float, a_samples=None
) -> SmallAReport:
    """Fit I(a, h0) = k * a^2 through the origin and compare with theory."""
    if a_samples is None:
        a_samples = default_small_a_samples()
    a = np.asarray(a_samples, dtype=float)
    if a.size < 3:
        raise ParameterError("need at least 3 strictness samples")
    if (a <= 0).any():
        raise ParameterError("strictness samples must be positive")
    if not (h0 > 0):
        raise ParameterError("h0 must be positive")
    imbalance, _ = _imbalance_arrays(h.costs, h.counts, a, np.full_like(a, h0))
    x = a**2
    k_fit = float((imbalance * x).sum() / (x * x).sum())
    ss_res = float(((imbalance - k_fit * x) ** 2).sum())
    ss_tot = float((imbalance**2).sum())
    fit_r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    k_theory = small_a_coefficient(h)
    ratio = k_fit / k_theory if k_theory > 0 else math.nan
    return SmallAReport(
        k_theory=k_theory,
        k_theory_alt=small_a_coefficient_alt(h),
        k_fit=k_fit,
        ratio=ratio,
        fit_r2=fit_r2,
        a_samples=tuple(float(v) for v in a),
        h0_used=float(h0),
    )


@dataclass(frozen=True)
class Plateau:
    """One flat stretch of the strict-limit staircase, on (lo, hi]."""

    lo: float
    hi: float
    pair_count: int
    imbalance_limit: float


@dataclass(frozen=True)
class StaircaseProfile:
    """The strict-limit imbalance as a piecewise-constant profile of h0."""

    breakpoints: tuple[float, ...]
    plateaus: tuple[Plateau, ...]
    pair_total: int

    def limit_at(self, h0: float) -> float:
        """Staircase value at h0 (argmin convention below the cheapest cost)."""
        if not (h0 > 0):
            raise ParameterError("h0 must be positive")
        costs = np.asarray(self.breakpoints)
        idx = int(np.searchsorted(costs, h0, side="left"))
        return self.plateaus[idx].imbalance_limit

    def to_dict(self) -> dict:
        return {
            "pair_total": self.pair_total,
            "breakpoints": list(self.breakpoints),
            "plateaus": [
                {
                    "lo": p.lo,
                    "hi": p.hi,
                    "pair_count": p.pair_count,
                    "imbalance_limit": p.imbalance_limit,
                }
                for p in self.plateaus
            ],
        }


def staircase(h: CostHistogram) -> StaircaseProfile:
    """Strict-limit staircase: one plateau per inter-cost interval.

    Plateau j covers (cost_j, cost_{j+1}] with K = pairs cheaper than its
    interior; the sub-minimum plateau uses the minimum-cost pair count (the
    limit shares are uniform over the cheapest pairs), which makes the profile
    continuous across the cheapest cost.
    """
    m = h.pair_total
    log2_m = math.log2(m)
    cum = np.cumsum(h.counts)
    ks = [int(h.counts[0])] + [int(c) for c in cum]
    edges = [0.0] + [float(c) for c in h.costs] + [math.inf]
    plateaus = tuple(
        Plateau(
            lo=edges[j],
            hi=edges[j + 1],
            pair_count=ks[j],
            imbalance_limit=1.0 - math.log2(ks[j]) / log2_m,
        )
        for j in range(len(ks))
    )
    return StaircaseProfile(
        breakpoints=tuple(float(c) for c in h.costs),
        plateaus=plateaus,
        pair_total=m,
    )


def transition_width(h: CostHistogram, a: float, breakpoint: float, eps: float) -> float:
    """Measured h0-length of the finite-a transition across one riser.

    Scans at resolution 1e-3/a between the neighboring breakpoints (the last
    riser mirrors its left gap) and returns the length of the contiguous run
    of samples with |I(a, h0) - I_inf(h0)| > eps that hugs the riser from
    below.  eps must be positive and below half the riser's plateau gap.
    """
    if not (a > 0):
        raise ParameterError("a must be positive")
    matches = np.nonzero(np.isclose(h.costs, breakpoint, rtol=1e-9, atol=1e-12))[0]
    if matches.size == 0:
        raise ParameterError(f"breakpoint {breakpoint} is not one of the histogram costs")
    i = int(matches[0])
    profile = staircase(h)
    below = profile.plateaus[i].imbalance_limit
    above = profile.plateaus[i + 1].imbalance_limit
    gap = abs(below - above)
    if not (0 < eps < 0.5 * gap):
        raise ParameterError(
            f"eps must lie in (0, {0.5 * gap:.6g}), half the plateau gap at this riser; got {eps}"
        )
    lo = float(h.costs[i - 1]) if i > 0 else 0.0
    if i + 1 < h.costs.size:
        hi = float(h.costs[i + 1])
    else:
        hi = breakpoint + (breakpoint - lo)
    step = 1e-3 / a
    samples = np.arange(lo + step / 2, hi, step)
    imbalance, _ = _imbalance_arrays(h.costs, h.counts, np.full_like(samples, a), samples)
    limits = np.array([profile.limit_at(x) for x in samples])
    deviating = np.abs(imbalance - limits) > eps
    anchor = int(np.nonzero(samples < breakpoint)[0][-1])
    if not deviating[anchor]:
        return 0.0
    left = anchor
    while left > 0 and deviating[left - 1]:
        left -= 1
    right = anchor
    while right + 1 < samples.size and deviating[right + 1]:
        right += 1
    return (right - left + 1) * step
