"""SLA-aware satisfaction model and the entropy-based QoE-Imbalance.

All metrics are functions of the cost histogram only: pairs in the same cost
class share one weight and one share, so every evaluation is O(#classes)
rather than O(N^2).  Weights and shares are computed from log-weights with a
max-shift normalization throughout, which keeps shares finite and normalized
even in regimes where the raw total weight underflows (very strict SLAs with
the threshold far below the cheapest path).

Alongside the imbalance itself, this module carries the reference inequality
indices (Gini, Jain's index, coefficient of variation, variance), the
entropy-gap decomposition used for group-level diagnostics, and randomized
searches that exhibit which fairness axioms each reference index violates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, ParameterError
from .topology import CostHistogram

LN2 = math.log(2.0)


@dataclass(frozen=True)
class SlaPoint:
    """SLA parameter pair: strictness a (per unit cost) and threshold h0."""

    a: float
    h0: float

    def __post_init__(self):
        if not (self.a > 0):
            raise ParameterError(f"strictness a must be > 0, got {self.a}")
        if not (self.h0 > 0):
            raise ParameterError(f"threshold h0 must be > 0, got {self.h0}")


class ClassStats(NamedTuple):
    """Per-class quantities shared by the metric and derivative kernels.

    Arrays broadcast as (..., n_classes) where ... is the shape of the a/h0
    inputs.  ``q`` is the total share mass of each class (count * per-pair
    share), ``ln_p`` the log of the per-pair share, ``log_mass_total`` the log
    of the raw weight total W.
    """

    w: np.ndarray
    one_minus_w: np.ndarray
    q: np.ndarray
    ln_p: np.ndarray
    log_mass_total: np.ndarray


def _class_stats(costs: np.ndarray, counts: np.ndarray, a, h0) -> ClassStats:
    a = np.asarray(a, dtype=float)[..., None]
    h0 = np.asarray(h0, dtype=float)[..., None]
    z = a * (costs - h0)
    log_w = -np.logaddexp(0.0, z)
    one_minus_w = np.exp(-np.logaddexp(0.0, -z))
    shift = log_w.max(axis=-1, keepdims=True)
    r = np.exp(log_w - shift)
    mass = counts * r
    total = mass.sum(axis=-1, keepdims=True)
    q = mass / total
    ln_p = log_w - shift - np.log(total)
    return ClassStats(
        w=np.exp(log_w),
        one_minus_w=one_minus_w,
        q=q,
        ln_p=ln_p,
        log_mass_total=(shift + np.log(total))[..., 0],
    )


def _imbalance_arrays(costs: np.ndarray, counts: np.ndarray, a, h0):
    """Vectorized (I, s_bar) over broadcast a/h0 arrays."""
    m = float(counts.sum())
    st = _class_stats(costs, counts, a, h0)
    ln_m = math.log(m)
    gap_nats = (st.q * (ln_m + st.ln_p)).sum(axis=-1)
    imbalance = np.clip(gap_nats / ln_m, 0.0, 1.0)
    s_bar = np.exp(st.log_mass_total) / m
    return imbalance, s_bar


@dataclass(frozen=True, eq=False)
class QoeSnapshot:
    """Everything the metric sees at one SLA point, by cost class."""

    sla: SlaPoint
    costs: np.ndarray
    counts: np.ndarray
    weights: np.ndarray
    shares: np.ndarray
    total_weight: float
    mean_satisfaction: float
    entropy_bits: float
    imbalance: float
    pair_total: int

    @property
    def rows(self) -> tuple[tuple[float, int, float, float], ...]:
        """(cost, count, weight, share) per class."""
        return tuple(
            (float(c), int(n), float(w), float(p))
            for c, n, w, p in zip(self.costs, self.counts, self.weights, self.shares)
        )

    def to_dict(self) -> dict:
        return {
            "a": self.sla.a,
            "h0": self.sla.h0,
            "M": self.pair_total,
            "s_bar": self.mean_satisfaction,
            "entropy_bits": self.entropy_bits,
            "imbalance": self.imbalance,
            "classes": [
                {"cost": c, "count": n, "weight": w, "share": p}
                for c, n, w, p in self.rows
            ],
        }


def satisfaction_weight(cost: float, sla: SlaPoint) -> float:
    """Sigmoid satisfaction score 1 / (1 + exp[a (cost - h0)]).

    Evaluated through exp(-|x|) so extreme strictness saturates smoothly
    instead of overflowing.
    """
    z = sla.a * (cost - sla.h0)
    return float(np.exp(-np.logaddexp(0.0, z)))


def evaluate(h: CostHistogram, sla: SlaPoint) -> QoeSnapshot:
    """Weights, shares, total weight W, mean satisfaction, entropy, and
    imbalance at one SLA point, computed over cost classes."""
    m = h.pair_total
    st = _class_stats(h.costs, h.counts, sla.a, sla.h0)
    ln_m = math.log(m)
    gap_nats = float((st.q * (ln_m + st.ln_p)).sum(axis=-1))
    imbalance = min(max(gap_nats / ln_m, 0.0), 1.0)
    entropy_bits = (ln_m - gap_nats) / LN2
    total_weight = float(np.exp(st.log_mass_total))
    return QoeSnapshot(
        sla=sla,
        costs=h.costs,
        counts=h.counts,
        weights=st.w.reshape(-1),
        shares=np.exp(st.ln_p).reshape(-1),
        total_weight=total_weight,
        mean_satisfaction=total_weight / m,
        entropy_bits=entropy_bits,
        imbalance=imbalance,
        pair_total=m,
    )


@dataclass(frozen=True)
class ShareVector:
    """Explicit probability vector for axiom checks, independent of any graph."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(v < 0 for v in vals):
            raise DomainError("shares must be non-negative")
        if abs(sum(vals) - 1.0) > 1e-12:
            raise DomainError(f"shares must sum to 1, got {sum(vals)!r}")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


def shares_from_scores(scores: Sequence[float]) -> ShareVector:
    """Normalize raw non-negative satisfaction scores into shares."""
    arr = np.asarray(scores, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise DomainError("scores must be a non-empty 1-D sequence")
    if (arr < 0).any():
        raise DomainError("scores must be non-negative")
    total = arr.sum()
    if total <= 0:
        raise DomainError("scores must have positive total")
    return ShareVector(values=tuple((arr / total).tolist()))


def _entropy_bits(values: np.ndarray) -> float:
    """Shannon entropy in bits with the 0*log0 = 0 convention.

    A distribution that is uniform over its support gets the closed form
    log2(support size), which makes calibration exact in floating point.
    """
    pos = values[values > 0]
    if pos.size == 0:
        return 0.0
    if pos.max() == pos.min():
        return math.log2(pos.size)
    return float(-(pos * np.log2(pos)).sum())


def imbalance_of_shares(p: ShareVector | Sequence[float]) -> float:
    """Normalized entropy gap 1 - H(p)/log2(len(p)); 0 = uniform, 1 = one-hot."""
    if not isinstance(p, ShareVector):
        p = ShareVector(values=tuple(p))
    n = len(p)
    if n < 2:
        raise DomainError("imbalance needs at least 2 shares")
    h = _entropy_bits(np.asarray(p.values))
    return min(max(1.0 - h / math.log2(n), 0.0), 1.0)


class Decomposition(NamedTuple):
    between_gap: float
    within_gaps: tuple[float, ...]
    reconstruction: float


def decompose(p: ShareVector | Sequence[float], grouping: Sequence[Sequence[int]]) -> Decomposition:
    """Entropy-gap chain rule over a partition of the share indices, in bits.

    total gap = log2(M) - H(p)
              = KL(group masses || group sizes / M)
                + sum_g mass_g * (log2(size_g) - H(p | g))

    Returns the between-group term, the per-group within gaps, and the
    reconstructed right-hand side so callers can check the identity.
    """
    if not isinstance(p, ShareVector):
        p = ShareVector(values=tuple(p))
    values = np.asarray(p.values)
    m = len(p)
    seen: set[int] = set()
    for group in grouping:
        for i in group:
            if not (0 <= i < m) or i in seen:
                raise DomainError("grouping must partition the share indices")
            seen.add(i)
    if len(seen) != m:
        raise DomainError("grouping must cover every share index")

    between = 0.0
    withins = []
    weighted_within = 0.0
    for group in grouping:
        idx = np.asarray(sorted(group), dtype=int)
        mass = float(values[idx].sum())
        if mass <= 0:
            raise DomainError("every group needs positive total mass")
        size = idx.size
        between += mass * math.log2(mass * m / size)
        within = math.log2(size) - _entropy_bits(values[idx] / mass)
        withins.append(within)
        weighted_within += mass * within
    return Decomposition(
        between_gap=between,
        within_gaps=tuple(withins),
        reconstruction=between + weighted_within,
    )


class ReferenceIndices(NamedTuple):
    gini: float
    jfi: float
    cv: float
    variance: float


def reference_indices(p: ShareVector | Sequence[float]) -> ReferenceIndices:
    """Gini (mean-absolute-difference form), Jain's fairness index, coefficient
    of variation, and population variance.

    Accepts raw non-negative score vectors as well as shares: all but the
    variance are scale-free, and the variance's scale dependence is exactly
    what the axiom comparison needs to exhibit.
    """
    values = np.asarray(p.values if isinstance(p, ShareVector) else p, dtype=float)
    if values.ndim != 1 or values.size < 1:
        raise DomainError("need a non-empty 1-D vector")
    if (values < 0).any():
        raise DomainError("values must be non-negative")
    n = values.size
    mean = values.mean()
    var = float(values.var())
    sq = float((values**2).sum())
    jfi = 1.0 if sq == 0 else float(values.sum() ** 2 / (n * sq))
    if mean == 0:
        return ReferenceIndices(gini=0.0, jfi=jfi, cv=0.0, variance=var)
    gini = float(np.abs(values[:, None] - values[None, :]).sum() / (2 * n * n * mean))
    cv = math.sqrt(var) / mean
    return ReferenceIndices(gini=gini, jfi=jfi, cv=cv, variance=var)


def affine_transform(
    h: CostHistogram, sla: SlaPoint, shift: float, scale: float
) -> tuple[CostHistogram, SlaPoint]:
    """Affine cost map cost -> scale*cost + shift with the matching SLA
    adjustment (h0 -> scale*h0 + shift, a -> a/scale), under which the
    imbalance and mean satisfaction are invariant."""
    if not (scale > 0):
        raise DomainError(f"scale must be > 0, got {scale}")
    new_costs = scale * h.costs + shift
    if new_costs[0] <= 0:
        raise DomainError("transformed costs must stay positive")
    new_h0 = scale * sla.h0 + shift
    if new_h0 <= 0:
        raise DomainError("transformed threshold must stay positive")
    return (
        CostHistogram(costs=new_costs, counts=h.counts.copy()),
        SlaPoint(a=sla.a / scale, h0=new_h0),
    )


# ---------------------------------------------------------------------------
# Axiom counterexample search for the reference indices
# ---------------------------------------------------------------------------

_INDEX_FNS = {
    "gini": lambda v: reference_indices(v).gini,
    "jfi": lambda v: reference_indices(v).jfi,
    "cv": lambda v: reference_indices(v).cv,
    "variance": lambda v: reference_indices(v).variance,
}


def generic_decomposition_residual(index: str, p: Sequence[float], grouping) -> dict:
    """Apply the entropy-gap decomposition recipe to an arbitrary index:
    total vs index(group-smoothed vector) + sum_g mass_g * index(within-group
    shares).  The residual is zero for the entropy gap and generically
    non-zero for the reference indices."""
    fn = _INDEX_FNS[index]
    values = np.asarray(p, dtype=float)
    total = fn(values)
    smoothed = values.copy()
    between_parts = []
    weighted_within = 0.0
    for group in grouping:
        idx = np.asarray(sorted(group), dtype=int)
        mass = float(values[idx].sum())
        if mass <= 0:
            raise DomainError("every group needs positive total mass")
        smoothed[idx] = mass / idx.size
        between_parts.append(idx)
        weighted_within += mass * fn(values[idx] / mass)
    between = fn(smoothed)
    reconstruction = between + weighted_within
    return {
        "index": index,
        "shares": values.tolist(),
        "grouping": [sorted(int(i) for i in g) for g in grouping],
        "total": total,
        "between": between,
        "reconstruction": reconstruction,
        "residual": total - reconstruction,
    }


def find_decomposability_violation(
    index: str, seed: int = 0, tol: float = 1e-6, max_tries: int = 1000
) -> dict | None:
    """Randomized search for a share vector and partition where the index
    fails the decomposition identity by more than tol."""
    rng = np.random.Generator(np.random.Philox(seed))
    for _ in range(max_tries):
        n = int(rng.integers(4, 9))
        shares = rng.dirichlet(np.ones(n))
        perm = rng.permutation(n)
        cut = int(rng.integers(1, n))
        grouping = [perm[:cut].tolist(), perm[cut:].tolist()]
        record = generic_decomposition_residual(index, shares, grouping)
        if abs(record["residual"]) > tol:
            record["seed"] = seed
            return record
    return None


def find_scale_dependence_violation(
    index: str = "variance", seed: int = 0, lam: float = 1e6, tol: float = 1e-6, max_tries: int = 100
) -> dict | None:
    """Randomized search for a score vector whose index changes under
    rescaling (scale-invariance failure); variance is the expected offender."""
    fn = _INDEX_FNS[index]
    rng = np.random.Generator(np.random.Philox(seed))
    for _ in range(max_tries):
        n = int(rng.integers(3, 9))
        scores = rng.dirichlet(np.ones(n))
        v1 = fn(scores)
        v2 = fn(lam * scores)
        if abs(v1 - v2) > tol:
            return {
                "index": index,
                "scores": scores.tolist(),
                "lambda": lam,
                "value": v1,
                "value_scaled": v2,
                "residual": v2 - v1,
                "seed": seed,
            }
    return None
