"""First- and second-order sensitivity of imbalance and mean satisfaction.

The imbalance gradient is the covariance, over the share distribution, of the
entropy leverage (1 + ln p) with the per-class parameter sensitivity, scaled
by 1/(ln2 * log2 M).  The sensitivity terms are

    g_a  = -(cost - h0) * (1 - w)        per unit strictness
    g_h0 = a * (1 - w)                   per unit threshold

and the satisfaction gradient is the plain count-weighted average of the
sigmoid derivatives.  Curvature is obtained by central finite differences of
the analytic gradient: one differentiation level is done analytically and one
numerically, which conditions far better than double differences of the
metric itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .qoe import LN2, SlaPoint, _class_stats, _imbalance_arrays
from .topology import CostHistogram

ANGLE_NORM_FLOOR = 1e-14


@dataclass(frozen=True)
class GradientPair:
    """Gradients of imbalance and mean satisfaction at one SLA point.

    ``angle_deg`` is the angle between the two gradient vectors; it is NaN and
    ``degenerate`` is True when either vector's norm is below 1e-14.
    """

    dI_da: float
    dI_dh0: float
    ds_da: float
    ds_dh0: float
    angle_deg: float
    degenerate: bool


@dataclass(frozen=True)
class HessianI:
    """Second derivatives of imbalance, via central differences of the
    analytic gradient.  Both mixed estimates are kept; they agree up to FD
    error wherever the landscape is smooth.  ``step_limited`` flags points
    where the stencil spans a cost-class boundary region (some class cost
    within twice the h0 step of h0), where finite differences get noisy."""

    d2_aa: float
    d2_h0h0: float
    d2_ah0: float
    d2_h0a: float
    step_a: float
    step_h0: float
    step_limited: bool


@dataclass(frozen=True)
class DiagnosticRow:
    """Per-cost-class breakdown of one gradient component."""

    cost: float
    count: int
    share: float
    leverage: float
    sensitivity: float
    contribution: float

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "count": self.count,
            "share": self.share,
            "leverage": self.leverage,
            "sensitivity": self.sensitivity,
            "contribution": self.contribution,
        }


def _gradient_arrays(costs: np.ndarray, counts: np.ndarray, a, h0):
    """Vectorized (dI_da, dI_dh0, ds_da, ds_dh0) over broadcast a/h0."""
    a_in = np.asarray(a, dtype=float)
    h0_in = np.asarray(h0, dtype=float)
    m = float(counts.sum())
    st = _class_stats(costs, counts, a_in, h0_in)
    a_b = a_in[..., None]
    h0_b = h0_in[..., None]
    leverage = 1.0 + st.ln_p
    g_a = -(costs - h0_b) * st.one_minus_w
    g_h0 = a_b * st.one_minus_w
    prefactor = 1.0 / (LN2 * math.log2(m))

    def cov_with_leverage(g):
        x_bar = (st.q * leverage).sum(axis=-1, keepdims=True)
        g_bar = (st.q * g).sum(axis=-1, keepdims=True)
        return (st.q * (leverage - x_bar) * (g - g_bar)).sum(axis=-1)

    dI_da = prefactor * cov_with_leverage(g_a)
    dI_dh0 = prefactor * cov_with_leverage(g_h0)
    w_omw = st.w * st.one_minus_w
    ds_da = (counts * (-(costs - h0_b) * w_omw)).sum(axis=-1) / m
    ds_dh0 = (counts * (a_b * w_omw)).sum(axis=-1) / m
    return dI_da, dI_dh0, ds_da, ds_dh0


def _angle(dI_da: float, dI_dh0: float, ds_da: float, ds_dh0: float) -> tuple[float, bool]:
    norm_i = math.hypot(dI_da, dI_dh0)
    norm_s = math.hypot(ds_da, ds_dh0)
    if norm_i <= ANGLE_NORM_FLOOR or norm_s <= ANGLE_NORM_FLOOR:
        return math.nan, True
    cosine = (dI_da * ds_da + dI_dh0 * ds_dh0) / (norm_i * norm_s)
    return math.degrees(math.acos(min(1.0, max(-1.0, cosine)))), False


def gradient(h: CostHistogram, sla: SlaPoint) -> GradientPair:
    """Analytic gradients of I and s_bar at one SLA point (finite a)."""
    dI_da, dI_dh0, ds_da, ds_dh0 = (
        float(x) for x in _gradient_arrays(h.costs, h.counts, sla.a, sla.h0)
    )
    angle, degenerate = _angle(dI_da, dI_dh0, ds_da, ds_dh0)
    return GradientPair(
        dI_da=dI_da,
        dI_dh0=dI_dh0,
        ds_da=ds_da,
        ds_dh0=ds_dh0,
        angle_deg=angle,
        degenerate=degenerate,
    )


def gradient_fd(h: CostHistogram, sla: SlaPoint, step: float = 1e-5) -> GradientPair:
    """Central-difference gradients of I and s_bar; the oracle for gradient()."""
    if not (step > 0):
        raise ParameterError("step must be > 0")
    if sla.a - step <= 0 or sla.h0 - step <= 0:
        raise ParameterError(
            f"step {step} too large: ({sla.a}, {sla.h0}) minus step leaves the domain"
        )

    def metrics(a, h0):
        i, s = _imbalance_arrays(h.costs, h.counts, a, h0)
        return float(i), float(s)

    i_ap, s_ap = metrics(sla.a + step, sla.h0)
    i_am, s_am = metrics(sla.a - step, sla.h0)
    i_hp, s_hp = metrics(sla.a, sla.h0 + step)
    i_hm, s_hm = metrics(sla.a, sla.h0 - step)
    dI_da = (i_ap - i_am) / (2 * step)
    dI_dh0 = (i_hp - i_hm) / (2 * step)
    ds_da = (s_ap - s_am) / (2 * step)
    ds_dh0 = (s_hp - s_hm) / (2 * step)
    angle, degenerate = _angle(dI_da, dI_dh0, ds_da, ds_dh0)
    return GradientPair(
        dI_da=dI_da,
        dI_dh0=dI_dh0,
        ds_da=ds_da,
        ds_dh0=ds_dh0,
        angle_deg=angle,
        degenerate=degenerate,
    )


def default_fd_step(theta: float) -> float:
    """Default curvature step: max(1e-4, 1e-4 * |theta|), capped below theta/2."""
    return min(max(1e-4, 1e-4 * abs(theta)), theta / 2)


def hessian(h: CostHistogram, sla: SlaPoint, step: float | None = None) -> HessianI:
    """Curvature of I by central differences of the analytic gradient.

    With ``step=None`` each axis uses default_fd_step; an explicit step is
    used verbatim on both axes and must keep the stencil in the domain.
    """
    if step is None:
        step_a = default_fd_step(sla.a)
        step_h0 = default_fd_step(sla.h0)
    else:
        if not (step > 0):
            raise ParameterError("step must be > 0")
        if sla.a - step <= 0 or sla.h0 - step <= 0:
            raise ParameterError(
                f"step {step} too large: ({sla.a}, {sla.h0}) minus step leaves the domain"
            )
        step_a = step_h0 = step

    a_pts = np.array([sla.a + step_a, sla.a - step_a, sla.a, sla.a])
    h_pts = np.array([sla.h0, sla.h0, sla.h0 + step_h0, sla.h0 - step_h0])
    dI_da, dI_dh0, _, _ = _gradient_arrays(h.costs, h.counts, a_pts, h_pts)
    d2_aa = (dI_da[0] - dI_da[1]) / (2 * step_a)
    d2_h0a = (dI_dh0[0] - dI_dh0[1]) / (2 * step_a)
    d2_h0h0 = (dI_dh0[2] - dI_dh0[3]) / (2 * step_h0)
    d2_ah0 = (dI_da[2] - dI_da[3]) / (2 * step_h0)
    step_limited = bool((np.abs(h.costs - sla.h0) < 2 * step_h0).any())
    return HessianI(
        d2_aa=float(d2_aa),
        d2_h0h0=float(d2_h0h0),
        d2_ah0=float(d2_ah0),
        d2_h0a=float(d2_h0a),
        step_a=step_a,
        step_h0=step_h0,
        step_limited=step_limited,
    )


def diagnose(h: CostHistogram, sla: SlaPoint, param: str) -> list[DiagnosticRow]:
    """Per-class contributions to one gradient component, largest first.

    contribution = count * p * (1 + ln p) * (g - E[g]) / (ln2 * log2 M);
    the contributions sum to the corresponding gradient component.
    """
    if param not in ("a", "h0"):
        raise ParameterError(f"param must be 'a' or 'h0', got {param!r}")
    m = float(h.counts.sum())
    st = _class_stats(h.costs, h.counts, sla.a, sla.h0)
    q = st.q.reshape(-1)
    ln_p = st.ln_p.reshape(-1)
    if param == "a":
        g = (-(h.costs - sla.h0) * st.one_minus_w).reshape(-1)
    else:
        g = (sla.a * st.one_minus_w).reshape(-1)
    leverage = 1.0 + ln_p
    expected_g = float((q * g).sum())
    contributions = q * leverage * (g - expected_g) / (LN2 * math.log2(m))
    rows = [
        DiagnosticRow(
            cost=float(c),
            count=int(n),
            share=float(p),
            leverage=float(x),
            sensitivity=float(gv),
            contribution=float(contrib),
        )
        for c, n, p, x, gv, contrib in zip(
            h.costs, h.counts, np.exp(ln_p), leverage, g, contributions
        )
    ]
    rows.sort(key=lambda r: abs(r.contribution), reverse=True)
    return rows
