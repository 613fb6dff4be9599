"""Empirical survival curves of linear functionals and tail-decay fits.

Curves are built from sticky-weighted histograms (each simulation step
contributes its ``dt + u1 dL1 + u2 dL2`` weight), so they estimate the
survival function of the stationary sticky law without inverting the
clock.  Fits run on ``log S(t)`` over a window: with the power prefactor
``p`` pinned to the classifier's prediction the model is linear,

    log S(t) = log k - alpha t + p log t,

and the decay rate comes from an ordinary least-squares slope.  A free-
slope variant (both ``alpha`` and ``p`` estimated) is returned alongside
for diagnostics.  Standard errors use the spread of per-replication fits,
which is honest about autocorrelation within a path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientTailData
from .simulate import SurvivalObserver

#: minimal sticky-weighted mass beyond the window top; one sticky time unit
#: is roughly one effective sample, so this is ~50 effective exceedances
DEFAULT_MIN_EXCEED_WEIGHT = 50.0


def survival_edges(hi: float, bins: int = 2000) -> np.ndarray:
    """Histogram edges on [0, hi] plus an overflow bin to +inf."""
    return np.concatenate([np.linspace(0.0, hi, bins + 1), [np.inf]])


@dataclass
class SurvivalCurve:
    """Pooled and per-replication survival values on a fixed grid.

    ``survival[j] = P(<dir, Z> > t[j])`` exactly at the histogram edges
    (the overflow bin keeps mass beyond the last finite edge).
    """

    t: np.ndarray
    survival: np.ndarray
    per_replication: np.ndarray  # (R, n)
    total_weight: np.ndarray     # (R,) sticky time per replication
    direction: np.ndarray

    @property
    def pooled_weight(self) -> float:
        return float(self.total_weight.sum())


def curve_from_hist(hist, edges, total_weight, direction) -> SurvivalCurve:
    """Survival curve from per-replication weighted histograms."""
    hist = np.atleast_2d(np.asarray(hist, dtype=float))
    edges = np.asarray(edges, dtype=float)
    t = edges[1:-1]  # survival evaluated at interior edges
    tail_mass = np.cumsum(hist[:, ::-1], axis=1)[:, ::-1]  # mass in bins >= j
    per_rep = tail_mass[:, 1:] / np.asarray(total_weight, dtype=float)[:, None]
    pooled = tail_mass[:, 1:].sum(axis=0) / float(np.sum(total_weight))
    return SurvivalCurve(
        t=t,
        survival=pooled,
        per_replication=per_rep,
        total_weight=np.asarray(total_weight, dtype=float),
        direction=np.asarray(direction, dtype=float),
    )


def curve_from_observer(obs: SurvivalObserver, index: int = 0) -> SurvivalCurve:
    return curve_from_hist(
        obs.hists[index], obs.edges[index], obs.weight_total, obs.directions[index]
    )


def curve_from_samples(values, weights, edges, direction=(1.0, 0.0)) -> SurvivalCurve:
    """Single-replication curve from raw weighted samples."""
    hist, _ = np.histogram(np.asarray(values, dtype=float), bins=edges, weights=weights)
    total = float(np.sum(weights))
    return curve_from_hist(hist[None, :], edges, np.array([total]), direction)


@dataclass(frozen=True)
class TailFit:
    """Constrained and free fits of a survival curve's tail."""

    alpha: float
    alpha_se: float
    k: float
    p: float
    window: tuple[float, float]
    n_points: int
    exceed_weight_at_hi: float
    alpha_free: float
    p_free: float
    per_replication_alpha: np.ndarray


def _constrained_fit(t, log_s, p):
    y = log_s - p * np.log(t)
    slope, intercept = np.polyfit(t, y, 1)
    return -float(slope), float(math.exp(intercept))


def survival_and_fit(
    curve: SurvivalCurve,
    p: float,
    window: tuple[float, float],
    *,
    min_exceed_weight: float = DEFAULT_MIN_EXCEED_WEIGHT,
    min_points: int = 4,
) -> TailFit:
    """Fit ``log S(t) = log k - alpha t + p log t`` with ``p`` held fixed.

    The window's upper end is truncated down to where at least
    ``min_exceed_weight`` of sticky-weighted mass still exceeds ``t``;
    if fewer than ``min_points`` usable grid points remain the fit raises
    :class:`InsufficientTailData` instead of extrapolating.
    """
    lo, hi = float(window[0]), float(window[1])
    if not (hi > lo > 0.0):
        raise ValueError("window must satisfy 0 < lo < hi")
    exceed_weight = curve.survival * curve.pooled_weight
    usable = (
        (curve.t >= lo)
        & (curve.t <= hi)
        & (curve.survival > 0.0)
        & (exceed_weight >= min_exceed_weight)
    )
    if np.count_nonzero(usable) < min_points:
        raise InsufficientTailData(
            f"only {int(np.count_nonzero(usable))} usable survival points in "
            f"[{lo}, {hi}] with >= {min_exceed_weight} exceedance weight"
        )
    t = curve.t[usable]
    s = curve.survival[usable]
    hi_used = float(t[-1])

    alpha, k = _constrained_fit(t, np.log(s), p)

    # free fit: log S = c0 - c1 t + c2 log t
    design = np.column_stack([np.ones_like(t), -t, np.log(t)])
    coef, *_ = np.linalg.lstsq(design, np.log(s), rcond=None)
    alpha_free, p_free = float(coef[1]), float(coef[2])

    rep_alphas = []
    for rep in range(curve.per_replication.shape[0]):
        s_rep = curve.per_replication[rep][usable]
        ok = s_rep > 0.0
        if np.count_nonzero(ok) >= min_points:
            a_rep, _ = _constrained_fit(t[ok], np.log(s_rep[ok]), p)
            rep_alphas.append(a_rep)
    rep_alphas = np.array(rep_alphas)
    if rep_alphas.size > 1:
        alpha_se = float(np.std(rep_alphas, ddof=1) / math.sqrt(rep_alphas.size))
    else:
        alpha_se = math.inf

    return TailFit(
        alpha=alpha,
        alpha_se=alpha_se,
        k=k,
        p=p,
        window=(lo, hi_used),
        n_points=int(t.size),
        exceed_weight_at_hi=float(exceed_weight[usable][-1]),
        alpha_free=alpha_free,
        p_free=p_free,
        per_replication_alpha=rep_alphas,
    )


def quantile_window(curve: SurvivalCurve, q_lo: float = 0.90, q_hi: float = 0.999):
    """Window between two upper quantiles of the empirical law."""
    lo = curve.t[np.searchsorted(-curve.survival, -(1.0 - q_lo))]
    hi = curve.t[min(np.searchsorted(-curve.survival, -(1.0 - q_hi)), curve.t.size - 1)]
    return float(lo), float(hi)
