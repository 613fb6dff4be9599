"""Gumbel norming constants, joint product-form tails, and dependence
diagnostics for stationary samples.

A marginal with survival ``K t^p exp(-alpha t)`` lies in the Gumbel domain
of attraction: block maxima of ``n`` effectively independent draws,
normalized as ``(M_n - b_n)/a_n``, converge to ``G(x) = exp(-exp(-x))``.
The scale is ``a_n = 1/alpha`` independently of ``n``; the location ``b_n``
is the upper 1/n tail quantile of the fitted survival, expanded to two
terms:

    b_n = (log n + p log log n + log k - p log alpha) / alpha.

This is the unique constant choice balancing ``n * survival(b_n) -> 1``
(the published norming display carries a sign slip on the ``log K`` term
and drops the ``p log alpha`` piece; both are forced by the balance).

Joint upper tails follow the asymptotic-independence product form
``K x^{p1} y^{p2} exp(-a1 x - a2 y)`` with an unspecified coefficient that
is only ever estimated from simulation.  The operational dependence test
is exceedance counting: ``r(t) = P(both > t) / P(first > t)`` must fall to
zero for an asymptotically independent stationary law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classify import TailAsymptotic
from .errors import (
    BlockTooSmall,
    InsufficientExceedances,
    MissingCoefficient,
    NonpositiveCoefficient,
)


def gumbel_cdf(x):
    """Standard Gumbel distribution function ``exp(-exp(-x))``."""
    x = np.asarray(x, dtype=float)
    val = np.exp(-np.exp(-x))
    return val if val.shape else float(val)


@dataclass(frozen=True)
class EvNorming:
    """Block-maxima norming constants for one marginal."""

    a_n: float
    b_n: float
    n: int


def ev_norming(n: int, tail: TailAsymptotic, k: float) -> EvNorming:
    """Norming constants for maxima of ``n`` draws from a tail
    ``k t^p exp(-alpha t)``.

    Requires ``n >= 3`` so that ``log log n`` is defined and positive, and a
    strictly positive coefficient.
    """
    if n < 3:
        raise BlockTooSmall(f"block size {n} < 3")
    if not k > 0.0:
        raise NonpositiveCoefficient(f"tail coefficient must be positive, got {k}")
    alpha, p = tail.alpha, tail.p
    log_n = math.log(n)
    b_n = (log_n + p * math.log(log_n) + math.log(k) - p * math.log(alpha)) / alpha
    return EvNorming(a_n=1.0 / alpha, b_n=b_n, n=int(n))


@dataclass(frozen=True)
class JointTailModel:
    """Product-form joint tail; the coefficient comes from simulation."""

    alpha1: float
    alpha2: float
    p1: float
    p2: float
    k_hat: float | None = None
    k_ci: tuple[float, float] | None = None


def joint_tail_eval(x, y, m: JointTailModel):
    """Evaluate ``k_hat * x^{p1} * y^{p2} * exp(-alpha1 x - alpha2 y)``."""
    if m.k_hat is None:
        raise MissingCoefficient("joint tail model has no fitted coefficient")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    val = m.k_hat * x**m.p1 * y**m.p2 * np.exp(-m.alpha1 * x - m.alpha2 * y)
    return val if val.shape else float(val)


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2.0 * trials)) / denom
    half = (z / denom) * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials))
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class ExceedanceCurve:
    """Conditional joint-exceedance ratios r(t) with Wilson intervals."""

    t: np.ndarray
    ratio: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    conditioning_counts: np.ndarray
    decreasing: bool
    truncated: bool


def independence_diagnostic(
    samples,
    t_grid,
    *,
    min_exceedances: int = 50,
    z: float = 1.96,
) -> ExceedanceCurve:
    """Empirical test of asymptotic independence by exceedance counting.

    For each threshold ``t`` the ratio ``r(t) = #{both components > t} /
    #{first component > t}`` is returned with a Wilson interval.  The curve
    is truncated (never extrapolated) at the first threshold where fewer
    than ``min_exceedances`` samples exceed ``t`` on the conditioning
    component; if that happens at the very first threshold,
    :class:`InsufficientExceedances` is raised.

    ``decreasing`` reports whether consecutive ratios fall (or at least
    have overlapping confidence intervals) along the whole kept grid.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("samples must have shape (n, 2)")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(np.diff(t_grid) <= 0.0):
        raise ValueError("t_grid must be non-empty and strictly increasing")

    ts, ratios, los, his, counts = [], [], [], [], []
    truncated = False
    for t in t_grid:
        n1 = int(np.count_nonzero(arr[:, 0] > t))
        if n1 < min_exceedances:
            truncated = True
            break
        n12 = int(np.count_nonzero((arr[:, 0] > t) & (arr[:, 1] > t)))
        lo, hi = wilson_interval(n12, n1, z=z)
        ts.append(float(t))
        ratios.append(n12 / n1)
        los.append(lo)
        his.append(hi)
        counts.append(n1)
    if not ts:
        raise InsufficientExceedances(
            f"fewer than {min_exceedances} samples exceed t={t_grid[0]} on the "
            "conditioning component"
        )

    ratios_arr = np.array(ratios)
    his_arr = np.array(his)
    los_arr = np.array(los)
    decreasing = all(
        ratios_arr[i + 1] <= ratios_arr[i] or los_arr[i + 1] <= his_arr[i]
        for i in range(len(ratios) - 1)
    )
    return ExceedanceCurve(
        t=np.array(ts),
        ratio=ratios_arr,
        lower=los_arr,
        upper=his_arr,
        conditioning_counts=np.array(counts),
        decreasing=decreasing,
        truncated=truncated,
    )


def fit_tail_coefficient(
    t, survival, tail: TailAsymptotic, window: tuple[float, float]
) -> tuple[float, float]:
    """Least-squares intercept fit of ``log k`` on a survival curve whose
    decay rate and power are already known.

    Returns ``(k_hat, se_log_k)``; points with zero empirical survival are
    skipped.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(survival, dtype=float)
    lo, hi = window
    mask = (t >= lo) & (t <= hi) & (s > 0.0) & (t > 0.0)
    if np.count_nonzero(mask) < 2:
        raise InsufficientExceedances(f"fewer than 2 usable survival points in window {window}")
    resid = np.log(s[mask]) + tail.alpha * t[mask] - tail.p * np.log(t[mask])
    log_k = float(np.mean(resid))
    se = float(np.std(resid, ddof=1) / math.sqrt(resid.size)) if resid.size > 1 else 0.0
    return math.exp(log_k), se


def gumbel_ks_distance(normalized_maxima) -> float:
    """Kolmogorov-Smirnov distance between normalized block maxima and the
    standard Gumbel law."""
    x = np.sort(np.asarray(normalized_maxima, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("no block maxima provided")
    cdf = gumbel_cdf(x)
    ecdf_hi = np.arange(1, n + 1) / n
    ecdf_lo = np.arange(0, n) / n
    return float(np.max(np.maximum(np.abs(ecdf_hi - cdf), np.abs(cdf - ecdf_lo))))
