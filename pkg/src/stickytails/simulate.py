"""Monte Carlo engine for the sticky SRBM.

The reflected path is advanced by an Euler proposal followed by an exact
complementary projection back into the orthant (see ``_stepper``); the
projection multipliers are the discrete local-time increments, and the
sticky clock is the running total ``S(t) = t + u1 L1(t) + u2 L2(t)``.
Estimators never invert the clock: by the occupation decomposition the
stationary law of the sticky process weights each step position with
``dt + u1 dL1 + u2 dL2`` and normalizes by total sticky time, which is
what every accumulator below does.

Replications run in lockstep as rows of a vectorized state; each has its
own counter-based random stream (Philox keyed by a spawned seed sequence),
so runs are bit-reproducible for a fixed configuration and replication
streams stay independent.  Long runs stream through fixed-size chunks;
observers receive full-resolution chunk buffers and reduce them on the
fly, while stored paths are decimated by ``thin`` steps (keeping exact
per-group local-time increments and per-group componentwise maxima).

Known discretization bias: the projection scheme overshoots boundary
visits, biasing local-time estimates at order ``sqrt(dt)``; this is
accepted and quantified by a step-halving self-test rather than corrected.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._stepper import step_chunk
from .errors import GridOutOfRange, NoComplementarySolution
from .model import LocalTimeRates, ModelParams, levy_exponent, validate

TRACE_MAGIC = b"SBMTRACE"
TRACE_VERSION = 1


@dataclass(frozen=True)
class SimConfig:
    """Simulation budget and reproducibility knobs.

    ``horizon`` counts SRBM-clock time after the discarded ``burn_in``.
    ``thin`` is the storage stride of recorded paths (full-resolution
    accumulators are unaffected); ``chunk_steps`` only tunes streaming
    granularity.
    """

    dt: float = 1e-3
    horizon: float = 1e4
    burn_in: float = 1e2
    replications: int = 8
    seed: int = 0
    thin: int = 10
    chunk_steps: int = 16384

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not self.horizon > self.burn_in >= 0.0:
            raise ValueError("horizon must exceed burn_in >= 0")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if self.thin < 1 or self.chunk_steps < 1:
            raise ValueError("thin and chunk_steps must be >= 1")


def reflect_step(w, refl):
    """Project a free pre-point back into the orthant.

    Returns ``(z, dL)`` with ``z = w + R dL``, ``z >= 0``, ``dL >= 0`` and
    ``z_i dL_i = 0``.  The unique complementary solution is picked by case
    analysis in the fixed order: no push, push face 1, push face 2, push
    both (2x2 solve).  Accepts a single point of shape (2,) or a batch
    (..., 2).
    """
    r = np.asarray(refl, dtype=float).reshape(2, 2)
    det = r[0, 0] * r[1, 1] - r[0, 1] * r[1, 0]
    if not (r[0, 0] > 0.0 and r[1, 1] > 0.0 and det > 0.0):
        raise ValueError("reflection matrix must have positive diagonal and determinant")
    w = np.asarray(w, dtype=float)
    single = w.ndim == 1
    wb = np.atleast_2d(w)
    w0, w1 = wb[..., 0], wb[..., 1]

    cand0 = -w0 / r[0, 0]
    face1 = (w0 < 0.0) & (w1 + r[1, 0] * cand0 >= 0.0)
    cand1 = -w1 / r[1, 1]
    face2 = ~face1 & (w1 < 0.0) & (w0 + r[0, 1] * cand1 >= 0.0)
    both = ((w0 < 0.0) | (w1 < 0.0)) & ~face1 & ~face2

    d0b = (-w0 * r[1, 1] + w1 * r[0, 1]) / det
    d1b = (w0 * r[1, 0] - w1 * r[0, 0]) / det
    if np.any(both & ((d0b < 0.0) | (d1b < 0.0))):
        raise NoComplementarySolution(
            "push-both multiplier negative; reflection matrix is not completely-S"
        )
    d0 = np.where(face1, cand0, np.where(both, d0b, 0.0))
    d1 = np.where(face2, cand1, np.where(both, d1b, 0.0))
    z0 = np.where(face1 | both, 0.0, w0 + r[0, 1] * d1)
    z1 = np.where(face2 | both, 0.0, w1 + r[1, 0] * d0)

    z = np.stack([z0, z1], axis=-1)
    dl = np.stack([d0, d1], axis=-1)
    if single:
        return z[0], dl[0]
    return z.reshape(w.shape), dl.reshape(w.shape)


# ---------------------------------------------------------------------------
# engine and observers
# ---------------------------------------------------------------------------

@dataclass
class EngineResult:
    """Final per-replication totals of one engine run."""

    params: ModelParams
    cfg: SimConfig
    n_steps: int
    horizon_effective: float
    final_positions: np.ndarray  # (R, 2)
    local_times: np.ndarray      # (R, 2) accumulated after burn-in
    sticky_time: np.ndarray      # (R,) = horizon_effective + <u, L>


class ChunkObserver:
    """Streaming consumer of full-resolution simulation chunks.

    ``begin`` receives the post-burn-in initial positions (R, 2);
    ``observe`` receives the SRBM time at the chunk start, the cumulative
    local times at the chunk start (R, 2), and the chunk buffers of
    post-step positions and per-step local-time increments (C, R, 2).
    """

    def begin(self, params: ModelParams, cfg: SimConfig, n_steps: int, z0: np.ndarray) -> None:
        pass

    def observe(self, t0: float, l0: np.ndarray, pos: np.ndarray, dl: np.ndarray) -> None:
        raise NotImplementedError

    def finish(self, result: EngineResult) -> None:
        pass


def run_engine(params: ModelParams, cfg: SimConfig, observers=()) -> EngineResult:
    """Run the chunked Euler-complementarity recursion, feeding observers.

    Burn-in steps are simulated with the same streams but not observed;
    local times and the SRBM clock restart at zero afterwards.
    """
    p = validate(params)
    nrep = cfg.replications
    dt = cfg.dt
    r = p.refl
    det = float(r[0, 0] * r[1, 1] - r[0, 1] * r[1, 0])
    scale = np.linalg.cholesky(p.sigma) * math.sqrt(dt)
    drift = p.mu * dt

    chunk = max(cfg.thin, (cfg.chunk_steps // cfg.thin) * cfg.thin)
    burn_steps = int(round(cfg.burn_in / dt))
    n_steps = int(math.ceil(cfg.horizon / dt))
    n_steps = ((n_steps + cfg.thin - 1) // cfg.thin) * cfg.thin
    horizon_eff = n_steps * dt

    streams = [
        np.random.Generator(np.random.Philox(s))
        for s in np.random.SeedSequence(cfg.seed).spawn(nrep)
    ]
    z = np.zeros((nrep, 2))
    lt = np.zeros((nrep, 2))
    inc = np.empty((chunk, nrep, 2))
    pos = np.empty((chunk, nrep, 2))
    dl = np.empty((chunk, nrep, 2))
    errors = 0

    def draw(count):
        for i, g in enumerate(streams):
            inc[:count, i, :] = g.standard_normal((count, 2))
        inc[:count] = inc[:count] @ scale.T + drift

    done = 0
    while done < burn_steps:
        c = min(chunk, burn_steps - done)
        draw(c)
        errors += step_chunk(z, lt, inc[:c], r[0, 0], r[0, 1], r[1, 0], r[1, 1], det, pos[:c], dl[:c])
        if errors:
            raise NoComplementarySolution(
                f"{errors} burn-in step(s) produced a negative push-both multiplier"
            )
        done += c
    lt[:] = 0.0

    for obs in observers:
        obs.begin(p, cfg, n_steps, z.copy())
    done = 0
    while done < n_steps:
        c = min(chunk, n_steps - done)
        draw(c)
        l0 = lt.copy()
        errors += step_chunk(z, lt, inc[:c], r[0, 0], r[0, 1], r[1, 0], r[1, 1], det, pos[:c], dl[:c])
        if errors:
            raise NoComplementarySolution(
                f"{errors} step(s) produced a negative push-both multiplier"
            )
        t0 = done * dt
        for obs in observers:
            obs.observe(t0, l0, pos[:c], dl[:c])
        done += c

    result = EngineResult(
        params=p,
        cfg=cfg,
        n_steps=n_steps,
        horizon_effective=horizon_eff,
        final_positions=z.copy(),
        local_times=lt.copy(),
        sticky_time=horizon_eff + lt @ p.stick,
    )
    for obs in observers:
        obs.finish(result)
    return result


# ---------------------------------------------------------------------------
# recorded paths
# ---------------------------------------------------------------------------

@dataclass
class SrbmPath:
    """One replication's decimated reflected path with clock accounting.

    ``times`` is the post-burn-in SRBM clock at stored samples (stride
    ``thin`` steps); ``local_times`` the cumulative pair (L1, L2);
    ``sticky_clock`` the running ``S(t) = t + <u, L(t)>``.  ``step_local_time``
    holds the per-group local-time increments (exact regardless of
    decimation) and ``interval_max`` the componentwise path maximum within
    each stored group, so window maxima survive decimation.
    """

    times: np.ndarray
    positions: np.ndarray
    local_times: np.ndarray
    sticky_clock: np.ndarray
    step_local_time: np.ndarray
    interval_max: np.ndarray
    initial_position: np.ndarray
    dt: float
    thin: int
    replication: int
    stick: np.ndarray

    @property
    def total_sticky(self) -> float:
        return float(self.sticky_clock[-1])

    @property
    def total_time(self) -> float:
        return float(self.times[-1])

    @property
    def total_local_time(self) -> np.ndarray:
        return self.local_times[-1]


class PathRecorder(ChunkObserver):
    """Observer assembling decimated :class:`SrbmPath` objects."""

    def __init__(self):
        self._idx = 0

    def begin(self, params, cfg, n_steps, z0):
        self.params = params
        self.cfg = cfg
        n_groups = n_steps // cfg.thin
        nrep = cfg.replications
        self.times = (np.arange(1, n_groups + 1) * cfg.thin) * cfg.dt
        self.pos = np.empty((n_groups, nrep, 2))
        self.lt = np.empty((n_groups, nrep, 2))
        self.group_dl = np.empty((n_groups, nrep, 2))
        self.group_max = np.empty((n_groups, nrep, 2))
        self.z0 = z0
        # running cumulative kept locally so stored local times are exactly
        # the cumsum of stored increments (monotone under IEEE rounding),
        # independent of the engine's own accumulation order
        self._lt_running = np.zeros((nrep, 2))
        self._idx = 0

    def observe(self, t0, l0, pos, dl):
        thin = self.cfg.thin
        c = pos.shape[0]
        groups = c // thin
        gp = pos.reshape(groups, thin, *pos.shape[1:])
        gd = dl.reshape(groups, thin, *dl.shape[1:])
        sl = slice(self._idx, self._idx + groups)
        self.pos[sl] = gp[:, -1]
        self.group_dl[sl] = gd.sum(axis=1)
        self.group_max[sl] = gp.max(axis=1)
        self.lt[sl] = self._lt_running[None, :, :] + np.cumsum(self.group_dl[sl], axis=0)
        self._lt_running = self.lt[self._idx + groups - 1].copy()
        self._idx += groups

    def finish(self, result):
        self.result = result

    def paths(self) -> list[SrbmPath]:
        p, cfg = self.params, self.cfg
        out = []
        for rep in range(cfg.replications):
            lt = self.lt[:, rep, :]
            out.append(
                SrbmPath(
                    times=self.times.copy(),
                    positions=self.pos[:, rep, :].copy(),
                    local_times=lt.copy(),
                    sticky_clock=self.times + lt @ p.stick,
                    step_local_time=self.group_dl[:, rep, :].copy(),
                    interval_max=self.group_max[:, rep, :].copy(),
                    initial_position=self.z0[rep].copy(),
                    dt=cfg.dt,
                    thin=cfg.thin,
                    replication=rep,
                    stick=p.stick.copy(),
                )
            )
        return out


def simulate_srbm(params: ModelParams, cfg: SimConfig) -> list[SrbmPath]:
    """Simulate the reflected motion; one decimated path per replication.

    Deterministic for fixed ``(seed, cfg, params)``; replication ``i``
    always consumes the ``i``-th spawned substream.
    """
    rec = PathRecorder()
    run_engine(params, cfg, observers=(rec,))
    return rec.paths()


# ---------------------------------------------------------------------------
# sticky clock inversion
# ---------------------------------------------------------------------------

def sticky_clock_invert(path: SrbmPath, t_grid):
    """Invert the sticky clock on a grid: returns ``(T(t), Z(T(t)))``.

    ``S`` is interpolated piecewise linearly between stored samples (so
    ``S(T(t)) = t`` up to float round-off); positions are taken from the
    nearest stored sample at or before ``T(t)``.
    """
    t = np.asarray(t_grid, dtype=float)
    s_full = np.concatenate([[0.0], path.sticky_clock])
    times_full = np.concatenate([[0.0], path.times])
    pos_full = np.vstack([path.initial_position[None, :], path.positions])
    if np.any(t < 0.0) or np.any(t > s_full[-1] * (1.0 + 1e-12)):
        raise GridOutOfRange(
            f"sticky grid must lie within [0, {s_full[-1]}]"
        )
    k = np.clip(np.searchsorted(s_full, t, side="right") - 1, 0, len(s_full) - 2)
    span = s_full[k + 1] - s_full[k]
    frac = np.where(span > 0.0, (t - s_full[k]) / np.where(span > 0.0, span, 1.0), 0.0)
    inv = times_full[k] + frac * (times_full[k + 1] - times_full[k])
    return inv, pos_full[k]


# ---------------------------------------------------------------------------
# occupation estimation
# ---------------------------------------------------------------------------

@dataclass
class OccupationEstimate:
    """Histogram estimate of the stationary law via the occupation
    decomposition: interior cells carry ``dt`` mass, each face carries its
    ``u_i dL_i`` mass in a dedicated one-dimensional histogram, and the
    normalizer is the total sticky time.  Mass falling beyond the grid
    extent is kept in ``overflow`` so that everything sums to one."""

    x_edges: np.ndarray
    y_edges: np.ndarray
    interior: np.ndarray      # (nx, ny) mass, already divided by total
    face1: np.ndarray         # mass along z2 for the z1 = 0 face
    face2: np.ndarray         # mass along z1 for the z2 = 0 face
    overflow: float
    total: float

    @property
    def interior_mass(self) -> float:
        return float(self.interior.sum())

    @property
    def face_masses(self) -> tuple[float, float]:
        return float(self.face1.sum()), float(self.face2.sum())

    @property
    def total_mass(self) -> float:
        return self.interior_mass + sum(self.face_masses) + self.overflow


def occupation_measure(
    path: SrbmPath,
    params: ModelParams,
    *,
    bins: int = 400,
    extent: tuple[float, float] | None = None,
    quantile: float = 0.9995,
) -> OccupationEstimate:
    """Accumulate one path into an occupation histogram.

    With ``thin == 1`` face increments land exactly on their boundary
    coordinate; with coarser storage the along-face coordinate smears by
    the group span (masses stay exact).  ``extent`` defaults to the given
    quantile of the stored positions.
    """
    p = validate(params)
    if extent is None:
        hi = np.quantile(path.positions, quantile, axis=0)
        extent = (float(hi[0]) or 1.0, float(hi[1]) or 1.0)
    x_edges = np.linspace(0.0, extent[0], bins + 1)
    y_edges = np.linspace(0.0, extent[1], bins + 1)

    dt_mass = path.thin * path.dt
    interior, _, _ = np.histogram2d(
        path.positions[:, 0], path.positions[:, 1], bins=(x_edges, y_edges)
    )
    interior = interior * dt_mass
    face1, _ = np.histogram(
        path.positions[:, 1], bins=y_edges, weights=p.stick[0] * path.step_local_time[:, 0]
    )
    face2, _ = np.histogram(
        path.positions[:, 0], bins=x_edges, weights=p.stick[1] * path.step_local_time[:, 1]
    )
    total = path.total_sticky
    captured = interior.sum() + face1.sum() + face2.sum()
    return OccupationEstimate(
        x_edges=x_edges,
        y_edges=y_edges,
        interior=interior / total,
        face1=face1 / total,
        face2=face2 / total,
        overflow=float((total - captured) / total),
        total=total,
    )


# ---------------------------------------------------------------------------
# local-time rate estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatesEstimate:
    """Long-run-rate estimates of (E[T(1)], E[L1], E[L2]) with standard
    errors from replication spread.  The estimator satisfies
    ``e_T1 + u1 e_L1 + u2 e_L2 = 1`` exactly by construction."""

    rates: LocalTimeRates
    se: tuple[float, float, float]
    per_replication: np.ndarray  # (R, 3)


def estimate_local_time_rates(paths: list[SrbmPath]) -> RatesEstimate:
    per = np.array(
        [
            [
                path.total_time / path.total_sticky,
                path.total_local_time[0] / path.total_sticky,
                path.total_local_time[1] / path.total_sticky,
            ]
            for path in paths
        ]
    )
    total_time = sum(path.total_time for path in paths)
    total_l = np.sum([path.total_local_time for path in paths], axis=0)
    total_sticky = sum(path.total_sticky for path in paths)
    pooled = LocalTimeRates(
        e_T1=total_time / total_sticky,
        e_L1=float(total_l[0] / total_sticky),
        e_L2=float(total_l[1] / total_sticky),
    )
    nrep = per.shape[0]
    se = tuple(
        float(np.std(per[:, i], ddof=1) / math.sqrt(nrep)) if nrep > 1 else math.inf
        for i in range(3)
    )
    return RatesEstimate(rates=pooled, se=se, per_replication=per)


# ---------------------------------------------------------------------------
# empirical moment generating functions and BAR residuals
# ---------------------------------------------------------------------------

@dataclass
class MgfEstimate:
    """Sticky-time-normalized empirical transforms on a grid of arguments.

    ``phi0`` weights positions with ``dt`` (interior clock), ``phi1``/
    ``phi2`` with the face local-time increments; all are divided by total
    sticky time, matching the occupation decomposition of the stationary
    law: ``phi = phi0 + u1 phi1 + u2 phi2``.
    """

    theta: np.ndarray        # (m, 2)
    phi0: np.ndarray         # (R, m)
    phi1: np.ndarray
    phi2: np.ndarray
    sticky_time: np.ndarray  # (R,)
    stick: np.ndarray

    def pooled(self):
        s = self.sticky_time.sum()
        return self.phi0.sum(0) / s, self.phi1.sum(0) / s, self.phi2.sum(0) / s

    def pooled_phi(self):
        p0, p1, p2 = self.pooled()
        return p0 + self.stick[0] * p1 + self.stick[1] * p2


class MgfObserver(ChunkObserver):
    """Accumulates the three empirical transforms on a fixed grid."""

    def __init__(self, theta):
        self.theta = np.asarray(theta, dtype=float).reshape(-1, 2)

    def begin(self, params, cfg, n_steps, z0):
        nrep = cfg.replications
        m = self.theta.shape[0]
        self.dt = cfg.dt
        self.stick = params.stick.copy()
        self.s0 = np.zeros((nrep, m))
        self.s1 = np.zeros((nrep, m))
        self.s2 = np.zeros((nrep, m))

    def observe(self, t0, l0, pos, dl):
        ex = np.exp(pos @ self.theta.T)  # (C, R, m)
        self.s0 += ex.sum(axis=0) * self.dt
        self.s1 += np.einsum("crm,cr->rm", ex, dl[:, :, 0])
        self.s2 += np.einsum("crm,cr->rm", ex, dl[:, :, 1])

    def finish(self, result):
        self.estimate = MgfEstimate(
            theta=self.theta,
            phi0=self.s0,
            phi1=self.s1,
            phi2=self.s2,
            sticky_time=result.sticky_time.copy(),
            stick=self.stick,
        )


def mgf_from_paths(paths: list[SrbmPath], theta) -> MgfEstimate:
    """Exact transforms from stored paths (use thin = 1 for exact face
    placement; coarser storage attaches group increments to the group-end
    position)."""
    theta = np.asarray(theta, dtype=float).reshape(-1, 2)
    nrep = len(paths)
    s0 = np.zeros((nrep, theta.shape[0]))
    s1 = np.zeros_like(s0)
    s2 = np.zeros_like(s0)
    sticky = np.zeros(nrep)
    for i, path in enumerate(paths):
        ex = np.exp(path.positions @ theta.T)
        s0[i] = ex.sum(axis=0) * path.thin * path.dt
        s1[i] = ex.T @ path.step_local_time[:, 0]
        s2[i] = ex.T @ path.step_local_time[:, 1]
        sticky[i] = path.total_sticky
    return MgfEstimate(
        theta=theta, phi0=s0, phi1=s1, phi2=s2, sticky_time=sticky, stick=paths[0].stick
    )


@dataclass(frozen=True)
class BarResidual:
    """Relative residuals of the stationary balance identities."""

    theta: tuple[float, float]
    sticky: float     # full identity, sticky stationary transform
    srbm: float       # interior-clock identity (boundary transforms only)


def bar_residual(theta, source, params: ModelParams, *, eps: float = 1e-12) -> BarResidual:
    """Empirical check of the two stationary balance identities at ``theta``.

    ``source`` is either a list of stored paths or a precomputed
    :class:`MgfEstimate` whose grid contains ``theta``.  Both components of
    ``theta`` must be strictly negative (the transforms are finite there).
    """
    th = np.asarray(theta, dtype=float).reshape(2)
    if not np.all(th < 0.0):
        raise ValueError("theta must be componentwise strictly negative")
    p = validate(params)
    if isinstance(source, MgfEstimate):
        est = source
        match = np.where(np.all(np.isclose(est.theta, th[None, :]), axis=1))[0]
        if match.size == 0:
            raise ValueError(f"theta {th} not on the estimate grid")
        j = int(match[0])
    else:
        est = mgf_from_paths(source, th[None, :])
        j = 0
    p0, p1, p2 = (a[j] for a in est.pooled())
    phi = p0 + p.stick[0] * p1 + p.stick[1] * p2

    psi = float(levy_exponent(th, p))
    g1 = float(th @ p.refl[:, 0])
    g2 = float(th @ p.refl[:, 1])

    lhs_full = -psi * phi
    rhs_full = p1 * (g1 - p.stick[0] * psi) + p2 * (g2 - p.stick[1] * psi)
    lhs_v0 = -psi * p0
    rhs_v0 = p1 * g1 + p2 * g2
    return BarResidual(
        theta=(float(th[0]), float(th[1])),
        sticky=abs(lhs_full - rhs_full) / (abs(lhs_full) + abs(rhs_full) + eps),
        srbm=abs(lhs_v0 - rhs_v0) / (abs(lhs_v0) + abs(rhs_v0) + eps),
    )


# ---------------------------------------------------------------------------
# streaming observers for verification pipelines
# ---------------------------------------------------------------------------

class OccupationObserver(ChunkObserver):
    """Full-resolution occupation histogram (pooled over replications)."""

    def __init__(self, extent: tuple[float, float], bins: int = 400):
        self.extent = extent
        self.bins = bins

    def begin(self, params, cfg, n_steps, z0):
        self.stick = params.stick.copy()
        self.dt = cfg.dt
        self.x_edges = np.linspace(0.0, self.extent[0], self.bins + 1)
        self.y_edges = np.linspace(0.0, self.extent[1], self.bins + 1)
        self.interior = np.zeros((self.bins, self.bins))
        self.face1 = np.zeros(self.bins)
        self.face2 = np.zeros(self.bins)

    def observe(self, t0, l0, pos, dl):
        flat = pos.reshape(-1, 2)
        h, _, _ = np.histogram2d(flat[:, 0], flat[:, 1], bins=(self.x_edges, self.y_edges))
        self.interior += h * self.dt
        d = dl.reshape(-1, 2)
        self.face1 += np.histogram(flat[:, 1], bins=self.y_edges, weights=self.stick[0] * d[:, 0])[0]
        self.face2 += np.histogram(flat[:, 0], bins=self.x_edges, weights=self.stick[1] * d[:, 1])[0]

    def finish(self, result):
        total = float(result.sticky_time.sum())
        captured = self.interior.sum() + self.face1.sum() + self.face2.sum()
        self.estimate = OccupationEstimate(
            x_edges=self.x_edges,
            y_edges=self.y_edges,
            interior=self.interior / total,
            face1=self.face1 / total,
            face2=self.face2 / total,
            overflow=float((total - captured) / total),
            total=total,
        )


class SurvivalObserver(ChunkObserver):
    """Sticky-weighted histograms of linear functionals ``<dir, Z>``.

    One histogram per (replication, direction); the associated survival
    curves and fits are built by :mod:`stickytails.fitting`.  Edges must be
    uniform on [0, hi] with a final overflow edge at +inf (the layout
    produced by :func:`stickytails.fitting.survival_edges`), so binning is
    direct index arithmetic rather than a search.
    """

    def __init__(self, directions, edges):
        self.directions = np.asarray(directions, dtype=float).reshape(-1, 2)
        self.edges = [np.asarray(e, dtype=float) for e in edges]
        if len(self.edges) != self.directions.shape[0]:
            raise ValueError("need one edge array per direction")
        self._width = []
        for e in self.edges:
            finite = e[:-1] if np.isinf(e[-1]) else e
            widths = np.diff(finite)
            if not (e[0] == 0.0 and np.isinf(e[-1]) and np.allclose(widths, widths[0])):
                raise ValueError("edges must be uniform on [0, hi] plus a final +inf edge")
            self._width.append(float(widths[0]))

    def begin(self, params, cfg, n_steps, z0):
        self.stick = params.stick.copy()
        self.dt = cfg.dt
        nrep = cfg.replications
        self.nrep = nrep
        self.hists = [np.zeros((nrep, len(e) - 1)) for e in self.edges]
        self.weight_total = np.zeros(nrep)
        self._rep_offsets = [
            (np.arange(nrep) * (len(e) - 1))[None, :] for e in self.edges
        ]

    def observe(self, t0, l0, pos, dl):
        w = self.dt + dl @ self.stick  # (C, R) sticky weight of each step
        self.weight_total += w.sum(axis=0)
        wflat = w.ravel()
        for d in range(self.directions.shape[0]):
            v = pos @ self.directions[d]  # (C, R)
            nbins = self.hists[d].shape[1]
            idx = np.minimum((v / self._width[d]).astype(np.int64), nbins - 1)
            flat = (idx + self._rep_offsets[d]).ravel()
            self.hists[d] += np.bincount(
                flat, weights=wflat, minlength=self.nrep * nbins
            ).reshape(self.nrep, nbins)


class JointExceedanceObserver(ChunkObserver):
    """Sticky-weighted joint and marginal exceedance masses at fixed points."""

    def __init__(self, points):
        self.points = np.asarray(points, dtype=float).reshape(-1, 2)

    def begin(self, params, cfg, n_steps, z0):
        nrep = cfg.replications
        npts = self.points.shape[0]
        self.stick = params.stick.copy()
        self.dt = cfg.dt
        self.joint = np.zeros((nrep, npts))
        self.first = np.zeros((nrep, npts))
        self.second = np.zeros((nrep, npts))
        self.weight_total = np.zeros(nrep)

    def observe(self, t0, l0, pos, dl):
        w = self.dt + dl @ self.stick
        self.weight_total += w.sum(axis=0)
        for j, (a, b) in enumerate(self.points):
            m1 = pos[:, :, 0] > a
            m2 = pos[:, :, 1] > b
            self.joint[:, j] += (w * (m1 & m2)).sum(axis=0)
            self.first[:, j] += (w * m1).sum(axis=0)
            self.second[:, j] += (w * m2).sum(axis=0)


class BlockMaximaObserver(ChunkObserver):
    """Componentwise path maxima over consecutive sticky-time blocks.

    A block covers sticky duration ``block_len``; the maximum of the sticky
    process over a block equals the maximum of the reflected path over the
    matching SRBM interval (the clock change is a continuous onto
    reparametrization), so maxima are taken over raw step positions between
    clock boundary crossings.  Only completed blocks are emitted.
    """

    def __init__(self, block_len: float, max_blocks_per_rep: int | None = None):
        self.block_len = float(block_len)
        self.max_blocks = max_blocks_per_rep

    def begin(self, params, cfg, n_steps, z0):
        nrep = cfg.replications
        self.stick = params.stick.copy()
        self.dt = cfg.dt
        self.cur_block = np.zeros(nrep, dtype=np.int64)
        self.cur_max = np.full((nrep, 2), -np.inf)
        self.maxima = [[] for _ in range(nrep)]

    def observe(self, t0, l0, pos, dl):
        c, nrep, _ = pos.shape
        s = t0 + self.dt * np.arange(1, c + 1)[:, None] + (l0[None, :, :] + np.cumsum(dl, axis=0)) @ self.stick
        end_block = np.floor_divide(s[-1], self.block_len).astype(np.int64)
        crossing = end_block != self.cur_block
        # common path: no block boundary inside the chunk for this replication
        if not np.all(crossing):
            quiet = ~crossing
            chunk_max = pos.max(axis=0)
            self.cur_max[quiet] = np.maximum(self.cur_max[quiet], chunk_max[quiet])
        for rep in np.nonzero(crossing)[0]:
            if self.max_blocks is not None and len(self.maxima[rep]) >= self.max_blocks:
                continue
            col = s[:, rep]
            start = 0
            truncated = False
            for b in range(self.cur_block[rep], end_block[rep]):
                cut = int(np.searchsorted(col, (b + 1) * self.block_len, side="right"))
                if cut > start:
                    m = pos[start:cut, rep, :].max(axis=0)
                    np.maximum(self.cur_max[rep], m, out=self.cur_max[rep])
                self.maxima[rep].append(self.cur_max[rep].copy())
                self.cur_max[rep] = -np.inf
                start = cut
                if self.max_blocks is not None and len(self.maxima[rep]) >= self.max_blocks:
                    truncated = True
                    break
            if not truncated and start < c:
                m = pos[start:, rep, :].max(axis=0)
                np.maximum(self.cur_max[rep], m, out=self.cur_max[rep])
            self.cur_block[rep] = end_block[rep]

    def finish(self, result):
        # fixed merge order: replication index, then block index
        collected = []
        for rep in range(len(self.maxima)):
            collected.extend(self.maxima[rep])
        self.block_maxima = (
            np.array(collected) if collected else np.empty((0, 2))
        )


class TraceObserver(ChunkObserver):
    """Binary per-replication trace dump.

    Layout: 8-byte magic, u32 version, f64 dt, f64 horizon, u64 seed,
    u32 replication index, u32 record stride (in steps), then fixed-width
    f64 records ``(t, z1, z2, L1, L2)``; the record count is implied by the
    file size.
    """

    def __init__(self, directory, stride: int = 100):
        self.directory = Path(directory)
        self.stride = int(stride)

    def begin(self, params, cfg, n_steps, z0):
        self.directory.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self._files = []
        for rep in range(cfg.replications):
            fh = open(self.directory / f"trace_rep{rep:03d}.bin", "wb")
            fh.write(TRACE_MAGIC)
            fh.write(
                struct.pack(
                    "<IddQII",
                    TRACE_VERSION,
                    cfg.dt,
                    cfg.horizon,
                    cfg.seed % 2**64,
                    rep,
                    self.stride,
                )
            )
            self._files.append(fh)
        self._step = 0

    def observe(self, t0, l0, pos, dl):
        c = pos.shape[0]
        offset = (-self._step) % self.stride
        idx = np.arange(offset, c, self.stride)
        if idx.size:
            t = t0 + (idx + 1) * self.cfg.dt
            lcum = l0[None, :, :] + np.cumsum(dl, axis=0)[idx]
            for rep, fh in enumerate(self._files):
                rec = np.column_stack(
                    [t, pos[idx, rep, 0], pos[idx, rep, 1], lcum[:, rep, 0], lcum[:, rep, 1]]
                )
                rec.astype("<f8").tofile(fh)
        self._step += c

    def finish(self, result):
        for fh in self._files:
            fh.close()


def read_trace(path) -> dict:
    """Parse a binary trace file written by :class:`TraceObserver`."""
    raw = Path(path).read_bytes()
    if raw[:8] != TRACE_MAGIC:
        raise ValueError("not a trace file")
    version, dt, horizon, seed, rep, stride = struct.unpack("<IddQII", raw[8:44])
    records = np.frombuffer(raw[44:], dtype="<f8").reshape(-1, 5)
    return {
        "version": version,
        "dt": dt,
        "horizon": horizon,
        "seed": seed,
        "replication": rep,
        "stride": stride,
        "records": records,
    }
