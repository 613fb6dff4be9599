"""Kernel of the stationary functional equation and its algebraic geometry.

The Levy exponent of the driving Brownian motion,

    gamma(x, y) = x*mu1 + y*mu2 + 0.5*S11*x^2 + S12*x*y + 0.5*S22*y^2,

is a quadratic in either variable.  Viewed as a quadratic in ``y`` it has
coefficients ``a = S22/2``, ``b(x) = mu2 + S12*x``, ``c(x) = mu1*x +
S11*x^2/2``; the mirrored form in ``x`` uses ``a~ = S11/2``,
``b~(y) = S12*y + mu1``, ``c~(y) = S22*y^2/2 + mu2*y``.  Its zero set is an
ellipse (the correlation is < 1), carrying two real algebraic branches

    Y0(x) <= Y1(x)   on [x1, x2],      X0(y) <= X1(y)   on [y1, y2],

where ``x1 <= 0 < x2`` are the zeros of the discriminant ``D1 = b^2 - 4ac``
and likewise ``y1 <= 0 < y2`` for ``D2``.  All evaluations here are real:
every downstream decision needs only real values on ``[0, x2]``.

The boundary weight polynomials are ``gamma1(x, y) = x*r11 + y*r21`` and
``gamma2(x, y) = x*r12 + y*r22`` (columns of the reflection matrix).  The
dominant-singularity candidates are

* ``x_star``: the root of ``gamma2(z, Y0(z)) = 0`` on ``(0, x2]``, which
  exists iff ``gamma2(x2, Y0(x2)) >= 0`` (+inf otherwise);
* ``y_star``: the mirrored root of ``gamma1(X0(y), y) = 0`` on ``(0, y2]``;
* ``x_tilde``: the induced candidate ``X1(y_star)``, accepted only when it
  lies on the lower branch, i.e. ``Y0(x_tilde) = y_star`` (+inf otherwise).

Published closed forms for ``x2``, ``x_star`` and ``y_star`` contain typos
(verified on hand-solvable models); they are evaluated verbatim and in
repaired form as cross-checks only, never used for the returned values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import BracketFailure, DegenerateDiscriminant, OutsideBranchCut
from .model import ModelParams, validate

#: relative tolerance accepting the branch-membership condition Y0(x~) = y*
DEFAULT_ACCEPT_TOL = 1e-8

#: grid density used to bracket sign changes before root polishing
_SCAN_POINTS = 512


@dataclass(frozen=True)
class KernelForm:
    """Coefficients of the kernel as a quadratic in y and, mirrored, in x."""

    a: float
    a_tilde: float
    mu: np.ndarray
    sigma: np.ndarray

    @classmethod
    def from_params(cls, params: ModelParams) -> "KernelForm":
        sig = params.sigma
        return cls(a=0.5 * sig[1, 1], a_tilde=0.5 * sig[0, 0], mu=params.mu, sigma=sig)

    def b(self, x):
        return self.mu[1] + self.sigma[0, 1] * np.asarray(x, dtype=float)

    def c(self, x):
        x = np.asarray(x, dtype=float)
        return self.mu[0] * x + 0.5 * self.sigma[0, 0] * x * x

    def b_tilde(self, y):
        return self.mu[0] + self.sigma[0, 1] * np.asarray(y, dtype=float)

    def c_tilde(self, y):
        y = np.asarray(y, dtype=float)
        return self.mu[1] * y + 0.5 * self.sigma[1, 1] * y * y

    def disc_x(self, x):
        """D1(x) = b(x)^2 - 4 a c(x)."""
        return self.b(x) ** 2 - 4.0 * self.a * self.c(x)

    def disc_y(self, y):
        """D2(y) = b~(y)^2 - 4 a~ c~(y)."""
        return self.b_tilde(y) ** 2 - 4.0 * self.a_tilde * self.c_tilde(y)


@dataclass(frozen=True)
class BranchPoints:
    """Real zeros of the two discriminants, ordered x1 <= 0 < x2."""

    x1: float
    x2: float
    y1: float
    y2: float
    #: verbatim/repaired published closed forms for x2 with discrepancies
    cross_check: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class SingularityCandidates:
    """Dominant-singularity candidates for the face-2 boundary transform.

    Extended reals: ``math.inf`` encodes an absent candidate.  The mirrored
    (face-1) triple is obtained by computing this object on
    ``params.swapped()``.
    """

    x_star: float
    y_star: float
    x_tilde: float
    x2: float
    y2: float
    cross_check: dict = field(default_factory=dict, compare=False)

    def finite_values(self):
        return [v for v in (self.x_star, self.x_tilde, self.x2) if math.isfinite(v)]


def kernel_eval(x, y, params: ModelParams):
    """gamma(x, y), the Levy exponent as an explicit bilinear-quadratic form."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mu, sig = params.mu, params.sigma
    val = (
        x * mu[0]
        + y * mu[1]
        + 0.5 * sig[0, 0] * x * x
        + sig[0, 1] * x * y
        + 0.5 * sig[1, 1] * y * y
    )
    return val if val.shape else float(val)


def face_polys(x, y, params: ModelParams):
    """(gamma1, gamma2) = (<(x,y), R column 1>, <(x,y), R column 2>)."""
    r = params.refl
    g1 = x * r[0, 0] + y * r[1, 0]
    g2 = x * r[0, 1] + y * r[1, 1]
    return g1, g2


def _quad_roots(lead, lin_half, const):
    """Ordered real roots of lead*t^2 + 2*lin_half*t + const with lead < 0."""
    disc = lin_half * lin_half - lead * const
    if disc < 0.0:  # pragma: no cover - impossible for validated models
        raise DegenerateDiscriminant("discriminant quadratic has no real roots")
    s = math.sqrt(disc)
    lo = (-lin_half + s) / lead
    hi = (-lin_half - s) / lead
    return (lo, hi) if lo <= hi else (hi, lo)


def branch_points(params: ModelParams, *, lead_tol: float = 1e-14) -> BranchPoints:
    """Zeros of D1 and D2 via the quadratic formula, ordered per the
    interior-positivity property (D positive strictly inside, negative
    outside).

    The published closed form for ``x2`` (stray factor and a suspected
    ``S11*S22 -> S11*S12`` typo inside its radicand) is evaluated verbatim
    and in repaired form; discrepancies are recorded, not raised.
    """
    p = validate(params)
    mu, sig = p.mu, p.sigma
    lead = sig[0, 1] ** 2 - sig[0, 0] * sig[1, 1]  # = -det(sigma) < 0
    if not lead < -lead_tol * (1.0 + sig[0, 0] * sig[1, 1]):
        raise DegenerateDiscriminant(
            f"leading coefficient S12^2 - S11*S22 = {lead} is not negative"
        )
    x1, x2 = _quad_roots(lead, sig[0, 1] * mu[1] - sig[1, 1] * mu[0], mu[1] ** 2)
    y1, y2 = _quad_roots(lead, sig[0, 1] * mu[0] - sig[0, 0] * mu[1], mu[0] ** 2)

    # published closed form, verbatim then with the radicand repaired
    det = sig[0, 0] * sig[1, 1] - sig[0, 1] ** 2
    lin = sig[0, 1] * mu[1] - sig[1, 1] * mu[0]
    rad_verbatim = lin * lin - (sig[0, 1] ** 2 - sig[0, 0] * sig[0, 1]) * mu[1] ** 2
    rad_repaired = lin * lin + det * mu[1] ** 2
    x2_verbatim = (
        (2.0 * lin + math.sqrt(rad_verbatim)) / (2.0 * det) if rad_verbatim >= 0.0 else math.nan
    )
    x2_repaired = (lin + math.sqrt(rad_repaired)) / det
    cross = {
        "x2_closed_form_verbatim": float(x2_verbatim),
        "x2_closed_form_repaired": float(x2_repaired),
        "rel_discrepancy_verbatim": abs(x2_verbatim - x2) / (1.0 + abs(x2)),
        "rel_discrepancy_repaired": abs(x2_repaired - x2) / (1.0 + abs(x2)),
    }

    bp = BranchPoints(x1=float(x1), x2=float(x2), y1=float(y1), y2=float(y2), cross_check=cross)
    if not (bp.x1 <= 0.0 < bp.x2 and bp.y1 <= 0.0 < bp.y2):  # pragma: no cover
        raise DegenerateDiscriminant(f"branch points out of order: {bp}")
    return bp


def _clamped_sqrt(disc, scale, tol=1e-9):
    """sqrt of a discriminant, clamping round-off negatives near branch points."""
    d = np.asarray(disc, dtype=float)
    bad = d < -tol * scale
    if np.any(bad):
        raise OutsideBranchCut(
            f"discriminant negative at {np.count_nonzero(bad)} point(s); "
            "branches are real only between the branch points"
        )
    return np.sqrt(np.maximum(d, 0.0))


def y_branch(x, which: int, params: ModelParams):
    """Algebraic branch Y0 (which=0) or Y1 (which=1) of the kernel in y.

    Requires D1(x) >= 0, i.e. x in [x1, x2]; raises OutsideBranchCut
    beyond round-off otherwise.  Vectorized over x.
    """
    if which not in (0, 1):
        raise ValueError("which must be 0 or 1")
    kf = KernelForm.from_params(params)
    x = np.asarray(x, dtype=float)
    root = _clamped_sqrt(kf.disc_x(x), 1.0 + x * x)
    val = (-kf.b(x) - root) / (2.0 * kf.a) if which == 0 else (-kf.b(x) + root) / (2.0 * kf.a)
    return val if val.shape else float(val)


def x_branch(y, which: int, params: ModelParams):
    """Mirror image of :func:`y_branch`: branches X0 <= X1 of the kernel in x."""
    if which not in (0, 1):
        raise ValueError("which must be 0 or 1")
    kf = KernelForm.from_params(params)
    y = np.asarray(y, dtype=float)
    root = _clamped_sqrt(kf.disc_y(y), 1.0 + y * y)
    val = (
        (-kf.b_tilde(y) - root) / (2.0 * kf.a_tilde)
        if which == 0
        else (-kf.b_tilde(y) + root) / (2.0 * kf.a_tilde)
    )
    return val if val.shape else float(val)


def _bracketed_root(g, hi, *, maxiter=200):
    """Smallest root of ``g`` on (0, hi], assuming g <= 0 near 0+ and g(hi) >= 0.

    A combined geometric/uniform scan locates the first sign change
    (guaranteed by the sign condition at ``hi``); the bracket is polished
    by Brent's method (bisection safeguarded secant/inverse-quadratic
    steps).
    """
    grid = np.unique(
        np.concatenate(
            [
                hi * np.geomspace(1e-9, 0.5, 64),
                np.linspace(hi / _SCAN_POINTS, hi, _SCAN_POINTS),
            ]
        )
    )
    vals = np.asarray(g(grid), dtype=float)
    crossings = np.where((vals[:-1] < 0.0) & (vals[1:] >= 0.0))[0]
    if crossings.size == 0:
        raise BracketFailure(
            "sign condition promises a root but no negative-to-nonnegative "
            "crossing was found on the scan grid"
        )
    j = int(crossings[0])
    if vals[j + 1] == 0.0:
        return float(grid[j + 1])
    root = brentq(g, grid[j], grid[j + 1], maxiter=maxiter, xtol=1e-15, rtol=1e-14)
    return float(root)


def find_x_star(params: ModelParams, bp: BranchPoints | None = None) -> float:
    """Root of ``g(z) = gamma2(z, Y0(z))`` on (0, x2], or +inf.

    Existence is decided by the sign condition ``g(x2) >= 0``; under it the
    root is unique (``g`` is convex, nonpositive near the origin).
    """
    p = validate(params)
    bp = bp or branch_points(p)

    def g(z):
        return face_polys(z, y_branch(z, 0, p), p)[1]

    if g(bp.x2) < 0.0:
        return math.inf
    return _bracketed_root(g, bp.x2)


def find_y_star_x_tilde(
    params: ModelParams,
    bp: BranchPoints | None = None,
    *,
    accept_tol: float = DEFAULT_ACCEPT_TOL,
) -> tuple[float, float]:
    """The mirrored pole ``y_star`` and the induced candidate ``x_tilde``.

    ``y_star`` is the root of ``h(y) = gamma1(X0(y), y)`` on (0, y2], which
    is exactly the mirrored ``x_star`` computation on the coordinate-swapped
    model.  The candidate ``X1(y_star)`` is accepted as ``x_tilde`` only if
    it lies on the lower y-branch, ``Y0(x_tilde) = y_star`` within
    ``accept_tol`` relative; otherwise ``x_tilde`` is +inf.
    """
    p = validate(params)
    y_star = find_x_star(p.swapped())
    if not math.isfinite(y_star):
        return math.inf, math.inf
    cand = x_branch(y_star, 1, p)
    branch_val = y_branch(cand, 0, p)
    accepted = abs(branch_val - y_star) <= accept_tol * (1.0 + abs(y_star))
    return y_star, (float(cand) if accepted else math.inf)


def _closed_form_cross_checks(p: ModelParams, x_star: float, y_star: float) -> dict:
    """Verbatim and repaired published closed forms for x_star and y_star.

    The verbatim x_star formula uses ``r11`` where the reduction of
    ``gamma2(x, y) = 0`` onto the kernel gives ``r12``; the verbatim y_star
    formula has ``mu1`` and ``mu2`` interchanged.  Repairs verified on
    hand-solved models; recorded for the report, never used for values.
    """
    mu1, mu2 = p.mu
    (r11, r12), (r21, r22) = p.refl
    s11, s12, s22 = p.sigma[0, 0], p.sigma[0, 1], p.sigma[1, 1]

    den_x = s22 * r12**2 - 2.0 * r11 * r22 * s12 + r22**2 * s11
    den_x_rep = s22 * r12**2 - 2.0 * r12 * r22 * s12 + r22**2 * s11
    x_star_verbatim = (2.0 * r11 * r22 * mu2 - 2.0 * r22**2 * mu1) / den_x if den_x else math.nan
    x_star_repaired = (
        (2.0 * r12 * r22 * mu2 - 2.0 * r22**2 * mu1) / den_x_rep if den_x_rep else math.nan
    )

    den_y = r21**2 * s11 - 2.0 * r11 * r21 * s12 + s22 * r11**2
    y_star_verbatim = (2.0 * r11 * r21 * mu2 - 2.0 * r11**2 * mu1) / den_y if den_y else math.nan
    y_star_repaired = (2.0 * r11 * r21 * mu1 - 2.0 * r11**2 * mu2) / den_y if den_y else math.nan

    def rel(a, b):
        if not (math.isfinite(a) and math.isfinite(b)):
            return math.nan
        return abs(a - b) / (1.0 + abs(b))

    return {
        "x_star_closed_form_verbatim": x_star_verbatim,
        "x_star_closed_form_repaired": x_star_repaired,
        "x_star_rel_discrepancy_verbatim": rel(x_star_verbatim, x_star),
        "x_star_rel_discrepancy_repaired": rel(x_star_repaired, x_star),
        "y_star_closed_form_verbatim": y_star_verbatim,
        "y_star_closed_form_repaired": y_star_repaired,
        "y_star_rel_discrepancy_verbatim": rel(y_star_verbatim, y_star),
        "y_star_rel_discrepancy_repaired": rel(y_star_repaired, y_star),
    }


def singularity_candidates(
    params: ModelParams, *, accept_tol: float = DEFAULT_ACCEPT_TOL
) -> SingularityCandidates:
    """All face-2 dominant-singularity candidates plus closed-form checks."""
    p = validate(params)
    bp = branch_points(p)
    x_star = find_x_star(p, bp)
    y_star, x_tilde = find_y_star_x_tilde(p, bp, accept_tol=accept_tol)
    return SingularityCandidates(
        x_star=x_star,
        y_star=y_star,
        x_tilde=x_tilde,
        x2=bp.x2,
        y2=bp.y2,
        cross_check={**bp.cross_check, **_closed_form_cross_checks(p, x_star, y_star)},
    )
