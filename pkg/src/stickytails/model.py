"""Model data and derived scalar constants for the 2-d sticky SRBM.

A model is the tuple ``(mu, sigma, refl, stick)``:

* ``mu``    -- drift of the free Brownian motion (length 2),
* ``sigma`` -- its covariance matrix (2x2, symmetric positive definite),
* ``refl``  -- reflection matrix R pushing the path back into the orthant,
* ``stick`` -- stickiness weights u > 0 multiplying the boundary local
  times inside the clock ``S(t) = t + u1*L1(t) + u2*L2(t)``.

Stability of the reflected motion requires R to be non-singular with
``R^{-1} mu < 0``; in two dimensions this is equivalent to the explicit
inequalities checked by :func:`validate` (positive diagonal, positive
determinant, and the two drift conditions).  Both formulations are
evaluated and required to agree as an internal consistency assertion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DEGENERATE_CORRELATION,
    NON_POSITIVE_DEFINITE_SIGMA,
    NON_POSITIVE_STICKINESS,
    UNSTABLE_REFLECTION,
    ModelValidationError,
    SingularSystem,
)

#: margin guarding strict inequalities against boundary-of-stability inputs
DEFAULT_STABILITY_MARGIN = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Validated parameter tuple of a 2-d sticky SRBM.

    Construct via :func:`validate`; the constructor itself does not check
    anything so that invalid tuples can be built for error-path tests.
    """

    mu: np.ndarray
    sigma: np.ndarray
    refl: np.ndarray
    stick: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float).reshape(2))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float).reshape(2, 2))
        object.__setattr__(self, "refl", np.asarray(self.refl, dtype=float).reshape(2, 2))
        object.__setattr__(self, "stick", np.asarray(self.stick, dtype=float).reshape(2))

    @property
    def correlation(self) -> float:
        s = self.sigma
        return float(s[0, 1] / np.sqrt(s[0, 0] * s[1, 1]))

    def swapped(self) -> "ModelParams":
        """The same model with coordinates 1 and 2 interchanged.

        Swapping conjugates every matrix by the permutation, so the
        reflection matrix swaps both rows and columns.  All face-1
        quantities of the original model are face-2 quantities of the
        swapped model, which is how the mirrored formulas are evaluated.
        """
        p = np.array([[0.0, 1.0], [1.0, 0.0]])
        return ModelParams(
            mu=self.mu[::-1].copy(),
            sigma=p @ self.sigma @ p,
            refl=p @ self.refl @ p,
            stick=self.stick[::-1].copy(),
        )

    def as_dict(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "R": self.refl.tolist(),
            "u": self.stick.tolist(),
        }


@dataclass(frozen=True)
class LocalTimeRates:
    """Expected clock value and local times over one unit of sticky time.

    ``e_T1`` is the mean inverse-clock value E[T(1)] (a time fraction in
    (0, 1]); ``e_L1``/``e_L2`` are the mean face local times E[L_i(T(1))].
    They always satisfy the accounting identity
    ``e_T1 + u1*e_L1 + u2*e_L2 = 1``.
    """

    e_T1: float
    e_L1: float
    e_L2: float
    #: closed-form cross-check values and their relative discrepancies
    cross_check: dict = field(default_factory=dict, compare=False)

    def as_tuple(self):
        return (self.e_T1, self.e_L1, self.e_L2)


def _stability_violations(mu, refl, margin):
    """The explicit 2-d stability inequalities, as a list of messages."""
    r = refl
    out = []
    if not (r[0, 0] > margin and r[1, 1] > margin):
        out.append("diagonal of R must be strictly positive")
    if not (r[0, 0] * r[1, 1] - r[0, 1] * r[1, 0] > margin):
        out.append("det R must be strictly positive")
    if not (r[1, 1] * mu[0] - r[0, 1] * mu[1] < -margin):
        out.append("r22*mu1 - r12*mu2 must be strictly negative")
    if not (r[0, 0] * mu[1] - r[1, 0] * mu[0] < -margin):
        out.append("r11*mu2 - r21*mu1 must be strictly negative")
    return out


def validate(params: ModelParams, *, margin: float = DEFAULT_STABILITY_MARGIN) -> ModelParams:
    """Check every standing assumption; return ``params`` unchanged if all hold.

    Raises :class:`ModelValidationError` carrying the *full* list of violated
    constraints.  Pure and idempotent: validating a validated model is a
    no-op.
    """
    p = ModelParams(params.mu, params.sigma, params.refl, params.stick) \
        if not isinstance(params, ModelParams) else params
    violations = []

    sig = p.sigma
    if not np.allclose(sig, sig.T, rtol=0.0, atol=1e-12):
        violations.append((NON_POSITIVE_DEFINITE_SIGMA, "sigma must be symmetric"))
    eigs = np.linalg.eigvalsh(0.5 * (sig + sig.T))
    if not np.all(eigs > margin):
        violations.append(
            (NON_POSITIVE_DEFINITE_SIGMA, f"sigma eigenvalues must be positive, got {eigs.tolist()}")
        )
    else:
        rho = p.correlation
        if not rho < 1.0 - margin:
            violations.append((DEGENERATE_CORRELATION, f"correlation rho={rho} must be < 1"))

    stab = _stability_violations(p.mu, p.refl, margin)
    for msg in stab:
        violations.append((UNSTABLE_REFLECTION, msg))

    if not np.all(p.stick > margin):
        violations.append((NON_POSITIVE_STICKINESS, "stickiness weights must be strictly positive"))

    if violations:
        raise ModelValidationError(violations)

    # Internal consistency: the explicit inequalities are equivalent to
    # R non-singular with R^{-1} mu < 0.  Both must agree.
    general = np.all(np.linalg.solve(p.refl, p.mu) < 0.0)
    assert general, "explicit 2-d stability inequalities disagree with R^{-1} mu < 0"
    return p


def make_model(mu, sigma, refl, stick, *, margin: float = DEFAULT_STABILITY_MARGIN) -> ModelParams:
    """Build and validate a model in one call."""
    return validate(ModelParams(mu, sigma, refl, stick), margin=margin)


def _corollary_closed_forms(p: ModelParams) -> dict:
    """Closed-form expressions for E[L_i(T(1))] published alongside the
    balance equations, evaluated verbatim for cross-checking.

    The second display appears to carry a typo (one factor repeats
    ``mu2*u1`` where the mirrored factor ``mu1*u2`` is expected); both the
    verbatim form and the repaired form are reported.  The linear system is
    authoritative either way.
    """
    mu1, mu2 = p.mu
    (r11, r12), (r21, r22) = p.refl
    u1, u2 = p.stick

    num1 = mu1 * (r22 - mu2 * u2) - mu2 * (r12 - mu1 * u2)
    den1 = (r21 - mu2 * u1) * (r12 - u2 * mu1) - (r11 - mu1 * u1) * (r22 - mu2 * u2)
    first = num1 / den1 if den1 != 0.0 else np.nan

    num2 = mu1 * (r21 - mu2 * u1) - mu2 * (r11 - mu1 * u1)
    den2_verbatim = (r22 - mu2 * u2) * (r11 - mu1 * u1) - (r12 - mu2 * u1) * (r21 - mu2 * u1)
    den2_repaired = (r22 - mu2 * u2) * (r11 - mu1 * u1) - (r12 - mu1 * u2) * (r21 - mu2 * u1)
    second = num2 / den2_verbatim if den2_verbatim != 0.0 else np.nan
    second_repaired = num2 / den2_repaired if den2_repaired != 0.0 else np.nan

    return {
        "e_L1_closed_form": float(first),
        "e_L2_closed_form_verbatim": float(second),
        "e_L2_closed_form_repaired": float(second_repaired),
    }


def local_time_rates(params: ModelParams) -> LocalTimeRates:
    """Solve the exact 3x3 balance system for (E[T(1)], E[L1], E[L2]).

    The equations are the two drift balances
    ``-mu_i E[T(1)] = sum_j E[L_j] r_{ij}`` and the clock accounting
    identity ``E[T(1)] + u1 E[L1] + u2 E[L2] = 1``.  The published
    closed forms are evaluated as cross-checks and their relative
    discrepancies recorded in ``cross_check`` (not asserted: the second
    display disagrees with the balance system on asymmetric models).
    """
    p = validate(params)
    mu, r, u = p.mu, p.refl, p.stick
    # unknowns ordered (E[T1], E[L1], E[L2])
    a = np.array(
        [
            [mu[0], r[0, 0], r[0, 1]],
            [mu[1], r[1, 0], r[1, 1]],
            [1.0, u[0], u[1]],
        ]
    )
    b = np.array([0.0, 0.0, 1.0])
    try:
        sol = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise SingularSystem(str(exc)) from exc
    e_t, e_l1, e_l2 = (float(v) for v in sol)

    cross = _corollary_closed_forms(p)
    cross["rel_discrepancy_e_L1"] = abs(cross["e_L1_closed_form"] - e_l1) / (1.0 + abs(e_l1))
    cross["rel_discrepancy_e_L2_verbatim"] = abs(
        cross["e_L2_closed_form_verbatim"] - e_l2
    ) / (1.0 + abs(e_l2))
    cross["rel_discrepancy_e_L2_repaired"] = abs(
        cross["e_L2_closed_form_repaired"] - e_l2
    ) / (1.0 + abs(e_l2))

    rates = LocalTimeRates(e_T1=e_t, e_L1=e_l1, e_L2=e_l2, cross_check=cross)
    if not (0.0 < e_t <= 1.0 and e_l1 >= 0.0 and e_l2 >= 0.0):  # pragma: no cover
        raise SingularSystem(f"balance system produced out-of-range rates {rates.as_tuple()}")
    return rates


def levy_exponent(theta, params: ModelParams):
    """Levy exponent of the driving Brownian motion:
    ``Psi(theta) = <theta, mu> + 0.5 <theta, Sigma theta>``.

    Accepts a single pair or an array of shape (..., 2).
    """
    th = np.asarray(theta, dtype=float)
    mu, sig = params.mu, params.sigma
    lin = th @ mu
    quad = np.einsum("...i,ij,...j->...", th, sig, th)
    return lin + 0.5 * quad
