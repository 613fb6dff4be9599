import math

import numpy as np
import pytest

from stickytails import (
    DirectionalQuery,
    classify_boundary,
    classify_direction,
    classify_marginal,
    joint_tail_params,
    make_model,
    singularity_candidates,
)
from stickytails.classify import (
    TailAsymptotic,
    boundary_regime,
    direction_regime,
    marginal_regime,
    substochastic_check,
)
from stickytails.errors import (
    InconsistentSubcase,
    ReflectionNotSubstochastic,
    UnreachableRegime,
)

from conftest import random_stable_model

INF = math.inf


class TestBoundaryRegime:
    """Case table on raw candidates, including tie rows that need no model."""

    def test_simple_pole(self):
        r = boundary_regime(2.0, INF, 2.414)
        assert (r.alpha, r.p) == (2.0, 0.0)
        assert r.dominant == "x_star"

    def test_induced_pole(self):
        r = boundary_regime(INF, 1.7, 2.414)
        assert (r.alpha, r.p) == (1.7, 0.0)
        assert r.dominant == "x_tilde"

    def test_double_pole_tie(self):
        r = boundary_regime(1.8, 1.8, 2.414)
        assert (r.alpha, r.p) == (1.8, 1.0)

    def test_pole_at_branch_point(self):
        r = boundary_regime(2.414, INF, 2.414)
        assert (r.alpha, r.p) == (2.414, -0.5)
        r = boundary_regime(INF, 2.414, 2.414)
        assert r.p == -0.5

    def test_branch_point_alone(self):
        r = boundary_regime(3.0, INF, 2.414)
        assert (r.alpha, r.p) == (2.414, -1.5)
        assert r.dominant == "x2"

    def test_triple_coincidence(self):
        r = boundary_regime(2.414, 2.414, 2.414)
        assert (r.alpha, r.p) == (2.414, 0.0)

    def test_tie_tolerance_is_relative(self):
        r = boundary_regime(2.0, 2.0 * (1 + 1e-12), 3.0)
        assert r.p == 1.0  # within eps_eq, treated as a tie
        r = boundary_regime(2.0, 2.0 * (1 + 1e-4), 3.0)
        assert r.p == 0.0  # clearly separated


class TestMarginalRegime:
    def test_subcase_rows(self):
        # 1-1: double pole below the section zero
        assert marginal_regime(1.5, 1.5, 3.0, 2.0, None, None).p == 1.0
        # 1-2: section zero below the (tied) poles
        assert marginal_regime(2.5, 2.5, 3.0, 1.5, None, None).p == 0.0
        # 1-3: simple pole, whichever side attains
        assert marginal_regime(1.5, INF, 3.0, 2.0, None, None).p == 0.0
        assert marginal_regime(2.5, INF, 3.0, 1.5, None, None).p == 0.0
        # 2-1 / 2-2: pole ties the section zero, branch test decides
        assert marginal_regime(2.0, INF, 3.0, 2.0, 0.0, 1.3).p == 0.0
        assert marginal_regime(2.0, INF, 3.0, 2.0, -1.3, 0.0).p == 1.0
        # 3-1: everything at the branch point
        assert marginal_regime(3.0, INF, 3.0, 3.0, None, None).p == 0.0
        # 3-2: section zero at the branch point, poles above
        assert marginal_regime(4.0, INF, 3.0, 3.0, None, None).p == 0.0
        # 3-3 / 3-4: pole at the branch point, section zero above
        assert marginal_regime(3.0, INF, 3.0, 4.0, None, None).p == -0.5
        assert marginal_regime(3.0, 3.0, 3.0, 4.0, None, None).p == 0.0
        # 4: branch point strictly below everything
        assert marginal_regime(4.0, INF, 3.0, 5.0, None, None).p == -1.5

    def test_alpha_is_min_of_candidates(self):
        r = marginal_regime(2.5, INF, 3.0, 1.5, None, None)
        assert r.alpha == 1.5
        r = marginal_regime(4.0, INF, 3.0, 5.0, None, None)
        assert r.alpha == 3.0

    def test_inconsistent_branch_test_raises(self):
        with pytest.raises(InconsistentSubcase):
            marginal_regime(2.0, INF, 3.0, 2.0, 0.5, 1.3)
        with pytest.raises(InconsistentSubcase):
            marginal_regime(2.0, INF, 3.0, 2.0, 0.0, 0.0)

    def test_tilde_tying_section_zero_is_unreachable(self):
        with pytest.raises(UnreachableRegime):
            marginal_regime(2.6, 2.0, 3.0, 2.0, 0.0, 1.0)


class TestDirectionRegime:
    def test_subcase_rows(self):
        u1 = u2 = 1.0
        # 1-1 double pole below section zero
        assert direction_regime(1.5, 1.5, 3.0, 2.0, u1, u2, None, None).p == 1.0
        # 1-2 section zero below the tied poles
        assert direction_regime(2.5, 2.5, 3.0, 1.5, u1, u2, None, None).p == 0.0
        # 1-3 simple pole
        assert direction_regime(1.5, INF, 3.0, 2.0, u1, u2, None, None).p == 0.0
        # 2-1 / 2-2: pole ties the section zero on the kernel section
        assert direction_regime(2.0, INF, 3.0, 2.0, u1, u2, 2.0, 3.1, None).p == 0.0
        assert direction_regime(2.0, INF, 3.0, 2.0, u1, u2, -1.0, 2.0, None).p == 1.0
        # 3-2 section zero at the scaled branch point
        assert direction_regime(4.0, INF, 3.0, 3.0, u1, u2, None, None).p == 0.0
        # 3-3 / 3-4
        assert direction_regime(3.0, INF, 3.0, 4.0, u1, u2, None, None).p == -0.5
        assert direction_regime(3.0, 3.0, 3.0, 4.0, u1, u2, None, None).p == 0.0
        # 4 branch point
        assert direction_regime(4.0, INF, 3.0, 5.0, u1, u2, None, None).p == -1.5

    def test_scaling_by_direction(self):
        r = direction_regime(2.0, INF, 3.0, 5.0, 0.5, 1.0, None, None)
        assert r.alpha == 4.0  # x_star / u1

    def test_eliminated_triple_tie_raises(self):
        with pytest.raises(UnreachableRegime):
            direction_regime(3.0, INF, 3.0, 3.0, 1.0, 1.0, None, None)


class TestClassifyModels:
    def test_boundary_reference_models(self, m0, m1):
        r = classify_boundary(2, m0)
        assert (r.alpha, r.p) == (pytest.approx(2.0, rel=1e-9), 0.0)
        r = classify_boundary(1, m1)
        assert (r.alpha, r.p) == (pytest.approx(4.0, rel=1e-9), 0.0)

    def test_marginal_reference_models(self, m0, m1):
        r = classify_marginal(1, m0)
        assert (r.alpha, r.p) == (pytest.approx(2.0, rel=1e-9), 0.0)
        r = classify_marginal(2, m1)
        assert (r.alpha, r.p) == (pytest.approx(4.0, rel=1e-9), 0.0)

    def test_direction_reference_model(self, m1):
        r = classify_direction(DirectionalQuery([1.0, 1.0]), m1)
        assert (r.alpha, r.p) == (pytest.approx(2.0, rel=1e-9), 0.0)
        assert "1-3" in r.regime

    def test_direction_equal_rates_uses_max_exponent(self, m0):
        # symmetric model along the diagonal: both scaled faces tie and the
        # section zero coincides with the scaled pole, a genuine double pole
        r = classify_direction(DirectionalQuery([1.0, 1.0]), m0)
        assert r.alpha == pytest.approx(2.0, rel=1e-9)
        assert r.p == 1.0
        assert r.experimental

    def test_axis_aligned_direction_delegates(self, m1):
        r = classify_direction(DirectionalQuery([1.0, 0.0]), m1)
        m = classify_marginal(1, m1)
        assert (r.alpha, r.p) == (m.alpha, m.p)

    def test_nonnegative_drift_marginal_delegates_to_boundary(self):
        m = make_model([0.5, -1.0], np.eye(2), [[1.0, -0.8], [0.0, 1.0]], [1.0, 1.0])
        r = classify_marginal(1, m)
        b = classify_boundary(2, m)
        assert r.alpha == b.alpha and r.p == b.p

    def test_negative_section_zero_direction(self):
        # <u_bar, mu> > 0 makes the section zero negative: scaled boundary path
        m = make_model([0.5, -1.0], np.eye(2), [[1.0, -0.8], [0.0, 1.0]], [1.0, 1.0])
        r = classify_direction(DirectionalQuery([1.0, 0.2]), m)
        assert r.alpha > 0.0
        assert "scaled boundary" in r.regime

    def test_product_form_family(self):
        # diagonal covariance with identity reflection: independent
        # one-dimensional sticky motions, purely exponential marginals
        rng = np.random.default_rng(20)
        for _ in range(20):
            m = random_stable_model(rng, diag_sigma=True)
            m = make_model(m.mu, m.sigma, np.eye(2), m.stick)
            for axis in (1, 2):
                r = classify_marginal(axis, m)
                expected = -2.0 * m.mu[axis - 1] / m.sigma[axis - 1, axis - 1]
                assert r.alpha == pytest.approx(expected, rel=1e-8)
                assert r.p == 0.0

    def test_swap_equivariance(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            m = random_stable_model(rng, substochastic=False)
            r1 = classify_marginal(1, m)
            r2 = classify_marginal(2, m.swapped())
            assert r1.alpha == pytest.approx(r2.alpha, rel=1e-9)
            assert r1.p == r2.p
            d = classify_direction(DirectionalQuery([1.0, 1.0]), m)
            d_sw = classify_direction(DirectionalQuery([1.0, 1.0]), m.swapped())
            assert d.alpha == pytest.approx(d_sw.alpha, rel=1e-9)
            assert d.p == d_sw.p

    def test_alpha_never_exceeds_branch_point(self):
        rng = np.random.default_rng(22)
        for _ in range(50):
            m = random_stable_model(rng, substochastic=False)
            c = singularity_candidates(m)
            b = classify_boundary(2, m)
            assert b.alpha <= c.x2 * (1 + 1e-12)
            r = classify_marginal(1, m)
            assert r.alpha <= c.x2 * (1 + 1e-12)

    def test_tie_tolerance_perturbation_stability(self):
        # regimes are locally constant off the tie set: a relative 1e-12
        # jiggle of all inputs never changes the fired case when candidate
        # gaps exceed 1e-6
        rng = np.random.default_rng(23)
        checked = 0
        for _ in range(100):
            m = random_stable_model(rng, substochastic=False)
            c = singularity_candidates(m)
            finite = [v for v in (c.x_star, c.x_tilde, c.x2) if math.isfinite(v)]
            gaps = [
                abs(a - b)
                for i, a in enumerate(finite)
                for b in finite[i + 1:]
            ]
            if gaps and min(gaps) < 1e-6:
                continue
            base = classify_boundary(2, m)
            jig = 1.0 + 1e-12
            m2 = make_model(m.mu * jig, m.sigma * jig, m.refl * jig, m.stick * jig)
            pert = classify_boundary(2, m2)
            assert pert.regime == base.regime
            assert pert.p == base.p
            checked += 1
        assert checked >= 80


class TestJointTail:
    def test_identity_reflection_accepted(self, m0):
        t1, t2 = joint_tail_params(m0)
        assert (t1.alpha, t1.p) == (pytest.approx(2.0, rel=1e-9), 0.0)
        assert (t2.alpha, t2.p) == (pytest.approx(2.0, rel=1e-9), 0.0)

    def test_substochastic_offdiagonal_accepted(self):
        m = make_model([-1, -1], np.eye(2), [[1.0, -0.5], [-0.5, 1.0]], [1, 1])
        p = substochastic_check(m)
        assert np.allclose(p, [[0.0, 0.5], [0.5, 0.0]])
        joint_tail_params(m)

    def test_row_sum_violation_refused(self):
        # stable reflection matrix whose comparison matrix has a row sum > 1
        m = make_model([-1, -1], np.eye(2), [[1.0, -1.5], [-0.5, 1.0]], [1, 1])
        with pytest.raises(ReflectionNotSubstochastic):
            joint_tail_params(m)

    def test_positive_offdiagonal_reflection_refused(self):
        m = make_model([-1, -1], np.eye(2), [[1.0, 0.3], [0.2, 1.0]], [1, 1])
        with pytest.raises(ReflectionNotSubstochastic):
            joint_tail_params(m)


class TestTypes:
    def test_directional_query_normalizes(self):
        q = DirectionalQuery([2.0, 1.0])
        assert q.u_bar.max() == 1.0
        assert q.u_bar == pytest.approx([1.0, 0.5])

    def test_directional_query_rejects_bad_input(self):
        with pytest.raises(ValueError):
            DirectionalQuery([0.0, 0.0])
        with pytest.raises(ValueError):
            DirectionalQuery([-1.0, 1.0])

    def test_tail_asymptotic_validates(self):
        with pytest.raises(Exception):
            TailAsymptotic(alpha=-1.0, p=0.0, regime="x", dominant="x2")
        with pytest.raises(ValueError):
            TailAsymptotic(alpha=1.0, p=0.3, regime="x", dominant="x2")
