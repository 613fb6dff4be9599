import math

import numpy as np
import pytest

from stickytails import (
    KernelForm,
    branch_points,
    face_polys,
    find_x_star,
    find_y_star_x_tilde,
    kernel_eval,
    make_model,
    singularity_candidates,
    x_branch,
    y_branch,
)
from stickytails.errors import OutsideBranchCut

from conftest import random_stable_model

SQRT2 = math.sqrt(2.0)
SQRT5 = math.sqrt(5.0)


@pytest.fixture(scope="module")
def no_pole_model():
    """gamma2(x2, Y0(x2)) < 0 here, so the face-2 pole candidate is absent."""
    return make_model([-1.0, 0.5], np.eye(2), [[1.0, 0.0], [-0.8, 1.0]], [1.0, 1.0])


class TestKernelEval:
    def test_zero_at_origin(self, m0):
        assert kernel_eval(0.0, 0.0, m0) == 0.0

    def test_hand_values(self, m0):
        assert kernel_eval(2.0, 0.0, m0) == pytest.approx(0.0, abs=1e-14)
        assert kernel_eval(1.0, 1.0, m0) == pytest.approx(-1.0)

    def test_quadratic_form_matches_direct_evaluation(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            m = random_stable_model(rng, substochastic=False)
            kf = KernelForm.from_params(m)
            x = rng.uniform(-3, 3, size=20)
            y = rng.uniform(-3, 3, size=20)
            via_form = kf.a * y**2 + kf.b(x) * y + kf.c(x)
            direct = kernel_eval(x, y, m)
            assert np.allclose(via_form, direct, rtol=1e-12, atol=1e-12)
            mirrored = kf.a_tilde * x**2 + kf.b_tilde(y) * x + kf.c_tilde(y)
            assert np.allclose(mirrored, direct, rtol=1e-12, atol=1e-12)


class TestBranchPoints:
    def test_symmetric_model(self, m0):
        bp = branch_points(m0)
        assert bp.x1 == pytest.approx(1 - SQRT2, rel=1e-12)
        assert bp.x2 == pytest.approx(1 + SQRT2, rel=1e-12)
        assert bp.y2 == pytest.approx(1 + SQRT2, rel=1e-12)

    def test_asymmetric_model(self, m1):
        bp = branch_points(m1)
        # D1(x) = 4 + 2x - x^2 and D2(y) = 1 + 4y - y^2
        assert bp.x2 == pytest.approx(1 + SQRT5, rel=1e-12)
        assert bp.y2 == pytest.approx(2 + SQRT5, rel=1e-12)

    def test_ordering_and_interior_positivity(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            m = random_stable_model(rng, substochastic=False)
            bp = branch_points(m)
            kf = KernelForm.from_params(m)
            assert bp.x1 <= 0.0 < bp.x2
            assert bp.y1 <= 0.0 < bp.y2
            assert kf.disc_x(0.5 * (bp.x1 + bp.x2)) > 0.0
            assert kf.disc_x(bp.x2 + 0.1 * (bp.x2 - bp.x1)) < 0.0
            assert kf.disc_x(bp.x1 - 0.1 * (bp.x2 - bp.x1)) < 0.0

    def test_sign_scan_oracle(self):
        # independent root oracle: dense sign-change scan bracketing the
        # discriminant zeros, refined by plain bisection (no formula)
        rng = np.random.default_rng(12)
        for _ in range(5):
            m = random_stable_model(rng, substochastic=False)
            bp = branch_points(m)
            kf = KernelForm.from_params(m)
            grid = np.linspace(-10 * abs(bp.x2), 10 * abs(bp.x2), 1_000_000)
            d = kf.disc_x(grid)
            flips = np.where(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]
            roots = []
            for j in flips:
                lo, hi = grid[j], grid[j + 1]
                flo = kf.disc_x(lo)
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    fm = kf.disc_x(mid)
                    if flo * fm <= 0.0:
                        hi = mid
                    else:
                        lo, flo = mid, fm
                roots.append(0.5 * (lo + hi))
            roots = np.array(roots)
            assert roots.size == 2
            assert abs(roots.min() - bp.x1) < 1e-6 * max(1.0, abs(bp.x1))
            assert abs(roots.max() - bp.x2) < 1e-6 * max(1.0, abs(bp.x2))

    def test_published_closed_form_recorded(self, m0):
        bp = branch_points(m0)
        assert "x2_closed_form_repaired" in bp.cross_check
        assert bp.cross_check["rel_discrepancy_repaired"] < 1e-12


class TestBranches:
    def test_lower_branch_hand_values(self, m0):
        assert y_branch(2.0, 0, m0) == pytest.approx(0.0, abs=1e-12)

    def test_coalescence_at_branch_point(self, m0):
        bp = branch_points(m0)
        y0 = y_branch(bp.x2, 0, m0)
        y1 = y_branch(bp.x2, 1, m0)
        assert y0 == pytest.approx(1.0, abs=1e-7)
        assert abs(y0 - y1) < 1e-8

    def test_mirror_branch_hand_values(self, m1):
        assert x_branch(4.0, 0, m1) == pytest.approx(0.0, abs=1e-12)
        assert x_branch(4.0, 1, m1) == pytest.approx(2.0, rel=1e-12)

    def test_branch_solves_kernel_on_grid(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            m = random_stable_model(rng, substochastic=False)
            bp = branch_points(m)
            xs = np.linspace(bp.x1, bp.x2, 10_000)
            for which in (0, 1):
                resid = np.abs(kernel_eval(xs, y_branch(xs, which, m), m))
                assert np.max(resid / (1.0 + xs * xs)) < 1e-10
            ys = np.linspace(bp.y1, bp.y2, 2_000)
            resid = np.abs(kernel_eval(x_branch(ys, 0, m), ys, m))
            assert np.max(resid / (1.0 + ys * ys)) < 1e-10

    def test_branch_ordering_strict_inside(self, m0):
        bp = branch_points(m0)
        xs = np.linspace(bp.x1 + 1e-3, bp.x2 - 1e-3, 100)
        assert np.all(y_branch(xs, 0, m0) < y_branch(xs, 1, m0))

    def test_outside_cut_raises(self, m0):
        bp = branch_points(m0)
        with pytest.raises(OutsideBranchCut):
            y_branch(bp.x2 + 0.5, 0, m0)
        with pytest.raises(OutsideBranchCut):
            x_branch(bp.y2 + 0.5, 1, m0)

    def test_invalid_which(self, m0):
        with pytest.raises(ValueError):
            y_branch(1.0, 2, m0)


class TestFacePolys:
    def test_identity_reflection(self, m0):
        assert face_polys(3.0, 5.0, m0) == (3.0, 5.0)

    def test_offdiagonal_reflection(self):
        m = make_model([-1, -1], np.eye(2), [[1.0, -0.5], [-0.5, 1.0]], [1, 1])
        g1, g2 = face_polys(2.0, 2.0, m)
        assert (g1, g2) == pytest.approx((1.0, 1.0))

    def test_linear_at_origin(self, m1):
        assert face_polys(0.0, 0.0, m1) == (0.0, 0.0)


class TestSingularityCandidates:
    def test_symmetric_model(self, m0):
        c = singularity_candidates(m0)
        assert c.x_star == pytest.approx(2.0, rel=1e-10)
        assert c.y_star == pytest.approx(2.0, rel=1e-10)
        assert math.isinf(c.x_tilde)
        assert c.x2 == pytest.approx(1 + SQRT2, rel=1e-12)

    def test_asymmetric_model(self, m1):
        c = singularity_candidates(m1)
        assert c.x_star == pytest.approx(2.0, rel=1e-10)
        assert c.y_star == pytest.approx(4.0, rel=1e-10)
        assert math.isinf(c.x_tilde)

    def test_root_residual(self, m1):
        x_star = find_x_star(m1)
        g = face_polys(x_star, y_branch(x_star, 0, m1), m1)[1]
        assert abs(g) < 1e-9 * (1.0 + abs(x_star))

    def test_pole_absent_when_sign_condition_fails(self, no_pole_model):
        assert math.isinf(find_x_star(no_pole_model))

    def test_rejected_tilde_candidate(self, m1):
        y_star, x_tilde = find_y_star_x_tilde(m1)
        assert y_star == pytest.approx(4.0, rel=1e-10)
        assert math.isinf(x_tilde)  # X1(4) = 2 but Y0(2) = 0 != 4

    def test_swap_maps_x_star_to_y_star(self):
        rng = np.random.default_rng(14)
        for _ in range(25):
            m = random_stable_model(rng, substochastic=False)
            c = singularity_candidates(m)
            c_sw = singularity_candidates(m.swapped())
            assert c_sw.x2 == pytest.approx(c.y2, rel=1e-12)
            if math.isfinite(c.y_star):
                assert c_sw.x_star == pytest.approx(c.y_star, rel=1e-9)
            else:
                assert math.isinf(c_sw.x_star)

    def test_candidates_in_range(self):
        rng = np.random.default_rng(15)
        for _ in range(50):
            m = random_stable_model(rng, substochastic=False)
            c = singularity_candidates(m)
            if math.isfinite(c.x_star):
                assert 0.0 < c.x_star <= c.x2 * (1 + 1e-12)
            if math.isfinite(c.y_star):
                assert 0.0 < c.y_star <= c.y2 * (1 + 1e-12)
            if math.isfinite(c.x_tilde):
                # accepted only if it lies on the lower branch
                assert abs(y_branch(c.x_tilde, 0, m) - c.y_star) <= 1e-8 * (1 + abs(c.y_star))

    def test_repaired_closed_forms_match_when_branch_agrees(self, m0, m1):
        for m in (m0, m1):
            c = singularity_candidates(m)
            assert c.cross_check["x_star_rel_discrepancy_repaired"] < 1e-9
            assert c.cross_check["y_star_rel_discrepancy_repaired"] < 1e-9
            # the verbatim x_star display disagrees (wrong matrix entry)
            assert c.cross_check["x_star_rel_discrepancy_verbatim"] > 0.1
