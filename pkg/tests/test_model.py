import numpy as np
import pytest

from stickytails import LocalTimeRates, ModelParams, levy_exponent, local_time_rates, make_model, validate
from stickytails.errors import (
    DEGENERATE_CORRELATION,
    NON_POSITIVE_DEFINITE_SIGMA,
    NON_POSITIVE_STICKINESS,
    UNSTABLE_REFLECTION,
    ModelValidationError,
)

from conftest import random_stable_model


class TestValidate:
    def test_identity_model_valid(self, m0):
        assert validate(m0) is m0

    def test_negative_offdiagonal_reflection_valid(self):
        r = [[1.0, -0.5], [-0.5, 1.0]]
        m = make_model([-1, -1], np.eye(2), r, [1, 1])
        # det = 0.75 > 0 and both drift conditions strictly negative
        assert m.refl[0, 1] == -0.5

    def test_unstable_drift_rejected(self):
        with pytest.raises(ModelValidationError) as err:
            make_model([+1, -1], np.eye(2), np.eye(2), [1, 1])
        assert UNSTABLE_REFLECTION in err.value.codes

    def test_all_violations_reported_not_just_first(self):
        with pytest.raises(ModelValidationError) as err:
            make_model([+1, +1], [[1, 2], [2, 1]], [[-1, 0], [0, 1]], [0, -1])
        codes = err.value.codes
        assert NON_POSITIVE_DEFINITE_SIGMA in codes
        assert UNSTABLE_REFLECTION in codes
        assert NON_POSITIVE_STICKINESS in codes

    def test_degenerate_correlation(self):
        sigma = [[1.0, 1.0], [1.0, 1.0]]
        with pytest.raises(ModelValidationError) as err:
            make_model([-1, -1], sigma, np.eye(2), [1, 1])
        assert (
            DEGENERATE_CORRELATION in err.value.codes
            or NON_POSITIVE_DEFINITE_SIGMA in err.value.codes
        )

    def test_near_degenerate_correlation_rejected(self):
        rho = 1.0 - 1e-15
        sigma = [[1.0, rho], [rho, 1.0]]
        with pytest.raises(ModelValidationError):
            make_model([-1, -1], sigma, np.eye(2), [1, 1])

    def test_zero_stickiness_rejected(self):
        with pytest.raises(ModelValidationError) as err:
            make_model([-1, -1], np.eye(2), np.eye(2), [0.0, 1.0])
        assert err.value.codes == [NON_POSITIVE_STICKINESS]

    def test_idempotent(self, m0):
        assert validate(validate(m0)) is m0

    def test_random_valid_models_pass(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            m = random_stable_model(rng, substochastic=False)
            validate(m)


class TestSwap:
    def test_swap_involution(self, m1):
        sw = m1.swapped().swapped()
        assert np.array_equal(sw.mu, m1.mu)
        assert np.array_equal(sw.refl, m1.refl)
        assert np.array_equal(sw.sigma, m1.sigma)

    def test_swap_preserves_validity(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            validate(random_stable_model(rng, substochastic=False).swapped())

    def test_swap_conjugates_reflection(self):
        m = make_model([-1, -1], np.eye(2), [[1.0, -0.2], [-0.3, 1.0]], [1, 1])
        sw = m.swapped()
        assert sw.refl[0, 1] == -0.3 and sw.refl[1, 0] == -0.2


class TestLocalTimeRates:
    def test_symmetric_model(self, m0):
        rates = local_time_rates(m0)
        assert rates.as_tuple() == pytest.approx((1 / 3, 1 / 3, 1 / 3), rel=1e-12)

    def test_asymmetric_model(self, m1):
        rates = local_time_rates(m1)
        assert rates.as_tuple() == pytest.approx((0.4, 0.4, 0.8), rel=1e-12)

    def test_accounting_identity_random(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            m = random_stable_model(rng, substochastic=False)
            r = local_time_rates(m)
            total = r.e_T1 + m.stick[0] * r.e_L1 + m.stick[1] * r.e_L2
            assert total == pytest.approx(1.0, abs=1e-12)
            assert 0.0 < r.e_T1 <= 1.0
            assert r.e_L1 >= 0.0 and r.e_L2 >= 0.0

    def test_identity_reflection_gives_drift_proportional_rates(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            m = random_stable_model(rng, diag_sigma=True)
            m = make_model(m.mu, m.sigma, np.eye(2), m.stick)
            r = local_time_rates(m)
            assert r.e_L1 == pytest.approx(-m.mu[0] * r.e_T1, rel=1e-12)
            assert r.e_L2 == pytest.approx(-m.mu[1] * r.e_T1, rel=1e-12)

    def test_first_closed_form_agrees_on_random_sample(self):
        # the first published display survives both hand checks; its relative
        # discrepancy against the balance system must be at round-off level
        rng = np.random.default_rng(5)
        for _ in range(1000):
            m = random_stable_model(rng, substochastic=False)
            r = local_time_rates(m)
            assert r.cross_check["rel_discrepancy_e_L1"] < 1e-9

    def test_second_closed_form_discrepancy_logged_not_asserted(self, m1):
        r = local_time_rates(m1)
        # verbatim display disagrees (1.0 vs 0.8); repaired factor agrees
        assert r.cross_check["e_L2_closed_form_verbatim"] == pytest.approx(1.0)
        assert r.cross_check["e_L2_closed_form_repaired"] == pytest.approx(0.8)
        assert r.cross_check["rel_discrepancy_e_L2_verbatim"] > 0.1


class TestLevyExponent:
    def test_hand_value(self, m0):
        assert levy_exponent([-1.0, -1.0], m0) == pytest.approx(3.0)

    def test_zero_at_origin(self, m1):
        assert levy_exponent([0.0, 0.0], m1) == 0.0

    def test_batch_shape(self, m0):
        theta = np.array([[-1.0, -1.0], [-0.5, -2.0]])
        vals = levy_exponent(theta, m0)
        assert vals.shape == (2,)
