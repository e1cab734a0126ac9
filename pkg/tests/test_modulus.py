import numpy as np

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homoglab.modulus import (
    PowerModulus,
    ScaledModulus,
    TableModulus,
    certify_subadditive,
    dini_norm,
    dini_sum,
    log_dini_norm,
    log_dini_sum,
    parse_modulus,
)


def zero_modulus():
    return TableModulus([1.0], [0.0])


class TestEvaluation:
    def test_identity(self):
        assert PowerModulus(1.0)(0.5) == 0.5

    def test_sqrt(self):
        assert PowerModulus(0.5)(0.25) == 0.5

    def test_vanishes_at_zero(self):
        for m in (PowerModulus(0.7), zero_modulus(), ScaledModulus(PowerModulus(1.0), 2.0)):
            assert m(0.0) == 0.0

    def test_rejects_negative_argument(self):
        with pytest.raises(ValueError):
            PowerModulus(1.0)(-0.1)

    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            PowerModulus(1.5)
        with pytest.raises(ValueError):
            PowerModulus(0.0)

    def test_table_interpolation(self):
        t = TableModulus([1.0, 2.0], [1.0, 3.0])
        assert t(0.5) == 0.5          # linear from the origin
        assert t(1.5) == 2.0          # between knots
        assert t(10.0) == 3.0         # constant beyond the last knot

    def test_table_rejects_decreasing_values(self):
        with pytest.raises(ValueError):
            TableModulus([0.0, 1.0], [1.0, 0.0])

    def test_vectorized(self):
        out = PowerModulus(0.5)(np.array([0.0, 1.0, 4.0]))
        assert np.allclose(out, [0.0, 1.0, 2.0])


class TestParse:
    def test_power(self):
        m = parse_modulus("power:0.5")
        assert isinstance(m, PowerModulus) and m.alpha == 0.5

    def test_scaled(self):
        m = parse_modulus("scale:2.5:power:1")
        assert isinstance(m, ScaledModulus) and m.factor == 2.5

    def test_table(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text('{"knots": [1.0], "values": [0.5]}')
        m = parse_modulus(f"table:{p}")
        assert m(1.0) == 0.5

    def test_unknown(self):
        with pytest.raises(ValueError):
            parse_modulus("spline:3")


class TestSubadditivity:
    def test_powers_pass(self):
        for alpha in (0.1, 0.5, 1.0):
            assert certify_subadditive(PowerModulus(alpha), 60).ok

    def test_square_table_fails_with_witness(self):
        knots = np.linspace(0.1, 2.0, 39)
        tsq = TableModulus(knots, knots**2)
        cert = certify_subadditive(tsq, 41)
        assert not cert.ok
        u, t, s = cert.witness
        assert tsq(u) > tsq(t) + tsq(s)
        assert u <= t + s + 1e-9

    @given(alpha=st.floats(min_value=0.05, max_value=1.0))
    @settings(max_examples=30, deadline=None)
    def test_power_subadditive_hypothesis(self, alpha):
        assert certify_subadditive(PowerModulus(alpha), 33).ok


class TestDiniNorms:
    def test_power_one_closed_form(self):
        assert dini_norm(PowerModulus(1.0)) == pytest.approx(1.0, abs=1e-6)
        assert log_dini_norm(PowerModulus(1.0)) == pytest.approx(1.0, abs=1e-6)

    def test_power_half_closed_form(self):
        assert dini_norm(PowerModulus(0.5)) == pytest.approx(2.0, abs=1e-5)
        assert log_dini_norm(PowerModulus(0.5)) == pytest.approx(4.0, abs=1e-5)

    def test_general_power_closed_form(self):
        # quadrature runs over [2^-60, 1]; compare against the exact
        # integral over that window, which isolates quadrature error
        eps = 2.0**-60
        for alpha in (0.25, 0.8):
            want = (1 - eps**alpha) / alpha
            assert dini_norm(PowerModulus(alpha)) == pytest.approx(want, rel=1e-10)
            want_log = (1 - eps**alpha * (1 - alpha * np.log(eps))) / alpha**2
            assert log_dini_norm(PowerModulus(alpha)) == pytest.approx(want_log, rel=1e-9)

    def test_zero_modulus(self):
        assert dini_norm(zero_modulus()) == 0.0
        assert log_dini_norm(zero_modulus()) == 0.0

    def test_rejects_few_points(self):
        with pytest.raises(ValueError):
            dini_norm(PowerModulus(1.0), quadrature_points=8)

    def test_scaling_exact(self):
        base = PowerModulus(0.35)
        scaled = ScaledModulus(base, 3.7)
        assert dini_norm(scaled) == pytest.approx(3.7 * dini_norm(base), rel=1e-12)

    def test_monotone(self):
        small = PowerModulus(1.0)
        big = ScaledModulus(PowerModulus(1.0), 2.0)
        assert dini_norm(small) <= dini_norm(big)
        assert log_dini_norm(small) <= log_dini_norm(big)


class TestScaleSums:
    def test_power_one_kappa_two(self):
        assert dini_sum(PowerModulus(1.0), 2.0) == pytest.approx(2.0, rel=1e-12)
        assert log_dini_sum(PowerModulus(1.0), 2.0) == pytest.approx(4.0, rel=1e-12)

    def test_zero(self):
        assert dini_sum(zero_modulus(), 2.0) == 0.0
        assert log_dini_sum(zero_modulus(), 2.0) == 0.0

    def test_power_half_kappa_four(self):
        assert dini_sum(PowerModulus(0.5), 4.0) == pytest.approx(2.0, rel=1e-12)

    def test_rejects_kappa_below_one(self):
        with pytest.raises(ValueError):
            dini_sum(PowerModulus(1.0), 1.0)

    def test_comparable_to_integral(self):
        # sum and integral agree within a kappa-dependent factor
        for kappa in (2.0, 4.0):
            for alpha in (0.1, 0.3, 0.6, 1.0):
                m = PowerModulus(alpha)
                ratio = dini_sum(m, kappa) / dini_norm(m)
                assert 1 / (2 * kappa) <= ratio <= 2 * kappa
                ratio_log = log_dini_sum(m, kappa) / log_dini_norm(m)
                assert 1 / (2 * kappa) ** 2 <= ratio_log <= (2 * kappa) ** 2

    def test_geometric_closed_forms(self):
        # alpha, kappa -> sum_k kappa^(-k alpha) = 1/(1 - kappa^-alpha)
        for alpha, kappa in ((0.3, 2.0), (0.9, 3.0)):
            want = 1.0 / (1.0 - kappa**-alpha)
            assert dini_sum(PowerModulus(alpha), kappa) == pytest.approx(want, rel=1e-12)
