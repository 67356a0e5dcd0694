import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dptune.calibration import forward_curve
from dptune.errors import DomainError, GridMismatchError, MissingOrderError
from dptune.mechanisms import dp_sgd
from dptune.rdp_core import AlphaGrid, RdpCurve, gaussian_curve, rdp_to_delta, rdp_to_dp
from dptune.subsampling import subsample_curve
from dptune.tuning import (
    CostModel,
    TuningConfig,
    Variant,
    config_curve,
    expected_cost,
    pipeline_epsilon,
    privacy_curve,
    tuning_rdp,
    variant1_curve,
    variant1_rdp,
    variant2_curve,
)

# DP-SGD with γ=0.01, σ=2, T=5000, converted at δ=1e-5; frozen from this library.
# Unchanged when the order grid is extended to 2..256 (optimum sits at α=9).
REF_BASELINE_MU15 = 5.003904364045839
REF_VARIANT1_MU15_Q01 = 2.7724198606232417
REF_VARIANT2_MU15_Q01 = 3.2928235304208235
REF_BASELINE_MU45 = 9.804585741960196
REF_VARIANT2_MU15_Q05 = 5.082512116301255

DELTA = 1e-5


@pytest.fixture(scope="module")
def ref_base():
    return forward_curve(0.01, 2.0, 5000)


@st.composite
def curve_pairs(draw, top=12):
    g = AlphaGrid.integers(top)
    a = np.cumsum(draw(st.lists(st.floats(0, 0.5), min_size=top - 1, max_size=top - 1)))
    b = np.cumsum(draw(st.lists(st.floats(0, 0.5), min_size=top - 1, max_size=top - 1)))
    return RdpCurve(g, a), RdpCurve(g, b)


class TestTuningRdp:
    def test_mu_one(self):
        base = gaussian_curve(3.0)
        out = tuning_rdp(base, 1.0)
        for i, a in enumerate(base.orders):
            d = rdp_to_delta(base, math.log1p(1 / (a - 1)))
            expected = base.eps[i] + d if d < 1 else math.inf
            assert out.eps[i] == pytest.approx(expected, rel=1e-14)

    def test_zero_base_mu_e(self):
        z = RdpCurve.zero(AlphaGrid.integers(16))
        out = tuning_rdp(z, math.e)
        np.testing.assert_allclose(out.eps, 1 / (z.orders - 1), rtol=1e-14)

    def test_vacuous_orders_are_inf(self):
        out = tuning_rdp(gaussian_curve(0.1), 10)
        assert np.isinf(out.eps).any()

    def test_ref_baseline(self, ref_base):
        assert rdp_to_dp(tuning_rdp(ref_base, 15), DELTA) == pytest.approx(REF_BASELINE_MU15, rel=1e-12)
        dense = forward_curve(0.01, 2.0, 5000, AlphaGrid.integers(256))
        assert rdp_to_dp(tuning_rdp(dense, 15), DELTA) == pytest.approx(REF_BASELINE_MU15, rel=1e-12)

    def test_bad_mu(self):
        with pytest.raises(DomainError):
            tuning_rdp(gaussian_curve(1.0), 0)

    @given(st.floats(0.5, 10), st.floats(1, 100))
    def test_dominates_base(self, sigma, mu):
        base = gaussian_curve(sigma)
        assert np.all(tuning_rdp(base, mu).eps >= base.eps)

    @given(st.floats(0.5, 10), st.floats(1e-3, 1))
    def test_small_mu_stays_nonnegative(self, sigma, mu):
        assert np.all(tuning_rdp(gaussian_curve(sigma), mu).eps >= 0)


class TestVariant1:
    def test_limits_exact(self):
        e1, e2 = gaussian_curve(1.0), gaussian_curve(3.0)
        for a in (2, 7, 20):
            assert variant1_rdp(e1, e2, 0.0, a) == pytest.approx(e2.at(a), rel=1e-14)
            assert variant1_rdp(e1, e2, 1.0, a) == pytest.approx(e1.at(a), rel=1e-14)

    def test_reference_point(self, ref_base):
        v1 = variant1_curve(tuning_rdp(ref_base, 15), ref_base, 0.1)
        v2 = variant2_curve(tuning_rdp(ref_base, 15), ref_base, 0.1)
        e1, e2 = rdp_to_dp(v1, DELTA), rdp_to_dp(v2, DELTA)
        assert e1 == pytest.approx(REF_VARIANT1_MU15_Q01, rel=1e-12)
        assert e2 == pytest.approx(REF_VARIANT2_MU15_Q01, rel=1e-12)
        assert e1 < e2 < REF_BASELINE_MU15

    def test_curve_lift(self):
        e1, e2 = gaussian_curve(1.0), gaussian_curve(3.0)
        c = variant1_curve(e1, e2, 0.0)
        m = c.grid.integer_mask
        np.testing.assert_allclose(c.eps[m], e2.eps[m], rtol=1e-14)
        assert np.all(np.isinf(c.eps[~m]))
        c = variant1_curve(e1, e2, 1.0)
        np.testing.assert_allclose(c.eps[m], e1.eps[m], rtol=1e-14)

    def test_non_private(self):
        z = RdpCurve.zero(AlphaGrid.integers(10))
        for q in (0.0, 0.3, 1.0):
            assert variant1_rdp(z, z, q, 10) == 0.0

    def test_errors(self):
        g = gaussian_curve(1.0)
        with pytest.raises(GridMismatchError):
            variant1_curve(g, gaussian_curve(1.0, grid=AlphaGrid.integers()), 0.1)
        with pytest.raises(MissingOrderError):
            variant1_rdp(RdpCurve(AlphaGrid([2, 4]), [1, 2]), RdpCurve(AlphaGrid([2, 4]), [1, 2]), 0.5, 4)
        with pytest.raises(DomainError):
            variant1_rdp(g, g, 1.5, 4)
        with pytest.raises(DomainError):
            variant1_rdp(g, g, 0.5, 3.5)

    @settings(max_examples=40)
    @given(curve_pairs(), st.integers(2, 12))
    def test_limit_property(self, pair, alpha):
        e1, e2 = pair
        for q in (0.0, 1e-9):
            assert abs(variant1_rdp(e1, e2, q, alpha) - e2.at(alpha)) < 1e-6
        for q in (1 - 1e-9, 1.0):
            assert abs(variant1_rdp(e1, e2, q, alpha) - e1.at(alpha)) < 1e-6

    @settings(max_examples=40)
    @given(curve_pairs(), st.integers(2, 12), st.floats(0, 1))
    def test_finite_and_continuous(self, pair, alpha, q):
        e1, e2 = pair
        v = variant1_rdp(e1, e2, q, alpha)
        assert math.isfinite(v)
        nudged = variant1_rdp(e1, e2, min(1.0, q + 1e-7), alpha)
        assert abs(nudged - v) < 1e-4


class TestVariant2:
    def test_q_zero_is_base(self, ref_base):
        t = tuning_rdp(ref_base, 15)
        c = variant2_curve(t, ref_base, 0.0)
        m = c.grid.integer_mask
        np.testing.assert_array_equal(c.eps[m], ref_base.eps[m])

    def test_q_one_order_two(self, ref_base):
        t = tuning_rdp(ref_base, 15)
        c = variant2_curve(t, ref_base, 1.0)
        assert c.at(2) == pytest.approx(t.at(2) + ref_base.at(2), rel=1e-14)

    def test_mu45_crossing(self, ref_base):
        t = tuning_rdp(ref_base, 45)
        e1 = rdp_to_dp(variant1_curve(t, ref_base, 0.02), DELTA)
        e2 = rdp_to_dp(variant2_curve(t, ref_base, 0.02), DELTA)
        assert e2 < e1

    def test_equals_definition(self, ref_base):
        t = tuning_rdp(ref_base, 15)
        assert variant2_curve(t, ref_base, 0.3) == subsample_curve(t, 0.3) + ref_base


class TestPipeline:
    def test_dispatch(self, ref_base):
        t = tuning_rdp(ref_base, 15)
        assert privacy_curve("baseline", t, ref_base, 0.1) == t
        assert privacy_curve(Variant.VARIANT1, t, ref_base, 0.1) == variant1_curve(t, ref_base, 0.1)
        assert pipeline_epsilon("baseline", ref_base, 45, 0.3, DELTA) == pytest.approx(REF_BASELINE_MU45, rel=1e-12)

    def test_config_curve(self, ref_base):
        cfg = TuningConfig(15, 0.1, "variant2", dp_sgd(2.0, 0.01, 5000))
        assert rdp_to_dp(config_curve(cfg), DELTA) == pytest.approx(REF_VARIANT2_MU15_Q01, rel=1e-12)
        with pytest.raises(DomainError):
            config_curve(TuningConfig(15, 0.1))

    @pytest.mark.parametrize("mu,q", [(0, 0.1), (1, -0.1), (1, 1.1)])
    def test_config_invariants(self, mu, q):
        with pytest.raises(DomainError):
            TuningConfig(mu, q)

    def test_dominance_desk_scale(self, ref_base):
        t = tuning_rdp(ref_base, 15)
        base_eps = rdp_to_dp(t, DELTA)
        for q in np.arange(1, 10) * 0.05:
            e1 = rdp_to_dp(variant1_curve(t, ref_base, q), DELTA)
            e2 = rdp_to_dp(variant2_curve(t, ref_base, q), DELTA)
            assert e1 <= e2 < base_eps

    def test_variant2_overtakes_baseline_at_half(self, ref_base):
        # the factor 3 in the amplification tail leaves little slack once q is large
        t = tuning_rdp(ref_base, 15)
        e1 = rdp_to_dp(variant1_curve(t, ref_base, 0.5), DELTA)
        e2 = rdp_to_dp(variant2_curve(t, ref_base, 0.5), DELTA)
        assert e1 < REF_BASELINE_MU15 < e2
        assert e2 == pytest.approx(REF_VARIANT2_MU15_Q05, rel=1e-12)


class TestCost:
    def test_variant2_ratio_mu15(self):
        c = expected_cost(CostModel(10_000, 40, 15, 0.1), "variant2")
        assert c.ratio == 6.0
        assert c.gradient_evals == pytest.approx((1.5 + 1) * 10_000 * 40)

    def test_variant1_ratio_mu15(self):
        # 15 / (1.5 + 0.9)
        assert expected_cost(CostModel(10_000, 40, 15, 0.1), "variant1").ratio == pytest.approx(6.25, rel=1e-15)

    def test_ratio_mu45(self):
        assert expected_cost(CostModel(10_000, 40, 45, 0.1), "variant2").ratio == pytest.approx(45 / 5.5, abs=1e-12)

    def test_trivial(self):
        assert expected_cost(CostModel(100, 1, 1, 1.0), "variant2").ratio == 0.5
        assert expected_cost(CostModel(100, 3, 7, 0.2), "baseline").ratio == 1.0

    @pytest.mark.parametrize("args", [(0, 1, 1, 0.1), (1, 0, 1, 0.1), (1, 1, 0, 0.1), (1, 1, 1, 2)])
    def test_invalid(self, args):
        with pytest.raises(DomainError):
            CostModel(*args)
