import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msvcj.errors import ValidationError
from msvcj.european import (MarketSpec, bs_price, implied_vol, merton_jd_pricer, mixture_distribution,
                            price_ms_sv, price_ms_svcj, price_ms_svj, price_model)
from msvcj.jumps import JumpSpec, PeaSpec, truncate_poisson
from msvcj.models import Model
from msvcj.montecarlo import SimConfig, mc_exact_conditional
from msvcj.msvol import ChainSpec

from conftest import REF_P, REF_VARS, random_chain


class TestBlackScholes:
    def test_textbook_value(self):
        # S=K=100, r=5%, sigma=20%, T=1
        p, d = bs_price(100.0, 0.04, 0.05, 0.0, 1.0, 100.0)
        assert p == pytest.approx(10.450583572185565, abs=1e-10)
        assert d == pytest.approx(0.6368306511756191, abs=1e-12)

    def test_zero_variance_is_discounted_intrinsic(self):
        p, _ = bs_price(100.0, 0.0, 0.05, 0.02, 1.0, 90.0)
        assert p == pytest.approx(100 * math.exp(-0.02) - 90 * math.exp(-0.05), abs=1e-12)

    def test_delta_finite_difference(self):
        h = 1e-4
        up = bs_price(100 + h, 0.05, 0.03, 0.01, 0.7, 95, "put")[0]
        dn = bs_price(100 - h, 0.05, 0.03, 0.01, 0.7, 95, "put")[0]
        assert bs_price(100, 0.05, 0.03, 0.01, 0.7, 95, "put")[1] == pytest.approx((up - dn) / (2 * h), abs=1e-7)

    def test_implied_vol_roundtrip(self):
        p, _ = bs_price(50, 0.0625, 0.05, 0.0, 0.25, 55)
        assert implied_vol(p, 50, 55, 0.05, 0.25) == pytest.approx(0.25, abs=1e-12)


class TestMarket:
    def test_validation(self):
        with pytest.raises(ValidationError):
            MarketSpec(-1, 100, 0.05, 1)
        with pytest.raises(ValidationError):
            MarketSpec(100, 100, 0.05, 1, kind="straddle")


class TestReferenceCall:
    def test_price(self, ref_chain, ref_jump, ref_pea):
        m = MarketSpec(50, 55, 0.05, 0.25)
        res = price_ms_svcj(m, ref_chain, ref_jump, ref_pea)
        assert res.price == pytest.approx(0.9696, abs=1e-3)
        assert res.n_max == 10 and res.truncation_mass_dropped < 1e-9

    def test_quadrature_order_converged(self, ref_chain, ref_jump, ref_pea):
        m = MarketSpec(50, 55, 0.05, 0.25)
        hi = price_ms_svcj(m, ref_chain, ref_jump, ref_pea, 40, 40).price
        lo = price_ms_svcj(m, ref_chain, ref_jump, ref_pea, 16, 8).price
        assert abs(hi - lo) < 1e-8

    def test_components_sum_to_price(self, ref_chain, ref_jump, ref_pea):
        m = MarketSpec(50, 55, 0.05, 0.25)
        res = price_ms_svcj(m, ref_chain, ref_jump, ref_pea, 12, 6, components=True)
        assert sum(c["value"] for c in res.components) == pytest.approx(res.price, abs=1e-12)

    def test_delta_finite_difference(self, ref_chain, ref_jump, ref_pea):
        h = 1e-4
        f = lambda s: price_ms_svcj(MarketSpec(s, 55, 0.05, 0.25), ref_chain, ref_jump, ref_pea, 12, 6)
        assert f(50).delta == pytest.approx((f(50 + h).price - f(50 - h).price) / (2 * h), abs=1e-7)

    def test_strike_monotone_and_convex(self, ref_chain, ref_jump, ref_pea):
        K = np.linspace(40, 70, 31)
        p = np.array([price_ms_svcj(MarketSpec(50, k, 0.05, 0.25), ref_chain, ref_jump,
                                    ref_pea, 12, 6).price for k in K])
        assert np.all(np.diff(p) <= 1e-12)
        assert np.all(np.diff(p, 2) >= -1e-9)


class TestReductions:
    def test_single_state_is_black_scholes(self):
        c = ChainSpec.from_variances([0.09], [[1.0]], 0.01)
        for kind in ("call", "put"):
            m = MarketSpec(100, 110, 0.03, 0.5, 0.01, kind)
            assert price_ms_sv(m, c).price == pytest.approx(bs_price(100, 0.09, 0.03, 0.01, 0.5, 110, kind)[0],
                                                            abs=1e-13)

    def test_no_jumps_no_pea_is_ms_sv(self, ref_chain):
        m = MarketSpec(50, 55, 0.05, 0.25)
        a = price_ms_svcj(m, ref_chain, JumpSpec(0.0, -0.025, 0.005), PeaSpec(0.0, 250, 0.02)).price
        assert a == pytest.approx(price_ms_sv(m, ref_chain).price, abs=1e-10)

    def test_no_pea_is_ms_svj(self, ref_chain, ref_jump):
        m = MarketSpec(50, 55, 0.05, 0.25)
        a = price_ms_svcj(m, ref_chain, ref_jump, PeaSpec(0.0, 250, 0.02)).price
        assert a == pytest.approx(price_ms_svj(m, ref_chain, ref_jump).price, abs=1e-8)

    def test_merton_reference(self):
        # Merton series with many terms vs the truncated one at tiny eps
        j = JumpSpec(1.0, -0.1, 0.02, truncation_eps=1e-14)
        p, _ = merton_jd_pricer(j)(100, 0.04, 0.05, 0.0, 1.0, 100)
        ref = 0.0
        for n in range(60):
            w = math.exp(-1.0) / math.factorial(n)
            g = math.exp(-j.intensity * j.zeta + n * (j.log_mean + 0.5 * j.log_var))
            ref += w * bs_price(100 * g, 0.04 + n * 0.02, 0.05, 0.0, 1.0, 100)[0]
        assert p == pytest.approx(ref, abs=1e-10)

    def test_dispatch(self, ref_chain, ref_jump, ref_pea):
        m = MarketSpec(50, 55, 0.05, 0.25)
        assert price_model(m, ref_chain).price == price_ms_sv(m, ref_chain).price
        assert price_model(m, ref_chain, ref_jump).price == price_ms_svj(m, ref_chain, ref_jump).price


@settings(max_examples=50)
@given(seed=st.integers(0, 2**32 - 1), S=st.floats(20, 200), K=st.floats(20, 200), r=st.floats(0, 0.1),
       q=st.floats(0, 0.06), jumps=st.booleans())
def test_put_call_parity(seed, S, K, r, q, jumps):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, int(rng.integers(1, 4)), tau=0.05)
    T = 0.05 * int(rng.integers(1, 15))
    jump = JumpSpec(float(rng.uniform(0, 5)), float(rng.uniform(-0.1, 0.05)), float(rng.uniform(1e-4, 0.02))) if jumps else None
    pea = PeaSpec(float(rng.uniform(0, 5)), 250.0, 0.02) if jumps else None
    call = price_model(MarketSpec(S, K, r, T, q, "call"), chain, jump, pea, n_hermite=8, n_laguerre=4).price
    put = price_model(MarketSpec(S, K, r, T, q, "put"), chain, jump, pea, n_hermite=8, n_laguerre=4).price
    # parity holds for the truncated mixture up to the dropped Poisson mass
    mass = 1.0
    if jumps:
        mass = truncate_poisson(jump.intensity, T, jump.truncation_eps).weights.sum()
        fwd = sum(w * math.exp(-jump.intensity * jump.zeta * T + n * (jump.log_mean + 0.5 * jump.log_var))
                  for n, w in enumerate(truncate_poisson(jump.intensity, T, jump.truncation_eps).weights))
    else:
        fwd = 1.0
    expected = S * math.exp(-q * T) * fwd - K * math.exp(-r * T) * mass
    assert call - put == pytest.approx(expected, abs=1e-9)


def test_ms_sv_european_against_monte_carlo():
    chain = ChainSpec.from_variances(REF_VARS, REF_P, 0.5 / 30, initial_var=0.04)
    m = MarketSpec(100, 100, 0.05, 0.5, 0.04)
    est = mc_exact_conditional(Model(chain), m, SimConfig(30, 100_000, 10, 3))
    assert abs(est.mean - price_ms_sv(m, chain).price) < 3 * est.sem


def test_mixture_distribution_point_mass(ref_chain):
    sup, pr = mixture_distribution(ref_chain, np.eye(4)[1], 30)
    ref = price_ms_sv(MarketSpec(50, 55, 0.05, 0.25), ref_chain)
    assert pr.size == ref.support_size and abs(pr.sum() - 1) < 1e-12
