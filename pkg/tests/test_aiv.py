import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msvcj.aiv import (aiv_ce, aiv_distribution, aiv_rr, distribution_hash, layer_bound, support_bound,
                       triple_bound)
from msvcj.errors import CapExceededError, ValidationError
from msvcj.msvol import ChainSpec, StateDistribution, enumerate_paths, evolve_distribution

from conftest import random_chain


def mean_oracle(chain, L):
    """E[V] from the marginal state distributions at steps 0..L-1."""
    p = StateDistribution.point_mass(chain.m, chain.initial_state_index)
    total = 0.0
    for _ in range(L):
        total += p.probs @ chain.variances
        p = evolve_distribution(chain, p, 1)
    return total / L


def toy_chain():
    return ChainSpec.from_variances([0.04, 0.16], [[0.7, 0.3], [0.4, 0.6]], 1.0, initial_var=0.16)


class TestToyExample:
    def test_support(self):
        d = aiv_rr(toy_chain(), 3)
        assert np.allclose(d.support, [0.08, 0.12, 0.16], rtol=0, atol=1e-15)

    def test_probabilities_by_hand(self):
        # V=0.16 needs two more high states, V=0.08 two low ones
        d = aiv_rr(toy_chain(), 3)
        assert np.allclose(d.probs, [0.4 * 0.7, 1 - 0.28 - 0.36, 0.6 * 0.6], atol=1e-15)

    def test_triples_per_step(self):
        d = aiv_rr(toy_chain(), 3)
        assert d.stats["triples_per_step"] == [2, 4, 6]
        assert d.stats["total_triples"] == triple_bound(2, 3) == 12


class TestBounds:
    def test_known_values(self):
        assert support_bound(2, 3) == 3
        assert support_bound(4, 30) == math.comb(32, 3)
        assert triple_bound(2, 3) == 12
        assert layer_bound(2, 3) == 6

    @pytest.mark.parametrize("m,L", [(2, 20), (3, 15), (4, 12)])
    def test_generic_chain_respects_bounds(self, m, L):
        c = random_chain(np.random.default_rng(m * 100 + L), m)
        d = aiv_rr(c, L)
        assert len(d) <= support_bound(m, L)
        assert d.stats["total_triples"] <= triple_bound(m, L)
        for step, count in enumerate(d.stats["triples_per_step"], start=1):
            assert count <= layer_bound(m, step)

    def test_generic_chain_attains_support_bound(self):
        # irrational-looking levels make every composition a distinct sum
        c = ChainSpec.from_variances([0.0113571, 0.0231179, 0.0372341], np.full((3, 3), 1 / 3), 0.1)
        assert len(aiv_rr(c, 10)) == support_bound(3, 10)


class TestRRvsCE:
    @settings(max_examples=60)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 3), L=st.integers(1, 9),
           lattice=st.booleans())
    def test_identical_distributions(self, seed, m, L, lattice):
        c = random_chain(np.random.default_rng(seed), m, lattice=lattice)
        rr, ce = aiv_rr(c, L), aiv_ce(c, L)
        assert np.array_equal(rr.keys, ce.keys)
        assert np.max(np.abs(rr.probs - ce.probs)) <= 1e-12
        assert abs(rr.mean() - mean_oracle(c, L)) <= 1e-12

    def test_ce_matches_scalar_enumeration(self):
        c = random_chain(np.random.default_rng(11), 3)
        ce = aiv_ce(c, 5)
        acc = {}
        for p in enumerate_paths(c, 5):
            acc[round(p.weight, 12)] = acc.get(round(p.weight, 12), 0.0) + p.prob
        assert np.allclose(sorted(acc), ce.support, atol=1e-12)


class TestRRBehaviour:
    def test_single_state(self):
        c = ChainSpec.from_variances([0.05], [[1.0]], 0.1)
        d = aiv_rr(c, 40)
        assert d.support.tolist() == [pytest.approx(0.05, abs=1e-15)]
        assert d.probs.tolist() == [1.0]

    def test_probabilities_sum_to_one(self):
        d = aiv_rr(random_chain(np.random.default_rng(7), 4), 30)
        assert abs(d.probs.sum() - 1) < 1e-12
        assert np.all(np.diff(d.support) > 0)

    def test_triple_cap_raises_with_bound(self):
        c = random_chain(np.random.default_rng(8), 4)
        with pytest.raises(CapExceededError, match="m\\*C\\(L-1\\+m, m\\)") as exc:
            aiv_rr(c, 40, triple_cap=1000)
        assert exc.value.details["bound"] == triple_bound(4, 40)

    def test_precision_too_low(self):
        c = ChainSpec.from_variances([1e-7, 0.02], np.full((2, 2), 0.5), 0.1)
        with pytest.raises(ValidationError, match="precision"):
            aiv_rr(c, 5, precision=6)

    def test_memo_returns_same_object(self):
        c = random_chain(np.random.default_rng(9), 2)
        assert aiv_distribution(c, 12) is aiv_distribution(c, 12)

    def test_hash_stable_and_sensitive(self):
        c = random_chain(np.random.default_rng(10), 3)
        assert distribution_hash(aiv_rr(c, 8)) == distribution_hash(aiv_ce(c, 8))
        assert distribution_hash(aiv_rr(c, 8)) != distribution_hash(aiv_rr(c, 9))
