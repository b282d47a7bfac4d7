import numpy as np
import pytest
from hypothesis import given, strategies as st

from msvcj.errors import CapExceededError, ValidationError
from msvcj.msvol import (ChainSpec, StateDistribution, enumerate_paths, evolve_distribution,
                         iter_path_blocks, sample_paths, stationary_distribution)

from conftest import random_chain


class TestChainSpec:
    def test_from_variances_sorts_and_permutes(self):
        P = [[0.5, 0.5, 0.0], [0.1, 0.8, 0.1], [0.0, 0.3, 0.7]]
        c = ChainSpec.from_variances([0.09, 0.01, 0.04], P, 0.1, initial_var=0.04)
        assert np.allclose(c.variances, [0.01, 0.04, 0.09])
        # old state 1 (0.01) is now first; its row was [0.1, 0.8, 0.1] over (0.09, 0.01, 0.04)
        assert np.allclose(c.transition[0], [0.8, 0.1, 0.1])
        assert c.initial_state_index == 1

    def test_bad_row_sum_names_row(self):
        with pytest.raises(ValidationError, match="row 1"):
            ChainSpec.from_variances([0.01, 0.02], [[1.0, 0.0], [0.5, 0.6]], 0.1)

    def test_renormalize_rescales(self):
        c = ChainSpec.from_variances([0.01, 0.02], [[1.0, 0.0], [0.5, 0.5000001]], 0.1, renormalize=True)
        assert abs(c.transition[1].sum() - 1) < 1e-15

    @pytest.mark.parametrize("var", [[0.01, 0.01], [-0.01, 0.02], [0.0, 0.02]])
    def test_invalid_states(self, var):
        with pytest.raises(ValidationError):
            ChainSpec.from_variances(var, np.eye(2), 0.1)

    def test_nonpositive_tau(self):
        with pytest.raises(ValidationError):
            ChainSpec.from_variances([0.01], [[1.0]], 0.0)

    def test_steps_for(self):
        c = ChainSpec.from_variances([0.01], [[1.0]], 0.25 / 30)
        assert c.steps_for(0.25) == 30
        with pytest.raises(ValidationError, match="integer multiple"):
            c.steps_for(0.251)

    def test_fingerprint_tracks_initial_state(self):
        c = ChainSpec.from_variances([0.01, 0.02], [[0.5, 0.5], [0.5, 0.5]], 0.1)
        assert c.fingerprint() != c.with_initial(1).fingerprint()
        assert c.fingerprint() == ChainSpec(c.states, c.transition, c.step, 0).fingerprint()


class TestDistributions:
    def test_evolve_matches_matrix_power(self):
        rng = np.random.default_rng(1)
        c = random_chain(rng, 3)
        start = StateDistribution.point_mass(3, c.initial_state_index)
        p = evolve_distribution(c, start, 7).probs
        ref = np.linalg.matrix_power(c.transition, 7)[c.initial_state_index]
        assert np.allclose(p, ref, atol=1e-14)

    def test_stationary_is_fixed_point(self):
        c = random_chain(np.random.default_rng(2), 4)
        pi = stationary_distribution(c)
        assert np.allclose(pi @ c.transition, pi, atol=1e-12)


class TestEnumeration:
    def test_path_count_and_probability_mass(self):
        c = random_chain(np.random.default_rng(3), 3)
        paths = list(enumerate_paths(c, 5))
        assert len(paths) == 3**5
        assert abs(sum(p.prob for p in paths) - 1.0) < 1e-12

    def test_blocks_agree_with_generator(self):
        c = random_chain(np.random.default_rng(4), 2)
        blocks = np.vstack(list(iter_path_blocks(c, 6, block_size=10)))
        gen = np.array([p.states for p in enumerate_paths(c, 6)])
        assert np.array_equal(blocks, gen)

    def test_cap(self):
        c = random_chain(np.random.default_rng(5), 4)
        with pytest.raises(CapExceededError):
            enumerate_paths(c, 16, cap=10**8)

    @given(st.integers(0, 2**32 - 1))
    def test_sampler_transition_frequencies(self, seed):
        c = ChainSpec.from_variances([0.01, 0.04], [[0.9, 0.1], [0.3, 0.7]], 0.1, initial_var=0.01)
        paths = sample_paths(c, 4000, 1, np.random.default_rng(seed))
        freq = paths[:, 1].mean()
        assert abs(freq - 0.1) < 5 * np.sqrt(0.09 / 4000)
