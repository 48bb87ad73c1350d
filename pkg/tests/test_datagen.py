import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aol import AnalysisOperator, perturb_operator, random_untf, sample_cosparse
from aol.datagen import SyntheticSpec


class TestSyntheticSpec:
    def test_q_must_be_below_n(self):
        with pytest.raises(ValueError):
            SyntheticSpec(a=24, n=16, l=10, q=16, gamma_perturb=0.0)

    def test_l_positive(self):
        with pytest.raises(ValueError):
            SyntheticSpec(a=24, n=16, l=0, q=4, gamma_perturb=0.0)


class TestRandomUntf:
    def test_square_is_orthonormal(self):
        op = random_untf(16, 16, seed=5)
        assert np.linalg.norm(op.gram() - np.eye(16)) < 1e-8
        np.testing.assert_allclose(
            np.linalg.norm(op.entries, axis=1), 1.0, atol=1e-8
        )

    def test_24x16_residuals_and_row_norms(self):
        op = random_untf(24, 16, seed=0)
        assert op.frame_residual() <= 1e-8
        assert op.row_residual() <= 1e-8
        np.testing.assert_allclose(
            np.linalg.norm(op.entries, axis=1), math.sqrt(2 / 3), atol=1e-8
        )

    def test_deterministic(self):
        a = random_untf(24, 16, seed=0)
        b = random_untf(24, 16, seed=0)
        np.testing.assert_array_equal(a.entries, b.entries)

    @given(st.integers(0, 2**31))
    @settings(max_examples=10, deadline=None)
    def test_always_feasible(self, seed):
        op = random_untf(12, 8, seed=seed)
        assert op.frame_residual() <= 1e-8 and op.row_residual() <= 1e-8


class TestSampleCosparse:
    def test_q_zero_is_plain_gaussian(self):
        op = random_untf(6, 4, seed=1)
        X = sample_cosparse(op, q=0, count=5, seed=2)
        ref = np.random.default_rng(2).standard_normal((5, 4)).T
        np.testing.assert_array_equal(X, ref)

    def test_square_identity_full_cosparsity(self):
        op = AnalysisOperator(np.eye(4), row_norm_target=1.0)
        X = sample_cosparse(op, q=3, count=20, seed=3)
        for j in range(20):
            assert np.count_nonzero(np.abs(X[:, j]) > 1e-12) == 1

    def test_cosparsity_certified(self):
        op = random_untf(24, 16, seed=5)
        X = sample_cosparse(op, q=8, count=768, seed=5)
        Z = np.abs(op.entries @ X)
        assert np.all((Z < 1e-10).sum(axis=0) >= 8)

    def test_deterministic(self):
        op = random_untf(24, 16, seed=5)
        a = sample_cosparse(op, q=8, count=10, seed=7)
        b = sample_cosparse(op, q=8, count=10, seed=7)
        np.testing.assert_array_equal(a, b)

    def test_q_at_n_rejected(self):
        op = random_untf(6, 4, seed=1)
        with pytest.raises(ValueError):
            sample_cosparse(op, q=4, count=1, seed=0)

    @given(st.integers(0, 3), st.integers(0, 2**31))
    @settings(max_examples=15, deadline=None)
    def test_columns_nonzero(self, q, seed):
        op = random_untf(6, 4, seed=2)
        X = sample_cosparse(op, q=q, count=8, seed=seed)
        assert np.all(np.linalg.norm(X, axis=0) > 0)


class TestPerturbOperator:
    def test_gamma_zero_is_identity(self):
        op0 = random_untf(24, 16, seed=0)
        out = perturb_operator(op0, gamma=0.0, seed=1)
        np.testing.assert_array_equal(out.entries, op0.entries)

    def test_gamma_inf_ignores_reference(self):
        op0 = random_untf(24, 16, seed=0)
        other = random_untf(24, 16, seed=99)
        a = perturb_operator(op0, gamma=math.inf, seed=4)
        b = perturb_operator(other, gamma=math.inf, seed=4)
        np.testing.assert_array_equal(a.entries, b.entries)

    def test_gamma_one_stays_closer_than_random(self):
        op0 = random_untf(24, 16, seed=0)
        closer = 0
        for seed in range(100):
            near = perturb_operator(op0, gamma=1.0, seed=seed)
            far = random_untf(24, 16, seed=seed + 10_000)
            if np.linalg.norm(near.entries - op0.entries) < np.linalg.norm(
                far.entries - op0.entries
            ):
                closer += 1
        assert closer >= 95

    def test_negative_gamma_rejected(self):
        op0 = random_untf(6, 4, seed=0)
        with pytest.raises(ValueError):
            perturb_operator(op0, gamma=-1.0, seed=0)

    def test_output_feasible(self):
        op0 = random_untf(24, 16, seed=0)
        out = perturb_operator(op0, gamma=10.0, seed=3)
        assert out.frame_residual() <= 1e-8 and out.row_residual() <= 1e-8
