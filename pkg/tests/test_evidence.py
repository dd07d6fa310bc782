import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esmap import (
    ValidationError,
    dirichlet_from_evidence,
    edl_mse_loss,
    evidence_from_logits,
    expected_probs,
    kl_to_uniform,
    masked_alpha,
    total_edl_loss,
    total_edl_loss_grad,
    vacuity,
)
from esmap.evidence import activation_grad

from oracles import central_difference_grad, high_precision_softplus

LN2 = math.log(2.0)

# frozen from the high-precision softplus oracle (50-digit mpmath)
SOFTPLUS_2 = 2.1269280110429724964
SOFTPLUS_NEG1 = 0.31326168751822283405
SOFTPLUS_HALF = 0.97407698418010668087

# frozen Monte Carlo oracle estimates, 1e6 Dirichlet samples each
MC_MSE_151 = 1.3220753826587668       # E||y - p||^2, p ~ Dir(1,5,1), y = e0
MC_KL_211 = 0.265358405445371         # KL(Dir(2,1,1) || Dir(1,1,1))
MC_KL_555 = 0.9453142484328455        # KL(Dir(5,5,5) || Dir(1,1,1))


class TestEvidenceFromLogits:
    def test_relu_zero(self):
        assert np.array_equal(evidence_from_logits([0, 0, 0], "relu"), [0, 0, 0])

    def test_relu_clamps_negative(self):
        assert np.array_equal(evidence_from_logits([-1, -5, -0.5], "relu"), [0, 0, 0])

    def test_softplus_zero_is_ln2(self):
        np.testing.assert_allclose(evidence_from_logits([0, 0, 0]), LN2, rtol=1e-15)

    def test_softplus_matches_high_precision_oracle(self):
        got = evidence_from_logits([2.0, -1.0, 0.5], "softplus")
        np.testing.assert_allclose(got, [SOFTPLUS_2, SOFTPLUS_NEG1, SOFTPLUS_HALF],
                                   rtol=1e-14)
        for z, want in zip([2.0, -1.0, 0.5], got):
            assert abs(high_precision_softplus(z) - want) < 1e-13

    def test_exp_clamped_caps_output(self):
        out = evidence_from_logits([0.0, 100.0], "exp_clamped")
        assert out[0] == pytest.approx(1.0)
        assert out[1] == 1e6
        out = evidence_from_logits([0.0, 100.0], "exp_clamped", exp_cap=10.0)
        assert out[1] == 10.0

    def test_rejects_non_finite_naming_index(self):
        with pytest.raises(ValidationError, match=r"\(1,\)"):
            evidence_from_logits([0.0, np.nan, 1.0])
        with pytest.raises(ValidationError, match="non-finite"):
            evidence_from_logits([np.inf, 0.0])

    def test_rejects_unknown_activation(self):
        with pytest.raises(ValidationError, match="activation"):
            evidence_from_logits([0.0, 1.0], "sigmoid")

    def test_rejects_single_class(self):
        with pytest.raises(ValidationError):
            evidence_from_logits([1.0])

    @given(st.lists(st.floats(-30, 30), min_size=2, max_size=6),
           st.floats(0.01, 5.0),
           st.sampled_from(["softplus", "relu", "exp_clamped"]))
    def test_monotone_in_each_component(self, logits, bump, activation):
        base = evidence_from_logits(logits, activation)
        for i in range(len(logits)):
            shifted = list(logits)
            shifted[i] += bump
            out = evidence_from_logits(shifted, activation)
            assert out[i] >= base[i]
            others = np.delete(out, i)
            np.testing.assert_array_equal(others, np.delete(base, i))

    def test_nonnegative_everywhere(self):
        z = np.linspace(-50, 50, 1001)
        for act in ("softplus", "relu", "exp_clamped"):
            out = evidence_from_logits(np.stack([z, z], axis=-1), act)
            assert np.all(out >= 0.0)


class TestDirichletFromEvidence:
    def test_zero_evidence_gives_uniform(self):
        np.testing.assert_array_equal(dirichlet_from_evidence([0, 0, 0]), [1, 1, 1])

    def test_additive_shift(self):
        np.testing.assert_array_equal(dirichlet_from_evidence([9, 0, 0]), [10, 1, 1])
        np.testing.assert_allclose(dirichlet_from_evidence([0.5, 1.5, 2.0]),
                                   [1.5, 2.5, 3.0], rtol=0, atol=0)

    def test_rejects_negative_evidence(self):
        with pytest.raises(ValidationError, match="negative"):
            dirichlet_from_evidence([1.0, -0.1])


class TestExpectedProbs:
    def test_symmetry(self):
        np.testing.assert_allclose(expected_probs([1, 1, 1]), 1 / 3, rtol=1e-15)

    def test_forced_arithmetic(self):
        np.testing.assert_allclose(expected_probs([2, 1, 1]), [0.5, 0.25, 0.25])
        np.testing.assert_allclose(expected_probs([10, 1, 1]),
                                   [10 / 12, 1 / 12, 1 / 12])

    @given(st.lists(st.floats(1e-3, 1e6), min_size=2, max_size=10))
    def test_normalizes_to_one(self, alpha):
        p = expected_probs(alpha)
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.all(p >= 0.0) and np.all(p <= 1.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            expected_probs([1.0, 0.0])


class TestVacuity:
    def test_zero_evidence_is_one(self):
        assert vacuity([1, 1, 1]) == 1.0

    def test_forced_arithmetic(self):
        assert vacuity([10, 1, 1]) == pytest.approx(0.25, abs=1e-15)
        assert vacuity([2, 2, 2, 2]) == pytest.approx(0.5, abs=1e-15)

    def test_rejects_sub_evidential_alpha(self):
        with pytest.raises(ValidationError, match="alpha >= 1"):
            vacuity([0.5, 1.0, 1.0])

    @given(st.lists(st.floats(0.0, 1e4), min_size=2, max_size=8),
           st.integers(0, 7), st.floats(1e-6, 1e3))
    def test_strictly_decreases_with_added_evidence(self, evidence, idx, extra):
        e = np.asarray(evidence)
        bumped = e.copy()
        bumped[idx % len(e)] += extra
        u0 = vacuity(dirichlet_from_evidence(e))
        u1 = vacuity(dirichlet_from_evidence(bumped))
        assert 0.0 < u1 < u0 <= 1.0


class TestMaskedAlpha:
    def test_true_class_reset_to_one(self):
        np.testing.assert_array_equal(masked_alpha([7, 2, 3], [1, 0, 0]), [1, 2, 3])
        np.testing.assert_array_equal(masked_alpha([4, 4, 4], [0, 0, 1]), [4, 4, 1])

    def test_uniform_fixed_point(self):
        for y in np.eye(3):
            np.testing.assert_array_equal(masked_alpha([1, 1, 1], y), [1, 1, 1])

    def test_rejects_non_one_hot(self):
        with pytest.raises(ValidationError, match="one-hot"):
            masked_alpha([1, 2, 3], [1, 1, 0])
        with pytest.raises(ValidationError, match="one-hot"):
            masked_alpha([1, 2, 3], [0.5, 0.5, 0.0])


class TestEdlMseLoss:
    def test_uniform_alpha_closed_form(self):
        # 2/3 squared error + 1/6 Dirichlet variance
        assert edl_mse_loss([1, 1, 1], [1, 0, 0]) == pytest.approx(5 / 6, abs=1e-14)

    def test_matches_monte_carlo_oracle(self):
        assert edl_mse_loss([1, 5, 1], [1, 0, 0]) == pytest.approx(MC_MSE_151, abs=1e-2)
        assert edl_mse_loss([1, 1, 1], [1, 0, 0]) == pytest.approx(5 / 6, abs=1e-2)

    def test_vanishes_in_concentrated_limit(self):
        assert edl_mse_loss([1e6, 1, 1], [1, 0, 0]) < 1e-4

    def test_rejects_bad_labels(self):
        with pytest.raises(ValidationError):
            edl_mse_loss([1, 1, 1], [1, 1, 0])
        with pytest.raises(ValidationError):
            edl_mse_loss([1, 1, 1], [1, 0])


class TestKlToUniform:
    def test_zero_at_uniform(self):
        assert kl_to_uniform([1, 1, 1]) == 0.0
        assert kl_to_uniform([1, 1, 1, 1, 1]) == 0.0

    def test_matches_monte_carlo_oracle(self):
        assert kl_to_uniform([2, 1, 1]) == pytest.approx(MC_KL_211, abs=1e-2)
        assert kl_to_uniform([5, 5, 5]) == pytest.approx(MC_KL_555, abs=1e-2)
        assert kl_to_uniform([5, 5, 5]) > 0.0

    @given(st.lists(st.floats(0.01, 100.0), min_size=2, max_size=8))
    def test_nonnegative_with_equality_only_at_uniform(self, alpha):
        kl = kl_to_uniform(alpha)
        if np.allclose(alpha, 1.0, rtol=0, atol=0):
            assert kl == 0.0
        else:
            assert kl >= 0.0
            if np.max(np.abs(np.asarray(alpha) - 1.0)) > 1e-3:
                assert kl > 0.0


class TestTotalEdlLoss:
    def test_zero_coefficient_reduces_to_mse(self):
        alpha, y = [3.0, 1.5, 2.0], [0, 1, 0]
        assert total_edl_loss(alpha, y, 0.0) == edl_mse_loss(alpha, y)

    def test_uniform_alpha_has_no_kl_term(self):
        assert total_edl_loss([1, 1, 1], [1, 0, 0], 1.0) == pytest.approx(5 / 6, abs=1e-14)

    def test_monotone_in_lambda(self):
        alpha, y = [4.0, 2.0, 7.0], [1, 0, 0]
        assert total_edl_loss(alpha, y, 10.0) >= total_edl_loss(alpha, y, 1.0)

    def test_nonnegative_on_random_inputs(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            k = rng.integers(2, 9)
            alpha = rng.uniform(0.05, 50.0, k)
            y = np.eye(k)[rng.integers(k)]
            assert total_edl_loss(alpha, y, rng.uniform(0, 2)) >= 0.0

    def test_rejects_negative_lambda(self):
        with pytest.raises(ValidationError):
            total_edl_loss([1, 1], [1, 0], -0.1)


class TestLossGradient:
    @staticmethod
    def _loss_from_logits(z, y, lam, activation):
        alpha = evidence_from_logits(z, activation) + 1.0
        return total_edl_loss(alpha, y, lam)

    @pytest.mark.parametrize("activation", ["softplus", "relu", "exp_clamped"])
    def test_matches_finite_differences(self, activation):
        rng = np.random.default_rng(11)
        for _ in range(100):
            k = int(rng.integers(3, 11))
            z = rng.normal(0.0, 1.5, k)
            if activation == "relu":
                # keep clear of the subgradient kink at 0
                z = np.where(np.abs(z) < 0.05, 0.1, z)
            y = np.eye(k)[rng.integers(k)]
            lam = float(rng.uniform(0.0, 1.0))
            analytic = total_edl_loss_grad(z, y, lam, activation)
            fd = central_difference_grad(
                lambda v: self._loss_from_logits(v, y, lam, activation), z)
            rel = np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-12)
            assert rel < 1e-5

    def test_activation_grad_edge_cases(self):
        assert activation_grad([0.0, 1.0], "relu")[0] == 0.0
        g = activation_grad([100.0, 0.0], "exp_clamped")
        assert g[0] == 0.0 and g[1] == pytest.approx(1.0)

    def test_rejects_batched_logits(self):
        with pytest.raises(ValidationError):
            total_edl_loss_grad(np.zeros((2, 3)), [1, 0, 0], 0.5)


@settings(max_examples=50)
@given(st.lists(st.floats(0.0, 1e3), min_size=2, max_size=6),
       st.floats(0.0, 2.0))
def test_loss_pipeline_nonnegative(evidence, lam):
    alpha = dirichlet_from_evidence(evidence)
    y = np.eye(len(evidence))[0]
    assert total_edl_loss(alpha, y, lam) >= 0.0
