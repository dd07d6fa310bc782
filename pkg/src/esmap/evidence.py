"""Evidential classification head math on Dirichlet distributions.

Implements the numeric core of evidential semantic segmentation: mapping
network logits to non-negative class evidence, the induced Dirichlet
posterior (alpha = evidence + 1), expected class probabilities, vacuity
uncertainty, and the expected-MSE evidential loss with its KL-to-uniform
regularizer. All functions are pure, operate on float64 numpy arrays with
the class axis last, and accept arbitrary leading batch dimensions.

No neural network lives here; logits or evidence come from the caller.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, gammaln, polygamma, psi

from .errors import ValidationError

ACTIVATIONS = ("softplus", "relu", "exp_clamped")

DEFAULT_EXP_CAP = 1e6


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1] < 2:
        raise ValidationError(f"{name} must have at least 2 classes, got shape {arr.shape}")
    return arr


def _check_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        idx = tuple(int(i) for i in bad)
        raise ValidationError(f"{name} has non-finite value at index {idx}")


def evidence_from_logits(logits, activation: str = "softplus",
                         exp_cap: float = DEFAULT_EXP_CAP) -> np.ndarray:
    """Map raw logits to non-negative class evidence.

    Supported activations: ``softplus`` (default), ``relu``, and
    ``exp_clamped`` which caps each output at ``exp_cap`` to keep
    downstream sums finite.
    """
    z = _as_float_array(logits, "logits")
    _check_finite(z, "logits")
    if activation == "softplus":
        return np.logaddexp(0.0, z)
    if activation == "relu":
        return np.maximum(0.0, z)
    if activation == "exp_clamped":
        # clip before exp to dodge the overflow warning; the cap lands exactly
        return np.minimum(np.exp(np.minimum(z, 709.0)), exp_cap)
    raise ValidationError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")


def activation_grad(logits, activation: str = "softplus",
                    exp_cap: float = DEFAULT_EXP_CAP) -> np.ndarray:
    """Componentwise derivative of ``evidence_from_logits``.

    relu uses subgradient 0 at the origin; exp_clamped has derivative 0
    once the cap is reached.
    """
    z = _as_float_array(logits, "logits")
    _check_finite(z, "logits")
    if activation == "softplus":
        return expit(z)
    if activation == "relu":
        return (z > 0.0).astype(np.float64)
    if activation == "exp_clamped":
        exp_z = np.exp(np.minimum(z, 709.0))
        return np.where(exp_z < exp_cap, exp_z, 0.0)
    raise ValidationError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")


def validate_evidence(e) -> np.ndarray:
    """Check evidence is finite and non-negative; returns it as float64."""
    arr = _as_float_array(e, "evidence")
    _check_finite(arr, "evidence")
    if np.any(arr < 0.0):
        bad = np.argwhere(arr < 0.0)[0]
        raise ValidationError(f"evidence has negative value at index {tuple(int(i) for i in bad)}")
    return arr


def validate_alpha(alpha) -> np.ndarray:
    """Check Dirichlet concentrations are finite and strictly positive."""
    arr = _as_float_array(alpha, "alpha")
    _check_finite(arr, "alpha")
    if np.any(arr <= 0.0):
        bad = np.argwhere(arr <= 0.0)[0]
        raise ValidationError(f"alpha must be strictly positive, violated at index "
                              f"{tuple(int(i) for i in bad)}")
    return arr


def _validate_one_hot(y, k: int) -> np.ndarray:
    arr = np.asarray(y, dtype=np.float64)
    if arr.shape[-1] != k:
        raise ValidationError(f"one-hot label length {arr.shape[-1]} != {k} classes")
    ones = np.sum(arr == 1.0, axis=-1)
    zeros = np.sum(arr == 0.0, axis=-1)
    if not np.all((ones == 1) & (zeros == k - 1)):
        raise ValidationError("label must be one-hot (exactly one 1, rest 0)")
    return arr


def dirichlet_from_evidence(e) -> np.ndarray:
    """alpha = evidence + 1, so every concentration is >= 1."""
    return validate_evidence(e) + 1.0


def expected_probs(alpha) -> np.ndarray:
    """Mean of the Dirichlet: p_c = alpha_c / sum(alpha)."""
    a = validate_alpha(alpha)
    return a / np.sum(a, axis=-1, keepdims=True)


def vacuity(alpha) -> np.ndarray | float:
    """Vacuity u = K / sum(alpha) of an evidence-derived Dirichlet.

    Defined only for alpha >= 1 (i.e. alpha = evidence + 1); u == 1 exactly
    when all evidence is zero and decreases toward 0 as evidence grows.
    Map-side priors below 1 are not evidential posteriors; for those use
    the relaxed accessor on the voxel map.
    """
    a = validate_alpha(alpha)
    if np.any(a < 1.0 - 1e-12):
        bad = np.argwhere(a < 1.0 - 1e-12)[0]
        raise ValidationError(
            f"vacuity requires alpha >= 1 (evidence-derived); violated at index "
            f"{tuple(int(i) for i in bad)}")
    k = a.shape[-1]
    u = k / np.sum(a, axis=-1)
    return float(u) if np.isscalar(u) or u.ndim == 0 else u


def edl_mse_loss(alpha, y) -> float:
    """Closed-form expected squared error E||y - p||^2 under Dir(alpha).

    Equals sum_c (y_c - p_c)^2 + p_c (1 - p_c) / (S + 1) with p = alpha/S.
    """
    a = validate_alpha(alpha)
    yv = _validate_one_hot(y, a.shape[-1])
    s = np.sum(a, axis=-1, keepdims=True)
    p = a / s
    err = np.sum((yv - p) ** 2, axis=-1)
    var = np.sum(p * (1.0 - p), axis=-1) / (np.squeeze(s, axis=-1) + 1.0)
    out = err + var
    return float(out) if out.ndim == 0 else out


def masked_alpha(alpha, y) -> np.ndarray:
    """Replace the true-class concentration by 1, leaving the rest untouched."""
    a = validate_alpha(alpha)
    yv = _validate_one_hot(y, a.shape[-1])
    return yv + (1.0 - yv) * a


def kl_to_uniform(alpha_tilde) -> float:
    """KL(Dir(alpha_tilde) || Dir(1, ..., 1)) via the log-gamma/digamma closed form.

    Zero exactly at the uniform Dirichlet, strictly positive elsewhere.
    """
    a = validate_alpha(alpha_tilde)
    k = a.shape[-1]
    s = np.sum(a, axis=-1)
    kl = (gammaln(s) - np.sum(gammaln(a), axis=-1) - gammaln(k)
          + np.sum((a - 1.0) * (psi(a) - psi(s)[..., None]), axis=-1))
    # last-ulp cancellation near the uniform Dirichlet can dip below zero
    kl = np.maximum(kl, 0.0)
    return float(kl) if kl.ndim == 0 else kl


def total_edl_loss(alpha, y, lambda_t: float) -> float:
    """Expected-MSE loss plus lambda_t times the KL regularizer on masked alpha."""
    if lambda_t < 0.0:
        raise ValidationError(f"lambda_t must be >= 0, got {lambda_t}")
    return edl_mse_loss(alpha, y) + lambda_t * kl_to_uniform(masked_alpha(alpha, y))


def total_edl_loss_grad(logits, y, lambda_t: float, activation: str = "softplus",
                        exp_cap: float = DEFAULT_EXP_CAP) -> np.ndarray:
    """Analytic gradient of total_edl_loss w.r.t. logits, for a single instance.

    The loss is composed as logits -> evidence (componentwise activation)
    -> alpha = e + 1 -> loss, so the chain rule reduces to a per-component
    activation derivative times d(loss)/d(alpha). Hand-derived closed form;
    finite differences serve as the test oracle.
    """
    if lambda_t < 0.0:
        raise ValidationError(f"lambda_t must be >= 0, got {lambda_t}")
    z = _as_float_array(logits, "logits")
    if z.ndim != 1:
        raise ValidationError("total_edl_loss_grad expects a single 1-D logit vector")
    a = evidence_from_logits(z, activation, exp_cap) + 1.0
    yv = _validate_one_hot(y, a.shape[-1])
    k = a.shape[-1]
    s = float(np.sum(a))
    p = a / s

    # d/d(alpha_j) of sum_c (y_c - p_c)^2, using dp_c/dalpha_j = (delta_cj - p_c)/S
    sq_term = (2.0 / s) * ((p - yv) - np.sum((p - yv) * p))

    # d/d(alpha_j) of sum_c p_c(1-p_c)/(S+1)
    var_term = (2.0 * (np.sum(p * p) - p) / (s * (s + 1.0))
                - np.sum(p * (1.0 - p)) / (s + 1.0) ** 2)

    # d/d(alpha_j) of KL(Dir(masked alpha) || Dir(1)); masking zeroes the
    # true-class derivative via the (1 - y) factor.
    am = yv + (1.0 - yv) * a
    sm = float(np.sum(am))
    trigamma = polygamma(1, am)
    kl_term = (1.0 - yv) * ((am - 1.0) * trigamma - (sm - k) * polygamma(1, sm))

    dloss_dalpha = sq_term + var_term + lambda_t * kl_term
    return dloss_dalpha * activation_grad(z, activation, exp_cap)
