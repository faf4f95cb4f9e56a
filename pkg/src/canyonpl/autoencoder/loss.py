"""Masked log-cosh reconstruction loss."""

import numpy as np

ZERO_WEIGHT = 0.1


def log_cosh(x):
    """log(cosh(x)) without overflow for large |x|."""
    a = np.abs(x)
    return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)


def masked_logcosh_loss(Y, I, zero_weight: float = ZERO_WEIGHT):
    """Loss and gradient with respect to the reconstruction ``Y``.

    The first term only sees cells where the input is non-zero (the
    reconstruction is replaced by 0 elsewhere); the second term sees every
    cell and is down-weighted so zero-padded rows matter less. Both means run
    over every element, so for a batch this is the mean per-sample loss.
    """
    Y = np.asarray(Y, dtype=np.float64)
    I = np.asarray(I, dtype=np.float64)
    if Y.shape != I.shape:
        raise ValueError(f"shape mismatch: decoded {Y.shape} vs input {I.shape}")
    mask = I != 0
    diff = Y - I
    masked = np.where(mask, diff, 0.0)  # Y_hat - I with Y_hat = 0 where I = 0
    n = diff.size
    loss = log_cosh(masked).sum() / n + zero_weight * log_cosh(diff).sum() / n
    grad = (np.where(mask, np.tanh(diff), 0.0) + zero_weight * np.tanh(diff)) / n
    return float(loss), grad
