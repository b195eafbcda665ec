"""Pure-numpy reference implementation of the hot training kernels.

Same call surface as the compiled module ``_core``; used as the fallback
backend when the extension is not built. All functions expect C-contiguous
float64 arrays (int64 for class indices).
"""

import numpy as np

# Probabilities are clamped at this floor inside every log().
LOG_FLOOR = 1e-12


def linear_probs(x, weights, bias):
    """softmax(x @ weights.T + bias), row-stable, as a new (n, K) array."""
    logits = x @ weights.T + bias
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=1, keepdims=True)
    return logits


def soft_cross_entropy(probs, targets):
    """Mean over rows of -sum_k targets[k] * log(probs[k])."""
    if probs.shape[0] == 0:
        return 0.0
    logp = np.log(np.maximum(probs, LOG_FLOOR))
    return float(-(targets * logp).sum(axis=1).mean())


def hard_cross_entropy(probs, classes):
    """Mean over rows of -log(probs[row, classes[row]])."""
    n = probs.shape[0]
    if n == 0:
        return 0.0
    picked = probs[np.arange(n), classes]
    return float(-np.log(np.maximum(picked, LOG_FLOOR)).mean())


def add_soft_grads(x, probs, targets, grad_w, grad_b, scale):
    """Accumulate scale * (probs - targets)^T x into grad_w, row sums into grad_b."""
    diff = probs - targets
    grad_w += scale * (diff.T @ x)
    grad_b += scale * diff.sum(axis=0)


def add_hard_grads(x, probs, classes, grad_w, grad_b, scale):
    """Same as add_soft_grads with one-hot targets given as class indices."""
    n = probs.shape[0]
    if n == 0:
        return
    diff = probs.copy()
    diff[np.arange(n), classes] -= 1.0
    grad_w += scale * (diff.T @ x)
    grad_b += scale * diff.sum(axis=0)


def momentum_step(param, buf, grad, lr, momentum, weight_decay):
    """In-place SGD with momentum: g += wd*p; v = mu*v + g; p -= lr*v."""
    g = grad + weight_decay * param
    buf *= momentum
    buf += g
    param -= lr * buf
