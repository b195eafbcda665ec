# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled training kernels.

Matrix products are delegated to BLAS through numpy (unbeatable at encoder
widths); everything elementwise around them (bias + softmax normalization,
cross-entropy reductions, residual/bias-gradient accumulation, the
momentum update) runs as single fused C passes with no temporaries.
Mirrors _numpy.py; keep both in sync when touching either.
"""

import numpy as np

from libc.math cimport exp, log

LOG_FLOOR = 1e-12
cdef double _FLOOR = 1e-12


def linear_probs(double[:, ::1] x, double[:, ::1] weights, double[::1] bias):
    logits = np.dot(np.asarray(x), np.asarray(weights).T)
    cdef double[:, ::1] p = logits
    cdef Py_ssize_t n = p.shape[0], k_count = p.shape[1]
    cdef Py_ssize_t j, k
    cdef double row_max, row_sum, inv, v
    for j in range(n):
        row_max = p[j, 0] + bias[0]
        for k in range(k_count):
            v = p[j, k] + bias[k]
            p[j, k] = v
            if v > row_max:
                row_max = v
        row_sum = 0.0
        for k in range(k_count):
            v = exp(p[j, k] - row_max)
            p[j, k] = v
            row_sum += v
        inv = 1.0 / row_sum
        for k in range(k_count):
            p[j, k] *= inv
    return logits


def soft_cross_entropy(double[:, ::1] probs, double[:, ::1] targets):
    cdef Py_ssize_t n = probs.shape[0], k_count = probs.shape[1]
    cdef Py_ssize_t j, k
    cdef double total = 0.0, row, v
    if n == 0:
        return 0.0
    if n * k_count > 4096:
        # numpy's vectorized log outruns a scalar libm loop at this size
        p = np.asarray(probs)
        t = np.asarray(targets)
        return float(-(t * np.log(np.maximum(p, _FLOOR))).sum(axis=1).mean())
    for j in range(n):
        row = 0.0
        for k in range(k_count):
            v = probs[j, k]
            if v < _FLOOR:
                v = _FLOOR
            row += targets[j, k] * log(v)
        total -= row
    return total / n


def hard_cross_entropy(double[:, ::1] probs, long long[::1] classes):
    cdef Py_ssize_t n = probs.shape[0]
    cdef Py_ssize_t j
    cdef double total = 0.0, v
    if n == 0:
        return 0.0
    for j in range(n):
        v = probs[j, classes[j]]
        if v < _FLOOR:
            v = _FLOOR
        total -= log(v)
    return total / n


def add_soft_grads(double[:, ::1] x, double[:, ::1] probs, double[:, ::1] targets,
                   double[:, ::1] grad_w, double[::1] grad_b, double scale):
    cdef Py_ssize_t n = probs.shape[0], k_count = probs.shape[1]
    cdef Py_ssize_t j, k
    cdef double v
    if n == 0:
        return
    diff = np.empty((n, k_count))
    cdef double[:, ::1] dv = diff
    for j in range(n):
        for k in range(k_count):
            v = probs[j, k] - targets[j, k]
            dv[j, k] = v
            grad_b[k] += scale * v
    gw = np.asarray(grad_w)
    gw += scale * np.dot(diff.T, np.asarray(x))


def add_hard_grads(double[:, ::1] x, double[:, ::1] probs, long long[::1] classes,
                   double[:, ::1] grad_w, double[::1] grad_b, double scale):
    cdef Py_ssize_t n = probs.shape[0], k_count = probs.shape[1]
    cdef Py_ssize_t j, k
    cdef double v
    if n == 0:
        return
    diff = np.empty((n, k_count))
    cdef double[:, ::1] dv = diff
    for j in range(n):
        for k in range(k_count):
            v = probs[j, k]
            if k == classes[j]:
                v -= 1.0
            dv[j, k] = v
            grad_b[k] += scale * v
    gw = np.asarray(grad_w)
    gw += scale * np.dot(diff.T, np.asarray(x))


def momentum_step(double[::1] param, double[::1] buf, double[::1] grad,
                  double lr, double momentum, double weight_decay):
    cdef Py_ssize_t i, n = param.shape[0]
    cdef double g
    for i in range(n):
        g = grad[i] + weight_decay * param[i]
        buf[i] = momentum * buf[i] + g
        param[i] -= lr * buf[i]
