"""Truncated Taylor series arithmetic, vectorized over a trailing axis.

A series is an array ``c`` of shape ``(K + 1, ...)`` holding the Taylor
coefficients c_0..c_K of a function of one variable s around s = 0.
"""
from __future__ import annotations

import numpy as np


def mul(a, b):
    out = np.zeros_like(a)
    for k in range(a.shape[0]):
        for j in range(k + 1):
            out[k] += a[j] * b[k - j]
    return out


def exp(a):
    out = np.zeros_like(a)
    out[0] = np.exp(a[0])
    for k in range(1, a.shape[0]):
        acc = np.zeros_like(a[0])
        for j in range(1, k + 1):
            acc += j * a[j] * out[k - j]
        out[k] = acc / k
    return out


def recip(a):
    out = np.zeros_like(a)
    out[0] = 1.0 / a[0]
    for k in range(1, a.shape[0]):
        acc = np.zeros_like(a[0])
        for j in range(1, k + 1):
            acc += a[j] * out[k - j]
        out[k] = -acc * out[0]
    return out


def sqrt(a):
    out = np.zeros_like(a)
    out[0] = np.sqrt(a[0])
    for k in range(1, a.shape[0]):
        acc = a[k].copy()
        for j in range(1, k):
            acc -= out[j] * out[k - j]
        out[k] = acc / (2.0 * out[0])
    return out


def compose(outer, inner):
    """Series of ``f(g(s))`` from the Taylor coefficients of f at g(0) and the series g."""
    shift = inner.copy()
    shift[0] = 0.0
    out = np.zeros_like(inner)
    out[0] = outer[-1]
    for k in range(outer.shape[0] - 2, -1, -1):
        out = mul(out, shift)
        out[0] += outer[k]
    return out


def evaluate(c, s):
    """Value of the truncated polynomial at ``s``."""
    out = np.zeros_like(c[0])
    for k in range(c.shape[0] - 1, -1, -1):
        out = out * s + c[k]
    return out
