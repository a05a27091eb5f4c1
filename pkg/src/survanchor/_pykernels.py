"""Numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and same results (up to floating-point summation order).
"""
from __future__ import annotations

import numpy as np

_CHUNK = 512


def cox_loss_grad(scores: np.ndarray, time: np.ndarray, event: np.ndarray):
    order = np.argsort(time, kind="stable")
    t = time[order]
    s = scores[order]
    e = event[order].astype(bool)

    # log sum_{q >= p} exp(s_q); a tie group's risk set starts at its first member
    tail = np.logaddexp.accumulate(s[::-1])[::-1]
    first = np.searchsorted(t, t, side="left")
    last = np.searchsorted(t, t, side="right") - 1
    log_risk = tail[first]

    loss = -float(np.sum(s[e] - log_risk[e]))

    inv = np.where(e, -log_risk, -np.inf)
    running = np.logaddexp.accumulate(inv)[last]
    grad_sorted = np.exp(s + running) - e

    grad = np.empty_like(grad_sorted)
    grad[order] = grad_sorted
    return loss, grad


def concordance_counts(risk: np.ndarray, time: np.ndarray, event: np.ndarray):
    idx = np.flatnonzero(event)
    concordant = tied = comparable = 0.0
    for lo in range(0, idx.size, _CHUNK):
        rows = idx[lo:lo + _CHUNK]
        mask = time[rows, None] < time[None, :]
        diff = risk[rows, None] - risk[None, :]
        comparable += float(mask.sum())
        concordant += float((mask & (diff > 0)).sum())
        tied += float((mask & (diff == 0)).sum())
    return concordant, tied, comparable


def kendall_s(x: np.ndarray, y: np.ndarray) -> int:
    total = 0
    for lo in range(0, x.size, _CHUNK):
        sx = np.sign(x[lo:lo + _CHUNK, None] - x[None, :]).astype(np.int64)
        sy = np.sign(y[lo:lo + _CHUNK, None] - y[None, :]).astype(np.int64)
        total += int((sx * sy).sum())
    # every unordered pair was counted twice
    return total // 2
