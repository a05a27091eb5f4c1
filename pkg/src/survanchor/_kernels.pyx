# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Must stay numerically interchangeable with _pykernels."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, INFINITY

cnp.import_array()


cdef inline double _logaddexp(double a, double b) nogil:
    cdef double hi, lo
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a > b:
        hi = a
        lo = b
    else:
        hi = b
        lo = a
    return hi + log1p(exp(lo - hi))


def cox_loss_grad(const double[::1] scores, const double[::1] time,
                  const long long[::1] event):
    cdef Py_ssize_t n = scores.shape[0]
    cdef cnp.intp_t[::1] order = np.argsort(time, kind="stable")
    cdef double[::1] log_risk = np.empty(n)
    cdef double[::1] grad = np.empty(n)
    cdef double acc = -INFINITY
    cdef double loss = 0.0
    cdef Py_ssize_t p, q, start, stop, k
    cdef double t

    with nogil:
        # descending sweep: log of risk-set sums, ties share the full group
        stop = n
        while stop > 0:
            t = time[order[stop - 1]]
            start = stop - 1
            while start > 0 and time[order[start - 1]] == t:
                start -= 1
            for p in range(start, stop):
                acc = _logaddexp(acc, scores[order[p]])
            for p in range(start, stop):
                log_risk[order[p]] = acc
            stop = start

        # ascending sweep: sum of 1/R_i over events with y_i <= y_k
        acc = -INFINITY
        start = 0
        while start < n:
            t = time[order[start]]
            stop = start + 1
            while stop < n and time[order[stop]] == t:
                stop += 1
            for p in range(start, stop):
                k = order[p]
                if event[k]:
                    acc = _logaddexp(acc, -log_risk[k])
                    loss -= scores[k] - log_risk[k]
            for p in range(start, stop):
                k = order[p]
                if acc == -INFINITY:
                    grad[k] = -event[k]
                else:
                    grad[k] = exp(scores[k] + acc) - event[k]
            start = stop
    return loss, np.asarray(grad)


cdef inline void _bit_add(long long[::1] tree, Py_ssize_t pos, long long v) nogil:
    # Fenwick tree over 1-based positions
    while pos < tree.shape[0]:
        tree[pos] += v
        pos += pos & (-pos)


cdef inline long long _bit_sum(long long[::1] tree, Py_ssize_t pos) nogil:
    cdef long long total = 0
    while pos > 0:
        total += tree[pos]
        pos -= pos & (-pos)
    return total


def _dense_ranks(values):
    """1-based dense ranks and the number of distinct values."""
    uniq, inv = np.unique(np.asarray(values), return_inverse=True)
    return np.ascontiguousarray(inv + 1, dtype=np.intp), uniq.shape[0]


def concordance_counts(const double[::1] risk, const double[::1] time,
                       const long long[::1] event):
    """Sweep times in descending order, keeping later rows' risks in a Fenwick tree."""
    cdef Py_ssize_t n = risk.shape[0]
    rank_arr, m = _dense_ranks(risk)
    cdef cnp.intp_t[::1] rank = rank_arr
    cdef cnp.intp_t[::1] order = np.argsort(time, kind="stable")
    cdef long long[::1] tree = np.zeros(m + 1, dtype=np.int64)
    cdef long long[::1] same = np.zeros(m + 1, dtype=np.int64)
    cdef long long inserted = 0
    cdef double concordant = 0.0, tied = 0.0, comparable = 0.0
    cdef Py_ssize_t start, stop, p, k
    cdef double t
    with nogil:
        stop = n
        while stop > 0:
            t = time[order[stop - 1]]
            start = stop - 1
            while start > 0 and time[order[start - 1]] == t:
                start -= 1
            for p in range(start, stop):
                k = order[p]
                if event[k]:
                    comparable += inserted
                    concordant += _bit_sum(tree, rank[k] - 1)
                    tied += same[rank[k]]
            for p in range(start, stop):
                k = order[p]
                _bit_add(tree, rank[k], 1)
                same[rank[k]] += 1
                inserted += 1
            stop = start
    return concordant, tied, comparable


def kendall_s(const double[::1] x, const double[::1] y):
    """Sweep x in ascending order; pairs tied in x or y contribute nothing."""
    cdef Py_ssize_t n = x.shape[0]
    rank_arr, m = _dense_ranks(y)
    cdef cnp.intp_t[::1] rank = rank_arr
    cdef cnp.intp_t[::1] order = np.argsort(x, kind="stable")
    cdef long long[::1] tree = np.zeros(m + 1, dtype=np.int64)
    cdef long long[::1] same = np.zeros(m + 1, dtype=np.int64)
    cdef long long inserted = 0, below, s = 0
    cdef Py_ssize_t start, stop, p, k
    cdef double v
    with nogil:
        start = 0
        while start < n:
            v = x[order[start]]
            stop = start + 1
            while stop < n and x[order[stop]] == v:
                stop += 1
            for p in range(start, stop):
                k = order[p]
                below = _bit_sum(tree, rank[k] - 1)
                s += below - (inserted - below - same[rank[k]])
            for p in range(start, stop):
                k = order[p]
                _bit_add(tree, rank[k], 1)
                same[rank[k]] += 1
                inserted += 1
            start = stop
    return s
