# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: windowed aggregations and the CART split scan.

Must stay in bitwise lockstep with pykernels.py (same accumulation
order, same formulas); tests/test_kernels.py asserts parity.
"""

from libc.math cimport log2, sqrt, NAN, INFINITY

import numpy as np

BACKEND_NAME = "cython"

OP_COUNT = 0
OP_SUM = 1
OP_MEAN = 2
OP_MIN = 3
OP_MAX = 4
OP_STD = 5

CRITERION_GINI = 0
CRITERION_ENTROPY = 1


def agg_basic(int op, double[::1] values, long long[::1] starts, long long[::1] ends):
    cdef Py_ssize_t n_ranges = starts.shape[0]
    out_arr = np.empty(n_ranges, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t r, i, s, e
    cdef long long n
    cdef double v, acc, lo, hi, mean, ss, d
    for r in range(n_ranges):
        s = <Py_ssize_t> starts[r]
        e = <Py_ssize_t> ends[r]
        n = 0
        acc = 0.0
        lo = 0.0
        hi = 0.0
        for i in range(s, e):
            v = values[i]
            if v != v:
                continue
            if n == 0:
                lo = v
                hi = v
            else:
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
            acc += v
            n += 1
        if n == 0:
            out[r] = NAN
        elif op == 0:
            out[r] = <double> n
        elif op == 1:
            out[r] = acc
        elif op == 2:
            out[r] = acc / n
        elif op == 3:
            out[r] = lo
        elif op == 4:
            out[r] = hi
        elif op == 5:
            mean = acc / n
            ss = 0.0
            for i in range(s, e):
                v = values[i]
                if v != v:
                    continue
                d = v - mean
                ss += d * d
            out[r] = sqrt(ss / n)
        else:
            raise ValueError(f"unknown aggregation op {op}")
    return out_arr


def agg_trend(double[::1] values, double[::1] times, long long[::1] starts, long long[::1] ends):
    cdef Py_ssize_t n_ranges = starts.shape[0]
    out_arr = np.empty(n_ranges, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t r, i, s, e
    cdef long long n
    cdef double v, t, sum_t, sum_v, mean_t, mean_v, sxx, sxy, dt
    for r in range(n_ranges):
        s = <Py_ssize_t> starts[r]
        e = <Py_ssize_t> ends[r]
        n = 0
        sum_t = 0.0
        sum_v = 0.0
        for i in range(s, e):
            v = values[i]
            t = times[i]
            if v != v or t != t:
                continue
            sum_t += t
            sum_v += v
            n += 1
        if n < 2:
            out[r] = NAN
            continue
        mean_t = sum_t / n
        mean_v = sum_v / n
        sxx = 0.0
        sxy = 0.0
        for i in range(s, e):
            v = values[i]
            t = times[i]
            if v != v or t != t:
                continue
            dt = t - mean_t
            sxx += dt * dt
            sxy += dt * (v - mean_v)
        out[r] = NAN if sxx == 0.0 else sxy / sxx
    return out_arr


def agg_num_unique(long long[::1] codes, long long n_vocab, long long[::1] starts, long long[::1] ends):
    cdef Py_ssize_t n_ranges = starts.shape[0]
    out_arr = np.empty(n_ranges, dtype=np.float64)
    cdef double[::1] out = out_arr
    seen_arr = np.full(n_vocab, -1, dtype=np.int64)
    cdef long long[::1] seen = seen_arr
    cdef Py_ssize_t r, i, s, e
    cdef long long c, count
    for r in range(n_ranges):
        s = <Py_ssize_t> starts[r]
        e = <Py_ssize_t> ends[r]
        count = 0
        for i in range(s, e):
            c = codes[i]
            if c < 0:
                continue
            if seen[c] != <long long> r:
                seen[c] = <long long> r
                count += 1
        out[r] = <double> count if count else NAN
    return out_arr


cdef inline double _impurity(double pos, double count, int criterion):
    cdef double p1 = pos / count
    cdef double p0 = 1.0 - p1
    cdef double h
    if criterion == 0:
        return 1.0 - p1 * p1 - p0 * p0
    h = 0.0
    if p1 > 0.0:
        h -= p1 * log2(p1)
    if p0 > 0.0:
        h -= p0 * log2(p0)
    return h


def scan_splits(double[::1] values, double[::1] labels, int criterion, long long min_leaf):
    cdef Py_ssize_t n = values.shape[0]
    cdef double total_pos = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        total_pos += labels[i]
    cdef double parent = _impurity(total_pos, <double> n, criterion)
    cdef double best_gain = -INFINITY
    cdef double best_threshold = NAN
    cdef bint found = False
    cdef double pos_left = 0.0
    cdef double gain
    for i in range(1, n):
        pos_left += labels[i - 1]
        if values[i] == values[i - 1]:
            continue
        if i < min_leaf or (n - i) < min_leaf:
            continue
        gain = (
            parent
            - ((<double> i) / n) * _impurity(pos_left, <double> i, criterion)
            - ((<double> (n - i)) / n) * _impurity(total_pos - pos_left, <double> (n - i), criterion)
        )
        if gain > best_gain:
            best_gain = gain
            best_threshold = (values[i - 1] + values[i]) / 2.0
            found = True
    return bool(found), best_gain, best_threshold
