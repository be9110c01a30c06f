"""Pure-Python kernel fallback.

Semantically and bitwise identical to the compiled extension in
``_ckernels.pyx``: both accumulate left to right in IEEE-754 doubles,
so either backend produces byte-identical artifacts. Keep the two files
in lockstep; tests/test_kernels.py asserts parity when the extension is
available.

Nulls travel as NaN; an aggregation whose window holds no non-null
value yields NaN (including COUNT, per the empty-multiset rule).
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"

OP_COUNT = 0
OP_SUM = 1
OP_MEAN = 2
OP_MIN = 3
OP_MAX = 4
OP_STD = 5

CRITERION_GINI = 0
CRITERION_ENTROPY = 1

_NAN = float("nan")


def agg_basic(op: int, values: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Aggregate values[s:e] for each range; NaN inputs are skipped."""
    vals = values.tolist()
    out = np.empty(len(starts), dtype=np.float64)
    for r in range(len(starts)):
        s = int(starts[r])
        e = int(ends[r])
        n = 0
        acc = 0.0
        lo = 0.0
        hi = 0.0
        for i in range(s, e):
            v = vals[i]
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
            out[r] = _NAN
        elif op == OP_COUNT:
            out[r] = float(n)
        elif op == OP_SUM:
            out[r] = acc
        elif op == OP_MEAN:
            out[r] = acc / n
        elif op == OP_MIN:
            out[r] = lo
        elif op == OP_MAX:
            out[r] = hi
        elif op == OP_STD:
            mean = acc / n
            ss = 0.0
            for i in range(s, e):
                v = vals[i]
                if v != v:
                    continue
                d = v - mean
                ss += d * d
            out[r] = math.sqrt(ss / n)
        else:
            raise ValueError(f"unknown aggregation op {op}")
    return out


def agg_trend(
    values: np.ndarray, times: np.ndarray, starts: np.ndarray, ends: np.ndarray
) -> np.ndarray:
    """Least-squares slope of value against time (seconds) per range."""
    vals = values.tolist()
    ts = times.tolist()
    out = np.empty(len(starts), dtype=np.float64)
    for r in range(len(starts)):
        s = int(starts[r])
        e = int(ends[r])
        n = 0
        sum_t = 0.0
        sum_v = 0.0
        for i in range(s, e):
            v = vals[i]
            t = ts[i]
            if v != v or t != t:
                continue
            sum_t += t
            sum_v += v
            n += 1
        if n < 2:
            out[r] = _NAN
            continue
        mean_t = sum_t / n
        mean_v = sum_v / n
        sxx = 0.0
        sxy = 0.0
        for i in range(s, e):
            v = vals[i]
            t = ts[i]
            if v != v or t != t:
                continue
            dt = t - mean_t
            sxx += dt * dt
            sxy += dt * (v - mean_v)
        out[r] = _NAN if sxx == 0.0 else sxy / sxx
    return out


def agg_num_unique(
    codes: np.ndarray, n_vocab: int, starts: np.ndarray, ends: np.ndarray
) -> np.ndarray:
    """Distinct non-null codes per range (codes in [0, n_vocab), null = -1)."""
    cs = codes.tolist()
    out = np.empty(len(starts), dtype=np.float64)
    seen = [-1] * n_vocab
    for r in range(len(starts)):
        s = int(starts[r])
        e = int(ends[r])
        count = 0
        for i in range(s, e):
            c = cs[i]
            if c < 0:
                continue
            if seen[c] != r:
                seen[c] = r
                count += 1
        out[r] = float(count) if count else _NAN
    return out


def _impurity(pos: float, count: int, criterion: int) -> float:
    p1 = pos / count
    p0 = 1.0 - p1
    if criterion == CRITERION_GINI:
        return 1.0 - p1 * p1 - p0 * p0
    h = 0.0
    if p1 > 0.0:
        h -= p1 * math.log2(p1)
    if p0 > 0.0:
        h -= p0 * math.log2(p0)
    return h


def scan_splits(
    values: np.ndarray, labels: np.ndarray, criterion: int, min_leaf: int
) -> tuple[bool, float, float]:
    """Best binary split of rows presorted by value.

    Returns (found, impurity_gain, threshold); thresholds are midpoints
    between adjacent distinct values, ties resolved to the lowest
    threshold (first best in ascending scan).
    """
    vals = values.tolist()
    labs = labels.tolist()
    n = len(vals)
    total_pos = 0.0
    for y in labs:
        total_pos += y
    parent = _impurity(total_pos, n, criterion)
    best_gain = -math.inf
    best_threshold = _NAN
    found = False
    pos_left = 0.0
    for i in range(1, n):
        pos_left += labs[i - 1]
        if vals[i] == vals[i - 1]:
            continue
        if i < min_leaf or (n - i) < min_leaf:
            continue
        gain = (
            parent
            - (i / n) * _impurity(pos_left, i, criterion)
            - ((n - i) / n) * _impurity(total_pos - pos_left, n - i, criterion)
        )
        if gain > best_gain:
            best_gain = gain
            best_threshold = (vals[i - 1] + vals[i]) / 2.0
            found = True
    return found, best_gain, best_threshold
