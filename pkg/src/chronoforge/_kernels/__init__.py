"""Kernel backend selection.

Prefers the compiled extension when it was built; otherwise falls back
to the pure-Python twin. Set CHRONOFORGE_PURE_PYTHON=1 to force the
fallback (the benchmark and the parity tests use this).
"""

from __future__ import annotations

import os

if os.environ.get("CHRONOFORGE_PURE_PYTHON"):
    from chronoforge._kernels import pykernels as _impl
else:
    try:
        from chronoforge._kernels import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        from chronoforge._kernels import pykernels as _impl

BACKEND = _impl.BACKEND_NAME

OP_COUNT = _impl.OP_COUNT
OP_SUM = _impl.OP_SUM
OP_MEAN = _impl.OP_MEAN
OP_MIN = _impl.OP_MIN
OP_MAX = _impl.OP_MAX
OP_STD = _impl.OP_STD
CRITERION_GINI = _impl.CRITERION_GINI
CRITERION_ENTROPY = _impl.CRITERION_ENTROPY

agg_basic = _impl.agg_basic
agg_trend = _impl.agg_trend
agg_num_unique = _impl.agg_num_unique
scan_splits = _impl.scan_splits

__all__ = [
    "BACKEND",
    "OP_COUNT",
    "OP_SUM",
    "OP_MEAN",
    "OP_MIN",
    "OP_MAX",
    "OP_STD",
    "CRITERION_GINI",
    "CRITERION_ENTROPY",
    "agg_basic",
    "agg_trend",
    "agg_num_unique",
    "scan_splits",
]
