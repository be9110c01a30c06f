"""chronoforge: a time-aware relational predictive-modeling pipeline.

Raw multi-table data plus a labeling function in; a validated,
deployable, fully provenanced model out — with the same operations in
training and deployment so the two can never drift apart.
"""

from chronoforge._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
