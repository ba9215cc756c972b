"""Kernel dispatch.

The hot edge-local loops (gradients, penalty sums, scatter-adds) exist in
two interchangeable implementations: a Cython extension built at install
time and a NumPy fallback.  The compiled one is preferred when importable;
setting the environment variable ``VARCAP_PURE_PYTHON`` (to any non-empty
value) before import forces the fallback.  ``BACKEND`` records the choice.
"""

from __future__ import annotations

import os

from . import _kernels_np

if os.environ.get("VARCAP_PURE_PYTHON"):
    _impl = _kernels_np
    BACKEND = "numpy"
else:
    try:
        from . import _ckern as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_np
        BACKEND = "numpy"

edge_diffs = _impl.edge_diffs
edge_gradients = _impl.edge_gradients
weighted_power_sum = _impl.weighted_power_sum
phi_sum = _impl.phi_sum
phi_grad = _impl.phi_grad
phi_hess = _impl.phi_hess
scatter_signed = _impl.scatter_signed
