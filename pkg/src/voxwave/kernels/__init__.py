"""Backend selection for the per-level lifting kernels.

The compiled extension is used when present; otherwise the NumPy fallback
takes over.  Set ``VOXWAVE_KERNEL=python`` or ``VOXWAVE_KERNEL=cython`` to
force a backend (the latter raises if the extension was not built).  Both
backends produce identical results.
"""
from __future__ import annotations

import os

from . import numpy_backend

_requested = os.environ.get("VOXWAVE_KERNEL", "auto").lower()
_cython = None
if _requested in ("auto", "cython"):
    try:
        from . import _lifting as _cython
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "VOXWAVE_KERNEL=cython but the compiled extension is missing; "
                "reinstall with the extension built or unset the variable"
            ) from None

BACKEND = "cython" if _cython is not None else "python"


def backend_name() -> str:
    return BACKEND


def haar_forward_level(lam_f, ops):
    """Dispatch one forward coarsening step for a (B, n_fine) batch."""
    if _cython is not None:
        return _cython.haar_forward_level(
            lam_f, ops.keep_idx, ops.det_idx, ops.det_km,
            ops.mu_det, ops.mu_c, ops.group_ptr, ops.group_det)
    return numpy_backend.haar_forward_level(
        lam_f, ops.keep_idx, ops.det_idx, ops.det_km,
        ops.mu_det, ops.mu_c, ops.u_raw)


def haar_inverse_level(lam_c, gam, ops):
    if _cython is not None:
        return _cython.haar_inverse_level(
            lam_c, gam, ops.keep_idx, ops.det_idx, ops.det_km,
            ops.mu_det, ops.mu_c, ops.group_ptr, ops.group_det)
    return numpy_backend.haar_inverse_level(
        lam_c, gam, ops.keep_idx, ops.det_idx, ops.det_km,
        ops.mu_det, ops.mu_c, ops.u_raw)
