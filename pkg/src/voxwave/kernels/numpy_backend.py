"""Pure-NumPy implementation of the per-level Haar lifting kernels.

Kept semantically and bit-for-bit identical to the compiled extension: the
update accumulation runs in ascending detail order per group (the CSR
matvec below visits indices in storage order, which is how the arrays are
built), and the division by the coarse measure happens after the sum.
"""
from __future__ import annotations

import numpy as np


def haar_forward_level(lam_f, keep_idx, det_idx, det_km, mu_det, mu_c, u_raw):
    """One coarsening step: split, sibling-predict, measure update.

    lam_f has shape (B, n_fine); returns (lam_c (B, n_coarse), gam (B, n_det)).
    ``u_raw`` is the CSR matrix with the raw detail measures (division by the
    coarse measure is applied afterwards).
    """
    lam_c = np.ascontiguousarray(lam_f[:, keep_idx])
    gam = lam_f[:, det_idx] - lam_c[:, det_km]
    if gam.shape[1]:
        upd = (u_raw @ gam.T).T
        lam_c += upd / mu_c
    return lam_c, gam


def haar_inverse_level(lam_c, gam, keep_idx, det_idx, det_km, mu_det, mu_c, u_raw):
    """Exact inverse of haar_forward_level; returns lam_f (B, n_fine)."""
    b = lam_c.shape[0]
    n_fine = len(keep_idx) + len(det_idx)
    lam1 = lam_c
    if gam.shape[1]:
        upd = (u_raw @ gam.T).T
        lam1 = lam_c - upd / mu_c
    lam_f = np.empty((b, n_fine), dtype=np.float64)
    lam_f[:, keep_idx] = lam1
    if gam.shape[1]:
        lam_f[:, det_idx] = gam + lam1[:, det_km]
    return lam_f
