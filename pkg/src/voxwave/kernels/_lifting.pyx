# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-level Haar lifting kernels (hot path of the transform).

Semantics match voxwave.kernels.numpy_backend exactly, including the
floating-point accumulation order: per coarse slot, detail contributions
are summed in ascending detail order and divided by the coarse measure
once at the end.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def haar_forward_level(double[:, ::1] lam_f,
                       long[::1] keep_idx, long[::1] det_idx, long[::1] det_km,
                       double[::1] mu_det, double[::1] mu_c,
                       long[::1] group_ptr, long[::1] group_det):
    cdef Py_ssize_t b = lam_f.shape[0]
    cdef Py_ssize_t nc = keep_idx.shape[0]
    cdef Py_ssize_t nm = det_idx.shape[0]
    lam_c_arr = np.empty((b, nc), dtype=np.float64)
    gam_arr = np.empty((b, nm), dtype=np.float64)
    cdef double[:, ::1] lam_c = lam_c_arr
    cdef double[:, ::1] gam = gam_arr
    cdef Py_ssize_t i, k, m, d
    cdef double acc, g
    with nogil:
        for i in range(b):
            for k in range(nc):
                lam_c[i, k] = lam_f[i, keep_idx[k]]
            for m in range(nm):
                gam[i, m] = lam_f[i, det_idx[m]] - lam_c[i, det_km[m]]
            for k in range(nc):
                acc = 0.0
                for d in range(group_ptr[k], group_ptr[k + 1]):
                    m = group_det[d]
                    acc += gam[i, m] * mu_det[m]
                if group_ptr[k + 1] > group_ptr[k]:
                    lam_c[i, k] += acc / mu_c[k]
    return lam_c_arr, gam_arr


def haar_inverse_level(double[:, ::1] lam_c, double[:, ::1] gam,
                       long[::1] keep_idx, long[::1] det_idx, long[::1] det_km,
                       double[::1] mu_det, double[::1] mu_c,
                       long[::1] group_ptr, long[::1] group_det):
    cdef Py_ssize_t b = lam_c.shape[0]
    cdef Py_ssize_t nc = keep_idx.shape[0]
    cdef Py_ssize_t nm = det_idx.shape[0]
    lam_f_arr = np.empty((b, nc + nm), dtype=np.float64)
    cdef double[:, ::1] lam_f = lam_f_arr
    cdef Py_ssize_t i, k, m, d
    cdef double acc, l1
    with nogil:
        for i in range(b):
            for k in range(nc):
                acc = 0.0
                for d in range(group_ptr[k], group_ptr[k + 1]):
                    m = group_det[d]
                    acc += gam[i, m] * mu_det[m]
                l1 = lam_c[i, k]
                if group_ptr[k + 1] > group_ptr[k]:
                    l1 = l1 - acc / mu_c[k]
                lam_f[i, keep_idx[k]] = l1
            for m in range(nm):
                lam_f[i, det_idx[m]] = gam[i, m] + lam_f[i, keep_idx[det_km[m]]]
    return lam_f_arr
