# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels; same contract as ``_kernels_py``."""

import numpy as np
from libc.math cimport fabs


def p2p1_element_matrices(const double[:, ::1] nodes, const long long[:, ::1] tris,
                          const double[:, :, ::1] grad_ref, const double[:, ::1] val_ref,
                          const double[:, ::1] p1_ref, const double[::1] qw):
    cdef Py_ssize_t nt = tris.shape[0], nq = qw.shape[0]
    det_a = np.empty(nt)
    stiff_a = np.zeros((nt, 6, 6))
    bx_a = np.zeros((nt, 3, 6))
    by_a = np.zeros((nt, 3, 6))
    m2_a = np.zeros((nt, 6, 6))
    m1_a = np.zeros((nt, 3, 3))
    cdef double[::1] det_v = det_a
    cdef double[:, :, ::1] stiff = stiff_a
    cdef double[:, :, ::1] bx = bx_a
    cdef double[:, :, ::1] by = by_a
    cdef double[:, :, ::1] m2 = m2_a
    cdef double[:, :, ::1] m1 = m1_a
    cdef double gx[6]
    cdef double gy[6]
    cdef Py_ssize_t t, q, a, b, k
    cdef long long i0, i1, i2
    cdef double j00, j01, j10, j11, det, w, i00, i01, i10, i11
    for t in range(nt):
        i0 = tris[t, 0]
        i1 = tris[t, 1]
        i2 = tris[t, 2]
        j00 = nodes[i1, 0] - nodes[i0, 0]
        j10 = nodes[i1, 1] - nodes[i0, 1]
        j01 = nodes[i2, 0] - nodes[i0, 0]
        j11 = nodes[i2, 1] - nodes[i0, 1]
        det = j00 * j11 - j01 * j10
        det_v[t] = det
        i00 = j11 / det
        i01 = -j10 / det
        i10 = -j01 / det
        i11 = j00 / det
        for q in range(nq):
            w = qw[q] * fabs(det)
            for a in range(6):
                gx[a] = i00 * grad_ref[q, a, 0] + i01 * grad_ref[q, a, 1]
                gy[a] = i10 * grad_ref[q, a, 0] + i11 * grad_ref[q, a, 1]
            for a in range(6):
                for b in range(6):
                    stiff[t, a, b] += w * (gx[a] * gx[b] + gy[a] * gy[b])
                    m2[t, a, b] += w * val_ref[q, a] * val_ref[q, b]
                for k in range(3):
                    bx[t, k, a] -= w * p1_ref[q, k] * gx[a]
                    by[t, k, a] -= w * p1_ref[q, k] * gy[a]
            for a in range(3):
                for b in range(3):
                    m1[t, a, b] += w * p1_ref[q, a] * p1_ref[q, b]
    return det_a, stiff_a, bx_a, by_a, m2_a, m1_a


def p1_element_matrices(const double[:, ::1] nodes, const long long[:, ::1] tris):
    cdef Py_ssize_t nt = tris.shape[0]
    stiff_a = np.empty((nt, 3, 3))
    mass_a = np.empty((nt, 3, 3))
    cdef double[:, :, ::1] stiff = stiff_a
    cdef double[:, :, ::1] mass = mass_a
    cdef double gx[3]
    cdef double gy[3]
    cdef Py_ssize_t t, a, b
    cdef long long i0, i1, i2
    cdef double j00, j01, j10, j11, det, area
    for t in range(nt):
        i0 = tris[t, 0]
        i1 = tris[t, 1]
        i2 = tris[t, 2]
        j00 = nodes[i1, 0] - nodes[i0, 0]
        j10 = nodes[i1, 1] - nodes[i0, 1]
        j01 = nodes[i2, 0] - nodes[i0, 0]
        j11 = nodes[i2, 1] - nodes[i0, 1]
        det = j00 * j11 - j01 * j10
        area = 0.5 * fabs(det)
        # gradients of the barycentric coordinates: J^{-T} applied to reference gradients
        gx[1] = j11 / det
        gy[1] = -j01 / det
        gx[2] = -j10 / det
        gy[2] = j00 / det
        gx[0] = -gx[1] - gx[2]
        gy[0] = -gy[1] - gy[2]
        for a in range(3):
            for b in range(3):
                stiff[t, a, b] = area * (gx[a] * gx[b] + gy[a] * gy[b])
                mass[t, a, b] = area / 12.0 * (2.0 if a == b else 1.0)
    return stiff_a, mass_a
