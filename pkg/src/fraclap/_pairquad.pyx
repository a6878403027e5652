# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pair-quadrature accumulation kernel.

Hot loop of the nonlocal assembly: for each triangle pair in the batch,
evaluate the truncated kernel on the tensor grid of quadrature points and
scatter the symmetric 12x12 basis-difference block into the dense operator.
Contract matches fraclap._pairquad_py.accumulate.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport pow, sqrt


cdef inline double _kernel_pow(double d2, double expo, int quarter) nogil:
    # expo = 1 + alpha; quarter = round(4*alpha) when alpha is a multiple
    # of 1/4 (sqrt chains are much cheaper than pow), else 0.
    cdef double r
    if quarter == 1:
        r = d2 * sqrt(sqrt(d2))
    elif quarter == 2:
        r = d2 * sqrt(d2)
    elif quarter == 3:
        r = d2 * sqrt(d2 * sqrt(d2))
    else:
        return pow(d2, -expo)
    return 1.0 / r


def accumulate(
    double[:, ::1] A,
    double[:, :, ::1] X,
    double[:, ::1] WX,
    double[:, :, ::1] PHI1,
    long[:, ::1] IDX1,
    double[:, :, ::1] Y,
    double[:, ::1] WY,
    double[:, :, ::1] PHI2,
    long[:, ::1] IDX2,
    double alpha,
    double lam2,
):
    cdef Py_ssize_t P = X.shape[0]
    cdef Py_ssize_t nqx = X.shape[1]
    cdef Py_ssize_t nqy = Y.shape[1]
    cdef Py_ssize_t p, q, r, a, b
    cdef double expo = 1.0 + alpha
    cdef int quarter = 0
    cdef double qa = 4.0 * alpha
    if abs(qa - round(qa)) < 1e-14:
        quarter = <int> round(qa)
    cdef double dx, dy, d2, w, wda
    cdef double d[12]
    cdef double loc[12][12]
    cdef long idx[12]

    for p in range(P):
        for a in range(12):
            for b in range(12):
                loc[a][b] = 0.0
        for q in range(nqx):
            for r in range(nqy):
                dx = X[p, q, 0] - Y[p, r, 0]
                dy = X[p, q, 1] - Y[p, r, 1]
                d2 = dx * dx + dy * dy
                if d2 > lam2 or d2 <= 0.0:
                    continue
                w = WX[p, q] * WY[p, r] * _kernel_pow(d2, expo, quarter)
                for a in range(6):
                    d[a] = PHI1[p, q, a]
                    d[6 + a] = -PHI2[p, r, a]
                for a in range(12):
                    wda = w * d[a]
                    for b in range(a, 12):
                        loc[a][b] += wda * d[b]
        for a in range(12):
            idx[a] = IDX1[p, a] if a < 6 else IDX2[p, a - 6]
        for a in range(12):
            A[idx[a], idx[a]] += loc[a][a]
            for b in range(a + 1, 12):
                A[idx[a], idx[b]] += loc[a][b]
                A[idx[b], idx[a]] += loc[a][b]
