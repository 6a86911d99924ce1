# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 kernel for the resolvent Riccati flow."""
import numpy as np

from scipy.linalg.cython_blas cimport zgemm


cdef inline void _mm(int m, int n, int k, double complex alpha,
                     double complex* A, int lda, double complex* B, int ldb,
                     double complex beta, double complex* C, int ldc) noexcept nogil:
    # row-major C = alpha A B + beta C via column-major C^T = B^T A^T
    cdef char tr = b'N'
    zgemm(&tr, &tr, &n, &m, &k, &alpha, B, &ldb, A, &lda, &beta, C, &ldc)


cdef void _rhs(int d, double complex alpha, double complex* Y, double complex* up,
               double complex* lo, double complex* G, double complex* K) noexcept nogil:
    cdef int n2 = 2 * d
    cdef int i
    _mm(n2, d, d, 1.0, Y + d, n2, lo, d, 0.0, G, n2)
    _mm(n2, d, d, 1.0, Y, n2, up, d, 0.0, G + d, n2)
    for i in range(n2 * n2):
        K[i] = G[i]
    _mm(n2, n2, n2, alpha, G, n2, Y, n2, -1.0, K, n2)


def riccati_rk4(const double complex[:, :, :, ::1] upper,
                const double complex[:, :, :, ::1] lower,
                double complex alpha, r0):
    """Integrate ``R' = R Q (alpha R - I)`` across all steps with classical RK4.

    Same contract as the numpy fallback.
    """
    cdef int n_steps = upper.shape[0]
    cdef int d = upper.shape[2]
    cdef int n2 = 2 * d
    cdef int nn = n2 * n2
    cdef int j, i
    cdef int dd = d * d
    out = np.array(r0, dtype=np.complex128, order="C", copy=True)
    work = np.empty((6, nn), dtype=np.complex128)
    cdef double complex[:, ::1] R = out
    cdef double complex[:, ::1] W = work
    cdef double complex* r = &R[0, 0]
    cdef double complex* G = &W[0, 0]
    cdef double complex* Y = &W[1, 0]
    cdef double complex* k1 = &W[2, 0]
    cdef double complex* k2 = &W[3, 0]
    cdef double complex* k3 = &W[4, 0]
    cdef double complex* k4 = &W[5, 0]
    cdef double complex* up
    cdef double complex* lo
    with nogil:
        for j in range(n_steps):
            up = <double complex*> &upper[j, 0, 0, 0]
            lo = <double complex*> &lower[j, 0, 0, 0]
            _rhs(d, alpha, r, up, lo, G, k1)
            for i in range(nn):
                Y[i] = r[i] + 0.5 * k1[i]
            _rhs(d, alpha, Y, up + dd, lo + dd, G, k2)
            for i in range(nn):
                Y[i] = r[i] + 0.5 * k2[i]
            _rhs(d, alpha, Y, up + dd, lo + dd, G, k3)
            for i in range(nn):
                Y[i] = r[i] + k3[i]
            _rhs(d, alpha, Y, up + 2 * dd, lo + 2 * dd, G, k4)
            for i in range(nn):
                r[i] = r[i] + (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) / 6.0
    return out
