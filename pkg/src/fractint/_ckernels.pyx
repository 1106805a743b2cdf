# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``.

Parallel loops only ever split over independent outputs; each output is
reduced serially so results do not depend on the thread count.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt, pow, exp, log, cos, sin, fabs, M_PI

cnp.import_array()

NAME = "cython"

EUCLID = 0
LM_NORM = 1


def pair_energy(centers, weights, double s, double diag, int threads=1):
    cdef const double[:, ::1] c = np.ascontiguousarray(centers, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0], d = c.shape[1]
    cdef Py_ssize_t i, j, a
    cdef double acc, r2, t, total = 0.0, diag_sum = 0.0
    if n == 0:
        return 0.0
    partial_arr = np.zeros(n)
    cdef double[::1] partial = partial_arr
    for i in prange(n, nogil=True, num_threads=max(1, threads), schedule="dynamic"):
        acc = 0.0
        for j in range(n):
            if j == i:
                continue
            r2 = 0.0
            for a in range(d):
                t = c[i, a] - c[j, a]
                r2 = r2 + t * t
            acc = acc + w[j] * exp(-0.5 * s * log(r2))
        partial[i] = acc
    for i in range(n):
        total += w[i] * partial[i]
        diag_sum += w[i] * w[i]
    return total + diag_sum * pow(diag, -s)


def fourier_points(centers, weights, freqs, int threads=1):
    cdef const double[:, ::1] c = np.ascontiguousarray(centers, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[:, ::1] f = np.ascontiguousarray(freqs, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0], m = f.shape[0], d = c.shape[1]
    cdef Py_ssize_t i, j, a
    cdef double re, im, ph
    out_re = np.zeros(m)
    out_im = np.zeros(m)
    cdef double[::1] ore = out_re
    cdef double[::1] oim = out_im
    for i in prange(m, nogil=True, num_threads=max(1, threads), schedule="static"):
        re = 0.0
        im = 0.0
        for j in range(n):
            ph = 0.0
            for a in range(d):
                ph = ph + f[i, a] * c[j, a]
            ph = 2.0 * M_PI * ph
            re = re + w[j] * cos(ph)
            im = im + w[j] * sin(ph)
        ore[i] = re
        oim[i] = -im
    return out_re + 1j * out_im


cdef inline double _phi3(long long v0, long long v1, long long v2,
                         Py_ssize_t d, int family, int m) nogil:
    # v1, v2 are ignored beyond d; d <= 3 in this module
    cdef long long acc
    cdef long long p0 = 1, p1 = 1, p2 = 1
    cdef int e
    if family == 0:
        acc = v0 * v0
        if d > 1:
            acc = acc + v1 * v1
        if d > 2:
            acc = acc + v2 * v2
        return sqrt(<double>acc)
    for e in range(m):
        p0 = p0 * v0
        p1 = p1 * v1
        p2 = p2 * v2
    acc = p0
    if d > 1:
        acc = acc + p1
    if d > 2:
        acc = acc + p2
    return pow(<double>acc, 1.0 / m)


cdef inline long long _at(const long long[:, ::1] X, Py_ssize_t i, Py_ssize_t a, Py_ssize_t d) nogil:
    if a < d:
        return X[i, a]
    return 0


def lattice_count_brute(points, n1, n2, double lam1, double lam2, double delta,
                        int family, int m, bint use2, int threads=1):
    cdef const long long[:, ::1] P = np.ascontiguousarray(points, dtype=np.int64)
    cdef const long long[:, ::1] A = np.ascontiguousarray(n1, dtype=np.int64)
    cdef const long long[:, ::1] B = np.ascontiguousarray(n2, dtype=np.int64)
    cdef Py_ssize_t npair = A.shape[0], npts = P.shape[0], d = P.shape[1]
    cdef Py_ssize_t i, j
    cdef long long cnt, p0, p1, p2
    out_arr = np.zeros(npair, dtype=np.int64)
    cdef long long[::1] out = out_arr
    if npair == 0 or npts == 0:
        return out_arr
    if d > 3:
        raise ValueError("lattice kernels support d <= 3")
    for i in prange(npair, nogil=True, num_threads=max(1, threads), schedule="static"):
        cnt = 0
        for j in range(npts):
            p0 = _at(P, j, 0, d)
            p1 = _at(P, j, 1, d)
            p2 = _at(P, j, 2, d)
            if fabs(_phi3(_at(A, i, 0, d) - p0, _at(A, i, 1, d) - p1,
                          _at(A, i, 2, d) - p2, d, family, m) - lam1) > delta:
                continue
            if use2:
                if fabs(_phi3(_at(B, i, 0, d) - p0, _at(B, i, 1, d) - p1,
                              _at(B, i, 2, d) - p2, d, family, m) - lam2) > delta:
                    continue
            cnt = cnt + 1
        out[i] = cnt
    return out_arr


def lattice_count_shell(shell, long long q, n1, n2, double lam2, double delta,
                        int family, int m, bint use2, int threads=1):
    cdef const long long[:, ::1] S = np.ascontiguousarray(shell, dtype=np.int64)
    cdef const long long[:, ::1] A = np.ascontiguousarray(n1, dtype=np.int64)
    cdef const long long[:, ::1] B = np.ascontiguousarray(n2, dtype=np.int64)
    cdef Py_ssize_t npair = A.shape[0], ns = S.shape[0], d = A.shape[1]
    cdef Py_ssize_t i, j
    cdef long long cnt, x0, x1, x2
    out_arr = np.zeros(npair, dtype=np.int64)
    cdef long long[::1] out = out_arr
    if npair == 0 or ns == 0:
        return out_arr
    if d > 3:
        raise ValueError("lattice kernels support d <= 3")
    for i in prange(npair, nogil=True, num_threads=max(1, threads), schedule="static"):
        cnt = 0
        for j in range(ns):
            x0 = _at(A, i, 0, d) + _at(S, j, 0, d)
            x1 = _at(A, i, 1, d) + _at(S, j, 1, d)
            x2 = _at(A, i, 2, d) + _at(S, j, 2, d)
            if x0 < 0 or x0 > q or x1 < 0 or x1 > q or x2 < 0 or x2 > q:
                continue
            if use2:
                if fabs(_phi3(_at(B, i, 0, d) - x0, _at(B, i, 1, d) - x1,
                              _at(B, i, 2, d) - x2, d, family, m) - lam2) > delta:
                    continue
            cnt = cnt + 1
        out[i] = cnt
    return out_arr
