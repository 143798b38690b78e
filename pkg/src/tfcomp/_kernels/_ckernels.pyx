# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contracts as ``_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, exp, sqrt, cos, sin, pow, fabs, INFINITY, isinf

cnp.import_array()

ctypedef double complex cplx


def weighted_sup_4d(V, const double[::1] w1, const double[::1] w2,
                    const double[::1] w3, const double[::1] w4):
    cdef Py_ssize_t n1 = V.shape[0], n2 = V.shape[1], n3 = V.shape[2], n4 = V.shape[3]
    cdef Py_ssize_t i, j, k, l
    cdef double best = -INFINITY, val, a, base
    cdef Py_ssize_t bi = 0, bj = 0, bk = 0, bl = 0
    cdef const cplx[:, :, :, ::1] Vc
    cdef const double[:, :, :, ::1] Vr
    cdef bint is_complex = np.iscomplexobj(V)
    if is_complex:
        Vc = np.ascontiguousarray(V, dtype=np.complex128)
    else:
        Vr = np.ascontiguousarray(V, dtype=np.float64)
    with nogil:
        for i in range(n1):
            for j in range(n2):
                base = w1[i] + w2[j]
                for k in range(n3):
                    for l in range(n4):
                        if is_complex:
                            a = Vc[i, j, k, l].real * Vc[i, j, k, l].real + Vc[i, j, k, l].imag * Vc[i, j, k, l].imag
                            if a <= 0.0:
                                continue
                            val = 0.5 * log(a) + base + w3[k] + w4[l]
                        else:
                            a = fabs(Vr[i, j, k, l])
                            if a <= 0.0:
                                continue
                            val = log(a) + base + w3[k] + w4[l]
                        if val > best:
                            best = val
                            bi = i; bj = j; bk = k; bl = l
    return best, (bi, bj, bk, bl)


cdef double _pairwise(const double[::1] x, Py_ssize_t lo, Py_ssize_t hi, double p,
                      const double[::1] lw) nogil:
    cdef Py_ssize_t i, mid
    cdef double acc = 0.0
    if hi - lo <= 128:
        for i in range(lo, hi):
            if p == 1.0:
                acc += x[i] * exp(lw[i])
            elif p == 2.0:
                acc += (x[i] * exp(lw[i])) * (x[i] * exp(lw[i]))
            else:
                acc += pow(x[i] * exp(lw[i]), p)
        return acc
    mid = lo + (hi - lo) // 2
    return _pairwise(x, lo, mid, p, lw) + _pairwise(x, mid, hi, p, lw)


def weighted_lp(absV, logw, double p):
    cdef const double[::1] a = np.ascontiguousarray(np.ravel(absV), dtype=np.float64)
    cdef const double[::1] lw = np.ascontiguousarray(np.ravel(np.broadcast_to(logw, np.shape(absV))),
                                                     dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], i
    cdef double best = -INFINITY, val
    if isinf(p):
        with nogil:
            for i in range(n):
                if a[i] > 0.0:
                    val = log(a[i]) + lw[i]
                    if val > best:
                        best = val
        return exp(best)
    with nogil:
        val = _pairwise(a, 0, n, p, lw)
    return val


def kn_sum(phase, ys, coeffs):
    cdef const double[::1] ph = np.ascontiguousarray(phase, dtype=np.float64)
    cdef const double[::1] y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef const cplx[::1] c = np.ascontiguousarray(coeffs, dtype=np.complex128)
    cdef Py_ssize_t nx = ph.shape[0], nq = y.shape[0], j, q
    out = np.empty(nx, dtype=np.complex128)
    cdef cplx[::1] o = out
    cdef double re, im, arg, cr, ci
    with nogil:
        for j in range(nx):
            re = 0.0
            im = 0.0
            for q in range(nq):
                arg = ph[j] * y[q]
                cr = cos(arg)
                ci = sin(arg)
                re += c[q].real * cr - c[q].imag * ci
                im += c[q].real * ci + c[q].imag * cr
            o[j] = re + 1j * im
    return out
