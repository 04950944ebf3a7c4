# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled statevector kernels.

All routines act on a C-contiguous ``(batch, 2**n)`` complex128 array whose
rows are independent states. Qubit 0 is the most significant bit of the
basis index.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def apply_1q(double complex[:, ::1] states, double complex[:, ::1] m,
             Py_ssize_t target, Py_ssize_t n):
    cdef Py_ssize_t nb = states.shape[0]
    cdef Py_ssize_t dim = states.shape[1]
    cdef Py_ssize_t stride = (<Py_ssize_t>1) << (n - 1 - target)
    cdef Py_ssize_t b, i, j, hi
    cdef double complex m00 = m[0, 0], m01 = m[0, 1], m10 = m[1, 0], m11 = m[1, 1]
    cdef double complex a0, a1
    with nogil:
        for b in range(nb):
            hi = 0
            while hi < dim:
                for i in range(hi, hi + stride):
                    j = i + stride
                    a0 = states[b, i]
                    a1 = states[b, j]
                    states[b, i] = m00 * a0 + m01 * a1
                    states[b, j] = m10 * a0 + m11 * a1
                hi += 2 * stride


def apply_cnot(double complex[:, ::1] states, Py_ssize_t control,
               Py_ssize_t target, Py_ssize_t n):
    cdef Py_ssize_t nb = states.shape[0]
    cdef Py_ssize_t dim = states.shape[1]
    cdef Py_ssize_t cbit = (<Py_ssize_t>1) << (n - 1 - control)
    cdef Py_ssize_t tbit = (<Py_ssize_t>1) << (n - 1 - target)
    cdef Py_ssize_t b, i, j
    cdef double complex tmp
    with nogil:
        for b in range(nb):
            for i in range(dim):
                if (i & cbit) and not (i & tbit):
                    j = i | tbit
                    tmp = states[b, i]
                    states[b, i] = states[b, j]
                    states[b, j] = tmp


def pauli_expectations(const double complex[:, ::1] states, Py_ssize_t n):
    """Return an array of shape ``(batch, 3, n)`` holding <X>, <Y>, <Z>."""
    cdef Py_ssize_t nb = states.shape[0]
    cdef Py_ssize_t dim = states.shape[1]
    out_arr = np.zeros((nb, 3, n), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t b, q, i, j, bit
    cdef double complex a0, a1, c
    cdef double sx, sy, sz
    with nogil:
        for b in range(nb):
            for q in range(n):
                bit = (<Py_ssize_t>1) << (n - 1 - q)
                sx = 0.0
                sy = 0.0
                sz = 0.0
                for i in range(dim):
                    if i & bit:
                        continue
                    j = i | bit
                    a0 = states[b, i]
                    a1 = states[b, j]
                    c = a0.conjugate() * a1
                    sx += c.real
                    sy += c.imag
                    sz += a0.real * a0.real + a0.imag * a0.imag - a1.real * a1.real - a1.imag * a1.imag
                out[b, 0, q] = 2.0 * sx
                out[b, 1, q] = 2.0 * sy
                out[b, 2, q] = sz
    return out_arr
