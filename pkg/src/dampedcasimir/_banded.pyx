# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled banded Lindblad right-hand side.

Operators are stored by diagonals: ``data[k, i] = M[i, i + offsets[k]]``
(entries whose column falls outside the matrix are ignored). The kernel is
row-fused: every contribution to output row i is accumulated while that
row is hot in cache, so no n x n scratch matrix is touched.

With ``hermitian`` set the input is assumed Hermitian: only the upper
triangle is computed and the lower one is its mirror, so the output is
exactly Hermitian and about half the work is skipped.
"""

import numpy as np


cdef inline Py_ssize_t _max(Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    return a if a > b else b


cdef inline Py_ssize_t _min(Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    return a if a < b else b


cdef void _row_left(const Py_ssize_t[::1] offsets, const double complex[:, ::1] data,
                    const double complex[:, ::1] x, Py_ssize_t i, double complex scale,
                    double complex[::1] acc, Py_ssize_t start) noexcept nogil:
    # acc[start:] += scale * (M @ x)[i, start:]
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k, j, o
    cdef double complex c
    for k in range(offsets.shape[0]):
        o = offsets[k]
        if i + o < 0 or i + o >= n:
            continue
        c = scale * data[k, i]
        if c == 0:
            continue
        for j in range(start, n):
            acc[j] = acc[j] + c * x[i + o, j]


cdef void _row_right(const Py_ssize_t[::1] offsets, const double complex[:, ::1] conj_rows,
                     const double complex[::1] xrow, double complex[::1] acc,
                     Py_ssize_t start) noexcept nogil:
    # acc[j] += sum_k xrow[j + o_k] * conj_rows[k, j] for j >= start (one row of x @ M^dagger)
    cdef Py_ssize_t n = xrow.shape[0]
    cdef Py_ssize_t k, j, o
    for k in range(offsets.shape[0]):
        o = offsets[k]
        for j in range(_max(start, -o), _min(n, n - o)):
            acc[j] = acc[j] + xrow[j + o] * conj_rows[k, j]


def lindblad_rhs(const double complex[:, ::1] rho,
                 double complex[:, ::1] out,
                 double complex[:, ::1] work,
                 const Py_ssize_t[::1] g_offsets,
                 const double complex[:, ::1] g_data,
                 const Py_ssize_t[:, ::1] j_offsets,
                 const double complex[:, :, ::1] j_data,
                 const double[::1] rates,
                 bint hermitian=False):
    """out = -i(G rho - rho G^+) + sum_m 2 rates[m] J_m rho J_m^+ .

    ``work`` is accepted for signature compatibility with the numpy backend.
    """
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t nj = rates.shape[0]
    cdef Py_ssize_t i, j, k, m, start
    cdef double complex[:, ::1] g_conj = np.conj(np.asarray(g_data)) * 1j
    cdef double complex[:, :, ::1] j_conj = np.conj(np.asarray(j_data)) * (
        2.0 * np.asarray(rates)[:, None, None])
    cdef double complex[::1] acc = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] w = np.empty(n, dtype=np.complex128)
    with nogil:
        for i in range(n):
            start = i if hermitian else 0
            for j in range(start, n):
                acc[j] = 0
            _row_left(g_offsets, g_data, rho, i, -1j, acc, start)
            _row_right(g_offsets, g_conj, rho[i], acc, start)
            for m in range(nj):
                if rates[m] == 0:
                    continue
                for j in range(n):
                    w[j] = 0
                _row_left(j_offsets[m], j_data[m], rho, i, 1.0, w, 0)
                _row_right(j_offsets[m], j_conj[m], w, acc, start)
            if hermitian:
                out[i, i] = acc[i].real
                for j in range(i + 1, n):
                    out[i, j] = acc[j]
                    out[j, i] = acc[j].conjugate()
            else:
                for j in range(n):
                    out[i, j] = acc[j]
    return out
