# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled block-family kernels.

Same contracts as `heisenbath._pykernels`: families are contiguous
complex128 arrays of shape (d_B, d_B, d_S, d_S).  The dimensions here are
tiny (d_S * d_B <= ~16), so plain typed loops beat BLAS dispatch overhead
inside adaptive ODE right-hand sides.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

BACKEND = "cython"

ctypedef double complex cplx


cdef inline void _block_accum(const cplx* f, const cplx* g, cplx* out, Py_ssize_t ds) noexcept nogil:
    # out += f @ g for ds x ds row-major blocks
    cdef Py_ssize_t i, j, k
    cdef cplx acc
    for i in range(ds):
        for j in range(ds):
            acc = 0
            for k in range(ds):
                acc = acc + f[i * ds + k] * g[k * ds + j]
            out[i * ds + j] = out[i * ds + j] + acc


cdef void _fam_mul_into(const cplx* f, const cplx* g, cplx* out,
                        Py_ssize_t db, Py_ssize_t ds) noexcept nogil:
    cdef Py_ssize_t a, b, gg, bs = ds * ds
    cdef Py_ssize_t n = db * db * bs
    cdef Py_ssize_t idx
    for idx in range(n):
        out[idx] = 0
    for a in range(db):
        for b in range(db):
            for gg in range(db):
                _block_accum(f + (a * db + gg) * bs, g + (gg * db + b) * bs,
                             out + (a * db + b) * bs, ds)


def fam_mul(cnp.ndarray f, cnp.ndarray g):
    """Blockwise product ``out[a,b] = sum_g f[a,g] @ g[g,b]``."""
    cdef cnp.ndarray fc = np.ascontiguousarray(f, dtype=np.complex128)
    cdef cnp.ndarray gc = np.ascontiguousarray(g, dtype=np.complex128)
    cdef cnp.ndarray out = np.empty_like(fc)
    cdef Py_ssize_t db = fc.shape[0], ds = fc.shape[2]
    _fam_mul_into(<cplx*> cnp.PyArray_DATA(fc), <cplx*> cnp.PyArray_DATA(gc),
                  <cplx*> cnp.PyArray_DATA(out), db, ds)
    return out


def fam_commutator(cnp.ndarray h, cnp.ndarray o, scale):
    """``scale * (h o - o h)`` blockwise (the reduced Heisenberg RHS)."""
    cdef cnp.ndarray hc = np.ascontiguousarray(h, dtype=np.complex128)
    cdef cnp.ndarray oc = np.ascontiguousarray(o, dtype=np.complex128)
    cdef cnp.ndarray out = np.zeros_like(hc)
    cdef Py_ssize_t db = hc.shape[0], ds = hc.shape[2]
    cdef Py_ssize_t a, b, gg, i, j, bs = ds * ds
    cdef cplx s = scale
    cdef cplx* hp = <cplx*> cnp.PyArray_DATA(hc)
    cdef cplx* op = <cplx*> cnp.PyArray_DATA(oc)
    cdef cplx* res = <cplx*> cnp.PyArray_DATA(out)
    cdef cplx acc
    cdef const cplx* fb
    cdef const cplx* gb
    cdef cplx* ob
    with nogil:
        for a in range(db):
            for b in range(db):
                ob = res + (a * db + b) * bs
                for gg in range(db):
                    _block_accum(hp + (a * db + gg) * bs, op + (gg * db + b) * bs, ob, ds)
        # subtract o h, then scale
        for a in range(db):
            for b in range(db):
                ob = res + (a * db + b) * bs
                for gg in range(db):
                    fb = op + (a * db + gg) * bs
                    gb = hp + (gg * db + b) * bs
                    for i in range(ds):
                        for j in range(ds):
                            acc = 0
                            for_k_loop(fb, gb, &acc, i, j, ds)
                            ob[i * ds + j] = ob[i * ds + j] - acc
        for a in range(db * db * bs):
            res[a] = res[a] * s
    return out


cdef inline void for_k_loop(const cplx* f, const cplx* g, cplx* acc,
                            Py_ssize_t i, Py_ssize_t j, Py_ssize_t ds) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(ds):
        acc[0] = acc[0] + f[i * ds + k] * g[k * ds + j]


def kernel_stack_rhs(cnp.ndarray hi_eig, cnp.ndarray omega, double t, cnp.ndarray stack):
    """RHS of the kernel recurrence: ``out[0] = h(t)``, ``out[n] = h(t) . stack[n-1]``.

    ``h(t) = hi_eig * exp(-1j * omega * t)`` elementwise.
    """
    cdef cnp.ndarray hi = np.ascontiguousarray(hi_eig, dtype=np.complex128)
    cdef cnp.ndarray om = np.ascontiguousarray(omega, dtype=np.float64)
    cdef cnp.ndarray st = np.ascontiguousarray(stack, dtype=np.complex128)
    cdef Py_ssize_t n_ord = st.shape[0]
    cdef Py_ssize_t db = hi.shape[0], ds = hi.shape[2]
    cdef Py_ssize_t fam = db * db * ds * ds
    cdef cnp.ndarray out = np.empty_like(st)
    cdef cnp.ndarray hbuf = np.empty_like(hi)
    cdef cplx* hp = <cplx*> cnp.PyArray_DATA(hbuf)
    cdef cplx* hip = <cplx*> cnp.PyArray_DATA(hi)
    cdef double* omp = <double*> cnp.PyArray_DATA(om)
    cdef cplx* stp = <cplx*> cnp.PyArray_DATA(st)
    cdef cplx* outp = <cplx*> cnp.PyArray_DATA(out)
    cdef Py_ssize_t idx, n
    cdef double w
    with nogil:
        for idx in range(fam):
            w = omp[idx] * t
            hp[idx] = hip[idx] * (cos(w) - 1j * sin(w))
        for idx in range(fam):
            outp[idx] = hp[idx]
        for n in range(1, n_ord):
            _fam_mul_into(hp, stp + (n - 1) * fam, outp + n * fam, db, ds)
    return out
