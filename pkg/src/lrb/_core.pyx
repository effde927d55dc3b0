# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled value-iteration kernels on a fixed successor table.

Every grid point i has three successor grid indices (ACK, NACK, not played)
and three flags telling whether a successor equal to i itself counts as an
already-updated value in a Gauss-Seidel sweep.  The flag is set only when the
raw successor belief is <= the point's own belief; in that case the point's
update is an implicit equation solved exactly per action.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64
ctypedef cnp.uint8_t u8


cdef int _gsva(f64[::1] v, f64[::1] old, const f64[::1] r1, double r0,
               const f64[::1] rho, const i64[::1] j1, const i64[::1] j0,
               const i64[::1] j2, const u8[::1] s1, const u8[::1] s0,
               const u8[::1] s2, double beta, double h, long max_sweeps,
               bint jacobi, double* resid) noexcept nogil:
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i, a, b, c
    cdef long sweep
    cdef double p, cont, self_w, q1, q0, new, diff, va, vb, vc
    for sweep in range(1, max_sweeps + 1):
        for i in range(n):
            old[i] = v[i]
        diff = 0.0
        for i in range(n):
            p = rho[i]
            a = j1[i]
            b = j0[i]
            c = j2[i]
            if jacobi:
                q1 = r1[i] + beta * (p * old[a] + (1.0 - p) * old[b])
                q0 = r0 + beta * old[c]
            else:
                cont = 0.0
                self_w = 0.0
                if a == i and s1[i]:
                    self_w += p
                else:
                    cont += p * v[a]
                if b == i and s0[i]:
                    self_w += 1.0 - p
                else:
                    cont += (1.0 - p) * v[b]
                q1 = (r1[i] + beta * cont) / (1.0 - beta * self_w)
                if c == i and s2[i]:
                    q0 = r0 / (1.0 - beta)
                else:
                    q0 = r0 + beta * v[c]
            new = q1 if q1 >= q0 else q0
            v[i] = new
            diff += fabs(new - old[i])
        if diff <= h:
            resid[0] = diff
            return <int>sweep
    resid[0] = diff
    return -1


def gsva_solve(f64[::1] v, const f64[::1] r1, double r0, const f64[::1] rho,
               const i64[::1] j1, const i64[::1] j0, const i64[::1] j2,
               const u8[::1] s1, const u8[::1] s0, const u8[::1] s2,
               double beta, double h, long max_sweeps, bint jacobi=False):
    """Iterate in place until the L1 sweep change is <= h.

    Returns (sweeps, residual); sweeps is -1 when the cap was hit.
    """
    cdef double resid = 0.0
    cdef int sweeps
    old = np.empty(v.shape[0])
    cdef f64[::1] o = old
    with nogil:
        sweeps = _gsva(v, o, r1, r0, rho, j1, j0, j2, s1, s0, s2, beta, h,
                       max_sweeps, jacobi, &resid)
    return sweeps, resid


cdef inline double _advantage(Py_ssize_t i, f64[::1] v, const f64[::1] r1,
                              double eta, const f64[::1] rho,
                              const i64[::1] j1, const i64[::1] j0,
                              const i64[::1] j2, double beta) noexcept nogil:
    cdef double p = rho[i]
    return (r1[i] + beta * (p * v[j1[i]] + (1.0 - p) * v[j0[i]])
            - (eta + beta * v[j2[i]]))


def subsidy_search(Py_ssize_t i, f64[::1] v, const f64[::1] r1,
                   const f64[::1] rho, const i64[::1] j1, const i64[::1] j0,
                   const i64[::1] j2, const u8[::1] s1, const u8[::1] s0,
                   const u8[::1] s2, double beta, double eta0, double alpha,
                   double h, double h_inner, long max_sweeps, long cap):
    """Fixed-step subsidy iteration at grid point i.

    eta <- eta + alpha * (V_S(i) - V_NS(i)) with a converged value solve at
    each eta, warm-started from ``v``.  Returns (eta, steps, advantage,
    status) with status 0 converged, 1 step cap, 2 inner solve failed.
    """
    cdef double eta = eta0
    cdef double adv = 0.0
    cdef double resid = 0.0
    cdef long t
    cdef int sweeps
    cdef int status = 1
    old = np.empty(v.shape[0])
    cdef f64[::1] o = old
    with nogil:
        for t in range(cap + 1):
            sweeps = _gsva(v, o, r1, eta, rho, j1, j0, j2, s1, s0, s2, beta,
                           h_inner, max_sweeps, False, &resid)
            if sweeps < 0:
                status = 2
                break
            adv = _advantage(i, v, r1, eta, rho, j1, j0, j2, beta)
            if fabs(adv) <= h:
                status = 0
                break
            if t == cap:
                break
            eta = eta + alpha * adv
    return eta, t, adv, status
