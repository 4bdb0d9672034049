# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled core for the hot pairwise loops.

Twin of ``opinion_lab._core_py``: identical evaluation formulas, identical
fixed j-order, identical Kahan accumulation.  Built with -ffp-contract=off so
results are bit-identical to the pure-Python fallback.  Rows parallelize over
i with OpenMP; each row is an independent sequential reduction, so the output
is deterministic for any thread count.
"""

from cython.parallel cimport prange
from libc.math cimport exp, fabs

DEF CONSTANT = 0
DEF HEGSELMANN_KRAUSE = 1
DEF BOUNDED_CONFIDENCE = 2
DEF BOUNDED_INFLUENCE = 3
DEF GAUSSIAN_DECAY = 4
DEF RING_SENSING = 5
DEF TYPED_CONFIDENCE = 6
DEF FINITE_EMBED = 7


cdef inline double _eval_w(int code, const double* scal, double np_i, double np_j,
                           double ai, double aj, double xi, double xj,
                           const double* mat, int ki, int kj) noexcept nogil:
    cdef double d
    if code == CONSTANT:
        return scal[0]
    elif code == HEGSELMANN_KRAUSE:
        return 1.0 if fabs(xj - xi) < scal[0] else 0.0
    elif code == BOUNDED_CONFIDENCE:
        return 1.0 if fabs(xj - xi) < np_i else 0.0
    elif code == BOUNDED_INFLUENCE:
        return 1.0 if fabs(xj - xi) < np_j else 0.0
    elif code == GAUSSIAN_DECAY:
        d = xj - xi
        return exp(-((d * d) / (np_i * np_i)))
    elif code == RING_SENSING:
        d = fabs(xj - xi)
        return 1.0 if (d >= scal[0] and d <= scal[1]) else 0.0
    elif code == TYPED_CONFIDENCE:
        return 1.0 if (fabs(aj - ai) < scal[1] and fabs(xj - xi) < scal[0]) else 0.0
    elif code == FINITE_EMBED:
        return mat[ki * <int> scal[0] + kj]
    return 0.0


def rhs_builtin(int code, double t, double[::1] scal, double[::1] node_param,
                double[::1] mat, int[::1] block, double[::1] alphas,
                double[::1] x, double[::1] m, double[::1] out, int num_threads=1):
    """v[i] = sum_j m[j] * w(t, a_i, a_j, x_i, x_j) * (x_j - x_i), Kahan, fixed order."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j
    cdef bint has_np = node_param.shape[0] > 0
    cdef bint has_block = block.shape[0] > 0
    cdef const double* scal_p = &scal[0]
    cdef const double* mat_p = &mat[0] if mat.shape[0] > 0 else NULL
    cdef double xi, ai, npi, npj, w, term, y, tt, s, c
    cdef int ki, kj
    if num_threads < 1:
        num_threads = 1
    for i in prange(n, nogil=True, schedule="static", num_threads=num_threads):
        xi = x[i]
        ai = alphas[i]
        npi = node_param[i] if has_np else 0.0
        ki = block[i] if has_block else 0
        s = 0.0
        c = 0.0
        for j in range(n):
            npj = node_param[j] if has_np else 0.0
            kj = block[j] if has_block else 0
            w = _eval_w(code, scal_p, npi, npj, ai, alphas[j], xi, x[j], mat_p, ki, kj)
            term = m[j] * w * (x[j] - xi)
            y = term - c
            tt = s + y
            c = (tt - s) - y
            s = tt
        out[i] = s
    return out


def dissipation_builtin(int code, double t, double[::1] scal, double[::1] node_param,
                        double[::1] mat, int[::1] block, double[::1] alphas,
                        double[::1] x, double[::1] m, int num_threads=1):
    """D = sum_i m[i] * sum_j m[j] * w * (x_j - x_i)^2, two-level Kahan."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j
    cdef bint has_np = node_param.shape[0] > 0
    cdef bint has_block = block.shape[0] > 0
    cdef const double* scal_p = &scal[0]
    cdef const double* mat_p = &mat[0] if mat.shape[0] > 0 else NULL
    cdef double xi, ai, npi, npj, w, d, term, y, tt, s, c
    cdef double outer_s = 0.0, outer_c = 0.0
    cdef int ki, kj
    # Outer reduction stays sequential: its order is part of the contract.
    for i in range(n):
        xi = x[i]
        ai = alphas[i]
        npi = node_param[i] if has_np else 0.0
        ki = block[i] if has_block else 0
        s = 0.0
        c = 0.0
        for j in range(n):
            npj = node_param[j] if has_np else 0.0
            kj = block[j] if has_block else 0
            w = _eval_w(code, scal_p, npi, npj, ai, alphas[j], xi, x[j], mat_p, ki, kj)
            d = x[j] - xi
            term = m[j] * w * (d * d)
            y = term - c
            tt = s + y
            c = (tt - s) - y
            s = tt
        term = m[i] * s
        y = term - outer_c
        tt = outer_s + y
        outer_c = (tt - outer_s) - y
        outer_s = tt
    return outer_s
