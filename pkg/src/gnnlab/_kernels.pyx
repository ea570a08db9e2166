# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: bilinear polar interpolation, Laplacian stencil
application, and the moving-plane scan loop.

Mirrors gnnlab._kernels_py operation for operation (same grouping, same
snap thresholds) so the two backends agree to rounding.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, floor, sqrt

cnp.import_array()

cdef double SNAP = 1e-9
cdef double TWO_PI = 2.0 * np.pi


cdef inline double _interp_one(
    const double[:, ::1] values,
    Py_ssize_t nr,
    Py_ssize_t nt,
    double fr,
    double ft,
) noexcept nogil:
    cdef Py_ssize_t ir, it, ir1, it1
    cdef double tr, tt, v00, v10, v01, v11

    ir = <Py_ssize_t>floor(fr)
    tr = fr - ir
    if tr < SNAP:
        tr = 0.0
    elif tr > 1.0 - SNAP:
        tr = 0.0
        ir += 1
    if ir < 0:
        ir = 0
    if ir > nr - 1:
        ir = nr - 1
    ir1 = ir + 1
    if ir1 > nr - 1:
        ir1 = nr - 1

    it = <Py_ssize_t>floor(ft)
    tt = ft - it
    if tt < SNAP:
        tt = 0.0
    elif tt > 1.0 - SNAP:
        tt = 0.0
        it += 1
    it = it % nt
    if it < 0:
        it += nt
    it1 = it + 1
    if it1 == nt:
        it1 = 0

    v00 = values[ir, it]
    v10 = values[ir1, it]
    v01 = values[ir, it1]
    v11 = values[ir1, it1]
    return (1.0 - tr) * ((1.0 - tt) * v00 + tt * v01) + tr * (
        (1.0 - tt) * v10 + tt * v11
    )


def interp_fractional(const double[:, ::1] values, fr, ft):
    """Bilinear gather on a polar value table (see the numpy twin)."""
    fr_arr = np.ascontiguousarray(fr, dtype=np.float64).ravel()
    ft_arr = np.ascontiguousarray(ft, dtype=np.float64).ravel()
    cdef const double[::1] frv = fr_arr
    cdef const double[::1] ftv = ft_arr
    cdef Py_ssize_t n = frv.shape[0]
    cdef Py_ssize_t nr = values.shape[0]
    cdef Py_ssize_t nt = values.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = _interp_one(values, nr, nt, frv[i], ftv[i])
    return out_arr.reshape(np.shape(fr))


def laplace_apply(const double[:, ::1] values):
    """Discrete polar Laplacian; see the numpy twin for conventions."""
    cdef Py_ssize_t nr = values.shape[0]
    cdef Py_ssize_t nt = values.shape[1]
    cdef double dr = 1.0 / (nr - 1)
    cdef double dth = TWO_PI / nt
    out_arr = np.zeros((nr, nt), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, jp, jm
    cdef double acc, r, u_rr, u_r, u_tt
    with nogil:
        acc = 0.0
        for j in range(nt):
            acc += values[1, j]
        acc = acc / nt
        for j in range(nt):
            out[0, j] = 4.0 * (acc - values[0, 0]) / (dr * dr)
        for i in range(1, nr - 1):
            r = i * dr
            for j in range(nt):
                jp = j + 1 if j + 1 < nt else 0
                jm = j - 1 if j > 0 else nt - 1
                u_rr = (values[i + 1, j] - 2.0 * values[i, j] + values[i - 1, j]) / (
                    dr * dr
                )
                u_r = (values[i + 1, j] - values[i - 1, j]) / (2.0 * dr)
                u_tt = (values[i, jp] - 2.0 * values[i, j] + values[i, jm]) / (
                    dth * dth
                )
                out[i, j] = u_rr + u_r / r + u_tt / (r * r)
    return out_arr


def plane_scan_min(
    const double[:, ::1] values,
    const double[::1] px,
    const double[::1] py,
    const double[::1] pu,
    const double[::1] lambdas,
    double plane_tol,
):
    """Minimum reflection difference per plane height; numpy-twin semantics."""
    cdef Py_ssize_t nr = values.shape[0]
    cdef Py_ssize_t nt = values.shape[1]
    cdef Py_ssize_t n_pts = px.shape[0]
    cdef Py_ssize_t n_lam = lambdas.shape[0]
    cdef double inv_dr = <double>(nr - 1)
    cdef double inv_dt = nt / TWO_PI

    mins_arr = np.full(n_lam, np.inf)
    counts_arr = np.zeros(n_lam, dtype=np.int64)
    cdef double[::1] mins = mins_arr
    cdef long long[::1] counts = counts_arr

    cdef Py_ssize_t m, i
    cdef double lam, gate, x, y, rq, tq, w, best
    cdef long long cnt
    with nogil:
        for m in range(n_lam):
            lam = lambdas[m]
            gate = lam + plane_tol
            best = mins[m]
            cnt = 0
            for i in range(n_pts):
                if py[i] > gate:
                    x = px[i]
                    y = 2.0 * lam - py[i]
                    rq = sqrt(x * x + y * y)
                    if rq > 1.0:
                        rq = 1.0
                    tq = atan2(y, x)
                    if tq < 0.0:
                        tq = tq + TWO_PI
                    w = _interp_one(values, nr, nt, rq * inv_dr, tq * inv_dt) - pu[i]
                    if w < best:
                        best = w
                    cnt += 1
            mins[m] = best
            counts[m] = cnt
    return mins_arr, counts_arr
