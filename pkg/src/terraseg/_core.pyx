# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. ``_pycore`` holds the reference twin of every function
here; both must perform the same floating-point operations in the same order."""

import numpy as np

from libc.math cimport floor, INFINITY

ctypedef signed char int8


def box_sum(const double[:, ::1] a, int r):
    """Sum over the (2r+1)x(2r+1) window around every cell, border clipped."""
    cdef Py_ssize_t n0 = a.shape[0], n1 = a.shape[1]
    cdef Py_ssize_t i, j, ii, jj
    cdef int d
    cdef double acc
    tmp_arr = np.empty((n0, n1), dtype=np.float64)
    out_arr = np.empty((n0, n1), dtype=np.float64)
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n0):
            for j in range(n1):
                acc = 0.0
                for d in range(-r, r + 1):
                    jj = j + d
                    if 0 <= jj < n1:
                        acc = acc + a[i, jj]
                tmp[i, j] = acc
        for i in range(n0):
            for j in range(n1):
                acc = 0.0
                for d in range(-r, r + 1):
                    ii = i + d
                    if 0 <= ii < n0:
                        acc = acc + tmp[ii, j]
                out[i, j] = acc
    return out_arr


def welford_cells(const double[::1] z, const long long[::1] cell,
                  long long lo, long long hi,
                  long long[::1] count, double[::1] mean, double[::1] m2,
                  double[::1] zmin, double[::1] zmax):
    """Welford update of every cell in ``[lo, hi)``, points taken in input order."""
    cdef Py_ssize_t k, n = z.shape[0]
    cdef long long c, cnt
    cdef double v, delta
    with nogil:
        for k in range(n):
            c = cell[k]
            if c < lo or c >= hi:
                continue
            v = z[k]
            cnt = count[c] + 1
            count[c] = cnt
            delta = v - mean[c]
            mean[c] = mean[c] + delta / <double>cnt
            m2[c] = m2[c] + delta * (v - mean[c])
            if v < zmin[c]:
                zmin[c] = v
            if v > zmax[c]:
                zmax[c] = v


cdef enum:
    BLOCK_SHIFT = 3  # blocks of 8x8 cells for the occlusion bound


cdef inline long long _next_line(long long k, long long s, double o, double d, double t) noexcept nogil:
    # first grid line at or after k (stepping by s) whose crossing lies beyond t
    while (<double>k - o) / d <= t:
        k += s
    return k


cdef inline unsigned char _occluded(double su, double sv, double sz,
                                    double pu, double pv, double pz,
                                    const double[:, ::1] g,
                                    const unsigned char[:, ::1] trusted,
                                    const double[:, ::1] block_max,
                                    Py_ssize_t n, double o_t) noexcept nogil:
    cdef long long j = <long long>floor(su)
    cdef long long i = <long long>floor(sv)
    cdef long long je = <long long>floor(pu)
    cdef long long ie = <long long>floor(pv)
    cdef long long bie = ie >> BLOCK_SHIFT, bje = je >> BLOCK_SHIFT
    cdef long long bi, bj, bi_seen = -1, bj_seen = -1, bx, by
    cdef double du = pu - su, dv = pv - sv, dz = pz - sz
    cdef long long sx = 0, sy = 0, kx = 0, ky = 0
    cdef double tnx = INFINITY, tny = INFINITY
    cdef double te = 0.0, tx, tm, zr, tbx, tby, tb, thi, z0, z1
    cdef bint last
    if du > 0:
        sx = 1
        kx = j + 1
        tnx = (<double>kx - su) / du
    elif du < 0:
        sx = -1
        kx = j
        tnx = (<double>kx - su) / du
    if dv > 0:
        sy = 1
        ky = i + 1
        tny = (<double>ky - sv) / dv
    elif dv < 0:
        sy = -1
        ky = i
        tny = (<double>ky - sv) / dv
    while True:
        if i < 0 or i >= n or j < 0 or j >= n:
            return 0
        bi = i >> BLOCK_SHIFT
        bj = j >> BLOCK_SHIFT
        if (bi != bi_seen or bj != bj_seen) and not (bi == bie and bj == bje):
            # First cell of a new block. If no trusted cell of the block can
            # rise o_t above the lowest ray height inside it, jump to the
            # state the cell walk would have on leaving the block.
            bi_seen = bi
            bj_seen = bj
            tbx = INFINITY
            tby = INFINITY
            if sx > 0:
                bx = (bj + 1) << BLOCK_SHIFT
                tbx = (<double>bx - su) / du
            elif sx < 0:
                bx = bj << BLOCK_SHIFT
                tbx = (<double>bx - su) / du
            if sy > 0:
                by = (bi + 1) << BLOCK_SHIFT
                tby = (<double>by - sv) / dv
            elif sy < 0:
                by = bi << BLOCK_SHIFT
                tby = (<double>by - sv) / dv
            tb = tbx if tbx < tby else tby
            thi = tb if tb < 1.0 else 1.0
            z0 = sz + dz * te
            z1 = sz + dz * thi
            if block_max[bi, bj] - (z0 if z0 < z1 else z1) <= o_t:
                if tb >= 1.0:
                    return 0
                te = tb
                if sx != 0:
                    kx = _next_line(kx, sx, su, du, tb)
                    j = kx - 1 if sx > 0 else kx
                    tnx = (<double>kx - su) / du
                if sy != 0:
                    ky = _next_line(ky, sy, sv, dv, tb)
                    i = ky - 1 if sy > 0 else ky
                    tny = (<double>ky - sv) / dv
                continue
        last = i == ie and j == je
        if last:
            tx = 1.0
        else:
            tx = tnx if tnx < tny else tny
            if tx > 1.0:
                tx = 1.0
        if trusted[i, j]:
            tm = 0.5 * (te + tx)
            zr = sz + dz * tm
            if g[i, j] - zr > o_t:
                return 1
        if last or tx >= 1.0:
            return 0
        if tnx < tny:
            j += sx
            te = tnx
            kx += sx
            tnx = (<double>kx - su) / du
        elif tny < tnx:
            i += sy
            te = tny
            ky += sy
            tny = (<double>ky - sv) / dv
        else:
            j += sx
            i += sy
            te = tnx
            kx += sx
            ky += sy
            tnx = (<double>kx - su) / du
            tny = (<double>ky - sv) / dv


def occlusion_mask(double su, double sv, double sz,
                   const double[::1] pu, const double[::1] pv, const double[::1] pz,
                   const double[:, ::1] g, const unsigned char[:, ::1] trusted,
                   const double[:, ::1] block_max,
                   double o_t, unsigned char[::1] out,
                   Py_ssize_t start, Py_ssize_t stop):
    """Line-of-sight test for points ``start:stop`` in grid units (cell = 1).

    ``block_max`` holds, per 8x8 block, the highest trusted elevation (or
    -inf); it only lets the walk skip blocks and never changes the result.
    """
    cdef Py_ssize_t k, n = g.shape[0]
    with nogil:
        for k in range(start, stop):
            out[k] = _occluded(su, sv, sz, pu[k], pv[k], pz[k], g, trusted, block_max, n, o_t)


def window_sums(const double[:, ::1] a, const double[:, ::1] b,
                const long long[::1] cells, const long long[::1] radius,
                double[::1] out_a, double[::1] out_b):
    """Clipped window sums of two layers around selected flat cell indices.

    Cells are added row-major over the window.
    """
    cdef Py_ssize_t n = a.shape[0], m = a.shape[1]
    cdef Py_ssize_t k, i, j, ii, jj
    cdef long long r, di, dj
    cdef double sa, sb
    with nogil:
        for k in range(cells.shape[0]):
            i = cells[k] // m
            j = cells[k] % m
            r = radius[k]
            sa = 0.0
            sb = 0.0
            for di in range(-r, r + 1):
                ii = i + di
                if ii < 0 or ii >= n:
                    continue
                for dj in range(-r, r + 1):
                    jj = j + dj
                    if jj < 0 or jj >= m:
                        continue
                    sa = sa + a[ii, jj]
                    sb = sb + b[ii, jj]
            out_a[k] = sa
            out_b[k] = sb


def spiral_interpolate(double[:, ::1] g, double[:, ::1] c,
                       const int8[:, ::1] skip, const long long[::1] order,
                       double theta):
    """In-place confidence-weighted 3x3 blending in ``order``; cells with
    ``skip`` set are left alone."""
    cdef Py_ssize_t n = g.shape[0], m = g.shape[1]
    cdef Py_ssize_t k, i, j, ii, jj
    cdef long long idx
    cdef int di, dj
    cdef double num, den, w, ci
    with nogil:
        for k in range(order.shape[0]):
            idx = order[k]
            i = idx // m
            j = idx % m
            if skip[i, j]:
                continue
            num = 0.0
            den = 0.0
            for di in range(-1, 2):
                ii = i + di
                if ii < 0 or ii >= n:
                    continue
                for dj in range(-1, 2):
                    jj = j + dj
                    if jj < 0 or jj >= m:
                        continue
                    w = c[ii, jj]
                    num = num + w * g[ii, jj]
                    den = den + w
            ci = c[i, j]
            if den > 0.0:
                g[i, j] = (1.0 - ci) * (num / den) + ci * g[i, j]
            c[i, j] = ci - ci / theta
