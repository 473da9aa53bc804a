"""Pure Python/numpy twin of the compiled kernels in ``_core.pyx``.

Every function mirrors its compiled counterpart operation for operation, so
both backends produce identical floating-point results. The vectorized
variants trade the compiled per-element loops for whole-array steps.
"""
from __future__ import annotations

import numpy as np


def box_sum(a: np.ndarray, r: int) -> np.ndarray:
    """Sum over the (2r+1)x(2r+1) window around every cell, border clipped."""
    n0, n1 = a.shape
    width = 2 * r + 1
    padded = np.zeros((n0, n1 + 2 * r))
    padded[:, r:r + n1] = a
    tmp = np.zeros((n0, n1))
    for d in range(width):
        tmp = tmp + padded[:, d:d + n1]
    padded = np.zeros((n0 + 2 * r, n1))
    padded[r:r + n0] = tmp
    out = np.zeros((n0, n1))
    for d in range(width):
        out = out + padded[d:d + n0]
    return out


def welford_cells(z, cell, lo, hi, count, mean, m2, zmin, zmax) -> None:
    # Cells are updated rank by rank: the k-th sample of every cell in one
    # vectorized step, which keeps each cell's update sequence in input order.
    sel = np.flatnonzero((cell >= lo) & (cell < hi))
    if sel.size == 0:
        return
    order = np.argsort(cell[sel], kind="stable")
    sel = sel[order]
    cells = cell[sel]
    run_start = np.r_[0, np.flatnonzero(np.diff(cells)) + 1]
    run_len = np.diff(np.r_[run_start, cells.size])
    rank = np.arange(cells.size) - np.repeat(run_start, run_len)
    base = count[cells].copy()
    by_rank = np.argsort(rank, kind="stable")
    bounds = np.r_[0, np.cumsum(np.bincount(rank))]
    for r in range(bounds.size - 1):
        chunk = by_rank[bounds[r]:bounds[r + 1]]
        c = cells[chunk]
        v = z[sel[chunk]]
        cnt = base[chunk] + (r + 1)
        count[c] = cnt
        delta = v - mean[c]
        mean[c] = mean[c] + delta / cnt.astype(np.float64)
        m2[c] = m2[c] + delta * (v - mean[c])
        zmin[c] = np.where(v < zmin[c], v, zmin[c])
        zmax[c] = np.where(v > zmax[c], v, zmax[c])


BLOCK = 8  # block edge of the occlusion bound used by the compiled walk


def occlusion_mask(su, sv, sz, pu, pv, pz, g, trusted, block_max, o_t, out, start, stop) -> None:
    """Line-of-sight test for points ``start:stop`` in grid units (cell = 1).

    All rays advance one cell per iteration; finished rays drop out. Every
    cell is visited, so ``block_max`` is accepted for signature parity only.
    """
    n = g.shape[0]
    pu = np.asarray(pu[start:stop], dtype=np.float64)
    pv = np.asarray(pv[start:stop], dtype=np.float64)
    pz = np.asarray(pz[start:stop], dtype=np.float64)
    m = pu.size
    result = np.zeros(m, dtype=np.uint8)
    if m == 0:
        out[start:stop] = result
        return
    j0, i0 = int(np.floor(su)), int(np.floor(sv))
    je = np.floor(pu).astype(np.int64)
    ie = np.floor(pv).astype(np.int64)
    du, dv, dz = pu - su, pv - sv, pz - sz
    sx = np.sign(du).astype(np.int64)
    sy = np.sign(dv).astype(np.int64)
    kx = np.where(du > 0, j0 + 1, j0).astype(np.int64)
    ky = np.where(dv > 0, i0 + 1, i0).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        tnx = np.where(du != 0, (kx.astype(np.float64) - su) / du, np.inf)
        tny = np.where(dv != 0, (ky.astype(np.float64) - sv) / dv, np.inf)
    j = np.full(m, j0, dtype=np.int64)
    i = np.full(m, i0, dtype=np.int64)
    te = np.zeros(m)
    idx = np.arange(m)

    while idx.size:
        inb = (i >= 0) & (i < n) & (j >= 0) & (j < n)
        if not inb.all():
            idx, i, j, ie, je, te, tnx, tny, kx, ky, sx, sy, du, dv, dz = (
                a[inb] for a in (idx, i, j, ie, je, te, tnx, tny, kx, ky, sx, sy, du, dv, dz))
            if not idx.size:
                break
        last = (i == ie) & (j == je)
        tx = np.where(last, 1.0, np.minimum(np.minimum(tnx, tny), 1.0))
        tm = 0.5 * (te + tx)
        zr = sz + dz * tm
        occ = (trusted[i, j] != 0) & (g[i, j] - zr > o_t)
        result[idx[occ]] = 1
        go = ~(occ | last | (tx >= 1.0))
        idx, i, j, ie, je, te, tnx, tny, kx, ky, sx, sy, du, dv, dz = (
            a[go] for a in (idx, i, j, ie, je, te, tnx, tny, kx, ky, sx, sy, du, dv, dz))
        step_x = ~(tny < tnx)
        step_y = ~(tnx < tny)
        te = np.where(step_x, tnx, tny)
        j = j + np.where(step_x, sx, 0)
        i = i + np.where(step_y, sy, 0)
        kx = kx + np.where(step_x, sx, 0)
        ky = ky + np.where(step_y, sy, 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            tnx = np.where(step_x, (kx.astype(np.float64) - su) / du, tnx)
            tny = np.where(step_y, (ky.astype(np.float64) - sv) / dv, tny)
    out[start:stop] = result


def window_sums(a, b, cells, radius, out_a, out_b) -> None:
    """Clipped window sums of two layers around selected flat cell indices."""
    n, m = a.shape
    cells = np.asarray(cells, dtype=np.int64)
    radius = np.asarray(radius, dtype=np.int64)
    for r in np.unique(radius):
        sel = np.flatnonzero(radius == r)
        i, j = np.divmod(cells[sel], m)
        sa = np.zeros(sel.size)
        sb = np.zeros(sel.size)
        for di in range(-r, r + 1):
            ii = i + di
            row_ok = (ii >= 0) & (ii < n)
            iic = np.clip(ii, 0, n - 1)
            for dj in range(-r, r + 1):
                jj = j + dj
                ok = row_ok & (jj >= 0) & (jj < m)
                jjc = np.clip(jj, 0, m - 1)
                sa = sa + np.where(ok, a[iic, jjc], 0.0)
                sb = sb + np.where(ok, b[iic, jjc], 0.0)
        out_a[sel] = sa
        out_b[sel] = sb


def spiral_interpolate(g, c, skip, order, theta) -> None:
    n, m = g.shape
    gl = g.tolist()
    cl = c.tolist()
    sk = skip.tolist()
    for idx in order.tolist():
        i, j = divmod(idx, m)
        if sk[i][j]:
            continue
        num = 0.0
        den = 0.0
        for ii in (i - 1, i, i + 1):
            if ii < 0 or ii >= n:
                continue
            grow, crow = gl[ii], cl[ii]
            for jj in (j - 1, j, j + 1):
                if jj < 0 or jj >= m:
                    continue
                w = crow[jj]
                num = num + w * grow[jj]
                den = den + w
        ci = cl[i][j]
        if den > 0.0:
            gl[i][j] = (1.0 - ci) * (num / den) + ci * gl[i][j]
        cl[i][j] = ci - ci / theta
    g[:] = gl
    c[:] = cl
