# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in ``_kernels_py``.

Same signatures and the same floating point operation order, so the two
backends agree to the last bit on ordinary inputs.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport isnan, NAN

cnp.import_array()


def horn_gradient(z, double cellsize):
    cdef double[:, ::1] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t nrows = zz.shape[0], ncols = zz.shape[1]
    dzdx_arr = np.empty((nrows, ncols))
    dzdy_arr = np.empty((nrows, ncols))
    cdef double[:, ::1] dzdx = dzdx_arr
    cdef double[:, ::1] dzdy = dzdy_arr
    cdef Py_ssize_t r, c, rn, rs, cw, ce
    cdef double a, b, cc, d, f, g, h, i, e0, denom = 8.0 * cellsize
    for r in range(nrows):
        rn = r - 1 if r > 0 else 0
        rs = r + 1 if r < nrows - 1 else nrows - 1
        for c in range(ncols):
            cw = c - 1 if c > 0 else 0
            ce = c + 1 if c < ncols - 1 else ncols - 1
            a = zz[rn, cw]
            b = zz[rn, c]
            cc = zz[rn, ce]
            d = zz[r, cw]
            f = zz[r, ce]
            g = zz[rs, cw]
            h = zz[rs, c]
            i = zz[rs, ce]
            e0 = 0.0 * zz[r, c]
            dzdx[r, c] = (((cc + 2.0 * f + i) - (a + 2.0 * d + g)) / denom) + e0
            dzdy[r, c] = (((a + 2.0 * b + cc) - (g + 2.0 * h + i)) / denom) + e0
    return dzdx_arr, dzdy_arr


def horizon_tangents(z, double cellsize, off_i, off_j, dist):
    cdef double[:, ::1] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef long[:, ::1] oi = np.ascontiguousarray(off_i, dtype=np.int64)
    cdef long[:, ::1] oj = np.ascontiguousarray(off_j, dtype=np.int64)
    cdef double[:, ::1] dd = np.ascontiguousarray(dist, dtype=np.float64)
    cdef Py_ssize_t nrows = zz.shape[0], ncols = zz.shape[1]
    cdef Py_ssize_t ndirs = oi.shape[0], nsteps = oi.shape[1]
    out_arr = np.zeros((ndirs, nrows, ncols))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t k, s, r, c, rr, cc
    cdef double here, there, tan, best
    for k in range(ndirs):
        for r in range(nrows):
            for c in range(ncols):
                here = zz[r, c]
                if isnan(here):
                    out[k, r, c] = NAN
                    continue
                best = 0.0
                for s in range(nsteps):
                    rr = r + oi[k, s]
                    cc = c + oj[k, s]
                    if rr < 0 or rr >= nrows or cc < 0 or cc >= ncols:
                        break
                    there = zz[rr, cc]
                    tan = (there - here) / (dd[k, s] * cellsize)
                    if tan > best:
                        best = tan
                out[k, r, c] = best
    return out_arr


def insolation_sum(nx, ny, nz, svf, tangents, sun_e, sun_n, sun_u, sun_tan, sun_bin,
                   beam, diffuse):
    cdef double[:, ::1] vx = np.ascontiguousarray(nx, dtype=np.float64)
    cdef double[:, ::1] vy = np.ascontiguousarray(ny, dtype=np.float64)
    cdef double[:, ::1] vz = np.ascontiguousarray(nz, dtype=np.float64)
    cdef double[:, ::1] sv = np.ascontiguousarray(svf, dtype=np.float64)
    cdef double[:, :, ::1] tg = np.ascontiguousarray(tangents, dtype=np.float64)
    cdef double[::1] se = np.ascontiguousarray(sun_e, dtype=np.float64)
    cdef double[::1] sn = np.ascontiguousarray(sun_n, dtype=np.float64)
    cdef double[::1] su = np.ascontiguousarray(sun_u, dtype=np.float64)
    cdef double[::1] st = np.ascontiguousarray(sun_tan, dtype=np.float64)
    cdef long[::1] sb = np.ascontiguousarray(sun_bin, dtype=np.int64)
    cdef double[::1] bm = np.ascontiguousarray(beam, dtype=np.float64)
    cdef double[::1] df = np.ascontiguousarray(diffuse, dtype=np.float64)
    cdef Py_ssize_t nrows = vx.shape[0], ncols = vx.shape[1], nt = se.shape[0]
    out_arr = np.zeros((nrows, ncols))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, c, t
    cdef double total, cos_inc, direct
    for r in range(nrows):
        for c in range(ncols):
            if isnan(vx[r, c]):
                out[r, c] = NAN
                continue
            total = 0.0
            for t in range(nt):
                cos_inc = vx[r, c] * se[t] + vy[r, c] * sn[t] + vz[r, c] * su[t]
                if cos_inc > 0.0 and st[t] > tg[sb[t], r, c]:
                    direct = bm[t] * cos_inc
                else:
                    direct = 0.0
                total = total + (direct + df[t] * sv[r, c])
            out[r, c] = total
    return out_arr


def upgma(dist):
    cdef double[:, ::1] dm = np.ascontiguousarray(dist, dtype=np.float64)
    cdef Py_ssize_t n = dm.shape[0]
    cdef Py_ssize_t total = 2 * n - 1
    sums_arr = np.zeros((total, total))
    cdef double[:, ::1] sums = sums_arr
    sums_arr[:n, :n] = dist
    size_arr = np.zeros(total, dtype=np.int64)
    cdef long[::1] size = size_arr
    active_arr = np.zeros(total, dtype=np.int64)
    cdef long[::1] active = active_arr
    cdef Py_ssize_t nactive = n, step, ia, ib, a, b, ba = 0, bb = 0, new, cidx, w, k
    cdef double h, best
    cdef bint found
    for k in range(n):
        size[k] = 1
        active[k] = k
    merges = []
    for step in range(n - 1):
        found = False
        best = 0.0
        for ia in range(nactive):
            a = active[ia]
            for ib in range(ia + 1, nactive):
                b = active[ib]
                h = sums[a, b] / (<double>size[a] * <double>size[b])
                if not found or h < best:
                    best = h
                    ba = a
                    bb = b
                    found = True
        new = n + step
        size[new] = size[ba] + size[bb]
        for ia in range(nactive):
            cidx = active[ia]
            if cidx != ba and cidx != bb:
                sums[new, cidx] = sums[ba, cidx] + sums[bb, cidx]
                sums[cidx, new] = sums[new, cidx]
        w = 0
        for ia in range(nactive):
            if active[ia] != ba and active[ia] != bb:
                active[w] = active[ia]
                w += 1
        active[w] = new
        nactive = w + 1
        merges.append((int(ba), int(bb), best, int(new), int(size[new])))
    return merges
