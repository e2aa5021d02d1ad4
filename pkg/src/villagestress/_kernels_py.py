"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation so that both backends
produce the same numbers; the compiled module is preferred when importable.
NaN marks nodata in every array handled here.
"""
import numpy as np


def horn_gradient(z, cellsize):
    """East and north elevation gradients with the 3x3 Horn kernel.

    Borders use edge replication; any NaN in the 3x3 window yields NaN.
    Row 0 is the northern edge of the grid.
    """
    p = np.pad(np.asarray(z, dtype=np.float64), 1, mode="edge")
    a = p[:-2, :-2]
    b = p[:-2, 1:-1]
    c = p[:-2, 2:]
    d = p[1:-1, :-2]
    f = p[1:-1, 2:]
    g = p[2:, :-2]
    h = p[2:, 1:-1]
    i = p[2:, 2:]
    # a NaN centre must also propagate, so add 0 * centre
    e0 = 0.0 * p[1:-1, 1:-1]
    dzdx = (((c + 2.0 * f + i) - (a + 2.0 * d + g)) / (8.0 * cellsize)) + e0
    dzdy = (((a + 2.0 * b + c) - (g + 2.0 * h + i)) / (8.0 * cellsize)) + e0
    return dzdx, dzdy


def horizon_tangents(z, cellsize, off_i, off_j, dist):
    """Largest elevation tangent seen along each direction.

    Parameters
    ----------
    z : ndarray (nrows, ncols)
    off_i, off_j : int ndarray (ndirs, nsteps)
        Row/column offsets of the ray samples; a ray ends at the first
        sample that leaves the grid in every cell's frame, which is handled
        by bounds checks here.
    dist : ndarray (ndirs, nsteps)
        Horizontal distance of each sample in cell units.

    Returns
    -------
    ndarray (ndirs, nrows, ncols) of tangents clipped below at 0.
    """
    z = np.asarray(z, dtype=np.float64)
    nrows, ncols = z.shape
    ndirs, nsteps = off_i.shape
    out = np.zeros((ndirs, nrows, ncols))
    for d in range(ndirs):
        best = out[d]
        for s in range(nsteps):
            di = int(off_i[d, s])
            dj = int(off_j[d, s])
            if abs(di) >= nrows or abs(dj) >= ncols:
                break
            r0, r1 = max(0, -di), min(nrows, nrows - di)
            c0, c1 = max(0, -dj), min(ncols, ncols - dj)
            here = z[r0:r1, c0:c1]
            there = z[r0 + di:r1 + di, c0 + dj:c1 + dj]
            tan = (there - here) / (dist[d, s] * cellsize)
            block = best[r0:r1, c0:c1]
            take = tan > block
            block[take] = tan[take]
        best[np.isnan(z)] = np.nan
    return out


def insolation_sum(nx, ny, nz, svf, tangents, sun_e, sun_n, sun_u, sun_tan, sun_bin,
                   beam, diffuse):
    """Accumulate beam plus diffuse energy over the day's time steps.

    ``beam`` and ``diffuse`` are per-step energy scales (irradiance x hours,
    already split by the diffuse fraction).
    """
    total = np.zeros(nx.shape)
    for t in range(sun_e.shape[0]):
        cos_inc = nx * sun_e[t] + ny * sun_n[t] + nz * sun_u[t]
        lit = (cos_inc > 0.0) & (sun_tan[t] > tangents[sun_bin[t]])
        direct = np.where(lit, beam[t] * cos_inc, 0.0)
        total = total + (direct + diffuse[t] * svf)
    total[np.isnan(nx)] = np.nan
    return total


def upgma(dist):
    """Average-linkage agglomeration on a full distance matrix.

    Pairwise inter-cluster distance sums are merged additively and the
    average is formed at comparison time.  Ties go to the smallest
    ``(node_a, node_b)`` id pair.  Returns a list of
    ``(node_a, node_b, height, new_id, size)`` tuples.
    """
    n = dist.shape[0]
    total = 2 * n - 1
    sums = np.zeros((total, total))
    sums[:n, :n] = dist
    size = [1] * n + [0] * (n - 1)
    active = list(range(n))
    merges = []
    for step in range(n - 1):
        best = None
        best_pair = None
        for ia in range(len(active)):
            a = active[ia]
            for ib in range(ia + 1, len(active)):
                b = active[ib]
                h = sums[a, b] / (size[a] * size[b])
                if best is None or h < best:
                    best = h
                    best_pair = (a, b)
        a, b = best_pair
        new = n + step
        size[new] = size[a] + size[b]
        for c in active:
            if c != a and c != b:
                sums[new, c] = sums[c, new] = sums[a, c] + sums[b, c]
        active.remove(a)
        active.remove(b)
        active.append(new)
        merges.append((a, b, best, new, size[new]))
    return merges
