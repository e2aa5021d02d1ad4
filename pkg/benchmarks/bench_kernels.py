"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--rows 60 --cols 80 --repeat 5]
"""
import argparse
import timeit

import numpy as np

from villagestress import _backend
from villagestress.raster import RasterGrid, SolarParams, _ray_offsets


def synthetic_dem(rows, cols, seed=0):
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:rows, 0:cols]
    z = 40 * np.sin(x / 9.0) * np.cos(y / 13.0) + np.cumsum(rng.normal(size=(rows, cols)), 0)
    return RasterGrid.from_array(z, 10.0)


def cases(dem, n_points):
    from villagestress.raster import sun_path
    z = dem.masked()
    params = SolarParams()
    off_i, off_j, dist = _ray_offsets(dem.nrows, dem.ncols, params.horizon_directions)
    rng = np.random.default_rng(1)
    p = rng.normal(size=(n_points, 4))
    d = np.sqrt(((p[:, None] - p[None]) ** 2).sum(-1))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)

    def insolation_args(k):
        tans = k.horizon_tangents(z, dem.cellsize, off_i, off_j, dist)
        dzdx, dzdy = k.horn_gradient(z, dem.cellsize)
        norm = np.sqrt(1 + dzdx ** 2 + dzdy ** 2)
        svf = 0.5 * (1 + 1 / norm) * np.mean(1 / (1 + tans ** 2), axis=0)
        e, n, u, h = sun_path(params)
        hz = np.hypot(e, n)
        sun_bin = np.mod(np.floor(np.mod(np.arctan2(e, n), 2 * np.pi)
                                  / (2 * np.pi / 32) + 0.5), 32).astype(np.int64)
        return (-dzdx / norm, -dzdy / norm, 1 / norm, svf, tans, e, n, u, u / hz, sun_bin,
                0.7 * 3200 * h, 0.3 * 3200 * h * u)

    return {
        "horn_gradient": lambda k: k.horn_gradient(z, dem.cellsize),
        "horizon_tangents": lambda k: k.horizon_tangents(z, dem.cellsize, off_i, off_j, dist),
        "insolation_sum": (insolation_args, lambda k, a: k.insolation_sum(*a)),
        "upgma": lambda k: k.upgma(d),
    }


def _flat(out):
    return [np.asarray(a) for a in out] if isinstance(out, tuple) else [np.asarray(out)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=60)
    ap.add_argument("--cols", type=int, default=80)
    ap.add_argument("--points", type=int, default=200, help="items for the UPGMA case")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _backend.compiled_kernels is None:
        raise SystemExit("compiled kernels are not built; run pip install -e . first")
    backends = {"python": _backend.python_kernels, "compiled": _backend.compiled_kernels}
    dem = synthetic_dem(args.rows, args.cols)
    print(f"grid {args.rows}x{args.cols}, UPGMA n={args.points}, best of {args.repeat}")
    print(f"{'kernel':<18}{'python s':>12}{'compiled s':>12}{'speedup':>10}{'equal':>7}")
    for name, case in cases(dem, args.points).items():
        times, outputs = {}, {}
        for label, k in backends.items():
            if isinstance(case, tuple):
                prep, run = case
                a = prep(k)
                fn = (lambda k=k, a=a: run(k, a))
            else:
                fn = (lambda k=k: case(k))
            times[label] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            outputs[label] = fn()
        same = all(np.array_equal(a, b, equal_nan=True) for a, b in
                   zip(_flat(outputs["python"]), _flat(outputs["compiled"])))
        print(f"{name:<18}{times['python']:>12.4f}{times['compiled']:>12.4f}"
              f"{times['python'] / times['compiled']:>9.1f}x{str(same):>7}")


if __name__ == "__main__":
    main()
