"""Command line interface.

    villagestress pipeline --fixture --out report/
    villagestress indices --villages villages.csv --manifest rasters.csv --out out/
    villagestress compare --villages villages.csv --a admin --b clusters.csv
    villagestress audit --out report/

Exit codes: 0 success, 2 input/validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from . import pipeline
from .classify import cluster_villages, cross_tab, lda_classify, lda_fit, scan_k
from .errors import InputError, VillageStressError
from .stats import correlation_report


def fixture_paths() -> dict:
    """Bundled 27-village township table and its reference cluster labels."""
    base = resources.files("villagestress") / "data"
    return {
        "villages": Path(str(base / "township27.csv")),
        "reference_clusters": Path(str(base / "township27_clusters.csv")),
    }


def _config(args) -> pipeline.PipelineConfig:
    overrides = {
        "villages": args.villages,
        "surfaces": args.surfaces,
        "crops": args.crops,
        "manifest": args.manifest,
        "reference_clusters": args.reference_clusters,
        "out": args.out,
        "slope_threshold": args.slope_threshold,
        "srei_threshold": args.srei_threshold,
        "chosen_k": args.k,
        "k_range": pipeline.parse_k_range(args.k_range) if args.k_range else None,
    }
    if args.fixture:
        for key, path in fixture_paths().items():
            if overrides[key] is None:
                overrides[key] = path
    return pipeline.load_config(args.config, **overrides)


def _emit(config, files: dict) -> None:
    if config.out is None:
        for name in sorted(files):
            if len(files) > 1:
                sys.stdout.write(f"# {name}\n")
            sys.stdout.write(files[name])
    else:
        pipeline.write_outputs(config.out, files)


def _matrix(config):
    return pipeline.assemble_stress_table(pipeline.cmd_indices(config))


def run_indices(args):
    config = _config(args)
    _emit(config, {"indices.csv": pipeline.indices_csv(pipeline.cmd_indices(config))})


def run_correlate(args):
    config = _config(args)
    _emit(config, pipeline.correlation_files(correlation_report(_matrix(config))))


def run_lda(args):
    config = _config(args)
    model = lda_fit(_matrix(config))
    _emit(config, pipeline.lda_files(model, lda_classify(model)))


def run_cluster(args):
    config = _config(args)
    matrix = _matrix(config)
    kmin, kmax = config.k_range
    if kmax > matrix.n - 1:
        raise InputError(f"k_range exceeds n-1 (k_range {kmin}..{kmax}, n={matrix.n})")
    clustering = cluster_villages(matrix)
    validity = scan_k(matrix, kmin, kmax, clustering)
    clusters = pipeline._aligned_assignment(config, matrix, clustering.cut(config.chosen_k))
    files = pipeline.cluster_files(matrix, clustering, validity, clusters)
    files["crosstab.csv"] = pipeline.crosstab_csv(cross_tab(matrix.admin_labels, clusters))
    _emit(config, files)


def run_compare(args):
    config = _config(args)
    _emit(config, {"comparison.csv": pipeline.cmd_compare(config, args.a, args.b)})


def run_pipeline(args):
    config = _config(args)
    files, report = pipeline.run_pipeline(config)
    if config.out is None:
        sys.stdout.write(files["report.json"])
    else:
        pipeline.write_outputs(config.out, files)
        print(f"wrote {len(files)} files to {config.out}", file=sys.stderr)


def run_audit(args):
    if args.out is None:
        raise InputError("audit needs --out pointing at a pipeline output folder")
    problems = pipeline.audit(args.out)
    for p in problems:
        print(p, file=sys.stderr)
    if problems:
        return 3
    print("audit ok: ANOVA tables match the emitted village tables", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file; flags override it")
    common.add_argument("--out", help="output folder (stdout when omitted)")
    common.add_argument("--villages", help="villages.csv")
    common.add_argument("--surfaces", help="surfaces.csv for WI")
    common.add_argument("--crops", help="crops.csv for AII")
    common.add_argument("--manifest", help="raster manifest CSV (id, dem, mask)")
    common.add_argument("--reference-clusters",
                        help="village_id,cluster CSV used to align cluster numbers")
    common.add_argument("--fixture", action="store_true",
                        help="use the bundled 27-village township table")
    common.add_argument("--k", type=int, help="number of clusters to report (default 4)")
    common.add_argument("--k-range", help="scanned cluster counts as a..b (default 2..16)")
    common.add_argument("--slope-threshold", type=float, help="degrees (default 4.8)")
    common.add_argument("--srei-threshold", type=float,
                        help="kJ m-2 day-1 (default 20000)")

    parser = argparse.ArgumentParser(
        prog="villagestress",
        description="Village spatial stress indices and typology pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("indices", parents=[common], help="compute the four indices per village")
    sub.add_parser("correlate", parents=[common], help="correlation matrix and VIF")
    sub.add_parser("lda", parents=[common], help="discriminant evaluation of admin labels")
    sub.add_parser("cluster", parents=[common], help="Mahalanobis UPGMA clustering and k scan")
    p = sub.add_parser("compare", parents=[common], help="ANOVA under two labelings")
    p.add_argument("--a", required=True, help="'admin' or a village_id,cluster CSV")
    p.add_argument("--b", required=True, help="'admin' or a village_id,cluster CSV")
    sub.add_parser("pipeline", parents=[common], help="run every stage and write a report")
    sub.add_parser("audit", parents=[common],
                   help="recompute ANOVA tables of a pipeline output folder")
    return parser


COMMANDS = {
    "indices": run_indices,
    "correlate": run_correlate,
    "lda": run_lda,
    "cluster": run_cluster,
    "compare": run_compare,
    "pipeline": run_pipeline,
    "audit": run_audit,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = COMMANDS[args.command](args)
    except VillageStressError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
