"""End-to-end orchestration behind the command line."""
from __future__ import annotations

import configparser
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import tables
from .classify import (StressMatrix, align_labels, cluster_villages, cross_tab,
                       lda_classify, lda_fit, scan_k)
from .errors import InputError
from .indices import (AII_HIGH, SLOPE_THRESHOLD, SREI_THRESHOLD, WI_WEIGHTS, VillageIndices,
                      assemble_stress_table, compute_aii, compute_sgi, compute_srei,
                      compute_wi, high_intensity_share)
from .raster import SolarParams, ZoneMask, daily_insolation, read_ascii_grid, slope_degrees
from .stats import (AnovaResult, SummaryGroup, anova_oneway, correlation_report,
                    pooled_mean_difference_ci, significance_stars)

ANOVA_HEADER = ["indicator", "group", "n", "mean", "sd", "f", "p", "stars", "ci_low", "ci_high"]


@dataclass(frozen=True)
class PipelineConfig:
    villages: Path | None = None
    surfaces: Path | None = None
    crops: Path | None = None
    manifest: Path | None = None
    reference_clusters: Path | None = None
    slope_threshold: float = SLOPE_THRESHOLD
    srei_threshold: float = SREI_THRESHOLD
    wi_weights: tuple = WI_WEIGHTS
    solar: SolarParams = field(default_factory=SolarParams)
    k_range: tuple = (2, 16)
    chosen_k: int = 4
    out: Path | None = None

    def __post_init__(self):
        if not self.slope_threshold > 0 or not self.srei_threshold > 0:
            raise InputError("thresholds must be positive")
        if len(self.wi_weights) != 3 or not all(0.3 <= w <= 1.0 for w in self.wi_weights):
            raise InputError("wi_weights must be three values within [0.3, 1.0]")
        kmin, kmax = self.k_range
        if kmin < 2 or kmax < kmin:
            raise InputError(f"invalid k_range {kmin}..{kmax}")
        if self.chosen_k < 2:
            raise InputError("k must be at least 2")

    def echo(self) -> dict:
        """Settings for the report; the output folder is left out so reruns
        elsewhere stay byte-identical."""
        out = {}
        for key, value in asdict(self).items():
            if key == "out":
                continue
            if isinstance(value, Path):
                value = value.as_posix()
            elif isinstance(value, tuple):
                value = list(value)
            out[key] = value
        return out


def parse_k_range(text: str) -> tuple:
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", str(text))
    if not m:
        raise InputError(f"k range must look like 'a..b', got {text!r}")
    return int(m.group(1)), int(m.group(2))


def load_config(path=None, **overrides) -> PipelineConfig:
    """Read an INI config; keyword overrides (CLI flags) win over the file.

    Sections: ``[inputs]`` (villages, surfaces, crops, manifest,
    reference_clusters), ``[indices]`` (slope_threshold, srei_threshold,
    wi_weights), ``[solar]`` (SolarParams fields), ``[cluster]`` (k_range, k)
    and ``[output]`` (out).  Relative paths resolve against the file.
    """
    values = {}
    solar = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise InputError(f"config file not found: {path}")
        cp = configparser.ConfigParser()
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise InputError(f"{path}: {exc}") from None
        base = path.parent
        known = {"inputs", "indices", "solar", "cluster", "output"}
        unknown = set(cp.sections()) - known
        if unknown:
            raise InputError(f"{path}: unknown section(s) {sorted(unknown)}")
        try:
            if cp.has_section("inputs"):
                for key, val in cp.items("inputs"):
                    if key not in ("villages", "surfaces", "crops", "manifest",
                                   "reference_clusters"):
                        raise InputError(f"{path}: unknown input {key!r}")
                    values[key] = base / val
            if cp.has_section("indices"):
                for key, val in cp.items("indices"):
                    if key == "wi_weights":
                        values[key] = tuple(float(v) for v in val.split(","))
                    elif key in ("slope_threshold", "srei_threshold"):
                        values[key] = float(val)
                    else:
                        raise InputError(f"{path}: unknown option {key!r} in [indices]")
            if cp.has_section("solar"):
                for key, val in cp.items("solar"):
                    if key not in SolarParams.__dataclass_fields__:
                        raise InputError(f"{path}: unknown option {key!r} in [solar]")
                    kind = int if key in ("day_of_year", "horizon_directions") else float
                    solar[key] = kind(val)
            if cp.has_section("cluster"):
                for key, val in cp.items("cluster"):
                    if key == "k_range":
                        values["k_range"] = parse_k_range(val)
                    elif key == "k":
                        values["chosen_k"] = int(val)
                    else:
                        raise InputError(f"{path}: unknown option {key!r} in [cluster]")
            if cp.has_section("output") and cp.has_option("output", "out"):
                values["out"] = base / cp.get("output", "out")
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None
    for key, val in overrides.items():
        if val is None:
            continue
        if key in ("villages", "surfaces", "crops", "manifest", "reference_clusters", "out"):
            val = Path(val)
        values[key] = val
    values["solar"] = SolarParams(**solar)
    return PipelineConfig(**values)


# -- stage 1 -------------------------------------------------------------------

def _raster_layers(config, manifest):
    slopes = {}
    insolation = {}

    def layers(dem_path):
        key = Path(dem_path).resolve()
        if key not in slopes:
            dem = read_ascii_grid(dem_path)
            slopes[key] = slope_degrees(dem)
            insolation[key] = daily_insolation(dem, config.solar)
        return slopes[key], insolation[key]

    return layers


def cmd_indices(config: PipelineConfig) -> list:
    """Village records with all four indices, ordered by id.

    Precomputed values in the villages table win; the rest come from rasters
    (SGI, SREI), surface shares (WI) and crop systems (AII).
    """
    if config.villages is None:
        raise InputError("a villages table is required")
    rows = tables.read_villages(config.villages)
    surfaces = tables.read_surfaces(config.surfaces) if config.surfaces else {}
    crops = tables.read_crops(config.crops) if config.crops else {}
    manifest = tables.read_manifest(config.manifest) if config.manifest else {}
    layers = _raster_layers(config, manifest)
    records = []
    for row in sorted(rows, key=lambda r: r["id"]):
        vid = row["id"]
        sgi, srei, wi, aii = row["sgi"], row["srei"], row["wi"], row["aii"]
        if sgi is None or srei is None:
            if vid not in manifest:
                missing = "SGI" if sgi is None else "SREI"
                raise InputError(f"{missing} inputs missing: {vid}")
            dem_path, mask_path = manifest[vid]
            slope, sun = layers(dem_path)
            mask = ZoneMask.from_grid(vid, read_ascii_grid(mask_path))
            if sgi is None:
                sgi = compute_sgi(slope, mask, config.slope_threshold)
            if srei is None:
                srei = compute_srei(sun, mask, config.srei_threshold)
        if wi is None:
            if vid not in surfaces:
                raise InputError(f"WI inputs missing: {vid}")
            wi = compute_wi(surfaces[vid], config.wi_weights)
        if aii is None:
            if vid not in crops:
                raise InputError(f"AII inputs missing: {vid}")
            aii = compute_aii(crops[vid])
        records.append(VillageIndices(vid, row["name"], row["admin_category"],
                                      sgi, srei, wi, aii))
    return records


def indices_csv(records) -> str:
    return tables.to_csv(
        ["id", "name", "admin_category", "sgi", "srei", "wi", "aii"],
        [(r.village_id, r.name, r.admin_category, r.sgi, r.srei, r.wi, r.aii)
         for r in records],
    )


# -- stage 2 -------------------------------------------------------------------

@dataclass(frozen=True)
class AnovaRow:
    indicator: str
    groups: tuple
    result: AnovaResult
    ci: tuple | None = None


def anova_panel(matrix: StressMatrix, labels) -> list:
    """One ANOVA per indicator across the groups of ``labels``."""
    labels = list(labels)
    if len(labels) != matrix.n:
        raise InputError("labels do not cover every village")
    names = sorted(set(labels), key=_label_key)
    if len(names) < 2:
        raise InputError("ANOVA needs at least two non-empty groups")
    out = []
    for j, ind in enumerate(matrix.columns):
        samples = [matrix.data[[i for i, l in enumerate(labels) if l == g], j] for g in names]
        groups = tuple(SummaryGroup.from_sample(str(g), s) for g, s in zip(names, samples))
        result = anova_oneway(samples)
        ci = pooled_mean_difference_ci(*groups) if len(groups) == 2 else None
        out.append(AnovaRow(ind, groups, result, ci))
    return out


def _label_key(label):
    s = str(label)
    return (0, int(s), s) if s.isdigit() else (1, 0, s)


def anova_csv(panel) -> str:
    rows = []
    for row in panel:
        lo, hi = row.ci if row.ci else (None, None)
        for g in row.groups:
            rows.append((row.indicator, g.label, g.n, g.mean, g.sd, row.result.f,
                         row.result.p, row.result.stars, lo, hi))
    return tables.to_csv(ANOVA_HEADER, rows)


def comparison_csv(panel_a, panel_b, name_a="a", name_b="b") -> str:
    header = ["indicator", f"f_{name_a}", f"p_{name_a}", f"stars_{name_a}",
              f"f_{name_b}", f"p_{name_b}", f"stars_{name_b}"]
    rows = [(a.indicator, a.result.f, a.result.p, a.result.stars,
             b.result.f, b.result.p, b.result.stars) for a, b in zip(panel_a, panel_b)]
    return tables.to_csv(header, rows)


def _matrix_from_records(records) -> StressMatrix:
    return assemble_stress_table(records)


def _aligned_assignment(config, matrix, assignment):
    labels = assignment.labels
    if config.reference_clusters is None:
        return labels
    ref = tables.read_assignment(config.reference_clusters)
    missing = [v for v in matrix.row_ids if v not in ref]
    if missing:
        raise InputError(f"reference clusters missing village(s): {', '.join(missing)}")
    try:
        ref_labels = [int(ref[v]) for v in matrix.row_ids]
    except ValueError:
        raise InputError("reference cluster labels must be integers") from None
    return align_labels(ref_labels, labels)


def run_pipeline(config: PipelineConfig) -> tuple:
    """Compute every stage; returns ``(files, report)`` without touching disk.

    ``files`` maps output file names to their text.
    """
    records = cmd_indices(config)
    matrix = _matrix_from_records(records)
    kmin, kmax = config.k_range
    if kmax > matrix.n - 1:
        raise InputError(f"k_range exceeds n-1 (k_range {kmin}..{kmax}, n={matrix.n})")
    if not kmin <= config.chosen_k <= kmax:
        raise InputError(f"k={config.chosen_k} outside k_range {kmin}..{kmax}")

    corr = correlation_report(matrix)
    model = lda_fit(matrix)
    evaluation = lda_classify(model)
    clustering = cluster_villages(matrix)
    validity = scan_k(matrix, kmin, kmax, clustering)
    assignment = clustering.cut(config.chosen_k)
    clusters = _aligned_assignment(config, matrix, assignment)
    admin_panel = anova_panel(matrix, matrix.admin_labels)
    spatial_panel = anova_panel(matrix, clusters)
    table = cross_tab(matrix.admin_labels, clusters)

    files = {}
    files["indices.csv"] = indices_csv(records)
    files.update(correlation_files(corr))
    files.update(lda_files(model, evaluation))
    files.update(cluster_files(matrix, clustering, validity, clusters))
    files["anova_admin.csv"] = anova_csv(admin_panel)
    files["anova_spatial.csv"] = anova_csv(spatial_panel)
    files["comparison.csv"] = comparison_csv(admin_panel, spatial_panel, "admin", "spatial")
    files["crosstab.csv"] = crosstab_csv(table)

    report = {
        "villages": [
            {"id": r.village_id, "name": r.name, "admin_category": r.admin_category,
             "sgi": r.sgi, "srei": r.srei, "wi": r.wi, "aii": r.aii,
             "cluster": c}
            for r, c in zip(records, clusters)
        ],
        "aii_high_share": {"cutoff": AII_HIGH,
                           "share": high_intensity_share(matrix.column("AII"))},
        "correlation": {
            "columns": list(corr.columns),
            "r": corr.r_matrix.tolist(),
            "p": corr.p_matrix.tolist(),
            "vif": [_json_num(v) for v in corr.vif],
            "flagged": [list(p) for p in corr.flagged],
        },
        "discriminant": {
            "coefficients": dict(zip(model.columns, model.coefficients.tolist())),
            "offset": model.offset,
            "classes": [asdict(c) | {"accuracy": c.accuracy} for c in evaluation.classes],
            "correct": evaluation.correct,
            "total": evaluation.total,
            "accuracy": evaluation.accuracy,
        },
        "validity": {
            "rows": [asdict(r) for r in validity.rows],
            "best_silhouette_k": validity.best_k("silhouette"),
            "best_calinski_harabasz_k": validity.best_k("calinski_harabasz"),
        },
        "chosen_k": config.chosen_k,
        "anova": {
            "administrative": [_panel_json(p) for p in admin_panel],
            "spatial": [_panel_json(p) for p in spatial_panel],
        },
        "crosstab": {
            "rows": list(table.row_labels),
            "columns": [int(c) for c in table.col_labels],
            "counts": table.counts.tolist(),
        },
        "provenance": {
            "config": config.echo(),
            "inputs": {
                name: tables.digest(p)
                for name, p in (("villages", config.villages), ("surfaces", config.surfaces),
                                ("crops", config.crops), ("manifest", config.manifest),
                                ("reference_clusters", config.reference_clusters))
                if p is not None
            },
        },
    }
    files["report.json"] = json.dumps(report, indent=2, sort_keys=True) + "\n"
    return files, report


def _json_num(v):
    v = float(v)
    if np.isinf(v):
        return "inf"
    return v


def _panel_json(row: AnovaRow) -> dict:
    return {
        "indicator": row.indicator,
        "groups": [asdict(g) for g in row.groups],
        "f": _json_num(row.result.f),
        "df_between": row.result.df_between,
        "df_within": row.result.df_within,
        "p": row.result.p,
        "stars": row.result.stars,
        "ci": list(row.ci) if row.ci else None,
    }


def correlation_files(corr) -> dict:
    cols = list(corr.columns)
    return {
        "correlation_matrix.csv": tables.to_csv(
            [""] + cols, [[c] + list(corr.r_matrix[i]) for i, c in enumerate(cols)]),
        "correlation_pairs.csv": tables.to_csv(
            ["a", "b", "r", "p", "stars", "flagged"],
            [(a, b, r, p, significance_stars(p), int(flag))
             for a, b, r, p, flag in corr.pairs()]),
        "vif.csv": tables.to_csv(["indicator", "vif"], list(zip(cols, corr.vif))),
    }


def lda_files(model, evaluation) -> dict:
    table_rows = [
        (c.label, c.count, c.mean, c.sd, c.minimum, c.maximum, c.correct, c.accuracy)
        for c in evaluation.classes
    ]
    table_rows.append(("Total", evaluation.total, None, None, None, None,
                       evaluation.correct, evaluation.accuracy))
    return {
        "lda_table.csv": tables.to_csv(
            ["category", "count", "ld1_mean", "ld1_sd", "ld1_min", "ld1_max", "correct",
             "accuracy"], table_rows),
        "lda_scores.csv": tables.to_csv(
            ["village_id", "admin_category", "ld1", "predicted"],
            [(v, t, s, p) for v, t, s, p in zip(model.row_ids, model.labels,
                                                 model.scores, evaluation.predicted)]),
        "lda_coefficients.csv": tables.to_csv(
            ["term", "coefficient"],
            list(zip(model.columns, model.coefficients)) + [("(offset)", model.offset)]),
    }


def cluster_files(matrix, clustering, validity, clusters) -> dict:
    return {
        "validity.csv": tables.to_csv(
            ["k", "silhouette", "calinski_harabasz"],
            [(r.k, r.silhouette, r.calinski_harabasz) for r in validity.rows]),
        "linkage.csv": tables.to_csv(
            ["node_a", "node_b", "height", "new_id"],
            [(m.node_a, m.node_b, m.height, m.new_id) for m in clustering.tree.merges]),
        "assignment.csv": tables.to_csv(
            ["village_id", "cluster"], list(zip(matrix.row_ids, clusters))),
    }


def crosstab_csv(table) -> str:
    cols = [str(c) for c in table.col_labels]
    rows = [[r] + list(map(int, table.counts[i])) + [int(table.row_totals[i])]
            for i, r in enumerate(table.row_labels)]
    rows.append(["total"] + list(map(int, table.col_totals)) + [int(table.counts.sum())])
    return tables.to_csv(["admin"] + cols + ["total"], rows)


def load_labels(config, matrix, spec) -> list:
    """Labels for ``compare``: ``admin`` or a village_id,cluster CSV."""
    if str(spec) == "admin":
        return list(matrix.admin_labels)
    ref = tables.read_assignment(spec)
    if set(ref) != set(matrix.row_ids):
        extra = sorted(set(ref) ^ set(matrix.row_ids))
        raise InputError(f"village ids in {spec} do not match the villages table: {extra}")
    return [ref[v] for v in matrix.row_ids]


def cmd_compare(config: PipelineConfig, labels_a, labels_b) -> str:
    matrix = _matrix_from_records(cmd_indices(config))
    a = anova_panel(matrix, load_labels(config, matrix, labels_a))
    b = anova_panel(matrix, load_labels(config, matrix, labels_b))
    return comparison_csv(a, b)


def write_outputs(out_dir, files: dict) -> None:
    """Write all files or none."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for name in sorted(files):
            target = out_dir / name
            tmp = target.with_name(target.name + ".part")
            tmp.write_text(files[name])
            written.append(tmp)
        for tmp in written:
            tmp.replace(tmp.with_name(tmp.name[: -len(".part")]))
    except OSError:
        for tmp in written:
            tmp.unlink(missing_ok=True)
        raise


def audit(out_dir) -> list:
    """Recompute the ANOVA tables from the emitted village CSVs.

    Returns a list of mismatch descriptions (empty when consistent).
    """
    out_dir = Path(out_dir)
    for name in ("indices.csv", "assignment.csv", "anova_admin.csv", "anova_spatial.csv"):
        if not (out_dir / name).is_file():
            raise InputError(f"audit: {out_dir / name} not found")
    rows = tables.read_villages(out_dir / "indices.csv")
    records = [VillageIndices(r["id"], r["name"], r["admin_category"],
                              r["sgi"], r["srei"], r["wi"], r["aii"]) for r in rows]
    matrix = _matrix_from_records(records)
    clusters = tables.read_assignment(out_dir / "assignment.csv")
    expected = {
        "anova_admin.csv": anova_csv(anova_panel(matrix, matrix.admin_labels)),
        "anova_spatial.csv": anova_csv(
            anova_panel(matrix, [clusters[v] for v in matrix.row_ids])),
    }
    problems = []
    for name, text in expected.items():
        problems.extend(_compare_tables(name, text, (out_dir / name).read_text()))
    return problems


def _compare_tables(name, expected, actual, rtol=1e-9) -> list:
    exp = [line.split(",") for line in expected.strip().splitlines()]
    act = [line.split(",") for line in actual.strip().splitlines()]
    if len(exp) != len(act):
        return [f"{name}: expected {len(exp)} lines, found {len(act)}"]
    problems = []
    for lineno, (e_row, a_row) in enumerate(zip(exp, act), start=1):
        if len(e_row) != len(a_row):
            problems.append(f"{name}:{lineno}: column count differs")
            continue
        for col, (e, a) in enumerate(zip(e_row, a_row)):
            if e == a:
                continue
            try:
                fe, fa = float(e), float(a)
            except ValueError:
                problems.append(f"{name}:{lineno}:{col + 1}: {a!r} != {e!r}")
                continue
            if not np.isclose(fa, fe, rtol=rtol, atol=1e-12):
                problems.append(f"{name}:{lineno}:{col + 1}: {a} != recomputed {e}")
    return problems
