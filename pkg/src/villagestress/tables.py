"""CSV inputs and outputs."""
from __future__ import annotations

import csv
import hashlib
import io
import math
from pathlib import Path

from .errors import InputError
from .indices import CropSystem, SurfaceComposition


def _read_rows(path, required):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in (reader.fieldnames or [])]
        missing = [c for c in required if c not in fields]
        if missing:
            raise InputError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            row = {k.strip(): (v or "").strip() for k, v in raw.items() if k is not None}
            if not any(row.values()):
                continue
            rows.append((lineno, row))
    return path, rows


def _number(path, lineno, column, text, optional=False):
    if text == "":
        if optional:
            return None
        raise InputError(f"{path}:{lineno}: empty value in column {column!r}")
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"{path}:{lineno}: non-numeric {column!r} value {text!r}") from None
    if not math.isfinite(value):
        raise InputError(f"{path}:{lineno}: non-finite {column!r} value {text!r}")
    return value


def read_villages(path) -> list:
    """Rows of ``id, name, admin_category`` plus optional precomputed indices."""
    path, rows = _read_rows(path, ("id", "name", "admin_category"))
    out = []
    seen = set()
    for lineno, row in rows:
        vid = row["id"]
        if not vid:
            raise InputError(f"{path}:{lineno}: empty village id")
        if vid in seen:
            raise InputError(f"{path}:{lineno}: duplicate village id {vid!r}")
        seen.add(vid)
        rec = {"id": vid, "name": row["name"], "admin_category": row["admin_category"]}
        for key in ("sgi", "srei", "wi", "aii"):
            rec[key] = _number(path, lineno, key, row.get(key, ""), optional=True)
        out.append(rec)
    if not out:
        raise InputError(f"{path}: no villages")
    return out


def read_surfaces(path) -> dict:
    path, rows = _read_rows(path, ("id", "paved_share", "hardened_share", "rough_share"))
    out = {}
    for lineno, row in rows:
        if row["id"] in out:
            raise InputError(f"{path}:{lineno}: duplicate village id {row['id']!r}")
        try:
            out[row["id"]] = SurfaceComposition(
                *(_number(path, lineno, k, row[k])
                  for k in ("paved_share", "hardened_share", "rough_share"))
            )
        except InputError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
    return out


def read_crops(path) -> dict:
    """Long-format crop table: one row per (village, crop)."""
    path, rows = _read_rows(
        path, ("id", "weight", "area_share", "temporal_concentration", "labor_share")
    )
    grouped = {}
    for lineno, row in rows:
        g = grouped.setdefault(row["id"], {"crops": [], "factors": None, "line": lineno})
        g["crops"].append((_number(path, lineno, "weight", row["weight"]),
                           _number(path, lineno, "area_share", row["area_share"])))
        factors = (_number(path, lineno, "temporal_concentration", row["temporal_concentration"]),
                   _number(path, lineno, "labor_share", row["labor_share"]))
        if g["factors"] is None:
            g["factors"] = factors
        elif g["factors"] != factors:
            raise InputError(
                f"{path}:{lineno}: village {row['id']!r} has conflicting "
                "temporal_concentration/labor_share across crop rows"
            )
    out = {}
    for vid, g in grouped.items():
        try:
            out[vid] = CropSystem(tuple(g["crops"]), *g["factors"])
        except InputError as exc:
            raise InputError(f"{path}:{g['line']}: {vid}: {exc}") from None
    return out


def read_manifest(path) -> dict:
    """``id -> (dem_path, mask_path)``, resolved against the manifest folder."""
    path, rows = _read_rows(path, ("id", "dem", "mask"))
    base = path.parent
    out = {}
    for lineno, row in rows:
        if row["id"] in out:
            raise InputError(f"{path}:{lineno}: duplicate village id {row['id']!r}")
        out[row["id"]] = (base / row["dem"], base / row["mask"])
    return out


def read_assignment(path) -> dict:
    """``village_id -> label``; labels stay strings."""
    path, rows = _read_rows(path, ("village_id", "cluster"))
    out = {}
    for lineno, row in rows:
        if row["village_id"] in out:
            raise InputError(f"{path}:{lineno}: duplicate village id {row['village_id']!r}")
        if row["cluster"] == "":
            raise InputError(f"{path}:{lineno}: empty cluster label")
        out[row["village_id"]] = row["cluster"]
    if not out:
        raise InputError(f"{path}: no assignments")
    return out


def fmt(value) -> str:
    """Stable text for a CSV/JSON cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, str)):
        return str(value)
    if isinstance(value, int):
        return str(value)
    v = float(value)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
