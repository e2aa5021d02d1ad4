"""The four village stress indices and the township stress table."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .classify import ADMIN_CLASSES, INDICATORS, StressMatrix
from .errors import InputError
from .raster import RasterGrid, ZoneMask, zone_fraction_above

SLOPE_THRESHOLD = 4.8
SREI_THRESHOLD = 20000.0
WI_WEIGHTS = (1.0, 0.6, 0.3)
CROP_WEIGHTS = (1.0, 0.6, 0.3)
AII_HIGH = 0.36
_SUM_TOL = 1e-9


def _check_fraction(name, value):
    if not (0.0 <= value <= 1.0):
        raise InputError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class SurfaceComposition:
    """Shares of path length by surface class."""

    paved_share: float
    hardened_share: float
    rough_share: float

    def __post_init__(self):
        for name in ("paved_share", "hardened_share", "rough_share"):
            _check_fraction(name, getattr(self, name))
        total = self.paved_share + self.hardened_share + self.rough_share
        if abs(total - 1.0) > _SUM_TOL:
            raise InputError(f"surface shares must sum to 1, got {total!r}")


@dataclass(frozen=True)
class CropSystem:
    """Crop mix plus the two labour-pressure factors of the AII.

    ``crop_components`` holds ``(labor_weight, area_share)`` pairs where the
    weight is 1.0 (hand-harvested cash crop), 0.6 (orchard) or 0.3
    (mechanized field crop).
    """

    crop_components: tuple
    temporal_concentration: float
    labor_share: float

    def __post_init__(self):
        comps = tuple((float(w), float(a)) for w, a in self.crop_components)
        if not comps:
            raise InputError("a crop system needs at least one crop")
        for w, a in comps:
            if not any(math.isclose(w, c) for c in CROP_WEIGHTS):
                raise InputError(f"crop labour weight must be one of {CROP_WEIGHTS}, got {w}")
            _check_fraction("area_share", a)
        total = sum(a for _, a in comps)
        if abs(total - 1.0) > _SUM_TOL:
            raise InputError(f"crop area shares must sum to 1, got {total!r}")
        _check_fraction("temporal_concentration", self.temporal_concentration)
        _check_fraction("labor_share", self.labor_share)
        object.__setattr__(self, "crop_components", comps)


@dataclass(frozen=True)
class VillageIndices:
    village_id: str
    name: str
    admin_category: str
    sgi: float
    srei: float
    wi: float
    aii: float

    def __post_init__(self):
        if self.admin_category not in ADMIN_CLASSES:
            raise InputError(
                f"{self.village_id}: admin_category must be one of {ADMIN_CLASSES}, "
                f"got {self.admin_category!r}"
            )
        for name in ("sgi", "srei", "aii"):
            value = getattr(self, name)
            if value is None or not math.isfinite(value) or not 0.0 <= value <= 1.0:
                raise InputError(f"{self.village_id}: {name.upper()} must lie in [0, 1], got {value}")
        if self.wi is None or not math.isfinite(self.wi) or not 0.3 <= self.wi <= 1.0:
            raise InputError(f"{self.village_id}: WI must lie in [0.3, 1], got {self.wi}")

    def values(self) -> tuple:
        return (self.sgi, self.srei, self.wi, self.aii)


def compute_sgi(slope: RasterGrid, mask: ZoneMask, threshold: float = SLOPE_THRESHOLD) -> float:
    """Share of the village steeper than ``threshold`` degrees."""
    return zone_fraction_above(slope, mask, threshold)


def compute_srei(insolation: RasterGrid, mask: ZoneMask,
                 threshold: float = SREI_THRESHOLD) -> float:
    """Share of the village receiving more than ``threshold`` kJ m-2 day-1."""
    return zone_fraction_above(insolation, mask, threshold)


def compute_wi(comp: SurfaceComposition, weights: Sequence[float] = WI_WEIGHTS) -> float:
    paved, hardened, rough = weights
    return comp.paved_share * paved + comp.hardened_share * hardened + comp.rough_share * rough


def compute_aii(crop: CropSystem) -> float:
    """Area-weighted crop labour weight x temporal concentration x labour share."""
    labor = sum(w * a for w, a in crop.crop_components)
    return labor * crop.temporal_concentration * crop.labor_share


def assemble_stress_table(records: Iterable[VillageIndices]) -> StressMatrix:
    """Stack village records into a matrix ordered by village id."""
    records = list(records)
    if len(records) < 2:
        raise InputError("a stress table needs at least two villages")
    seen = set()
    for r in records:
        if r.village_id in seen:
            raise InputError(f"duplicate village_id: {r.village_id}")
        seen.add(r.village_id)
        for name, v in zip(INDICATORS, r.values()):
            if v is None:
                raise InputError(f"missing {name} for village {r.village_id}")
    records.sort(key=lambda r: r.village_id)
    return StressMatrix(
        tuple(r.village_id for r in records),
        np.array([r.values() for r in records], dtype=np.float64),
        tuple(r.admin_category for r in records),
    )


def high_intensity_share(aii_values, cutoff: float = AII_HIGH) -> float:
    """Fraction of villages with AII at or above ``cutoff``."""
    v = np.asarray(aii_values, dtype=np.float64)
    return float((v >= cutoff).mean())
