"""Gridded terrain layers: ASCII grid I/O, slope, daily insolation, zonal fractions."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._backend import kernels
from .errors import GridParseError, InputError

HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")
_HEADER_NAMES = {
    "ncols": "ncols",
    "nrows": "nrows",
    "xllcorner": "xllcorner",
    "yllcorner": "yllcorner",
    "cellsize": "cellsize",
    "nodata_value": "NODATA_value",
}
DERIVED_NODATA = -9999.0


@dataclass(frozen=True, eq=False)
class RasterGrid:
    """Rectangular grid; ``cells[0]`` is the northernmost row."""

    ncols: int
    nrows: int
    cellsize: float
    origin_x: float
    origin_y: float
    nodata: float
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.float64)
        if self.ncols < 1 or self.nrows < 1:
            raise InputError(f"grid must be at least 1x1, got {self.nrows}x{self.ncols}")
        if not self.cellsize > 0:
            raise InputError(f"cellsize must be positive, got {self.cellsize}")
        if cells.size != self.ncols * self.nrows:
            raise InputError(
                f"grid holds {cells.size} cells, header says {self.nrows}x{self.ncols}"
            )
        object.__setattr__(self, "cells", cells.reshape(self.nrows, self.ncols))

    @classmethod
    def from_array(cls, values, cellsize=10.0, origin_x=0.0, origin_y=0.0,
                   nodata=DERIVED_NODATA) -> "RasterGrid":
        """Wrap a 2-d array; NaNs become the ``nodata`` sentinel."""
        arr = np.array(values, dtype=np.float64, ndmin=2)
        arr[np.isnan(arr)] = nodata
        nrows, ncols = arr.shape
        return cls(ncols, nrows, float(cellsize), float(origin_x), float(origin_y),
                   float(nodata), arr)

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def valid(self) -> np.ndarray:
        return self.cells != self.nodata

    def masked(self) -> np.ndarray:
        """Cell values as floats with nodata replaced by NaN."""
        out = self.cells.copy()
        out[~self.valid] = np.nan
        return out

    def derive(self, values) -> "RasterGrid":
        """A layer on the same frame; NaN cells become nodata."""
        sentinel = self.nodata if self.nodata < 0 else DERIVED_NODATA
        return RasterGrid.from_array(values, self.cellsize, self.origin_x,
                                     self.origin_y, sentinel)


@dataclass(frozen=True, eq=False)
class ZoneMask:
    village_id: str
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != 2:
            raise InputError("zone mask must be two-dimensional")
        if not m.any():
            raise InputError(f"zone mask for {self.village_id!r} has no cells")
        object.__setattr__(self, "mask", m)

    @classmethod
    def from_grid(cls, village_id, grid: RasterGrid) -> "ZoneMask":
        """Read a 0/1 grid; nodata cells count as outside the zone."""
        valid = grid.valid
        vals = grid.cells[valid]
        if not np.isin(vals, (0.0, 1.0)).all():
            raise InputError(f"zone mask for {village_id!r} must contain only 0 and 1")
        return cls(str(village_id), valid & (grid.cells == 1.0))


@dataclass(frozen=True)
class SolarParams:
    """Clear-sky insolation settings.

    ``direct_normal_irradiance`` is the clear-sky irradiance scale in
    kJ m-2 h-1; a share ``diffuse_fraction`` of it is treated as isotropic
    sky radiation and the rest as beam.
    """

    latitude: float = 35.5
    day_of_year: int = 172
    direct_normal_irradiance: float = 3200.0
    diffuse_fraction: float = 0.3
    horizon_directions: int = 32
    time_step: float = 0.5

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise InputError(f"latitude out of range [-90, 90]: {self.latitude}")
        if not 1 <= self.day_of_year <= 366 or int(self.day_of_year) != self.day_of_year:
            raise InputError(f"day_of_year out of range [1, 366]: {self.day_of_year}")
        if not 0.0 <= self.diffuse_fraction <= 1.0:
            raise InputError(f"diffuse_fraction outside [0, 1]: {self.diffuse_fraction}")
        if self.horizon_directions < 8:
            raise InputError("horizon_directions must be at least 8")
        if not self.time_step > 0:
            raise InputError("time_step must be positive")
        if self.direct_normal_irradiance < 0:
            raise InputError("direct_normal_irradiance must be non-negative")


# -- ASCII grid I/O ------------------------------------------------------------

_TOKEN = re.compile(r"\S+")


def parse_ascii_grid(text: str) -> RasterGrid:
    """Parse an ESRI ASCII grid from a string.

    Raises
    ------
    GridParseError
        On a missing header field, a non-numeric token or a cell count that
        does not match ``ncols * nrows``.
    """
    header = {}
    values = []
    lines = text.splitlines()
    in_header = True
    last_line = 0
    for lineno, line in enumerate(lines, start=1):
        tokens = list(_TOKEN.finditer(line))
        if not tokens:
            continue
        first = tokens[0].group()
        if in_header and first[0].isalpha():
            key = first.lower()
            if key not in _HEADER_NAMES:
                raise GridParseError(f"unknown header field {first!r}", lineno, 1)
            if len(tokens) != 2:
                raise GridParseError(f"header field {first!r} needs one value", lineno)
            try:
                header[key] = float(tokens[1].group())
            except ValueError:
                raise GridParseError(
                    f"non-numeric header value {tokens[1].group()!r}",
                    lineno, tokens[1].start() + 1,
                ) from None
            continue
        if in_header:
            for key in HEADER_KEYS:
                if key not in header:
                    raise GridParseError(f"missing header field: {_HEADER_NAMES[key]}")
            in_header = False
        for m in tokens:
            try:
                values.append(float(m.group()))
            except ValueError:
                raise GridParseError(
                    f"non-numeric token {m.group()!r}", lineno, m.start() + 1
                ) from None
        last_line = lineno
    if in_header:
        for key in HEADER_KEYS:
            if key not in header:
                raise GridParseError(f"missing header field: {_HEADER_NAMES[key]}")
    ncols, nrows = header["ncols"], header["nrows"]
    if ncols != int(ncols) or nrows != int(nrows) or ncols < 1 or nrows < 1:
        raise GridParseError(f"ncols/nrows must be positive integers, got {ncols}/{nrows}")
    expected = int(ncols) * int(nrows)
    if len(values) != expected:
        raise GridParseError(
            f"cell count mismatch: expected {expected}, found {len(values)}",
            last_line or None,
        )
    try:
        return RasterGrid(int(ncols), int(nrows), header["cellsize"], header["xllcorner"],
                          header["yllcorner"], header["nodata_value"], np.array(values))
    except InputError as exc:
        raise GridParseError(str(exc)) from None


def read_ascii_grid(path) -> RasterGrid:
    path = Path(path)
    try:
        return parse_ascii_grid(path.read_text())
    except GridParseError as exc:
        raise GridParseError(f"{path}: {exc}") from None


def format_ascii_grid(grid: RasterGrid) -> str:
    lines = [
        f"ncols {grid.ncols}",
        f"nrows {grid.nrows}",
        f"xllcorner {grid.origin_x!r}",
        f"yllcorner {grid.origin_y!r}",
        f"cellsize {grid.cellsize!r}",
        f"NODATA_value {grid.nodata!r}",
    ]
    for row in grid.cells:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_ascii_grid(grid: RasterGrid, path) -> None:
    Path(path).write_text(format_ascii_grid(grid))


# -- terrain -------------------------------------------------------------------

def slope_degrees(dem: RasterGrid) -> RasterGrid:
    """Slope in degrees from a 3x3 Horn kernel with edge replication."""
    dzdx, dzdy = kernels.horn_gradient(dem.masked(), dem.cellsize)
    slope = np.degrees(np.arctan(np.hypot(dzdx, dzdy)))
    return dem.derive(slope)


def _ray_offsets(nrows, ncols, ndirs):
    nsteps = int(math.ceil(math.hypot(nrows, ncols))) + 1
    theta = 2.0 * np.pi * np.arange(ndirs) / ndirs
    steps = np.arange(1, nsteps + 1, dtype=np.float64)
    east = np.outer(np.sin(theta), steps)
    north = np.outer(np.cos(theta), steps)
    off_j = np.floor(east + 0.5).astype(np.int64)
    off_i = np.floor(-north + 0.5).astype(np.int64)
    dist = np.hypot(off_i, off_j).astype(np.float64)
    # rounding can repeat the origin for the first step of oblique rays
    dist[dist == 0.0] = np.inf
    return off_i, off_j, dist


def horizon_tangents(dem: RasterGrid, ndirs: int) -> np.ndarray:
    """Tangent of the horizon elevation angle per direction, clipped at 0.

    Directions are ``2*pi*k/ndirs`` clockwise from north.  Rays sample the
    nearest cell at unit-cell spacing until they leave the grid.
    """
    off_i, off_j, dist = _ray_offsets(dem.nrows, dem.ncols, ndirs)
    return kernels.horizon_tangents(dem.masked(), dem.cellsize, off_i, off_j, dist)


def sun_path(params: SolarParams):
    """Sun unit vectors (east, north, up) and step durations over one day.

    Only time steps with the sun above the astronomical horizon are kept.
    """
    n = int(math.ceil(24.0 / params.time_step - 1e-9))
    starts = np.arange(n) * params.time_step
    ends = np.minimum(starts + params.time_step, 24.0)
    hours = ends - starts
    mid = 0.5 * (starts + ends)
    decl = math.radians(23.45) * math.sin(2.0 * math.pi * (284 + params.day_of_year) / 365.0)
    lat = math.radians(params.latitude)
    omega = np.radians(15.0 * (mid - 12.0))
    east = -math.cos(decl) * np.sin(omega)
    north = math.sin(decl) * math.cos(lat) - math.cos(decl) * math.sin(lat) * np.cos(omega)
    up = math.sin(decl) * math.sin(lat) + math.cos(decl) * math.cos(lat) * np.cos(omega)
    keep = up > 0.0
    return east[keep], north[keep], up[keep], hours[keep]


def daily_insolation(dem: RasterGrid, params: SolarParams = SolarParams(),
                     tangents=None) -> RasterGrid:
    """Clear-sky daily insolation in kJ m-2 day-1.

    Beam radiation reaches a cell when the sun is above the cell's horizon
    in the nearest sampled direction and in front of the tilted surface.
    Diffuse radiation scales with the sky-view fraction
    ``(1 + cos(slope)) / 2 * mean(cos^2(horizon))``.

    Parameters
    ----------
    tangents : ndarray, optional
        Precomputed horizon tangents ``(horizon_directions, nrows, ncols)``;
        computed from ``dem`` when omitted.
    """
    ndirs = params.horizon_directions
    if tangents is None:
        tangents = horizon_tangents(dem, ndirs)
    tangents = np.asarray(tangents, dtype=np.float64)
    if tangents.shape != (ndirs,) + dem.shape:
        raise InputError(f"horizon tangents must have shape {(ndirs,) + dem.shape}")

    dzdx, dzdy = kernels.horn_gradient(dem.masked(), dem.cellsize)
    norm = np.sqrt(1.0 + dzdx * dzdx + dzdy * dzdy)
    nx, ny, nz = -dzdx / norm, -dzdy / norm, 1.0 / norm
    svf = 0.5 * (1.0 + nz) * np.mean(1.0 / (1.0 + tangents * tangents), axis=0)

    east, north, up, hours = sun_path(params)
    horiz = np.hypot(east, north)
    sun_tan = np.where(horiz > 0.0, up / np.where(horiz > 0.0, horiz, 1.0), np.inf)
    azimuth = np.mod(np.arctan2(east, north), 2.0 * np.pi)
    sun_bin = np.mod(np.floor(azimuth / (2.0 * np.pi / ndirs) + 0.5), ndirs).astype(np.int64)
    irr = params.direct_normal_irradiance * hours
    beam = (1.0 - params.diffuse_fraction) * irr
    diffuse = params.diffuse_fraction * irr * up

    total = kernels.insolation_sum(nx, ny, nz, svf, tangents, east, north, up,
                                   sun_tan, sun_bin, beam, diffuse)
    return dem.derive(total)


def zone_fraction_above(grid: RasterGrid, mask: ZoneMask, threshold: float) -> float:
    """Share of valid zone cells strictly above ``threshold``."""
    if mask.mask.shape != grid.shape:
        raise InputError(
            f"zone mask {mask.mask.shape} does not match grid {grid.shape}"
        )
    cells = mask.mask & grid.valid
    total = int(cells.sum())
    if total == 0:
        raise InputError(f"empty zone: {mask.village_id}")
    above = int((grid.cells[cells] > threshold).sum())
    return above / total
