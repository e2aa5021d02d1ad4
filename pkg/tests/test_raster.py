import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from villagestress import _backend
from villagestress.errors import GridParseError, InputError
from villagestress.raster import (RasterGrid, SolarParams, ZoneMask, daily_insolation,
                                  format_ascii_grid, horizon_tangents, parse_ascii_grid,
                                  read_ascii_grid, slope_degrees, sun_path, write_ascii_grid,
                                  zone_fraction_above)

HEADER = "ncols {c}\nnrows {r}\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n"


def plane(nrows, ncols, gx, gy=0.0, cellsize=10.0, base=100.0):
    """z = gx * x + gy * y with x east, y north (row 0 is north)."""
    x = np.arange(ncols) * cellsize
    y = (nrows - 1 - np.arange(nrows)) * cellsize
    return RasterGrid.from_array(base + gx * x[None, :] + gy * y[:, None], cellsize)


class TestParse:
    def test_constant_grid(self):
        g = parse_ascii_grid(HEADER.format(c=2, r=2) + "5 5\n5 5\n")
        assert g.shape == (2, 2)
        assert g.cells.ravel().tolist() == [5.0, 5.0, 5.0, 5.0]

    def test_nodata_sentinel_preserved(self):
        g = parse_ascii_grid(HEADER.format(c=2, r=2) + "1 -9999\n3 4\n")
        assert g.cells[0, 1] == -9999.0
        assert g.valid.tolist() == [[True, False], [True, True]]
        assert np.isnan(g.masked()[0, 1])

    def test_header_is_case_insensitive(self):
        text = HEADER.format(c=1, r=1).upper() + "7\n"
        assert parse_ascii_grid(text).cells[0, 0] == 7.0

    def test_missing_cellsize(self):
        text = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\nNODATA_value -9999\n1 2\n"
        with pytest.raises(GridParseError, match="missing header field: cellsize"):
            parse_ascii_grid(text)

    def test_non_numeric_token_names_line_and_column(self):
        with pytest.raises(GridParseError) as exc:
            parse_ascii_grid(HEADER.format(c=2, r=2) + "1 2\n3 x4\n")
        assert "non-numeric token" in str(exc.value)
        assert exc.value.line == 8
        assert exc.value.column == 3

    def test_cell_count_mismatch(self):
        with pytest.raises(GridParseError, match="cell count mismatch"):
            parse_ascii_grid(HEADER.format(c=2, r=2) + "1 2 3\n")

    def test_parse_error_is_input_error(self):
        with pytest.raises(InputError):
            parse_ascii_grid("ncols 1\n")

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        g = RasterGrid.from_array(rng.normal(size=(3, 4)), 12.5, 100.0, 200.0)
        path = tmp_path / "g.asc"
        write_ascii_grid(g, path)
        back = read_ascii_grid(path)
        assert np.array_equal(back.cells, g.cells)
        assert format_ascii_grid(back) == format_ascii_grid(g)


class TestSlope:
    def test_flat(self):
        s = slope_degrees(RasterGrid.from_array(np.full((5, 6), 42.0)))
        assert np.all(s.cells == 0.0)

    def test_inclined_plane(self):
        s = slope_degrees(plane(6, 7, 0.1))
        expected = math.degrees(math.atan(0.1))
        assert expected == pytest.approx(5.711, abs=1e-3)
        assert np.abs(s.cells[1:-1, 1:-1] - expected).max() < 1e-9

    def test_plane_just_below_threshold(self):
        s = slope_degrees(plane(5, 5, 0.0839))
        interior = s.cells[1:-1, 1:-1]
        assert np.abs(interior - math.degrees(math.atan(0.0839))).max() < 1e-9
        assert np.all(interior < 4.8)
        assert 4.79 < interior[0, 0] < 4.8

    def test_north_south_plane(self):
        s = slope_degrees(plane(6, 5, 0.0, 0.25))
        assert np.abs(s.cells[1:-1, 1:-1] - math.degrees(math.atan(0.25))).max() < 1e-9

    def test_nodata_propagates_to_neighbours(self):
        z = np.full((5, 5), 10.0)
        z[2, 2] = np.nan
        s = slope_degrees(RasterGrid.from_array(z))
        bad = ~s.valid
        assert bad[1:4, 1:4].all()
        assert bad.sum() == 9

    def test_edges_use_replication(self):
        s = slope_degrees(plane(4, 4, 0.1))
        # replicated columns halve the east-west difference on the border
        assert s.cells[1, 0] == pytest.approx(math.degrees(math.atan(0.05)), abs=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (5, 6), elements=st.floats(-500, 500)),
           st.floats(-1000, 1000))
    def test_range_and_offset_invariance(self, z, c):
        s = slope_degrees(RasterGrid.from_array(z))
        assert np.all(s.cells >= 0.0) and np.all(s.cells < 90.0)
        shifted = slope_degrees(RasterGrid.from_array(z + c))
        assert np.allclose(shifted.cells, s.cells, atol=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (6, 6), elements=st.floats(-200, 200)))
    def test_transpose_keeps_magnitude(self, z):
        s = slope_degrees(RasterGrid.from_array(z))
        t = slope_degrees(RasterGrid.from_array(z.T))
        assert np.allclose(s.cells.T, t.cells, atol=1e-9)


class TestZoneFraction:
    def test_strict_threshold(self):
        g = RasterGrid.from_array([[4.0, 4.8, 5.0]])
        m = ZoneMask("v", np.ones((1, 3), bool))
        assert zone_fraction_above(g, m, 4.8) == pytest.approx(1 / 3)

    def test_all_and_half(self):
        g = RasterGrid.from_array([[6.0, 7.0, 1.0, 9.0]])
        assert zone_fraction_above(g, ZoneMask("v", [[1, 1, 0, 1]]), 4.8) == 1.0
        assert zone_fraction_above(g, ZoneMask("v", [[1, 1, 1, 1]]), 6.5) == 0.5

    def test_nodata_excluded(self):
        g = RasterGrid.from_array([[np.nan, 6.0, 1.0]])
        assert zone_fraction_above(g, ZoneMask("v", [[1, 1, 1]]), 4.8) == 0.5

    def test_empty_zone(self):
        g = RasterGrid.from_array([[np.nan, 6.0]])
        with pytest.raises(InputError, match="empty zone: v7"):
            zone_fraction_above(g, ZoneMask("v7", [[1, 0]]), 4.8)

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            zone_fraction_above(RasterGrid.from_array([[1.0, 2.0]]), ZoneMask("v", [[1]]), 0)

    def test_mask_from_grid(self):
        m = ZoneMask.from_grid("v", RasterGrid.from_array([[0.0, 1.0, np.nan]]))
        assert m.mask.tolist() == [[False, True, False]]
        with pytest.raises(InputError):
            ZoneMask.from_grid("v", RasterGrid.from_array([[0.0, 2.0]]))

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (4, 5), elements=st.floats(0, 30)),
           arrays(np.bool_, (4, 5)), st.floats(0, 30), st.floats(0, 30))
    def test_monotone_and_outside_cells_irrelevant(self, v, mask, t1, t2):
        mask = mask.copy()
        mask[0, 0] = True
        zm = ZoneMask("v", mask)
        lo, hi = sorted((t1, t2))
        g = RasterGrid.from_array(v)
        assert zone_fraction_above(g, zm, lo) >= zone_fraction_above(g, zm, hi)
        scrambled = np.where(mask, v, 99.0 - v)
        assert (zone_fraction_above(RasterGrid.from_array(scrambled), zm, lo)
                == zone_fraction_above(g, zm, lo))


class TestSolarParams:
    @pytest.mark.parametrize("kw", [{"latitude": 91}, {"latitude": -90.5},
                                    {"day_of_year": 0}, {"day_of_year": 367},
                                    {"diffuse_fraction": 1.5}, {"time_step": 0}])
    def test_rejects(self, kw):
        with pytest.raises(InputError):
            SolarParams(**kw)


def flux_oracle(normal, tangents, params):
    """Independent loop over the sun path for a single cell."""
    decl = math.radians(23.45) * math.sin(2 * math.pi * (284 + params.day_of_year) / 365)
    lat = math.radians(params.latitude)
    ndirs = params.horizon_directions
    svf = 0.5 * (1 + normal[2]) * sum(1 / (1 + t * t) for t in tangents) / ndirs
    total = 0.0
    t = 0.0
    while t < 24.0 - 1e-9:
        dt = min(params.time_step, 24.0 - t)
        omega = math.radians(15 * (t + dt / 2 - 12))
        alt = math.asin(math.sin(decl) * math.sin(lat)
                        + math.cos(decl) * math.cos(lat) * math.cos(omega))
        t += dt
        if alt <= 0:
            continue
        east = -math.cos(decl) * math.sin(omega)
        north = math.sin(decl) * math.cos(lat) - math.cos(decl) * math.sin(lat) * math.cos(omega)
        az = math.atan2(east, north) % (2 * math.pi)
        k = int(math.floor(az / (2 * math.pi / ndirs) + 0.5)) % ndirs
        energy = params.direct_normal_irradiance * dt
        cos_inc = normal[0] * east + normal[1] * north + normal[2] * math.sin(alt)
        if math.tan(alt) > tangents[k] and cos_inc > 0:
            total += (1 - params.diffuse_fraction) * energy * cos_inc
        total += params.diffuse_fraction * energy * math.sin(alt) * svf
    return total


class TestInsolation:
    def test_flat_is_uniform(self):
        out = daily_insolation(RasterGrid.from_array(np.full((6, 7), 300.0)))
        assert np.all(out.cells == out.cells[0, 0])
        assert out.cells[0, 0] > 20000.0

    @pytest.mark.parametrize("lat", [0.0, 35.5, -20.0])
    def test_flat_matches_oracle(self, lat):
        params = SolarParams(latitude=lat)
        out = daily_insolation(RasterGrid.from_array(np.zeros((3, 3))), params)
        expected = flux_oracle((0.0, 0.0, 1.0), [0.0] * 32, params)
        assert out.cells[1, 1] == pytest.approx(expected, rel=1e-12)

    def test_tilted_cell_with_given_horizon_matches_oracle(self):
        params = SolarParams(time_step=0.25, horizon_directions=16)
        dem = plane(5, 5, 0.0, 0.2)  # rises to the north, faces south
        rng = np.random.default_rng(11)
        tangents = np.tile(rng.uniform(0, 1.5, size=(16, 1, 1)), (1, 5, 5))
        out = daily_insolation(dem, params, tangents)
        n = np.array([0.0, -0.2, 1.0]) / math.sqrt(1.04)
        expected = flux_oracle(n, tangents[:, 2, 2], params)
        assert out.cells[2, 2] == pytest.approx(expected, rel=1e-12)

    def test_ridge_shades_poleward_cell(self):
        z = np.zeros((5, 5))
        z[3, :] = 200.0  # east-west ridge two rows south of row 1
        params = SolarParams(diffuse_fraction=0.0)
        shaded = daily_insolation(RasterGrid.from_array(z), params).cells[1, 2]
        open_ = daily_insolation(RasterGrid.from_array(np.zeros((5, 5))), params).cells[1, 2]
        assert shaded < open_
        # brute force: march toward the true sun azimuth in fine steps
        expected = 0.0
        east, north, up, hours = sun_path(params)
        for e, nn, u, h in zip(east, north, up, hours):
            horiz = math.hypot(e, nn)
            blocked = False
            for s in np.arange(0.05, 10.0, 0.05):
                i = int(math.floor(1 - nn / horiz * s + 0.5))
                j = int(math.floor(2 + e / horiz * s + 0.5))
                if not (0 <= i < 5 and 0 <= j < 5):
                    break
                if z[i, j] / (s * 10.0) >= u / horiz:
                    blocked = True
                    break
            if not blocked:
                expected += params.direct_normal_irradiance * h * u
        assert shaded == pytest.approx(expected, rel=1e-12)

    def test_polar_night_is_dark(self):
        params = SolarParams(latitude=80.0, day_of_year=355, diffuse_fraction=0.0)
        dem = plane(4, 4, 0.3, 0.1)
        assert np.all(daily_insolation(dem, params).cells == 0.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 31), st.floats(0, 3), st.floats(0, 3))
    def test_monotone_in_horizon(self, k, t1, t2):
        dem = RasterGrid.from_array(np.zeros((1, 1)))
        lo, hi = sorted((t1, t2))
        base = np.full((32, 1, 1), 0.1)
        a, b = base.copy(), base.copy()
        a[k] = lo
        b[k] = hi
        out_a = daily_insolation(dem, SolarParams(), a).cells[0, 0]
        out_b = daily_insolation(dem, SolarParams(), b).cells[0, 0]
        assert out_b <= out_a
        assert out_b >= 0.0

    def test_nodata_stays_nodata(self):
        z = np.zeros((4, 4))
        z[0, 0] = np.nan
        out = daily_insolation(RasterGrid.from_array(z))
        assert not out.valid[0, 0]
        assert out.valid.sum() == 12  # the 3x3 neighbourhood of the hole is lost

    def test_tangent_shape_checked(self):
        with pytest.raises(InputError):
            daily_insolation(RasterGrid.from_array(np.zeros((2, 2))), SolarParams(),
                             np.zeros((8, 2, 2)))


@pytest.mark.skipif(_backend.compiled_kernels is None, reason="compiled kernels not built")
class TestBackendsAgree:
    def test_slope_and_insolation(self):
        rng = np.random.default_rng(5)
        z = np.cumsum(rng.normal(size=(12, 15)), axis=0) * 5
        z[4, 7] = np.nan
        dem = RasterGrid.from_array(z)
        py, cy = _backend.python_kernels, _backend.compiled_kernels
        for a, b in zip(py.horn_gradient(dem.masked(), 10.0),
                        cy.horn_gradient(dem.masked(), 10.0)):
            assert np.array_equal(a, b, equal_nan=True)
        from villagestress.raster import _ray_offsets
        args = (dem.masked(), 10.0) + _ray_offsets(12, 15, 16)
        assert np.array_equal(py.horizon_tangents(*args), cy.horizon_tangents(*args),
                              equal_nan=True)

    def test_upgma(self):
        rng = np.random.default_rng(9)
        p = rng.normal(size=(10, 3))
        d = np.sqrt(((p[:, None] - p[None]) ** 2).sum(-1))
        d = 0.5 * (d + d.T)
        py = _backend.python_kernels.upgma(d)
        cy = _backend.compiled_kernels.upgma(d)
        assert [tuple(m) for m in py] == [tuple(m) for m in cy]


def test_horizon_of_single_peak():
    z = np.zeros((3, 5))
    z[1, 4] = 20.0
    tans = horizon_tangents(RasterGrid.from_array(z), 4)  # N, E, S, W
    assert tans[1, 1, 0] == pytest.approx(20.0 / 40.0)
    assert tans[3, 1, 0] == 0.0
