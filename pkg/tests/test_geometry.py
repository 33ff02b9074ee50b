import math

import numpy as np
import pytest

from pyrafove import (
    BandLookupError,
    ConfigError,
    Dimensionality,
    LatticeSpec,
    OutOfRegionError,
    ParameterError,
    Region,
    arcmin,
    arcsec,
    build_lattice,
    degrees,
    empirical_inverse_magnification,
    foveola_cell_count,
    geometric_bands,
    in_region,
    infer_foveola_radius,
    invariance_range,
    inverse_magic_map,
    local_sample_spacing,
    lower_boundary,
    magic_map,
    marr_default_bands,
)
from pyrafove.geometry import ScaleBand, default_x_samples


def make_spec(radii, slope, n_x=None, region=Region.TRUNCATED_PYRAMID,
              dim=Dimensionality.TWO_D, radial=False):
    bands = tuple(ScaleBand(index=i, radius=arcsec(r)) for i, r in enumerate(radii))
    return LatticeSpec.create(bands, slope, n_x=n_x, region=region,
                              dimensionality=dim, radial_support=radial)


class TestAngularLength:
    def test_unit_conversions(self):
        a = arcmin(2.0)
        assert a.arcsec == 120.0
        assert degrees(1.0).arcsec == 3600.0
        assert arcsec(7200.0).degrees == 2.0
        assert arcsec(90.0).arcmin == 1.5

    def test_arithmetic(self):
        assert (arcsec(30.0) * 4).arcsec == 120.0
        assert (arcsec(100.0) / 4).arcsec == 25.0


class TestFoveolaArithmetic:
    # uniform center radius = finest diameter / boundary slope
    def test_radius_from_slope(self):
        r = infer_foveola_radius(0.1, arcsec(80.0))
        assert r.arcsec == pytest.approx(800.0)
        assert r.arcmin == pytest.approx(13.333, abs=1e-3)

    def test_full_extent(self):
        r = infer_foveola_radius(0.1, 80.0)
        assert (r * 2).arcmin == pytest.approx(26.667, abs=1e-3)

    def test_cell_count_at_default_spacing(self):
        # 2 * 800 / 40 = 40 finest cells across the center
        assert foveola_cell_count(0.1, 80.0) in (39, 40)

    def test_cell_count_with_explicit_spacing(self):
        assert foveola_cell_count(0.1, 80.0, spacing=arcsec(80.0)) == 20

    def test_rejects_bad_inputs(self):
        with pytest.raises(ParameterError):
            infer_foveola_radius(0.0, 80.0)
        with pytest.raises(ParameterError):
            infer_foveola_radius(0.1, -80.0)
        with pytest.raises(ParameterError):
            foveola_cell_count(0.1, 80.0, spacing=0.0)


class TestBands:
    def test_marr_default_radii(self):
        radii = [b.radius.arcsec for b in marr_default_bands()]
        assert radii == [40.0, 93.0, 186.0, 351.0, 630.0]

    def test_geometric_ladder_inclusive_top(self):
        radii = [b.radius.arcsec for b in geometric_bands(40.0, 640.0, 2.0)]
        assert radii == pytest.approx([40.0, 80.0, 160.0, 320.0, 640.0])

    def test_geometric_ladder_stops_below_top(self):
        radii = [b.radius.arcsec for b in geometric_bands(40.0, 600.0, 2.0)]
        assert radii == pytest.approx([40.0, 80.0, 160.0, 320.0])

    def test_single_band_ladder(self):
        assert len(geometric_bands(50.0, 50.0, 2.0)) == 1

    def test_rejects_bad_ladders(self):
        with pytest.raises(ParameterError):
            geometric_bands(0.0, 100.0, 2.0)
        with pytest.raises(ParameterError):
            geometric_bands(100.0, 50.0, 2.0)
        with pytest.raises(ParameterError):
            geometric_bands(40.0, 640.0, 1.0)


class TestLatticeSpec:
    def test_n_x_defaults_to_inverse_slope(self):
        assert default_x_samples(0.1) == 10
        assert default_x_samples(0.05) == 20
        assert default_x_samples(0.3) == 3
        spec = make_spec([40, 80], slope=0.1)
        assert spec.n_x == 10
        assert spec.samples_per_axis == 21

    def test_detects_geometric_factor(self):
        spec = make_spec([40, 80, 160], slope=0.1)
        assert spec.factor == pytest.approx(2.0)
        assert make_spec([40, 93, 186], slope=0.1).factor is None

    def test_extent(self):
        spec = make_spec([40, 640], slope=0.1)
        assert spec.extent.arcsec == pytest.approx(6400.0)

    def test_rejects_nonincreasing_radii(self):
        with pytest.raises(ParameterError):
            make_spec([80, 40], slope=0.1)
        with pytest.raises(ParameterError):
            make_spec([40, 40], slope=0.1)

    def test_constant_difference_needs_geometric_ladder(self):
        with pytest.raises(ConfigError):
            make_spec([40, 93, 186], slope=0.1, region=Region.CONSTANT_DIFFERENCE)

    def test_config_roundtrip(self):
        spec = make_spec([40, 80, 160], slope=0.1, dim=Dimensionality.ONE_D)
        again = LatticeSpec.from_config(spec.to_config())
        assert again == spec
        assert again.config_hash() == spec.config_hash()

    def test_from_config_rejects_unknown_keys(self):
        cfg = make_spec([40, 80], slope=0.1).to_config()
        cfg["surprise"] = 1
        with pytest.raises(ConfigError):
            LatticeSpec.from_config(cfg)


class TestBoundary:
    def test_lower_boundary_is_flat_then_linear(self):
        spec = make_spec([40, 640], slope=0.1)
        assert lower_boundary(0.0, spec).arcsec == 40.0
        assert lower_boundary(arcsec(200.0), spec).arcsec == 40.0
        # kink exactly at s_min / slope
        assert lower_boundary(arcsec(400.0), spec).arcsec == 40.0
        assert lower_boundary(arcsec(1000.0), spec).arcsec == pytest.approx(100.0)
        assert lower_boundary(arcsec(-1000.0), spec).arcsec == pytest.approx(100.0)

    def test_in_region_pyramid(self):
        spec = make_spec([40, 80, 160], slope=0.1)  # n_x = 10
        assert in_region(arcsec(0), arcsec(40), spec)
        assert in_region(arcsec(400), arcsec(40), spec)   # corner sample
        assert not in_region(arcsec(480), arcsec(40), spec)
        assert not in_region(arcsec(0), arcsec(20), spec)   # under s_min
        assert not in_region(arcsec(0), arcsec(320), spec)  # over s_max
        # second axis bounds in 2D
        assert in_region(arcsec(0), arcsec(40), spec, y=arcsec(400))
        assert not in_region(arcsec(0), arcsec(40), spec, y=arcsec(480))

    def test_one_d_rejects_y(self):
        spec = make_spec([40, 80], slope=0.1, dim=Dimensionality.ONE_D)
        with pytest.raises(ParameterError):
            in_region(arcsec(0), arcsec(40), spec, y=arcsec(40))


class TestBuildLattice:
    def test_pyramid_counts_2d(self):
        spec = make_spec([40, 80, 160], slope=0.1)
        points = build_lattice(spec)
        assert len(points) == 3 * 21 * 21
        per_band = {}
        for p in points:
            per_band[p.scale_index] = per_band.get(p.scale_index, 0) + 1
        assert set(per_band.values()) == {21 * 21}

    def test_pyramid_counts_1d(self):
        spec = make_spec([40, 80], slope=0.05, dim=Dimensionality.ONE_D)
        points = build_lattice(spec)
        assert len(points) == 2 * 41
        assert all(p.y_index == 0 for p in points)

    def test_positions_are_index_times_radius(self):
        spec = make_spec([40, 80], slope=0.2)
        for p in build_lattice(spec):
            assert p.x.arcsec == p.x_index * p.scale.arcsec
            assert p.y.arcsec == p.y_index * p.scale.arcsec

    def test_radial_support_count(self):
        spec = make_spec([40], slope=0.25, radial=True)  # n_x = 4
        disk = sum(
            1
            for i in range(-4, 5)
            for j in range(-4, 5)
            if i * i + j * j <= 16
        )
        assert len(build_lattice(spec)) == disk

    def test_constant_difference_counts(self):
        # radii (10, 20), factor 2, n_x = 2: ladder levels (10, 20, 40).
        # Level 2 exists only on the |index| = 1 ring (center would need a
        # third level above the local minimum; |index| = 2 exceeds the cap).
        spec = make_spec([10, 20], slope=0.5, n_x=2,
                         region=Region.CONSTANT_DIFFERENCE)
        points = build_lattice(spec)
        per_level = {}
        for p in points:
            per_level[p.scale_index] = per_level.get(p.scale_index, 0) + 1
        assert per_level == {0: 25, 1: 25, 2: 8}

    def test_constant_difference_counts_1d(self):
        spec = make_spec([10, 20], slope=0.5, n_x=2,
                         region=Region.CONSTANT_DIFFERENCE,
                         dim=Dimensionality.ONE_D)
        per_level = {}
        for p in build_lattice(spec):
            per_level[p.scale_index] = per_level.get(p.scale_index, 0) + 1
        assert per_level == {0: 5, 1: 5, 2: 2}


class TestIndexMaps:
    def test_roundtrip_on_every_lattice_point(self):
        spec = make_spec([40, 80, 160], slope=0.2)
        for p in build_lattice(spec):
            q = magic_map(p.x, p.scale, spec, y=p.y)
            assert (q.scale_index, q.x_index, q.y_index) == (
                p.scale_index, p.x_index, p.y_index)
            r = inverse_magic_map(q.scale_index, q.x_index, spec, q.y_index)
            assert r == q

    def test_rejects_off_grid_position(self):
        spec = make_spec([40, 80], slope=0.1)
        with pytest.raises(ParameterError):
            magic_map(arcsec(60.0), arcsec(40.0), spec)

    def test_rejects_unknown_scale(self):
        spec = make_spec([40, 80], slope=0.1)
        with pytest.raises(BandLookupError):
            magic_map(arcsec(0.0), arcsec(55.0), spec)

    def test_rejects_out_of_row_index(self):
        spec = make_spec([40, 80], slope=0.1)  # n_x = 10
        with pytest.raises(OutOfRegionError):
            magic_map(arcsec(11 * 40.0), arcsec(40.0), spec)
        with pytest.raises(OutOfRegionError):
            inverse_magic_map(0, 11, spec)

    def test_constant_difference_hole(self):
        spec = make_spec([10, 20], slope=0.5, n_x=2,
                         region=Region.CONSTANT_DIFFERENCE)
        # level 2 exists on the ring but not at the center
        inverse_magic_map(2, 1, spec)
        with pytest.raises(OutOfRegionError):
            inverse_magic_map(2, 0, spec)


class TestDerivedQuantities:
    def test_invariance_range_is_n_x_times_s(self):
        spec = make_spec([40, 80, 160], slope=0.1)
        assert invariance_range(arcsec(80.0), spec).arcsec == pytest.approx(800.0)
        with pytest.raises(BandLookupError):
            invariance_range(arcsec(55.0), spec)

    def test_local_sample_spacing_steps_up_the_ladder(self):
        spec = make_spec([40, 80, 160], slope=0.1)  # rows reach 400/800/1600
        assert local_sample_spacing(spec, arcsec(0)).arcsec == 40.0
        assert local_sample_spacing(spec, arcsec(400)).arcsec == 40.0
        assert local_sample_spacing(spec, arcsec(401)).arcsec == 80.0
        assert local_sample_spacing(spec, arcsec(-900)).arcsec == 160.0
        with pytest.raises(OutOfRegionError):
            local_sample_spacing(spec, arcsec(1601))

    def test_empirical_inverse_magnification(self):
        # value at the center is m0_inv; doubles at 1/slope_emp degrees
        assert empirical_inverse_magnification(0.0, 40.0, 3.0) == 40.0
        assert empirical_inverse_magnification(degrees(1.0), 40.0, 3.0) == pytest.approx(160.0)
        with pytest.raises(ParameterError):
            empirical_inverse_magnification(0.0, 0.0, 3.0)

    def test_levels_for_constant_difference(self):
        spec = make_spec([10, 20, 40], slope=0.5, n_x=2,
                         region=Region.CONSTANT_DIFFERENCE)
        assert spec.n_levels == 5
        assert spec.level_radius(4).arcsec == pytest.approx(160.0)
        with pytest.raises(ParameterError):
            spec.level_radius(5)
