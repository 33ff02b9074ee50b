import math

import numpy as np
import pytest

from pyrafove import (
    Dimensionality,
    GaborParams,
    LatticeSpec,
    NyquistError,
    ParameterError,
    RetinalImage,
    TemplateBank,
    arcsec,
    inverse_magic_map,
    make_bank,
    make_gabor,
    min_pixels_per_degree,
    respond,
)
from pyrafove.geometry import ScaleBand
from pyrafove.templates import level_energies, respond_flagged


def small_spec(radii=(40.0, 80.0, 160.0), slope=0.2, dim=Dimensionality.TWO_D):
    bands = tuple(ScaleBand(index=i, radius=arcsec(r)) for i, r in enumerate(radii))
    return LatticeSpec.create(bands, slope, dimensionality=dim)


def grating_image(wavelength_px, orientation, size=160, ppd=360.0, phase=0.3):
    rr, cc = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    u = cc * math.cos(orientation) + rr * math.sin(orientation)
    pixels = 0.5 + 0.45 * np.cos(2.0 * math.pi * u / wavelength_px + phase)
    return RetinalImage(pixels=pixels, pixels_per_degree=ppd)


class TestMakeGabor:
    def test_unit_norm_and_quadrature_orthogonality(self):
        k = make_gabor(GaborParams(scale=arcsec(80.0)), 360.0)
        assert np.linalg.norm(k.even) == pytest.approx(1.0)
        assert np.linalg.norm(k.odd) == pytest.approx(1.0)
        assert abs(np.vdot(k.even, k.odd)) < 1e-12

    def test_blind_to_smooth_surfaces(self):
        # constant, linear and quadratic content inside the support must
        # produce exactly zero response from both kernels
        k = make_gabor(GaborParams(scale=arcsec(80.0)), 360.0)
        n = k.grid_size
        coords = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
        u, v = np.meshgrid(coords, coords, indexing="xy")
        for surface in (np.ones_like(u), u, v, u * v, u * u, v * v):
            masked = np.where(k.support, surface, 0.0)
            assert abs(np.vdot(k.even, masked)) < 1e-9
            assert abs(np.vdot(k.odd, masked)) < 1e-9

    def test_zero_outside_support_disk(self):
        k = make_gabor(GaborParams(scale=arcsec(60.0)), 300.0)
        assert np.all(k.even[~k.support] == 0.0)
        assert np.all(k.odd[~k.support] == 0.0)

    def test_support_diameter_tracks_scale(self):
        k = make_gabor(GaborParams(scale=arcsec(80.0)), 360.0)
        assert k.support_diameter_arcsec() == pytest.approx(170.0, rel=0.1)

    def test_quarter_turn_covariance(self):
        base = GaborParams(scale=arcsec(80.0), orientation=0.0)
        quarter = GaborParams(scale=arcsec(80.0), orientation=math.pi / 2.0)
        k0 = make_gabor(base, 360.0)
        k90 = make_gabor(quarter, 360.0)
        assert np.allclose(np.rot90(k0.even), k90.even, atol=1e-10)
        # odd carrier flips sign under the quarter turn
        assert np.allclose(np.rot90(k0.odd), -k90.odd, atol=1e-10)

    def test_nyquist_floor(self):
        with pytest.raises(NyquistError) as err:
            make_gabor(GaborParams(scale=arcsec(40.0)), 100.0)
        assert err.value.min_pixels_per_degree == pytest.approx(180.0)
        # exactly at the floor the sine phase vanishes on the grid
        with pytest.raises(NyquistError):
            make_gabor(GaborParams(scale=arcsec(40.0)), 180.0)
        make_gabor(GaborParams(scale=arcsec(40.0)), 181.0)

    def test_min_pixels_per_degree(self):
        assert min_pixels_per_degree(arcsec(40.0)) == pytest.approx(180.0)
        assert min_pixels_per_degree(arcsec(40.0), wavelength_ratio=2.0) == pytest.approx(90.0)

    def test_rejects_bad_params(self):
        with pytest.raises(ParameterError):
            GaborParams(scale=arcsec(0.0))
        with pytest.raises(ParameterError):
            GaborParams(scale=arcsec(40.0), sigma_ratio=0.0)
        with pytest.raises(ParameterError):
            make_gabor(GaborParams(scale=arcsec(40.0)), 0.0)


class TestMakeBank:
    def test_shape_and_metadata(self):
        spec = small_spec()
        bank = make_bank(spec, n_theta=4, pixels_per_degree=360.0)
        assert bank.n_levels == 3
        assert bank.n_theta == 4
        assert bank.level_radii_arcsec == (40.0, 80.0, 160.0)
        assert bank.orientations == tuple(j * math.pi / 4 for j in range(4))

    def test_nyquist_driven_by_finest_band(self):
        with pytest.raises(NyquistError) as err:
            make_bank(small_spec(), n_theta=4, pixels_per_degree=90.0)
        assert err.value.min_pixels_per_degree == pytest.approx(180.0)

    def test_hash_tracks_parameters(self):
        spec = small_spec()
        a = make_bank(spec, n_theta=4, pixels_per_degree=360.0)
        b = make_bank(spec, n_theta=4, pixels_per_degree=360.0)
        c = make_bank(spec, n_theta=6, pixels_per_degree=360.0)
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()

    def test_covers_extended_ladder_of_constant_difference(self):
        from pyrafove import Region, geometric_bands
        spec = LatticeSpec.create(
            geometric_bands(40.0, 160.0, 2.0), slope=0.2,
            region=Region.CONSTANT_DIFFERENCE)
        bank = make_bank(spec, n_theta=2, pixels_per_degree=360.0)
        assert bank.n_levels == spec.n_levels == 5


class TestResponses:
    def test_energy_bounded_by_one(self):
        # unit-normalized patch against an orthonormal pair: the quadrature
        # magnitude is a projection norm
        spec = small_spec()
        bank = make_bank(spec, n_theta=4, pixels_per_degree=360.0)
        rng = np.random.default_rng(5)
        image = RetinalImage(pixels=rng.uniform(0, 1, (200, 200)),
                             pixels_per_degree=360.0)
        pts = rng.uniform(-300, 300, (50, 2))
        for level in range(bank.n_levels):
            energies, _ = level_energies(image, pts, bank.kernels[level])
            assert energies.max() <= 1.0 + 1e-12
            assert energies.min() >= 0.0

    def test_uniform_image_gives_zero(self):
        spec = small_spec()
        bank = make_bank(spec, n_theta=4, pixels_per_degree=360.0)
        image = RetinalImage(pixels=np.full((160, 160), 0.5),
                             pixels_per_degree=360.0)
        point = inverse_magic_map(0, 0, spec)
        assert respond(image, point, bank, 0) == pytest.approx(0.0, abs=1e-6)

    def test_matched_grating_prefers_its_orientation(self):
        spec = small_spec()
        bank = make_bank(spec, n_theta=4, pixels_per_degree=360.0)
        point = inverse_magic_map(1, 0, spec)  # 80 arcsec band, center
        wavelength_px = 80.0 * 360.0 / 3600.0
        for oi, theta in enumerate(bank.orientations):
            image = grating_image(wavelength_px, theta)
            energies = [respond(image, point, bank, j) for j in range(bank.n_theta)]
            assert int(np.argmax(energies)) == oi
            assert energies[oi] > 0.85

    def test_matched_grating_prefers_its_band(self):
        spec = small_spec()
        bank = make_bank(spec, n_theta=4, pixels_per_degree=360.0)
        for level, radius in enumerate(bank.level_radii_arcsec):
            image = grating_image(radius * 360.0 / 3600.0, 0.0)
            by_level = [
                respond(image, inverse_magic_map(lv, 0, spec), bank, 0)
                for lv in range(bank.n_levels)
            ]
            assert int(np.argmax(by_level)) == level

    def test_boundary_flag_near_edge(self):
        spec = small_spec()
        bank = make_bank(spec, n_theta=2, pixels_per_degree=360.0)
        image = RetinalImage(pixels=np.full((64, 64), 0.5),
                             pixels_per_degree=360.0)
        center = inverse_magic_map(0, 0, spec)
        _, flag = respond_flagged(image, center, bank, 0)
        assert not flag
        edge = inverse_magic_map(2, 2, spec)  # 320 arcsec out, 160 band
        _, flag = respond_flagged(image, edge, bank, 0)
        assert flag

    def test_orientation_index_validated(self):
        spec = small_spec()
        bank = make_bank(spec, n_theta=2, pixels_per_degree=360.0)
        image = RetinalImage(pixels=np.full((64, 64), 0.5),
                             pixels_per_degree=360.0)
        with pytest.raises(ParameterError):
            respond(image, inverse_magic_map(0, 0, spec), bank, 5)
