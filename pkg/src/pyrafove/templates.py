"""Gabor template banks matched to the lattice's scale ladder.

Each band carries quadrature pairs (even and odd phase) at a set of
orientations. Kernels live on pixel grids, are truncated to a disk of
radius s, forced to zero mean over that disk, and L2-normalized; the odd
kernel is additionally orthogonalized against the even one so the
quadrature energy of a unit-normalized patch can never exceed 1.

Responses use local contrast normalization: the sampled patch has its mean
under the support disk removed and is divided by its L2 norm (with a small
floor), making the energy insensitive to absolute luminance and contrast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, NyquistError, ParameterError
from .geometry import (
    ARCSEC_PER_DEGREE,
    AngularLength,
    LatticeSpec,
    SamplePoint,
    _as_arcsec,
)
from .image import RetinalImage
from .serialize import config_digest

NORM_FLOOR = 1e-8


@dataclass(frozen=True)
class GaborParams:
    """Parameters of one quadrature pair.

    The carrier wavelength and the envelope width both scale with the
    band radius: wavelength = wavelength_ratio * scale,
    sigma = sigma_ratio * scale.
    """

    scale: AngularLength
    orientation: float = 0.0
    wavelength_ratio: float = 1.0
    sigma_ratio: float = 0.5

    def __post_init__(self):
        if self.scale.arcsec <= 0:
            raise ParameterError("scale must be positive")
        if self.wavelength_ratio <= 0 or self.sigma_ratio <= 0:
            raise ParameterError("wavelength and sigma ratios must be positive")


def min_pixels_per_degree(scale, wavelength_ratio: float = 1.0) -> float:
    """Smallest resolution whose pixel pitch resolves the carrier (2 px)."""
    return 2.0 * ARCSEC_PER_DEGREE / (wavelength_ratio * _as_arcsec(scale))


@dataclass(frozen=True)
class FilterKernel:
    """A realized quadrature pair on a pixel grid.

    even/odd are (n, n) float64 grids, zero-mean over the support disk and
    unit L2; odd is orthogonal to even. support is the boolean disk mask.
    """

    even: np.ndarray
    odd: np.ndarray
    support: np.ndarray
    pitch_arcsec: float
    radius_px: int
    params: GaborParams

    @property
    def grid_size(self) -> int:
        return self.even.shape[0]

    def support_diameter_arcsec(self) -> float:
        """Angular extent of the nonzero support along an axis."""
        cols = np.flatnonzero(self.support.any(axis=0))
        return (cols[-1] - cols[0] + 1) * self.pitch_arcsec


def make_gabor(params: GaborParams, pixels_per_degree: float) -> FilterKernel:
    """Realize one quadrature pair at the given resolution.

    Raises:
        NyquistError: when the carrier wavelength falls under 2 pixels; the
            error reports the minimal admissible pixels_per_degree.
    """
    if pixels_per_degree <= 0:
        raise ParameterError("pixels_per_degree must be positive")
    s_px = params.scale.arcsec * pixels_per_degree / ARCSEC_PER_DEGREE
    wavelength_px = params.wavelength_ratio * s_px
    if wavelength_px < 2.0 - 1e-12:
        need = min_pixels_per_degree(params.scale, params.wavelength_ratio)
        raise NyquistError(
            f"carrier wavelength {wavelength_px:.3f} px is under the 2 px floor "
            f"for scale {params.scale.arcsec:g} arcsec; "
            f"need pixels_per_degree >= {need:g}",
            min_pixels_per_degree=need,
        )
    half = int(math.ceil(s_px))
    coords = np.arange(-half, half + 1, dtype=np.float64)
    u, v = np.meshgrid(coords, coords, indexing="xy")  # u: +x (cols), v: +y (rows)
    support = (u * u + v * v) <= s_px * s_px + 1e-9

    sigma_px = params.sigma_ratio * s_px
    envelope = np.exp(-(u * u + v * v) / (2.0 * sigma_px * sigma_px))
    carrier = (
        2.0
        * math.pi
        * (u * math.cos(params.orientation) + v * math.sin(params.orientation))
        / wavelength_px
    )
    even = envelope * np.cos(carrier)
    odd = envelope * np.sin(carrier)

    # orthonormal basis of constant through quadratic surfaces on the disk;
    # projecting these out blinds the pair to locally smooth content from
    # far coarser scales, which would otherwise dominate after the local
    # contrast normalization in level_energies
    smooth = []
    for poly in (np.ones_like(u), u, v, u * u - v * v, u * v, u * u + v * v):
        g = np.where(support, poly, 0.0)
        for b in smooth:
            g = g - float(np.vdot(b, g)) * b
        norm = np.linalg.norm(g)
        if norm > NORM_FLOOR:
            smooth.append(g / norm)

    def _condition(grid: np.ndarray) -> np.ndarray:
        g = np.where(support, grid, 0.0)
        for b in smooth:
            g = g - float(np.vdot(b, g)) * b
        norm = np.linalg.norm(g)
        if norm < NORM_FLOOR:
            raise ParameterError("degenerate kernel (zero after conditioning)")
        return g / norm

    even = _condition(even)
    # At exactly 2 px per cycle the sine carrier vanishes on the integer
    # grid and no quadrature partner exists; the floor is strict.
    if np.linalg.norm(np.where(support, odd, 0.0)) < NORM_FLOOR:
        need = min_pixels_per_degree(params.scale, params.wavelength_ratio)
        raise NyquistError(
            f"carrier wavelength {wavelength_px:.3f} px leaves no odd phase "
            f"on the pixel grid; need pixels_per_degree > {need:g}",
            min_pixels_per_degree=need,
        )
    odd = _condition(odd)
    # Exact orthogonality makes the quadrature energy a true projection norm.
    odd = odd - float(np.vdot(odd, even)) * even
    norm = np.linalg.norm(odd)
    if norm < NORM_FLOOR:
        raise ParameterError("degenerate odd kernel after orthogonalization")
    odd = odd / norm

    even.flags.writeable = False
    odd.flags.writeable = False
    support.flags.writeable = False
    return FilterKernel(
        even=even,
        odd=odd,
        support=support,
        pitch_arcsec=ARCSEC_PER_DEGREE / pixels_per_degree,
        radius_px=half,
        params=params,
    )


KERNEL_CSV_HEADER = ("u_px", "v_px", "even", "odd")


def kernel_csv_rows(kernel: FilterKernel) -> list[tuple]:
    """Grid dump for inspection, one row per pixel inside the support."""
    half = kernel.radius_px
    rows = []
    for r in range(kernel.grid_size):
        for c in range(kernel.grid_size):
            if kernel.support[r, c]:
                rows.append(
                    (c - half, r - half, float(kernel.even[r, c]), float(kernel.odd[r, c]))
                )
    return rows


@dataclass(frozen=True)
class TemplateBank:
    """Quadrature pairs for every (ladder level, orientation) combination."""

    kernels: tuple[tuple[FilterKernel, ...], ...]  # [level][orientation]
    level_radii_arcsec: tuple[float, ...]
    orientations: tuple[float, ...]
    pixels_per_degree: float
    wavelength_ratio: float
    sigma_ratio: float

    @property
    def n_levels(self) -> int:
        return len(self.kernels)

    @property
    def n_theta(self) -> int:
        return len(self.orientations)

    def kernel(self, level: int, orientation: int) -> FilterKernel:
        return self.kernels[level][orientation]

    def to_config(self) -> dict:
        return {
            "bands_arcsec_radius": list(self.level_radii_arcsec),
            "n_theta": self.n_theta,
            "pixels_per_degree": self.pixels_per_degree,
            "wavelength_ratio": self.wavelength_ratio,
            "sigma_ratio": self.sigma_ratio,
        }

    def config_hash(self) -> str:
        return config_digest(self.to_config())


def make_bank(
    spec: LatticeSpec,
    n_theta: int,
    pixels_per_degree: float,
    wavelength_ratio: float = 1.0,
    sigma_ratio: float = 0.5,
) -> TemplateBank:
    """Build the bank matching a lattice spec.

    Orientations are evenly spaced over [0, pi) (quadrature energy is
    pi-periodic). Kernels are built for every tensor level of the spec,
    including the extended ladder of the constant-difference variant.

    Raises:
        NyquistError: naming the offending band and the minimal admissible
            pixels_per_degree (driven by the finest band).
    """
    if n_theta < 1:
        raise ParameterError("n_theta must be >= 1")
    radii = spec.level_radii_arcsec()
    finest = min(radii)
    need = min_pixels_per_degree(finest, wavelength_ratio)
    if pixels_per_degree < need * (1.0 - 1e-12):
        raise NyquistError(
            f"band 0 (radius {finest:g} arcsec) needs pixels_per_degree >= {need:g}, "
            f"got {pixels_per_degree:g}",
            min_pixels_per_degree=need,
        )
    orientations = tuple(j * math.pi / n_theta for j in range(n_theta))
    kernels = tuple(
        tuple(
            make_gabor(
                GaborParams(
                    scale=AngularLength(radius),
                    orientation=theta,
                    wavelength_ratio=wavelength_ratio,
                    sigma_ratio=sigma_ratio,
                ),
                pixels_per_degree,
            )
            for theta in orientations
        )
        for radius in radii
    )
    return TemplateBank(
        kernels=kernels,
        level_radii_arcsec=tuple(radii),
        orientations=orientations,
        pixels_per_degree=pixels_per_degree,
        wavelength_ratio=wavelength_ratio,
        sigma_ratio=sigma_ratio,
    )


# -- response evaluation -------------------------------------------------------


def _centers_px(image: RetinalImage, points_xy: np.ndarray) -> np.ndarray:
    """(col, row) pixel coordinates of visual-field positions (arcsec)."""
    fcol, frow = image.fixation_px
    scale = image.pixels_per_degree / ARCSEC_PER_DEGREE
    out = np.empty_like(points_xy)
    out[:, 0] = fcol + points_xy[:, 0] * scale
    out[:, 1] = frow + points_xy[:, 1] * scale
    return out


def level_energies(
    image: RetinalImage,
    points_xy: np.ndarray,
    kernels: tuple[FilterKernel, ...],
):
    """Quadrature energies of one ladder level at many positions.

    Args:
        image: the fixated input.
        points_xy: (P, 2) positions in arcsec relative to fixation.
        kernels: this level's kernels, one per orientation (shared grid).

    Returns:
        (energies, flags): energies is (P, n_theta) in [0, 1]; flags marks
        positions whose square support window left the image and was
        zero-padded.
    """
    base = kernels[0]
    half = base.radius_px
    n = base.grid_size
    centers = _centers_px(image, np.asarray(points_xy, dtype=np.float64))
    h, w = image.shape

    offs = np.arange(-half, half + 1, dtype=np.float64)
    du, dv = np.meshgrid(offs, offs, indexing="xy")
    mask = base.support.ravel()
    rows = centers[:, 1][:, None] + dv.ravel()[None, :]
    cols = centers[:, 0][:, None] + du.ravel()[None, :]
    vals = ndimage.map_coordinates(
        image.pixels,
        [rows.ravel(), cols.ravel()],
        order=1,
        mode="constant",
        cval=0.0,
    ).reshape(len(centers), n * n)

    patch = vals[:, mask]
    patch = patch - patch.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(patch, axis=1, keepdims=True)
    patch = patch / np.maximum(norms, NORM_FLOOR)

    energies = np.empty((len(centers), len(kernels)), dtype=np.float64)
    for j, k in enumerate(kernels):
        re = patch @ k.even.ravel()[mask]
        ro = patch @ k.odd.ravel()[mask]
        energies[:, j] = np.hypot(re, ro)

    flags = (
        (centers[:, 0] - half < 0)
        | (centers[:, 0] + half > w - 1)
        | (centers[:, 1] - half < 0)
        | (centers[:, 1] + half > h - 1)
    )
    return energies, flags


def respond_flagged(
    image: RetinalImage, point: SamplePoint, bank: TemplateBank, orientation: int
) -> tuple[float, bool]:
    """Quadrature energy at one lattice point plus its boundary flag."""
    if not (0 <= orientation < bank.n_theta):
        raise ParameterError(f"orientation index {orientation} out of range")
    if point.scale_index >= bank.n_levels:
        raise ConfigError("point's scale level is not covered by the bank")
    kernels = (bank.kernel(point.scale_index, orientation),)
    pts = np.array([[point.x.arcsec, point.y.arcsec]])
    energies, flags = level_energies(image, pts, kernels)
    return float(energies[0, 0]), bool(flags[0])


def respond(
    image: RetinalImage, point: SamplePoint, bank: TemplateBank, orientation: int
) -> float:
    """Locally normalized quadrature energy in [0, 1] at one lattice point.

    Support reaching past the image border is zero-padded; use
    respond_flagged to observe the boundary flag.
    """
    value, _ = respond_flagged(image, point, bank, orientation)
    return value
