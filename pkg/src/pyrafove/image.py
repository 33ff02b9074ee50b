"""Retinal image container and resampling about the fixation point.

Images are grayscale float64 grids in [0, 1]. Pixel (row, col) maps to the
visual field through the resolution (pixels per degree) and the fixation
point, given in arcseconds relative to the image center with +x rightward
(columns) and +y downward (rows).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .geometry import ARCSEC_PER_DEGREE


@dataclass(frozen=True)
class RetinalImage:
    """A fixated grayscale image.

    Attributes:
        pixels: (H, W) float64 array, values in [0, 1].
        pixels_per_degree: sampling resolution.
        fixation: (x, y) arcsec offset of the fixation point from the image
            center; must land inside the image bounds.
    """

    pixels: np.ndarray
    pixels_per_degree: float
    fixation: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise ParameterError("image must be a 2D grayscale array")
        if px.size == 0:
            raise ParameterError("image must be non-empty")
        if not np.isfinite(px).all():
            raise ParameterError("image contains non-finite values")
        if px.min() < -1e-9 or px.max() > 1.0 + 1e-9:
            raise ParameterError("pixel values must lie in [0, 1]")
        if self.pixels_per_degree <= 0:
            raise ParameterError("pixels_per_degree must be positive")
        object.__setattr__(self, "pixels", px)
        col, row = self.fixation_px
        h, w = px.shape
        if not (0.0 <= col <= w - 1 and 0.0 <= row <= h - 1):
            raise ParameterError("fixation falls outside the image bounds")

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @property
    def arcsec_per_pixel(self) -> float:
        return ARCSEC_PER_DEGREE / self.pixels_per_degree

    @property
    def fixation_px(self) -> tuple[float, float]:
        """Fixation as fractional (col, row) pixel coordinates."""
        h, w = np.asarray(self.pixels).shape
        scale = self.pixels_per_degree / ARCSEC_PER_DEGREE
        col = (w - 1) / 2.0 + self.fixation[0] * scale
        row = (h - 1) / 2.0 + self.fixation[1] * scale
        return (col, row)


def load_image(path, pixels_per_degree: float, fixation=(0.0, 0.0)) -> RetinalImage:
    """Load an 8- or 16-bit grayscale PGM or PNG file.

    Values are normalized by the format's full-scale white level.
    """
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "I;16":
            data = np.asarray(im, dtype=np.float64) / 65535.0
        elif im.mode == "I":
            data = np.asarray(im, dtype=np.float64)
            # PGM with maxval > 255 decodes to mode I; infer the depth.
            data = data / (65535.0 if data.max() > 255 else 255.0)
        else:
            data = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    return RetinalImage(
        pixels=np.clip(data, 0.0, 1.0),
        pixels_per_degree=pixels_per_degree,
        fixation=tuple(fixation),
    )


def save_pgm(image: RetinalImage, path) -> None:
    """Write an 8-bit binary PGM (useful for fixtures and inspection)."""
    data = np.clip(np.round(image.pixels * 255.0), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def scale_image(image: RetinalImage, factor: float) -> RetinalImage:
    """Rescale image content by `factor` about the fixation point.

    factor > 1 magnifies (content at radius r moves to factor * r). Bicubic
    interpolation; edges replicate so no spurious contrast enters at the
    border. Output geometry (shape, resolution, fixation) is unchanged.
    """
    if factor <= 0:
        raise ParameterError("scale factor must be positive")
    h, w = image.shape
    fcol, frow = image.fixation_px
    rows, cols = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
    )
    src_rows = frow + (rows - frow) / factor
    src_cols = fcol + (cols - fcol) / factor
    out = ndimage.map_coordinates(
        image.pixels, [src_rows, src_cols], order=3, mode="nearest"
    )
    return replace(image, pixels=np.clip(out, 0.0, 1.0))


def translate_image(image: RetinalImage, dx_arcsec: float, dy_arcsec: float) -> RetinalImage:
    """Translate image content by (dx, dy) arcsec; bilinear off the grid."""
    px_per_arcsec = image.pixels_per_degree / ARCSEC_PER_DEGREE
    dc = dx_arcsec * px_per_arcsec
    dr = dy_arcsec * px_per_arcsec
    h, w = image.shape
    rows, cols = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
    )
    out = ndimage.map_coordinates(
        image.pixels, [rows - dr, cols - dc], order=1, mode="nearest"
    )
    return replace(image, pixels=np.clip(out, 0.0, 1.0))
