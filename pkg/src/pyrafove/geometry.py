"""Geometry of the scale/eccentricity sampling lattice.

The model tiles the (position, scale) plane with templates whose admissible
locations form an inverted truncated pyramid: at retinal position x the
smallest usable template radius grows linearly, s >= slope * |x|, and radii
are clipped to a finite set of scale bands. Sample positions at scale s are
spaced s apart, so every band carries the same number of samples per axis
and the whole region maps onto a square integer lattice:

    x_index = x / s        scale_index = band number (log_f(s / s_min)
                                         when bands are geometric)

On that lattice a translation of the image is a shift along x_index and a
rescaling about fixation is a shift along scale_index; the two commute.

All angular quantities are canonically stored in arcseconds as float64.
1 degree = 60 arcmin = 3600 arcsec.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import (
    BandLookupError,
    ConfigError,
    OutOfRegionError,
    ParameterError,
)
from .serialize import config_digest

ARCSEC_PER_DEGREE = 3600.0
ARCSEC_PER_ARCMIN = 60.0

# Relative slack for boundary membership and band lookup. Lattice points are
# constructed as exact products index * radius, so only float rounding needs
# to be absorbed.
_REL_TOL = 1e-12
_LOOKUP_RTOL = 1e-6


@dataclass(frozen=True, order=True)
class AngularLength:
    """A visual angle, stored in arcseconds."""

    arcsec: float

    @classmethod
    def from_arcsec(cls, value: float) -> "AngularLength":
        return cls(float(value))

    @classmethod
    def from_arcmin(cls, value: float) -> "AngularLength":
        return cls(float(value) * ARCSEC_PER_ARCMIN)

    @classmethod
    def from_degrees(cls, value: float) -> "AngularLength":
        return cls(float(value) * ARCSEC_PER_DEGREE)

    @property
    def arcmin(self) -> float:
        return self.arcsec / ARCSEC_PER_ARCMIN

    @property
    def degrees(self) -> float:
        return self.arcsec / ARCSEC_PER_DEGREE

    def __mul__(self, other: float) -> "AngularLength":
        return AngularLength(self.arcsec * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, AngularLength):
            return self.arcsec / other.arcsec
        return AngularLength(self.arcsec / float(other))

    def __add__(self, other: "AngularLength") -> "AngularLength":
        return AngularLength(self.arcsec + other.arcsec)

    def __sub__(self, other: "AngularLength") -> "AngularLength":
        return AngularLength(self.arcsec - other.arcsec)

    def __neg__(self) -> "AngularLength":
        return AngularLength(-self.arcsec)

    def __abs__(self) -> "AngularLength":
        return AngularLength(abs(self.arcsec))


def arcsec(value: float) -> AngularLength:
    return AngularLength.from_arcsec(value)


def arcmin(value: float) -> AngularLength:
    return AngularLength.from_arcmin(value)


def degrees(value: float) -> AngularLength:
    return AngularLength.from_degrees(value)


def _as_arcsec(value) -> float:
    """Coerce an AngularLength or a bare number (taken as arcsec) to float."""
    if isinstance(value, AngularLength):
        return value.arcsec
    return float(value)


@dataclass(frozen=True)
class ScaleBand:
    """One scale channel: a template radius and its position in the ladder."""

    index: int
    radius: AngularLength

    @property
    def diameter(self) -> AngularLength:
        return self.radius * 2.0

    def __post_init__(self):
        if self.index < 0:
            raise ParameterError("band index must be >= 0")
        if self.radius.arcsec <= 0:
            raise ParameterError("band radius must be positive")


class Region(Enum):
    TRUNCATED_PYRAMID = "truncated_pyramid"
    CONSTANT_DIFFERENCE = "constant_difference"


class Dimensionality(Enum):
    ONE_D = "1d"
    TWO_D = "2d"


@dataclass(frozen=True)
class SamplePoint:
    """A lattice sample. Positions are exact products index * radius."""

    scale_index: int
    x_index: int
    y_index: int
    x: AngularLength
    y: AngularLength
    scale: AngularLength


def marr_default_bands() -> tuple[ScaleBand, ...]:
    """The default five-channel ladder.

    Diameters are 1'20", 3.1', 6.2', 11.7' and 21' of visual angle, i.e.
    radii of 40", 93", 186", 351" and 630".
    """
    diameters = (80.0, 186.0, 372.0, 702.0, 1260.0)
    return tuple(
        ScaleBand(index=i, radius=arcsec(d / 2.0)) for i, d in enumerate(diameters)
    )


def geometric_bands(s_min, s_max, factor: float) -> tuple[ScaleBand, ...]:
    """Bands s_min * factor**k for every k with the radius still <= s_max.

    Args:
        s_min: radius of the finest band (AngularLength or arcsec).
        s_max: inclusive upper radius limit.
        factor: ladder ratio, must be > 1.

    Returns:
        Tuple of ScaleBand in increasing radius order; always contains at
        least the s_min band.
    """
    lo = _as_arcsec(s_min)
    hi = _as_arcsec(s_max)
    if lo <= 0:
        raise ParameterError("s_min must be positive")
    if hi < lo:
        raise ParameterError("s_max must be >= s_min")
    if factor <= 1.0:
        raise ParameterError("geometric factor must be > 1")
    count = int(math.floor(math.log(hi / lo) / math.log(factor) + 1e-9)) + 1
    return tuple(
        ScaleBand(index=k, radius=arcsec(lo * factor**k)) for k in range(count)
    )


def default_x_samples(slope: float) -> int:
    """Default samples per side, round(1/slope) with half-up ties."""
    if slope <= 0:
        raise ParameterError("slope must be positive")
    return max(1, int(math.floor(1.0 / slope + 0.5)))


def _detect_factor(radii: tuple[float, ...]) -> float | None:
    """Return the common ratio if the ladder is geometric within 1e-9."""
    if len(radii) < 2:
        return None
    ratios = [radii[k + 1] / radii[k] for k in range(len(radii) - 1)]
    first = ratios[0]
    for r in ratios[1:]:
        if abs(r - first) > 1e-9 * first:
            return None
    return first


@dataclass(frozen=True)
class LatticeSpec:
    """Full description of a sampling lattice.

    Attributes:
        bands: scale ladder, strictly increasing radii.
        slope: lower-boundary slope (smallest usable radius per unit
            eccentricity); dimensionless.
        n_x: samples per side along each position axis, so each band row is
            2 * n_x + 1 samples wide.
        region: admissible-region variant.
        factor: common band ratio when the ladder is geometric, else None.
        dimensionality: one or two position axes.
        radial_support: in 2D, keep only samples with
            x_index**2 + y_index**2 <= n_x**2 (off by default; the square
            support is canonical).
    """

    bands: tuple[ScaleBand, ...]
    slope: float
    n_x: int
    region: Region = Region.TRUNCATED_PYRAMID
    factor: float | None = None
    dimensionality: Dimensionality = Dimensionality.TWO_D
    radial_support: bool = False

    def __post_init__(self):
        if not self.bands:
            raise ParameterError("at least one band is required")
        if self.slope <= 0:
            raise ParameterError("slope must be positive")
        if self.n_x < 1:
            raise ParameterError("n_x must be >= 1")
        radii = [b.radius.arcsec for b in self.bands]
        for a, b in zip(radii, radii[1:]):
            if b <= a:
                raise ParameterError("band radii must be strictly increasing")
        for i, band in enumerate(self.bands):
            if band.index != i:
                raise ParameterError("band indices must be 0..n_bands-1 in order")
        if self.factor is not None:
            if self.factor <= 1.0:
                raise ParameterError("geometric factor must be > 1")
            for k in range(len(radii) - 1):
                expected = radii[k] * self.factor
                if abs(radii[k + 1] - expected) > 1e-9 * expected:
                    raise ParameterError(
                        "bands are not geometric with the declared factor"
                    )
        if self.region is Region.CONSTANT_DIFFERENCE and self.factor is None:
            raise ConfigError(
                "constant-difference region requires a geometric band ladder"
            )
        if self.radial_support and self.dimensionality is Dimensionality.ONE_D:
            raise ParameterError("radial support is only meaningful in 2D")

    @classmethod
    def create(
        cls,
        bands,
        slope: float,
        n_x: int | None = None,
        region: Region = Region.TRUNCATED_PYRAMID,
        dimensionality: Dimensionality = Dimensionality.TWO_D,
        radial_support: bool = False,
    ) -> "LatticeSpec":
        """Build a spec, defaulting n_x to round(1/slope) and detecting a
        geometric factor from the band radii."""
        bands = tuple(bands)
        radii = tuple(b.radius.arcsec for b in bands)
        return cls(
            bands=bands,
            slope=float(slope),
            n_x=default_x_samples(slope) if n_x is None else int(n_x),
            region=region,
            factor=_detect_factor(radii),
            dimensionality=dimensionality,
            radial_support=radial_support,
        )

    # -- derived quantities -------------------------------------------------

    @property
    def n_bands(self) -> int:
        return len(self.bands)

    @property
    def s_min(self) -> AngularLength:
        return self.bands[0].radius

    @property
    def s_max(self) -> AngularLength:
        return self.bands[-1].radius

    @property
    def samples_per_axis(self) -> int:
        return 2 * self.n_x + 1

    @property
    def extent(self) -> AngularLength:
        """Largest sampled eccentricity, n_x * s_max."""
        return self.s_max * self.n_x

    @property
    def half_width_units(self) -> float:
        """Half-width of the region in units of s: max(n_x, 1/slope).

        The discrete lattice uses n_x samples per side while the continuous
        boundary line is at |x| = s / slope; whichever is wider bounds the
        region, so both the constructed samples and the boundary corner are
        members.
        """
        return max(float(self.n_x), 1.0 / self.slope)

    @property
    def n_levels(self) -> int:
        """Number of scale levels an activation tensor carries.

        The pyramid uses exactly the declared bands. The constant-difference
        variant slides the band stack upward with eccentricity, which needs
        up to n_bands - 1 extra ladder levels before the eccentricity cap
        prunes everything.
        """
        if self.region is Region.TRUNCATED_PYRAMID:
            return self.n_bands
        return 2 * self.n_bands - 1

    def level_radius(self, level: int) -> AngularLength:
        """Radius of a tensor level, including extended ladder levels."""
        if level < 0 or level >= self.n_levels:
            raise ParameterError(f"level {level} out of range")
        if level < self.n_bands:
            return self.bands[level].radius
        assert self.factor is not None
        return arcsec(self.s_min.arcsec * self.factor ** level)

    def level_radii_arcsec(self) -> tuple[float, ...]:
        return tuple(self.level_radius(k).arcsec for k in range(self.n_levels))

    def config_hash(self) -> str:
        return config_digest(self.to_config())

    # -- config serialization -------------------------------------------------

    def to_config(self) -> dict:
        return {
            "bands_arcsec_diameter": [b.diameter.arcsec for b in self.bands],
            "slope_a": self.slope,
            "n_x": self.n_x,
            "region": self.region.value,
            "dimensionality": self.dimensionality.value,
            "radial_support": self.radial_support,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "LatticeSpec":
        """Parse the canonical key-value form. Unknown keys are rejected."""
        if not isinstance(cfg, dict):
            raise ConfigError("lattice config must be a mapping")
        allowed = {
            "bands_arcsec_diameter",
            "bands_geometric",
            "slope_a",
            "n_x",
            "region",
            "dimensionality",
            "radial_support",
        }
        unknown = sorted(set(cfg) - allowed)
        if unknown:
            raise ConfigError(f"unknown lattice config keys: {', '.join(unknown)}")
        if "slope_a" not in cfg:
            raise ConfigError("lattice config requires slope_a")
        slope = float(cfg["slope_a"])

        has_list = "bands_arcsec_diameter" in cfg
        has_geom = "bands_geometric" in cfg
        if has_list == has_geom:
            raise ConfigError(
                "provide exactly one of bands_arcsec_diameter or bands_geometric"
            )
        if has_list:
            diameters = cfg["bands_arcsec_diameter"]
            if not isinstance(diameters, (list, tuple)) or not diameters:
                raise ConfigError("bands_arcsec_diameter must be a non-empty list")
            bands = tuple(
                ScaleBand(index=i, radius=arcsec(float(d) / 2.0))
                for i, d in enumerate(diameters)
            )
        else:
            geom = cfg["bands_geometric"]
            gallowed = {"min_diameter_arcsec", "max_diameter_arcsec", "factor"}
            if not isinstance(geom, dict):
                raise ConfigError("bands_geometric must be a mapping")
            gunknown = sorted(set(geom) - gallowed)
            if gunknown:
                raise ConfigError(
                    f"unknown bands_geometric keys: {', '.join(gunknown)}"
                )
            for key in gallowed:
                if key not in geom:
                    raise ConfigError(f"bands_geometric requires {key}")
            bands = geometric_bands(
                float(geom["min_diameter_arcsec"]) / 2.0,
                float(geom["max_diameter_arcsec"]) / 2.0,
                float(geom["factor"]),
            )

        region = cfg.get("region", Region.TRUNCATED_PYRAMID.value)
        try:
            region = Region(region)
        except ValueError:
            raise ConfigError(f"unknown region variant: {region!r}") from None
        dim = cfg.get("dimensionality", Dimensionality.TWO_D.value)
        try:
            dim = Dimensionality(dim)
        except ValueError:
            raise ConfigError(f"unknown dimensionality: {dim!r}") from None

        n_x = cfg.get("n_x")
        return cls.create(
            bands=bands,
            slope=slope,
            n_x=None if n_x is None else int(n_x),
            region=region,
            dimensionality=dim,
            radial_support=bool(cfg.get("radial_support", False)),
        )


# -- region membership -------------------------------------------------------


def _cd_min_level(spec: LatticeSpec, ecc_arcsec: float) -> int:
    """Smallest ladder level whose row reaches the given eccentricity.

    Level k covers |x| <= half_width_units * s_min * factor**k; this returns
    the first k for which that holds (0 at the center).
    """
    reach0 = spec.half_width_units * spec.s_min.arcsec
    if ecc_arcsec <= reach0 * (1.0 + _REL_TOL):
        return 0
    assert spec.factor is not None
    k = math.log(ecc_arcsec / reach0) / math.log(spec.factor)
    level = int(math.ceil(k - 1e-9))
    return max(0, level)


def in_region(x, s, spec: LatticeSpec, y=None) -> bool:
    """Membership test for the admissible (position, scale) region.

    Args:
        x: position along the first axis (AngularLength or arcsec).
        s: template radius.
        spec: lattice description.
        y: second-axis position for 2D specs; defaults to 0.

    The truncated pyramid accepts s_min <= s <= s_max with
    |x| <= max(n_x, 1/slope) * s per axis. The constant-difference variant
    instead keeps the same number of ladder levels above the local minimum
    at every eccentricity, capped at the pyramid's span.
    """
    xv = abs(_as_arcsec(x))
    sv = _as_arcsec(s)
    yv = abs(_as_arcsec(y)) if y is not None else 0.0
    if yv != 0.0 and spec.dimensionality is Dimensionality.ONE_D:
        raise ParameterError("1D lattice has no second position axis")
    if sv <= 0:
        return False

    if spec.region is Region.TRUNCATED_PYRAMID:
        if sv < spec.s_min.arcsec * (1.0 - _REL_TOL):
            return False
        if sv > spec.s_max.arcsec * (1.0 + _REL_TOL):
            return False
        reach = spec.half_width_units * sv * (1.0 + _REL_TOL)
        return xv <= reach and yv <= reach

    # Constant difference: same count of levels above the local minimum.
    ecc = max(xv, yv)
    if ecc > spec.n_x * spec.s_max.arcsec * (1.0 + _REL_TOL):
        return False
    reach = spec.half_width_units * sv * (1.0 + _REL_TOL)
    if xv > reach or yv > reach:
        return False
    min_level = _cd_min_level(spec, ecc)
    top_level = min_level + spec.n_bands - 1
    assert spec.factor is not None
    s_top = spec.s_min.arcsec * spec.factor**top_level
    if sv > s_top * (1.0 + _LOOKUP_RTOL):
        return False
    return sv >= spec.s_min.arcsec * (1.0 - _REL_TOL)


def lower_boundary(x, spec: LatticeSpec) -> AngularLength:
    """Smallest admissible radius at eccentricity x: max(s_min, slope*|x|)."""
    xv = abs(_as_arcsec(x))
    return arcsec(max(spec.s_min.arcsec, spec.slope * xv))


# -- lattice construction ----------------------------------------------------


def build_lattice(spec: LatticeSpec) -> list[SamplePoint]:
    """Enumerate every sample point of the lattice.

    Points are ordered by (scale_index, x_index, y_index). For the pyramid
    every band carries exactly (2*n_x+1) samples per axis; the
    constant-difference variant adds wing samples on extended ladder levels
    and its row counts vary with level.
    """
    points: list[SamplePoint] = []
    two_d = spec.dimensionality is Dimensionality.TWO_D
    y_range = range(-spec.n_x, spec.n_x + 1) if two_d else (0,)

    if spec.region is Region.TRUNCATED_PYRAMID:
        for band in spec.bands:
            sv = band.radius.arcsec
            for ix in range(-spec.n_x, spec.n_x + 1):
                for iy in y_range:
                    if spec.radial_support and ix * ix + iy * iy > spec.n_x**2:
                        continue
                    points.append(
                        SamplePoint(
                            scale_index=band.index,
                            x_index=ix,
                            y_index=iy,
                            x=arcsec(ix * sv),
                            y=arcsec(iy * sv),
                            scale=band.radius,
                        )
                    )
        return points

    cap = spec.n_x * spec.s_max.arcsec * (1.0 + _REL_TOL)
    for level in range(spec.n_levels):
        radius = spec.level_radius(level)
        sv = radius.arcsec
        for ix in range(-spec.n_x, spec.n_x + 1):
            for iy in y_range:
                if spec.radial_support and ix * ix + iy * iy > spec.n_x**2:
                    continue
                ecc = max(abs(ix), abs(iy)) * sv
                if ecc > cap:
                    continue
                if level - _cd_min_level(spec, ecc) > spec.n_bands - 1:
                    continue
                points.append(
                    SamplePoint(
                        scale_index=level,
                        x_index=ix,
                        y_index=iy,
                        x=arcsec(ix * sv),
                        y=arcsec(iy * sv),
                        scale=radius,
                    )
                )
    return points


def lattice_csv_rows(points: list[SamplePoint]) -> list[tuple]:
    """Rows for the canonical lattice CSV (i_s,i_x,i_y,x,y,s columns)."""
    return [
        (
            p.scale_index,
            p.x_index,
            p.y_index,
            p.x.arcsec,
            p.y.arcsec,
            p.scale.arcsec,
        )
        for p in points
    ]


LATTICE_CSV_HEADER = ("i_s", "i_x", "i_y", "x_arcsec", "y_arcsec", "s_arcsec")


# -- the index map and its inverse -------------------------------------------


def _level_for_scale(spec: LatticeSpec, sv: float) -> int:
    """Find the ladder level whose radius matches sv, or raise."""
    if spec.factor is not None:
        ratio = sv / spec.s_min.arcsec
        if ratio <= 0:
            raise BandLookupError(f"scale {sv} arcsec is not positive")
        level = round(math.log(ratio) / math.log(spec.factor))
        if 0 <= level < spec.n_levels:
            expected = spec.level_radius(level).arcsec
            if abs(sv - expected) <= _LOOKUP_RTOL * expected:
                return level
        raise BandLookupError(f"scale {sv} arcsec matches no ladder level")
    for band in spec.bands:
        expected = band.radius.arcsec
        if abs(sv - expected) <= _LOOKUP_RTOL * expected:
            return band.index
    raise BandLookupError(f"scale {sv} arcsec matches no band")


def magic_map(x, s, spec: LatticeSpec, y=None) -> SamplePoint:
    """Map a lattice-resolvable (position, scale) pair to integer indices.

    Args:
        x: position, an exact (within rounding) integer multiple of s.
        s: template radius matching one of the spec's ladder levels.
        spec: lattice description.
        y: second-axis position for 2D specs.

    Returns:
        The SamplePoint carrying (scale_index, x_index[, y_index]).

    Raises:
        BandLookupError: s matches no ladder level.
        ParameterError: x/s is not within rounding of an integer.
        OutOfRegionError: indices fall outside the admissible region.
    """
    xv = _as_arcsec(x)
    sv = _as_arcsec(s)
    yv = _as_arcsec(y) if y is not None else 0.0
    if yv != 0.0 and spec.dimensionality is Dimensionality.ONE_D:
        raise ParameterError("1D lattice has no second position axis")
    level = _level_for_scale(spec, sv)

    indices = []
    for v in (xv, yv):
        ratio = v / sv
        idx = round(ratio)
        if abs(ratio - idx) > 1e-6 * max(1.0, abs(ratio)):
            raise ParameterError(
                f"position {v} arcsec is not on the scale-{sv} sample grid"
            )
        indices.append(int(idx))
    ix, iy = indices

    if max(abs(ix), abs(iy)) > spec.n_x:
        raise OutOfRegionError(
            f"indices ({ix},{iy}) exceed the +/-{spec.n_x} sample row"
        )
    if spec.region is Region.CONSTANT_DIFFERENCE:
        radius = spec.level_radius(level)
        if not in_region(arcsec(ix * radius.arcsec), radius, spec,
                         y=arcsec(iy * radius.arcsec)):
            raise OutOfRegionError(
                f"level {level} has no sample at indices ({ix},{iy})"
            )
    radius = spec.level_radius(level)
    return SamplePoint(
        scale_index=level,
        x_index=ix,
        y_index=iy,
        x=arcsec(ix * radius.arcsec),
        y=arcsec(iy * radius.arcsec),
        scale=radius,
    )


def inverse_magic_map(
    scale_index: int, x_index: int, spec: LatticeSpec, y_index: int = 0
) -> SamplePoint:
    """Positions from indices; exact inverse of magic_map on the lattice."""
    radius = spec.level_radius(scale_index)
    if max(abs(x_index), abs(y_index)) > spec.n_x:
        raise OutOfRegionError(
            f"indices ({x_index},{y_index}) exceed the +/-{spec.n_x} sample row"
        )
    if y_index != 0 and spec.dimensionality is Dimensionality.ONE_D:
        raise ParameterError("1D lattice has no second position axis")
    point = SamplePoint(
        scale_index=int(scale_index),
        x_index=int(x_index),
        y_index=int(y_index),
        x=arcsec(x_index * radius.arcsec),
        y=arcsec(y_index * radius.arcsec),
        scale=radius,
    )
    if spec.region is Region.CONSTANT_DIFFERENCE:
        if not in_region(point.x, radius, spec, y=point.y):
            raise OutOfRegionError(
                f"level {scale_index} has no sample at ({x_index},{y_index})"
            )
    return point


# -- index transforms ---------------------------------------------------------


def shift_lattice_index(
    scale_index: int, x_index: int, delta: int, spec: LatticeSpec
):
    """Translate a lattice index along x; None when it leaves the row."""
    moved = x_index + delta
    if abs(moved) > spec.n_x:
        return None
    return (scale_index, moved)


def scale_lattice_index(
    scale_index: int, x_index: int, delta: int, spec: LatticeSpec
):
    """Translate a lattice index along scale; None when it leaves the ladder."""
    moved = scale_index + delta
    if moved < 0 or moved >= spec.n_levels:
        return None
    return (moved, x_index)


# -- foveola and magnification arithmetic -------------------------------------


def infer_foveola_radius(slope: float, s_min_diameter) -> AngularLength:
    """Radius of the uniform-acuity center implied by the boundary slope.

    The region's lower boundary passes through the finest channel at
    eccentricity R = s_min_diameter / slope; inside that radius the finest
    channel is available everywhere.
    """
    if slope <= 0:
        raise ParameterError("slope must be positive")
    d = _as_arcsec(s_min_diameter)
    if d <= 0:
        raise ParameterError("diameter must be positive")
    return arcsec(d / slope)


def foveola_cell_count(slope: float, s_min_diameter, spacing=None) -> int:
    """Number of finest-channel samples spanning the uniform center.

    Spacing defaults to the finest radius (samples sit one radius apart).
    """
    radius = infer_foveola_radius(slope, s_min_diameter)
    sp = _as_arcsec(spacing) if spacing is not None else _as_arcsec(s_min_diameter) / 2.0
    if sp <= 0:
        raise ParameterError("spacing must be positive")
    return int(math.floor(2.0 * radius.arcsec / sp + 1e-9))


def invariance_range(s, spec: LatticeSpec) -> AngularLength:
    """Half-range of positions a band's row covers: n_x * s.

    s must match one of the spec's declared bands.
    """
    sv = _as_arcsec(s)
    for band in spec.bands:
        expected = band.radius.arcsec
        if abs(sv - expected) <= _LOOKUP_RTOL * expected:
            return arcsec(spec.n_x * expected)
    raise BandLookupError(f"scale {sv} arcsec matches no band")


def local_sample_spacing(spec: LatticeSpec, eccentricity) -> AngularLength:
    """Sample spacing of the finest band whose row reaches an eccentricity.

    Inside |x| <= n_x * s_min this is simply s_min (the uniform center);
    beyond that the spacing steps up the ladder, growing in proportion
    to eccentricity up to the ladder's rung quantization.
    """
    e = abs(_as_arcsec(eccentricity))
    for band in spec.bands:
        if spec.n_x * band.radius.arcsec * (1.0 + _REL_TOL) >= e:
            return AngularLength(band.radius.arcsec)
    raise OutOfRegionError(
        f"eccentricity {e:g} arcsec is beyond the lattice extent "
        f"{spec.extent.arcsec:g} arcsec"
    )


def empirical_inverse_magnification(x, m0_inv: float, slope_emp: float) -> float:
    """Cortical inverse magnification M0_inv * (1 + slope_emp * x_degrees).

    Used only for comparison curves against the model's lower boundary; the
    empirical line is strictly increasing from the center while the model is
    flat inside the uniform center.
    """
    if m0_inv <= 0:
        raise ParameterError("m0_inv must be positive")
    xv = _as_arcsec(x) / ARCSEC_PER_DEGREE
    return m0_inv * (1.0 + slope_emp * abs(xv))
