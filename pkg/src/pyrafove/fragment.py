"""Activation fragments: the lattice's view of one fixated image.

extract() evaluates the full template bank at every lattice sample and
returns the activations as a dense tensor indexed (scale level, x index,
y index, orientation), together with per-entry boundary flags marking
samples whose filter support left the image (zero-padded) or, for the
constant-difference variant, lattice holes that carry no sample at all.

Because positions are spaced proportionally to scale, translating the
image by one sample step of band k shifts that band's activations by one
slot along the x axis, and rescaling the image by the ladder factor shifts
all content by one slot along the scale axis. Both are plain index
translations here (shift_fragment / scale_shift_fragment) and commute.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import json
import numpy as np

from .errors import ConfigError, ParameterError
from .geometry import Dimensionality, LatticeSpec, Region, in_region, arcsec
from .image import RetinalImage
from .serialize import canonical_json
from .templates import TemplateBank, level_energies

FORMAT_VERSION = 1
_MAGIC = b"IPFR"


@dataclass(frozen=True)
class IPFragment:
    """One extracted fragment plus its provenance.

    activations: float64, (n_levels, W, n_theta) for 1D lattices or
        (n_levels, W, W, n_theta) for 2D, W = 2*n_x + 1.
    boundary: bool, same shape; True where the value is not backed by full
        image data.
    """

    activations: np.ndarray
    boundary: np.ndarray
    spec_hash: str
    bank_hash: str
    fixation: tuple[float, float]
    pixels_per_degree: float

    def __post_init__(self):
        act = np.asarray(self.activations, dtype=np.float64)
        bnd = np.asarray(self.boundary, dtype=bool)
        if act.ndim not in (3, 4):
            raise ParameterError("activations must be a 3D or 4D tensor")
        if act.shape != bnd.shape:
            raise ParameterError("boundary flags must match activation shape")
        object.__setattr__(self, "activations", act)
        object.__setattr__(self, "boundary", bnd)

    @property
    def n_levels(self) -> int:
        return self.activations.shape[0]

    @property
    def n_theta(self) -> int:
        return self.activations.shape[-1]

    @property
    def width(self) -> int:
        return self.activations.shape[1]

    @property
    def dimensionality(self) -> Dimensionality:
        return Dimensionality.TWO_D if self.activations.ndim == 4 else Dimensionality.ONE_D


def extract(image: RetinalImage, spec: LatticeSpec, bank: TemplateBank) -> IPFragment:
    """Evaluate the bank at every lattice sample of the fixated image.

    The result is reproducible bit for bit for identical inputs.

    Raises:
        ConfigError: when the bank was built for a different ladder or at a
            different resolution than the image.
    """
    radii = spec.level_radii_arcsec()
    if bank.n_levels != len(radii) or any(
        abs(a - b) > 1e-9 * max(a, b)
        for a, b in zip(bank.level_radii_arcsec, radii)
    ):
        raise ConfigError("template bank does not match the lattice ladder")
    if abs(bank.pixels_per_degree - image.pixels_per_degree) > 1e-9 * bank.pixels_per_degree:
        raise ConfigError(
            "bank and image disagree on pixels_per_degree "
            f"({bank.pixels_per_degree:g} vs {image.pixels_per_degree:g})"
        )

    two_d = spec.dimensionality is Dimensionality.TWO_D
    width = spec.samples_per_axis
    idx = np.arange(-spec.n_x, spec.n_x + 1)
    if two_d:
        ix = np.repeat(idx, width)
        iy = np.tile(idx, width)
        shape = (spec.n_levels, width, width, bank.n_theta)
    else:
        ix = idx
        iy = np.zeros_like(idx)
        shape = (spec.n_levels, width, bank.n_theta)

    activations = np.zeros(shape, dtype=np.float64)
    boundary = np.zeros(shape, dtype=bool)

    for level in range(spec.n_levels):
        sv = radii[level]
        xs = ix * sv
        ys = iy * sv

        valid = np.ones(len(xs), dtype=bool)
        if spec.radial_support and two_d:
            valid &= ix * ix + iy * iy <= spec.n_x**2
        if spec.region is Region.CONSTANT_DIFFERENCE:
            level_radius = spec.level_radius(level)
            for i in range(len(xs)):
                if valid[i] and not in_region(
                    arcsec(xs[i]), level_radius, spec, y=arcsec(ys[i])
                ):
                    valid[i] = False

        pts = np.stack([xs[valid], ys[valid]], axis=1)
        energies, flags = level_energies(image, pts, bank.kernels[level])

        level_act = np.zeros((len(xs), bank.n_theta), dtype=np.float64)
        level_bnd = np.ones(len(xs), dtype=bool)  # holes read as "no data"
        level_act[valid] = energies
        level_bnd[valid] = flags

        if two_d:
            activations[level] = level_act.reshape(width, width, bank.n_theta)
            boundary[level] = np.broadcast_to(
                level_bnd.reshape(width, width, 1), (width, width, bank.n_theta)
            )
        else:
            activations[level] = level_act
            boundary[level] = np.broadcast_to(
                level_bnd.reshape(width, 1), (width, bank.n_theta)
            )

    return IPFragment(
        activations=activations,
        boundary=boundary,
        spec_hash=spec.config_hash(),
        bank_hash=bank.config_hash(),
        fixation=tuple(image.fixation),
        pixels_per_degree=image.pixels_per_degree,
    )


# -- similarity ----------------------------------------------------------------


def default_band_weights(n_levels: int) -> np.ndarray:
    """Finest-first weights 2**-level, normalized to sum 1."""
    w = 0.5 ** np.arange(n_levels, dtype=np.float64)
    return w / w.sum()


def fragment_similarity(a: IPFragment, b: IPFragment, weights=None) -> float:
    """Band-weighted cosine similarity in [-1, 1].

    Weights multiply each scale level's inner product and squared norms;
    they default to 2**-level (finest band counts most). If either fragment
    has zero weighted norm the similarity is 0 by convention.
    """
    if a.spec_hash != b.spec_hash or a.bank_hash != b.bank_hash:
        raise ConfigError("fragments come from different spec/bank configurations")
    if a.activations.shape != b.activations.shape:
        raise ParameterError("fragment shapes differ")
    n_levels = a.n_levels
    if weights is None:
        w = default_band_weights(n_levels)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n_levels,):
            raise ParameterError(f"weights must have length {n_levels}")
        if (w < 0).any():
            raise ParameterError("weights must be nonnegative")

    flat_a = a.activations.reshape(n_levels, -1)
    flat_b = b.activations.reshape(n_levels, -1)
    dot = float(np.sum(w * np.sum(flat_a * flat_b, axis=1)))
    na = float(np.sum(w * np.sum(flat_a * flat_a, axis=1)))
    nb = float(np.sum(w * np.sum(flat_b * flat_b, axis=1)))
    if na < 1e-24 or nb < 1e-24:
        return 0.0
    return dot / np.sqrt(na * nb)


# -- index shifts ----------------------------------------------------------------


def _shift_along(arr: np.ndarray, delta: int, axis: int, fill) -> np.ndarray:
    """Translate content by delta slots along axis, filling vacated slots."""
    out = np.full_like(arr, fill)
    if delta == 0:
        return arr.copy()
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    if delta > 0:
        src[axis] = slice(0, arr.shape[axis] - delta)
        dst[axis] = slice(delta, None)
    else:
        src[axis] = slice(-delta, None)
        dst[axis] = slice(0, arr.shape[axis] + delta)
    out[tuple(dst)] = arr[tuple(src)]
    return out


def shift_fragment(f: IPFragment, delta_x: int, delta_y: int = 0) -> IPFragment:
    """Translate activations along the position axes by whole sample steps.

    Vacated entries are zero-filled and boundary-flagged. Positive delta_x
    moves content toward larger x indices.
    """
    max_shift = f.width - 1
    if abs(delta_x) > max_shift or abs(delta_y) > max_shift:
        raise ParameterError(f"shift exceeds the +/-{max_shift} slot range")
    if delta_y != 0 and f.activations.ndim != 4:
        raise ParameterError("1D fragment has no y axis")
    act = _shift_along(f.activations, delta_x, axis=1, fill=0.0)
    bnd = _shift_along(f.boundary, delta_x, axis=1, fill=True)
    if f.activations.ndim == 4 and delta_y != 0:
        act = _shift_along(act, delta_y, axis=2, fill=0.0)
        bnd = _shift_along(bnd, delta_y, axis=2, fill=True)
    return replace(f, activations=act, boundary=bnd)


def scale_shift_fragment(f: IPFragment, delta_s: int) -> IPFragment:
    """Translate activations along the scale axis by whole ladder steps.

    Positive delta_s moves content toward coarser levels, matching what
    magnifying the image by one ladder factor does to new extractions.
    """
    if abs(delta_s) >= f.n_levels:
        raise ParameterError(f"scale shift exceeds the +/-{f.n_levels - 1} range")
    act = _shift_along(f.activations, delta_s, axis=0, fill=0.0)
    bnd = _shift_along(f.boundary, delta_s, axis=0, fill=True)
    return replace(f, activations=act, boundary=bnd)


# -- container format ------------------------------------------------------------


def write_fragment(f: IPFragment, path) -> None:
    """Serialize to the binary container.

    Layout: magic "IPFR", u32 little-endian header length, canonical JSON
    header, float32 little-endian activation payload in (scale, x[, y],
    orientation) C order, then bit-packed boundary flags.
    """
    header = {
        "format_version": FORMAT_VERSION,
        "spec_hash": f.spec_hash,
        "bank_hash": f.bank_hash,
        "shape": list(f.activations.shape),
        "fixation": [float(f.fixation[0]), float(f.fixation[1])],
        "pixels_per_degree": float(f.pixels_per_degree),
        "dimensionality": f.dimensionality.value,
    }
    blob = canonical_json(header).encode("utf-8")
    payload = f.activations.astype("<f4").tobytes(order="C")
    flagbits = np.packbits(f.boundary.ravel(order="C")).tobytes()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)
        fh.write(flagbits)


def read_fragment(path) -> IPFragment:
    """Parse a container written by write_fragment."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ConfigError("not a fragment container (bad magic)")
    (hlen,) = struct.unpack_from("<I", data, 4)
    header_end = 8 + hlen
    try:
        header = json.loads(data[8:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"corrupt fragment header: {exc}") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise ConfigError(
            f"unsupported fragment format version {header.get('format_version')!r}"
        )
    shape = tuple(int(v) for v in header["shape"])
    count = int(np.prod(shape))
    payload_end = header_end + 4 * count
    act = np.frombuffer(data[header_end:payload_end], dtype="<f4", count=count)
    act = act.reshape(shape).astype(np.float64)
    nflagbytes = (count + 7) // 8
    bits = np.frombuffer(
        data[payload_end : payload_end + nflagbytes], dtype=np.uint8
    )
    flags = np.unpackbits(bits)[:count].astype(bool).reshape(shape)
    return IPFragment(
        activations=act,
        boundary=flags,
        spec_hash=header["spec_hash"],
        bank_hash=header["bank_hash"],
        fixation=(float(header["fixation"][0]), float(header["fixation"][1])),
        pixels_per_degree=float(header["pixels_per_degree"]),
    )


FRAGMENT_CSV_HEADER = ("i_s", "i_x", "i_y", "theta_index", "activation", "boundary")


def fragment_csv_rows(f: IPFragment) -> list[tuple]:
    """Flat dump for inspection, one row per tensor entry."""
    n_x = (f.width - 1) // 2
    rows = []
    act = f.activations
    bnd = f.boundary
    if act.ndim == 3:
        act = act[:, :, None, :]
        bnd = bnd[:, :, None, :]
        ys = [0]
    else:
        ys = list(range(-n_x, n_x + 1))
    for level in range(act.shape[0]):
        for i, ix in enumerate(range(-n_x, n_x + 1)):
            for j, iy in enumerate(ys):
                for t in range(act.shape[3]):
                    rows.append(
                        (level, ix, iy, t, float(act[level, i, j, t]), bool(bnd[level, i, j, t]))
                    )
    return rows
