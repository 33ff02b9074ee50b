"""Prediction experiments: letter acuity vs eccentricity, scale and
translation invariance sweeps, and flanked-letter crowding.

Stimuli live on a mid-gray canvas (background 0.5) and are placed as
additive deviations, so superposition is exact until clipping. Every
experiment is deterministic given its seed: per-trial generators are
keyed by (seed, condition, level, trial) and trials may run on a thread
pool without affecting results.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NyquistError, ParameterError
from .fragment import extract, fragment_similarity
from .geometry import (
    ARCSEC_PER_DEGREE,
    AngularLength,
    LatticeSpec,
    ScaleBand,
    local_sample_spacing,
)
from .hierarchy import run_hierarchy, stage_unit_for_column
from .image import RetinalImage, scale_image
from .templates import TemplateBank

_SIM_FLOOR = 1e-24


def _arcsec(value) -> float:
    if isinstance(value, AngularLength):
        return value.arcsec
    return float(value)


def resolve_threads(value=None) -> int:
    """Worker count: explicit argument, else PYRAFOVE_THREADS, else cores."""
    if value is None:
        env = os.environ.get("PYRAFOVE_THREADS", "").strip()
        value = env if env else (os.cpu_count() or 1)
    n = int(value)
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n


def _map_indexed(fn, count: int, threads: int) -> list:
    """Run fn(0..count-1), in order, optionally on a thread pool.

    Results come back index-ordered either way, so parallelism cannot
    change any downstream output.
    """
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=min(threads, count)) as pool:
        return list(pool.map(fn, range(count)))


def _float_key(value: float) -> int:
    # stable integer identity for seeding, exact in the float's bits
    return int(np.float64(value).view(np.uint64))


def _merge_config(defaults: dict, config) -> dict:
    cfg = dict(defaults)
    if config:
        unknown = sorted(set(config) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown experiment options: {unknown}")
        cfg.update(config)
    return cfg


# -- letter glyphs ------------------------------------------------------------

# 5x7 fixed-stroke uppercase bitmaps ('#' = ink).
FONT_5X7 = {
    "A": ("01110", "10001", "10001", "11111", "10001", "10001", "10001"),
    "C": ("01110", "10001", "10000", "10000", "10000", "10001", "01110"),
    "D": ("11110", "10001", "10001", "10001", "10001", "10001", "11110"),
    "E": ("11111", "10000", "10000", "11110", "10000", "10000", "11111"),
    "H": ("10001", "10001", "10001", "11111", "10001", "10001", "10001"),
    "K": ("10001", "10010", "10100", "11000", "10100", "10010", "10001"),
    "N": ("10001", "11001", "10101", "10011", "10001", "10001", "10001"),
    "O": ("01110", "10001", "10001", "10001", "10001", "10001", "01110"),
    "R": ("11110", "10001", "10001", "11110", "10100", "10010", "10001"),
    "S": ("01111", "10000", "10000", "01110", "00001", "00001", "11110"),
    "T": ("11111", "00100", "00100", "00100", "00100", "00100", "00100"),
    "U": ("10001", "10001", "10001", "10001", "10001", "10001", "01110"),
    "V": ("10001", "10001", "10001", "10001", "10001", "01010", "00100"),
    "X": ("10001", "10001", "01010", "00100", "01010", "10001", "10001"),
    "Z": ("11111", "00001", "00010", "00100", "01000", "10000", "11111"),
}

_GLYPH_CACHE: dict[str, np.ndarray] = {}

RASTER_FLOOR_PX = 5.0


def _glyph_cells(glyph: str) -> np.ndarray:
    cached = _GLYPH_CACHE.get(glyph)
    if cached is not None:
        return cached
    rows = FONT_5X7.get(glyph)
    if rows is None:
        raise ParameterError(
            f"unknown glyph {glyph!r}; available: {''.join(sorted(FONT_5X7))}"
        )
    cells = np.array([[1.0 if c == "1" else 0.0 for c in row] for row in rows])
    _GLYPH_CACHE[glyph] = cells
    return cells


def _coverage_matrix(n_px: int, n_cells: int) -> np.ndarray:
    """M[p, c] = fraction of pixel p covered by cell c (rows sum to 1)."""
    edges = np.arange(n_cells + 1) * (n_px / n_cells)
    m = np.empty((n_px, n_cells))
    for p in range(n_px):
        lo = np.maximum(p, edges[:-1])
        hi = np.minimum(p + 1, edges[1:])
        m[p] = np.maximum(0.0, hi - lo)
    return m


@dataclass
class Stimulus:
    """One rendered patch, stored with its mid-gray offset in place.

    pixels: (h, w) values in [0, 1], background 0.5.
    size: nominal angular height.
    eccentricity: nominal placement used by the experiment drivers.
    band_index: set when the patch has been band-pass filtered.
    """

    pixels: np.ndarray
    pixels_per_degree: float
    size: AngularLength
    eccentricity: AngularLength = AngularLength(0.0)
    band_index: int | None = None
    label: str | None = None

    @property
    def deviation(self) -> np.ndarray:
        return self.pixels - 0.5


def render_letter(glyph: str, size, pixels_per_degree: float, contrast: float = 0.45) -> Stimulus:
    """Rasterize one glyph at an exact angular height.

    Pixel values are the exact area fraction covered by ink, scaled by
    contrast above the 0.5 background, so doubling the size doubles the
    bounding box within a pixel and the raster is fully deterministic.

    Raises ParameterError below a 5-pixel height: thinner rasters drop
    strokes entirely.
    """
    size_arcsec = _arcsec(size)
    size_px = size_arcsec * pixels_per_degree / ARCSEC_PER_DEGREE
    h_px = int(round(size_px))
    if h_px < RASTER_FLOOR_PX:
        raise ParameterError(
            f"letter height {size_px:.2f} px is below the {RASTER_FLOOR_PX:g} px raster floor"
        )
    cells = _glyph_cells(glyph)
    w_px = max(1, int(round(size_px * cells.shape[1] / cells.shape[0])))
    rows = _coverage_matrix(h_px, cells.shape[0])
    cols = _coverage_matrix(w_px, cells.shape[1])
    ink = rows @ cells @ cols.T
    if not (0.0 < contrast <= 0.5):
        raise ParameterError("contrast must be in (0, 0.5]")
    pixels = 0.5 + contrast * ink
    return Stimulus(
        pixels=pixels,
        pixels_per_degree=float(pixels_per_degree),
        size=AngularLength(size_arcsec),
        label=glyph,
    )


def grating_patch(extent, wavelength, pixels_per_degree: float,
                  orientation: float = 0.0, contrast: float = 0.45,
                  phase: float = 0.0) -> Stimulus:
    """Square cosine-grating patch, used by the band-pass checks."""
    pitch = ARCSEC_PER_DEGREE / pixels_per_degree
    n = max(3, int(round(_arcsec(extent) / pitch)))
    coords = (np.arange(n) - (n - 1) / 2.0) * pitch
    u = coords[None, :] * math.cos(orientation) + coords[:, None] * math.sin(orientation)
    dev = contrast * np.cos(2.0 * math.pi * u / _arcsec(wavelength) + phase)
    return Stimulus(
        pixels=0.5 + dev,
        pixels_per_degree=float(pixels_per_degree),
        size=AngularLength(n * pitch),
    )


def noise_patch(extent, pixels_per_degree: float, rng, contrast: float = 0.45) -> Stimulus:
    """Uniform white-noise patch; feed through bandpass_stimulus to band it."""
    pitch = ARCSEC_PER_DEGREE / pixels_per_degree
    n = max(3, int(round(_arcsec(extent) / pitch)))
    dev = rng.uniform(-contrast, contrast, size=(n, n))
    return Stimulus(
        pixels=0.5 + dev,
        pixels_per_degree=float(pixels_per_degree),
        size=AngularLength(n * pitch),
    )


# passband geometry in octaves around the band carrier: the response is 1
# inside +-PASS_HALF_OCTAVES, rolls off over EDGE_OCTAVES, and is exactly
# zero beyond the sum (0.7 octaves), so a second filtering is nearly a no-op
PASS_HALF_OCTAVES = 0.5
EDGE_OCTAVES = 0.2


def band_transfer(f: np.ndarray, f0: float) -> np.ndarray:
    """Radial transfer for one band: difference of two smooth log-frequency
    lowpass envelopes, flat at 1 around the carrier f0 and identically zero
    beyond PASS_HALF_OCTAVES + EDGE_OCTAVES octaves (and at DC)."""
    with np.errstate(divide="ignore"):
        u = np.abs(np.log2(np.where(f > 0, f, np.inf) / f0))
    t = np.clip((u - PASS_HALF_OCTAVES) / EDGE_OCTAVES, 0.0, 1.0)
    return np.cos(0.5 * math.pi * t) ** 2


def bandpass_stimulus(stim: Stimulus, band: ScaleBand) -> Stimulus:
    """Filter a stimulus to one band's passband.

    The transfer holds a flat unit response within half an octave of the
    band's carrier (one cycle per template radius) and cuts to exactly
    zero 0.7 octaves out, so a band grating passes intact, anything an
    octave away is removed outright, and refiltering changes almost
    nothing. Applied to the deviation around the 0.5 background, so a
    constant input comes back with zero deviation.
    """
    ppd = stim.pixels_per_degree
    s_px = band.radius.arcsec * ppd / ARCSEC_PER_DEGREE
    if s_px < 2.0 - 1e-12:
        min_ppd = 2.0 * ARCSEC_PER_DEGREE / band.radius.arcsec
        raise NyquistError(
            f"band radius {band.radius.arcsec:g} arcsec needs >= {min_ppd:g} px/deg",
            min_pixels_per_degree=min_ppd,
        )
    h, w = stim.pixels.shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    transfer = band_transfer(np.hypot(fy, fx), 1.0 / s_px)
    dev = np.fft.irfft2(np.fft.rfft2(stim.deviation) * transfer, s=(h, w))
    return Stimulus(
        pixels=np.clip(0.5 + dev, 0.0, 1.0),
        pixels_per_degree=ppd,
        size=stim.size,
        eccentricity=stim.eccentricity,
        band_index=band.index,
        label=stim.label,
    )


# -- canvases -----------------------------------------------------------------


@dataclass
class Canvas:
    """Mid-gray scene raster with an arcsec coordinate frame.

    Column c sits at x0 + c * pitch; row r at y0 + r * pitch (+y down).
    The frame always contains x = y = 0 so the fixation lands on-canvas.
    """

    pixels: np.ndarray
    x0: float
    y0: float
    pitch: float

    def place(self, stim: Stimulus, x_center, y_center=0.0) -> None:
        """Add a stimulus deviation centered at (x, y) arcsec."""
        dev = stim.deviation
        h, w = dev.shape
        c0 = int(round((_arcsec(x_center) - self.x0) / self.pitch - (w - 1) / 2.0))
        r0 = int(round((_arcsec(y_center) - self.y0) / self.pitch - (h - 1) / 2.0))
        H, W = self.pixels.shape
        rs, cs = max(0, r0), max(0, c0)
        re, ce = min(H, r0 + h), min(W, c0 + w)
        if rs >= re or cs >= ce:
            return
        self.pixels[rs:re, cs:ce] += dev[rs - r0 : re - r0, cs - c0 : ce - c0]

    def add_noise(self, rng, amplitude: float) -> None:
        if amplitude > 0:
            self.pixels += rng.uniform(-amplitude, amplitude, size=self.pixels.shape)

    def image(self, pixels_per_degree: float) -> RetinalImage:
        h, w = self.pixels.shape
        center_x = self.x0 + (w - 1) / 2.0 * self.pitch
        center_y = self.y0 + (h - 1) / 2.0 * self.pitch
        return RetinalImage(
            pixels=np.clip(self.pixels, 0.0, 1.0),
            pixels_per_degree=pixels_per_degree,
            fixation=(-center_x, -center_y),
        )


def make_canvas(x_lo, x_hi, y_lo, y_hi, pixels_per_degree: float) -> Canvas:
    """Canvas covering the given arcsec window, snapped to the pixel grid."""
    pitch = ARCSEC_PER_DEGREE / pixels_per_degree
    kx0 = int(math.floor(min(_arcsec(x_lo), 0.0) / pitch)) - 1
    kx1 = int(math.ceil(max(_arcsec(x_hi), 0.0) / pitch)) + 1
    ky0 = int(math.floor(min(_arcsec(y_lo), 0.0) / pitch)) - 1
    ky1 = int(math.ceil(max(_arcsec(y_hi), 0.0) / pitch)) + 1
    pixels = np.full((ky1 - ky0 + 1, kx1 - kx0 + 1), 0.5)
    return Canvas(pixels=pixels, x0=kx0 * pitch, y0=ky0 * pitch, pitch=pitch)


# -- analysis utilities -------------------------------------------------------


def overlap_similarity(u, v) -> float:
    """Cosine-like similarity normalized by the larger squared norm.

    Unlike the plain cosine this decays when one pattern is an attenuated
    copy of the other, which is exactly the failure mode the invariance
    sweeps must detect at the ladder ends.
    """
    a = np.asarray(u, dtype=np.float64).ravel()
    b = np.asarray(v, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ParameterError("similarity requires equal-length vectors")
    denom = max(float(a @ a), float(b @ b), _SIM_FLOOR)
    return float(a @ b) / denom


def nn_classify(probe, gallery, metric) -> str:
    """Label of the most similar gallery item; first item wins ties.

    gallery: sequence of (label, item) pairs compared via metric(probe, item).
    """
    if not gallery:
        raise ParameterError("gallery must be nonempty")
    best_label, best_score = None, -math.inf
    for label, item in gallery:
        score = metric(probe, item)
        if score > best_score:
            best_label, best_score = label, score
    return best_label


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    n_points: int

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "n_points": self.n_points,
        }


def linear_fit(x, y) -> FitResult:
    """Least-squares line with intercept; conventional centered R^2."""
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.size < 2:
        raise ParameterError("need at least two points to fit a line")
    xm, ym = xv.mean(), yv.mean()
    sxx = float(((xv - xm) ** 2).sum())
    if sxx <= 0:
        raise ParameterError("degenerate fit: all x identical")
    slope = float(((xv - xm) * (yv - ym)).sum()) / sxx
    intercept = ym - slope * xm
    resid = yv - (slope * xv + intercept)
    sst = float(((yv - ym) ** 2).sum())
    r2 = 1.0 if sst == 0 else 1.0 - float((resid**2).sum()) / sst
    return FitResult(slope, float(intercept), float(r2), int(xv.size))


def origin_fit(x, y) -> FitResult:
    """Least-squares line through the origin; uncentered R^2."""
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.size < 2:
        raise ParameterError("need at least two points to fit a line")
    sxx = float((xv**2).sum())
    if sxx <= 0:
        raise ParameterError("degenerate fit: all x zero")
    slope = float((xv * yv).sum()) / sxx
    resid = yv - slope * xv
    ssy = float((yv**2).sum())
    r2 = 1.0 if ssy == 0 else 1.0 - float((resid**2).sum()) / ssy
    return FitResult(slope, 0.0, float(r2), int(xv.size))


@dataclass
class ThresholdResult:
    """Outcome of one ascending-grid threshold search."""

    value: float | None
    censored: bool
    at_floor: bool
    curve: list  # (probe value, score) in evaluation order

    @property
    def ok(self) -> bool:
        return not self.censored


def threshold_search(evaluate, grid, criterion: float, refinements: int = 3) -> ThresholdResult:
    """Smallest probe value whose score reaches criterion.

    Scans the ascending grid until the first pass, then bisects between
    the last failure and that pass at log midpoints. A sweep that never
    passes is censored; a pass at the first grid value is flagged
    at_floor since the true threshold may sit below the grid.
    """
    values = [float(v) for v in grid]
    if sorted(values) != values or len(values) < 2:
        raise ParameterError("threshold grid must be ascending with >= 2 points")
    curve = []
    last_fail = None
    first_pass = None
    for v in values:
        score = evaluate(v)
        curve.append((v, score))
        if score >= criterion:
            first_pass = v
            break
        last_fail = v
    if first_pass is None:
        return ThresholdResult(value=None, censored=True, at_floor=False, curve=curve)
    if last_fail is None:
        return ThresholdResult(value=first_pass, censored=False, at_floor=True, curve=curve)
    lo, hi = last_fail, first_pass
    for _ in range(refinements):
        mid = math.sqrt(lo * hi)
        score = evaluate(mid)
        curve.append((mid, score))
        if score >= criterion:
            hi = mid
        else:
            lo = mid
    return ThresholdResult(value=hi, censored=False, at_floor=False, curve=curve)


@dataclass
class ExperimentResult:
    """Sweep table, raw trials, fits, and a JSON-ready summary."""

    name: str
    config: dict
    sweep_columns: tuple
    sweep_rows: list
    trial_columns: tuple
    trial_rows: list
    fits: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def to_summary(self) -> dict:
        out = dict(self.summary)
        out["experiment"] = self.name
        out["config"] = self.config
        out["fits"] = {k: f.to_dict() for k, f in self.fits.items()}
        return out


def _config_snapshot(cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if v is None or isinstance(v, (int, float, str, bool, list))}


# -- letter thresholds vs eccentricity ----------------------------------------

ANSTIS_DEFAULTS = {
    "criterion": 0.75,
    "n_trials": 16,
    "jitter_fraction": 1.0,
    "noise_amplitude": 0.03,
    "contrast": 0.45,
    "size_grid_lo": 1.3,
    "size_grid_hi": 6.0,
    "size_grid_points": 6,
    "refinements": 3,
    "seed": 0,
    "threads": None,
}

ANSTIS_SWEEP_COLUMNS = (
    "eccentricity_arcsec",
    "local_spacing_arcsec",
    "threshold_arcsec",
    "censored",
    "at_floor",
    "in_plateau",
)
ANSTIS_TRIAL_COLUMNS = (
    "eccentricity_arcsec",
    "size_arcsec",
    "trial",
    "letter",
    "response",
    "correct",
    "dx_arcsec",
    "dy_arcsec",
)


def anstis_experiment(alphabet, eccentricities, spec: LatticeSpec, bank: TemplateBank,
                      config=None) -> ExperimentResult:
    """Threshold letter size at each eccentricity, fit size vs eccentricity.

    A probe letter is placed at the eccentricity with sub-spacing position
    jitter plus pixel noise and classified nearest-neighbor against clean
    renders of the whole alphabet at the same size and place. The reported
    threshold is the smallest size reaching the accuracy criterion.

    The fitted line uses eccentricities beyond the uniform center only;
    thresholds inside it (where the local spacing is flat) feed the
    plateau coefficient of variation instead.
    """
    cfg = _merge_config(ANSTIS_DEFAULTS, config)
    threads = resolve_threads(cfg["threads"])
    alphabet = [str(g) for g in alphabet]
    for g in alphabet:
        _glyph_cells(g)
    ppd = bank.pixels_per_degree
    raster_floor = RASTER_FLOOR_PX * ARCSEC_PER_DEGREE / ppd
    seed = int(cfg["seed"])
    criterion = float(cfg["criterion"])
    n_trials = int(cfg["n_trials"])

    eccs = sorted(_arcsec(e) for e in eccentricities)
    plateau_limit = spec.n_x * spec.s_min.arcsec * (1.0 + 1e-9)
    sweep_rows = []
    trial_rows = []

    for ci, ecc in enumerate(eccs):
        s_loc = local_sample_spacing(spec, ecc).arcsec

        size_lo = max(cfg["size_grid_lo"] * s_loc, raster_floor * 1.02)
        size_hi = cfg["size_grid_hi"] * s_loc
        if size_lo >= size_hi:
            raise ConfigError(
                f"size grid empty at eccentricity {ecc:g}: raster floor {raster_floor:g} arcsec"
            )
        grid = np.geomspace(size_lo, size_hi, int(cfg["size_grid_points"]))

        # canvas large enough for the biggest probe plus the coarsest kernel
        reach = size_hi / 2.0 + spec.s_max.arcsec + 4.0 * s_loc
        canvas_args = (ecc - reach, ecc + reach, -reach, reach, ppd)

        def render_clean(glyph, size):
            canvas = make_canvas(*canvas_args)
            canvas.place(render_letter(glyph, size, ppd, cfg["contrast"]), ecc, 0.0)
            return extract(canvas.image(ppd), spec, bank)

        def evaluate(size):
            renders = _map_indexed(lambda i: render_clean(alphabet[i], size),
                                   len(alphabet), threads)
            gallery = list(zip(alphabet, renders))
            size_key = _float_key(size)

            def trial(t):
                rng = np.random.default_rng([seed, ci, size_key, t])
                letter = alphabet[int(rng.integers(len(alphabet)))]
                dx, dy = rng.uniform(-1.0, 1.0, 2) * cfg["jitter_fraction"] * s_loc
                canvas = make_canvas(*canvas_args)
                canvas.place(render_letter(letter, size, ppd, cfg["contrast"]), ecc + dx, dy)
                canvas.add_noise(rng, cfg["noise_amplitude"])
                probe = extract(canvas.image(ppd), spec, bank)
                response = nn_classify(probe, gallery, fragment_similarity)
                return letter, response, dx, dy

            outcomes = _map_indexed(trial, n_trials, threads)
            correct = 0
            for t, (letter, response, dx, dy) in enumerate(outcomes):
                ok = response == letter
                correct += ok
                trial_rows.append((ecc, float(size), t, letter, response, ok, float(dx), float(dy)))
            return correct / n_trials

        found = threshold_search(evaluate, grid, criterion, int(cfg["refinements"]))
        sweep_rows.append((
            ecc,
            s_loc,
            found.value,
            found.censored,
            found.at_floor,
            ecc <= plateau_limit,
        ))

    fits = {}
    summary = {
        "criterion": criterion,
        "n_trials": n_trials,
        "seed": seed,
        "plateau_limit_arcsec": float(spec.n_x * spec.s_min.arcsec),
        "alphabet": alphabet,
    }
    plateau = [r for r in sweep_rows if r[5] and not r[3]]
    linear = [r for r in sweep_rows if not r[5] and not r[3]]
    if plateau:
        vals = np.array([r[2] for r in plateau])
        mean = float(vals.mean())
        summary["plateau_mean_arcsec"] = mean
        summary["plateau_cv"] = float(vals.std() / mean) if mean > 0 else None
        summary["plateau_points"] = len(plateau)
    if len(linear) >= 2:
        fits["threshold_vs_eccentricity"] = linear_fit(
            [r[0] for r in linear], [r[2] for r in linear]
        )
    summary["censored_points"] = sum(1 for r in sweep_rows if r[3])

    return ExperimentResult(
        name="anstis",
        config=_config_snapshot(cfg),
        sweep_columns=ANSTIS_SWEEP_COLUMNS,
        sweep_rows=sweep_rows,
        trial_columns=ANSTIS_TRIAL_COLUMNS,
        trial_rows=trial_rows,
        fits=fits,
        summary=summary,
    )


# -- scale invariance ----------------------------------------------------------


@dataclass
class BlobField:
    """A fixed set of oriented Gabor blobs, renderable at any scale factor.

    Rendering multiplies every position, wavelength, and envelope width by
    the factor, so the scaled scene is exact rather than resampled and the
    content scale is known in closed form (factor times content_scale).
    """

    blobs: np.ndarray  # (n, 4): x, y, orientation, phase
    content_scale: float  # arcsec; blob wavelength at factor 1
    amplitude: float

    def render(self, factor: float, canvas_half: float, pixels_per_degree: float) -> RetinalImage:
        pitch = ARCSEC_PER_DEGREE / pixels_per_degree
        n_half = int(math.ceil(canvas_half / pitch))
        n = 2 * n_half + 1
        arr = np.full((n, n), 0.5)
        wavelength = factor * self.content_scale
        sigma = 0.5 * wavelength
        win = int(math.ceil(3.5 * sigma / pitch))
        for bx, by, theta, phase in self.blobs:
            cx, cy = factor * bx, factor * by
            cc = int(round(cx / pitch)) + n_half
            cr = int(round(cy / pitch)) + n_half
            r0, r1 = max(0, cr - win), min(n, cr + win + 1)
            c0, c1 = max(0, cc - win), min(n, cc + win + 1)
            if r0 >= r1 or c0 >= c1:
                continue
            u = (np.arange(c0, c1) - n_half) * pitch - cx
            v = (np.arange(r0, r1) - n_half) * pitch - cy
            uu, vv = np.meshgrid(u, v)
            env = np.exp(-(uu**2 + vv**2) / (2.0 * sigma**2))
            carrier = np.cos(
                2.0 * math.pi * (uu * math.cos(theta) + vv * math.sin(theta)) / wavelength + phase
            )
            arr[r0:r1, c0:c1] += self.amplitude * env * carrier
        np.clip(arr, 0.0, 1.0, out=arr)
        return RetinalImage(pixels=arr, pixels_per_degree=pixels_per_degree, fixation=(0.0, 0.0))


def sample_blob_field(spec: LatticeSpec, band_index: int, rng, n_blobs: int = 40,
                      extent_fraction: float = 0.8, amplitude: float = 0.22) -> BlobField:
    """Scatter blobs at one band's scale across that band's position span."""
    s_c = spec.bands[band_index].radius.arcsec
    r_max = extent_fraction * spec.n_x * s_c
    radii = r_max * np.sqrt(rng.uniform(0.0, 1.0, n_blobs))
    angles = rng.uniform(0.0, 2.0 * math.pi, n_blobs)
    blobs = np.column_stack([
        radii * np.cos(angles),
        radii * np.sin(angles),
        rng.uniform(0.0, math.pi, n_blobs),
        rng.uniform(0.0, 2.0 * math.pi, n_blobs),
    ])
    return BlobField(blobs=blobs, content_scale=s_c, amplitude=amplitude)


SCALE_DEFAULTS = {
    "threshold": 0.8,
    "seed": 0,
    "band_index": None,  # default: middle band
    "n_blobs": 120,
    "extent_fraction": 0.8,
    "amplitude": 0.22,
    "threads": None,
}

SCALE_SWEEP_COLUMNS = ("factor", "content_scale_arcsec", "in_range", "similarity")


def scale_invariance_curve(stim, factors, spec: LatticeSpec, bank: TemplateBank,
                           config=None) -> ExperimentResult:
    """Similarity of the scale-pooled signature between original and scaled scenes.

    stim may be a BlobField (scaled analytically; pass None to sample one
    from the config seed) or a Stimulus (scaled by resampling about the
    fixation). The signature pools activations across the scale axis, so
    in-range scalings shift energy between bands without changing it, and
    the similarity collapses once the content leaves the ladder.
    """
    cfg = _merge_config(SCALE_DEFAULTS, config)
    ppd = bank.pixels_per_degree
    factors = sorted(float(f) for f in factors)
    if any(f <= 0 for f in factors):
        raise ParameterError("scale factors must be positive")

    if stim is None:
        band_index = cfg["band_index"]
        if band_index is None:
            band_index = spec.n_bands // 2
        rng = np.random.default_rng([int(cfg["seed"]), 91, band_index])
        stim = sample_blob_field(spec, band_index, rng,
                                 n_blobs=int(cfg["n_blobs"]),
                                 extent_fraction=float(cfg["extent_fraction"]),
                                 amplitude=float(cfg["amplitude"]))

    if isinstance(stim, BlobField):
        content_scale = stim.content_scale
        f_max = max(max(factors), 1.0)
        content_reach = f_max * (cfg["extent_fraction"] * spec.n_x * content_scale
                                 + 3.5 * 0.5 * content_scale)
        canvas_half = max(spec.extent.arcsec + 1.2 * spec.s_max.arcsec, content_reach) + 8.0

        def render(factor):
            return stim.render(factor, canvas_half, ppd)
    else:
        content_scale = _arcsec(stim.size) / 2.0
        half = spec.extent.arcsec + 1.2 * spec.s_max.arcsec
        base_canvas = make_canvas(-half, half, -half, half, ppd)
        base_canvas.place(stim, 0.0, 0.0)
        base = base_canvas.image(ppd)

        def render(factor):
            return base if factor == 1.0 else scale_image(base, factor)

    def pooled(factor):
        frag = extract(render(factor), spec, bank)
        return frag.activations.max(axis=0).ravel()

    reference = pooled(1.0)
    threshold = float(cfg["threshold"])
    s_lo, s_hi = spec.s_min.arcsec, spec.s_max.arcsec
    sweep_rows = []
    for f in factors:
        sim = overlap_similarity(pooled(f), reference) if f != 1.0 else 1.0
        content = f * content_scale
        in_range = s_lo * (1.0 - 1e-9) <= content <= s_hi * (1.0 + 1e-9)
        sweep_rows.append((f, content, in_range, float(sim)))

    passing = [r[0] for r in sweep_rows if r[3] >= threshold]
    summary = {
        "threshold": threshold,
        "content_scale_arcsec": float(content_scale),
        "predicted_range": [s_lo / content_scale, s_hi / content_scale],
        "measured_passing_factors": passing,
        "in_range_min_similarity": min((r[3] for r in sweep_rows if r[2]), default=None),
        "out_of_range_max_similarity": max((r[3] for r in sweep_rows if not r[2]), default=None),
        "seed": int(cfg["seed"]),
    }
    return ExperimentResult(
        name="scale",
        config=_config_snapshot(cfg),
        sweep_columns=SCALE_SWEEP_COLUMNS,
        sweep_rows=sweep_rows,
        trial_columns=(),
        trial_rows=[],
        fits={},
        summary=summary,
    )


# -- translation invariance ----------------------------------------------------

TRANSLATION_DEFAULTS = {
    "threshold": 0.8,
    "seed": 0,
    "shift_step_fraction": 0.5,   # of the band radius
    "max_shift_fraction": 1.5,    # of n_x * band radius
    "stim_extent_fraction": 3.0,  # of the band radius
    "stim_amplitude": 0.3,
    "threads": None,
}

TRANSLATION_TRIAL_COLUMNS = ("band_index", "band_radius_arcsec", "shift_arcsec", "similarity")
TRANSLATION_SWEEP_COLUMNS = ("band_index", "band_radius_arcsec", "half_range_arcsec", "n_shifts")


def _band_level_index(spec: LatticeSpec, band: ScaleBand) -> int:
    radii = spec.level_radii_arcsec()
    target = band.radius.arcsec
    for i, r in enumerate(radii):
        if abs(r - target) <= 1e-6 * target:
            return i
    raise ParameterError(f"band radius {target:g} arcsec is not a lattice level")


def _banded_noise(band: ScaleBand, extent_fraction: float, amplitude: float,
                  ppd: float, rng) -> Stimulus:
    raw = noise_patch(extent_fraction * band.radius.arcsec, ppd, rng)
    stim = bandpass_stimulus(raw, band)
    dev = stim.deviation
    peak = float(np.abs(dev).max())
    if peak > 0:
        stim.pixels = np.clip(0.5 + dev * (amplitude / peak), 0.0, 1.0)
    return stim


def translation_invariance_curve(band: ScaleBand, shifts, spec: LatticeSpec,
                                 bank: TemplateBank, config=None,
                                 stimulus: Stimulus | None = None) -> ExperimentResult:
    """Similarity of one band's position-pooled profile under shifts.

    The stimulus (band-passed noise by default) starts at the center and
    slides outward; the band's activations are max-pooled over position,
    so similarity holds until the content leaves the band's sample span.
    The half range is the last shift still at or above threshold.
    """
    cfg = _merge_config(TRANSLATION_DEFAULTS, config)
    ppd = bank.pixels_per_degree
    level = _band_level_index(spec, band)
    shifts = sorted(float(_arcsec(d)) for d in shifts)
    if shifts[0] != 0.0:
        shifts = [0.0] + shifts

    if stimulus is None:
        rng = np.random.default_rng([int(cfg["seed"]), 47, band.index])
        stimulus = _banded_noise(band, float(cfg["stim_extent_fraction"]),
                                 float(cfg["stim_amplitude"]), ppd, rng)

    s = band.radius.arcsec
    half_stim = _arcsec(stimulus.size) / 2.0
    x_reach = shifts[-1] + half_stim + 2.0 * s
    y_reach = half_stim + 2.0 * s

    def pooled_profile(shift):
        canvas = make_canvas(-x_reach, x_reach, -y_reach, y_reach, ppd)
        canvas.place(stimulus, shift, 0.0)
        frag = extract(canvas.image(ppd), spec, bank)
        return frag.activations[level].max(axis=0)

    reference = pooled_profile(0.0)
    threshold = float(cfg["threshold"])
    rows = []
    for shift in shifts:
        sim = 1.0 if shift == 0.0 else overlap_similarity(pooled_profile(shift), reference)
        rows.append((band.index, s, shift, float(sim)))
    # half range: last shift of the initial run at or above threshold
    half_range = 0.0
    for _, _, shift, sim in rows:
        if sim >= threshold:
            half_range = shift
        else:
            break

    summary = {
        "threshold": threshold,
        "band_index": band.index,
        "band_radius_arcsec": s,
        "half_range_arcsec": half_range,
        "predicted_half_range_arcsec": spec.n_x * s,
        "seed": int(cfg["seed"]),
    }
    return ExperimentResult(
        name="translation_band",
        config=_config_snapshot(cfg),
        sweep_columns=TRANSLATION_SWEEP_COLUMNS,
        sweep_rows=[(band.index, s, half_range, len(rows))],
        trial_columns=TRANSLATION_TRIAL_COLUMNS,
        trial_rows=rows,
        fits={},
        summary=summary,
    )


def translation_experiment(spec: LatticeSpec, bank: TemplateBank, config=None) -> ExperimentResult:
    """Half-range vs band radius across all bands, fit through the origin."""
    cfg = _merge_config(TRANSLATION_DEFAULTS, config)
    sweep_rows = []
    trial_rows = []
    for band in spec.bands:
        s = band.radius.arcsec
        step = cfg["shift_step_fraction"] * s
        top = cfg["max_shift_fraction"] * spec.n_x * s
        shifts = np.arange(0.0, top + step / 2.0, step)
        curve = translation_invariance_curve(band, shifts, spec, bank, cfg)
        sweep_rows.extend(curve.sweep_rows)
        trial_rows.extend(curve.trial_rows)

    radii = [r[1] for r in sweep_rows]
    ranges = [r[2] for r in sweep_rows]
    fit = origin_fit(radii, ranges)
    summary = {
        "threshold": float(cfg["threshold"]),
        "n_x": spec.n_x,
        "slope_over_n_x": fit.slope / spec.n_x,
        "half_ranges_nondecreasing": all(
            ranges[i] <= ranges[i + 1] + 1e-9 for i in range(len(ranges) - 1)
        ),
        "seed": int(cfg["seed"]),
    }
    return ExperimentResult(
        name="translation",
        config=_config_snapshot(cfg),
        sweep_columns=TRANSLATION_SWEEP_COLUMNS,
        sweep_rows=sweep_rows,
        trial_columns=TRANSLATION_TRIAL_COLUMNS,
        trial_rows=trial_rows,
        fits={"half_range_vs_radius": fit},
        summary=summary,
    )


# -- crowding -------------------------------------------------------------------

CROWDING_DEFAULTS = {
    "criterion": 0.75,
    "n_trials": 20,
    "jitter_fraction": 0.25,
    # zero by default: the local contrast normalization is scale-free, so
    # any pixel noise in blank regions renormalizes to full-scale energy
    # and buries the restricted readout
    "noise_amplitude": 0.0,
    "contrast": 0.45,
    "letter_scale": 2.5,     # letter height in units of the readout spacing
    "target_column": 7.0,    # nominal target position in readout-spacing units
    "sep_grid_lo": 3.0,      # separation grid in readout-spacing units
    "sep_grid_hi": 18.0,
    "sep_grid_points": 7,
    "refinements": 3,
    "seed": 0,
    "threads": None,
}

CROWDING_SWEEP_COLUMNS = (
    "eccentricity_arcsec",
    "read_stage",
    "readout_scale_arcsec",
    "critical_separation_arcsec",
    "censored",
    "at_floor",
    "isolated_accuracy",
)
CROWDING_TRIAL_COLUMNS = (
    "eccentricity_arcsec",
    "separation_arcsec",
    "trial",
    "target",
    "flanker",
    "read_stage",
    "response",
    "correct",
)


def _readout_level(spec: LatticeSpec, ecc: float, target_column: float) -> int:
    """Lattice level whose spacing puts the target at the configured column."""
    want = ecc / target_column
    radii = spec.level_radii_arcsec()
    best = min(range(len(radii)), key=lambda i: abs(math.log(radii[i] / want)))
    return best


def _restrict_stage(arr_data: np.ndarray, stage: int, level: int,
                    cols: range, rows: range) -> np.ndarray:
    """Slice a stage array down to the units covering the given level-1 span."""
    ux0 = stage_unit_for_column(stage, cols.start)
    ux1 = stage_unit_for_column(stage, cols.stop - 1)
    uy0 = stage_unit_for_column(stage, rows.start)
    uy1 = stage_unit_for_column(stage, rows.stop - 1)
    return arr_data[level, ux0 : ux1 + 1, uy0 : uy1 + 1, :].ravel()


def crowding_experiment(target, flanker, eccentricities, read_stage,
                        spec: LatticeSpec, bank: TemplateBank, stages,
                        config=None) -> ExperimentResult:
    """Critical target-flanker separation vs eccentricity, per read stage.

    The target letter sits at the eccentricity; a flanking pair of the
    same glyph sits at the probed center-to-center separation, one on
    each side. Identification reads one pooled stage restricted to the
    units covering the target's lattice columns, so the flankers only
    interfere while they share a pooling window with that readout; the
    separation where accuracy recovers therefore tracks the stage's
    window span.

    Args:
        target: alphabet of target glyphs.
        flanker: flanker glyphs, or None to draw flankers from the target
            alphabet (never equal to the trial's target).
        read_stage: stage number or list of stage numbers to read.
        stages: pooling chain (position-only pooling; scale pooling would
            break the level bookkeeping and is rejected).
    """
    cfg = _merge_config(CROWDING_DEFAULTS, config)
    threads = resolve_threads(cfg["threads"])
    alphabet = [str(g) for g in target]
    flankers = [str(g) for g in flanker] if flanker else None
    for g in alphabet + (flankers or []):
        _glyph_cells(g)
    read_stages = sorted({int(read_stage)} if np.isscalar(read_stage) else {int(m) for m in read_stage})
    stages = list(stages)
    if any(st.scale_pool for st in stages):
        raise ConfigError("crowding readout needs a position-only pooling chain")
    n_pools = max(read_stages) - 1
    if n_pools > len(stages):
        raise ConfigError(f"read stage {max(read_stages)} needs {n_pools} pooling stages")
    if min(read_stages) < 1:
        raise ConfigError("read stages are numbered from 1")
    if spec.dimensionality.value != "2d":
        raise ConfigError("crowding runs on a 2D lattice")

    ppd = bank.pixels_per_degree
    seed = int(cfg["seed"])
    criterion = float(cfg["criterion"])
    n_trials = int(cfg["n_trials"])
    chain = stages[:n_pools]

    eccs = sorted(_arcsec(e) for e in eccentricities)
    sweep_rows = []
    trial_rows = []
    fits = {}

    for ci, ecc in enumerate(eccs):
        level = _readout_level(spec, ecc, float(cfg["target_column"]))
        s_read = spec.level_radii_arcsec()[level]
        size = cfg["letter_scale"] * s_read

        # level-index spans covered by the target's ink, in array positions
        half_cols = size / 2.0 / s_read
        center_col = ecc / s_read
        i_lo = int(math.ceil(center_col - half_cols - 1e-9))
        i_hi = int(math.floor(center_col + half_cols + 1e-9))
        cols = range(i_lo + spec.n_x, i_hi + spec.n_x + 1)
        j_span = int(math.floor(half_cols + 1e-9))
        rows_r = range(spec.n_x - j_span, spec.n_x + j_span + 1)

        sep_hi = cfg["sep_grid_hi"] * s_read
        reach = sep_hi + size + spec.s_max.arcsec + 4.0 * s_read
        canvas_args = (ecc - reach, ecc + reach, -reach, reach, ppd)

        def signatures(image):
            frag = extract(image, spec, bank)
            arrays, _ = run_hierarchy(frag, chain)
            return {
                m: _restrict_stage(arrays[m - 1].data, m, level, cols, rows_r)
                for m in read_stages
            }

        def probe_sigs(target_l, flanker_l, sep, rng):
            dx, dy = rng.uniform(-1.0, 1.0, 2) * cfg["jitter_fraction"] * s_read
            canvas = make_canvas(*canvas_args)
            canvas.place(render_letter(target_l, size, ppd, cfg["contrast"]), ecc + dx, dy)
            if flanker_l is not None:
                # symmetric flanking pair, one on each side of the target
                glyph = render_letter(flanker_l, size, ppd, cfg["contrast"])
                canvas.place(glyph, ecc - sep + dx, dy)
                canvas.place(glyph, ecc + sep + dx, dy)
            canvas.add_noise(rng, cfg["noise_amplitude"])
            return signatures(canvas.image(ppd))

        gallery = {}
        for g in alphabet:
            canvas = make_canvas(*canvas_args)
            canvas.place(render_letter(g, size, ppd, cfg["contrast"]), ecc, 0.0)
            sigs = signatures(canvas.image(ppd))
            for m in read_stages:
                gallery.setdefault(m, []).append((g, sigs[m]))

        def run_condition(sep, sep_tag):
            """Accuracy per read stage at one separation (None = isolated)."""
            key = 0 if sep is None else _float_key(sep)

            def trial(t):
                rng = np.random.default_rng([seed, ci, key, t])
                target_l = alphabet[int(rng.integers(len(alphabet)))]
                if sep is None:
                    flanker_l = None
                elif flankers is not None:
                    flanker_l = flankers[int(rng.integers(len(flankers)))]
                else:
                    others = [g for g in alphabet if g != target_l]
                    flanker_l = others[int(rng.integers(len(others)))]
                sigs = probe_sigs(target_l, flanker_l, sep, rng)
                responses = {
                    m: nn_classify(sigs[m], gallery[m], overlap_similarity)
                    for m in read_stages
                }
                return target_l, flanker_l, responses

            outcomes = _map_indexed(trial, n_trials, threads)
            correct = {m: 0 for m in read_stages}
            for t, (target_l, flanker_l, responses) in enumerate(outcomes):
                for m in read_stages:
                    ok = responses[m] == target_l
                    correct[m] += ok
                    trial_rows.append((
                        ecc, sep_tag, t, target_l,
                        flanker_l if flanker_l is not None else "",
                        m, responses[m], ok,
                    ))
            return {m: correct[m] / n_trials for m in read_stages}

        isolated = run_condition(None, None)

        memo = {}

        def accuracies(sep):
            if sep not in memo:
                memo[sep] = run_condition(sep, float(sep))
            return memo[sep]

        grid = np.geomspace(cfg["sep_grid_lo"] * s_read, sep_hi,
                            int(cfg["sep_grid_points"]))
        for m in read_stages:
            found = threshold_search(lambda v: accuracies(v)[m], grid,
                                     criterion, int(cfg["refinements"]))
            sweep_rows.append((
                ecc, m, s_read, found.value, found.censored, found.at_floor,
                isolated[m],
            ))

    summary = {
        "criterion": criterion,
        "n_trials": n_trials,
        "read_stages": read_stages,
        "seed": seed,
        "alphabet": alphabet,
    }
    slopes = {}
    for m in read_stages:
        pts = [(r[0], r[3]) for r in sweep_rows if r[1] == m and not r[4]]
        if len(pts) >= 2:
            fit = linear_fit([p[0] for p in pts], [p[1] for p in pts])
            fits[f"stage_{m}"] = fit
            slopes[m] = fit.slope
    summary["slope_per_stage"] = {str(m): slopes.get(m) for m in read_stages}
    ratios = []
    for a, b in zip(read_stages, read_stages[1:]):
        if a in slopes and b in slopes and slopes[a] != 0:
            ratios.append({"stages": [a, b], "ratio": slopes[b] / slopes[a]})
    summary["consecutive_slope_ratios"] = ratios
    summary["censored_points"] = sum(1 for r in sweep_rows if r[4])

    return ExperimentResult(
        name="crowding",
        config=_config_snapshot(cfg),
        sweep_columns=CROWDING_SWEEP_COLUMNS,
        sweep_rows=sweep_rows,
        trial_columns=CROWDING_TRIAL_COLUMNS,
        trial_rows=trial_rows,
        fits=fits,
        summary=summary,
    )
