"""Eccentricity-dependent visual sampling.

A library and CLI for building truncated-pyramid sampling lattices over
(position, scale), filtering images through per-band Gabor template banks,
pooling the resulting activation fragments through a decimating hierarchy,
and reproducing the quantitative predictions that fall out of the geometry
(uniform-acuity center size, linear acuity growth with eccentricity,
scale/translation invariance ranges, crowding distances).
"""

from .errors import (
    BandLookupError,
    CensoredSweepError,
    ConfigError,
    NyquistError,
    OutOfRegionError,
    ParameterError,
    PyrafoveError,
)
from .geometry import (
    AngularLength,
    Dimensionality,
    LatticeSpec,
    Region,
    SamplePoint,
    ScaleBand,
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
from .image import RetinalImage, load_image, save_pgm, scale_image, translate_image
from .templates import (
    FilterKernel,
    GaborParams,
    TemplateBank,
    make_bank,
    make_gabor,
    min_pixels_per_degree,
    respond,
)
from .fragment import (
    IPFragment,
    extract,
    fragment_similarity,
    read_fragment,
    scale_shift_fragment,
    shift_fragment,
    write_fragment,
)
from .hierarchy import (
    Signature,
    StageArray,
    StageSpec,
    c_pool,
    fragment_to_stage,
    run_hierarchy,
    s_stage,
    stage_column_span,
    stage_rf_slope,
    stage_unit_for_column,
)
from .experiments import (
    BlobField,
    ExperimentResult,
    FitResult,
    Stimulus,
    ThresholdResult,
    anstis_experiment,
    bandpass_stimulus,
    crowding_experiment,
    linear_fit,
    nn_classify,
    origin_fit,
    overlap_similarity,
    render_letter,
    scale_invariance_curve,
    threshold_search,
    translation_experiment,
    translation_invariance_curve,
)
from .config import RunConfig, default_config, load_config, validate_config

__version__ = "0.1.0"
