"""Pool-and-decimate hierarchy over activation fragments.

Stages alternate template matching (s_stage, optional) with pooling
(c_pool): each pooling step reduces every position axis by 2x2 windows of
stride 2 (ceil widths, the last window replicating the edge when the width
is odd) and can also pool adjacent scale levels pairwise. A unit at stage
k therefore covers 2**(k-1) stage-1 lattice columns:

    stage-k unit i  <->  stage-1 columns [2**(k-1) * i, 2**(k-1) * (i+1))

and the receptive-field spacing per band doubles at every stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParameterError
from .fragment import IPFragment

_EPS = 1e-12


@dataclass(frozen=True)
class StageSpec:
    """One pooling stage.

    pool: "max" (default) or "mean".
    scale_pool: also merge adjacent scale levels pairwise.
    name: optional label carried into summaries (e.g. cortical-area names).
    """

    pool: str = "max"
    scale_pool: bool = True
    name: str | None = None

    def __post_init__(self):
        if self.pool not in ("max", "mean"):
            raise ConfigError(f"unknown pool function {self.pool!r}")


@dataclass(frozen=True)
class StageArray:
    """Activations at one stage of the hierarchy.

    data: (n_levels, w, n_channels) or (n_levels, w, w, n_channels).
    spacing_arcsec: per-level receptive-field spacing (doubles per stage).
    stage: 1 for the input lattice array, incremented by each c_pool.
    """

    data: np.ndarray
    spacing_arcsec: tuple[float, ...]
    stage: int

    def __post_init__(self):
        if self.data.ndim not in (3, 4):
            raise ParameterError("stage data must be a 3D or 4D tensor")
        if len(self.spacing_arcsec) != self.data.shape[0]:
            raise ParameterError("one spacing per scale level is required")

    @property
    def n_levels(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def n_channels(self) -> int:
        return self.data.shape[-1]

    @property
    def spatial_axes(self) -> tuple[int, ...]:
        return (1, 2) if self.data.ndim == 4 else (1,)


@dataclass(frozen=True)
class Signature:
    """Flattened final-stage activations plus the shape they came from."""

    values: np.ndarray
    shape: tuple[int, ...]


def fragment_to_stage(f: IPFragment, level_spacings_arcsec=None) -> StageArray:
    """Wrap a fragment as the stage-1 array.

    Spacing defaults to 1.0 per level (unit: one stage-1 sample step); pass
    the lattice's level radii to track spacing in arcsec.
    """
    if level_spacings_arcsec is None:
        spacing = tuple(1.0 for _ in range(f.n_levels))
    else:
        spacing = tuple(float(v) for v in level_spacings_arcsec)
        if len(spacing) != f.n_levels:
            raise ParameterError("one spacing per scale level is required")
    return StageArray(data=f.activations.copy(), spacing_arcsec=spacing, stage=1)


def _decimate(a: np.ndarray, axis: int, pool: str) -> np.ndarray:
    """Pairwise stride-2 reduction with ceil width.

    The final window of an odd axis holds a single element, which equals
    the edge-replicated window under both max and mean.
    """
    n = a.shape[axis]
    starts = np.arange(0, n, 2)
    if pool == "max":
        return np.maximum.reduceat(a, starts, axis=axis)
    sums = np.add.reduceat(a, starts, axis=axis)
    counts = np.diff(np.append(starts, n)).astype(np.float64)
    shape = [1] * a.ndim
    shape[axis] = len(starts)
    return sums / counts.reshape(shape)


def c_pool(arr: StageArray, spec: StageSpec = StageSpec()) -> StageArray | None:
    """Apply one pooling stage; None signals the hierarchy to stop.

    Refuses (returns None) when any position axis is already under 2 wide.
    """
    if any(arr.data.shape[ax] < 2 for ax in arr.spatial_axes):
        return None
    data = arr.data
    for ax in arr.spatial_axes:
        data = _decimate(data, ax, spec.pool)
    spacing = tuple(2.0 * v for v in arr.spacing_arcsec)
    if spec.scale_pool and data.shape[0] >= 2:
        data = _decimate(data, 0, spec.pool)
        merged = []
        for k in range(0, len(spacing), 2):
            pair = spacing[k : k + 2]
            merged.append(max(pair))
        spacing = tuple(merged)
    return StageArray(data=data, spacing_arcsec=spacing, stage=arr.stage + 1)


def s_stage(arr: StageArray, templates) -> StageArray:
    """Template matching: the channel axis becomes the template index.

    Each template is a (th, tw, n_channels) tensor (or (tw, n_channels) for
    1D arrays) slid over every position of every scale level; the response
    is <patch, t> / max(|patch|^2, |t|^2, eps), which is exactly 1 when the
    patch equals the stored template and stays in [0, 1] for nonnegative
    inputs. Spatial extent shrinks to the valid window range.
    """
    templates = [np.asarray(t, dtype=np.float64) for t in templates]
    if not templates:
        raise ConfigError("at least one template is required")
    ndim_needed = 3 if arr.data.ndim == 4 else 2
    shape0 = templates[0].shape
    for t in templates:
        if t.ndim != ndim_needed:
            raise ConfigError(
                f"templates for this array must have {ndim_needed} axes"
            )
        if t.shape != shape0:
            raise ConfigError("all stage templates must share one shape")
    if shape0[-1] != arr.n_channels:
        raise ConfigError(
            f"template channel depth {shape0[-1]} != array depth {arr.n_channels}"
        )
    if any(
        t_extent > arr.data.shape[ax]
        for t_extent, ax in zip(shape0[:-1], arr.spatial_axes)
    ):
        raise ConfigError("template spatial extent exceeds the array width")

    tmat = np.stack([t.ravel() for t in templates], axis=0)  # (K, patch)
    tnorm2 = np.sum(tmat * tmat, axis=1)

    if arr.data.ndim == 4:
        th, tw, _ = shape0
        windows = np.lib.stride_tricks.sliding_window_view(
            arr.data, (th, tw, arr.n_channels), axis=(1, 2, 3)
        )  # (n_s, H', W', 1, th, tw, C)
        patches = windows.reshape(windows.shape[0], windows.shape[1], windows.shape[2], -1)
    else:
        tw, _ = shape0
        windows = np.lib.stride_tricks.sliding_window_view(
            arr.data, (tw, arr.n_channels), axis=(1, 2)
        )  # (n_s, W', 1, tw, C)
        patches = windows.reshape(windows.shape[0], windows.shape[1], -1)

    pnorm2 = np.sum(patches * patches, axis=-1)
    dots = patches @ tmat.T
    denom = np.maximum(np.maximum(pnorm2[..., None], tnorm2), _EPS)
    out = dots / denom
    return StageArray(data=out, spacing_arcsec=arr.spacing_arcsec, stage=arr.stage)


def run_hierarchy(
    f: IPFragment,
    stages,
    stage_templates=None,
    level_spacings_arcsec=None,
):
    """Run the full chain and return (all stage arrays, final signature).

    Args:
        f: input fragment (becomes the stage-1 array).
        stages: sequence of StageSpec; an empty sequence returns the input
            as both the only array and the signature.
        stage_templates: optional per-stage template lists (None entries
            skip template matching for that stage).
        level_spacings_arcsec: lattice level radii for spacing bookkeeping.

    The chain stops early when c_pool refuses (position axes exhausted).
    """
    stages = list(stages)
    if stage_templates is None:
        stage_templates = [None] * len(stages)
    if len(stage_templates) != len(stages):
        raise ParameterError("one template list (or None) per stage is required")

    arr = fragment_to_stage(f, level_spacings_arcsec)
    arrays = [arr]
    for spec, templates in zip(stages, stage_templates):
        work = arrays[-1]
        if templates is not None:
            work = s_stage(work, templates)
        pooled = c_pool(work, spec)
        if pooled is None:
            break
        arrays.append(pooled)
    final = arrays[-1]
    return arrays, Signature(values=final.data.ravel().copy(), shape=final.data.shape)


def stage_rf_slope(stage: int, slope: float) -> float:
    """Receptive-field growth slope seen at a stage: slope * 2**(stage-1)."""
    if stage < 1:
        raise ParameterError("stages are numbered from 1")
    return slope * 2.0 ** (stage - 1)


def stage_column_span(stage: int, index: int) -> range:
    """Stage-1 columns covered by one unit of the given stage."""
    if stage < 1:
        raise ParameterError("stages are numbered from 1")
    w = 2 ** (stage - 1)
    return range(w * index, w * (index + 1))


def stage_unit_for_column(stage: int, column: int) -> int:
    """Inverse of stage_column_span: the unit covering a stage-1 column."""
    if stage < 1:
        raise ParameterError("stages are numbered from 1")
    return column // (2 ** (stage - 1))


def sample_stage_templates(arrays, count: int, extent: int, rng) -> list[np.ndarray]:
    """Sample patch templates from existing stage arrays.

    Patches of the given spatial extent are drawn uniformly over arrays,
    scale levels and positions; useful for seeding s_stage template sets
    from a stimulus corpus.
    """
    if count < 1:
        raise ParameterError("count must be >= 1")
    pool = [a.data if isinstance(a, StageArray) else np.asarray(a) for a in arrays]
    if not pool:
        raise ParameterError("at least one source array is required")
    out = []
    for _ in range(count):
        a = pool[int(rng.integers(len(pool)))]
        level = int(rng.integers(a.shape[0]))
        if a.ndim == 4:
            if a.shape[1] < extent or a.shape[2] < extent:
                raise ParameterError("extent exceeds source array width")
            r = int(rng.integers(a.shape[1] - extent + 1))
            c = int(rng.integers(a.shape[2] - extent + 1))
            out.append(a[level, r : r + extent, c : c + extent, :].copy())
        else:
            if a.shape[1] < extent:
                raise ParameterError("extent exceeds source array width")
            r = int(rng.integers(a.shape[1] - extent + 1))
            out.append(a[level, r : r + extent, :].copy())
    return out
