"""Run configuration: one JSON document driving every CLI command.

The document has five blocks (lattice, bank, stages, experiments) plus
run-wide settings (seed, out_dir, threads). Validation is strict: unknown
keys anywhere are rejected before any compute starts, so a typo cannot
silently fall back to a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigError
from .experiments import (
    ANSTIS_DEFAULTS,
    CROWDING_DEFAULTS,
    SCALE_DEFAULTS,
    TRANSLATION_DEFAULTS,
)
from .geometry import (
    Dimensionality,
    LatticeSpec,
    Region,
    ScaleBand,
    geometric_bands,
    marr_default_bands,
)
from .hierarchy import StageSpec

EXPERIMENT_NAMES = ("anstis", "scale", "translation", "crowding")


def default_config() -> dict:
    """The document used when --config is not given.

    Marr's five bands with slope 0.05 (21 samples per side, 41 per row) and
    a four-stage max-pooling chain; experiment blocks carry small
    desk-scale sweeps.
    """
    return {
        "lattice": {
            "bands": {"kind": "marr"},
            "slope": 0.05,
            "n_x": None,
            "region": "truncated_pyramid",
            "dimensionality": "1d",
        },
        "bank": {
            "n_theta": 4,
            "pixels_per_degree": 300.0,
            "wavelength_ratio": 1.0,
            "sigma_ratio": 0.5,
        },
        "stages": [
            {"pool": "max", "scale_pool": True},
            {"pool": "max", "scale_pool": True},
            {"pool": "max", "scale_pool": True},
            {"pool": "max", "scale_pool": True},
        ],
        "experiments": {},
        "seed": 0,
        "out_dir": "pyrafove_out",
        "threads": None,
    }


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return doc


def _check_keys(block: dict, allowed, where: str) -> None:
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")


def _number(value, where: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number")
    v = float(value)
    if positive and v <= 0:
        raise ConfigError(f"{where} must be positive")
    return v


def _build_bands(block, where: str):
    if isinstance(block, str):
        block = {"kind": block}
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be an object or a kind name")
    kind = block.get("kind", "radii" if "radii_arcsec" in block else None)
    if kind == "marr":
        _check_keys(block, {"kind"}, where)
        return marr_default_bands()
    if kind == "geometric":
        _check_keys(block, {"kind", "s_min_arcsec", "s_max_arcsec", "factor"}, where)
        try:
            return geometric_bands(
                _number(block["s_min_arcsec"], f"{where}.s_min_arcsec", positive=True),
                _number(block["s_max_arcsec"], f"{where}.s_max_arcsec", positive=True),
                _number(block["factor"], f"{where}.factor", positive=True),
            )
        except KeyError as e:
            raise ConfigError(f"{where} missing key {e.args[0]}") from e
    if kind == "radii":
        _check_keys(block, {"kind", "radii_arcsec"}, where)
        radii = block.get("radii_arcsec")
        if not isinstance(radii, list) or not radii:
            raise ConfigError(f"{where}.radii_arcsec must be a nonempty list")
        return tuple(
            ScaleBand(i, _as_angular(_number(r, f"{where}.radii_arcsec[{i}]", positive=True)))
            for i, r in enumerate(radii)
        )
    raise ConfigError(f"{where}.kind must be one of marr, geometric, radii")


def _as_angular(arcsec: float):
    from .geometry import AngularLength

    return AngularLength(arcsec)


def build_lattice_spec(block: dict) -> LatticeSpec:
    _check_keys(block, {"bands", "slope", "n_x", "region", "dimensionality"}, "lattice")
    if "bands" not in block or "slope" not in block:
        raise ConfigError("lattice needs at least 'bands' and 'slope'")
    bands = _build_bands(block["bands"], "lattice.bands")
    slope = _number(block["slope"], "lattice.slope", positive=True)
    n_x = block.get("n_x")
    if n_x is not None:
        if isinstance(n_x, bool) or not isinstance(n_x, int) or n_x < 1:
            raise ConfigError("lattice.n_x must be a positive integer or null")
    region_name = block.get("region", "truncated_pyramid")
    try:
        region = Region(region_name)
    except ValueError:
        raise ConfigError(
            f"lattice.region must be one of {[r.value for r in Region]}"
        ) from None
    dim_name = block.get("dimensionality", "1d")
    try:
        dim = Dimensionality(dim_name)
    except ValueError:
        raise ConfigError("lattice.dimensionality must be '1d' or '2d'") from None
    return LatticeSpec.create(bands, slope, n_x=n_x, region=region, dimensionality=dim)


def build_bank_params(block: dict) -> dict:
    _check_keys(
        block,
        {"n_theta", "pixels_per_degree", "wavelength_ratio", "sigma_ratio"},
        "bank",
    )
    n_theta = block.get("n_theta", 4)
    if isinstance(n_theta, bool) or not isinstance(n_theta, int) or n_theta < 1:
        raise ConfigError("bank.n_theta must be a positive integer")
    return {
        "n_theta": n_theta,
        "pixels_per_degree": _number(
            block.get("pixels_per_degree", 300.0), "bank.pixels_per_degree", positive=True
        ),
        "wavelength_ratio": _number(
            block.get("wavelength_ratio", 1.0), "bank.wavelength_ratio", positive=True
        ),
        "sigma_ratio": _number(
            block.get("sigma_ratio", 0.5), "bank.sigma_ratio", positive=True
        ),
    }


def build_stage_specs(blocks) -> list[StageSpec]:
    if not isinstance(blocks, list):
        raise ConfigError("stages must be a list")
    stages = []
    for i, block in enumerate(blocks):
        if not isinstance(block, dict):
            raise ConfigError(f"stages[{i}] must be an object")
        _check_keys(block, {"pool", "scale_pool", "name"}, f"stages[{i}]")
        pool = block.get("pool", "max")
        if pool not in ("max", "mean"):
            raise ConfigError(f"stages[{i}].pool must be 'max' or 'mean'")
        scale_pool = block.get("scale_pool", True)
        if not isinstance(scale_pool, bool):
            raise ConfigError(f"stages[{i}].scale_pool must be a boolean")
        stages.append(StageSpec(pool=pool, scale_pool=scale_pool, name=block.get("name")))
    return stages


_EXPERIMENT_EXTRA_KEYS = {
    # sweep definitions live in the block alongside the knobs the
    # experiment functions accept in their config argument
    "anstis": {"alphabet", "eccentricities_arcsec"},
    "scale": {"factors"},
    "translation": set(),
    "crowding": {"target", "flanker", "eccentricities_arcsec", "read_stages"},
}

_EXPERIMENT_DEFAULTS = {
    "anstis": ANSTIS_DEFAULTS,
    "scale": SCALE_DEFAULTS,
    "translation": TRANSLATION_DEFAULTS,
    "crowding": CROWDING_DEFAULTS,
}


def validate_experiment_block(name: str, block: dict) -> dict:
    if name not in EXPERIMENT_NAMES:
        raise ConfigError(
            f"unknown experiment {name!r}; expected one of {list(EXPERIMENT_NAMES)}"
        )
    if not isinstance(block, dict):
        raise ConfigError(f"experiments.{name} must be an object")
    allowed = set(_EXPERIMENT_DEFAULTS[name]) | _EXPERIMENT_EXTRA_KEYS[name]
    _check_keys(block, allowed, f"experiments.{name}")
    return dict(block)


@dataclass
class RunConfig:
    """Validated configuration: built objects plus the merged document."""

    lattice: LatticeSpec
    bank_params: dict
    stages: list[StageSpec]
    experiments: dict
    seed: int
    out_dir: str
    threads: int | None
    document: dict


def validate_config(doc: dict) -> RunConfig:
    _check_keys(
        doc,
        {"lattice", "bank", "stages", "experiments", "seed", "out_dir", "threads"},
        "config",
    )
    base = default_config()
    lattice = build_lattice_spec(doc.get("lattice", base["lattice"]))
    bank_params = build_bank_params(doc.get("bank", base["bank"]))
    stages = build_stage_specs(doc.get("stages", base["stages"]))

    experiments = {}
    exp_doc = doc.get("experiments", {})
    if not isinstance(exp_doc, dict):
        raise ConfigError("experiments must be an object")
    for name, block in exp_doc.items():
        experiments[name] = validate_experiment_block(name, block)

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    out_dir = doc.get("out_dir", base["out_dir"])
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("out_dir must be a nonempty string")
    threads = doc.get("threads")
    if threads is not None and (
        isinstance(threads, bool) or not isinstance(threads, int) or threads < 1
    ):
        raise ConfigError("threads must be a positive integer or null")

    merged = {
        # normalized echo in this module's own schema, so the document a
        # run reports can be fed back through --config unchanged
        "lattice": {
            "bands": {
                "kind": "radii",
                "radii_arcsec": [b.radius.arcsec for b in lattice.bands],
            },
            "slope": lattice.slope,
            "n_x": lattice.n_x,
            "region": lattice.region.value,
            "dimensionality": lattice.dimensionality.value,
        },
        "bank": dict(bank_params),
        "stages": [
            {"pool": s.pool, "scale_pool": s.scale_pool, "name": s.name} for s in stages
        ],
        "experiments": {k: dict(v) for k, v in sorted(experiments.items())},
        "seed": seed,
        "out_dir": out_dir,
        "threads": threads,
    }
    return RunConfig(
        lattice=lattice,
        bank_params=bank_params,
        stages=stages,
        experiments=experiments,
        seed=seed,
        out_dir=out_dir,
        threads=threads,
        document=merged,
    )
