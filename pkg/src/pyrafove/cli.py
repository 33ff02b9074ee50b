"""Command-line surface.

    pyrafove lattice    --config FILE [--out DIR]
    pyrafove fragment   IMAGE [--fixation X,Y] --config FILE [--out DIR]
    pyrafove hierarchy  FRAGMENT --config FILE [--out DIR]
    pyrafove experiment NAME --config FILE [--seed N] [--out DIR] [--threads N]

Exit codes: 0 success, 1 usage or config problem, 2 I/O failure,
3 numeric failure (Nyquist violation, fully censored sweep). All outputs
are deterministic functions of (config, seed); flags override the config
file where both specify a value.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .config import (
    EXPERIMENT_NAMES,
    RunConfig,
    default_config,
    load_config,
    validate_config,
)
from .errors import (
    CensoredSweepError,
    ConfigError,
    NyquistError,
    ParameterError,
    PyrafoveError,
)
from .experiments import (
    anstis_experiment,
    crowding_experiment,
    scale_invariance_curve,
    translation_experiment,
)
from .fragment import extract, read_fragment, write_fragment
from .geometry import (
    build_lattice,
    lattice_csv_rows,
    LATTICE_CSV_HEADER,
    empirical_inverse_magnification,
    lower_boundary,
)
from .hierarchy import run_hierarchy
from .image import load_image
from .serialize import write_csv, write_json
from .svgplot import write_chart
from .templates import make_bank

BOUNDARY_CSV_HEADER = (
    "eccentricity_arcsec",
    "lattice_boundary_arcsec",
    "empirical_m_inverse_arcsec",
)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract reserves 2 for I/O
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="pyrafove", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pyrafove {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (defaults apply without it)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the config output directory")
        p.add_argument("--threads", type=int, help="worker threads (flags win)")

    p = sub.add_parser("lattice", help="write the sample lattice and region boundary")
    common(p)

    p = sub.add_parser("fragment", help="extract a fragment from a grayscale image")
    p.add_argument("image", help="8/16-bit grayscale PGM or PNG")
    p.add_argument(
        "--fixation",
        default="0,0",
        help="fixation offset from image center, arcsec, as X,Y (default 0,0)",
    )
    common(p)

    p = sub.add_parser("hierarchy", help="run the pooling chain over a fragment file")
    p.add_argument("fragment", help="fragment container written by `pyrafove fragment`")
    common(p)

    p = sub.add_parser("experiment", help="run one prediction experiment")
    p.add_argument("name", choices=EXPERIMENT_NAMES)
    common(p)

    return parser


def _load_run_config(args) -> RunConfig:
    doc = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        doc = dict(doc)
        doc["seed"] = args.seed
    if args.out is not None:
        doc = dict(doc)
        doc["out_dir"] = args.out
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        doc = dict(doc)
        doc["threads"] = args.threads
    return validate_config(doc)


def _ensure_out(cfg: RunConfig) -> str:
    try:
        os.makedirs(cfg.out_dir, exist_ok=True)
    except OSError as e:
        raise _IOFailure(f"cannot create output directory {cfg.out_dir}: {e}") from e
    return cfg.out_dir


class _IOFailure(RuntimeError):
    pass


def cmd_lattice(cfg: RunConfig) -> int:
    spec = cfg.lattice
    points = build_lattice(spec)
    out = _ensure_out(cfg)
    write_csv(os.path.join(out, "lattice.csv"), LATTICE_CSV_HEADER, lattice_csv_rows(points))

    # model boundary vs the empirical inverse-magnification line with the
    # same center value and asymptotic slope: the lines agree far out and
    # differ exactly over the flat center
    extent = spec.extent.arcsec
    n_rows = 81
    rows = []
    for i in range(n_rows):
        x = extent * i / (n_rows - 1)
        model = lower_boundary(x, spec).arcsec
        emp = empirical_inverse_magnification(
            x, spec.s_min.arcsec, spec.slope * 3600.0 / spec.s_min.arcsec
        )
        rows.append((x, model, emp))
    write_csv(os.path.join(out, "region_boundary.csv"), BOUNDARY_CSV_HEADER, rows)
    print(f"lattice: {len(points)} points, {spec.n_levels} levels -> {out}")
    return 0


def _parse_fixation(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError("--fixation must be X,Y in arcsec")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError("--fixation must be numeric X,Y") from None


def cmd_fragment(cfg: RunConfig, image_path: str, fixation: tuple[float, float]) -> int:
    spec = cfg.lattice
    bank = make_bank(spec, **cfg.bank_params)
    try:
        image = load_image(
            image_path, cfg.bank_params["pixels_per_degree"], fixation=fixation
        )
    except (OSError, ValueError) as e:
        raise _IOFailure(f"cannot decode {image_path}: {e}") from e
    frag = extract(image, spec, bank)
    out = _ensure_out(cfg)
    path = os.path.join(out, "fragment.ipf")
    write_fragment(frag, path)
    print(
        f"fragment: levels x width = {frag.activations.shape[0]} x "
        f"{frag.activations.shape[1]}, wrote {path}"
    )
    return 0


def cmd_hierarchy(cfg: RunConfig, fragment_path: str) -> int:
    try:
        frag = read_fragment(fragment_path)
    except OSError as e:
        raise _IOFailure(f"cannot read {fragment_path}: {e}") from e
    spec = cfg.lattice
    if frag.spec_hash != spec.config_hash():
        raise ConfigError(
            "fragment was extracted under a different lattice config "
            f"({frag.spec_hash} != {spec.config_hash()})"
        )
    arrays, signature = run_hierarchy(
        frag, cfg.stages, level_spacings_arcsec=spec.level_radii_arcsec()
    )
    out = _ensure_out(cfg)
    stage_rows = []
    for arr in arrays:
        stage_rows.append(
            (
                arr.stage,
                arr.n_levels,
                arr.width,
                arr.n_channels,
                min(arr.spacing_arcsec),
                max(arr.spacing_arcsec),
            )
        )
    write_csv(
        os.path.join(out, "hierarchy_stages.csv"),
        ("stage", "n_levels", "width", "n_channels", "min_spacing_arcsec", "max_spacing_arcsec"),
        stage_rows,
    )
    write_csv(
        os.path.join(out, "hierarchy_signature.csv"),
        ("index", "value"),
        list(enumerate(float(v) for v in signature.values)),
    )
    write_json(
        os.path.join(out, "hierarchy_summary.json"),
        {
            "stages": [
                {
                    "stage": arr.stage,
                    "n_levels": arr.n_levels,
                    "width": arr.width,
                    "n_channels": arr.n_channels,
                }
                for arr in arrays
            ],
            "signature_length": int(signature.values.size),
            "signature_shape": list(signature.shape),
            "fragment_spec_hash": frag.spec_hash,
        },
    )
    print(f"hierarchy: {len(arrays)} stages, signature length {signature.values.size} -> {out}")
    return 0


def _experiment_knobs(cfg: RunConfig, name: str, extra_keys) -> dict:
    block = dict(cfg.experiments.get(name, {}))
    knobs = {k: v for k, v in block.items() if k not in extra_keys}
    knobs.setdefault("seed", cfg.seed)
    if cfg.threads is not None:
        knobs.setdefault("threads", cfg.threads)
    return knobs


def _required(block: dict, key: str, name: str):
    if key not in block:
        raise ConfigError(f"experiments.{name} needs '{key}'")
    return block[key]


def cmd_experiment(cfg: RunConfig, name: str) -> int:
    spec = cfg.lattice
    bank = make_bank(spec, **cfg.bank_params)
    block = cfg.experiments.get(name, {})

    if name == "anstis":
        alphabet = _required(block, "alphabet", name)
        eccs = _required(block, "eccentricities_arcsec", name)
        knobs = _experiment_knobs(cfg, name, {"alphabet", "eccentricities_arcsec"})
        result = anstis_experiment(alphabet, eccs, spec, bank, knobs)
        chart = [
            {
                "x": [r[0] for r in result.sweep_rows if not r[3]],
                "y": [r[2] for r in result.sweep_rows if not r[3]],
                "label": "threshold size",
            }
        ]
        chart_labels = ("letter threshold vs eccentricity", "eccentricity (arcsec)", "threshold size (arcsec)")
    elif name == "scale":
        factors = _required(block, "factors", name)
        knobs = _experiment_knobs(cfg, name, {"factors"})
        result = scale_invariance_curve(None, factors, spec, bank, knobs)
        chart = [
            {
                "x": [r[0] for r in result.sweep_rows],
                "y": [r[3] for r in result.sweep_rows],
                "label": "similarity",
            }
        ]
        chart_labels = ("scale invariance", "scale factor", "signature similarity")
    elif name == "translation":
        knobs = _experiment_knobs(cfg, name, set())
        result = translation_experiment(spec, bank, knobs)
        chart = [
            {
                "x": [r[1] for r in result.sweep_rows],
                "y": [r[2] for r in result.sweep_rows],
                "label": "half range",
            }
        ]
        chart_labels = ("translation invariance", "band radius (arcsec)", "half range (arcsec)")
    else:
        target = _required(block, "target", name)
        eccs = _required(block, "eccentricities_arcsec", name)
        read_stages = _required(block, "read_stages", name)
        flanker = block.get("flanker")
        knobs = _experiment_knobs(
            cfg, name, {"target", "flanker", "eccentricities_arcsec", "read_stages"}
        )
        result = crowding_experiment(
            target, flanker, eccs, read_stages, spec, bank, cfg.stages, knobs
        )
        stages_present = sorted({r[1] for r in result.sweep_rows})
        chart = [
            {
                "x": [r[0] for r in result.sweep_rows if r[1] == m and not r[4]],
                "y": [r[3] for r in result.sweep_rows if r[1] == m and not r[4]],
                "label": f"read stage {m}",
            }
            for m in stages_present
        ]
        chart_labels = ("critical spacing vs eccentricity", "eccentricity (arcsec)", "critical separation (arcsec)")

    out = _ensure_out(cfg)
    write_csv(os.path.join(out, f"{name}_sweep.csv"), result.sweep_columns, result.sweep_rows)
    if result.trial_rows:
        write_csv(
            os.path.join(out, f"{name}_trials.csv"), result.trial_columns, result.trial_rows
        )
    write_json(os.path.join(out, f"{name}_summary.json"), result.to_summary())
    try:
        write_chart(os.path.join(out, f"{name}.svg"), chart, *chart_labels)
    except ParameterError:
        # a fully censored sweep has nothing to draw; the summary still exists
        pass

    censored = result.summary.get("censored_points", 0)
    n_rows = len(result.sweep_rows)
    print(f"{name}: {n_rows} sweep rows ({censored} censored) -> {out}")
    if n_rows > 0 and censored == n_rows:
        raise CensoredSweepError(
            f"{name}: every sweep point is censored; no threshold was reached"
        )
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_run_config(args)
        if args.command == "lattice":
            return cmd_lattice(cfg)
        if args.command == "fragment":
            return cmd_fragment(cfg, args.image, _parse_fixation(args.fixation))
        if args.command == "hierarchy":
            return cmd_hierarchy(cfg, args.fragment)
        return cmd_experiment(cfg, args.name)
    except (NyquistError, CensoredSweepError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (ConfigError, ParameterError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except _IOFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except PyrafoveError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
