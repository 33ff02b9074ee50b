"""Config document validation: strict keys, defaults, and built objects."""

import json

import pytest

from pyrafove import default_config, load_config, validate_config
from pyrafove.config import (
    build_bank_params,
    build_lattice_spec,
    build_stage_specs,
    validate_experiment_block,
)
from pyrafove.errors import ConfigError
from pyrafove.geometry import Dimensionality, Region


class TestLoadConfig:
    def test_reads_json_object(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"seed": 3}')
        assert load_config(path) == {"seed": 3}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_non_object_root(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            load_config(path)


class TestDefaults:
    def test_default_document_validates(self):
        run = validate_config(default_config())
        assert run.lattice.n_bands == 5
        assert run.lattice.dimensionality is Dimensionality.ONE_D
        assert run.lattice.samples_per_axis == 41
        assert len(run.stages) == 4
        assert run.seed == 0

    def test_empty_document_uses_defaults(self):
        run = validate_config({})
        assert run.lattice.n_bands == 5
        assert run.bank_params["n_theta"] == 4
        assert run.out_dir == "pyrafove_out"

    def test_merged_document_revalidates_identically(self):
        run = validate_config({"seed": 7})
        again = validate_config(run.document)
        assert again.document == run.document


class TestLatticeBlock:
    def test_marr_bands(self):
        spec = build_lattice_spec({"bands": {"kind": "marr"}, "slope": 0.1})
        assert [b.radius.arcsec for b in spec.bands] == [40, 93, 186, 351, 630]

    def test_geometric_bands(self):
        spec = build_lattice_spec({
            "bands": {"kind": "geometric", "s_min_arcsec": 40.0,
                      "s_max_arcsec": 160.0, "factor": 2.0},
            "slope": 0.1,
        })
        assert [b.radius.arcsec for b in spec.bands] == [40.0, 80.0, 160.0]
        assert spec.factor == 2.0

    def test_explicit_radii(self):
        spec = build_lattice_spec({
            "bands": {"radii_arcsec": [30.0, 75.0]}, "slope": 0.2,
        })
        assert [b.radius.arcsec for b in spec.bands] == [30.0, 75.0]

    def test_bands_kind_as_string(self):
        spec = build_lattice_spec({"bands": "marr", "slope": 0.05})
        assert spec.n_bands == 5

    def test_region_and_dimensionality(self):
        spec = build_lattice_spec({
            "bands": {"kind": "geometric", "s_min_arcsec": 40.0,
                      "s_max_arcsec": 160.0, "factor": 2.0},
            "slope": 0.1,
            "region": "constant_difference",
            "dimensionality": "2d",
        })
        assert spec.region is Region.CONSTANT_DIFFERENCE
        assert spec.dimensionality is Dimensionality.TWO_D

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            build_lattice_spec({"bands": "marr", "slop": 0.1})

    def test_missing_required_rejected(self):
        with pytest.raises(ConfigError):
            build_lattice_spec({"bands": "marr"})

    def test_bad_values_rejected(self):
        with pytest.raises(ConfigError):
            build_lattice_spec({"bands": "marr", "slope": -1.0})
        with pytest.raises(ConfigError):
            build_lattice_spec({"bands": "marr", "slope": 0.1, "n_x": 0})
        with pytest.raises(ConfigError):
            build_lattice_spec({"bands": "marr", "slope": 0.1, "region": "cone"})
        with pytest.raises(ConfigError):
            build_lattice_spec({"bands": "marr", "slope": 0.1, "dimensionality": "3d"})
        with pytest.raises(ConfigError):
            build_lattice_spec({"bands": {"kind": "octave"}, "slope": 0.1})


class TestBankBlock:
    def test_defaults_fill_in(self):
        params = build_bank_params({})
        assert params == {
            "n_theta": 4,
            "pixels_per_degree": 300.0,
            "wavelength_ratio": 1.0,
            "sigma_ratio": 0.5,
        }

    def test_validation(self):
        with pytest.raises(ConfigError):
            build_bank_params({"n_theta": 0})
        with pytest.raises(ConfigError):
            build_bank_params({"n_theta": True})
        with pytest.raises(ConfigError):
            build_bank_params({"pixels_per_degree": -60.0})
        with pytest.raises(ConfigError):
            build_bank_params({"lambda": 2.0})


class TestStagesBlock:
    def test_builds_specs(self):
        stages = build_stage_specs([
            {"pool": "mean", "scale_pool": False, "name": "v2"},
            {},
        ])
        assert stages[0].pool == "mean" and not stages[0].scale_pool
        assert stages[0].name == "v2"
        assert stages[1].pool == "max" and stages[1].scale_pool

    def test_validation(self):
        with pytest.raises(ConfigError):
            build_stage_specs({"pool": "max"})
        with pytest.raises(ConfigError):
            build_stage_specs([{"pool": "median"}])
        with pytest.raises(ConfigError):
            build_stage_specs([{"scale_pool": "yes"}])
        with pytest.raises(ConfigError):
            build_stage_specs([{"pools": "max"}])


class TestExperimentBlocks:
    def test_known_names_and_knobs(self):
        block = validate_experiment_block(
            "anstis", {"alphabet": ["C", "O"], "n_trials": 4}
        )
        assert block["n_trials"] == 4

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError):
            validate_experiment_block("acuity", {})

    def test_unknown_knob(self):
        with pytest.raises(ConfigError):
            validate_experiment_block("scale", {"factor": [1.0]})

    def test_crowding_extras_allowed(self):
        block = validate_experiment_block(
            "crowding",
            {"target": ["C"], "read_stages": [3], "eccentricities_arcsec": [500.0]},
        )
        assert block["read_stages"] == [3]


class TestTopLevel:
    def test_unknown_top_key(self):
        with pytest.raises(ConfigError):
            validate_config({"lattice_spec": {}})

    def test_seed_validation(self):
        with pytest.raises(ConfigError):
            validate_config({"seed": -1})
        with pytest.raises(ConfigError):
            validate_config({"seed": 1.5})
        with pytest.raises(ConfigError):
            validate_config({"seed": True})

    def test_out_dir_validation(self):
        with pytest.raises(ConfigError):
            validate_config({"out_dir": ""})

    def test_threads_validation(self):
        with pytest.raises(ConfigError):
            validate_config({"threads": 0})
        assert validate_config({"threads": None}).threads is None
        assert validate_config({"threads": 2}).threads == 2

    def test_experiments_must_be_object(self):
        with pytest.raises(ConfigError):
            validate_config({"experiments": ["anstis"]})

    def test_document_json_serializable(self):
        run = validate_config(default_config())
        json.dumps(run.document)  # no numpy types may leak through
