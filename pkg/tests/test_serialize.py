"""Canonical encoders: identical inputs must give identical bytes."""

import json
import math

import numpy as np
import pytest

from pyrafove.serialize import (
    canonical_json,
    config_digest,
    fmt_cell,
    pretty_json,
    write_csv,
    write_json,
)


class TestJson:
    def test_canonical_sorts_and_strips(self):
        assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'

    def test_canonical_rejects_nan(self):
        with pytest.raises(ValueError):
            canonical_json({"x": math.nan})

    def test_pretty_is_deterministic(self):
        doc = {"z": 1, "a": {"c": 2, "b": 3}}
        assert pretty_json(doc) == pretty_json(json.loads(pretty_json(doc)))
        assert pretty_json(doc).endswith("\n")

    def test_digest_stability(self):
        a = config_digest({"x": 1.5, "y": "s"})
        b = config_digest({"y": "s", "x": 1.5})
        assert a == b and len(a) == 16
        assert config_digest({"x": 1.5000001, "y": "s"}) != a


class TestFmtCell:
    def test_float_uses_repr(self):
        v = 0.1 + 0.2
        assert fmt_cell(v) == repr(v)
        assert float(fmt_cell(v)) == v  # shortest round-trip form

    def test_none_is_empty(self):
        assert fmt_cell(None) == ""

    def test_bool_is_numeric(self):
        assert fmt_cell(True) == "1"
        assert fmt_cell(False) == "0"

    def test_int_and_str(self):
        assert fmt_cell(42) == "42"
        assert fmt_cell("label") == "label"


class TestFileWriters:
    def test_csv_roundtrip_exact_floats(self, tmp_path):
        rng = np.random.default_rng(0)
        rows = [(i, float(v)) for i, v in enumerate(rng.normal(size=20))]
        path = tmp_path / "t.csv"
        write_csv(path, ("i", "value"), rows)
        lines = path.read_text().splitlines()
        assert lines[0] == "i,value"
        for line, (i, v) in zip(lines[1:], rows):
            si, sv = line.split(",")
            assert int(si) == i
            assert float(sv) == v  # bit-exact via repr

    def test_csv_lf_newlines(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ("a",), [(1,), (2,)])
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert raw.endswith(b"\n")

    def test_identical_inputs_identical_bytes(self, tmp_path):
        doc = {"b": [1.5, None], "a": "x"}
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        write_json(p1, doc)
        write_json(p2, doc)
        assert p1.read_bytes() == p2.read_bytes()
