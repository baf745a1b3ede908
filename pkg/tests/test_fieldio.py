"""Binary field format: roundtrips, sidecars, integrity failures."""

import json

import numpy as np
import pytest

from hlab.fieldio import MAGIC, IntegrityError, read_field, write_field, write_csv
from hlab.lattice import TorusGrid


def test_roundtrip_every_kind(tmp_path):
    rng = np.random.default_rng(21)
    grid = TorusGrid(2, 6)
    cases = {
        "rsca": rng.standard_normal(grid.shape),
        "csca": rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape),
        "cvec": rng.standard_normal((2,) + grid.shape)
        + 1j * rng.standard_normal((2,) + grid.shape),
        "cmat": rng.standard_normal((2, 2) + grid.shape)
        + 1j * rng.standard_normal((2, 2) + grid.shape),
        "coef": rng.standard_normal((2, 2) + grid.shape),
    }
    for kind, values in cases.items():
        path = tmp_path / f"{kind}.field"
        write_field(path, grid, values, kind, config_hash="ab" * 32, seed=5)
        grid2, back, kind2 = read_field(path)
        assert grid2 == grid
        assert kind2 == kind
        assert np.array_equal(back, values), kind


def test_sidecar_contents(tmp_path):
    grid = TorusGrid(1, 4)
    path = tmp_path / "x.field"
    write_field(path, grid, np.zeros(4), "rsca", config_hash="cd" * 32, seed=17)
    meta = json.loads((tmp_path / "x.field.json").read_text())
    assert meta["dim"] == 1 and meta["side"] == 4
    assert meta["kind"] == "rsca"
    assert meta["seed"] == 17
    assert meta["config_sha256"] == "cd" * 32


def test_write_rejects_unknown_kind(tmp_path):
    grid = TorusGrid(1, 4)
    with pytest.raises(ValueError):
        write_field(tmp_path / "x.field", grid, np.zeros(4), "bogus")


def test_read_rejects_bad_magic(tmp_path):
    path = tmp_path / "x.field"
    grid = TorusGrid(1, 4)
    write_field(path, grid, np.zeros(4), "rsca")
    raw = bytearray(path.read_bytes())
    raw[:5] = b"NOPE!"
    path.write_bytes(bytes(raw))
    with pytest.raises(IntegrityError):
        read_field(path)


def test_read_rejects_truncation(tmp_path):
    path = tmp_path / "x.field"
    grid = TorusGrid(2, 4)
    write_field(path, grid, np.zeros(grid.shape), "rsca")
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 8])
    with pytest.raises(IntegrityError):
        read_field(path)
    path.write_bytes(raw[:10])
    with pytest.raises(IntegrityError):
        read_field(path)


def test_read_rejects_unknown_kind_tag(tmp_path):
    path = tmp_path / "x.field"
    grid = TorusGrid(1, 4)
    write_field(path, grid, np.zeros(4), "rsca")
    raw = bytearray(path.read_bytes())
    raw[13:17] = b"zzzz"
    path.write_bytes(bytes(raw))
    with pytest.raises(IntegrityError):
        read_field(path)
    assert raw[:5] == MAGIC  # only the kind tag was corrupted


def test_csv_layout(tmp_path):
    grid = TorusGrid(2, 4)
    path = tmp_path / "t.csv"
    vals = np.arange(16.0).reshape(4, 4)
    write_csv(path, grid, {"g": vals}, config_hash="ee" * 32, seed=3)
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_sha256=" + "ee" * 32
    assert lines[1] == "# seed=3"
    assert lines[2] == "x_1,x_2,g"
    assert len(lines) == 3 + 16
    first = lines[3].split(",")
    assert first[0] == "0" and first[1] == "0" and float(first[2]) == 0.0
