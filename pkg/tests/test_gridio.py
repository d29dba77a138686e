"""Field serialization: CSV, raw binary with sidecar, PGM heatmaps."""

import json

import numpy as np
import pytest

from wavepinn import gridio
from wavepinn.errors import UsageError
from wavepinn.oracle import GridField


def sample_field():
    rng = np.random.default_rng(12)
    vals = rng.normal(size=(5, 7)) + 1j * rng.normal(size=(5, 7))
    return GridField(vals, origin=(-1.0, 2.0), spacing=(0.5, 0.25))


def test_binary_round_trip_is_exact(tmp_path):
    field = sample_field()
    path = str(tmp_path / "field.bin")
    gridio.save_binary(path, field)
    loaded = gridio.load_binary(path)
    assert np.array_equal(loaded.values, field.values)
    assert np.allclose(loaded.origin, field.origin)
    assert np.allclose(loaded.spacing, field.spacing)
    side = json.load(open(path + ".json"))
    assert side["dims"] == [5, 7]
    assert side["dtype"] == "complex128-interleaved-le"


def test_binary_loader_rejects_corrupt_inputs(tmp_path):
    field = sample_field()
    path = str(tmp_path / "field.bin")
    gridio.save_binary(path, field)
    with pytest.raises(UsageError):
        gridio.load_binary(str(tmp_path / "absent.bin"))
    # truncate the payload
    raw = open(path, "rb").read()
    open(path, "wb").write(raw[:-16])
    with pytest.raises(UsageError):
        gridio.load_binary(path)


def test_csv_round_trip_is_exact(tmp_path):
    field = sample_field()
    path = str(tmp_path / "field.csv")
    gridio.save_csv(path, field)
    pts, vals = gridio.load_csv(path)
    assert np.array_equal(pts, field.points())
    assert np.array_equal(vals, field.values.ravel())


def test_csv_loader_rejects_foreign_files(tmp_path):
    path = tmp_path / "junk.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(UsageError):
        gridio.load_csv(str(path))
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(UsageError):
        gridio.load_csv(str(empty))


def test_pgm_header_and_linear_scaling(tmp_path):
    img = np.array([[0.0, 0.5], [1.0, 0.25]])
    path = str(tmp_path / "img.pgm")
    gridio.write_pgm(path, img, 0.0, 1.0)
    raw = open(path, "rb").read()
    header = b"P5\n2 2\n255\n"
    assert raw.startswith(header)
    pixels = np.frombuffer(raw[len(header) :], dtype=np.uint8).reshape(2, 2)
    # rows are flipped so row 0 of the array is the bottom of the image
    assert pixels.tolist() == [[255, 63], [0, 127]]


def test_pgm_rejects_bad_input(tmp_path):
    with pytest.raises(UsageError):
        gridio.write_pgm(str(tmp_path / "x.pgm"), np.zeros(4), 0.0, 1.0)
    with pytest.raises(UsageError):
        gridio.write_pgm(str(tmp_path / "x.pgm"), np.zeros((2, 2)), 1.0, 1.0)


def test_heatmaps_write_both_channels(tmp_path):
    field = sample_field()
    re_path, abs_path = gridio.save_heatmaps(str(tmp_path / "field"), field)
    for path in (re_path, abs_path):
        raw = open(path, "rb").read()
        assert raw.startswith(b"P5\n7 5\n255\n")
        assert len(raw) == len(b"P5\n7 5\n255\n") + 35
