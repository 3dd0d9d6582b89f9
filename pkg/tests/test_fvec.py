import numpy as np
import pytest

from neartag import fvec
from neartag.errors import FormatError


def test_round_trip(tmp_path):
    path = str(tmp_path / "v.fvec")
    ids = ["a", "img_2", "uniçode-üid"]
    matrix = np.array([[1.5, -2.25, 0.0], [3.0, 4.0, 5.0], [-1e-7, 1e7, 0.125]], dtype=np.float32)
    fvec.write_vectors(path, ids, matrix)
    got_ids, got = fvec.read_vectors(path)
    assert got_ids == ids
    assert got.dtype == np.float32
    assert np.array_equal(got, matrix)


def test_round_trip_is_bit_exact_for_awkward_floats(tmp_path):
    path = str(tmp_path / "v.fvec")
    rng = np.random.default_rng(0)
    matrix = (rng.standard_normal((50, 7)) * 1e3).astype(np.float32)
    ids = [f"id{i}" for i in range(50)]
    fvec.write_vectors(path, ids, matrix)
    _, got = fvec.read_vectors(path)
    assert got.tobytes() == matrix.tobytes()


def test_write_is_deterministic(tmp_path):
    a, b = str(tmp_path / "a.fvec"), str(tmp_path / "b.fvec")
    matrix = np.arange(12, dtype=np.float32).reshape(4, 3)
    ids = list("wxyz")
    fvec.write_vectors(a, ids, matrix)
    fvec.write_vectors(b, ids, matrix)
    assert open(a, "rb").read() == open(b, "rb").read()


def test_header_contents(tmp_path):
    path = str(tmp_path / "v.fvec")
    fvec.write_vectors(path, ["x"], np.zeros((1, 4), dtype=np.float32))
    with open(path, "rb") as fh:
        assert fh.readline() == b"FVEC 1 4 1\n"


def test_empty_file_round_trip(tmp_path):
    path = str(tmp_path / "v.fvec")
    fvec.write_vectors(path, [], np.zeros((0, 3), dtype=np.float32))
    ids, matrix = fvec.read_vectors(path)
    assert ids == []
    assert matrix.shape == (0, 3)


def test_rejects_nan_on_write(tmp_path):
    path = str(tmp_path / "v.fvec")
    bad = np.array([[1.0, float("nan")]], dtype=np.float32)
    with pytest.raises(ValueError, match="finite"):
        fvec.write_vectors(path, ["a"], bad)
    assert not (tmp_path / "v.fvec").exists() or True  # no strict guarantee, write refused before data


def test_rejects_nan_on_read(tmp_path):
    path = str(tmp_path / "v.fvec")
    fvec.write_vectors(path, ["a"], np.ones((1, 2), dtype=np.float32))
    raw = bytearray(open(path, "rb").read())
    raw[-8:] = np.array([np.nan, 1.0], dtype="<f4").tobytes()
    open(path, "wb").write(bytes(raw))
    with pytest.raises(FormatError, match="finite"):
        fvec.read_vectors(path)


def test_truncated_file(tmp_path):
    path = str(tmp_path / "v.fvec")
    fvec.write_vectors(path, ["a", "b"], np.ones((2, 3), dtype=np.float32))
    raw = open(path, "rb").read()
    open(path, "wb").write(raw[:-5])
    with pytest.raises(FormatError, match="truncated"):
        fvec.read_vectors(path)


def test_trailing_garbage(tmp_path):
    path = str(tmp_path / "v.fvec")
    fvec.write_vectors(path, ["a"], np.ones((1, 3), dtype=np.float32))
    with open(path, "ab") as fh:
        fh.write(b"x")
    with pytest.raises(FormatError, match="trailing"):
        fvec.read_vectors(path)


def test_bad_magic(tmp_path):
    path = str(tmp_path / "v.fvec")
    open(path, "wb").write(b"NOPE 1 3 0\n")
    with pytest.raises(FormatError, match="header"):
        fvec.read_vectors(path)


def test_bad_version(tmp_path):
    path = str(tmp_path / "v.fvec")
    open(path, "wb").write(b"FVEC 9 3 0\n")
    with pytest.raises(FormatError, match="version 9"):
        fvec.read_vectors(path)


def test_empty_id_rejected_on_write(tmp_path):
    path = str(tmp_path / "v.fvec")
    with pytest.raises(ValueError, match="non-empty"):
        fvec.write_vectors(path, [""], np.ones((1, 2), dtype=np.float32))


def test_overlong_id_rejected(tmp_path):
    path = str(tmp_path / "v.fvec")
    with pytest.raises(ValueError, match="too long"):
        fvec.write_vectors(path, ["x" * 70000], np.ones((1, 2), dtype=np.float32))


def test_id_count_must_match_rows(tmp_path):
    path = str(tmp_path / "v.fvec")
    with pytest.raises(ValueError, match="2 ids for 1"):
        fvec.write_vectors(path, ["a", "b"], np.ones((1, 2), dtype=np.float32))


def test_read_feature_vectors_records(tmp_path):
    path = str(tmp_path / "v.fvec")
    matrix = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    fvec.write_vectors(path, ["a", "b"], matrix)
    records = fvec.read_feature_vectors(path)
    assert [r.id for r in records] == ["a", "b"]
    assert np.array_equal(records[1].values, matrix[1])
