"""Binary feature-vector files.

Layout: one ASCII header line ``FVEC 1 <dim> <count>\\n`` followed by
``count`` records. Each record is a little-endian uint16 giving the byte
length of the UTF-8 image id, the id bytes themselves, then ``dim``
float32 components (little endian).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError

MAGIC = "FVEC"
VERSION = 1

_MAX_ID_BYTES = 0xFFFF


@dataclass(slots=True)
class FeatureVector:
    """One image id paired with its feature components."""

    id: str
    values: np.ndarray


def _check_id(image_id: str) -> bytes:
    if not image_id:
        raise ValueError("image id must be non-empty")
    raw = image_id.encode("utf-8")
    if len(raw) > _MAX_ID_BYTES:
        raise ValueError(f"image id too long ({len(raw)} bytes, limit {_MAX_ID_BYTES})")
    return raw


def write_vectors(path: str, ids: list[str], matrix: np.ndarray) -> None:
    """Write ids and a (count, dim) array to ``path``.

    Values are stored as float32; the write fails on non-finite
    components rather than persisting a corrupt file.
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError(f"expected a 2-d array of vectors, got shape {matrix.shape}")
    if len(ids) != matrix.shape[0]:
        raise ValueError(f"{len(ids)} ids for {matrix.shape[0]} vectors")
    if not np.isfinite(matrix).all():
        raise ValueError("feature vectors must be finite (found nan or inf)")
    data = np.ascontiguousarray(matrix, dtype="<f4")
    count, dim = data.shape
    if dim < 1:
        raise ValueError("vector dimensionality must be at least 1")
    with open(path, "wb") as fh:
        fh.write(f"{MAGIC} {VERSION} {dim} {count}\n".encode("ascii"))
        for i, image_id in enumerate(ids):
            raw = _check_id(image_id)
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(data[i].tobytes())


def _read_exact(fh, n: int, path: str, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated file while reading {what}", path=path)
    return buf


def read_vectors(path: str) -> tuple[list[str], np.ndarray]:
    """Read a feature file, returning (ids, float32 matrix of shape (count, dim))."""
    with open(path, "rb") as fh:
        header = fh.readline(128)
        if not header.endswith(b"\n"):
            raise FormatError("missing or overlong header line", path=path)
        fields = header[:-1].split(b" ")
        if len(fields) != 4 or fields[0] != MAGIC.encode("ascii"):
            raise FormatError(f"bad header {header!r}, expected '{MAGIC} {VERSION} <dim> <count>'", path=path)
        try:
            version, dim, count = (int(f) for f in fields[1:])
        except ValueError:
            raise FormatError(f"non-numeric header fields in {header!r}", path=path) from None
        if version != VERSION:
            raise FormatError(f"unsupported format version {version} (expected {VERSION})", path=path)
        if dim < 1 or count < 0:
            raise FormatError(f"invalid header values dim={dim} count={count}", path=path)

        ids: list[str] = []
        matrix = np.empty((count, dim), dtype=np.float32)
        rec_bytes = dim * 4
        for i in range(count):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2, path, f"record {i}"))
            if id_len == 0:
                raise FormatError(f"record {i} has an empty id", path=path)
            raw = _read_exact(fh, id_len, path, f"record {i} id")
            try:
                ids.append(raw.decode("utf-8"))
            except UnicodeDecodeError:
                raise FormatError(f"record {i} id is not valid UTF-8", path=path) from None
            vec = _read_exact(fh, rec_bytes, path, f"record {i} values")
            matrix[i] = np.frombuffer(vec, dtype="<f4")
        if fh.read(1):
            raise FormatError(f"trailing data after {count} records", path=path)
    if count and not np.isfinite(matrix).all():
        raise FormatError("feature vectors must be finite (found nan or inf)", path=path)
    return ids, matrix


def read_feature_vectors(path: str) -> list[FeatureVector]:
    """Read a feature file as FeatureVector records (row views into one array)."""
    ids, matrix = read_vectors(path)
    return [FeatureVector(i, matrix[n]) for n, i in enumerate(ids)]
