"""k-nearest-neighbor search over fixed-dimension feature vectors.

Two modes share one query interface:

* ``exact``: full scan. Distances are ranked with the expanded form
  ``d^2 = |x|^2 - 2 x.q + |q|^2`` computed in float64, then the winning
  rows are re-scored with a direct float64 subtraction so reported
  distances carry no cancellation error.
* ``perm-prefix``: an approximate filter. Each stored vector is
  described by the permutation prefix of its nearest pivots; queries
  scan only the ``candidate_budget`` rows whose prefixes agree most
  with the query's own, then rank those exactly.

Vectors are held as float32 (the storage dtype); all distance math runs
in float64. Results order by (distance, id ascending) so ties are
stable across runs and platforms.

Indexes are immutable once built; any number of threads may query one
concurrently.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EngineError, FormatError

MODE_EXACT = "exact"
MODE_PERM_PREFIX = "perm-prefix"

Neighbor = tuple[str, float]
NeighborList = list[Neighbor]

_INDEX_MAGIC = b"NTIX"
_INDEX_VERSION = 1
_HEADER = struct.Struct("<4sIBIqIIIQ")  # magic, version, mode, dim, seed, pivots, prefix, budget, count


@dataclass(frozen=True)
class IndexConfig:
    """Build- and query-time parameters for a VectorIndex."""

    dim: int
    mode: str = MODE_EXACT
    num_pivots: int = 64
    prefix_len: int = 8
    candidate_budget: int = 2000
    rng_seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.mode not in (MODE_EXACT, MODE_PERM_PREFIX):
            raise ValueError(f"unknown index mode {self.mode!r}")
        if self.mode == MODE_PERM_PREFIX:
            if self.num_pivots < 1:
                raise ValueError(f"num_pivots must be positive, got {self.num_pivots}")
            if not 1 <= self.prefix_len <= self.num_pivots:
                raise ValueError(
                    f"prefix_len must be in [1, num_pivots={self.num_pivots}], got {self.prefix_len}"
                )
            if self.candidate_budget < 1:
                raise ValueError(f"candidate_budget must be positive, got {self.candidate_budget}")


def distance(a, b) -> float:
    """Euclidean distance between two vectors, accumulated in float64."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.ndim != 1 or bv.ndim != 1:
        raise ValueError("distance expects 1-d vectors")
    if av.shape[0] != bv.shape[0]:
        raise DimensionMismatch(f"vector lengths differ: {av.shape[0]} vs {bv.shape[0]}")
    diff = av - bv
    return float(np.sqrt(np.dot(diff, diff)))


class VectorIndex:
    """Immutable id-to-vector collection answering kNN queries."""

    def __init__(self, ids: list[str], vectors: np.ndarray, config: IndexConfig,
                 pivots: np.ndarray | None = None, assignments: np.ndarray | None = None):
        self.ids = ids
        self.vectors = vectors  # (count, dim) float32, canonical storage
        self.config = config
        self.pivots = pivots  # (num_pivots, dim) float32 in perm-prefix mode
        self.assignments = assignments  # (count, prefix_len) int32 pivot indices
        self._lock = threading.Lock()
        self._values64: np.ndarray | None = None
        self._norms64: np.ndarray | None = None
        self._norm_scale: float = 0.0
        self._id_rank: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.config.dim

    def with_candidate_budget(self, candidate_budget: int) -> "VectorIndex":
        """A view of this index that scans a different number of candidates.

        Shares all arrays with the original; only meaningful in
        perm-prefix mode, where the budget is a query-time knob.
        """
        cfg = IndexConfig(
            dim=self.config.dim, mode=self.config.mode,
            num_pivots=self.config.num_pivots, prefix_len=self.config.prefix_len,
            candidate_budget=candidate_budget, rng_seed=self.config.rng_seed,
        )
        return VectorIndex(self.ids, self.vectors, cfg, self.pivots, self.assignments)

    # -- query-time caches ------------------------------------------------

    def _ensure_caches(self):
        if self._values64 is not None:
            return
        with self._lock:
            if self._values64 is not None:
                return
            values64 = self.vectors.astype(np.float64)
            norms = np.einsum("ij,ij->i", values64, values64)
            self._norm_scale = float(norms.max()) if norms.size else 0.0
            if self.config.mode == MODE_PERM_PREFIX:
                order = sorted(range(len(self.ids)), key=lambda i: self.ids[i])
                rank = np.empty(len(self.ids), dtype=np.int64)
                rank[order] = np.arange(len(self.ids))
                self._id_rank = rank
            self._norms64 = norms
            self._values64 = values64  # publish last; readers gate on this

    # -- ranking ----------------------------------------------------------

    def _prepare_query(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64)
        if q.ndim != 1:
            raise ValueError("query must be a 1-d vector")
        if q.shape[0] != self.config.dim:
            raise DimensionMismatch(f"vector lengths differ: {q.shape[0]} vs {self.config.dim}")
        if not np.isfinite(q).all():
            raise ValueError("query vector must be finite")
        return q

    def _topk_rows(self, q: np.ndarray, k: int, rows: np.ndarray | None) -> NeighborList:
        """Exact top-k by (distance, id) over all rows or a row subset."""
        base = self._values64 if rows is None else self._values64[rows]
        norms = self._norms64 if rows is None else self._norms64[rows]
        count = base.shape[0]
        kk = min(k, count)
        if kk == 0:
            return []
        qq = float(q @ q)
        approx = norms - 2.0 * (base @ q) + qq
        if kk < count:
            thresh = float(np.partition(approx, kk - 1)[kk - 1])
            # Margin must dominate the cancellation error of the expanded
            # form so no true top-k row is filtered out; near-ties ride in
            # and get settled by the exact re-scoring below.
            slack = 1e-9 * (abs(thresh) + 1.0) + 1e-12 * (self._norm_scale + qq + 1.0)
            cand = np.flatnonzero(approx <= thresh + slack)
        else:
            cand = np.arange(count)
        diff = base[cand] - q
        d2 = np.einsum("ij,ij->i", diff, diff)
        global_rows = cand if rows is None else rows[cand]
        order = sorted(range(len(cand)), key=lambda i: (d2[i], self.ids[global_rows[i]]))[:kk]
        return [(self.ids[global_rows[i]], float(np.sqrt(d2[i]))) for i in order]

    def _perm_candidates(self, q: np.ndarray) -> np.ndarray:
        diff = self.pivots.astype(np.float64) - q
        pivot_d2 = np.einsum("ij,ij->i", diff, diff)
        q_prefix = np.argsort(pivot_d2, kind="stable")[: self.config.prefix_len].astype(np.int32)
        # Primary key: length of the exact positional prefix match. That
        # alone is coarse (deep positions rarely match exactly), so break
        # ties by how many pivots the prefixes share as sets, which keeps
        # near neighbors whose permutations are slightly shuffled ahead of
        # unrelated vectors. Final id tie-break keeps the order total, so a
        # larger budget always extends the candidate list rather than
        # reshuffling it.
        agree = np.cumprod(self.assignments == q_prefix, axis=1).sum(axis=1)
        shared = np.isin(self.assignments, q_prefix).sum(axis=1)
        order = np.lexsort((self._id_rank, -shared, -agree))
        return order[: min(self.config.candidate_budget, len(self.ids))]

    def knn(self, query, k: int) -> NeighborList:
        """The k nearest stored vectors, closest first, ties by ascending id."""
        if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
            raise ValueError(f"k must be an integer, got {k!r}")
        if k < 1:
            raise ValueError(f"k must be at least 1, got {k}")
        q = self._prepare_query(query)
        self._ensure_caches()
        if self.config.mode == MODE_PERM_PREFIX:
            if k > self.config.candidate_budget:
                raise ValueError(
                    f"k={k} exceeds candidate_budget={self.config.candidate_budget}"
                )
            rows = self._perm_candidates(q)
            return self._topk_rows(q, k, rows)
        return self._topk_rows(q, int(k), None)

    def knn_batch(self, queries: np.ndarray, k: int, chunk: int = 64) -> list[NeighborList]:
        """knn for many queries at once; identical per-query results.

        In exact mode whole chunks are ranked with one matrix product,
        which on a single core is several times faster than repeated
        matrix-vector products.
        """
        queries = np.asarray(queries, dtype=np.float64)
        if queries.ndim != 2:
            raise ValueError("knn_batch expects a (num_queries, dim) array")
        if queries.shape[1] != self.config.dim:
            raise DimensionMismatch(f"vector lengths differ: {queries.shape[1]} vs {self.config.dim}")
        if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
            raise ValueError(f"k must be an integer, got {k!r}")
        if k < 1:
            raise ValueError(f"k must be at least 1, got {k}")
        if not np.isfinite(queries).all():
            raise ValueError("query vectors must be finite")
        self._ensure_caches()
        if self.config.mode == MODE_PERM_PREFIX:
            if k > self.config.candidate_budget:
                raise ValueError(f"k={k} exceeds candidate_budget={self.config.candidate_budget}")
            return [self._topk_rows(q, k, self._perm_candidates(q)) for q in queries]

        count = len(self.ids)
        kk = min(int(k), count)
        out: list[NeighborList] = []
        for start in range(0, queries.shape[0], chunk):
            block = queries[start : start + chunk]
            qq = np.einsum("ij,ij->i", block, block)
            approx = self._norms64[None, :] - 2.0 * (block @ self._values64.T) + qq[:, None]
            if kk < count:
                thresh = np.partition(approx, kk - 1, axis=1)[:, kk - 1]
            else:
                thresh = None
            for row in range(block.shape[0]):
                q = block[row]
                if thresh is None:
                    cand = np.arange(count)
                else:
                    t = float(thresh[row])
                    slack = 1e-9 * (abs(t) + 1.0) + 1e-12 * (self._norm_scale + qq[row] + 1.0)
                    cand = np.flatnonzero(approx[row] <= t + slack)
                diff = self._values64[cand] - q
                d2 = np.einsum("ij,ij->i", diff, diff)
                order = sorted(range(len(cand)), key=lambda i: (d2[i], self.ids[cand[i]]))[:kk]
                out.append([(self.ids[cand[i]], float(np.sqrt(d2[i]))) for i in order])
        return out


def build_index(vectors, config: IndexConfig) -> VectorIndex:
    """Build an index from FeatureVector records (or (id, values) pairs)."""
    ids: list[str] = []
    rows: list[np.ndarray] = []
    for item in vectors:
        if isinstance(item, tuple):
            image_id, values = item
        else:
            image_id, values = item.id, item.values
        ids.append(image_id)
        rows.append(np.asarray(values))
    if not ids:
        raise ValueError("cannot build an index from zero vectors")
    matrix = np.ascontiguousarray(np.stack(rows), dtype=np.float32)
    return build_index_from_arrays(ids, matrix, config)


def build_index_from_arrays(ids: list[str], matrix: np.ndarray, config: IndexConfig) -> VectorIndex:
    """Build an index from a pre-assembled (count, dim) array."""
    if len(ids) == 0:
        raise ValueError("cannot build an index from zero vectors")
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise ValueError(f"expected ({len(ids)}, dim) vector array, got shape {matrix.shape}")
    if matrix.shape[1] != config.dim:
        raise DimensionMismatch(f"vector lengths differ: {matrix.shape[1]} vs {config.dim}")
    if not np.isfinite(matrix).all():
        raise ValueError("feature vectors must be finite (found nan or inf)")
    seen: set[str] = set()
    for image_id in ids:
        if not image_id:
            raise ValueError("image id must be non-empty")
        if image_id in seen:
            raise ValueError(f"duplicate image id {image_id!r}")
        seen.add(image_id)

    pivots = None
    assignments = None
    if config.mode == MODE_PERM_PREFIX:
        count = len(ids)
        if config.num_pivots > count:
            raise ValueError(f"num_pivots={config.num_pivots} exceeds vector count {count}")
        rng = np.random.default_rng(config.rng_seed)
        pivot_rows = rng.choice(count, size=config.num_pivots, replace=False)
        pivots = np.ascontiguousarray(matrix[pivot_rows])
        assignments = _assign_prefixes(matrix, pivots, config.prefix_len)
    return VectorIndex(list(ids), matrix, config, pivots, assignments)


def _assign_prefixes(matrix: np.ndarray, pivots: np.ndarray, prefix_len: int) -> np.ndarray:
    """Each row's prefix_len nearest pivot indices, nearest first.

    Pivot-distance ties resolve to the lower pivot index (stable sort).
    """
    values = matrix.astype(np.float64)
    piv = pivots.astype(np.float64)
    piv_norms = np.einsum("ij,ij->i", piv, piv)
    count = values.shape[0]
    out = np.empty((count, prefix_len), dtype=np.int32)
    chunk = max(1, (1 << 22) // max(1, piv.shape[0]))
    for start in range(0, count, chunk):
        block = values[start : start + chunk]
        d2 = np.einsum("ij,ij->i", block, block)[:, None] - 2.0 * (block @ piv.T) + piv_norms[None, :]
        order = np.argsort(d2, axis=1, kind="stable")
        out[start : start + len(block)] = order[:, :prefix_len]
    return out


_MODE_CODES = {MODE_EXACT: 0, MODE_PERM_PREFIX: 1}
_CODE_MODES = {v: k for k, v in _MODE_CODES.items()}


def save_index(index: VectorIndex, path: str) -> None:
    """Persist an index; loading the file reproduces identical answers.

    The container embeds dimensionality, mode, build seed, and (in
    perm-prefix mode) the pivot vectors and prefix assignments, so a
    load needs no rebuild work.
    """
    cfg = index.config
    perm = cfg.mode == MODE_PERM_PREFIX
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(
            _INDEX_MAGIC, _INDEX_VERSION, _MODE_CODES[cfg.mode], cfg.dim, cfg.rng_seed,
            cfg.num_pivots if perm else 0,
            cfg.prefix_len if perm else 0,
            cfg.candidate_budget if perm else 0,
            len(index.ids),
        ))
        data = np.ascontiguousarray(index.vectors, dtype="<f4")
        for i, image_id in enumerate(index.ids):
            raw = image_id.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(data[i].tobytes())
        if perm:
            fh.write(np.ascontiguousarray(index.pivots, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(index.assignments, dtype="<i4").tobytes())


def load_index(path: str, config: IndexConfig) -> VectorIndex:
    """Load an index saved by save_index, checking it against ``config``.

    The stored dimensionality and mode must match the caller's
    expectation; structural parameters come from the file itself.
    """
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise FormatError("truncated index header", path=path)
        magic, version, mode_code, dim, seed, num_pivots, prefix_len, budget, count = _HEADER.unpack(raw)
        if magic != _INDEX_MAGIC:
            raise FormatError(f"not an index file (magic {magic!r})", path=path)
        if version != _INDEX_VERSION:
            raise FormatError(f"unsupported index version {version} (expected {_INDEX_VERSION})", path=path)
        if mode_code not in _CODE_MODES:
            raise FormatError(f"unknown index mode code {mode_code}", path=path)
        mode = _CODE_MODES[mode_code]
        if dim != config.dim:
            raise EngineError(
                f"{path}: index dimensionality {dim} does not match configured {config.dim}"
            )
        if mode != config.mode:
            raise EngineError(f"{path}: index mode {mode!r} does not match configured {config.mode!r}")
        if count < 1:
            raise FormatError(f"index holds no vectors (count={count})", path=path)

        ids: list[str] = []
        matrix = np.empty((count, dim), dtype=np.float32)
        rec_bytes = dim * 4
        for i in range(count):
            head = fh.read(2)
            if len(head) != 2:
                raise FormatError(f"truncated file in record {i}", path=path)
            (id_len,) = struct.unpack("<H", head)
            raw_id = fh.read(id_len)
            vec = fh.read(rec_bytes)
            if len(raw_id) != id_len or len(vec) != rec_bytes:
                raise FormatError(f"truncated file in record {i}", path=path)
            try:
                ids.append(raw_id.decode("utf-8"))
            except UnicodeDecodeError:
                raise FormatError(f"record {i} id is not valid UTF-8", path=path) from None
            matrix[i] = np.frombuffer(vec, dtype="<f4")

        pivots = None
        assignments = None
        if mode == MODE_PERM_PREFIX:
            pbytes = num_pivots * dim * 4
            raw_piv = fh.read(pbytes)
            abytes = count * prefix_len * 4
            raw_asn = fh.read(abytes)
            if len(raw_piv) != pbytes or len(raw_asn) != abytes:
                raise FormatError("truncated pivot data", path=path)
            pivots = np.frombuffer(raw_piv, dtype="<f4").reshape(num_pivots, dim).copy()
            assignments = np.frombuffer(raw_asn, dtype="<i4").reshape(count, prefix_len).copy()
        if fh.read(1):
            raise FormatError("trailing data after index payload", path=path)

    loaded_cfg = IndexConfig(
        dim=dim, mode=mode,
        num_pivots=num_pivots if mode == MODE_PERM_PREFIX else config.num_pivots,
        prefix_len=prefix_len if mode == MODE_PERM_PREFIX else config.prefix_len,
        candidate_budget=budget if mode == MODE_PERM_PREFIX else config.candidate_budget,
        rng_seed=seed,
    )
    return VectorIndex(ids, matrix, loaded_cfg, pivots, assignments)
