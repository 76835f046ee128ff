"""Embedding stores, the projection head, and span/context embeddings.

Two store flavours share one read interface: a fixed store loaded from
the binary token-vector format (typically exported from a pretrained
encoder), and a trainable store backed by a token lookup table that the
training loop updates in place.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .corpus import KIND_BULLET, KIND_TITLE, Location, Product, SequenceKey

__all__ = [
    "EmbeddingStore",
    "ProjectionHead",
    "SpanEmbedding",
    "StoreFormatError",
    "TrainableTokenStore",
    "init_trainable_store",
    "load_store",
    "product_context",
    "save_store",
    "span_embedding",
    "span_mean",
]

STORE_MAGIC = b"AMES"
STORE_VERSION = 1
KEY_SEP = "\x1f"

_HEADER = struct.Struct("<4sIIQ")
_REC_KEY_LEN = struct.Struct("<H")
_REC_COUNTS = struct.Struct("<IB")


class StoreFormatError(ValueError):
    """The embedding-store file is malformed; message names a byte offset."""


class EmbeddingStore:
    """Immutable per-sequence token vectors with optional CLS rows.

    Attributes:
        dim: Embedding width.
        rows: Mapping from sequence key to an (n_tokens, dim) float64 array.
        cls_rows: Mapping from sequence key to a (dim,) summary vector,
            present only for records stored with a CLS row.
    """

    trainable = False

    def __init__(
        self,
        dim: int,
        rows: dict[SequenceKey, np.ndarray],
        cls_rows: dict[SequenceKey, np.ndarray] | None = None,
    ) -> None:
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = int(dim)
        self.rows = rows
        self.cls_rows = cls_rows or {}
        for key, mat in rows.items():
            if mat.ndim != 2 or mat.shape[1] != dim or mat.shape[0] < 1:
                raise ValueError(f"record {key}: expected (n>=1, {dim}) matrix, got {mat.shape}")

    def __contains__(self, key: SequenceKey) -> bool:
        return key in self.rows

    def keys(self) -> Iterator[SequenceKey]:
        return iter(self.rows)

    def tokens(self, key: SequenceKey) -> np.ndarray:
        """Token-vector matrix for one sequence, shape (n_tokens, dim)."""
        try:
            return self.rows[key]
        except KeyError:
            raise KeyError(f"no embedding record for sequence {key}") from None

    def cls(self, key: SequenceKey) -> np.ndarray | None:
        return self.cls_rows.get(key)


class TrainableTokenStore:
    """Token-table store: one trainable float64 row per distinct token.

    All occurrences of a token share a row, so gradient updates to one
    occurrence move every occurrence. ``seq_rows`` maps each sequence to
    the table-row index of each of its tokens.
    """

    trainable = True

    def __init__(
        self,
        dim: int,
        table: np.ndarray,
        token_ids: dict[str, int],
        seq_rows: dict[SequenceKey, np.ndarray],
    ) -> None:
        if table.ndim != 2 or table.shape[1] != dim:
            raise ValueError(f"table shape {table.shape} does not match dim {dim}")
        self.dim = int(dim)
        self.table = table
        self.token_ids = token_ids
        self.seq_rows = seq_rows

    def __contains__(self, key: SequenceKey) -> bool:
        return key in self.seq_rows

    def keys(self) -> Iterator[SequenceKey]:
        return iter(self.seq_rows)

    def tokens(self, key: SequenceKey) -> np.ndarray:
        try:
            return self.table[self.seq_rows[key]]
        except KeyError:
            raise KeyError(f"no token rows for sequence {key}") from None

    def rows_for(self, key: SequenceKey) -> np.ndarray:
        """Table-row indices of one sequence's tokens."""
        return self.seq_rows[key]

    def cls(self, key: SequenceKey) -> None:
        return None

    @property
    def vocabulary(self) -> list[str]:
        """Tokens in table-row order."""
        out = [""] * len(self.token_ids)
        for tok, idx in self.token_ids.items():
            out[idx] = tok
        return out


def init_trainable_store(
    products: Sequence[Product], dim: int, seed: int
) -> TrainableTokenStore:
    """Builds a trainable store over every token of the corpus.

    Rows are assigned in first-appearance order (title before bullets,
    products in file order) and initialized i.i.d. uniform on
    ``[-0.5/dim, 0.5/dim)`` from a seeded generator, so the same corpus
    and seed always produce a bitwise-identical table.
    """
    token_ids: dict[str, int] = {}
    seq_rows: dict[SequenceKey, np.ndarray] = {}
    for product in products:
        for seq in product.sequences():
            rows = np.empty(len(seq), dtype=np.int64)
            for i, tok in enumerate(seq.tokens):
                idx = token_ids.setdefault(tok, len(token_ids))
                rows[i] = idx
            seq_rows[seq.key] = rows
    rng = np.random.default_rng(seed)
    half = 0.5 / dim
    table = rng.uniform(-half, half, size=(len(token_ids), dim)).astype(np.float64)
    return TrainableTokenStore(dim=dim, table=table, token_ids=token_ids, seq_rows=seq_rows)


def _format_key(key: SequenceKey) -> bytes:
    pid, kind, index = key
    return KEY_SEP.join((pid, kind, str(index))).encode("utf-8")


def _parse_key(raw: bytes, offset: int) -> SequenceKey:
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise StoreFormatError(f"byte {offset}: record key is not valid UTF-8") from exc
    parts = text.split(KEY_SEP)
    if len(parts) != 3:
        raise StoreFormatError(
            f"byte {offset}: record key must have 3 unit-separated fields, got {len(parts)}"
        )
    pid, kind, index_text = parts
    if kind not in (KIND_TITLE, KIND_BULLET):
        raise StoreFormatError(f"byte {offset}: record kind {kind!r} is not title/bullet")
    try:
        index = int(index_text)
    except ValueError:
        raise StoreFormatError(f"byte {offset}: record index {index_text!r} is not an integer") from None
    return (pid, kind, index)


def save_store(
    path: str | Path,
    dim: int,
    records: Iterable[tuple[SequenceKey, np.ndarray, np.ndarray | None]],
) -> int:
    """Writes an embedding store file; returns the record count.

    ``records`` yields ``(key, token_matrix, cls_vector_or_None)``.
    Token matrices are cast to little-endian float32; the CLS row, when
    present, is written after the token rows. Writing is streamed, but
    the record count lives in the header, so the count is patched in at
    the end and the iterable is consumed exactly once.
    """
    path = Path(path)
    count = 0
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(STORE_MAGIC, STORE_VERSION, dim, 0))
        for key, mat, cls_vec in records:
            mat = np.asarray(mat, dtype="<f4")
            if mat.ndim != 2 or mat.shape[1] != dim or mat.shape[0] < 1:
                raise ValueError(f"record {key}: expected (n>=1, {dim}) matrix, got {mat.shape}")
            raw_key = _format_key(key)
            if len(raw_key) > 0xFFFF:
                raise ValueError(f"record {key}: key too long")
            fh.write(_REC_KEY_LEN.pack(len(raw_key)))
            fh.write(raw_key)
            fh.write(_REC_COUNTS.pack(mat.shape[0], 0 if cls_vec is None else 1))
            fh.write(mat.tobytes(order="C"))
            if cls_vec is not None:
                cls_arr = np.asarray(cls_vec, dtype="<f4").reshape(-1)
                if cls_arr.shape[0] != dim:
                    raise ValueError(f"record {key}: CLS vector has width {cls_arr.shape[0]}")
                fh.write(cls_arr.tobytes())
            count += 1
        fh.seek(0)
        fh.write(_HEADER.pack(STORE_MAGIC, STORE_VERSION, dim, count))
    return count


def load_store(path: str | Path) -> EmbeddingStore:
    """Reads an embedding store file, validating the format strictly.

    Raises:
        StoreFormatError: On any structural problem; the message names
            the byte offset where the problem was detected.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise StoreFormatError(f"byte 0: file too short for header ({len(data)} bytes)")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != STORE_MAGIC:
        raise StoreFormatError(f"byte 0: bad magic {magic!r}, expected {STORE_MAGIC!r}")
    if version != STORE_VERSION:
        raise StoreFormatError(f"byte 4: unsupported version {version}, expected {STORE_VERSION}")
    if dim < 1:
        raise StoreFormatError(f"byte 8: dim must be >= 1, got {dim}")

    rows: dict[SequenceKey, np.ndarray] = {}
    cls_rows: dict[SequenceKey, np.ndarray] = {}
    offset = _HEADER.size
    for rec in range(count):
        rec_start = offset
        if offset + _REC_KEY_LEN.size > len(data):
            raise StoreFormatError(f"byte {offset}: truncated record {rec} (key length)")
        (key_len,) = _REC_KEY_LEN.unpack_from(data, offset)
        offset += _REC_KEY_LEN.size
        if offset + key_len > len(data):
            raise StoreFormatError(f"byte {offset}: truncated record {rec} (key)")
        key = _parse_key(data[offset : offset + key_len], rec_start)
        offset += key_len
        if offset + _REC_COUNTS.size > len(data):
            raise StoreFormatError(f"byte {offset}: truncated record {rec} (counts)")
        token_count, has_cls = _REC_COUNTS.unpack_from(data, offset)
        offset += _REC_COUNTS.size
        if token_count < 1:
            raise StoreFormatError(f"byte {rec_start}: record {key} has zero tokens")
        if has_cls not in (0, 1):
            raise StoreFormatError(f"byte {rec_start}: record {key} has_cls flag is {has_cls}")
        n_rows = token_count + has_cls
        nbytes = n_rows * dim * 4
        if offset + nbytes > len(data):
            raise StoreFormatError(f"byte {offset}: truncated record {rec} (vectors)")
        block = np.frombuffer(data, dtype="<f4", count=n_rows * dim, offset=offset)
        offset += nbytes
        mat = block.reshape(n_rows, dim).astype(np.float64)
        if key in rows:
            raise StoreFormatError(f"byte {rec_start}: duplicate record key {key}")
        if has_cls:
            rows[key] = mat[:token_count]
            cls_rows[key] = mat[token_count]
        else:
            rows[key] = mat
    if offset != len(data):
        raise StoreFormatError(
            f"byte {offset}: {len(data) - offset} trailing bytes after {count} records"
        )
    return EmbeddingStore(dim=dim, rows=rows, cls_rows=cls_rows)


@dataclass
class ProjectionHead:
    """Linear map from store width to the learned embedding width."""

    weights: np.ndarray  # (dim_in, dim_out), float64

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("projection weights must be a 2-d matrix")

    @property
    def dim_in(self) -> int:
        return self.weights.shape[0]

    @property
    def dim_out(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def create(cls, dim_in: int, dim_out: int, seed: int) -> "ProjectionHead":
        """Gaussian init scaled by 1/sqrt(dim_in), seeded for reproducibility."""
        rng = np.random.default_rng(seed)
        w = rng.standard_normal((dim_in, dim_out)) / np.sqrt(dim_in)
        return cls(weights=w)

    @classmethod
    def identity(cls, dim: int) -> "ProjectionHead":
        return cls(weights=np.eye(dim, dtype=np.float64))


@dataclass(frozen=True)
class SpanEmbedding:
    """A span's unit-norm embedding and where it came from."""

    location: Location
    vector: np.ndarray


def _location_of(span) -> Location:
    if isinstance(span, tuple):
        return span
    return span.location


def span_mean(store, location: Location) -> np.ndarray:
    """Mean of the span's token vectors (pre-projection), shape (dim,)."""
    pid, kind, index, start, end = location
    mat = store.tokens((pid, kind, index))
    if not (0 <= start < end <= mat.shape[0]):
        raise ValueError(
            f"span {location}: out of bounds for {mat.shape[0]} stored token vectors"
        )
    return mat[start:end].mean(axis=0)


def span_embedding(span, store, head: ProjectionHead) -> SpanEmbedding:
    """Projects the span's token mean through the head and normalizes.

    Raises:
        ValueError: If the projected vector has zero norm (degenerate span).
    """
    loc = _location_of(span)
    mean = span_mean(store, loc)
    u = mean @ head.weights
    norm = float(np.linalg.norm(u))
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError(f"span {loc}: degenerate embedding (norm {norm})")
    return SpanEmbedding(location=loc, vector=u / norm)


def product_context(product: Product, store) -> np.ndarray:
    """Context vector for one product, in store coordinates.

    Uses the mean of CLS rows when every sequence has one; otherwise
    falls back to the mean over sequences of token means.
    """
    keys = [seq.key for seq in product.sequences()]
    cls_vecs = [store.cls(k) for k in keys]
    if all(v is not None for v in cls_vecs):
        return np.mean(np.stack(cls_vecs), axis=0)
    means = [store.tokens(k).mean(axis=0) for k in keys]
    return np.mean(np.stack(means), axis=0)
