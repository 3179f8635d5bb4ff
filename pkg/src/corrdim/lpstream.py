"""Log-probability stream data model and the LPRS binary file format.

A stream is a length-N sequence of D-dimensional next-token log-probability
vectors (natural log), optionally paired with the realized token ids.  All
other modules consume this type.  Streams are immutable after construction;
transforms always build new streams.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Optional, Union

import numpy as np

MAGIC = b"LPRS"
VERSION = 1

FLAG_TOKEN_IDS = 1 << 0
FLAG_NORMALIZED = 1 << 1
FLAG_FP16 = 1 << 2
_KNOWN_FLAGS = FLAG_TOKEN_IDS | FLAG_NORMALIZED | FLAG_FP16

#: Max allowed |logsumexp| per row of a stream flagged as normalized.
NORMALIZATION_TOL = 1e-3

_HEADER = struct.Struct("<4sIIQQI")


class StreamError(Exception):
    """Base class for stream construction and (de)serialization failures."""


class BadMagicError(StreamError):
    """Source does not start with the LPRS magic bytes."""


class UnsupportedVersionError(StreamError):
    """File declares a format version this reader does not implement."""


class TruncatedPayloadError(StreamError):
    """Source ended before the declared payload was fully read."""


class InvariantError(StreamError):
    """Stream contents violate a LogProbStream invariant."""


@dataclass(frozen=True)
class ContextMode:
    """Context policy used when the stream was produced.

    ``window`` is the exact number of preceding tokens conditioned on;
    ``None`` means unbounded (the full available prefix).
    """

    window: Optional[int] = None

    def __post_init__(self):
        if self.window is not None and self.window < 1:
            raise ValueError("window context must be >= 1")

    @classmethod
    def unbounded(cls) -> "ContextMode":
        return cls(window=None)

    @classmethod
    def parse(cls, text: str) -> "ContextMode":
        """Parse ``"unbounded"`` or ``"window:C"``."""
        text = text.strip().lower()
        if text == "unbounded":
            return cls(window=None)
        if text.startswith("window:"):
            return cls(window=int(text.split(":", 1)[1]))
        raise ValueError(f"unrecognized context mode {text!r}")

    def __str__(self) -> str:
        return "unbounded" if self.window is None else f"window:{self.window}"


def logsumexp_rows(vectors: np.ndarray) -> np.ndarray:
    """Row-wise logsumexp with the max-shift trick, accumulated in FP32.

    Never overflows for finite inputs; rows of all ``-inf`` map to ``-inf``.
    """
    x = np.asarray(vectors, dtype=np.float32)
    m = x.max(axis=1)
    safe_m = np.where(np.isfinite(m), m, np.float32(0.0))
    p = np.exp(x - safe_m[:, None], dtype=np.float32)
    s = p.sum(axis=1, dtype=np.float32)
    with np.errstate(divide="ignore"):
        out = safe_m.astype(np.float64) + np.log(s.astype(np.float64))
    return np.where(np.isfinite(m), out, -np.inf)


@dataclass(frozen=True)
class NormalizationReport:
    """Per-row |logsumexp| diagnostic for a stream."""

    per_row: np.ndarray
    max_abs: float

    @property
    def ok(self) -> bool:
        return self.max_abs <= NORMALIZATION_TOL


@dataclass(frozen=True, eq=False)
class LogProbStream:
    """N x D matrix of log-probabilities plus optional realized token ids.

    Parameters
    ----------
    vectors : ndarray, shape (n_steps, dim), float16 or float32
        Row t is the log-distribution over the vocabulary at step t.
        Entries must be finite or ``-inf`` (exact zero probability);
        NaN and ``+inf`` are rejected.
    token_ids : ndarray of uint32 or None
        Realized token index per step, each in ``[0, dim)``.  Required for
        perplexity; absent for purely geometric streams.
    normalized : bool
        Declares every row a valid log-distribution
        (|logsumexp| <= ``NORMALIZATION_TOL`` accumulated in FP32).
    meta : dict
        Free-form JSON-serializable provenance (model id, context mode,
        reduction width or "full", tokenizer note, ...).
    """

    vectors: np.ndarray
    token_ids: Optional[np.ndarray] = None
    normalized: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.vectors)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise InvariantError("vectors must be a non-empty 2-D matrix")
        # Normalize to native-endian float16/float32; anything else becomes FP32.
        if v.dtype.kind == "f" and v.dtype.itemsize == 2:
            v = v.astype(np.float16, copy=False)
        elif v.dtype.kind == "f" and v.dtype.itemsize == 4:
            v = v.astype(np.float32, copy=False)
        else:
            v = v.astype(np.float32)
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        if self.token_ids is not None:
            ids = np.ascontiguousarray(np.asarray(self.token_ids, dtype=np.uint32))
            if ids.shape != (v.shape[0],):
                raise InvariantError("token_ids length must equal n_steps")
            ids.setflags(write=False)
            object.__setattr__(self, "token_ids", ids)
        self.validate()

    @property
    def n_steps(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def validate(self) -> None:
        """Raise :class:`InvariantError` on any invariant violation."""
        v = self.vectors
        if np.isnan(v).any():
            raise InvariantError("invalid entry: NaN in vectors")
        if np.isposinf(v).any():
            raise InvariantError("invalid entry: +inf in vectors")
        if self.token_ids is not None and self.token_ids.size:
            if int(self.token_ids.max()) >= self.dim:
                raise InvariantError("token id out of range [0, dim)")
        if self.normalized:
            report = validate_normalization(self)
            if not report.ok:
                raise InvariantError(
                    f"normalized stream has max |logsumexp| = {report.max_abs:.3e} "
                    f"> {NORMALIZATION_TOL:g}"
                )

    def __eq__(self, other) -> bool:
        if not isinstance(other, LogProbStream):
            return NotImplemented
        if self.vectors.dtype != other.vectors.dtype:
            return False
        if self.vectors.shape != other.vectors.shape:
            return False
        if self.vectors.tobytes() != other.vectors.tobytes():
            return False
        if (self.token_ids is None) != (other.token_ids is None):
            return False
        if self.token_ids is not None and not np.array_equal(
            self.token_ids, other.token_ids
        ):
            return False
        return self.normalized == other.normalized and self.meta == other.meta

    def replace(self, **kwargs) -> "LogProbStream":
        """Build a new stream with some fields substituted."""
        current = dict(
            vectors=self.vectors,
            token_ids=self.token_ids,
            normalized=self.normalized,
            meta=self.meta,
        )
        current.update(kwargs)
        return LogProbStream(**current)


def validate_normalization(stream: LogProbStream) -> NormalizationReport:
    """Report per-row |logsumexp| (FP32 accumulation, max-shift).

    Diagnostic only; never raises.  Rows containing ``-inf`` participate
    normally (zero-probability entries contribute nothing to the sum).
    """
    lse = logsumexp_rows(stream.vectors)
    per_row = np.abs(lse)
    return NormalizationReport(per_row=per_row, max_abs=float(per_row.max()))


def _resolve_sink(destination) -> tuple[BinaryIO, bool]:
    if isinstance(destination, (str, Path)):
        return open(destination, "wb"), True
    return destination, False


def _resolve_source(source) -> tuple[BinaryIO, bool]:
    if isinstance(source, (str, Path)):
        return open(source, "rb"), True
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(source), True
    return source, False


def write_stream(stream: LogProbStream, destination: Union[str, Path, BinaryIO]) -> int:
    """Serialize a stream in LPRS format; returns the number of bytes written.

    The format is little-endian and round-trips bit-exactly for both FP16
    and FP32 payloads.  Invariant violations are rejected, never repaired.
    """
    stream.validate()
    flags = 0
    if stream.token_ids is not None:
        flags |= FLAG_TOKEN_IDS
    if stream.normalized:
        flags |= FLAG_NORMALIZED
    if stream.vectors.dtype == np.float16:
        flags |= FLAG_FP16

    meta_blob = json.dumps(stream.meta, sort_keys=True, separators=(",", ":")).encode(
        "utf-8"
    )
    sink, owned = _resolve_sink(destination)
    try:
        n = sink.write(
            _HEADER.pack(MAGIC, VERSION, flags, stream.n_steps, stream.dim, len(meta_blob))
        )
        n += sink.write(meta_blob)
        if stream.token_ids is not None:
            n += sink.write(stream.token_ids.astype("<u4", copy=False).tobytes())
        payload_dtype = "<f2" if stream.vectors.dtype == np.float16 else "<f4"
        n += sink.write(stream.vectors.astype(payload_dtype, copy=False).tobytes())
        return n
    finally:
        if owned:
            sink.close()


def _read_exact(src: BinaryIO, count: int, what: str) -> bytes:
    data = src.read(count)
    if len(data) != count:
        raise TruncatedPayloadError(f"truncated payload while reading {what}")
    return data


def read_stream(source: Union[str, Path, bytes, BinaryIO]) -> LogProbStream:
    """Deserialize an LPRS stream, validating invariants on load.

    The normalization invariant is checked only when the file carries the
    normalized flag.  Distinct errors: :class:`BadMagicError`,
    :class:`UnsupportedVersionError`, :class:`TruncatedPayloadError`,
    :class:`InvariantError`.
    """
    src, owned = _resolve_source(source)
    try:
        header = _read_exact(src, _HEADER.size, "header")
        magic, version, flags, n_steps, dim, meta_len = _HEADER.unpack(header)
        if magic != MAGIC:
            raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise UnsupportedVersionError(f"unsupported version {version}")
        if flags & ~_KNOWN_FLAGS:
            raise UnsupportedVersionError(f"unknown flag bits 0x{flags:x}")
        if n_steps < 1 or dim < 1:
            raise InvariantError("n_steps and dim must be positive")

        meta = json.loads(_read_exact(src, meta_len, "meta").decode("utf-8"))

        token_ids = None
        if flags & FLAG_TOKEN_IDS:
            raw = _read_exact(src, 4 * n_steps, "token ids")
            token_ids = np.frombuffer(raw, dtype="<u4").copy()

        dtype = np.dtype("<f2") if flags & FLAG_FP16 else np.dtype("<f4")
        raw = _read_exact(src, dtype.itemsize * n_steps * dim, "vector payload")
        vectors = np.frombuffer(raw, dtype=dtype).reshape(n_steps, dim).copy()

        return LogProbStream(
            vectors=vectors,
            token_ids=token_ids,
            normalized=bool(flags & FLAG_NORMALIZED),
            meta=meta,
        )
    finally:
        if owned:
            src.close()
