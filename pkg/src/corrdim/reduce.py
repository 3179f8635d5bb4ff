"""Deterministic modulo-based vocabulary reduction.

The projection maps R^source_dim to R^target_dim by summing coordinates
with equal index modulo the target width:

    out[i] = sum of x[j] over all j with j % target_dim == i

It is linear and fully deterministic, unlike random projections, so
repeated runs and different thread counts reduce identically.

Two summation spaces are offered for streams: ``"prob"`` exponentiates the
stored log-probabilities (shifted by the row max so overflow cannot occur),
sums the groups, and re-logs, keeping each row a valid log-distribution;
``"log"`` sums the stored log values verbatim.  They are not equivalent;
the space used is recorded in the output meta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lpstream import LogProbStream

SPACES = ("prob", "log")


@dataclass(frozen=True)
class ModuloProjection:
    """Grouping of ``source_dim`` coordinates into ``target_dim`` sums."""

    source_dim: int
    target_dim: int

    def __post_init__(self):
        if self.source_dim < 1:
            raise ValueError("source_dim must be >= 1")
        if not 1 <= self.target_dim <= self.source_dim:
            raise ValueError("target_dim must satisfy 1 <= v <= source_dim")

    @property
    def group_rows(self) -> int:
        """Largest group size, ceil(source_dim / target_dim)."""
        return -(-self.source_dim // self.target_dim)


def _group_sum(matrix: np.ndarray, proj: ModuloProjection) -> np.ndarray:
    """Row-wise modulo group sums; accumulates in at least FP32."""
    n, omega = matrix.shape
    v = proj.target_dim
    g = proj.group_rows
    acc = np.result_type(matrix.dtype, np.float32)
    padded = np.zeros((n, g * v), dtype=acc)
    padded[:, :omega] = matrix
    # Column j lands in group j % v and block j // v, so the reshape below
    # realizes the modulo grouping exactly.
    return padded.reshape(n, g, v).sum(axis=1, dtype=acc)


def project_vector(proj: ModuloProjection, x) -> np.ndarray:
    """Apply the raw linear group sum to one vector."""
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != proj.source_dim:
        raise ValueError(
            f"dimension mismatch: expected length {proj.source_dim}, got {x.shape}"
        )
    return _group_sum(x[None, :], proj)[0]


def project_stream(
    proj: ModuloProjection, stream: LogProbStream, space: str = "prob"
) -> LogProbStream:
    """Project every row of a stream to ``target_dim`` coordinates.

    ``space="prob"`` conserves each row's total probability mass and keeps
    the normalized flag; ``space="log"`` sums stored values directly and
    clears the flag.  ``target_dim == source_dim`` is the identity in both
    spaces and returns the payload values unchanged.
    """
    if space not in SPACES:
        raise ValueError(f"space must be one of {SPACES}")
    if stream.dim != proj.source_dim:
        raise ValueError(
            f"dimension mismatch: stream dim {stream.dim} != projection "
            f"source dim {proj.source_dim}"
        )
    meta = dict(stream.meta)
    meta["reduce"] = proj.target_dim
    meta["reduce_space"] = space

    if proj.target_dim == proj.source_dim:
        # j % dim == j: a permutation-free identity; skip the exp/log round
        # trip so values pass through bit-exactly in either space.
        return stream.replace(
            meta=meta, normalized=stream.normalized and space == "prob"
        )

    dtype = stream.vectors.dtype
    if space == "log":
        out = _group_sum(stream.vectors.astype(np.float32, copy=False), proj)
        return LogProbStream(
            vectors=out.astype(dtype), token_ids=None, normalized=False, meta=meta
        )

    x = stream.vectors.astype(np.float32, copy=False)
    m = x.max(axis=1)
    safe_m = np.where(np.isfinite(m), m, np.float32(0.0))
    p = np.exp(x - safe_m[:, None], dtype=np.float32)
    sums = _group_sum(p, proj)
    with np.errstate(divide="ignore"):
        out = np.log(sums, dtype=np.float32) + safe_m[:, None]
    out = np.where(np.isfinite(m)[:, None], out, -np.inf)
    return LogProbStream(
        vectors=out.astype(dtype),
        token_ids=None,
        normalized=stream.normalized,
        meta=meta,
    )
