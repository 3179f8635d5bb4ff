"""Pairwise-distance geometry: fused blockwise counting, delay embedding,
recurrence matrices.

Pair counting yields exact integers: for a threshold grid ``eps`` the result
at index k is ``#{(i, j) : i < j, ||x_i - x_j|| < eps_k}``.  The tiled path
(:func:`count_pairs_fused`) never materializes the full distance matrix and
must agree with the double-loop oracle (:func:`count_pairs_naive`) exactly,
for every grid and tile size.

Squared distances are compared against squared thresholds, which is exact
for the strict ``<`` of non-negative values.  Internal distance arithmetic
runs in float64 after upcasting FP16/FP32 payloads, exceeding the FP32
floor required of distance computations.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .lpstream import LogProbStream

DEFAULT_TILE = 512


class InfiniteEntryError(ValueError):
    """A vector entry is infinite; distance arithmetic would be poisoned."""


@dataclass(frozen=True)
class ThresholdGrid:
    """Strictly increasing, finite, positive distance thresholds."""

    eps: np.ndarray

    def __post_init__(self):
        e = np.ascontiguousarray(np.asarray(self.eps, dtype=np.float64))
        if e.ndim != 1 or e.size < 1:
            raise ValueError("threshold grid must be a non-empty 1-D sequence")
        if not np.isfinite(e).all() or (e <= 0).any():
            raise ValueError("thresholds must be finite and positive")
        if (np.diff(e) <= 0).any():
            raise ValueError("thresholds must be strictly increasing")
        e.setflags(write=False)
        object.__setattr__(self, "eps", e)

    def __len__(self) -> int:
        return self.eps.size


@dataclass(frozen=True)
class PairCounts:
    """Exact pair counts per threshold; non-decreasing, bounded by n_pairs."""

    counts: np.ndarray
    n_pairs: int

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.counts, dtype=np.int64))
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        if (c < 0).any() or (np.diff(c) < 0).any() or (c > self.n_pairs).any():
            raise ValueError("counts must be non-decreasing in [0, n_pairs]")


@dataclass(frozen=True)
class RecurrenceMatrix:
    """Boolean N x N matrix: ``bits[i, j]`` iff ``||x_i - x_j|| < eps``."""

    bits: np.ndarray
    eps: float

    @property
    def n(self) -> int:
        return self.bits.shape[0]


def _as_matrix(stream_or_array, require_min_rows: int = 1) -> np.ndarray:
    """Extract the vector matrix, rejecting any infinite entry."""
    if isinstance(stream_or_array, LogProbStream):
        x = stream_or_array.vectors
    else:
        x = np.asarray(stream_or_array)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < require_min_rows:
        raise ValueError(f"need at least {require_min_rows} vectors")
    if not np.isfinite(x).all():
        raise InfiniteEntryError(
            "infinite entry encountered; clamp -inf log-probabilities before "
            "distance computation"
        )
    return np.ascontiguousarray(x)


def _bucket_histogram(d2: np.ndarray, eps_sq: np.ndarray) -> np.ndarray:
    # searchsorted(side="right") yields, per pair, how many eps_k^2 <= d^2;
    # bucket b therefore collects pairs first counted at threshold index b,
    # so cumsum(hist)[k] == #{pairs : d^2 < eps_k^2} with strict inequality.
    idx = np.searchsorted(eps_sq, d2.ravel(), side="right")
    return np.bincount(idx, minlength=eps_sq.size + 1)


def count_pairs_naive(stream_or_array, grid: ThresholdGrid) -> PairCounts:
    """Reference oracle: double loop over all i < j, direct differences.

    Exact integer counts; independent of the tiled implementation (no
    expanded-form algebra, no tiling).
    """
    x = _as_matrix(stream_or_array, require_min_rows=2).astype(np.float64)
    n = x.shape[0]
    eps_sq = np.square(grid.eps)
    hist = np.zeros(eps_sq.size + 1, dtype=np.int64)
    for i in range(n - 1):
        diff = x[i + 1 :] - x[i]
        d2 = (diff * diff).sum(axis=1)
        hist += _bucket_histogram(d2, eps_sq)
    counts = np.cumsum(hist[:-1])
    return PairCounts(counts=counts, n_pairs=n * (n - 1) // 2)


# Off-diagonal tiles of one row strip are dispatched in bounded batches so
# small tile sizes are not throttled by per-tile call overhead; the budget
# caps the batch buffers at a constant independent of N.
_GROUP_ELEMENTS = 1 << 21


def _strip_histogram(x, norms, i0, tile, eps_sq, triu_cache):
    """Histogram over all tiles (i, j), j <= i, of the row strip at i0.

    Distances use ``||a||^2 + ||b||^2 - 2 a.b`` per tile.  Squared
    distances driven negative by FP cancellation land in the first bucket,
    exactly as if clamped to zero, because every threshold is positive.
    """
    d = x.shape[1]
    xi = x[i0 : i0 + tile].astype(np.float64, copy=False)
    ni = xi.shape[0]
    norms_i = norms[i0 : i0 + ni]
    hist = np.zeros(eps_sq.size + 1, dtype=np.int64)

    # Diagonal tile: each unordered pair once, self-pairs excluded.
    d2 = norms_i[:, None] + norms_i[None, :] - 2.0 * (xi @ xi.T)
    if ni not in triu_cache:
        triu_cache[ni] = np.triu_indices(ni, k=1)
    r, c = triu_cache[ni]
    if r.size:
        hist += _bucket_histogram(d2[r, c], eps_sq)

    group = max(1, min(_GROUP_ELEMENTS // (tile * tile), _GROUP_ELEMENTS // (tile * d)))
    n_jtiles = i0 // tile  # j < i0 splits into full tiles exactly
    for g0 in range(0, n_jtiles, group):
        g = min(group, n_jtiles - g0)
        j0 = g0 * tile
        xj = x[j0 : j0 + g * tile].reshape(g, tile, d).astype(np.float64, copy=False)
        dots = xi[None, :, :] @ xj.transpose(0, 2, 1)
        d2 = norms_i[None, :, None] + norms[j0 : j0 + g * tile].reshape(g, 1, tile)
        d2 -= 2.0 * dots
        hist += _bucket_histogram(d2, eps_sq)
    return hist


def count_pairs_fused(
    stream_or_array,
    grid: ThresholdGrid,
    tile: int = DEFAULT_TILE,
    threads: int = 1,
) -> PairCounts:
    """Fused tiled distance-and-count pass.

    Walks index tiles (i, j) with j <= i, computes tile distances on the fly
    via ``||a||^2 + ||b||^2 - 2 a.b`` (negative squared distances count as
    zero), compares them against every threshold in place, and accumulates
    into shared integer counters.  The full distance matrix is never
    materialized; peak extra memory is O(tile^2 + tile * D) plus a fixed
    batching buffer.

    Counts are exact integers, so results are independent of tile iteration
    order and thread count, and identical to :func:`count_pairs_naive`.
    """
    if tile < 1:
        raise ValueError("tile must be >= 1")
    x = _as_matrix(stream_or_array, require_min_rows=2)
    n = x.shape[0]
    eps_sq = np.square(grid.eps)

    # Squared norms are computed once (O(N) extra) so every tile sees the
    # same per-row value regardless of the tiling.
    norms = np.empty(n, dtype=np.float64)
    for i0 in range(0, n, tile):
        block = x[i0 : i0 + tile].astype(np.float64, copy=False)
        norms[i0 : i0 + tile] = np.einsum("ij,ij->i", block, block)

    strips = list(range(0, n, tile))
    # Only two strip heights occur; prepopulate so threads never race.
    triu_cache = {
        ni: np.triu_indices(ni, k=1)
        for ni in {min(tile, n), n - strips[-1]}
    }

    def run(i0):
        return _strip_histogram(x, norms, i0, tile, eps_sq, triu_cache)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hists = list(pool.map(run, strips))
        hist = np.sum(hists, axis=0)
    else:
        hist = np.zeros(eps_sq.size + 1, dtype=np.int64)
        for i0 in strips:
            hist += run(i0)
    counts = np.cumsum(hist[:-1])
    return PairCounts(counts=counts, n_pairs=n * (n - 1) // 2)


def delay_embed(stream: LogProbStream, tau: int) -> LogProbStream:
    """Concatenate ``tau`` consecutive vectors into one state per step.

    Output has ``n_steps - tau + 1`` rows of dimension ``tau * dim``; row t
    is ``[x_t; ...; x_{t+tau-1}]``.  Token ids are dropped and the delay is
    recorded in meta.  ``tau=1`` reproduces the input vectors exactly; for
    ``tau > 1`` rows are no longer log-distributions, so the normalized flag
    is cleared.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    n = stream.n_steps
    if tau > n:
        raise ValueError(f"delay {tau} exceeds stream length {n}")
    out_rows = n - tau + 1
    x = stream.vectors
    embedded = np.concatenate([x[i : i + out_rows] for i in range(tau)], axis=1)
    meta = dict(stream.meta)
    meta["delay"] = tau
    return LogProbStream(
        vectors=embedded,
        token_ids=None,
        normalized=stream.normalized and tau == 1,
        meta=meta,
    )


def recurrence_matrix(stream_or_array, eps: float) -> RecurrenceMatrix:
    """Boolean recurrence matrix at threshold ``eps`` (symmetric, True diagonal)."""
    if not (eps > 0):
        raise ValueError("eps must be positive")
    x = _as_matrix(stream_or_array).astype(np.float64, copy=False)
    n = x.shape[0]
    norms = np.einsum("ij,ij->i", x, x)
    eps_sq = float(eps) ** 2
    bits = np.zeros((n, n), dtype=bool)
    step = DEFAULT_TILE
    # Upper-triangular tiles only, mirrored, so symmetry is exact by
    # construction rather than trusting matmul to round symmetrically.
    for i0 in range(0, n, step):
        xi = x[i0 : i0 + step]
        for j0 in range(i0, n, step):
            xj = x[j0 : j0 + step]
            d2 = norms[i0 : i0 + step, None] + norms[None, j0 : j0 + step]
            d2 -= 2.0 * (xi @ xj.T)
            np.maximum(d2, 0.0, out=d2)
            block = d2 < eps_sq
            bits[i0 : i0 + step, j0 : j0 + step] = block
            if j0 != i0:
                bits[j0 : j0 + step, i0 : i0 + step] = block.T
    np.fill_diagonal(bits, True)
    return RecurrenceMatrix(bits=bits, eps=float(eps))


def write_recurrence_pgm(
    rm: RecurrenceMatrix, destination: Union[str, Path], comment: Optional[str] = None
) -> None:
    """Export as binary PGM (P5): 0 = recurrent (black), 255 = white."""
    pixels = np.where(rm.bits, 0, 255).astype(np.uint8)
    with open(destination, "wb") as fh:
        fh.write(b"P5\n")
        if comment:
            fh.write(f"# {comment}\n".encode("utf-8"))
        fh.write(f"{rm.n} {rm.n}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def write_recurrence_csv(
    rm: RecurrenceMatrix, destination: Union[str, Path], comment: Optional[str] = None
) -> None:
    """Export recurrent pairs as CSV rows ``i,j`` with i <= j.

    The matrix is symmetric, so each unordered pair appears once; diagonal
    entries are included.
    """
    r, c = np.nonzero(np.triu(rm.bits))
    with open(destination, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["i", "j"])
        writer.writerows(zip(r.tolist(), c.tolist()))
