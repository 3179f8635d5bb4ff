"""Baseline text and stream metrics for degeneration comparison.

N-gram statistics (Rep-N, Distinct-N, Zipf, Heaps) operate on any token
sequence; perplexity and conditional entropy operate on normalized
log-probability streams.  All metrics are invariant under bijective token
relabeling.
"""

from __future__ import annotations

from collections import Counter
from typing import Sequence

import numpy as np

from .lpstream import LogProbStream


def _ngrams(tokens: Sequence, n: int):
    return zip(*(tokens[i:] for i in range(n)))


def rep_n(tokens: Sequence, n: int) -> float:
    """Duplicate n-gram fraction: 1 - (#unique n-grams) / (#total n-grams)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    total = len(tokens) - n + 1
    if total < 1:
        raise ValueError(f"sequence of {len(tokens)} tokens is shorter than n={n}")
    unique = len(set(_ngrams(tokens, n)))
    return 1.0 - unique / total


def distinct_n(tokens: Sequence, n: int) -> float:
    """Unique n-gram fraction; complement of :func:`rep_n`."""
    return 1.0 - rep_n(tokens, n)


def _ols_slope(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom == 0.0:
        return 0.0
    return float(xc @ (y - y.mean()) / denom)


def zipf_coefficient(tokens: Sequence, top_k: int = 1000) -> float:
    """Power-law exponent of the rank-frequency curve, as a positive number.

    Unweighted OLS of log frequency vs log rank over the ``top_k`` most
    frequent tokens (or the whole vocabulary if smaller).
    """
    counts = Counter(tokens)
    if len(counts) < 2:
        raise ValueError("need at least 2 distinct tokens")
    freqs = np.array(sorted(counts.values(), reverse=True)[:top_k], dtype=np.float64)
    ranks = np.arange(1, freqs.size + 1, dtype=np.float64)
    return -_ols_slope(np.log(ranks), np.log(freqs))


def heaps_coefficient(tokens: Sequence, n_samples: int = 64) -> float:
    """Vocabulary-growth exponent: OLS slope of log V(n) vs log n.

    V(n) counts distinct tokens among the first n, evaluated at log-spaced
    prefix lengths.
    """
    total = len(tokens)
    if total < 10:
        raise ValueError("need at least 10 tokens")
    lengths = np.unique(
        np.geomspace(1, total, num=min(n_samples, total)).astype(np.int64)
    )
    seen: set = set()
    v_counts = []
    pos = 0
    for n in lengths:
        while pos < n:
            seen.add(tokens[pos])
            pos += 1
        v_counts.append(len(seen))
    v = np.array(v_counts, dtype=np.float64)
    return _ols_slope(np.log(lengths.astype(np.float64)), np.log(v))


def perplexity(stream: LogProbStream) -> float:
    """exp(-mean realized log-probability); requires token ids."""
    if stream.token_ids is None:
        raise ValueError("perplexity requires a stream with token_ids")
    if not stream.normalized:
        raise ValueError("perplexity requires a normalized stream")
    rows = np.arange(stream.n_steps)
    picked = stream.vectors[rows, stream.token_ids.astype(np.int64)].astype(np.float64)
    return float(np.exp(-picked.mean()))


def conditional_entropy(stream: LogProbStream) -> float:
    """Mean per-step entropy in nats: -sum_w p(w) log p(w).

    Entries of ``-inf`` (exact zero probability) contribute nothing.
    """
    if not stream.normalized:
        raise ValueError("conditional entropy requires a normalized stream")
    x = stream.vectors.astype(np.float64)
    finite = np.isfinite(x)
    terms = np.zeros_like(x)
    terms[finite] = np.exp(x[finite]) * x[finite]
    return float(-(terms.sum(axis=1)).mean())
