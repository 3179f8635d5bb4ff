"""Teacher-forced extraction of next-token log-probability streams.

Given tokenized text ``w_0 .. w_{T-1}``, the stream has ``T - 1`` rows: row
t is the model's log-distribution for position t+1, and ``token_ids[t]`` is
the realized ``w_{t+1}`` that row predicts.  No sampling ever happens here;
extraction is scoring only.

Two context policies:

- unbounded: one full-sequence pass; the whole text must fit the model's
  hard context limit, otherwise the error names that limit.
- window(c): every position is re-scored conditioned on exactly its most
  recent ``min(position, c)`` tokens.  A ``stride`` larger than 1 scores
  that many consecutive positions per forward pass, letting the context
  grow by up to ``stride - 1`` tokens between window restarts; the stride
  is recorded in meta as a deviation from per-position exactness.

Log-softmax always runs in float32 regardless of the model's compute
precision; payloads are stored FP16 by default (FP32 on request).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from corrdim.lpstream import ContextMode, LogProbStream, write_stream
from corrdim.reduce import ModuloProjection, project_stream

from .adapters import CausalScorer, TokenizerLike, load_hf_model, load_hf_tokenizer


class ExtractionError(RuntimeError):
    pass


class ContextOverflowError(ExtractionError):
    """Unbounded-mode text exceeds the model's hard context limit."""

    def __init__(self, needed: int, limit: int):
        super().__init__(
            f"text needs {needed} context positions but the model's limit is "
            f"{limit}; use --context window:C with C <= {limit} instead"
        )
        self.needed = needed
        self.limit = limit


@dataclass(frozen=True)
class ExtractionJob:
    """One extraction run: model, text, context policy, output."""

    model: str
    text_path: Union[str, Path]
    out_path: Union[str, Path]
    context: ContextMode = ContextMode.unbounded()
    fp32: bool = False
    reduce_width: Optional[int] = None
    stride: int = 1
    batch_size: int = 32
    device: str = "cpu"

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.reduce_width is not None and self.reduce_width < 1:
            raise ValueError("reduction width must be >= 1")


def _log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Float32 log-softmax with the max-shift trick, row-wise."""
    x = np.asarray(logits, dtype=np.float32)
    m = x.max(axis=-1, keepdims=True)
    shifted = x - m
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True, dtype=np.float32))
    return shifted - lse


def _score_unbounded(scorer: CausalScorer, ids: list[int]) -> np.ndarray:
    limit = scorer.max_context
    if limit is not None and len(ids) > limit:
        raise ContextOverflowError(needed=len(ids), limit=limit)
    logits = scorer.full_logits(ids)
    return _log_softmax_rows(logits[:-1])


def _window_jobs(n_positions: int, c: int, stride: int):
    """Forward passes covering scored positions 1..n_positions-1.

    Yields (input span, [scored positions]); position p is scored from the
    logits at span offset p - start - 1.
    """
    p = 1
    while p < n_positions:
        block = list(range(p, min(p + stride, n_positions)))
        start = max(0, block[0] - c)
        yield (start, block[-1] + 1), block
        p = block[-1] + 1


def _score_window(
    scorer: CausalScorer, ids: list[int], c: int, stride: int, batch_size: int
) -> np.ndarray:
    limit = scorer.max_context
    span_cap = c + stride - 1
    if limit is not None and span_cap > limit:
        raise ContextOverflowError(needed=span_cap, limit=limit)
    out = np.empty((len(ids) - 1, scorer.vocab_size), dtype=np.float32)
    jobs = list(_window_jobs(len(ids), c, stride))
    for b0 in range(0, len(jobs), batch_size):
        chunk = jobs[b0 : b0 + batch_size]
        batch = [ids[start:stop] for (start, stop), _ in chunk]
        if stride == 1:
            # one scored position per job: its logits sit at the last slot
            logits = scorer.last_logits([row[:-1] for row in batch])
            for ((_, _), block), row_logits in zip(chunk, logits):
                out[block[0] - 1] = _log_softmax_rows(row_logits[None, :])[0]
        else:
            for ((start, stop), block) in chunk:
                # the last scored token itself is never an input: its row
                # comes from the logits one slot earlier
                logits = scorer.full_logits(ids[start : stop - 1])
                for p in block:
                    rel = p - start - 1
                    out[p - 1] = _log_softmax_rows(logits[rel][None, :])[0]
    return out


def extract_stream(
    scorer: CausalScorer,
    tokenizer: TokenizerLike,
    text: str,
    context: ContextMode = ContextMode.unbounded(),
    fp32: bool = False,
    reduce_width: Optional[int] = None,
    stride: int = 1,
    batch_size: int = 32,
    meta: Optional[dict] = None,
) -> LogProbStream:
    """Score ``text`` through the model and build the stream in memory."""
    ids = tokenizer.encode(text)
    if len(ids) < 2:
        raise ExtractionError("text must tokenize to at least 2 tokens")
    if reduce_width is not None and reduce_width > scorer.vocab_size:
        raise ExtractionError(
            f"reduction width {reduce_width} exceeds vocabulary "
            f"{scorer.vocab_size}"
        )
    try:
        if context.window is None:
            logp = _score_unbounded(scorer, ids)
        else:
            logp = _score_window(scorer, ids, context.window, stride, batch_size)
    except (MemoryError, RuntimeError) as exc:
        if isinstance(exc, RuntimeError) and "memory" not in str(exc).lower():
            raise
        raise ExtractionError(
            "out of memory while scoring; consider a reduction width "
            "(--reduce) to shrink the emitted vectors"
        ) from exc

    full_meta = {
        "context": str(context),
        "reduce": "full" if reduce_width is None else reduce_width,
        "stride": stride,
        "scoring": "teacher-forced",
        "payload": "fp32" if fp32 else "fp16",
        "tokenizer": type(tokenizer).__name__,
    }
    if meta:
        full_meta.update(meta)
    stream = LogProbStream(
        vectors=logp if fp32 else logp.astype(np.float16),
        token_ids=np.asarray(ids[1:], dtype=np.uint32),
        normalized=True,
        meta=full_meta,
    )
    if reduce_width is not None and reduce_width != scorer.vocab_size:
        proj = ModuloProjection(
            source_dim=scorer.vocab_size, target_dim=reduce_width
        )
        stream = project_stream(proj, stream, space="prob")
    return stream


def extract(job: ExtractionJob, scorer=None, tokenizer=None) -> Path:
    """Run an extraction job end to end and write the LPRS file.

    ``scorer`` and ``tokenizer`` default to loading the job's model id via
    transformers; explicit arguments let callers reuse loaded models.
    """
    if scorer is None:
        scorer = load_hf_model(job.model, device=job.device)
    if tokenizer is None:
        tokenizer = load_hf_tokenizer(job.model)
    text = Path(job.text_path).read_text(encoding="utf-8")
    stream = extract_stream(
        scorer,
        tokenizer,
        text,
        context=job.context,
        fp32=job.fp32,
        reduce_width=job.reduce_width,
        stride=job.stride,
        batch_size=job.batch_size,
        meta={"model": job.model},
    )
    out = Path(job.out_path)
    write_stream(stream, out)
    return out
