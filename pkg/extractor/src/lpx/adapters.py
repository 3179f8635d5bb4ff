"""Model and tokenizer adapters.

The extractor core only needs three things from a model: the vocabulary
width, an optional hard context limit, and float32 next-token logits.  The
:class:`CausalScorer` protocol captures that, so tests can plug in scripted
models and the CLI can wrap any local Hugging Face causal LM.
"""

from __future__ import annotations

from typing import Optional, Protocol, Sequence

import numpy as np


class TokenizerLike(Protocol):
    def encode(self, text: str) -> list[int]: ...


class CausalScorer(Protocol):
    """Teacher-forced scorer over integer token sequences."""

    vocab_size: int
    max_context: Optional[int]

    def full_logits(self, ids: Sequence[int]) -> np.ndarray:
        """Logits (T, V) float32: row t predicts the token after position t."""
        ...

    def last_logits(self, batch: Sequence[Sequence[int]]) -> np.ndarray:
        """Logits (B, V) float32 at the last position of each sequence."""
        ...


class CharTokenizer:
    """Deterministic character-level tokenizer over a fixed alphabet."""

    def __init__(self, alphabet: str):
        if len(set(alphabet)) != len(alphabet):
            raise ValueError("alphabet must not repeat characters")
        self.alphabet = alphabet
        self._index = {ch: i for i, ch in enumerate(alphabet)}

    @property
    def vocab_size(self) -> int:
        return len(self.alphabet)

    def encode(self, text: str) -> list[int]:
        try:
            return [self._index[ch] for ch in text]
        except KeyError as exc:
            raise ValueError(f"character {exc.args[0]!r} not in alphabet") from exc

    def decode(self, ids: Sequence[int]) -> str:
        return "".join(self.alphabet[i] for i in ids)


class WordTokenizer:
    """Whitespace word-level tokenizer over a fixed vocabulary."""

    def __init__(self, vocab: Sequence[str]):
        self.vocab = list(vocab)
        self._index = {w: i for i, w in enumerate(self.vocab)}
        if len(self._index) != len(self.vocab):
            raise ValueError("vocabulary must not repeat words")

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def encode(self, text: str) -> list[int]:
        try:
            return [self._index[w] for w in text.split()]
        except KeyError as exc:
            raise ValueError(f"word {exc.args[0]!r} not in vocabulary") from exc

    def decode(self, ids: Sequence[int]) -> str:
        return " ".join(self.vocab[i] for i in ids)


class TorchCausalLM:
    """Wraps a torch causal LM (e.g. Hugging Face) behind the scorer protocol.

    Log-softmax is applied downstream; this adapter only guarantees float32
    logits regardless of the model's compute precision.  Batched window
    scoring right-pads and reads each row at its own final real position,
    which causal attention keeps identical to an unpadded forward.
    """

    def __init__(self, model, max_context: Optional[int] = None, device: str = "cpu"):
        import torch

        self._torch = torch
        self.model = model.to(device).eval()
        self.device = device
        self.vocab_size = int(model.config.vocab_size)
        if max_context is None:
            max_context = getattr(model.config, "max_position_embeddings", None)
        self.max_context = max_context

    def full_logits(self, ids: Sequence[int]) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            tensor = torch.tensor([list(ids)], dtype=torch.long, device=self.device)
            logits = self.model(tensor).logits[0]
        return logits.float().cpu().numpy()

    def last_logits(self, batch: Sequence[Sequence[int]]) -> np.ndarray:
        torch = self._torch
        lengths = [len(row) for row in batch]
        width = max(lengths)
        padded = torch.zeros((len(batch), width), dtype=torch.long)
        mask = torch.zeros((len(batch), width), dtype=torch.long)
        for r, row in enumerate(batch):
            padded[r, : len(row)] = torch.tensor(list(row), dtype=torch.long)
            mask[r, : len(row)] = 1
        with torch.no_grad():
            logits = self.model(
                padded.to(self.device), attention_mask=mask.to(self.device)
            ).logits
        rows = torch.arange(len(batch))
        out = logits[rows, torch.tensor(lengths) - 1]
        return out.float().cpu().numpy()


def load_hf_model(model_id: str, device: str = "cpu") -> TorchCausalLM:
    """Load a local (or cached) Hugging Face causal LM by id or path."""
    from transformers import AutoModelForCausalLM

    model = AutoModelForCausalLM.from_pretrained(model_id)
    return TorchCausalLM(model, device=device)


def load_hf_tokenizer(model_id: str):
    from transformers import AutoTokenizer

    return AutoTokenizer.from_pretrained(model_id)
