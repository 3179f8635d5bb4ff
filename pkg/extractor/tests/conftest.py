"""Shared fixtures: scripted stub model, a tiny local GPT-2, and a trained
one on a structured synthetic corpus.

The environment has no model-hub access, so all models are constructed (and
where needed, trained) locally; tests exercise the same code paths a
downloaded checkpoint would.
"""

import math

import numpy as np
import pytest
import torch

from lpx.adapters import TorchCausalLM, WordTokenizer

SUBJECTS = ["fox", "dog", "bird", "cat", "fish", "mouse"]
ADJECTIVES = ["quick", "lazy", "small", "big", "red", "old"]
VERBS = ["chases", "sees", "likes", "follows", "avoids"]
PARTNER = {
    "fox": "dog", "dog": "cat", "bird": "fish",
    "cat": "mouse", "fish": "bird", "mouse": "fox",
}
VOCAB = ["the", "."] + SUBJECTS + ADJECTIVES + VERBS


def make_corpus(n_sentences: int, seed: int = 0) -> str:
    """Templated sentences with a 5-token subject->object dependency.

    "the ADJ S V the ADJ O ." where O is the subject's fixed partner 90%
    of the time; a bigram model cannot resolve O, a 32-token context can.
    """
    rng = np.random.default_rng(seed)
    sentences = []
    for _ in range(n_sentences):
        subj = SUBJECTS[rng.integers(len(SUBJECTS))]
        obj = PARTNER[subj] if rng.random() < 0.9 else SUBJECTS[rng.integers(len(SUBJECTS))]
        sentences.append(
            f"the {ADJECTIVES[rng.integers(len(ADJECTIVES))]} {subj} "
            f"{VERBS[rng.integers(len(VERBS))]} the "
            f"{ADJECTIVES[rng.integers(len(ADJECTIVES))]} {obj} ."
        )
    return " ".join(sentences)


class ScriptedModel:
    """Fixed next-token distribution regardless of context."""

    def __init__(self, log_probs):
        self.script = np.asarray(log_probs, dtype=np.float32)
        self.vocab_size = self.script.size
        self.max_context = None

    def full_logits(self, ids):
        return np.tile(self.script, (len(ids), 1))

    def last_logits(self, batch):
        return np.tile(self.script, (len(batch), 1))


def build_tiny_gpt2(seed: int = 0, vocab_size: int = len(VOCAB)):
    from transformers import GPT2Config, GPT2LMHeadModel

    torch.manual_seed(seed)
    config = GPT2Config(
        vocab_size=vocab_size,
        n_positions=64,
        n_embd=64,
        n_layer=2,
        n_head=4,
        bos_token_id=0,
        eos_token_id=0,
    )
    return GPT2LMHeadModel(config)


@pytest.fixture(scope="session")
def word_tokenizer():
    return WordTokenizer(VOCAB)


@pytest.fixture(scope="session")
def random_model():
    return TorchCausalLM(build_tiny_gpt2(seed=1))


@pytest.fixture(scope="session")
def trained_model(word_tokenizer):
    """Tiny GPT-2 trained on the templated corpus until it exploits context."""
    torch.manual_seed(7)
    model = build_tiny_gpt2(seed=7)
    text = make_corpus(24000, seed=3)
    ids = torch.tensor(word_tokenizer.encode(text), dtype=torch.long)
    seq_len, batch_size, steps = 48, 48, 400
    opt = torch.optim.AdamW(model.parameters(), lr=3e-3)
    model.train()
    rng = np.random.default_rng(11)
    n_windows = len(ids) - seq_len - 1
    for step in range(steps):
        starts = rng.integers(0, n_windows, size=batch_size)
        batch = torch.stack([ids[s : s + seq_len] for s in starts])
        out = model(batch, labels=batch)
        opt.zero_grad()
        out.loss.backward()
        opt.step()
    model.eval()
    return TorchCausalLM(model)
