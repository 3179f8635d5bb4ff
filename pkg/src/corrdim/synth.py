"""Synthetic token sequences and exact log-probability oracle streams.

Where the generating process is tractable (Markov chains, Polya urns) the
stream carries the *true* conditional log-distribution at every step, which
makes these the desk-scale stand-ins for model-derived streams.  All
generators are deterministic given their seed; a single PRNG algorithm
(PCG64 via :func:`numpy.random.default_rng`) is used everywhere and named
in stream meta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lpstream import LogProbStream

PRNG_NAME = "numpy-PCG64"

#: Common English first names used by the random-name stress corpus.
DEFAULT_NAMES = (
    "Aaron Amanda Amelia Anthony Aria Ava Benjamin Blake Brian Brittany "
    "Caitlin Cameron Carter Charles Charlotte Christopher Claire Connor "
    "Daniel David Elizabeth Emily Emma Ethan Felicity Finley Flora Flynn "
    "Frances Frank Gabriel Georgia Grace Gregory Griffin Hannah Hayden "
    "Heather Henry Ian Ignacio Imogen Isaiah Jacob James Jordan Joseph "
    "Joshua Julia Kayla King Kyle Liam Lucas Lucy Matthew Mia Michael "
    "Natalie Neil Nicole Noah Oliver Olivia Omar Orion Owen Paige Patricia "
    "Paul Penelope Preston Quinn Raymond Ruby Ryan Sabrina Samuel Sarah "
    "Sophia Taylor Thomas Ulrika Ursula Victoria Virginia Vivian Warren "
    "William Wyatt Xander Yasmin Zara Zion"
).split()


@dataclass(frozen=True)
class LinTegmarkSpec:
    """Binary branching grammar driven by one Bernoulli parameter.

    Each symbol spawns ``branching`` children; a child copies its parent
    with probability q and flips it otherwise.  q near 0 or 1 gives highly
    predictable sequences, q = 0.5 gives i.i.d. fair bits.
    """

    q: float
    depth: int
    branching: int = 2
    root: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.branching < 1:
            raise ValueError("branching must be >= 1")
        if self.root not in (0, 1):
            raise ValueError("root symbol must be 0 or 1")


@dataclass(frozen=True)
class MarkovSpec:
    """Order-n chain over an alphabet of size A with an explicit table.

    ``transition`` has shape (A**order, A); row index encodes the context
    (most recent token in the lowest digit) and each row sums to 1.
    """

    order: int
    alphabet: int
    transition: np.ndarray
    seed: int = 0

    def __post_init__(self):
        t = np.ascontiguousarray(np.asarray(self.transition, dtype=np.float64))
        expected = (self.alphabet**self.order, self.alphabet)
        if self.order < 1 or self.alphabet < 1:
            raise ValueError("order and alphabet must be >= 1")
        if t.shape != expected:
            raise ValueError(f"transition table must have shape {expected}")
        if (t < 0).any():
            raise ValueError("transition probabilities must be non-negative")
        if np.abs(t.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("every transition row must sum to 1 within 1e-9")
        t.setflags(write=False)
        object.__setattr__(self, "transition", t)


@dataclass(frozen=True)
class PolyaSpec:
    """Self-reinforcing urn: draw a color, add ``reinforcement`` to it."""

    initial_counts: tuple[float, ...]
    reinforcement: float = 1.0
    seed: int = 0

    def __post_init__(self):
        counts = tuple(float(c) for c in self.initial_counts)
        if len(counts) < 1 or any(c <= 0 for c in counts):
            raise ValueError("initial counts must be positive")
        if self.reinforcement <= 0:
            raise ValueError("reinforcement must be positive")
        object.__setattr__(self, "initial_counts", counts)

    @property
    def colors(self) -> int:
        return len(self.initial_counts)


@dataclass(frozen=True)
class RepetitionSpec:
    """A literal pattern tiled to a total character-token length."""

    pattern: str
    total_len: int

    def __post_init__(self):
        if not self.pattern:
            raise ValueError("pattern must be non-empty")
        if self.total_len < 1:
            raise ValueError("total_len must be >= 1")


def gen_lin_tegmark(spec: LinTegmarkSpec) -> np.ndarray:
    """Expand the root through ``depth`` generations; return the leaves.

    Output is the ``branching ** depth`` leaf symbols in left-to-right
    order, as an int8 array of 0/1.
    """
    rng = np.random.default_rng(spec.seed)
    level = np.array([spec.root], dtype=np.int8)
    for _ in range(spec.depth):
        parents = np.repeat(level, spec.branching)
        keep = rng.random(parents.size) < spec.q
        level = np.where(keep, parents, 1 - parents).astype(np.int8)
    return level


def cycle_transition(alphabet: int, noise: float = 0.0) -> np.ndarray:
    """Order-1 table cycling i -> i+1 mod A, with ``noise`` mass spread
    over the other symbols (full support when noise > 0)."""
    if alphabet < 2:
        raise ValueError("cycle needs an alphabet of at least 2")
    if not 0.0 <= noise < 1.0:
        raise ValueError("noise must lie in [0, 1)")
    t = np.full((alphabet, alphabet), noise / (alphabet - 1), dtype=np.float64)
    for i in range(alphabet):
        t[i, (i + 1) % alphabet] = 1.0 - noise
    return t


def random_transition(order: int, alphabet: int, seed: int = 0, concentration: float = 1.0) -> np.ndarray:
    """Dirichlet-random transition table (full support almost surely)."""
    rng = np.random.default_rng(seed)
    return rng.dirichlet([concentration] * alphabet, size=alphabet**order)


def _context_index(context: np.ndarray, alphabet: int) -> int:
    idx = 0
    for tok in context:
        idx = idx * alphabet + int(tok)
    return idx


def gen_markov_stream(spec: MarkovSpec, n_steps: int) -> LogProbStream:
    """Sample the chain and emit the exact conditional log-distribution.

    The initial context (``order`` tokens, drawn uniformly) is not part of
    the stream; each of the ``n_steps`` emitted rows is the true
    log-distribution its realized token was drawn from.  Zero-probability
    transitions produce ``-inf`` entries, which downstream geometry rejects
    by design.
    """
    if n_steps <= spec.order:
        raise ValueError("n_steps must exceed the chain order")
    rng = np.random.default_rng(spec.seed)
    a = spec.alphabet
    with np.errstate(divide="ignore"):
        log_table = np.log(spec.transition).astype(np.float32)
    cum = np.cumsum(spec.transition, axis=1)

    context = rng.integers(0, a, size=spec.order)
    ctx_idx = _context_index(context, a)
    vectors = np.empty((n_steps, a), dtype=np.float32)
    token_ids = np.empty(n_steps, dtype=np.uint32)
    base = a ** (spec.order - 1)
    for t in range(n_steps):
        vectors[t] = log_table[ctx_idx]
        tok = int(np.searchsorted(cum[ctx_idx], rng.random(), side="right"))
        tok = min(tok, a - 1)
        token_ids[t] = tok
        ctx_idx = (ctx_idx % base) * a + tok
    meta = {
        "generator": "markov",
        "order": spec.order,
        "alphabet": a,
        "seed": spec.seed,
        "prng": PRNG_NAME,
    }
    return LogProbStream(
        vectors=vectors, token_ids=token_ids, normalized=True, meta=meta
    )


def gen_polya_stream(spec: PolyaSpec, n_steps: int) -> LogProbStream:
    """Polya urn oracle stream: exact pre-draw log-distribution per step."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rng = np.random.default_rng(spec.seed)
    counts = np.array(spec.initial_counts, dtype=np.float64)
    vectors = np.empty((n_steps, spec.colors), dtype=np.float32)
    token_ids = np.empty(n_steps, dtype=np.uint32)
    for t in range(n_steps):
        p = counts / counts.sum()
        vectors[t] = np.log(p)
        color = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
        color = min(color, spec.colors - 1)
        token_ids[t] = color
        counts[color] += spec.reinforcement
    meta = {
        "generator": "polya",
        "colors": spec.colors,
        "reinforcement": spec.reinforcement,
        "seed": spec.seed,
        "prng": PRNG_NAME,
    }
    return LogProbStream(
        vectors=vectors, token_ids=token_ids, normalized=True, meta=meta
    )


def gen_gaussian_stream(dim: int, n_steps: int, seed: int = 0) -> LogProbStream:
    """I.i.d. standard-normal vectors (not a log-distribution)."""
    if dim < 1 or n_steps < 1:
        raise ValueError("dim and n_steps must be >= 1")
    rng = np.random.default_rng(seed)
    vectors = rng.standard_normal((n_steps, dim)).astype(np.float32)
    meta = {"generator": "gaussian", "seed": seed, "prng": PRNG_NAME}
    return LogProbStream(vectors=vectors, normalized=False, meta=meta)


def gen_random_walk_stream(
    dim: int, n_steps: int, step_sigma: float = 1.0, seed: int = 0
) -> LogProbStream:
    """Cumulative sum of i.i.d. Gaussian steps (Brownian-trail fixture)."""
    if dim < 1 or n_steps < 1:
        raise ValueError("dim and n_steps must be >= 1")
    if step_sigma < 0:
        raise ValueError("step_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    steps = step_sigma * rng.standard_normal((n_steps, dim))
    vectors = np.cumsum(steps, axis=0).astype(np.float32)
    meta = {
        "generator": "random-walk",
        "step_sigma": step_sigma,
        "seed": seed,
        "prng": PRNG_NAME,
    }
    return LogProbStream(vectors=vectors, normalized=False, meta=meta)


def gen_repetition_text(spec: RepetitionSpec) -> str:
    """Tile the pattern to exactly ``total_len`` characters."""
    reps = -(-spec.total_len // len(spec.pattern))
    return (spec.pattern * reps)[: spec.total_len]


def gen_random_names(
    n_tokens_target: int,
    name_list: Optional[Sequence[str]] = None,
    seed: int = 0,
) -> str:
    """I.i.d. names joined by ", " until the whitespace-word budget is met."""
    names = list(name_list) if name_list is not None else list(DEFAULT_NAMES)
    if not names:
        raise ValueError("name list must be non-empty")
    if n_tokens_target < 1:
        raise ValueError("n_tokens_target must be >= 1")
    rng = np.random.default_rng(seed)
    picks = []
    words = 0
    while words < n_tokens_target:
        name = names[int(rng.integers(0, len(names)))]
        picks.append(name)
        words += len(name.split())
    return ", ".join(picks)
