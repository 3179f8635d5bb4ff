"""lpx: next-token log-probability extraction for LPRS streams."""

__version__ = "0.1.0"

from .adapters import CausalScorer, CharTokenizer, TorchCausalLM, WordTokenizer
from .extract import (
    ContextOverflowError,
    ExtractionError,
    ExtractionJob,
    extract,
    extract_stream,
)

__all__ = [
    "CausalScorer",
    "CharTokenizer",
    "WordTokenizer",
    "TorchCausalLM",
    "ContextOverflowError",
    "ExtractionError",
    "ExtractionJob",
    "extract",
    "extract_stream",
    "__version__",
]
