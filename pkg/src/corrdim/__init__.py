"""corrdim: correlation dimension of next-token log-probability streams.

The package measures statistical self-similarity of a sequence of state
vectors through its recurrence structure: the fraction S(eps) of vector
pairs closer than eps follows S(eps) ~ eps^d at small eps, and the exponent
d is the correlation dimension.  Submodules:

- :mod:`corrdim.lpstream`  stream data model and LPRS binary format
- :mod:`corrdim.geometry`  fused pair counting, delay embedding, recurrence
- :mod:`corrdim.dimension` correlation integrals and the clipped slope fit
- :mod:`corrdim.reduce`    deterministic modulo vocabulary reduction
- :mod:`corrdim.synth`     synthetic corpora and exact oracle streams
- :mod:`corrdim.textstats` baseline degeneration metrics
- :mod:`corrdim.cli`       the ``corrdim`` command-line tool
"""

__version__ = "0.1.0"

from .lpstream import (
    ContextMode,
    LogProbStream,
    read_stream,
    validate_normalization,
    write_stream,
)
from .geometry import (
    PairCounts,
    RecurrenceMatrix,
    ThresholdGrid,
    count_pairs_fused,
    count_pairs_naive,
    delay_embed,
    recurrence_matrix,
)
from .dimension import (
    AnalysisReport,
    CorrelationIntegral,
    DimensionFit,
    FitConfig,
    analyze,
    build_grid,
    correlation_integral,
    fit_dimension,
)
from .reduce import ModuloProjection, project_stream, project_vector

__all__ = [
    "ContextMode",
    "LogProbStream",
    "read_stream",
    "write_stream",
    "validate_normalization",
    "ThresholdGrid",
    "PairCounts",
    "RecurrenceMatrix",
    "count_pairs_naive",
    "count_pairs_fused",
    "delay_embed",
    "recurrence_matrix",
    "CorrelationIntegral",
    "FitConfig",
    "DimensionFit",
    "AnalysisReport",
    "build_grid",
    "correlation_integral",
    "fit_dimension",
    "analyze",
    "ModuloProjection",
    "project_vector",
    "project_stream",
    "__version__",
]
