"""Correlation-integral curves and correlation-dimension fitting.

The correlation integral S(eps_k) = 2 * counts[k] / (N * (N - 1)) is the
fraction of ordered pairs closer than eps_k.  The dimension is the slope of
log S versus log eps, fitted by unweighted ordinary least squares over a
clipped window: grid points must satisfy

    S in [2 * min_count / (N * (N - 1)),  eta / N]

(pair counts of at least ``min_count``; the upper half of the observable
log-range discarded), plus an optional epsilon floor for degenerate inputs
whose small-threshold counts are dominated by numerical noise.  When fewer
than ``min_points`` grid points qualify and N < 500, eta is doubled until
the window is wide enough or the upper bound would pass S = 0.5.

An unfittable window yields an explicit failure value rather than an
exception, so batch runs never abort.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .lpstream import LogProbStream
from .geometry import ThresholdGrid, count_pairs_fused, delay_embed, DEFAULT_TILE
from .reduce import ModuloProjection, project_stream

DEFAULT_POINTS_PER_DECADE = 48

#: Lower-clip pair count: grid points with fewer pairs than this are noise.
DEFAULT_MIN_COUNT = 10

#: Fits need at least this many qualifying grid points.
DEFAULT_MIN_POINTS = 8


class DegeneratePointSetError(ValueError):
    """All sampled pairwise distances are zero; no grid can be built."""


@dataclass(frozen=True)
class FitConfig:
    """Clipping and fit-window parameters for dimension estimation."""

    eta: float = 1.0
    min_count: int = DEFAULT_MIN_COUNT
    eps_floor: Optional[float] = None
    min_points: int = DEFAULT_MIN_POINTS

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.min_count < 2:
            raise ValueError("min_count must be >= 2")
        if self.min_points < 2:
            raise ValueError("min_points must be >= 2")
        if self.eps_floor is not None and not self.eps_floor > 0:
            raise ValueError("eps_floor must be positive when set")


@dataclass(frozen=True)
class CorrelationIntegral:
    """S(eps) over a threshold grid for an N-step stream."""

    grid: ThresholdGrid
    s_values: np.ndarray
    n_steps: int

    def __post_init__(self):
        s = np.ascontiguousarray(np.asarray(self.s_values, dtype=np.float64))
        if s.shape != (len(self.grid),):
            raise ValueError("s_values length must match the grid")
        if (s < 0).any() or (s > 1).any() or (np.diff(s) < 0).any():
            raise ValueError("S must be non-decreasing within [0, 1]")
        s.setflags(write=False)
        object.__setattr__(self, "s_values", s)


@dataclass(frozen=True)
class DimensionFit:
    """Result of the clipped log-log slope fit.

    ``d`` is None when fewer than ``min_points`` grid points fall inside the
    clip window even after eta widening; the remaining fields then carry the
    diagnostics of the failed attempt.
    """

    d: Optional[float]
    window: Optional[tuple[float, float]]
    n_points: int
    r2: Optional[float]
    eta_used: float
    s_bounds: tuple[float, float]
    eps_floor: Optional[float] = None

    @property
    def fittable(self) -> bool:
        return self.d is not None


def build_grid(
    stream_or_array,
    k_per_decade: int = DEFAULT_POINTS_PER_DECADE,
    sample: Optional[int] = None,
    seed: int = 0,
) -> ThresholdGrid:
    """Log-spaced threshold grid spanning [0.5 * min, 2 * max] pair distance.

    Minimum nonzero and maximum distances are estimated from ``sample``
    random pairs drawn with a deterministic seed; when the pair population
    is at most the sample budget, every pair is used.  The default budget
    ``max(4096, 32 * N)`` keeps the grid's low end below the fit window's
    lower clip for desk-scale N.
    """
    from .geometry import _as_matrix  # shared inf rejection

    if k_per_decade < 1:
        raise ValueError("k_per_decade must be >= 1")
    x = _as_matrix(stream_or_array, require_min_rows=2).astype(np.float64)
    n = x.shape[0]
    n_pairs = n * (n - 1) // 2
    if sample is None:
        sample = max(4096, 32 * n)
    if sample < 1:
        raise ValueError("sample must be >= 1")

    if n_pairs <= sample:
        d2_parts = []
        for i in range(n - 1):
            diff = x[i + 1 :] - x[i]
            d2_parts.append((diff * diff).sum(axis=1))
        d2 = np.concatenate(d2_parts)
    else:
        rng = np.random.default_rng(seed)
        i_idx = rng.integers(0, n, size=sample)
        # Offset trick keeps j != i while staying uniform over ordered pairs.
        j_idx = (i_idx + 1 + rng.integers(0, n - 1, size=sample)) % n
        diff = x[i_idx] - x[j_idx]
        d2 = (diff * diff).sum(axis=1)

    d_max = math.sqrt(float(d2.max())) if d2.size else 0.0
    nz = d2[d2 > 0]
    if nz.size == 0:
        raise DegeneratePointSetError("degenerate point set: all sampled distances zero")
    d_min = math.sqrt(float(nz.min()))

    lo, hi = 0.5 * d_min, 2.0 * d_max
    n_points = int(math.ceil(math.log10(hi / lo) * k_per_decade)) + 1
    return ThresholdGrid(eps=np.geomspace(lo, hi, max(n_points, 2)))


def correlation_integral(
    stream_or_array,
    grid: ThresholdGrid,
    tile: int = DEFAULT_TILE,
    threads: int = 1,
) -> CorrelationIntegral:
    """Compute S(eps) = 2 * counts / (N * (N - 1)) with the fused counter."""
    if isinstance(stream_or_array, LogProbStream):
        n = stream_or_array.n_steps
    else:
        n = np.asarray(stream_or_array).shape[0]
    pc = count_pairs_fused(stream_or_array, grid, tile=tile, threads=threads)
    s = 2.0 * pc.counts.astype(np.float64) / (n * (n - 1))
    return CorrelationIntegral(grid=grid, s_values=s, n_steps=n)


def _ols_loglog(eps: np.ndarray, s: np.ndarray) -> tuple[float, float]:
    """Unweighted OLS slope of log s vs log eps, plus R^2."""
    lx = np.log(eps)
    ly = np.log(s)
    lx_c = lx - lx.mean()
    slope = float(lx_c @ (ly - ly.mean()) / (lx_c @ lx_c))
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (slope * lx + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return slope, r2


def fit_dimension(ci: CorrelationIntegral, cfg: FitConfig = FitConfig()) -> DimensionFit:
    """Fit the correlation dimension over the clipped window.

    Only widens eta (by doubling, capped where the upper bound reaches
    S = 0.5) for short sequences (N < 500); for N >= 500 the configured eta
    is used as-is.
    """
    n = ci.n_steps
    if len(ci.grid) < 2:
        raise ValueError("need at least 2 grid points")
    s = ci.s_values
    eps = ci.grid.eps
    s_lo = 2.0 * cfg.min_count / (n * (n - 1))
    eta = cfg.eta
    eta_cap = 0.5 * n

    def window_mask(eta_now: float) -> np.ndarray:
        mask = (s >= s_lo) & (s <= eta_now / n)
        if cfg.eps_floor is not None:
            mask &= eps >= cfg.eps_floor
        return mask

    mask = window_mask(eta)
    while mask.sum() < cfg.min_points and n < 500 and eta < eta_cap:
        eta = min(2.0 * eta, eta_cap)
        mask = window_mask(eta)

    n_points = int(mask.sum())
    bounds = (s_lo, eta / n)
    if n_points < cfg.min_points:
        return DimensionFit(
            d=None,
            window=None,
            n_points=n_points,
            r2=None,
            eta_used=eta,
            s_bounds=bounds,
            eps_floor=cfg.eps_floor,
        )

    slope, r2 = _ols_loglog(eps[mask], s[mask])
    window = (float(eps[mask][0]), float(eps[mask][-1]))
    return DimensionFit(
        d=slope,
        window=window,
        n_points=n_points,
        r2=r2,
        eta_used=eta,
        s_bounds=bounds,
        eps_floor=cfg.eps_floor,
    )


@dataclass(frozen=True)
class AnalysisReport:
    """Bundle of a correlation-integral table, its fit, and provenance."""

    ci: CorrelationIntegral
    fit: DimensionFit
    dim: int
    tau: int
    reduce_v: Optional[int]
    reduce_space: Optional[str]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_steps": self.ci.n_steps,
            "dim": self.dim,
            "grid": self.ci.grid.eps.tolist(),
            "s_values": self.ci.s_values.tolist(),
            "d": self.fit.d,
            "window": list(self.fit.window) if self.fit.window else None,
            "n_points": self.fit.n_points,
            "r2": self.fit.r2,
            "eta_used": self.fit.eta_used,
            "s_bounds": list(self.fit.s_bounds),
            "eps_floor": self.fit.eps_floor,
            "fit_method": "ols-loglog",
            "tau": self.tau,
            "reduce_v": self.reduce_v,
            "reduce_space": self.reduce_space,
            "meta": self.meta,
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def write_csv(
        self,
        destination: Union[str, Path, io.TextIOBase],
        comment: Optional[str] = None,
    ) -> None:
        """Write (eps, S) rows for plotting; header comments carry n_steps."""
        own = isinstance(destination, (str, Path))
        fh = open(destination, "w", newline="") if own else destination
        try:
            fh.write(f"# n_steps: {self.ci.n_steps}\n")
            fh.write(f"# dim: {self.dim}\n")
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh)
            writer.writerow(["eps", "s"])
            for e, s in zip(self.ci.grid.eps, self.ci.s_values):
                writer.writerow([repr(float(e)), repr(float(s))])
        finally:
            if own:
                fh.close()


def analyze(
    stream: LogProbStream,
    cfg: FitConfig = FitConfig(),
    tau: int = 1,
    reduce_v: Optional[int] = None,
    reduce_space: str = "prob",
    k_per_decade: int = DEFAULT_POINTS_PER_DECADE,
    sample: Optional[int] = None,
    grid_seed: int = 0,
    tile: int = DEFAULT_TILE,
    threads: int = 1,
) -> AnalysisReport:
    """Full pipeline: optional reduction, optional delay embedding, grid,
    correlation integral, dimension fit."""
    work = stream
    if reduce_v is not None and reduce_v != work.dim:
        proj = ModuloProjection(source_dim=work.dim, target_dim=reduce_v)
        work = project_stream(proj, work, space=reduce_space)
    if tau != 1:
        work = delay_embed(work, tau)
    grid = build_grid(work, k_per_decade=k_per_decade, sample=sample, seed=grid_seed)
    ci = correlation_integral(work, grid, tile=tile, threads=threads)
    fit = fit_dimension(ci, cfg)
    return AnalysisReport(
        ci=ci,
        fit=fit,
        dim=work.dim,
        tau=tau,
        reduce_v=reduce_v,
        reduce_space=reduce_space if reduce_v is not None else None,
        meta=dict(stream.meta),
    )
