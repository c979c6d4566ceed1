"""Wall-clock measurements of batch discovery."""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from .engine import ThresholdConfig, discover_batch
from .sampling import SamplingConfig


def _elapsed(pair, seqs, cfg, threshold_cfg, n_jobs) -> float:
    t0 = time.perf_counter()
    discover_batch(pair, seqs, cfg, threshold_cfg, n_jobs=n_jobs)
    return time.perf_counter() - t0


def time_discover(pair, seqs, cfg: SamplingConfig, threshold_cfg: ThresholdConfig | None = None,
                  repeats: int = 3, n_jobs: int = 1) -> float:
    """Best-of-``repeats`` seconds for one :func:`discover_batch` call."""
    return float(min(_elapsed(pair, seqs, cfg, threshold_cfg, n_jobs) for _ in range(repeats)))


def _sweep(pair, runs, threshold_cfg=None, repeats: int = 3, n_jobs: int = 1) -> list[float]:
    """Best-of-``repeats`` seconds for each ``(seqs, cfg)`` in ``runs``.

    Repeats are interleaved across the runs, so a transient slowdown of the
    machine hits every point of the sweep instead of a single one.
    """
    best = [np.inf] * len(runs)
    for _ in range(repeats):
        for i, (seqs, cfg) in enumerate(runs):
            best[i] = min(best[i], _elapsed(pair, seqs, cfg, threshold_cfg, n_jobs))
    return [float(b) for b in best]


def runtime_vs_particles(pair, seqs, cfg: SamplingConfig, n_values, **kw) -> list[tuple[int, float]]:
    runs = [(seqs, replace(cfg, n_particles=int(n))) for n in n_values]
    return list(zip([int(n) for n in n_values], _sweep(pair, runs, **kw)))


def runtime_vs_batch(pair, seqs, cfg: SamplingConfig, batch_sizes, **kw) -> list[tuple[int, float]]:
    runs = [(seqs[: int(b)], cfg) for b in batch_sizes]
    return list(zip([int(b) for b in batch_sizes], _sweep(pair, runs, **kw)))


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares slope, intercept and R^2."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2
