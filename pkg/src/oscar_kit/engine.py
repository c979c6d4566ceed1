"""Monte-Carlo CMI testing and per-sequence Markov boundary assembly.

For an event at step ``i`` and a label ``j`` the information gain in one
context is the Bernoulli KL divergence between the label probability after
observing the event and the one before it.  Averaging over resampled
contexts (particles) estimates the conditional mutual information.  Steps
whose CMI reaches the label's threshold ``mean + k * std`` (statistics over
the sequence's steps) are kept as causes.

Steps inside the resampled context (``step < context_floor``) have no CMI.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .core import DegenerateVector, CausalEdge, CausalGraph, LabeledSequence, OscarError
from .sampling import SamplingConfig, sample_particles

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-6


@dataclass(frozen=True)
class ThresholdConfig:
    """Per-label dynamic threshold ``mean + z_coeff * std`` (sample std).

    ``min_cmi`` is an absolute floor: a step whose CMI does not exceed it is
    never kept, even when every step ties at the threshold.
    """

    z_coeff: float = 2.75
    min_cmi: float = 1e-10
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        if not self.z_coeff >= 0:
            errors.append("z_coeff must be >= 0")
        if not 0 < self.eps < 0.5:
            errors.append("eps must lie in (0, 0.5)")
        if not self.min_cmi >= 0:
            errors.append("min_cmi must be >= 0")
        return errors


def bernoulli_kl(after, before) -> np.ndarray:
    """KL(Bernoulli(after) || Bernoulli(before)) in nats, elementwise.

    Inputs must already be clamped away from 0 and 1.
    """
    after = np.asarray(after, dtype=np.float64)
    before = np.asarray(before, dtype=np.float64)
    return after * np.log(after / before) + (1 - after) * np.log((1 - after) / (1 - before))


def info_gain(before, after, label: int, eps: float = DEFAULT_EPS) -> float:
    """Information gain on ``label`` from one extra observed event."""
    b = np.clip(np.asarray(before, dtype=np.float64)[label], eps, 1 - eps)
    a = np.clip(np.asarray(after, dtype=np.float64)[label], eps, 1 - eps)
    return float(max(bernoulli_kl(a, b), 0.0))


def info_gain_cap(eps: float = DEFAULT_EPS) -> float:
    """Largest value :func:`info_gain` can return for a given clamp."""
    return float(np.log((1 - eps) / eps))


@dataclass(frozen=True)
class CmiMatrix:
    """CMI per (step, label) for steps ``context_floor .. L``."""

    steps: np.ndarray  # (n_steps,)
    values: np.ndarray  # (n_steps, n_labels), nats
    eps: float
    thresholds: np.ndarray | None = None

    def column(self, label: int) -> np.ndarray:
        return self.values[:, label]


def _clamped_paths(pair, particles: np.ndarray, c: int, eps: float):
    """Label probabilities before/after each assessed step, per particle.

    Returns two arrays of shape (N, L - c + 1, n_labels).
    """
    probs = np.clip(pair.label_proba_path(particles), eps, 1 - eps)
    return probs[:, c - 1 : -1], probs[:, c:]


def _cmi_from(before, after) -> np.ndarray:
    return np.maximum(bernoulli_kl(after, before), 0.0).mean(axis=0)


def _indicator_from(before, after) -> tuple[np.ndarray, np.ndarray]:
    diff = after - before
    mean = diff.mean(axis=0)
    std = diff.std(axis=0, ddof=1) if diff.shape[0] > 1 else np.zeros_like(mean)
    return np.clip(mean, -1.0, 1.0), std


def estimate_cmi(pair, seq: LabeledSequence, cfg: SamplingConfig, eps: float = DEFAULT_EPS) -> CmiMatrix:
    """Particle-averaged information gain for every assessed step and label."""
    ps = sample_particles(pair, seq, cfg)
    before, after = _clamped_paths(pair, ps.tokens, ps.context_floor, eps)
    steps = np.arange(ps.context_floor, len(seq) + 1)
    return CmiMatrix(steps, _cmi_from(before, after), eps)


def causal_indicator(pair, seq: LabeledSequence, cfg: SamplingConfig, eps: float = DEFAULT_EPS):
    """Mean and sample std over particles of the label-probability change at each step.

    Returns ``(steps, mean, std)`` with ``mean`` and ``std`` of shape
    (n_steps, n_labels).
    """
    ps = sample_particles(pair, seq, cfg)
    before, after = _clamped_paths(pair, ps.tokens, ps.context_floor, eps)
    mean, std = _indicator_from(before, after)
    return np.arange(ps.context_floor, len(seq) + 1), mean, std


def dynamic_threshold(values, z_coeff: float = 2.75) -> float:
    """``mean(values) + z_coeff * std(values, ddof=1)``.

    Raises DegenerateVector for fewer than two values, since the sample
    standard deviation is undefined there.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise DegenerateVector(f"need at least two values, got {values.size}")
    return float(values.mean() + z_coeff * values.std(ddof=1))


@dataclass
class DiscoveryResult:
    """Recovered Markov boundaries for one sequence."""

    sequence: LabeledSequence
    steps: np.ndarray
    cmi: np.ndarray
    thresholds: np.ndarray
    retained: np.ndarray
    indicator_mean: np.ndarray
    indicator_std: np.ndarray
    degenerate: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def n_labels(self) -> int:
        return self.cmi.shape[1]

    def occurrences(self, label: int) -> list[tuple[int, int]]:
        """Retained (step, event) pairs for ``label``."""
        events = self.sequence.event_indices
        return [(int(s), events[s - 1]) for s in self.steps[self.retained[:, label]]]

    def markov_boundary(self, label: int) -> frozenset[int]:
        return frozenset(e for _, e in self.occurrences(label))

    def markov_boundaries(self):
        from .core import MarkovBoundarySet

        return MarkovBoundarySet(self.markov_boundary(j) for j in range(self.n_labels))

    def edges(self) -> list[CausalEdge]:
        out = []
        events = self.sequence.event_indices
        for row, col in zip(*np.nonzero(self.retained)):
            step = int(self.steps[row])
            out.append(CausalEdge(step, events[step - 1], int(col), float(self.cmi[row, col]),
                                  float(self.indicator_mean[row, col]),
                                  float(self.indicator_std[row, col])))
        out.sort(key=lambda e: (e.label, e.step))
        return out

    def graph(self) -> CausalGraph:
        return CausalGraph(self.sequence, tuple(self.edges()))

    def to_json(self, vocab, catalog) -> dict:
        per_label = {}
        edges = self.edges()
        for j, name in enumerate(catalog.names):
            mine = [e for e in edges if e.label == j]
            per_label[name] = {
                "events": sorted(vocab.decode(e) for e in self.markov_boundary(j)),
                "edges": [
                    {"pos": e.step, "event": vocab.decode(e.event), "cmi": e.cmi,
                     "ind_mean": e.indicator_mean, "ind_std": e.indicator_std}
                    for e in mine
                ],
                "threshold": float(self.thresholds[j]),
            }
            if self.degenerate[j]:
                per_label[name]["degenerate"] = True
        return per_label


def _thresholds(cmi: np.ndarray, z_coeff: float) -> tuple[np.ndarray, np.ndarray]:
    n_labels = cmi.shape[1]
    theta = np.empty(n_labels)
    degenerate = np.zeros(n_labels, dtype=bool)
    for j in range(n_labels):
        try:
            theta[j] = dynamic_threshold(cmi[:, j], z_coeff)
        except DegenerateVector:
            theta[j] = float(cmi[:, j].mean())
            degenerate[j] = True
    return theta, degenerate


def discover(pair, seq: LabeledSequence, sampling_cfg: SamplingConfig | None = None,
             threshold_cfg: ThresholdConfig | None = None) -> DiscoveryResult:
    """Markov boundary of every label within one sequence."""
    sampling_cfg = sampling_cfg or SamplingConfig()
    threshold_cfg = threshold_cfg or ThresholdConfig()
    ps = sample_particles(pair, seq, sampling_cfg)
    before, after = _clamped_paths(pair, ps.tokens, ps.context_floor, threshold_cfg.eps)
    cmi = _cmi_from(before, after)
    ind_mean, ind_std = _indicator_from(before, after)
    theta, degenerate = _thresholds(cmi, threshold_cfg.z_coeff)
    retained = (cmi >= theta[None, :]) & (cmi > threshold_cfg.min_cmi)
    return DiscoveryResult(
        sequence=seq,
        steps=np.arange(ps.context_floor, len(seq) + 1),
        cmi=cmi,
        thresholds=theta,
        retained=retained,
        indicator_mean=ind_mean,
        indicator_std=ind_std,
        degenerate=degenerate,
        config={"sampling": asdict(sampling_cfg), "threshold": asdict(threshold_cfg)},
    )


@dataclass(frozen=True)
class BatchItemError:
    """Stands in for a result when one sequence of a batch fails."""

    index: int
    error: str
    message: str

    def to_json(self) -> dict:
        return {"error": self.error, "message": self.message}


def _discover_chunk(pair, items, sampling_cfg, threshold_cfg):
    out = []
    for index, seq in items:
        try:
            out.append(discover(pair, seq, sampling_cfg, threshold_cfg))
        except OscarError as exc:
            logger.warning("sequence %d failed: %s", index, exc)
            out.append(BatchItemError(index, type(exc).__name__, str(exc)))
    return out


def discover_batch(pair, seqs: Sequence[LabeledSequence], sampling_cfg: SamplingConfig | None = None,
                   threshold_cfg: ThresholdConfig | None = None, n_jobs: int = 1,
                   backend: str | None = None) -> list:
    """:func:`discover` over many sequences, in input order.

    Failing sequences yield a :class:`BatchItemError` in their slot.  Random
    streams are keyed by sequence content, so results do not depend on
    ``n_jobs`` or on how the batch is split.
    """
    items = list(enumerate(seqs))
    if not items:
        return []
    if n_jobs == 1 or len(items) == 1:
        return _discover_chunk(pair, items, sampling_cfg, threshold_cfg)
    n_chunks = min(len(items), abs(n_jobs) * 4)
    chunks = [items[i::n_chunks] for i in range(n_chunks)]
    parts = Parallel(n_jobs=n_jobs, backend=backend)(
        delayed(_discover_chunk)(pair, chunk, sampling_cfg, threshold_cfg) for chunk in chunks
    )
    results: list = [None] * len(items)
    for chunk, part in zip(chunks, parts):
        for (index, _), res in zip(chunk, part):
            results[index] = res
    return results


def results_to_jsonl(results, vocab, catalog) -> str:
    """One JSON object per line, in input order; errors keep their slot."""
    lines = []
    for res in results:
        obj = res.to_json() if isinstance(res, BatchItemError) else res.to_json(vocab, catalog)
        lines.append(json.dumps(obj, sort_keys=True, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")
