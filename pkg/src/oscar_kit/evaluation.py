"""Scoring recovered Markov boundaries against ground-truth rule variables."""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import EmptyInput, MarkovBoundarySet


def score_mb(inferred: Iterable[int], truth: Iterable[int]) -> tuple[float, float, float]:
    """Precision, recall and F1 of an inferred event-type set.

    Precision is 0 for an empty inference; F1 is 0 when precision and recall
    are both 0.  ``truth`` must be nonempty.
    """
    inferred, truth = set(inferred), set(truth)
    if not truth:
        raise ValueError("truth set is empty; score it as ground-truth-unavailable instead")
    hit = len(inferred & truth)
    p = hit / len(inferred) if inferred else 0.0
    r = hit / len(truth)
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


@dataclass(frozen=True)
class MbScore:
    sequence: int
    label: int
    precision: float
    recall: float
    f1: float
    n_inferred: int
    n_truth: int
    n_hit: int
    label_true: bool
    truth_available: bool = True


def score_instance(sequence: int, label: int, inferred, truth, label_true: bool = True) -> MbScore:
    inferred, truth = set(inferred), set(truth)
    if not truth:
        return MbScore(sequence, label, 0.0, 0.0, 0.0, len(inferred), 0, 0, label_true, False)
    p, r, f1 = score_mb(inferred, truth)
    return MbScore(sequence, label, p, r, f1, len(inferred), len(truth),
                   len(inferred & truth), label_true, True)


def score_results(results: Sequence, truth: MarkovBoundarySet, positive_only: bool = True,
                  restrict_to_sequence: bool = False) -> list[MbScore]:
    """Score every (sequence, label) of a batch of discovery results.

    With ``positive_only`` only labels that are on in the sequence are scored.
    ``restrict_to_sequence`` intersects each truth set with the events that
    actually occur in the sequence.  Failed batch items are skipped.
    """
    from .engine import DiscoveryResult

    scores = []
    for i, res in enumerate(results):
        if not isinstance(res, DiscoveryResult):
            continue
        present = res.sequence.presence()
        for j in range(res.n_labels):
            on = bool(res.sequence.labels[j])
            if positive_only and not on:
                continue
            t = truth[j] & present if restrict_to_sequence else truth[j]
            scores.append(score_instance(i, j, res.markov_boundary(j), t, on))
    return scores


@dataclass
class AggregateReport:
    micro: dict
    macro: dict
    weighted: dict
    per_label: dict
    by_mb_length: dict
    n_scored: int
    n_missing_truth: int
    runtime: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        lines = [f"{'averaging':<10}{'precision':>11}{'recall':>9}{'f1':>9}"]
        for name in ("micro", "macro", "weighted"):
            m = getattr(self, name)
            lines.append(f"{name:<10}{m['precision']:>11.4f}{m['recall']:>9.4f}{m['f1']:>9.4f}")
        lines.append(f"scored instances: {self.n_scored}   without ground truth: {self.n_missing_truth}")
        lines.append("")
        lines.append(f"{'|MB|':<6}{'count':>7}{'precision':>11}{'recall':>9}{'f1':>9}")
        for length, row in sorted(self.by_mb_length.items(), key=lambda kv: int(kv[0])):
            lines.append(f"{length:<6}{row['count']:>7}{row['precision']:>11.4f}"
                         f"{row['recall']:>9.4f}{row['f1']:>9.4f}")
        return "\n".join(lines) + "\n"


def _prf(hit: int, n_inf: int, n_truth: int) -> dict:
    p = hit / n_inf if n_inf else 0.0
    r = hit / n_truth if n_truth else 0.0
    return {"precision": p, "recall": r, "f1": 2 * p * r / (p + r) if p + r > 0 else 0.0}


def _mean_metrics(scores: Sequence[MbScore]) -> dict:
    return {
        "precision": float(np.mean([s.precision for s in scores])),
        "recall": float(np.mean([s.recall for s in scores])),
        "f1": float(np.mean([s.f1 for s in scores])),
    }


def stratify_by_mb_length(scores: Sequence[MbScore]) -> dict[int, dict]:
    """Mean metrics and instance count per ground-truth boundary size."""
    buckets: dict[int, list[MbScore]] = defaultdict(list)
    for s in scores:
        if s.truth_available:
            buckets[s.n_truth].append(s)
    return {n: {**_mean_metrics(b), "count": len(b)} for n, b in sorted(buckets.items())}


def aggregate(scores: Sequence[MbScore], supports: dict[int, int] | None = None) -> AggregateReport:
    """Micro, macro and support-weighted averages over scored instances.

    Instances without ground truth are excluded and counted separately.
    ``supports`` maps label -> number of positive instances; by default it is
    counted from the scored instances themselves.
    """
    if not scores:
        raise EmptyInput("nothing to aggregate")
    usable = [s for s in scores if s.truth_available]
    missing = len(scores) - len(usable)
    if not usable:
        raise EmptyInput("no scored instance has ground truth")

    micro = _prf(sum(s.n_hit for s in usable), sum(s.n_inferred for s in usable),
                 sum(s.n_truth for s in usable))
    by_label: dict[int, list[MbScore]] = defaultdict(list)
    for s in usable:
        by_label[s.label].append(s)
    if supports is None:
        supports = {j: sum(s.label_true for s in b) for j, b in by_label.items()}
    per_label = {}
    for j in sorted(by_label):
        per_label[j] = {**_mean_metrics(by_label[j]), "support": int(supports.get(j, 0)),
                        "count": len(by_label[j])}
    keys = ("precision", "recall", "f1")
    macro = {k: float(np.mean([v[k] for v in per_label.values()])) for k in keys}
    total = sum(v["support"] for v in per_label.values())
    if total > 0:
        weighted = {k: float(sum(v[k] * v["support"] for v in per_label.values()) / total) for k in keys}
    else:
        weighted = dict(macro)
    return AggregateReport(micro, macro, weighted, per_label, stratify_by_mb_length(usable),
                           len(usable), missing)


def fold_report(scores: Sequence[MbScore], n_folds: int, seed: int = 0) -> dict:
    """Mean and std of the averaged metrics over a random partition of sequences."""
    seqs = sorted({s.sequence for s in scores})
    rng = np.random.default_rng(seed)
    fold_of = dict(zip(seqs, rng.permutation(len(seqs)) % n_folds))
    reports = []
    for f in range(n_folds):
        part = [s for s in scores if fold_of[s.sequence] == f]
        if any(s.truth_available for s in part):
            reports.append(aggregate(part))
    out = {}
    for avg in ("micro", "macro", "weighted"):
        for k in ("precision", "recall", "f1"):
            vals = [getattr(r, avg)[k] for r in reports]
            out[f"{avg}_{k}"] = {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
    out["n_folds"] = len(reports)
    return out


def strata_csv(report: AggregateReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mb_length", "count", "precision", "recall", "f1"])
    for length, row in sorted(report.by_mb_length.items(), key=lambda kv: int(kv[0])):
        w.writerow([length, row["count"], repr(row["precision"]), repr(row["recall"]), repr(row["f1"])])
    return buf.getvalue()


def report_json(report: AggregateReport, **extra) -> str:
    return json.dumps({**report.to_json(), **extra}, indent=1, sort_keys=True)
