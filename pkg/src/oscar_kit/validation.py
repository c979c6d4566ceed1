"""Input checking shared by the estimators."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import InvalidSequence, LabeledSequence, UnknownSymbol


def check_tokens(tokens, n_symbols: int) -> np.ndarray:
    """Validate prefix rows: 2-D int array, begin-marker first, indices in range.

    A single prefix (1-D) is promoted to one row.
    """
    arr = np.asarray(tokens)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise InvalidSequence("prefixes must be a nonempty 2-D array of vocabulary indices")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.mod(arr, 1) == 0):
            raise InvalidSequence("prefixes must hold integer vocabulary indices")
        arr = arr.astype(np.int64)
    if (arr[:, 0] != 0).any():
        raise InvalidSequence("every prefix must start with the begin-marker")
    bad = (arr < 0) | (arr >= n_symbols)
    if bad.any():
        raise UnknownSymbol(int(arr[bad][0]))
    if (arr[:, 1:] == 0).any():
        raise InvalidSequence("the begin-marker can only occur at position 0")
    return arr.astype(np.int64, copy=False)


def check_sequences(seqs, n_symbols: int | None = None, n_labels: int | None = None) -> list[LabeledSequence]:
    """Accept one sequence or an iterable of them; check vocabulary and label widths."""
    if isinstance(seqs, LabeledSequence):
        seqs = [seqs]
    seqs = list(seqs)
    for s in seqs:
        if not isinstance(s, LabeledSequence):
            raise TypeError(f"expected LabeledSequence, got {type(s).__name__}")
        if n_symbols is not None and max(s.event_indices) >= n_symbols:
            raise UnknownSymbol(max(s.event_indices))
        if n_labels is not None and len(s.labels) != n_labels:
            raise InvalidSequence(f"expected {n_labels} labels, got {len(s.labels)}")
    return seqs


def check_probability_rows(probs: np.ndarray, atol: float = 1e-6) -> None:
    s = probs.sum(axis=-1)
    if (probs < 0).any() or not np.allclose(s, 1.0, atol=atol, rtol=0):
        raise ValueError("rows are not probability distributions")


def as_prefix(prefix: Sequence[int]) -> np.ndarray:
    return np.asarray(prefix, dtype=np.int64)[None, :]
