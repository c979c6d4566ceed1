"""Density backends: next-event and per-label conditionals given a prefix.

Both backends expose the same "whole path" interface a sequence model
would: for a batch of token rows they return the distribution after every
prefix at once.

* :class:`OracleDensity` answers exactly for a :class:`~oscar_kit.synthgen.GeneratorModel`.
* :class:`NGramDensity` is a count-based estimator fitted on a corpus.
"""

from __future__ import annotations

import json
from collections import defaultdict
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import EmptyCorpus, InvalidModel, LabeledSequence
from .synthgen import GeneratorModel, LabelOracle
from .validation import as_prefix, check_sequences, check_tokens

NGRAM_FORMAT_VERSION = 1


class DensityEstimator(BaseEstimator):
    """Common surface of the density backends.

    Subclasses implement :meth:`event_proba_path` and :meth:`label_proba_path`.
    Fitted estimators are read-only, so one instance can serve many workers.
    """

    backend = "abstract"

    def event_proba_path(self, tokens) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def label_proba_path(self, tokens) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict_event_proba(self, prefix: Sequence[int]) -> np.ndarray:
        """Next-event distribution after ``prefix`` (length ``n_symbols_``)."""
        return self.event_proba_path(as_prefix(prefix))[0, -1]

    def predict_label_proba(self, prefix: Sequence[int]) -> np.ndarray:
        """Per-label probabilities after ``prefix`` (length ``n_labels_``)."""
        return self.label_proba_path(as_prefix(prefix))[0, -1]

    @property
    def metadata(self) -> dict:
        return {"backend": self.backend}


# A fitted backend is the (event model, label model) pair.
EstimatorPair = DensityEstimator


class OracleDensity(DensityEstimator):
    """Exact conditionals of a known generator model.

    Parameters
    ----------
    model : GeneratorModel
    """

    backend = "oracle"

    def __init__(self, model: GeneratorModel | None = None):
        self.model = model

    def fit(self, X=None, y=None):
        if self.model is None:
            raise InvalidModel("OracleDensity needs a generator model")
        self.oracle_ = LabelOracle(self.model)
        self.n_symbols_ = len(self.model.vocab)
        self.n_labels_ = len(self.model.catalog)
        return self

    def event_proba_path(self, tokens) -> np.ndarray:
        check_is_fitted(self, "oracle_")
        tokens = check_tokens(tokens, self.n_symbols_)
        return self.model.transition[tokens]

    def label_proba_path(self, tokens) -> np.ndarray:
        check_is_fitted(self, "oracle_")
        tokens = check_tokens(tokens, self.n_symbols_)
        return self.oracle_.path_proba(tokens)

    @property
    def metadata(self) -> dict:
        return {"backend": self.backend, "seed": self.model.seed}


def oracle_pair(model: GeneratorModel) -> OracleDensity:
    return OracleDensity(model).fit()


def _context_rows(tokens: np.ndarray, t: int, width: int) -> np.ndarray:
    """The last ``width`` tokens up to column ``t``, left-padded with -1."""
    n = tokens.shape[0]
    win = np.full((n, width), -1, dtype=np.int64)
    src = tokens[:, max(t + 1 - width, 0) : t + 1]
    win[:, width - src.shape[1] :] = src
    return win


def _window_presence(tokens: np.ndarray, width: int, n_symbols: int):
    """Yield ``(t, presence)`` where ``presence[r, x]`` says whether symbol x
    occurs among the last ``width`` tokens of row r up to column ``t``."""
    n, T = tokens.shape
    counts = np.zeros((n, n_symbols), dtype=np.int32)
    rows = np.arange(n)
    for t in range(T):
        counts[rows, tokens[:, t]] += 1
        if t >= width:
            counts[rows, tokens[:, t - width]] -= 1
        yield t, counts > 0


def _presence_key(row: np.ndarray) -> tuple:
    return tuple(int(x) for x in np.flatnonzero(row))


def _key(row) -> tuple:
    return tuple(int(x) for x in row if x >= 0)


class NGramDensity(DensityEstimator):
    """Additively smoothed count model for both conditionals.

    The event model is P(next | last ``order - 1`` tokens) with add-``alpha``
    smoothing over the real events; contexts never seen in training back off
    to the smoothed unigram distribution.  The label model is the smoothed
    frequency of each label given the presence set of the last ``window``
    tokens (``window`` defaults to ``order``), backing off to the marginal
    label frequency for unseen signatures.

    Parameters
    ----------
    order : int, default=2
    alpha : float, default=0.5
    window : int or None, default=None
    """

    backend = "ngram"

    def __init__(self, order: int = 2, alpha: float = 0.5, window: int | None = None):
        self.order = order
        self.alpha = alpha
        self.window = window

    def _check_params(self):
        if int(self.order) < 1:
            raise ValueError("order must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.window is not None and int(self.window) < 1:
            raise ValueError("window must be >= 1")

    @property
    def window_(self) -> int:
        return int(self.window) if self.window is not None else int(self.order)

    def fit(self, X: Sequence[LabeledSequence], y=None, n_symbols: int | None = None):
        """Count transitions and label signatures over ``X``.

        ``n_symbols`` is the vocabulary size including the begin-marker;
        inferred from the corpus when omitted.
        """
        self._check_params()
        seqs = check_sequences(X)
        if not seqs:
            raise EmptyCorpus("cannot fit on an empty corpus")
        if n_symbols is None:
            n_symbols = max(max(s.event_indices) for s in seqs) + 1
        n_labels = len(seqs[0].labels)
        check_sequences(seqs, n_symbols, n_labels)
        ctx_len = int(self.order) - 1
        win = self.window_

        ev_counts: dict[tuple, np.ndarray] = defaultdict(lambda: np.zeros(n_symbols, np.int64))
        lab_pos: dict[tuple, np.ndarray] = defaultdict(lambda: np.zeros(n_labels, np.int64))
        lab_tot: dict[tuple, int] = defaultdict(int)
        # group by length so the window helpers can run on 2-D blocks
        by_len: dict[int, list[LabeledSequence]] = defaultdict(list)
        for s in seqs:
            by_len[len(s)].append(s)
        for L, group in sorted(by_len.items()):
            tokens = np.stack([s.tokens for s in group])
            labels = np.array([s.labels for s in group], dtype=np.int64)
            presence = _window_presence(tokens, win, n_symbols)
            for t in range(L + 1):
                if t < L:
                    ctx = _context_rows(tokens, t, ctx_len) if ctx_len else np.zeros((len(group), 0), np.int64)
                    nxt = tokens[:, t + 1]
                    uniq, inv = np.unique(np.column_stack([ctx, nxt]), axis=0, return_inverse=True)
                    cnt = np.bincount(inv.ravel(), minlength=len(uniq))
                    for row, c in zip(uniq, cnt):
                        ev_counts[_key(row[:-1])][row[-1]] += c
                _, sig = next(presence)
                uniq, inv = np.unique(sig, axis=0, return_inverse=True)
                inv = inv.ravel()
                pos = np.zeros((len(uniq), n_labels), dtype=np.int64)
                np.add.at(pos, inv, labels)
                tot = np.bincount(inv, minlength=len(uniq))
                for row, p, c in zip(uniq, pos, tot):
                    key = _presence_key(row)
                    lab_pos[key] += p
                    lab_tot[key] += int(c)

        self.n_symbols_ = int(n_symbols)
        self.n_labels_ = int(n_labels)
        self.event_counts_ = {k: v.copy() for k, v in ev_counts.items()}
        self.label_positive_ = {k: v.copy() for k, v in lab_pos.items()}
        self.label_total_ = dict(lab_tot)
        self.n_sequences_ = len(seqs)
        self.label_support_ = np.array([s.labels for s in seqs], dtype=np.int64).sum(axis=0)
        self._build_tables()
        return self

    def _build_tables(self):
        a = float(self.alpha)
        n = self.n_symbols_
        unigram = np.zeros(n, dtype=np.int64)
        for v in self.event_counts_.values():
            unigram += v
        self._unigram = self._smooth_events(unigram, a)
        self._event_table = {k: self._smooth_events(v, a) for k, v in self.event_counts_.items()}
        pos = np.zeros(self.n_labels_, dtype=np.int64)
        tot = 0
        for k, v in self.label_positive_.items():
            pos += v
            tot += self.label_total_[k]
        self._label_marginal = (pos + a) / (tot + 2 * a)
        self._label_table = {
            k: (v + a) / (self.label_total_[k] + 2 * a) for k, v in self.label_positive_.items()
        }

    def _smooth_events(self, counts: np.ndarray, a: float) -> np.ndarray:
        probs = counts.astype(np.float64) + a
        probs[0] = 0.0
        return probs / probs.sum()

    def event_proba_path(self, tokens) -> np.ndarray:
        check_is_fitted(self, "event_counts_")
        tokens = check_tokens(tokens, self.n_symbols_)
        n, width = tokens.shape
        ctx_len = int(self.order) - 1
        out = np.empty((n, width, self.n_symbols_))
        for t in range(width):
            if ctx_len == 0:
                out[:, t] = self._event_table.get((), self._unigram)
                continue
            ctx = _context_rows(tokens, t, ctx_len)
            uniq, inv = np.unique(ctx, axis=0, return_inverse=True)
            rows = np.stack([self._event_table.get(_key(r), self._unigram) for r in uniq])
            out[:, t] = rows[inv.ravel()]
        return out

    def label_proba_path(self, tokens) -> np.ndarray:
        check_is_fitted(self, "label_positive_")
        tokens = check_tokens(tokens, self.n_symbols_)
        n, width = tokens.shape
        out = np.empty((n, width, self.n_labels_))
        for t, sig in _window_presence(tokens, self.window_, self.n_symbols_):
            uniq, inv = np.unique(sig, axis=0, return_inverse=True)
            rows = np.stack([self._label_table.get(_presence_key(r), self._label_marginal) for r in uniq])
            out[:, t] = rows[inv.ravel()]
        return out

    @property
    def metadata(self) -> dict:
        check_is_fitted(self, "event_counts_")
        return {
            "backend": self.backend,
            "order": int(self.order),
            "alpha": float(self.alpha),
            "window": self.window_,
            "n_sequences": self.n_sequences_,
            "label_support": self.label_support_.tolist(),
        }

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        check_is_fitted(self, "event_counts_")
        return {
            "format": "oscar-kit/ngram",
            "version": NGRAM_FORMAT_VERSION,
            "order": int(self.order),
            "alpha": float(self.alpha),
            "window": self.window,
            "n_symbols": self.n_symbols_,
            "n_labels": self.n_labels_,
            "n_sequences": self.n_sequences_,
            "label_support": self.label_support_.tolist(),
            "event_counts": [[list(k), v.tolist()] for k, v in sorted(self.event_counts_.items())],
            "label_counts": [
                [list(k), self.label_positive_[k].tolist(), self.label_total_[k]]
                for k in sorted(self.label_positive_)
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "NGramDensity":
        if data.get("format") != "oscar-kit/ngram" or data.get("version") != NGRAM_FORMAT_VERSION:
            raise InvalidModel("not a version-1 n-gram dump")
        est = cls(order=data["order"], alpha=data["alpha"], window=data["window"])
        est.n_symbols_ = int(data["n_symbols"])
        est.n_labels_ = int(data["n_labels"])
        est.n_sequences_ = int(data["n_sequences"])
        est.label_support_ = np.array(data["label_support"], dtype=np.int64)
        est.event_counts_ = {tuple(k): np.array(v, dtype=np.int64) for k, v in data["event_counts"]}
        est.label_positive_ = {tuple(k): np.array(p, dtype=np.int64) for k, p, _ in data["label_counts"]}
        est.label_total_ = {tuple(k): int(t) for k, _, t in data["label_counts"]}
        est._build_tables()
        return est

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, separators=(",", ":"))

    @classmethod
    def load(cls, path) -> "NGramDensity":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def fit_ngram(corpus: Sequence[LabeledSequence], order: int = 2, alpha: float = 0.5,
              window: int | None = None, n_symbols: int | None = None) -> NGramDensity:
    return NGramDensity(order=order, alpha=alpha, window=window).fit(corpus, n_symbols=n_symbols)


def query_event(pair: DensityEstimator, prefix: Sequence[int]) -> np.ndarray:
    return pair.predict_event_proba(prefix)


def query_labels(pair: DensityEstimator, prefix: Sequence[int]) -> np.ndarray:
    return pair.predict_label_proba(prefix)
