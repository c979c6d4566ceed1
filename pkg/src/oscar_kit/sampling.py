"""Particle sampling of the conditioning context.

A particle is a copy of the sequence whose first ``context_floor`` tokens
(begin-marker included, and kept) are redrawn; everything after the
context is the original suffix.  Context token ``t`` is drawn from the
truncated next-event distribution the density model gives after the
original prefix ``tokens[:t]``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .core import ContextTooShort, LabeledSequence

STRATEGIES = ("none", "permutation", "top_k", "top_k_nucleus")


@dataclass(frozen=True)
class SamplingConfig:
    """How contexts are resampled.

    ``n_particles`` is forced to 1 for ``strategy="none"``.  ``temperature``
    rescales log-probabilities before truncation.
    """

    n_particles: int = 68
    strategy: str = "top_k_nucleus"
    top_k: int = 35
    top_p: float = 0.8
    temperature: float | None = None
    context_floor: int = 2
    seed: int = 0

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))
        if self.strategy == "none" and self.n_particles != 1:
            object.__setattr__(self, "n_particles", 1)

    def validate(self) -> list[str]:
        errors = []
        if self.strategy not in STRATEGIES:
            errors.append(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if int(self.n_particles) < 1:
            errors.append("n_particles must be >= 1")
        if self.strategy in ("top_k", "top_k_nucleus") and (self.top_k is None or int(self.top_k) < 1):
            errors.append("top_k must be >= 1")
        if self.strategy == "top_k_nucleus" and (self.top_p is None or not 0 < float(self.top_p) <= 1):
            errors.append("top_p must lie in (0, 1]")
        if self.temperature is not None and not float(self.temperature) > 0:
            errors.append("temperature must be positive")
        if int(self.context_floor) < 1:
            errors.append("context_floor must be >= 1")
        return errors

    def with_(self, **changes) -> "SamplingConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class ParticleSet:
    tokens: np.ndarray  # (n_particles, L + 1), column 0 is the begin-marker
    context_floor: int

    def __len__(self) -> int:
        return self.tokens.shape[0]


def apply_temperature(probs: np.ndarray, temperature: float | None) -> np.ndarray:
    """softmax(log p / T) along the last axis; zero entries stay zero."""
    if temperature is None or temperature == 1:
        return probs
    with np.errstate(divide="ignore"):
        logits = np.log(probs) / temperature
    logits -= logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=-1, keepdims=True)


def top_k_mask(probs: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask of the ``k`` most probable entries (ties broken by lower index)."""
    order = np.argsort(-probs, axis=-1, kind="stable")
    ranks = np.argsort(order, axis=-1, kind="stable")
    return (ranks < k) & (probs > 0)


def nucleus_mask(probs: np.ndarray, p: float, candidates: np.ndarray | None = None) -> np.ndarray:
    """Keep the most probable candidates while their cumulative mass stays <= p.

    The most probable candidate is always kept.  Mass is accumulated on the
    (untruncated) probabilities in descending order.
    """
    probs = np.atleast_2d(probs)
    if candidates is None:
        candidates = probs > 0
    masked = np.where(candidates, probs, 0.0)
    order = np.argsort(-masked, axis=-1, kind="stable")
    sorted_p = np.take_along_axis(masked, order, axis=-1)
    # slack so p=1 keeps everything despite cumsum rounding past 1.0
    keep_sorted = np.cumsum(sorted_p, axis=-1) <= p + 1e-12
    keep_sorted[:, 0] = True
    keep = np.zeros_like(keep_sorted)
    np.put_along_axis(keep, order, keep_sorted, axis=-1)
    return keep & candidates


def truncate_distribution(
    probs: np.ndarray,
    top_k: int | None = None,
    top_p: float | None = None,
    temperature: float | None = None,
) -> np.ndarray:
    """Temperature, then top-k, then nucleus; renormalised rows."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    probs = apply_temperature(probs, temperature)
    keep = probs > 0
    if top_k is not None:
        keep &= top_k_mask(probs, int(top_k))
    if top_p is not None:
        keep = nucleus_mask(probs, float(top_p), keep)
    out = np.where(keep, probs, 0.0)
    return out / out.sum(axis=-1, keepdims=True)


def sequence_stream(seq: LabeledSequence | np.ndarray, seed: int) -> np.random.Generator:
    """Random stream keyed by (seed, sequence content).

    Keying on content instead of batch position keeps results independent of
    input order and of how a batch is split across workers.
    """
    tokens = seq.tokens if isinstance(seq, LabeledSequence) else np.asarray(seq, dtype=np.int64)
    digest = hashlib.blake2b(np.ascontiguousarray(tokens, dtype="<i8").tobytes(), digest_size=8)
    content = int.from_bytes(digest.digest(), "little")
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), content]))


def sample_particles(pair, seq: LabeledSequence, cfg: SamplingConfig) -> ParticleSet:
    """Draw ``cfg.n_particles`` context variants of ``seq``.

    Row ``l`` only depends on the first ``l + 1`` rows of the uniform draws,
    so the particles for N are a prefix of those for 2N.
    """
    tokens = seq.tokens
    L = len(seq)
    c = int(cfg.context_floor)
    if L < c:
        raise ContextTooShort(f"sequence of length {L} shorter than context floor {c}")
    N = int(cfg.n_particles)
    particles = np.tile(tokens, (N, 1))
    if cfg.strategy == "none" or c == 1:
        return ParticleSet(particles, c)

    rng = sequence_stream(tokens, cfg.seed)
    U = rng.random((N, c - 1))
    if cfg.strategy == "permutation":
        perm = np.argsort(U, axis=1, kind="stable") + 1
        particles[:, 1:c] = tokens[perm]
        return ParticleSet(particles, c)

    dists = pair.event_proba_path(tokens[None, :c - 1])[0]  # (c - 1, |X|): after tokens[:t]
    top_p = cfg.top_p if cfg.strategy == "top_k_nucleus" else None
    q = truncate_distribution(dists, cfg.top_k, top_p, cfg.temperature)
    cdf = np.cumsum(q, axis=1)
    cdf[:, -1] = 1.0
    for t in range(1, c):
        row = cdf[t - 1]
        drawn = np.searchsorted(row, U[:, t - 1], side="right")
        # guard against float slack selecting a zero-mass trailing entry
        support = np.flatnonzero(q[t - 1] > 0)
        drawn = np.clip(drawn, support[0], support[-1])
        particles[:, t] = drawn
    return ParticleSet(particles, c)
