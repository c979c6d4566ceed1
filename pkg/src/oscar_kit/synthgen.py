"""Synthetic multi-labeled event sequences with exact ground truth.

Events follow a first-order Markov chain over the vocabulary; each label is
either a boolean rule in conjunctive normal form over the *presence set* of
the finished sequence, or a "ruleless" label drawn by an independent coin
flip (no ground truth available).

Because labels depend on the whole sequence, the label conditional given a
prefix marginalises over every possible continuation.  Two exact routes are
provided: brute-force enumeration of completions (:func:`enumerate_label_conditional`)
and a backward recursion over (remaining steps, last event, presence mask of
the rule's variables) used by the oracle density backend.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    EnumerationTooLarge,
    EventVocabulary,
    InvalidModel,
    LabelCatalog,
    LabeledSequence,
    MarkovBoundarySet,
)

DEFAULT_ENUMERATION_BUDGET = 10**7


@dataclass(frozen=True)
class Literal:
    event: int
    negated: bool = False

    def satisfied(self, presence) -> bool:
        return (self.event in presence) != self.negated


@dataclass(frozen=True)
class LabelRule:
    """Conjunction of clauses; each clause is a disjunction of literals."""

    label: int
    clauses: tuple[tuple[Literal, ...], ...]

    def __post_init__(self):
        clauses = tuple(tuple(c) for c in self.clauses)
        if not clauses or any(not c for c in clauses):
            raise InvalidModel("a rule needs at least one clause and no empty clause")
        object.__setattr__(self, "clauses", clauses)

    @property
    def variables(self) -> frozenset[int]:
        return frozenset(lit.event for clause in self.clauses for lit in clause)

    def format(self, vocab: EventVocabulary) -> str:
        parts = []
        for clause in self.clauses:
            lits = [("!" if lit.negated else "") + vocab.decode(lit.event) for lit in clause]
            parts.append(lits[0] if len(lits) == 1 else "(" + " | ".join(lits) + ")")
        return " & ".join(parts)


def parse_rule(text: str, vocab: EventVocabulary, label: int = 0) -> LabelRule:
    """Parse a CNF rule such as ``"x1 & (x5 | x8) & (!x10 | !x20)"``."""
    clauses = []
    for part in text.split("&"):
        part = part.strip()
        if part.startswith("(") and part.endswith(")"):
            part = part[1:-1]
        lits = []
        for token in part.split("|"):
            token = token.strip()
            m = re.fullmatch(r"(!?)\s*(\S+)", token)
            if not m:
                raise InvalidModel(f"cannot parse literal {token!r} in {text!r}")
            lits.append(Literal(vocab.encode(m.group(2)), bool(m.group(1))))
        clauses.append(tuple(lits))
    return LabelRule(label, tuple(clauses))


def evaluate_rule(rule: LabelRule, presence) -> int:
    """1 iff every clause has at least one satisfied literal."""
    return int(all(any(lit.satisfied(presence) for lit in clause) for clause in rule.clauses))


def true_markov_boundary(rules: Iterable[LabelRule], n_labels: int | None = None) -> MarkovBoundarySet:
    """Every event named in a label's rule, negated or not; empty for ruleless labels."""
    rules = list(rules)
    if n_labels is None:
        n_labels = max((r.label for r in rules), default=-1) + 1
    sets: list[set[int]] = [set() for _ in range(n_labels)]
    for rule in rules:
        sets[rule.label] |= rule.variables
    return MarkovBoundarySet(sets)


@dataclass(frozen=True)
class GeneratorModel:
    """First-order Markov event process plus boolean label rules.

    Parameters
    ----------
    vocab : EventVocabulary
    catalog : LabelCatalog
    transition : array of shape (|vocab|, |vocab|)
        Row ``s`` is the next-event distribution after event ``s`` (row 0 is
        the distribution of the first event).  Column 0 must be zero.
    length : int or mapping {length: probability}
    rules : sequence of LabelRule
        At most one rule per label.
    ruleless : mapping {label index: probability}
        Labels without a rule, drawn by an independent coin flip.
    seed : int
    """

    vocab: EventVocabulary
    catalog: LabelCatalog
    transition: np.ndarray
    length: int | Mapping[int, float]
    rules: tuple[LabelRule, ...]
    ruleless: Mapping[int, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        T = np.array(self.transition, dtype=np.float64)
        n = len(self.vocab)
        if T.shape != (n, n):
            raise InvalidModel(f"transition must be {n}x{n}, got {T.shape}")
        if (T < 0).any() or not np.allclose(T.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise InvalidModel("transition rows must be nonnegative and sum to 1")
        if (T[:, 0] != 0).any():
            raise InvalidModel("the begin-marker cannot be emitted")
        T.setflags(write=False)
        object.__setattr__(self, "transition", T)

        if isinstance(self.length, Mapping):
            dist = {int(k): float(v) for k, v in self.length.items() if float(v) > 0}
            total = sum(dist.values())
            if not dist or min(dist) < 1 or abs(total - 1.0) > 1e-9:
                raise InvalidModel("length distribution must be over lengths >= 1 and sum to 1")
            object.__setattr__(self, "length", dict(sorted(dist.items())))
        elif int(self.length) < 1:
            raise InvalidModel("sequence length must be >= 1")
        else:
            object.__setattr__(self, "length", int(self.length))

        rules = tuple(self.rules)
        seen = set()
        for r in rules:
            if not 0 <= r.label < len(self.catalog) or r.label in seen:
                raise InvalidModel(f"bad or duplicate rule label {r.label}")
            if any(not 1 <= lit.event < n for c in r.clauses for lit in c):
                raise InvalidModel("rule literals must name real events")
            seen.add(r.label)
        ruleless = {int(k): float(v) for k, v in dict(self.ruleless).items()}
        for lbl, p in ruleless.items():
            if lbl in seen or not 0 <= lbl < len(self.catalog) or not 0 <= p <= 1:
                raise InvalidModel(f"bad ruleless label {lbl}")
        missing = set(range(len(self.catalog))) - seen - set(ruleless)
        if missing:
            raise InvalidModel(f"labels without rule or coin probability: {sorted(missing)}")
        object.__setattr__(self, "rules", rules)
        object.__setattr__(self, "ruleless", ruleless)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def length_distribution(self) -> dict[int, float]:
        if isinstance(self.length, dict):
            return self.length
        return {self.length: 1.0}

    @property
    def max_length(self) -> int:
        return max(self.length_distribution)

    def rule_for(self, label: int) -> LabelRule | None:
        for r in self.rules:
            if r.label == label:
                return r
        return None

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        v = self.vocab
        length = (
            self.length if isinstance(self.length, int)
            else {str(k): p for k, p in self.length.items()}
        )
        return {
            "vocab": list(v.symbols),
            "labels": list(self.catalog.names),
            "transition": self.transition.tolist(),
            "length": length,
            "rules": [
                {
                    "label": self.catalog.names[r.label],
                    "clauses": [[[v.decode(l.event), l.negated] for l in c] for c in r.clauses],
                }
                for r in self.rules
            ],
            "ruleless": {self.catalog.names[k]: p for k, p in self.ruleless.items()},
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "GeneratorModel":
        vocab = EventVocabulary(data["vocab"])
        catalog = LabelCatalog(data["labels"])
        rules = []
        for r in data.get("rules", []):
            lbl = catalog.index(r["label"])
            clauses = tuple(
                tuple(Literal(vocab.encode(sym), bool(neg)) for sym, neg in clause)
                for clause in r["clauses"]
            )
            rules.append(LabelRule(lbl, clauses))
        length = data["length"]
        if isinstance(length, dict):
            length = {int(k): float(p) for k, p in length.items()}
        ruleless = {catalog.index(k): float(p) for k, p in data.get("ruleless", {}).items()}
        return cls(vocab, catalog, np.asarray(data["transition"]), length, tuple(rules),
                   ruleless, int(data.get("seed", 0)))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "GeneratorModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


# -- sampling -----------------------------------------------------------------


def _sequence_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), index]))


def sample_dataset(model: GeneratorModel, n: int, start: int = 0) -> list[LabeledSequence]:
    """Draw ``n`` i.i.d. sequences.

    Sequence ``i`` uses its own random stream derived from ``(model.seed,
    start + i)``, so any slicing of the index range yields the same
    sequences as one serial call.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lengths = model.length_distribution
    Lmax = max(lengths)
    n_lab = len(model.catalog)
    width = 1 + 2 * Lmax + n_lab
    U = np.stack([_sequence_rng(model.seed, start + i).random(width) for i in range(n)])

    len_values = np.array(list(lengths))
    len_cdf = np.cumsum(list(lengths.values()))
    len_cdf[-1] = 1.0
    seq_len = len_values[np.searchsorted(len_cdf, U[:, 0], side="right")]

    cdf = np.cumsum(model.transition, axis=1)
    cdf[:, -1] = 1.0
    tokens = np.zeros((n, Lmax + 1), dtype=np.int64)
    for t in range(1, Lmax + 1):
        rows = cdf[tokens[:, t - 1]]
        tokens[:, t] = (rows <= U[:, t, None]).sum(axis=1)
    gaps = np.round(-np.log1p(-U[:, 1 + Lmax : 1 + 2 * Lmax]), 3)
    times = np.round(np.cumsum(gaps, axis=1), 3)
    coins = U[:, 1 + 2 * Lmax :]

    out = []
    for i in range(n):
        L = int(seq_len[i])
        events = tokens[i, 1 : L + 1].tolist()
        presence = frozenset(events)
        labels = [0] * n_lab
        for r in model.rules:
            labels[r.label] = evaluate_rule(r, presence)
        for lbl, p in model.ruleless.items():
            labels[lbl] = int(coins[i, lbl] < p)
        out.append(LabeledSequence.from_indices(events, labels, times[i, :L].tolist()))
    return out


# -- exact conditionals -----------------------------------------------------


def _check_prefix(model: GeneratorModel, prefix: Sequence[int]) -> list[int]:
    prefix = [int(x) for x in prefix]
    if not prefix or prefix[0] != 0:
        raise InvalidModel("prefix must start with the begin-marker")
    if any(not 1 <= x < len(model.vocab) for x in prefix[1:]):
        raise InvalidModel("prefix contains an unknown or begin-marker event")
    if len(prefix) - 1 > model.max_length:
        raise InvalidModel("prefix longer than any sequence the model emits")
    return prefix


def exact_next_event(model: GeneratorModel, prefix: Sequence[int]) -> np.ndarray:
    """Next-event distribution given the prefix: the last event's transition row."""
    prefix = _check_prefix(model, prefix)
    return model.transition[prefix[-1]].copy()


def enumerate_label_conditional(
    model: GeneratorModel,
    prefix: Sequence[int],
    label: int,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> float:
    """P(label = 1 | prefix) by explicit enumeration of every completion."""
    prefix = _check_prefix(model, prefix)
    m = len(prefix) - 1
    if label in model.ruleless:
        return model.ruleless[label]
    rule = model.rule_for(label)
    lengths = {l: p for l, p in model.length_distribution.items() if l >= m}
    n_events = len(model.vocab) - 1
    count = sum(n_events ** (l - m) for l in lengths)
    if count > budget:
        raise EnumerationTooLarge(f"{count} completions exceed the budget of {budget}")
    T = model.transition
    seen = set(prefix[1:])
    num = den = 0.0
    for l, pl in lengths.items():
        den += pl
        for completion in itertools.product(range(1, n_events + 1), repeat=l - m):
            w = pl
            prev = prefix[-1]
            for x in completion:
                w *= T[prev, x]
                prev = x
            if w and evaluate_rule(rule, seen.union(completion)):
                num += w
    return min(max(num / den, 0.0), 1.0)


def exact_label_conditional(
    model: GeneratorModel,
    prefix: Sequence[int],
    label: int,
    method: str = "recursion",
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> float:
    """P(label = 1 | prefix), exact up to floating-point rounding.

    ``method="enumerate"`` walks every completion (subject to ``budget``);
    ``method="recursion"`` uses the backward table of :class:`LabelOracle`.
    """
    if method == "enumerate":
        return enumerate_label_conditional(model, prefix, label, budget)
    if method != "recursion":
        raise ValueError(f"unknown method {method!r}")
    prefix = _check_prefix(model, prefix)
    oracle = LabelOracle(model)
    return float(oracle.path_proba(np.asarray([prefix]))[0, -1, label])


class LabelOracle:
    """Exact P(Y | prefix) for every label and every prefix length.

    For a rule over variables v_1..v_r the label given a prefix depends only
    on the number of observed events m, the last event s, and which v_k have
    been seen (mask).  The table ``table[label][m, s, mask]`` is filled by a
    backward recursion over the number of remaining events.
    """

    def __init__(self, model: GeneratorModel):
        self.model = model
        n = len(model.vocab)
        Lmax = model.max_length
        lengths = model.length_distribution
        T = model.transition
        self.bits: list[np.ndarray] = []
        self.tables: list[np.ndarray | float] = []
        for label in range(len(model.catalog)):
            rule = model.rule_for(label)
            if rule is None:
                self.bits.append(np.zeros(n, dtype=np.int64))
                self.tables.append(float(model.ruleless[label]))
                continue
            variables = sorted(rule.variables)
            bit = np.zeros(n, dtype=np.int64)
            for k, v in enumerate(variables):
                bit[v] = 1 << k
            M = 1 << len(variables)
            masks = np.arange(M)
            final = np.array(
                [evaluate_rule(rule, {v for k, v in enumerate(variables) if mk >> k & 1})
                 for mk in range(M)],
                dtype=np.float64,
            )
            # value[r][s, mask]: P(rule holds at the end | r events remain, last = s)
            value = [np.tile(final, (n, 1))]
            for _ in range(Lmax):
                prev = value[-1]
                G = prev[np.arange(n)[:, None], masks[None, :] | bit[:, None]]
                value.append(T @ G)
            table = np.zeros((Lmax + 1, n, M))
            for m in range(Lmax + 1):
                ws = [(l - m, p) for l, p in lengths.items() if l >= m]
                tot = sum(p for _, p in ws)
                table[m] = sum(p * value[r] for r, p in ws) / tot
            # rounding can push row sums a few ulps past 1
            np.clip(table, 0.0, 1.0, out=table)
            self.bits.append(bit)
            self.tables.append(table)

    def path_proba(self, tokens: np.ndarray) -> np.ndarray:
        """Label probabilities after every prefix of each row.

        ``tokens`` has shape (n, T) with column 0 the begin-marker; the
        result has shape (n, T, |labels|) and entry ``[r, t]`` is
        P(Y | tokens[r, :t + 1]).
        """
        tokens = np.asarray(tokens, dtype=np.int64)
        n, width = tokens.shape
        if width - 1 > self.model.max_length:
            raise InvalidModel("prefix longer than any sequence the model emits")
        out = np.empty((n, width, len(self.tables)))
        steps = np.arange(width)[None, :]
        for j, (bit, table) in enumerate(zip(self.bits, self.tables)):
            if isinstance(table, float):
                out[:, :, j] = table
                continue
            mask = np.bitwise_or.accumulate(bit[tokens], axis=1)
            out[:, :, j] = table[np.broadcast_to(steps, tokens.shape), tokens, mask]
        return out


# -- model suites -------------------------------------------------------------


def random_rule(rng: np.random.Generator, label: int, events: Sequence[int], n_literals: int,
                p_negate: float = 0.25) -> LabelRule:
    """Random CNF rule over ``n_literals`` distinct events."""
    chosen = rng.choice(np.asarray(events), size=n_literals, replace=False)
    negated = rng.random(n_literals) < p_negate
    # cut the literal list into clauses of size 1 or 2
    clauses, i = [], 0
    while i < n_literals:
        size = 2 if (i + 1 < n_literals and rng.random() < 0.35) else 1
        clauses.append(tuple(Literal(int(e), bool(neg))
                             for e, neg in zip(chosen[i:i + size], negated[i:i + size])))
        i += size
    return LabelRule(label, tuple(clauses))


def random_transition(rng: np.random.Generator, n_events: int, concentration: float = 1.0,
                      iid: bool = False, background: int = 0,
                      background_mass: float = 0.85) -> np.ndarray:
    """Dirichlet rows over real events; begin-marker column zero.

    With ``iid=True`` every row is the same distribution, so events are
    independent and identically distributed.  The first ``background``
    events share ``background_mass`` of every row, which makes the others
    rare, like fault codes among routine messages.
    """
    n = n_events + 1
    rows = 1 if iid else n
    T = np.zeros((n, n))
    if background:
        T[:, 1 : background + 1] = background_mass * rng.dirichlet(
            np.full(background, concentration), size=rows)
        T[:, background + 1 :] = (1 - background_mass) * rng.dirichlet(
            np.full(n_events - background, concentration), size=rows)
    else:
        T[:, 1:] = rng.dirichlet(np.full(n_events, concentration), size=rows)
    return T


def random_model(
    seed: int,
    n_events: int,
    length: int | Mapping[int, float],
    n_labels: int = 2,
    literals: tuple[int, int] = (1, 4),
    p_negate: float = 0.25,
    concentration: float = 1.0,
    iid: bool = False,
    n_ruleless: int = 0,
    background: int = 0,
    background_mass: float = 0.85,
) -> GeneratorModel:
    """A random generator model; everything is derived from ``seed``.

    Rule literals are drawn from the non-background events.
    """
    rng = np.random.default_rng(seed)
    vocab = EventVocabulary([f"x{i}" for i in range(1, n_events + 1)])
    catalog = LabelCatalog([f"y{j}" for j in range(1, n_labels + n_ruleless + 1)])
    T = random_transition(rng, n_events, concentration, iid, background, background_mass)
    events = list(range(background + 1, n_events + 1))
    rules = []
    for j in range(n_labels):
        k = int(rng.integers(literals[0], min(literals[1], len(events)) + 1))
        rules.append(random_rule(rng, j, events, k, p_negate))
    ruleless = {n_labels + j: float(rng.uniform(0.1, 0.5)) for j in range(n_ruleless)}
    return GeneratorModel(vocab, catalog, T, length, tuple(rules), ruleless, seed)
