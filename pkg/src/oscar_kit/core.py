"""Domain types shared across the package.

Sequences are stored as vocabulary indices.  Index 0 of every vocabulary is
the begin-marker, which prefixes every sequence when it is fed to a density
model and never occurs as a real event.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

BEGIN_MARKER = "<BOS>"


class OscarError(Exception):
    """Base class for all errors raised by this package."""


class UnknownSymbol(OscarError, KeyError):
    pass


class InvalidSequence(OscarError, ValueError):
    pass


class InvalidModel(OscarError, ValueError):
    pass


class EnumerationTooLarge(OscarError):
    pass


class EmptyCorpus(OscarError, ValueError):
    pass


class ContextTooShort(OscarError, ValueError):
    pass


class DegenerateVector(OscarError, ValueError):
    pass


class EmptyInput(OscarError, ValueError):
    pass


@dataclass(frozen=True)
class EventVocabulary:
    """Ordered, duplicate-free event symbols with the begin-marker at index 0.

    Parameters
    ----------
    symbols : sequence of str
        Event symbols.  If the first entry is not the begin-marker it is
        prepended automatically.
    """

    symbols: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __init__(self, symbols: Iterable[str], begin_marker: str = BEGIN_MARKER):
        symbols = tuple(str(s) for s in symbols)
        if not symbols or symbols[0] != begin_marker:
            symbols = (begin_marker,) + symbols
        if len(set(symbols)) != len(symbols):
            raise InvalidModel("vocabulary symbols must be unique")
        if len(symbols) < 2:
            raise InvalidModel("vocabulary needs at least one event besides the begin-marker")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(symbols)})

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[str]:
        return iter(self.symbols)

    @property
    def begin_marker(self) -> str:
        return self.symbols[0]

    @property
    def events(self) -> tuple[str, ...]:
        """Real event symbols (begin-marker excluded)."""
        return self.symbols[1:]

    def encode(self, symbol: str) -> int:
        return vocab_lookup(self, symbol)

    def decode(self, index: int) -> str:
        if not 0 <= index < len(self.symbols):
            raise UnknownSymbol(index)
        return self.symbols[index]

    def to_json(self) -> list[str]:
        return list(self.symbols)


def vocab_lookup(vocab: EventVocabulary, symbol: str) -> int:
    """Return the index of ``symbol`` in ``vocab``; raise UnknownSymbol if absent."""
    try:
        return vocab._index[symbol]
    except KeyError:
        raise UnknownSymbol(symbol) from None


@dataclass(frozen=True)
class LabelCatalog:
    names: tuple[str, ...]

    def __init__(self, names: Iterable[str]):
        names = tuple(str(n) for n in names)
        if not names:
            raise InvalidModel("label catalog must not be empty")
        if len(set(names)) != len(names):
            raise InvalidModel("label names must be unique")
        object.__setattr__(self, "names", names)

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownSymbol(name) from None


@dataclass(frozen=True)
class Event:
    step: int
    time: float
    event: int


@dataclass(frozen=True)
class LabeledSequence:
    """Ordered event occurrences plus a binary label vector attached at the last step."""

    events: tuple[Event, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        events = tuple(self.events)
        if not events:
            raise InvalidSequence("a sequence needs at least one event")
        for expected, ev in enumerate(events, start=1):
            if ev.step != expected:
                raise InvalidSequence(f"steps must be consecutive from 1, got {ev.step} at {expected}")
            if ev.event == 0:
                raise InvalidSequence("the begin-marker cannot occur inside a sequence")
            if ev.time < 0:
                raise InvalidSequence("timestamps must be nonnegative")
        times = [ev.time for ev in events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise InvalidSequence("timestamps must be nondecreasing")
        labels = tuple(int(b) for b in self.labels)
        if any(b not in (0, 1) for b in labels):
            raise InvalidSequence("labels must be bits")
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_indices(
        cls,
        events: Sequence[int],
        labels: Sequence[int],
        times: Sequence[float] | None = None,
    ) -> "LabeledSequence":
        if times is None:
            times = [float(i) for i in range(1, len(events) + 1)]
        return cls(
            tuple(Event(i + 1, float(t), int(e)) for i, (e, t) in enumerate(zip(events, times))),
            tuple(labels),
        )

    def __len__(self) -> int:
        return len(self.events)

    @property
    def event_indices(self) -> tuple[int, ...]:
        return tuple(ev.event for ev in self.events)

    @property
    def tokens(self) -> np.ndarray:
        """Begin-marker followed by the events; token ``s`` is the event at step ``s``."""
        return np.array((0,) + self.event_indices, dtype=np.int64)

    def presence(self) -> frozenset[int]:
        return frozenset(self.event_indices)


@dataclass(frozen=True)
class MarkovBoundarySet:
    """Per-label sets of event-type indices (begin-marker never included)."""

    sets: tuple[frozenset[int], ...]

    def __init__(self, sets: Iterable[Iterable[int]]):
        sets = tuple(frozenset(int(i) for i in s) for s in sets)
        if any(0 in s for s in sets):
            raise InvalidModel("the begin-marker cannot belong to a Markov boundary")
        object.__setattr__(self, "sets", sets)

    def __getitem__(self, label: int) -> frozenset[int]:
        return self.sets[label]

    def __len__(self) -> int:
        return len(self.sets)

    def to_json(self, vocab: EventVocabulary, catalog: LabelCatalog) -> dict[str, list[str]]:
        return {
            name: sorted(vocab.decode(i) for i in s) for name, s in zip(catalog.names, self.sets)
        }

    @classmethod
    def from_json(
        cls, data: dict, vocab: EventVocabulary, catalog: LabelCatalog
    ) -> "MarkovBoundarySet":
        sets = []
        for name in catalog.names:
            sets.append({vocab.encode(s) for s in data.get(name, [])})
        return cls(sets)


@dataclass(frozen=True)
class CausalEdge:
    step: int
    event: int
    label: int
    cmi: float
    indicator_mean: float
    indicator_std: float


@dataclass(frozen=True)
class CausalGraph:
    """Event occurrences linked to the labels they were found to influence."""

    sequence: LabeledSequence
    edges: tuple[CausalEdge, ...]

    def __post_init__(self):
        last = len(self.sequence)
        for e in self.edges:
            if not 1 <= e.step <= last:
                raise InvalidSequence(f"edge source step {e.step} outside the sequence")
            if e.cmi < 0 or e.indicator_std < 0 or not -1.0 <= e.indicator_mean <= 1.0:
                raise InvalidSequence("edge statistics out of range")


# -- line-delimited JSON ----------------------------------------------------


def sequence_to_record(
    seq: LabeledSequence, vocab: EventVocabulary, catalog: LabelCatalog
) -> dict:
    return {
        "events": [{"t": ev.time, "e": vocab.decode(ev.event)} for ev in seq.events],
        "labels": [name for name, bit in zip(catalog.names, seq.labels) if bit],
    }


def sequence_from_record(
    record: dict, vocab: EventVocabulary, catalog: LabelCatalog
) -> LabeledSequence:
    events = record["events"]
    positive = set(record.get("labels", []))
    unknown = positive - set(catalog.names)
    if unknown:
        raise UnknownSymbol(sorted(unknown)[0])
    return LabeledSequence.from_indices(
        [vocab.encode(ev["e"]) for ev in events],
        [int(name in positive) for name in catalog.names],
        [float(ev["t"]) for ev in events],
    )


def write_sequences(path, seqs: Iterable[LabeledSequence], vocab, catalog) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in seqs:
            fh.write(json.dumps(sequence_to_record(seq, vocab, catalog), separators=(",", ":")))
            fh.write("\n")


def read_sequences(path, vocab, catalog) -> list[LabeledSequence]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(sequence_from_record(json.loads(line), vocab, catalog))
    return out


def read_string_list(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not all(isinstance(s, str) for s in data):
        raise InvalidModel(f"{path}: expected a JSON array of strings")
    return data


def write_string_list(path, items: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(list(items), fh)
